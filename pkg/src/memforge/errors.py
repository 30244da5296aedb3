"""Error taxonomy shared by the library, the service, and the CLI.

Every error carries a stable machine-readable ``code`` and the process
exit code the CLI should use: 2 config, 3 data, 4 network, 5 internal.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NETWORK = 4
EXIT_INTERNAL = 5


class MemforgeError(Exception):
    """Base class; subclasses pin ``code`` and ``exit_code``."""

    code = "internal_error"
    exit_code = EXIT_INTERNAL

    def to_dict(self) -> dict:
        return {"code": self.code, "message": str(self)}


class ConfigError(MemforgeError):
    code = "config_error"
    exit_code = EXIT_CONFIG


class DataError(MemforgeError):
    code = "data_error"
    exit_code = EXIT_DATA


class FileMissingError(DataError):
    code = "file_not_found"


class SnapshotCorruptError(DataError):
    code = "snapshot_corrupt"


class SnapshotVersionError(DataError):
    code = "snapshot_version_mismatch"


class CanonicalizationError(DataError):
    code = "canonicalization_rejected"


class EmptyLTMError(DataError):
    code = "empty_ltm"


class MemoryFullyMaskedError(DataError):
    code = "memory_fully_masked"


class NoActivationError(DataError):
    code = "no_activation"


class DimensionMismatchError(DataError):
    code = "dimension_mismatch"


class ExtractionFailedError(DataError):
    """A single document exhausted its extraction retries."""

    code = "extraction_failed"


class NetworkError(MemforgeError):
    code = "network_error"
    exit_code = EXIT_NETWORK


class InternalError(MemforgeError):
    code = "internal_error"
    exit_code = EXIT_INTERNAL
