"""Command-line client for the memory engine.

Every subcommand builds the same request model the HTTP service accepts
and either executes it in-process (default) or POSTs it to a running
server given via --server. Failures print a JSON error envelope on stderr
and exit with the taxonomy codes: 2 config, 3 data, 4 network, 5 internal.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import PipelineConfig, load_config
from .errors import (
    ConfigError,
    DataError,
    EXIT_INTERNAL,
    MemforgeError,
    NetworkError,
)
from .service import handlers
from .service.schemas import (
    ActivateRequest,
    ActivateResponse,
    BuildRequest,
    BuildResponse,
    EvalRequest,
    EvalResponse,
    ExportBankRequest,
    ExportBankResponse,
    StatsRequest,
    StatsResponse,
)

_CONFIG_FLAGS = (
    ("--tau", float, "tau"),
    ("--alpha", float, "alpha"),
    ("--penalty-f", float, "penalty_f"),
    ("--dim", int, "dim"),
    ("--epsilon", float, "epsilon"),
    ("--cap-dynamic", int, "cap_dynamic"),
    ("--cap-static", int, "cap_static"),
    ("--max-depth", int, "max_depth"),
    ("--query-budget", int, "query_budget"),
    ("--relevance-floor", float, "relevance_floor"),
    ("--disease-lexicon", str, "disease_lexicon"),
    ("--synonym-table", str, "synonym_table"),
    ("--extractor", str, "extractor"),
    ("--remote-endpoint", str, "remote_endpoint"),
)

_ROUTES = {
    "build": (handlers.handle_build, BuildResponse),
    "activate": (handlers.handle_activate, ActivateResponse),
    "stats": (handlers.handle_stats, StatsResponse),
    "eval": (handlers.handle_eval, EvalResponse),
    "export-bank": (handlers.handle_export_bank, ExportBankResponse),
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override it")
    for flag, value_type, _ in _CONFIG_FLAGS:
        parser.add_argument(flag, type=value_type)
    parser.add_argument(
        "--print-config",
        action="store_true",
        help="print the effective config and exit",
    )


def _collect_config(args: argparse.Namespace) -> PipelineConfig:
    overrides = {key: getattr(args, key) for _, _, key in _CONFIG_FLAGS}
    return load_config(args.config, overrides)


def _dispatch(server: str | None, route: str, request, response_cls):
    if server is None:
        handler, _ = _ROUTES[route]
        return handler(request)
    import httpx

    url = f"{server.rstrip('/')}/{route}"
    try:
        response = httpx.post(url, json=request.model_dump(mode="json"), timeout=300.0)
    except httpx.HTTPError as exc:
        raise NetworkError(f"request to {url} failed: {exc}")
    if response.status_code != 200:
        _raise_remote_error(response)
    return response_cls.model_validate(response.json())


def _raise_remote_error(response) -> None:
    try:
        payload = response.json()
        detail = payload["error"]
        code, message = detail["code"], detail["message"]
    except Exception:
        raise NetworkError(
            f"server returned {response.status_code}: {response.text[:200]}"
        )
    for klass in _walk_errors(MemforgeError):
        if klass.code == code and klass is not MemforgeError:
            raise klass(message)
    raise DataError(message)


def _walk_errors(base):
    for sub in base.__subclasses__():
        yield sub
        yield from _walk_errors(sub)


def _print_json(payload: dict) -> str:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    sys.stdout.write(text)
    return text


def _maybe_print_config(args: argparse.Namespace, config: PipelineConfig) -> bool:
    if getattr(args, "print_config", False):
        sys.stdout.write(config.to_json())
        return True
    return False


def _cmd_build(args: argparse.Namespace) -> int:
    config = _collect_config(args)
    if _maybe_print_config(args, config):
        return 0
    if (args.corpus is None) == (args.seed_query is None):
        raise ConfigError("build needs exactly one of --corpus or --seed-query")
    request = BuildRequest(
        snapshot_path=args.snapshot,
        corpus_path=args.corpus,
        seed_query=args.seed_query,
        config=config,
    )
    response = _dispatch(args.server, "build", request, BuildResponse)
    _print_json(response.model_dump(mode="json"))
    return 0


def _cmd_activate(args: argparse.Namespace) -> int:
    config = _collect_config(args)
    if _maybe_print_config(args, config):
        return 0
    if (args.query is None) == (args.tokens is None):
        raise ConfigError("activate needs exactly one of --query or --tokens")
    tokens = None
    if args.tokens is not None:
        tokens_path = Path(args.tokens)
        if not tokens_path.exists():
            raise DataError(f"token matrix file not found: {tokens_path}")
        try:
            tokens = json.loads(tokens_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"token matrix file is not valid JSON: {exc}")
    request = ActivateRequest(
        snapshot_path=args.snapshot,
        query_text=args.query,
        tokens=tokens,
        masked_indices=args.mask_index or None,
        include_rows=args.include_rows,
        projection_query_path=args.projection_query,
        projection_memory_path=args.projection_memory,
        config=config,
    )
    response = _dispatch(args.server, "activate", request, ActivateResponse)
    text = _print_json(response.model_dump(mode="json"))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    config = _collect_config(args)
    if _maybe_print_config(args, config):
        return 0
    request = EvalRequest(
        seed=args.seed,
        planted=args.planted,
        distractors=args.distractors,
        max_cap=args.max_cap,
        config=config,
    )
    response = _dispatch(args.server, "eval", request, EvalResponse)
    sys.stdout.write(response.csv)
    if args.out:
        Path(args.out).write_text(response.csv, encoding="utf-8")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    request = StatsRequest(snapshot_path=args.snapshot)
    response = _dispatch(args.server, "stats", request, StatsResponse)
    _print_json(response.model_dump(mode="json"))
    return 0


def _cmd_export_bank(args: argparse.Namespace) -> int:
    config = _collect_config(args)
    if _maybe_print_config(args, config):
        return 0
    request = ExportBankRequest(
        snapshot_path=args.snapshot,
        out_path=args.out,
        format=args.format,
        config=config,
    )
    response = _dispatch(args.server, "export-bank", request, ExportBankResponse)
    _print_json(response.model_dump(mode="json"))
    return 0


def _cmd_print_config(args: argparse.Namespace) -> int:
    sys.stdout.write(_collect_config(args).to_json())
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memforge",
        description="Knowledge-graph memory engine: build, activate, evaluate.",
    )
    parser.add_argument(
        "--server",
        help="base URL of a running memforge service; default runs in-process",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    build = commands.add_parser("build", help="build a graph snapshot from a corpus")
    build.add_argument("--snapshot", required=True, help="output snapshot path")
    build.add_argument("--corpus", help="JSONL corpus path")
    build.add_argument("--seed-query", help="seed query for live literature search")
    _add_config_flags(build)
    build.set_defaults(func=_cmd_build)

    activate = commands.add_parser("activate", help="extract working memory")
    activate.add_argument("--snapshot", required=True)
    activate.add_argument("--query", help="free-text query")
    activate.add_argument("--tokens", help="JSON file with a T x d token matrix")
    activate.add_argument("--mask-index", type=int, action="append")
    activate.add_argument("--include-rows", action="store_true")
    activate.add_argument("--projection-query", help="binary matrix file")
    activate.add_argument("--projection-memory", help="binary matrix file")
    activate.add_argument("--out", help="also write the JSON report here")
    _add_config_flags(activate)
    activate.set_defaults(func=_cmd_activate)

    evaluate = commands.add_parser("eval", help="planted-fact recall sweep")
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.add_argument("--planted", type=int, default=5)
    evaluate.add_argument("--distractors", type=int, default=45)
    evaluate.add_argument("--max-cap", type=int, default=5)
    evaluate.add_argument("--out", help="write the CSV here as well")
    _add_config_flags(evaluate)
    evaluate.set_defaults(func=_cmd_eval)

    stats = commands.add_parser("stats", help="summarize a snapshot")
    stats.add_argument("--snapshot", required=True)
    stats.set_defaults(func=_cmd_stats)

    export = commands.add_parser("export-bank", help="embed and export the bank")
    export.add_argument("--snapshot", required=True)
    export.add_argument("--out", required=True)
    export.add_argument("--format", choices=("binary", "json"), default="binary")
    _add_config_flags(export)
    export.set_defaults(func=_cmd_export_bank)

    print_config = commands.add_parser("print-config", help="print effective config")
    _add_config_flags(print_config)
    print_config.set_defaults(func=_cmd_print_config)

    serve = commands.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MemforgeError as error:
        sys.stderr.write(json.dumps({"error": error.to_dict()}) + "\n")
        return error.exit_code
    except Exception as error:  # noqa: BLE001 - last-resort taxonomy mapping
        sys.stderr.write(
            json.dumps(
                {"error": {"code": "internal_error", "message": repr(error)}}
            )
            + "\n"
        )
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
