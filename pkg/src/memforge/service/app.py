"""FastAPI service exposing the memory engine.

Run with ``memforge serve`` or ``uvicorn memforge.service.app:app``.
Errors surface as a JSON envelope {"error": {"code", "message"}} with the
library's stable error codes, so clients can map failures without parsing
messages.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import PipelineConfig
from ..errors import (
    ConfigError,
    FileMissingError,
    MemforgeError,
    NetworkError,
)
from . import handlers
from .schemas import (
    ActivateRequest,
    ActivateResponse,
    BuildRequest,
    BuildResponse,
    EvalRequest,
    EvalResponse,
    ExportBankRequest,
    ExportBankResponse,
    HealthResponse,
    StatsRequest,
    StatsResponse,
)


def _status_for(error: MemforgeError) -> int:
    if isinstance(error, FileMissingError):
        return 404
    if isinstance(error, ConfigError):
        return 400
    if isinstance(error, NetworkError):
        return 502
    if error.exit_code == 3:
        return 422
    return 500


def create_app() -> FastAPI:
    app = FastAPI(title="memforge", version=__version__)

    @app.exception_handler(MemforgeError)
    async def memforge_error_handler(_request: Request, error: MemforgeError):
        return JSONResponse(status_code=_status_for(error), content={"error": error.to_dict()})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.get("/config", response_model=PipelineConfig)
    def default_config() -> PipelineConfig:
        return PipelineConfig()

    @app.post("/build", response_model=BuildResponse)
    def build(request: BuildRequest) -> BuildResponse:
        return handlers.handle_build(request)

    @app.post("/activate", response_model=ActivateResponse)
    def activate(request: ActivateRequest) -> ActivateResponse:
        return handlers.handle_activate(request)

    @app.post("/stats", response_model=StatsResponse)
    def stats(request: StatsRequest) -> StatsResponse:
        return handlers.handle_stats(request)

    @app.post("/eval", response_model=EvalResponse)
    def run_eval(request: EvalRequest) -> EvalResponse:
        return handlers.handle_eval(request)

    @app.post("/export-bank", response_model=ExportBankResponse)
    def export_bank(request: ExportBankRequest) -> ExportBankResponse:
        return handlers.handle_export_bank(request)

    return app


app = create_app()
