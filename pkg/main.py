import logging
import os
import socket
from contextlib import asynccontextmanager

from apscheduler.schedulers.background import BackgroundScheduler
from fastapi import Body, FastAPI, HTTPException, Path, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.text import Text

import core.logger  # noqa
from core.loader import ScenarioConfig, load_scenario
from wae import __version__
from wae.collector import IncompleteSnapshot, MalformedPayload, UnknownMachine, WaeService
from wae.domain import WaeError
from wae.ippool import AddressPool

console = Console(stderr=True)
logger = logging.getLogger(__name__)


def use_rich_logging(level: int = core.logger.LOG_LEVEL) -> None:
    """Swap the colorama console handlers for a RichHandler; the file handler stays."""
    root = logging.getLogger()
    for handler in core.logger.CONSOLE_HANDLERS:
        root.removeHandler(handler)
    rich_handler = RichHandler(
        console=console,
        rich_tracebacks=True,
        tracebacks_show_locals=False,
        show_path=False,
        markup=False,
    )
    rich_handler.setLevel(level)
    rich_handler.addFilter(core.logger.SchedulerNoiseFilter())
    root.addHandler(rich_handler)


def build_service(config: ScenarioConfig) -> WaeService:
    o = config.orchestration
    kwargs = dict(threshold=o.threshold, iteration_cap=o.iteration_cap, last_container_guard=o.last_container_guard)
    path = config.service.snapshot_path
    if path and os.path.exists(path):
        logger.info(f"Restoring state snapshot from {path}")
        service = WaeService.load_state(path, **kwargs)
        if service.n_machines != config.machines.count:
            raise WaeError(f"{path} holds {service.n_machines} machines, config expects {config.machines.count}")
        return service
    pool = AddressPool(config.pool.subnet, config.pool.gateway)
    return WaeService(config.machines.count, pool, config.start_assignment(), **kwargs)


def _error(status_code: int, error: str, detail: str, **extra) -> JSONResponse:
    return JSONResponse(status_code=status_code, content={"error": error, "detail": detail, **extra})


def create_app(config: ScenarioConfig | None = None, service: WaeService | None = None,
               schedule: bool = True) -> FastAPI:
    config = config or load_scenario()
    service = service or build_service(config)
    snapshot_path = config.service.snapshot_path

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        scheduler = None
        if schedule:
            scheduler = BackgroundScheduler()
            scheduler.add_job(service.safe_tick, "interval", seconds=config.service.period_seconds,
                              id="orchestration_tick", max_instances=1, coalesce=True)
            scheduler.start()
            logger.info(f"Orchestration scheduled every {config.service.period_seconds:g}s")
        try:
            yield
        finally:
            if scheduler is not None:
                scheduler.shutdown(wait=False)
            if snapshot_path:
                try:
                    service.save_state(snapshot_path)
                except OSError as e:
                    logger.error(f"Could not write state snapshot to {snapshot_path}: {e}")

    app = FastAPI(
        title="Workload Automation Engine",
        description="Data Collection and Service Discovery endpoints for CDN edge container orchestration.",
        version=__version__,
        lifespan=lifespan,
        docs_url=None,
        redoc_url=None,
    )
    app.state.config = config
    app.state.service = service

    @app.exception_handler(MalformedPayload)
    async def malformed_payload_handler(request: Request, exc: MalformedPayload):
        logger.warning(f"Rejected payload from {request.client.host if request.client else '?'}: {exc}")
        return _error(422, "malformed_payload", exc.message, field=exc.field)

    @app.exception_handler(RequestValidationError)
    async def request_validation_handler(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {"loc": (), "msg": "invalid request"}
        field = ".".join(str(part) for part in first["loc"] if part != "body") or "<root>"
        return _error(422, "malformed_payload", first["msg"], field=field)

    @app.exception_handler(UnknownMachine)
    async def unknown_machine_handler(request: Request, exc: UnknownMachine):
        return _error(404, "unknown_machine", str(exc), machine=exc.machine)

    @app.exception_handler(IncompleteSnapshot)
    async def incomplete_snapshot_handler(request: Request, exc: IncompleteSnapshot):
        return _error(409, "incomplete_snapshot", str(exc), period_id=exc.period_id, missing=exc.missing)

    @app.post("/telemetry", summary="Submit one Instance Manager telemetry report")
    async def ingest_telemetry(payload: dict = Body(...)):
        """
        Stores the report under (period_id, machine); a later report for the
        same key replaces it.
        """
        return service.ingest(payload)

    @app.get("/assignments/{machine}", summary="Commands of the latest round for one machine")
    async def fetch_assignments(machine: int = Path(..., ge=0, title="Machine id")):
        summary, commands = service.assignments_for(machine)
        return {"machine": machine, "round_id": summary.round_id if summary else None, "commands": commands}

    @app.get("/containers", summary="Container records of every machine")
    async def containers():
        return {"containers": service.containers()}

    @app.get("/health")
    async def health():
        return service.health()

    @app.post("/tick", summary="Run one orchestration round now")
    def tick():
        return service.orchestration_tick().model_dump()

    @app.post("/snapshot", summary="Write the in-memory state to the snapshot file")
    def snapshot():
        if not snapshot_path:
            raise HTTPException(status_code=400, detail="no snapshot_path configured")
        try:
            return {"path": service.save_state(snapshot_path)}
        except OSError as e:
            logger.error(f"Could not write state snapshot to {snapshot_path}: {e}", exc_info=True)
            raise HTTPException(status_code=500, detail=f"could not write snapshot: {e.strerror}")

    return app


def create_api_info_panel(config: ScenarioConfig) -> Panel:
    """Startup banner with the endpoints and the orchestration settings."""
    host, port = config.service.host, config.service.port
    info_text = Text()
    info_text.append("🚀 Workload Automation Engine is Running!\n\n", style="bold bright_green")

    display_host = host
    if display_host == "0.0.0.0":
        try:
            s = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            s.connect(("8.8.8.8", 80))
            display_host = s.getsockname()[0]
            s.close()
        except OSError:
            display_host = "localhost"
            info_text.append("(Accessible via localhost and potentially other IPs)\n", style="dim white")

    base_url = f"http://{display_host}:{port}"
    info_text.append("Data Collection (POST):\n", style="bold white")
    info_text.append(f"  {base_url}/telemetry\n", style="cyan")
    info_text.append("Service Discovery (GET):\n", style="bold white")
    info_text.append(f"  {base_url}/assignments/", style="cyan")
    info_text.append("{machine}\n", style="cyan dim")
    info_text.append("Status (GET):\n", style="bold white")
    info_text.append(f"  {base_url}/health\n", style="cyan")
    info_text.append("\nOrchestration:\n", style="bold white")
    o = config.orchestration
    info_text.append(f"  {config.machines.count} machines, threshold ±{o.threshold}, "
                     f"every {config.service.period_seconds:g}s, pool {config.pool.subnet}\n")

    return Panel(
        info_text,
        title="API Information",
        border_style="blue",
        padding=(1, 2)
    )


_app: FastAPI | None = None


def __getattr__(name: str):
    # `uvicorn main:app` builds the app from WAE_CONFIG on first access
    global _app
    if name == "app":
        if _app is None:
            _app = create_app()
        return _app
    raise AttributeError(name)
