import errno
import logging
import socket
import sys

import uvicorn
from rich.console import Console

from core.loader import ScenarioConfig, load_scenario
from main import create_api_info_panel, create_app, use_rich_logging
from wae.domain import WaeError

console = Console(stderr=True)
logger = logging.getLogger(__name__)


class BindError(OSError):
    pass


def check_bind(host: str, port: int) -> None:
    """Fail fast, before any state is loaded, when the address is taken."""
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
        try:
            s.bind((host, port))
        except OSError as e:
            if e.errno == errno.EADDRINUSE:
                raise BindError(e.errno, f"{host}:{port} is already in use") from e
            raise BindError(e.errno, f"cannot bind {host}:{port}: {e.strerror}") from e


def serve(config: ScenarioConfig) -> int:
    host, port = config.service.host, config.service.port
    check_bind(host, port)
    use_rich_logging()
    app = create_app(config)

    console.print(create_api_info_panel(config), style="bold")
    console.print("[bold]--- Server Logs Start Below ---[/]", style="dim")

    uvicorn.run(
        app,
        host=host,
        port=port,
        log_level="warning",
        access_log=False,
    )
    return 0


if __name__ == "__main__":
    try:
        sys.exit(serve(load_scenario()))
    except WaeError as e:
        console.print(f"[bold red]error:[/] {e}")
        sys.exit(1)
    except OSError as e:
        console.print(f"[bold red]error:[/] {e.strerror or e}")
        sys.exit(2)
