"""
run.py  –  launch from the project ROOT
───────────────────────────────────────
Usage:
    python run.py                      serve the HTTP API
    python run.py run --fcidump ...    any app.cli subcommand

With no arguments the API is served on HOST:PORT from settings (.env),
with RELOAD watching the project root. Any arguments are handed to the
command-line frontend, so one entry point covers both surfaces without
depending on the working directory.
"""

import os
import sys
from typing import Optional, Sequence

# Project root on the path regardless of the working directory
ROOT = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, ROOT)

import uvicorn

from app.cli import main as cli_main
from app.core.config import settings
from app.utils.logger import get_logger

logger = get_logger("run")


def serve() -> int:
    logger.info("Serving API", host=settings.HOST, port=settings.PORT, reload=settings.RELOAD)
    uvicorn.run(
        "app.main:app",
        host=settings.HOST,
        port=settings.PORT,
        reload=settings.RELOAD,
        reload_dirs=[ROOT] if settings.RELOAD else None,
    )
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        return serve()
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
