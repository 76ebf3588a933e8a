from __future__ import annotations

import logging
import sys

from src.core.config import settings


def configure_logging(level: str | None = None) -> None:
    logging.basicConfig(
        level=getattr(logging, (level or settings.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
        # stdout carries the --json payload
        stream=sys.stderr,
    )
