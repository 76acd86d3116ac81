"""Runtime settings read from the environment (and an optional .env file)."""

import os
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv

_LOG_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}


@dataclass(frozen=True)
class Settings:
    """Process-wide knobs for the CLI, harness and server.

    Attributes:
        log_level: Root logging level name.
        out_dir: Default directory for traces and summaries.
        max_workers: Upper bound on concurrently running simulations.
    """

    log_level: str = "WARNING"
    out_dir: Path = Path("out")
    max_workers: int = 4


def load_settings() -> Settings:
    """Load settings from environment variables.

    Values from a .env file are loaded first; real
    environment variables take precedence.

    Returns:
        The validated settings.

    Raises:
        ValueError: If a variable is set to an unusable value.
    """
    load_dotenv()

    log_level = os.environ.get("DELAY_ETC_LOG_LEVEL", "WARNING").upper()
    if log_level not in _LOG_LEVELS:
        raise ValueError(
            f"DELAY_ETC_LOG_LEVEL must be one of {sorted(_LOG_LEVELS)}, got {log_level!r}"
        )

    raw_workers = os.environ.get("DELAY_ETC_MAX_WORKERS", "4")
    try:
        max_workers = int(raw_workers)
    except ValueError:
        raise ValueError(
            f"DELAY_ETC_MAX_WORKERS must be a positive integer, got {raw_workers!r}"
        ) from None
    if max_workers < 1:
        raise ValueError(
            f"DELAY_ETC_MAX_WORKERS must be a positive integer, got {max_workers}"
        )

    out_dir = Path(os.environ.get("DELAY_ETC_OUT_DIR", "out"))
    return Settings(log_level=log_level, out_dir=out_dir, max_workers=max_workers)
