from __future__ import annotations

import os
from dataclasses import dataclass

from dotenv import load_dotenv

load_dotenv()


def _as_float(name: str, default: float) -> float:
    value = os.getenv(name)
    if value is None or not value.strip():
        return default
    try:
        return float(value)
    except ValueError as exc:
        raise ValueError(f"Environment variable {name} must be a number, got {value!r}") from exc


def _as_int(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None or not value.strip():
        return default
    try:
        return int(value)
    except ValueError as exc:
        raise ValueError(f"Environment variable {name} must be an integer, got {value!r}") from exc


@dataclass(frozen=True)
class Settings:
    app_name: str
    app_env: str
    log_level: str
    output_dir: str

    # Continuous integrator.
    default_tol: float
    max_step: float
    max_continuous_steps: int

    # Relative thresholds, scaled by (1 + initial oscillation).
    merge_rel: float
    consensus_rel: float

    # Certificate slack.
    cert_slack: float
    fd_tol_multiplier: float
    kernel_check_samples: int

    @property
    def is_dev(self) -> bool:
        return self.app_env.lower() == "dev"


settings = Settings(
    app_name=os.getenv("APP_NAME", "consensus-lab"),
    app_env=os.getenv("CONSENSUS_LAB_ENV", "dev"),
    log_level=os.getenv("LOG_LEVEL", "INFO"),
    output_dir=os.getenv("OUTPUT_DIR", "runs"),
    default_tol=_as_float("DEFAULT_TOL", 1e-8),
    max_step=_as_float("MAX_STEP", 0.05),
    max_continuous_steps=_as_int("MAX_CONTINUOUS_STEPS", 200_000),
    merge_rel=_as_float("MERGE_REL", 1e-9),
    consensus_rel=_as_float("CONSENSUS_REL", 1e-13),
    cert_slack=_as_float("CERT_SLACK", 1e-10),
    fd_tol_multiplier=_as_float("FD_TOL_MULTIPLIER", 100.0),
    kernel_check_samples=_as_int("KERNEL_CHECK_SAMPLES", 2000),
)
