from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from importlib import metadata
from typing import Any, Dict, List, Optional

from src.core.config import settings
from src.core.errors import StorageError

META_FILE = "meta.json"


def library_version() -> str:
    try:
        return metadata.version(settings.app_name)
    except metadata.PackageNotFoundError:
        return "0.1.0"


@dataclass
class RunEvent:
    """Everything needed to reproduce a run and to read its files back."""

    event_id: str
    timestamp: str
    command: str
    seed: Optional[int]
    config: Dict[str, Any]
    library_version: str = field(default_factory=library_version)
    model: Optional[Dict[str, Any]] = None
    mode: Optional[str] = None
    times: List[float] = field(default_factory=list)
    stride: int = 1
    stop_reason: Optional[str] = None
    integrator_meta: Dict[str, Any] = field(default_factory=dict)
    has_midpoints: bool = False


def write_run_event(event: RunEvent, run_dir: str) -> str:
    try:
        os.makedirs(run_dir, exist_ok=True)
        path = os.path.join(run_dir, META_FILE)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(asdict(event), f, indent=2, ensure_ascii=False)
    except OSError as exc:
        raise StorageError(f"Could not write {META_FILE} in {run_dir}: {exc}") from exc
    return path


def read_run_event(run_dir: str) -> RunEvent:
    path = os.path.join(run_dir, META_FILE)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as exc:
        raise StorageError(f"No {META_FILE} in {run_dir}.") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise StorageError(f"Could not read {path}: {exc}") from exc
    try:
        return RunEvent(**data)
    except TypeError as exc:
        raise StorageError(f"{path} is not a run event: {exc}") from exc
