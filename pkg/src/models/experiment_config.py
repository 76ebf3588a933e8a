from __future__ import annotations

import json
import os
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.bounds.certificates import CERTIFICATE_NAMES
from src.core.errors import ConfigError


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class KernelSpec(_Strict):
    """Tagged kernel description, e.g. {"type": "power", "alpha": 1.0, "cap_at_one": true}."""

    type: Literal["constant", "power", "clamped_power", "shifted_power", "table"]
    p: Optional[float] = Field(default=None, ge=0)
    alpha: Optional[float] = Field(default=None, ge=0)
    c: Optional[float] = Field(default=None, gt=0)
    knots: Optional[List[Tuple[float, float]]] = None
    knots_csv: Optional[str] = None
    cap_at_one: Optional[bool] = None

    @model_validator(mode="after")
    def check_parameters(self) -> "KernelSpec":
        needed = {
            "constant": ("p",),
            "power": ("alpha",),
            "clamped_power": ("c", "alpha"),
            "shifted_power": ("alpha",),
            "table": (),
        }[self.type]
        missing = [name for name in needed if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.type} kernel needs {', '.join(missing)}")
        if self.type == "table" and (self.knots is None) == (self.knots_csv is None):
            raise ValueError("table kernel needs exactly one of knots or knots_csv")
        return self


class RankKernelSpec(_Strict):
    """rho(r, s) = rank(r) * distance(s)."""

    rank: KernelSpec
    distance: KernelSpec


class ModelSpec(_Strict):
    kernel: KernelSpec
    variant: Literal["standard", "rank_dependent", "normalized"] = "standard"
    rank_kernel: Optional[RankKernelSpec] = None

    @model_validator(mode="after")
    def check_variant(self) -> "ModelSpec":
        if self.variant == "rank_dependent" and self.rank_kernel is None:
            raise ValueError("rank_dependent variant needs rank_kernel")
        if self.variant != "rank_dependent" and self.rank_kernel is not None:
            raise ValueError(f"rank_kernel is only used by the rank_dependent variant, not {self.variant}")
        return self


class RandomInitial(_Strict):
    type: Literal["uniform", "normal"]
    low: float = 0.0
    high: float = 1.0
    loc: float = 0.0
    scale: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def check_range(self) -> "RandomInitial":
        if self.type == "uniform" and not self.low < self.high:
            raise ValueError(f"uniform initial state needs low < high, got [{self.low}, {self.high}]")
        return self


class CsvInitial(_Strict):
    type: Literal["csv"]
    path: str


InitialSpec = Union[List[List[float]], Annotated[Union[RandomInitial, CsvInitial], Field(discriminator="type")]]


class DiscreteMode(_Strict):
    type: Literal["discrete"]
    steps: int = Field(..., ge=0)


class ContinuousMode(_Strict):
    type: Literal["continuous"]
    t_end: float = Field(..., gt=0)
    tol: Optional[float] = Field(default=None, gt=0)
    max_step: Optional[float] = Field(default=None, gt=0)
    max_steps: Optional[int] = Field(default=None, ge=1)


ModeSpec = Annotated[Union[DiscreteMode, ContinuousMode], Field(discriminator="type")]


class ExperimentConfig(_Strict):
    seed: int = 0
    d: int = Field(..., ge=1)
    n: int = Field(default=1, ge=1)
    initial: InitialSpec
    model: ModelSpec
    mode: ModeSpec
    output_dir: Optional[str] = None
    certificates: Dict[str, bool] = Field(default_factory=dict)
    stride: int = Field(default=1, ge=1)

    @field_validator("certificates")
    @classmethod
    def known_certificates(cls, value: Dict[str, bool]) -> Dict[str, bool]:
        unknown = sorted(set(value) - set(CERTIFICATE_NAMES))
        if unknown:
            raise ValueError(f"unknown certificates {unknown}")
        return value

    @model_validator(mode="after")
    def check_initial_shape(self) -> "ExperimentConfig":
        if isinstance(self.initial, list):
            if len(self.initial) != self.d + 1:
                raise ValueError(f"initial has {len(self.initial)} rows, expected d + 1 = {self.d + 1}")
            bad = [i for i, row in enumerate(self.initial) if len(row) != self.n]
            if bad:
                raise ValueError(f"initial row {bad[0]} has {len(self.initial[bad[0]])} entries, expected n = {self.n}")
        return self

    def enabled_certificates(self) -> List[str]:
        return [name for name in CERTIFICATE_NAMES if self.certificates.get(name, True)]


class NBodyConfig(_Strict):
    """Bodies inline as [m, x, y, z, vx, vy, vz] rows or from a CSV with those columns."""

    bodies: Optional[List[Tuple[float, float, float, float, float, float, float]]] = None
    bodies_csv: Optional[str] = None
    G: float = Field(default=1.0, gt=0)
    steps: int = Field(..., ge=0)
    substep: float = Field(default=1.0, gt=0, le=1)
    output_dir: Optional[str] = None

    @model_validator(mode="after")
    def check_source(self) -> "NBodyConfig":
        if (self.bodies is None) == (self.bodies_csv is None):
            raise ValueError("needs exactly one of bodies or bodies_csv")
        return self


def format_validation_error(exc: ValidationError) -> str:
    """One "dotted.path: message" line per problem."""
    lines = []
    for err in exc.errors():
        path = ".".join(str(part) for part in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "\n".join(lines)


def _read_json(path: str) -> Any:
    if not os.path.isfile(path):
        raise ConfigError(f"Config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _resolve(base_dir: str, path: str, field_path: str) -> str:
    resolved = path if os.path.isabs(path) else os.path.join(base_dir, path)
    if not os.path.isfile(resolved):
        raise ConfigError(f"{field_path}: file not found: {path}")
    return resolved


def parse_experiment_config(data: Any, base_dir: str = ".") -> ExperimentConfig:
    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(format_validation_error(exc)) from exc
    # referenced files must exist at load; store them resolved
    if isinstance(config.initial, CsvInitial):
        config.initial.path = _resolve(base_dir, config.initial.path, "initial.path")
    kernels = [("model.kernel", config.model.kernel)]
    if config.model.rank_kernel is not None:
        kernels += [
            ("model.rank_kernel.rank", config.model.rank_kernel.rank),
            ("model.rank_kernel.distance", config.model.rank_kernel.distance),
        ]
    for field_path, spec in kernels:
        if spec.knots_csv is not None:
            spec.knots_csv = _resolve(base_dir, spec.knots_csv, f"{field_path}.knots_csv")
    return config


def load_experiment_config(path: str) -> ExperimentConfig:
    return parse_experiment_config(_read_json(path), base_dir=os.path.dirname(os.path.abspath(path)))


def load_nbody_config(path: str) -> NBodyConfig:
    data = _read_json(path)
    try:
        config = NBodyConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(format_validation_error(exc)) from exc
    if config.bodies_csv is not None:
        config.bodies_csv = _resolve(os.path.dirname(os.path.abspath(path)), config.bodies_csv, "bodies_csv")
    return config
