"""
Configuration
=============
Experiment configuration as pydantic models.

Sources, lowest to highest precedence:
- model defaults
- environment (``.env`` loaded with python-dotenv): PERMIN_OUT_DIR, PERMIN_RNG_SEED
- the JSON file given with ``--config``
- ``--set key.sub=value`` overrides (value parsed as JSON when possible)
- ``--out`` and ``--seed``
"""

import json
import os
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional, Sequence

import pydantic
from dotenv import load_dotenv
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, field_validator

from .errors import ConfigError
from .modules.dynamics import Point, SystemDescriptor
from .modules.observables import Observable, observable_from_dict
from .serialization import dumps, point_from_json, rational_from_json, read_json, to_plain


def _rational(value: Any) -> Fraction:
    if isinstance(value, Fraction):
        return value
    return rational_from_json(value)


Rational = Annotated[Fraction, BeforeValidator(_rational)]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)


class SystemConfig(_Model):
    kind: str
    k: Optional[int] = None
    m: Optional[int] = None
    transitions: Optional[List[List[int]]] = None
    matrix: Optional[List[List[int]]] = None

    @field_validator("kind")
    @classmethod
    def _known_kind(cls, v: str) -> str:
        if v not in ("circle", "full_shift", "sft", "torus_cat"):
            raise ValueError(f"unknown system kind {v!r}")
        return v

    def build(self) -> SystemDescriptor:
        return SystemDescriptor.from_dict(self.model_dump(exclude_none=True))


class LaxOleinikConfig(_Model):
    grid_n: int = Field(4096, ge=16)
    max_iter: int = Field(10_000, ge=1)
    tol: float = Field(1e-10, gt=0)
    tol_zero: float = Field(1e-6, gt=0)
    max_K: int = Field(8, ge=1)


class ConstructionConfig(_Model):
    seed_n: int = Field(10, ge=2)
    seed_k: int = Field(3, ge=1)
    L_hat: Rational = Fraction(100)
    strict: bool = True
    seed_orbit: Optional[Any] = None


class ScanConfig(_Model):
    k: int = Field(2, ge=0)
    n_min: int = Field(2, ge=1)
    n_max: int = Field(12, ge=1)


class SweepConfig(_Model):
    trials: int = Field(100, ge=1)
    samples: int = Field(100, ge=0)
    adversarial: bool = True
    inflation: Rational = Fraction(100)


class ExperimentConfig(_Model):
    """Everything a subcommand may need; unused fields are ignored by it."""
    system: SystemConfig
    u: Optional[Any] = None
    psi: Optional[Any] = None
    alpha: Rational = Fraction(1)
    epsilon: Rational = Fraction(1, 10)
    N: int = Field(12, ge=1)
    beta: Optional[Rational] = None
    Z: Optional[List[Any]] = None
    orbit: Optional[Any] = None
    points: Optional[List[Any]] = None
    eta: Optional[Rational] = None
    h: Optional[Any] = None
    lax_oleinik: LaxOleinikConfig = Field(default_factory=LaxOleinikConfig)
    construction: ConstructionConfig = Field(default_factory=ConstructionConfig)
    scan: ScanConfig = Field(default_factory=ScanConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    rng_seed: int = Field(0, ge=0, lt=2 ** 64)
    out_dir: Optional[str] = None

    @field_validator("alpha")
    @classmethod
    def _alpha_range(cls, v: Fraction) -> Fraction:
        if not 0 < v <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        return v

    @field_validator("epsilon")
    @classmethod
    def _epsilon_positive(cls, v: Fraction) -> Fraction:
        if v <= 0:
            raise ValueError("epsilon must be positive")
        return v

    # Typed accessors
    def require(self, name: str) -> Any:
        value = getattr(self, name)
        if value is None:
            raise ConfigError(name, "required for this command")
        return value

    def observable(self, name: str, system: SystemDescriptor) -> Observable:
        return observable_from_dict(self.require(name), system)

    def point_list(self, name: str, system: SystemDescriptor) -> List[Point]:
        return [point_from_json(system, p) for p in self.require(name)]

    def canonical(self) -> Dict[str, Any]:
        return to_plain(self.model_dump(mode="python"))


def _set_path(data: Dict[str, Any], dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = data
    for key in keys[:-1]:
        child = node.get(key)
        if not isinstance(child, dict):
            child = {}
            node[key] = child
        node = child
    node[keys[-1]] = value


def parse_override(text: str) -> Any:
    """``key=value`` -> (key, value); the value is JSON when it parses, else a string."""
    if "=" not in text:
        raise ConfigError(text, "override must look like key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def load_config(
    path: Optional[Path] = None,
    overrides: Sequence[str] = (),
    out_dir: Optional[str] = None,
    seed: Optional[int] = None,
    env_file: Optional[Path] = None,
) -> ExperimentConfig:
    """Merge every configuration source into a validated ExperimentConfig."""
    load_dotenv(env_file)
    data: Dict[str, Any] = {}
    if os.getenv("PERMIN_OUT_DIR"):
        data["out_dir"] = os.getenv("PERMIN_OUT_DIR")
    if os.getenv("PERMIN_RNG_SEED"):
        data["rng_seed"] = os.getenv("PERMIN_RNG_SEED")
    if path is not None:
        data.update(read_json(Path(path)))
    for text in overrides:
        key, value = parse_override(text)
        _set_path(data, key, value)
    if out_dir is not None:
        data["out_dir"] = out_dir
    if seed is not None:
        data["rng_seed"] = seed
    try:
        return ExperimentConfig.model_validate(data)
    except pydantic.ValidationError as exc:
        first = exc.errors()[0]
        field = ".".join(str(p) for p in first["loc"]) or "config"
        raise ConfigError(field, first["msg"]) from exc


def config_text(config: ExperimentConfig) -> str:
    return dumps(config.canonical())
