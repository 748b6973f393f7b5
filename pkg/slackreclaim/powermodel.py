#!/usr/bin/env python3
"""
Discrete DVFS processor model.

Units: MHz, megacycles, seconds, mW, mJ (cycles / MHz = s, mW * s = mJ).
Dynamic power follows the convex law P(f) = alpha * f^3 + gamma.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError, DegenerateFitError, ParameterError

logger = logging.getLogger(__name__)

DEFAULT_TRANSITION_TIME = 100e-6  # seconds, middle of the 30-150 us range


class FrequencyLevel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    freq: float = Field(gt=0)
    voltage: float = Field(gt=0)
    power: float = Field(gt=0)


class ProcessorModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    name: str = "custom"
    levels: Tuple[FrequencyLevel, ...]
    alpha: float = Field(gt=0)
    gamma: float = Field(ge=0)
    p_idle: float = Field(ge=0)
    transition_time: float = Field(default=DEFAULT_TRANSITION_TIME, ge=0)

    @model_validator(mode="before")
    @classmethod
    def _default_idle_power(cls, data: Any) -> Any:
        # Idle power defaults to the dynamic power of the lowest level.
        if not isinstance(data, dict) or data.get("p_idle") is not None:
            return data
        levels = data.get("levels") or []
        if "alpha" not in data or "gamma" not in data or not levels:
            return data
        try:
            freqs = [lvl["freq"] if isinstance(lvl, dict) else lvl.freq for lvl in levels]
            f_min = min(float(f) for f in freqs)
            p_idle = float(data["alpha"]) * f_min ** 3 + float(data["gamma"])
        except (KeyError, AttributeError, TypeError, ValueError):
            return data
        return {**data, "p_idle": p_idle}

    @model_validator(mode="after")
    def _check_levels(self) -> "ProcessorModel":
        freqs = [lvl.freq for lvl in self.levels]
        if len(freqs) < 2:
            raise ValueError("a processor model needs at least two frequency levels")
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("frequency levels must be strictly increasing")
        return self

    @property
    def frequencies(self) -> List[float]:
        return [lvl.freq for lvl in self.levels]

    @property
    def f_min(self) -> float:
        return self.levels[0].freq

    @property
    def f_max(self) -> float:
        return self.levels[-1].freq

    def with_overrides(self, p_idle: Optional[float] = None, transition_time: Optional[float] = None) -> "ProcessorModel":
        data = self.model_dump()
        if p_idle is not None:
            data["p_idle"] = p_idle
        if transition_time is not None:
            data["transition_time"] = transition_time
        return ProcessorModel.model_validate(data)


def _levels(rows: Sequence[Tuple[float, float, float]]) -> Tuple[FrequencyLevel, ...]:
    return tuple(FrequencyLevel(freq=f, voltage=v, power=p) for f, v, p in rows)


# Vendor voltage/frequency tables and their convex-fit coefficients.
PRESET_TABLES: Dict[str, Dict[str, Any]] = {
    "transmeta_crusoe": {
        "levels": [(300, 1.2, 1300), (400, 1.225, 1900), (533, 1.35, 3000), (600, 1.5, 4200), (667, 1.6, 5300)],
        "alpha": 1.94e-5,
        "gamma": 4.44,
    },
    "intel_xscale": {
        "levels": [(150, 0.75, 80), (400, 1.0, 170), (600, 1.3, 400), (800, 1.6, 900), (1000, 1.8, 1600)],
        "alpha": 1.55e-6,
        "gamma": 60,
    },
}


def preset(name: str) -> ProcessorModel:
    table = PRESET_TABLES.get(name)
    if table is None:
        raise ParameterError(f"unknown processor preset '{name}' (expected one of {sorted(PRESET_TABLES)})")
    return ProcessorModel(
        name=name,
        levels=_levels(table["levels"]),
        alpha=table["alpha"],
        gamma=table["gamma"],
    )


def dynamic_power(model: ProcessorModel, f: float) -> float:
    """alpha * f^3 + gamma in mW; f need not be a discrete level."""
    if f <= 0:
        raise ParameterError(f"frequency must be positive, got {f}")
    return model.alpha * f ** 3 + model.gamma


def level_power(model: ProcessorModel) -> List[float]:
    return [dynamic_power(model, f) for f in model.frequencies]


def fit_convex(points: Sequence[Tuple[float, float]]) -> Tuple[float, float]:
    """Ordinary least squares of power against f^3 with an intercept -> (alpha, gamma)."""
    data = np.asarray(points, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ParameterError("points must be a sequence of (freq, power) pairs")
    if np.unique(data[:, 0]).size < 2:
        raise DegenerateFitError("convex fit needs at least two distinct frequencies")

    cubes = data[:, 0] ** 3
    scale = float(np.max(np.abs(cubes)))
    design = np.column_stack([cubes / scale, np.ones_like(cubes)])
    coef, *_ = np.linalg.lstsq(design, data[:, 1], rcond=None)
    return float(coef[0] / scale), float(coef[1])


def fit_model_from_levels(
    levels: Sequence[FrequencyLevel],
    name: str = "fitted",
    p_idle: Optional[float] = None,
    transition_time: float = DEFAULT_TRANSITION_TIME,
) -> ProcessorModel:
    alpha, gamma = fit_convex([(lvl.freq, lvl.power) for lvl in levels])
    return ProcessorModel(
        name=name,
        levels=tuple(levels),
        alpha=alpha,
        gamma=max(gamma, 0.0),
        p_idle=p_idle,
        transition_time=transition_time,
    )


def exec_time(model: ProcessorModel, cycles: float, f: float) -> float:
    if f <= 0:
        raise ParameterError(f"frequency must be positive, got {f}")
    if cycles < 0:
        raise ParameterError(f"cycles must be non-negative, got {cycles}")
    return cycles / f


def segment_energy(model: ProcessorModel, f: float, t: float) -> float:
    if t < 0:
        raise ParameterError(f"duration must be non-negative, got {t}")
    return dynamic_power(model, f) * t


def idle_energy(model: ProcessorModel, t: float) -> float:
    if t < 0:
        raise ParameterError(f"duration must be non-negative, got {t}")
    return model.p_idle * t


def task_energy(model: ProcessorModel, f: float, t: float, window: float) -> float:
    """Energy of running t seconds at f inside a window, idling for the rest."""
    return segment_energy(model, f, t) + idle_energy(model, max(window - t, 0.0))


def save_model(model: ProcessorModel, path: Union[str, Path]) -> None:
    Path(path).write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")


def load_model(path: Union[str, Path]) -> ProcessorModel:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return ProcessorModel.model_validate(data)
    except json.JSONDecodeError as e:
        raise ConfigError(f"processor model file {path}: invalid JSON at line {e.lineno}") from e
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise ConfigError(f"processor model file {path}: {field}: {first['msg']}") from e


def resolve_cpu(name_or_path: str) -> ProcessorModel:
    """Preset name or path to a processor model JSON file."""
    if name_or_path in PRESET_TABLES:
        return preset(name_or_path)
    path = Path(name_or_path)
    if path.is_file():
        logger.info(f"loading processor model from {path}")
        return load_model(path)
    raise ConfigError(f"'{name_or_path}' is neither a processor preset nor a model file")
