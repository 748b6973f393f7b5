#!/usr/bin/env python3
"""
Per-task frequency LP:

    min  sum_i t_i * p_i
    s.t. sum_i t_i * f_i = K,  sum_i t_i = T,  t_i >= 0

Two equality constraints mean every basic solution uses at most two levels, so the
optimum is found exactly by enumerating level pairs.
"""
import logging
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import LPInfeasibleError, ParameterError
from .powermodel import ProcessorModel, level_power

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9
TIME_TOL = 1e-12
TIE_TOL = 1e-12


class TaskLP(BaseModel):
    model_config = ConfigDict(frozen=True)

    freqs: Tuple[float, ...]
    powers: Tuple[float, ...]
    cycles: float = Field(gt=0)
    T: float = Field(gt=0)

    @model_validator(mode="before")
    @classmethod
    def _canonical_order(cls, data: Any) -> Any:
        if isinstance(data, dict) and "freqs" in data and "powers" in data:
            freqs, powers = list(data["freqs"]), list(data["powers"])
            if len(freqs) == len(powers):
                pairs = sorted(zip(freqs, powers), key=lambda pair: float(pair[0]))
                data = {**data, "freqs": [f for f, _ in pairs], "powers": [p for _, p in pairs]}
        return data

    @model_validator(mode="after")
    def _check_feasible(self) -> "TaskLP":
        if len(self.freqs) != len(self.powers) or not self.freqs:
            raise ValueError("freqs and powers must be non-empty and of equal length")
        if self.freqs[0] <= 0:
            raise ValueError("frequencies must be positive")
        lowest, highest = self.freqs[0] * self.T, self.freqs[-1] * self.T
        if self.cycles < lowest * (1 - FEASIBILITY_TOL):
            raise LPInfeasibleError(
                f"cycles {self.cycles} below f_1*T = {lowest}: the window cannot be filled at the lowest level",
                side="below",
            )
        if self.cycles > highest * (1 + FEASIBILITY_TOL):
            raise LPInfeasibleError(
                f"cycles {self.cycles} above f_N*T = {highest}: the task cannot finish in its window",
                side="above",
            )
        return self

    @classmethod
    def from_model(cls, model: ProcessorModel, cycles: float, T: float) -> "TaskLP":
        return cls(freqs=tuple(model.frequencies), powers=tuple(level_power(model)), cycles=cycles, T=T)

    @property
    def f_opt(self) -> float:
        return self.cycles / self.T

    def objective(self, times: Sequence[float]) -> float:
        return float(np.dot(np.asarray(times, dtype=float), np.asarray(self.powers)))


class LPSolution(BaseModel):
    model_config = ConfigDict(frozen=True)

    freqs: Tuple[float, ...]
    times: Tuple[float, ...]
    objective: float

    def support(self, tol: float = 0.0) -> List[int]:
        return [i for i, t in enumerate(self.times) if t > tol]


def _tidy(times: np.ndarray, T: float) -> np.ndarray:
    times = np.where(times < TIME_TOL * max(1.0, T), 0.0, times)
    return times


def solve(lp: TaskLP) -> LPSolution:
    """Vectorised vertex enumeration; ties go to the lexicographically lowest level pair."""
    f = np.asarray(lp.freqs)
    p = np.asarray(lp.powers)
    K, T = lp.cycles, lp.T
    n = f.size
    slack_tol = TIME_TOL * max(1.0, T)

    lo, hi = np.triu_indices(n, k=1)
    spread = f[hi] - f[lo]
    usable = spread > 0
    lo, hi, spread = lo[usable], hi[usable], spread[usable]
    t_hi = (K - f[lo] * T) / spread
    t_lo = (f[hi] * T - K) / spread
    ok = (t_lo >= -slack_tol) & (t_hi >= -slack_tol)
    lo, hi = lo[ok], hi[ok]
    t_lo, t_hi = np.maximum(t_lo[ok], 0.0), np.maximum(t_hi[ok], 0.0)

    single = np.flatnonzero(np.abs(f * T - K) <= FEASIBILITY_TOL * K)

    cand_lo = np.concatenate([lo, single])
    cand_hi = np.concatenate([hi, single])
    t_first = np.concatenate([t_lo, np.full(single.size, T)])
    t_second = np.concatenate([t_hi, np.zeros(single.size)])
    objective = t_first * p[cand_lo] + t_second * p[cand_hi]

    if objective.size == 0:
        raise LPInfeasibleError("no feasible level combination", side="below" if K < f[0] * T else "above")

    best = objective.min()
    tied = np.flatnonzero(objective <= best + TIE_TOL * max(1.0, abs(best)))
    pick = tied[np.lexsort((cand_hi[tied], cand_lo[tied]))[0]]

    times = np.zeros(n)
    times[cand_lo[pick]] += t_first[pick]
    times[cand_hi[pick]] += t_second[pick]
    times = _tidy(times, T)
    return LPSolution(freqs=lp.freqs, times=tuple(float(t) for t in times), objective=lp.objective(times))


def pair_enumerate(lp: TaskLP) -> LPSolution:
    """Reference solver: loop over every level and level pair, keep the cheapest feasible one."""
    freqs, powers = lp.freqs, lp.powers
    K, T = lp.cycles, lp.T
    n = len(freqs)
    slack_tol = TIME_TOL * max(1.0, T)

    best_cost: Optional[float] = None
    best_times: Optional[List[float]] = None

    def consider(cost: float, times: List[float]) -> None:
        nonlocal best_cost, best_times
        if best_cost is None or cost < best_cost - TIE_TOL * max(1.0, abs(best_cost)):
            best_cost, best_times = cost, times

    for i in range(n):
        if abs(freqs[i] * T - K) <= FEASIBILITY_TOL * K:
            times = [0.0] * n
            times[i] = T
            consider(powers[i] * T, times)
        for j in range(i + 1, n):
            if freqs[j] == freqs[i]:
                continue
            t_j = (K - freqs[i] * T) / (freqs[j] - freqs[i])
            t_i = (freqs[j] * T - K) / (freqs[j] - freqs[i])
            if t_i < -slack_tol or t_j < -slack_tol:
                continue
            t_i, t_j = max(t_i, 0.0), max(t_j, 0.0)
            times = [0.0] * n
            times[i] += t_i
            times[j] += t_j
            consider(t_i * powers[i] + t_j * powers[j], times)

    if best_times is None:
        raise LPInfeasibleError("no feasible level combination", side="below" if K < freqs[0] * T else "above")

    tidy = [0.0 if t < TIME_TOL * max(1.0, T) else t for t in best_times]
    return LPSolution(freqs=freqs, times=tuple(tidy), objective=lp.objective(tidy))


def eligibility_coeffs(lp: TaskLP) -> Tuple[float, float, float]:
    """
    Coefficients of E = a0 + a1*t3 + a2*t4 obtained by eliminating t1 and t2 from a
    four-level LP. Diagnostic only.
    """
    if len(lp.freqs) != 4:
        raise ParameterError(f"eligibility coefficients are defined for exactly 4 levels, got {len(lp.freqs)}")
    f1, f2, f3, f4 = lp.freqs
    p1, p2, p3, p4 = lp.powers
    if f2 == f1:
        raise ParameterError("eligibility coefficients need f_1 != f_2")
    K, T = lp.cycles, lp.T
    span = f2 - f1

    a0 = p1 * (T * f2 - K) / span + p2 * (K - T * f1) / span
    a1 = p3 + p1 * (f3 - f2) / span - p2 * (f3 - f1) / span
    a2 = p4 + p1 * (f4 - f2) / span - p2 * (f4 - f1) / span
    return a0, a1, a2


def induced_times(lp: TaskLP, t3: float, t4: float) -> Tuple[float, float, float, float]:
    """t1 and t2 implied by the equality constraints for given t3, t4 (four levels)."""
    f1, f2, f3, f4 = lp.freqs
    K, T = lp.cycles, lp.T
    span = f2 - f1
    t1 = (T * f2 - K) / span - t3 * (f2 - f3) / span - t4 * (f2 - f4) / span
    t2 = (K - T * f1) / span - t3 * (f3 - f1) / span - t4 * (f4 - f1) / span
    return t1, t2, t3, t4
