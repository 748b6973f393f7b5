#!/usr/bin/env python3
"""
Slack reclamation strategies applied as post-processing on a fixed schedule.

    NONE      every task at f_N, idle for the rest of its window (baseline)
    RDVFS     single discrete level: the lowest one that still fits the window
    MMF       timed mix of f_N and f_1 filling the window
    MFS       timed mix over all levels, optimal per task (exact LP)
    OPT_CONT  continuous frequency filling the window (lower bound)
"""
import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import InfeasibleWindowError, ScheduleViolationError, SlackReclaimError, TaskReclaimError
from .lpsolve import TaskLP, solve
from .powermodel import ProcessorModel, dynamic_power, idle_energy, segment_energy
from .scheduler import Schedule, SlackWindow, slack_windows, stretch, validate_schedule
from .settings import settings
from .taskgraph import TaskGraph

logger = logging.getLogger(__name__)

CONSERVATION_TOL = 1e-9
LEVEL_TOL = 1e-12
ASSIGNMENT_COLUMNS = ["task_id", "freq", "duration", "idle_tail", "energy"]


class Algorithm(str, Enum):
    NONE = "none"
    RDVFS = "rdvfs"
    MMF = "mmf"
    MFS = "mfs"
    OPT_CONT = "opt"


class Segment(BaseModel):
    model_config = ConfigDict(frozen=True)

    freq: float = Field(gt=0)
    duration: float = Field(ge=0)


class FrequencyAssignment(BaseModel):
    model_config = ConfigDict(frozen=True)

    task_id: int
    algorithm: Algorithm
    segments: Tuple[Segment, ...]
    idle_tail: float = Field(ge=0)
    energy: float
    window: float
    cycles: float

    @model_validator(mode="after")
    def _check_conservation(self) -> "FrequencyAssignment":
        span = sum(s.duration for s in self.segments) + self.idle_tail
        if abs(span - self.window) > CONSERVATION_TOL * max(self.window, 1e-300):
            raise ValueError(f"task {self.task_id}: segments + idle cover {span}, window is {self.window}")
        work = sum(s.freq * s.duration for s in self.segments)
        if abs(work - self.cycles) > CONSERVATION_TOL * max(self.cycles, 1e-300):
            raise ValueError(f"task {self.task_id}: segments execute {work} Mc, task needs {self.cycles}")
        freqs = [s.freq for s in self.segments]
        if freqs != sorted(freqs, reverse=True):
            raise ValueError(f"task {self.task_id}: segments must run in descending frequency order")
        return self

    @property
    def busy_time(self) -> float:
        return sum(s.duration for s in self.segments)


def _window_length(window: Union[SlackWindow, float]) -> float:
    return window.T if isinstance(window, SlackWindow) else float(window)


def _task_id(window: Union[SlackWindow, float]) -> int:
    return window.task_id if isinstance(window, SlackWindow) else 0


def _check_window(window: Union[SlackWindow, float], cycles: float, model: ProcessorModel) -> float:
    T = _window_length(window)
    if cycles <= 0:
        raise InfeasibleWindowError(f"cycles must be positive, got {cycles}")
    if T <= 0:
        raise InfeasibleWindowError(f"window must be positive, got {T}")
    t_os = cycles / model.f_max
    if T < t_os * (1 - CONSERVATION_TOL):
        raise InfeasibleWindowError(f"window {T} s is shorter than the execution time {t_os} s at f_N")
    return T


def _assignment(
    window: Union[SlackWindow, float],
    cycles: float,
    model: ProcessorModel,
    algorithm: Algorithm,
    parts: Sequence[Tuple[float, float]],
) -> FrequencyAssignment:
    T = _window_length(window)
    parts = sorted(((f, d) for f, d in parts if d > 0), key=lambda part: -part[0])
    busy = sum(d for _, d in parts)
    idle_tail = max(T - busy, 0.0)
    energy = sum(segment_energy(model, f, d) for f, d in parts) + idle_energy(model, idle_tail)
    return FrequencyAssignment(
        task_id=_task_id(window),
        algorithm=algorithm,
        segments=tuple(Segment(freq=f, duration=d) for f, d in parts),
        idle_tail=idle_tail,
        energy=energy,
        window=T,
        cycles=cycles,
    )


def original(window: Union[SlackWindow, float], cycles: float, model: ProcessorModel) -> FrequencyAssignment:
    _check_window(window, cycles, model)
    return _assignment(window, cycles, model, Algorithm.NONE, [(model.f_max, cycles / model.f_max)])


def opt_continuous(
    window: Union[SlackWindow, float], cycles: float, model: ProcessorModel
) -> Tuple[float, float]:
    """Continuous frequency that exactly fills the window and its energy."""
    T = _check_window(window, cycles, model)
    f_opt = min(cycles / T, model.f_max)
    return f_opt, dynamic_power(model, f_opt) * T


def _opt_assignment(window: Union[SlackWindow, float], cycles: float, model: ProcessorModel) -> FrequencyAssignment:
    f_opt, _ = opt_continuous(window, cycles, model)
    return _assignment(window, cycles, model, Algorithm.OPT_CONT, [(f_opt, cycles / f_opt)])


def rdvfs(window: Union[SlackWindow, float], cycles: float, model: ProcessorModel) -> FrequencyAssignment:
    T = _check_window(window, cycles, model)
    f_opt = cycles / T
    f_rd = next((f for f in model.frequencies if f >= f_opt * (1 - LEVEL_TOL)), model.f_max)
    return _assignment(window, cycles, model, Algorithm.RDVFS, [(f_rd, cycles / f_rd)])


def mmf_dvfs(window: Union[SlackWindow, float], cycles: float, model: ProcessorModel) -> FrequencyAssignment:
    """
    Split the window between f_N and f_1. If the split is more expensive than
    the single-level RDVFS choice, the RDVFS execution is kept.
    """
    T = _check_window(window, cycles, model)
    f_1, f_n = model.f_min, model.f_max
    if cycles <= f_1 * T:
        return _assignment(window, cycles, model, Algorithm.MMF, [(f_1, cycles / f_1)])

    t_n = (cycles - T * f_1) / (f_n - f_1)
    t_1 = (T * f_n - cycles) / (f_n - f_1)
    split = _assignment(window, cycles, model, Algorithm.MMF, [(f_n, t_n), (f_1, max(t_1, 0.0))])

    single = rdvfs(window, cycles, model)
    if split.energy > single.energy:
        logger.debug(f"task {split.task_id}: max/min split costs more than RDVFS, keeping single level")
        return single.model_copy(update={"algorithm": Algorithm.MMF})
    return split


def mfs_dvfs(window: Union[SlackWindow, float], cycles: float, model: ProcessorModel) -> FrequencyAssignment:
    T = _check_window(window, cycles, model)
    f_1 = model.f_min
    if cycles <= f_1 * T:
        return _assignment(window, cycles, model, Algorithm.MFS, [(f_1, cycles / f_1)])

    solution = solve(TaskLP.from_model(model, cycles, T))
    parts = [(f, t) for f, t in zip(solution.freqs, solution.times) if t > 0]
    return _assignment(window, cycles, model, Algorithm.MFS, parts)


_STRATEGIES = {
    Algorithm.RDVFS: rdvfs,
    Algorithm.MMF: mmf_dvfs,
    Algorithm.MFS: mfs_dvfs,
    Algorithm.OPT_CONT: _opt_assignment,
}


def reclaim_task(
    window: Union[SlackWindow, float],
    cycles: float,
    model: ProcessorModel,
    algorithm: Union[Algorithm, str],
    eligibility_factor: Optional[float] = None,
) -> FrequencyAssignment:
    """Windows shorter than eligibility_factor * transition_time keep the f_N execution."""
    algorithm = Algorithm(algorithm)
    if eligibility_factor is None:
        eligibility_factor = settings.get_float("eligibility_factor")

    if algorithm is Algorithm.NONE:
        return original(window, cycles, model)
    if _window_length(window) < eligibility_factor * model.transition_time:
        logger.debug(f"task {_task_id(window)}: window below {eligibility_factor}x transition time, left at f_N")
        return original(window, cycles, model).model_copy(update={"algorithm": algorithm})
    return _STRATEGIES[algorithm](window, cycles, model)


class ReclaimedSchedule(BaseModel):
    model_config = ConfigDict(frozen=True)

    base: Schedule
    windows: Tuple[SlackWindow, ...]
    assignments: Tuple[FrequencyAssignment, ...]
    total_energy: float
    algorithm: Algorithm

    @model_validator(mode="after")
    def _one_per_task(self) -> "ReclaimedSchedule":
        assigned = [a.task_id for a in self.assignments]
        if sorted(assigned) != sorted(e.task_id for e in self.base.entries) or len(set(assigned)) != len(assigned):
            raise ValueError("every scheduled task needs exactly one frequency assignment")
        return self

    def assignment(self, task_id: int) -> FrequencyAssignment:
        for item in self.assignments:
            if item.task_id == task_id:
                return item
        raise KeyError(task_id)

    def finish_times(self) -> Dict[int, float]:
        starts = {entry.task_id: entry.start for entry in self.base.entries}
        return {a.task_id: starts[a.task_id] + a.busy_time for a in self.assignments}

    def revalidate(self, graph: TaskGraph) -> None:
        """Reclaimed executions stay inside their windows and keep the original makespan."""
        windows = {w.task_id: w for w in self.windows}
        finishes = self.finish_times()
        for task_id, finish in finishes.items():
            limit = windows[task_id].start + windows[task_id].T
            if finish > limit + CONSERVATION_TOL * max(1.0, limit):
                raise ScheduleViolationError(f"task {task_id} runs past its window ({finish} > {limit})")
        stretched = stretch(self.base, finishes)
        validate_schedule(stretched, graph)
        if stretched.makespan > self.base.makespan * (1 + CONSERVATION_TOL):
            raise ScheduleViolationError(
                f"reclaimed makespan {stretched.makespan} exceeds original {self.base.makespan}"
            )


def system_energy(
    schedule: Schedule,
    windows: Sequence[SlackWindow],
    assignments: Sequence[FrequencyAssignment],
    model: ProcessorModel,
) -> float:
    """Task energies plus idle power for processor time outside every window."""
    outside = schedule.n_processors * schedule.makespan - sum(w.T for w in windows)
    return sum(a.energy for a in assignments) + model.p_idle * max(outside, 0.0)


def reclaim_schedule(
    schedule: Schedule,
    graph: TaskGraph,
    model: ProcessorModel,
    algorithm: Union[Algorithm, str],
    eligibility_factor: Optional[float] = None,
    workers: int = 1,
) -> ReclaimedSchedule:
    algorithm = Algorithm(algorithm)
    windows = slack_windows(schedule, graph)
    cycles = graph.cycles_by_id()

    def run(window: SlackWindow) -> FrequencyAssignment:
        try:
            return reclaim_task(window, cycles[window.task_id], model, algorithm, eligibility_factor)
        except SlackReclaimError as e:
            raise TaskReclaimError(window.task_id, e) from e

    # GIL-bound: extra workers change neither the result nor, in practice, the wall time.
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            assignments = list(pool.map(run, windows))
    else:
        assignments = [run(window) for window in windows]

    total = system_energy(schedule, windows, assignments, model)
    return ReclaimedSchedule(
        base=schedule,
        windows=tuple(windows),
        assignments=tuple(assignments),
        total_energy=total,
        algorithm=algorithm,
    )


def write_assignments_csv(reclaimed: ReclaimedSchedule, path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(ASSIGNMENT_COLUMNS)
        for item in reclaimed.assignments:
            for segment in item.segments:
                writer.writerow([item.task_id, segment.freq, segment.duration, item.idle_tail, item.energy])
