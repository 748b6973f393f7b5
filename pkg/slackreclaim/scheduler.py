#!/usr/bin/env python3
"""
List scheduling of task graphs on homogeneous processors and slack window extraction.

The original schedule runs every task at the highest frequency f_N.
A successor on another processor may start only `comm` seconds after its predecessor
finishes; on the same processor communication is free.
"""
import csv
import heapq
import logging
from collections import defaultdict
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import GraphValidationError, ParameterError, ScheduleViolationError
from .powermodel import ProcessorModel, exec_time
from .taskgraph import TaskGraph

logger = logging.getLogger(__name__)

TOLERANCE = 1e-9
SCHEDULE_COLUMNS = ["task_id", "processor", "start", "finish", "T"]


class Priority(str, Enum):
    FIFO = "fifo"
    LPT = "lpt"
    SPT = "spt"


class ScheduleEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    task_id: int
    processor: int = Field(ge=0)
    start: float = Field(ge=0)
    finish: float

    @property
    def duration(self) -> float:
        return self.finish - self.start

    @model_validator(mode="after")
    def _check_order(self) -> "ScheduleEntry":
        if self.finish < self.start:
            raise ValueError(f"task {self.task_id} finishes before it starts")
        return self


class Schedule(BaseModel):
    model_config = ConfigDict(frozen=True)

    entries: Tuple[ScheduleEntry, ...]
    n_processors: int = Field(ge=1)
    makespan: float = Field(ge=0)

    @model_validator(mode="after")
    def _check_makespan(self) -> "Schedule":
        latest = max((entry.finish for entry in self.entries), default=0.0)
        if abs(latest - self.makespan) > TOLERANCE * max(1.0, latest):
            raise ValueError(f"makespan {self.makespan} differs from last finish {latest}")
        if any(entry.processor >= self.n_processors for entry in self.entries):
            raise ValueError("entry assigned to a processor outside 0..P-1")
        return self

    def by_task(self) -> Dict[int, ScheduleEntry]:
        return {entry.task_id: entry for entry in self.entries}

    def by_processor(self) -> Dict[int, List[ScheduleEntry]]:
        lanes: Dict[int, List[ScheduleEntry]] = defaultdict(list)
        for entry in self.entries:
            lanes[entry.processor].append(entry)
        for lane in lanes.values():
            lane.sort(key=lambda e: (e.start, e.task_id))
        return dict(lanes)


class SlackWindow(BaseModel):
    model_config = ConfigDict(frozen=True)

    task_id: int
    t_OS: float = Field(ge=0)
    T: float
    start: float = Field(ge=0)

    @property
    def slack(self) -> float:
        return self.T - self.t_OS

    @model_validator(mode="after")
    def _check_window(self) -> "SlackWindow":
        if self.T < self.t_OS:
            raise ValueError(f"window {self.T} shorter than execution time {self.t_OS}")
        return self


def _priority_key(priority: Priority, task_id: int, t_os: float, readiness: float) -> Tuple[float, int]:
    if priority is Priority.FIFO:
        return (readiness, task_id)
    if priority is Priority.LPT:
        return (-t_os, task_id)
    return (t_os, task_id)


def list_schedule(
    graph: TaskGraph,
    n_processors: int,
    model: ProcessorModel,
    priority: Union[Priority, str] = Priority.FIFO,
) -> Schedule:
    """Insertion-free list scheduling; each ready task goes to the processor with the earliest start."""
    if n_processors < 1:
        raise ParameterError(f"n_processors must be >= 1, got {n_processors}")
    try:
        priority = Priority(priority)
    except ValueError as e:
        raise ParameterError(f"unknown priority rule '{priority}'") from e

    if not graph.tasks:
        return Schedule(entries=(), n_processors=n_processors, makespan=0.0)

    f_n = model.f_max
    t_os = {task.id: exec_time(model, task.cycles, f_n) for task in graph.tasks}
    preds = graph.predecessors()
    succs = graph.successors()
    waiting = {task_id: len(edges) for task_id, edges in preds.items()}

    placed: Dict[int, Tuple[int, float, float]] = {}
    proc_free = [0.0] * n_processors
    ready: List[Tuple[Tuple[float, int], int]] = []
    for task_id in sorted(waiting):
        if waiting[task_id] == 0:
            heapq.heappush(ready, (_priority_key(priority, task_id, t_os[task_id], 0.0), task_id))

    while ready:
        _, task_id = heapq.heappop(ready)

        best_proc, best_start = 0, float("inf")
        for proc in range(n_processors):
            start = proc_free[proc]
            for edge in preds[task_id]:
                src_proc, _, src_finish = placed[edge.src]
                arrival = src_finish if src_proc == proc else src_finish + edge.comm
                if arrival > start:
                    start = arrival
            if start < best_start:
                best_proc, best_start = proc, start

        finish = best_start + t_os[task_id]
        placed[task_id] = (best_proc, best_start, finish)
        proc_free[best_proc] = finish

        for edge in succs[task_id]:
            waiting[edge.dst] -= 1
            if waiting[edge.dst] == 0:
                readiness = max(placed[e.src][2] for e in preds[edge.dst])
                key = _priority_key(priority, edge.dst, t_os[edge.dst], readiness)
                heapq.heappush(ready, (key, edge.dst))

    if len(placed) != len(graph.tasks):
        raise GraphValidationError("task graph is not acyclic; list scheduling could not place every task")

    entries = tuple(
        ScheduleEntry(task_id=task_id, processor=proc, start=start, finish=finish)
        for task_id, (proc, start, finish) in sorted(placed.items())
    )
    makespan = max(entry.finish for entry in entries)
    logger.debug(f"list_schedule {priority.value} P={n_processors}: {len(entries)} tasks, makespan {makespan:.6f}")
    return Schedule(entries=entries, n_processors=n_processors, makespan=makespan)


def slack_windows(schedule: Schedule, graph: TaskGraph) -> List[SlackWindow]:
    """
    T(k) = deadline(k) - start(k), deadline being the earliest of the next start on the
    same processor (makespan if none) and every successor's start minus the comm delay.
    """
    placed = schedule.by_task()
    next_start: Dict[int, float] = {}
    for lane in schedule.by_processor().values():
        for current, following in zip(lane, lane[1:] + [None]):
            next_start[current.task_id] = following.start if following is not None else schedule.makespan

    succs = graph.successors()
    windows = []
    for task_id in sorted(placed):
        entry = placed[task_id]
        deadline = next_start[task_id]
        for edge in succs.get(task_id, []):
            target = placed[edge.dst]
            limit = target.start if target.processor == entry.processor else target.start - edge.comm
            deadline = min(deadline, limit)
        t_os = entry.finish - entry.start
        windows.append(SlackWindow(task_id=task_id, t_OS=t_os, T=max(deadline - entry.start, t_os), start=entry.start))
    return windows


def _close_enough(later: float, earlier: float) -> bool:
    return later >= earlier - TOLERANCE * max(1.0, abs(earlier))


def validate_schedule(schedule: Schedule, graph: TaskGraph, model: Optional[ProcessorModel] = None) -> None:
    """Precedence feasibility and per-processor non-overlap; exec times at f_N when model given."""
    placed = schedule.by_task()
    expected = set(graph.task_ids())
    if set(placed) != expected or len(placed) != len(schedule.entries):
        raise ScheduleViolationError("schedule must contain exactly one entry per task")

    for processor, lane in schedule.by_processor().items():
        for current, following in zip(lane, lane[1:]):
            if not _close_enough(following.start, current.finish):
                raise ScheduleViolationError(
                    f"tasks {current.task_id} and {following.task_id} overlap on processor {processor}"
                )

    for edge in graph.edges:
        src, dst = placed[edge.src], placed[edge.dst]
        ready_at = src.finish + (edge.comm if src.processor != dst.processor else 0.0)
        if not _close_enough(dst.start, ready_at):
            raise ScheduleViolationError(
                f"task {edge.dst} starts at {dst.start} before its input from {edge.src} is ready at {ready_at}"
            )

    if model is not None:
        cycles = graph.cycles_by_id()
        for entry in schedule.entries:
            t_os = exec_time(model, cycles[entry.task_id], model.f_max)
            if abs(entry.duration - t_os) > TOLERANCE * max(1.0, t_os):
                raise ScheduleViolationError(f"task {entry.task_id} does not run for cycles / f_N")


def stretch(schedule: Schedule, finishes: Dict[int, float]) -> Schedule:
    entries = tuple(
        entry.model_copy(update={"finish": finishes.get(entry.task_id, entry.finish)}) for entry in schedule.entries
    )
    makespan = max((entry.finish for entry in entries), default=0.0)
    return Schedule(entries=entries, n_processors=schedule.n_processors, makespan=makespan)


def write_schedule_csv(
    schedule: Schedule, windows: Sequence[SlackWindow], path: Union[str, Path]
) -> None:
    allotted = {window.task_id: window.T for window in windows}
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(SCHEDULE_COLUMNS)
        for entry in sorted(schedule.entries, key=lambda e: e.task_id):
            writer.writerow([entry.task_id, entry.processor, entry.start, entry.finish, allotted.get(entry.task_id, "")])


def read_schedule_csv(path: Union[str, Path], n_processors: Optional[int] = None) -> Schedule:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        missing = [column for column in SCHEDULE_COLUMNS[:4] if column not in (reader.fieldnames or [])]
        if missing:
            raise ParameterError(f"schedule file {path} lacks columns {missing}")
        entries = []
        for row in reader:
            try:
                entries.append(
                    ScheduleEntry(
                        task_id=int(row["task_id"]),
                        processor=int(row["processor"]),
                        start=float(row["start"]),
                        finish=float(row["finish"]),
                    )
                )
            except ValueError as e:
                raise ParameterError(f"schedule file {path}, line {reader.line_num}: {e}") from e

    used = max((entry.processor for entry in entries), default=0) + 1
    return Schedule(
        entries=tuple(entries),
        n_processors=max(n_processors or used, used),
        makespan=max((entry.finish for entry in entries), default=0.0),
    )
