#!/usr/bin/env python3
"""
Task graph model, generators (random layered, Gauss-Jordan, LU) and JSON persistence.

Cycle counts are in megacycles so that cycles / MHz gives seconds directly.
Communication costs are seconds.
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import CycleError, GraphFormatError, GraphValidationError, ParameterError

logger = logging.getLogger(__name__)

DEFAULT_CYCLES = 7.5  # midpoint of the 5-10 Mc random range
# LU and Gauss-Jordan edges: 10 time units of 10 us each.
STRUCTURED_COMM = 1e-4


class Task(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    id: int
    cycles: float = Field(gt=0)


class Edge(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    src: int
    dst: int
    comm: float = Field(ge=0)


class TaskGraph(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    tasks: Tuple[Task, ...]
    edges: Tuple[Edge, ...] = ()
    label: str = ""

    @model_validator(mode="after")
    def _check_structure(self) -> "TaskGraph":
        validate_graph(self)
        return self

    def task_ids(self) -> List[int]:
        return sorted(task.id for task in self.tasks)

    def task(self, task_id: int) -> Task:
        for task in self.tasks:
            if task.id == task_id:
                return task
        raise ParameterError(f"unknown task id {task_id}")

    def cycles_by_id(self) -> Dict[int, float]:
        return {task.id: task.cycles for task in self.tasks}

    def predecessors(self) -> Dict[int, List[Edge]]:
        preds: Dict[int, List[Edge]] = {task.id: [] for task in self.tasks}
        for edge in self.edges:
            preds[edge.dst].append(edge)
        return preds

    def successors(self) -> Dict[int, List[Edge]]:
        succs: Dict[int, List[Edge]] = {task.id: [] for task in self.tasks}
        for edge in self.edges:
            succs[edge.src].append(edge)
        return succs

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        for task in self.tasks:
            graph.add_node(task.id, cycles=task.cycles)
        for edge in self.edges:
            graph.add_edge(edge.src, edge.dst, comm=edge.comm)
        return graph

    def topological_order(self) -> List[int]:
        return list(nx.lexicographical_topological_sort(self.to_networkx()))

    def total_cycles(self) -> float:
        return float(sum(task.cycles for task in self.tasks))


def validate_graph(graph: TaskGraph) -> None:
    """Referential integrity, uniqueness and acyclicity."""
    ids = [task.id for task in graph.tasks]
    if len(set(ids)) != len(ids):
        duplicated = sorted({i for i in ids if ids.count(i) > 1})
        raise GraphValidationError(f"duplicate task ids: {duplicated}")

    known = set(ids)
    seen = set()
    for edge in graph.edges:
        if edge.src not in known or edge.dst not in known:
            missing = edge.src if edge.src not in known else edge.dst
            raise GraphValidationError(f"edge {edge.src}->{edge.dst} references missing task {missing}")
        if edge.src == edge.dst:
            raise GraphValidationError(f"self loop on task {edge.src}")
        if (edge.src, edge.dst) in seen:
            raise GraphValidationError(f"duplicate edge {edge.src}->{edge.dst}")
        seen.add((edge.src, edge.dst))

    digraph = graph.to_networkx()
    if not nx.is_directed_acyclic_graph(digraph):
        cycle = nx.find_cycle(digraph)
        nodes = [src for src, _ in cycle] + [cycle[0][0]]
        raise CycleError(nodes)


def gen_random(
    n_tasks: int,
    seed: int,
    cycle_lo: float = 5.0,
    cycle_hi: float = 10.0,
    layer_width: int = 30,
    edge_prob: float = 0.05,
    comm_lo: float = 0.001,
    comm_hi: float = 0.005,
) -> TaskGraph:
    """Layered random DAG; edges only go from earlier to later layers."""
    if n_tasks < 1:
        raise ParameterError(f"n_tasks must be >= 1, got {n_tasks}")
    if layer_width < 1:
        raise ParameterError(f"layer_width must be >= 1, got {layer_width}")
    if not 0.0 < cycle_lo <= cycle_hi:
        raise ParameterError(f"invalid cycle range [{cycle_lo}, {cycle_hi}]")
    if not 0.0 <= comm_lo <= comm_hi:
        raise ParameterError(f"invalid comm range [{comm_lo}, {comm_hi}]")
    if not 0.0 <= edge_prob <= 1.0:
        raise ParameterError(f"edge_prob must lie in [0, 1], got {edge_prob}")

    rng = np.random.default_rng(seed)

    layers: List[List[int]] = []
    next_id = 0
    while next_id < n_tasks:
        width = min(int(rng.integers(1, layer_width + 1)), n_tasks - next_id)
        layers.append(list(range(next_id, next_id + width)))
        next_id += width

    cycles = rng.uniform(cycle_lo, cycle_hi, size=n_tasks)
    tasks = [Task(id=i, cycles=float(cycles[i])) for i in range(n_tasks)]

    edges: List[Edge] = []
    earlier: List[int] = []
    for layer in layers:
        if earlier:
            candidates = np.asarray(earlier)
            for dst in layer:
                chosen = candidates[rng.random(len(candidates)) < edge_prob]
                comms = rng.uniform(comm_lo, comm_hi, size=len(chosen))
                for src, comm in zip(chosen, comms):
                    edges.append(Edge(src=int(src), dst=dst, comm=float(comm)))
        earlier.extend(layer)

    label = (
        f"random(n={n_tasks},seed={seed},cycles=[{cycle_lo},{cycle_hi}],"
        f"width={layer_width},p={edge_prob},comm=[{comm_lo},{comm_hi}])"
    )
    logger.debug(f"generated {label}: {len(layers)} layers, {len(edges)} edges")
    return TaskGraph(tasks=tuple(tasks), edges=tuple(edges), label=label)


def _structured_cycles(
    count: int,
    cycles: float,
    seed: Optional[int],
    cycle_lo: float,
    cycle_hi: float,
) -> List[float]:
    if seed is None:
        if cycles <= 0:
            raise ParameterError(f"cycles must be positive, got {cycles}")
        return [float(cycles)] * count
    if not 0.0 < cycle_lo <= cycle_hi:
        raise ParameterError(f"invalid cycle range [{cycle_lo}, {cycle_hi}]")
    rng = np.random.default_rng(seed)
    return [float(c) for c in rng.uniform(cycle_lo, cycle_hi, size=count)]


def _check_levels(levels: int, comm: float) -> None:
    if levels < 1:
        raise ParameterError(f"levels must be >= 1, got {levels}")
    if comm < 0:
        raise ParameterError(f"comm must be non-negative, got {comm}")


def gen_gauss_jordan(
    levels: int,
    comm: float = STRUCTURED_COMM,
    cycles: float = DEFAULT_CYCLES,
    seed: Optional[int] = None,
    cycle_lo: float = 5.0,
    cycle_hi: float = 10.0,
) -> TaskGraph:
    """
    Gauss-Jordan wavefront. Level l holds columns l..L; task (l, c) feeds every
    task (l+1, c') with c' >= max(c, l+1).
    """
    _check_levels(levels, comm)

    ids: Dict[Tuple[int, int], int] = {}
    for level in range(1, levels + 1):
        for column in range(level, levels + 1):
            ids[(level, column)] = len(ids)

    task_cycles = _structured_cycles(len(ids), cycles, seed, cycle_lo, cycle_hi)
    tasks = [Task(id=i, cycles=task_cycles[i]) for i in range(len(ids))]

    edges = []
    for level in range(1, levels):
        for column in range(level, levels + 1):
            for target in range(max(column, level + 1), levels + 1):
                edges.append(Edge(src=ids[(level, column)], dst=ids[(level + 1, target)], comm=comm))

    label = f"gauss_jordan(levels={levels},comm={comm},cycles={'jitter' if seed is not None else cycles},seed={seed})"
    return TaskGraph(tasks=tuple(tasks), edges=tuple(edges), label=label)


def gen_lu(
    levels: int,
    comm: float = STRUCTURED_COMM,
    cycles: float = DEFAULT_CYCLES,
    seed: Optional[int] = None,
    cycle_lo: float = 5.0,
    cycle_hi: float = 10.0,
) -> TaskGraph:
    """
    LU decomposition: level l is one pivot plus updates for columns l+1..L.
    pivot_l -> update(l, c); update(l, c) -> pivot_{l+1} and update(l+1, c).
    """
    _check_levels(levels, comm)

    pivots: Dict[int, int] = {}
    updates: Dict[Tuple[int, int], int] = {}
    next_id = 0
    for level in range(1, levels + 1):
        pivots[level] = next_id
        next_id += 1
        for column in range(level + 1, levels + 1):
            updates[(level, column)] = next_id
            next_id += 1

    task_cycles = _structured_cycles(next_id, cycles, seed, cycle_lo, cycle_hi)
    tasks = [Task(id=i, cycles=task_cycles[i]) for i in range(next_id)]

    edges = []
    for (level, column), update_id in updates.items():
        edges.append(Edge(src=pivots[level], dst=update_id, comm=comm))
        if level < levels:
            edges.append(Edge(src=update_id, dst=pivots[level + 1], comm=comm))
            if (level + 1, column) in updates:
                edges.append(Edge(src=update_id, dst=updates[(level + 1, column)], comm=comm))

    label = f"lu(levels={levels},comm={comm},cycles={'jitter' if seed is not None else cycles},seed={seed})"
    return TaskGraph(tasks=tuple(tasks), edges=tuple(edges), label=label)


def levels_for_size(size: int) -> int:
    """Levels whose L(L+1)/2 task count is closest to size (ties -> fewer levels)."""
    if size < 1:
        raise ParameterError(f"size must be >= 1, got {size}")
    best, best_gap = 1, abs(1 - size)
    level = 1
    while level * (level + 1) // 2 <= 2 * size:
        gap = abs(level * (level + 1) // 2 - size)
        if gap < best_gap:
            best, best_gap = level, gap
        level += 1
    return best


def save(graph: TaskGraph, path: Union[str, Path]) -> None:
    payload = graph.model_dump(mode="json")
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _field_name(loc: Sequence) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def load(path: Union[str, Path]) -> TaskGraph:
    text = Path(path).read_text(encoding="utf-8")
    return loads(text)


def loads(text: str) -> TaskGraph:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise GraphFormatError(f"invalid JSON: {e.msg}", line=e.lineno) from e

    if not isinstance(data, dict):
        raise GraphFormatError("top-level value must be an object", line=1)
    for key in ("tasks", "edges"):
        if key not in data:
            raise GraphFormatError(f"missing required key '{key}'", field=key)

    try:
        return TaskGraph.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise GraphFormatError(first["msg"], field=_field_name(first["loc"])) from e
