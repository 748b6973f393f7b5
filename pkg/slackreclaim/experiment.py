#!/usr/bin/env python3
"""
Batch experiment runner.

Sweeps graph families x sizes x processor counts x schedulers, evaluates every
requested reclamation algorithm against the same base schedule and normalizes
the system energy by the NONE baseline of that cell.
"""
import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError, SlackReclaimError
from .powermodel import ProcessorModel, resolve_cpu
from .reclaim import Algorithm, reclaim_schedule
from .scheduler import Priority, list_schedule
from .settings import settings
from .taskgraph import STRUCTURED_COMM, TaskGraph, gen_gauss_jordan, gen_lu, gen_random, levels_for_size, load

logger = logging.getLogger(__name__)

RECORD_COLUMNS = [
    "family",
    "graph",
    "size",
    "n_tasks",
    "n_processors",
    "scheduler",
    "algorithm",
    "makespan",
    "total_energy",
    "normalized_energy",
    "savings_pct",
]
ORDER_TOL = 1e-9
OPT_GAP_LIMIT = 1.5  # percentage points between MFS and OPT_CONT mean savings
# Algorithms whose savings must be non-decreasing, left to right.
CHAIN = [Algorithm.NONE, Algorithm.RDVFS, Algorithm.MMF, Algorithm.MFS, Algorithm.OPT_CONT]


class Family(str, Enum):
    RANDOM = "random"
    LU = "lu"
    GAUSS_JORDAN = "gauss_jordan"
    FILE = "file"


# Position of each family in per-graph seed derivation; independent of config order.
FAMILY_INDEX = {family: index for index, family in enumerate(Family)}


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    families: List[Family] = Field(default_factory=lambda: [Family.RANDOM], min_length=1)
    graph_files: List[str] = Field(default_factory=list)
    sizes: List[int] = Field(default_factory=lambda: [100, 200, 300, 400, 500], min_length=1)
    processor_counts: List[int] = Field(default_factory=lambda: [2, 4, 8, 16, 32], min_length=1)
    repetitions: int = Field(default=30, ge=1)
    lu_repetitions: Optional[int] = Field(default=None, ge=1)
    seed: int = Field(default=0, ge=0)
    cpu: str = "transmeta_crusoe"
    schedulers: List[Priority] = Field(default_factory=lambda: list(Priority), min_length=1)
    algorithms: List[Algorithm] = Field(default_factory=lambda: list(Algorithm), min_length=1)

    cycle_lo: float = Field(default=5.0, gt=0)
    cycle_hi: float = Field(default=10.0, gt=0)
    layer_width: int = Field(default=30, ge=1)
    edge_prob: float = Field(default=0.05, ge=0, le=1)
    comm_lo: float = Field(default=0.001, ge=0)
    comm_hi: float = Field(default=0.005, ge=0)
    gj_comm: float = Field(default=STRUCTURED_COMM, ge=0)
    lu_comm: float = Field(default=STRUCTURED_COMM, ge=0)
    lu_jitter: bool = True

    p_idle: Optional[float] = Field(default=None, ge=0)
    transition_time: Optional[float] = Field(default=None, ge=0)
    eligibility_factor: float = Field(default=20.0, ge=0)
    workers: int = Field(default=1, ge=1)
    output_csv: Optional[str] = None

    @model_validator(mode="after")
    def _check_ranges(self) -> "ExperimentConfig":
        if self.cycle_lo > self.cycle_hi:
            raise ValueError(f"cycle range [{self.cycle_lo}, {self.cycle_hi}] is empty")
        if self.comm_lo > self.comm_hi:
            raise ValueError(f"comm range [{self.comm_lo}, {self.comm_hi}] is empty")
        if any(size < 1 for size in self.sizes):
            raise ValueError("graph sizes must be >= 1")
        if any(count < 1 for count in self.processor_counts):
            raise ValueError("processor counts must be >= 1")
        if Family.FILE in self.families and not self.graph_files:
            raise ValueError("family 'file' needs at least one entry in graph_files")
        return self


class ExperimentRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: str
    graph: str
    size: int
    n_tasks: int
    n_processors: int
    scheduler: Priority
    algorithm: Algorithm
    makespan: float
    total_energy: float
    normalized_energy: float
    savings_pct: float

    def row(self) -> List[Any]:
        data = self.model_dump(mode="json")
        return [data[column] for column in RECORD_COLUMNS]


class CellFailure(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: str
    graph: str
    n_processors: int
    scheduler: str
    code: str
    message: str


class ExperimentResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    config: ExperimentConfig
    records: List[ExperimentRecord]
    failures: List[CellFailure] = Field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        rows = [record.model_dump(mode="json") for record in self.records]
        return pd.DataFrame(rows, columns=RECORD_COLUMNS)


class OrderingReport(BaseModel):
    chain_violations: List[str] = Field(default_factory=list)
    makespan_mismatches: List[str] = Field(default_factory=list)
    family_savings: Dict[str, Dict[str, float]] = Field(default_factory=dict)
    family_order_ok: Dict[str, bool] = Field(default_factory=dict)
    savings_by_procs: Dict[str, Dict[int, float]] = Field(default_factory=dict)
    opt_gap: Dict[str, float] = Field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.chain_violations and not self.makespan_mismatches


class GraphUnit(BaseModel):
    """One graph instance of the sweep, evaluated across all P and schedulers."""
    model_config = ConfigDict(frozen=True)

    family: Family
    size: int
    rep: int
    name: str
    path: Optional[str] = None


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read experiment config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"experiment config {path}: invalid JSON at line {e.lineno}") from e
    return config_from_dict(data)


def config_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("experiment config must be a JSON object")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise ConfigError(f"experiment config: {field}: {first['msg']}") from e


def config_from_profile(name: str, **overrides: Any) -> ExperimentConfig:
    data = settings.get_profile(name)
    data.update({key: value for key, value in overrides.items() if value is not None})
    return config_from_dict(data)


def graph_seed(seed: int, family: Family, size: int, rep: int) -> int:
    sequence = np.random.SeedSequence([seed, FAMILY_INDEX[family], size, rep])
    return int(sequence.generate_state(1)[0])


def _units(config: ExperimentConfig) -> List[GraphUnit]:
    units: List[GraphUnit] = []
    for family in config.families:
        if family is Family.FILE:
            for index, path in enumerate(config.graph_files):
                units.append(GraphUnit(family=family, size=0, rep=index, name=Path(path).stem, path=path))
            continue
        if family is Family.GAUSS_JORDAN:
            reps = 1
        elif family is Family.LU:
            reps = (config.lu_repetitions or config.repetitions) if config.lu_jitter else 1
        else:
            reps = config.repetitions
        for size in config.sizes:
            for rep in range(reps):
                units.append(GraphUnit(family=family, size=size, rep=rep, name=f"{family.value}-{size}-{rep}"))
    return units


def build_graph(unit: GraphUnit, config: ExperimentConfig) -> TaskGraph:
    if unit.family is Family.FILE:
        return load(unit.path)

    seed = graph_seed(config.seed, unit.family, unit.size, unit.rep)
    if unit.family is Family.RANDOM:
        return gen_random(
            unit.size,
            seed,
            cycle_lo=config.cycle_lo,
            cycle_hi=config.cycle_hi,
            layer_width=config.layer_width,
            edge_prob=config.edge_prob,
            comm_lo=config.comm_lo,
            comm_hi=config.comm_hi,
        )
    levels = levels_for_size(unit.size)
    if unit.family is Family.LU:
        return gen_lu(
            levels,
            comm=config.lu_comm,
            seed=seed if config.lu_jitter else None,
            cycle_lo=config.cycle_lo,
            cycle_hi=config.cycle_hi,
        )
    return gen_gauss_jordan(levels, comm=config.gj_comm)


def _preload_files(config: ExperimentConfig) -> Dict[str, TaskGraph]:
    graphs = {}
    if Family.FILE not in config.families:
        return graphs
    for path in config.graph_files:
        try:
            graphs[path] = load(path)
        except (OSError, SlackReclaimError) as e:
            raise ConfigError(f"graph file {path}: {e}") from e
    return graphs


def _resolve_model(config: ExperimentConfig) -> ProcessorModel:
    try:
        model = resolve_cpu(config.cpu)
    except SlackReclaimError as e:
        raise ConfigError(str(e)) from e
    return model.with_overrides(p_idle=config.p_idle, transition_time=config.transition_time)


def evaluate_graph(
    unit: GraphUnit,
    graph: TaskGraph,
    model: ProcessorModel,
    config: ExperimentConfig,
) -> Tuple[List[ExperimentRecord], List[CellFailure]]:
    """Every (P, scheduler) cell of one graph; a failing cell is recorded and skipped."""
    records: List[ExperimentRecord] = []
    failures: List[CellFailure] = []
    size = unit.size or len(graph.tasks)

    for n_processors in config.processor_counts:
        for scheduler in config.schedulers:
            try:
                schedule = list_schedule(graph, n_processors, model, scheduler)
                baseline = reclaim_schedule(schedule, graph, model, Algorithm.NONE, config.eligibility_factor)
                cell = []
                for algorithm in config.algorithms:
                    reclaimed = (
                        baseline
                        if algorithm is Algorithm.NONE
                        else reclaim_schedule(schedule, graph, model, algorithm, config.eligibility_factor)
                    )
                    reclaimed.revalidate(graph)
                    normalized = reclaimed.total_energy / baseline.total_energy
                    cell.append(
                        ExperimentRecord(
                            family=unit.family.value,
                            graph=unit.name,
                            size=size,
                            n_tasks=len(graph.tasks),
                            n_processors=n_processors,
                            scheduler=scheduler,
                            algorithm=algorithm,
                            makespan=schedule.makespan,
                            total_energy=reclaimed.total_energy,
                            normalized_energy=normalized,
                            savings_pct=100.0 * (1.0 - normalized),
                        )
                    )
                records.extend(cell)
                logger.debug(
                    f"{unit.name} P={n_processors} {scheduler.value}: "
                    + ", ".join(f"{r.algorithm.value}={r.savings_pct:.3f}%" for r in cell)
                )
            except SlackReclaimError as e:
                logger.error(f"{unit.name} P={n_processors} {scheduler.value} failed: {e.message}")
                failures.append(
                    CellFailure(
                        family=unit.family.value,
                        graph=unit.name,
                        n_processors=n_processors,
                        scheduler=scheduler.value,
                        code=e.code,
                        message=e.message,
                    )
                )
    return records, failures


def run(config: ExperimentConfig) -> ExperimentResult:
    """Records come out in canonical order whatever the worker count; streamed to output_csv if set."""
    model = _resolve_model(config)
    files = _preload_files(config)
    units = _units(config)
    logger.info(
        f"experiment: {len(units)} graphs x {len(config.processor_counts)} processor counts x "
        f"{len(config.schedulers)} schedulers, cpu={model.name}, seed={config.seed}"
    )

    def work(unit: GraphUnit) -> Tuple[List[ExperimentRecord], List[CellFailure]]:
        graph = files[unit.path] if unit.family is Family.FILE else build_graph(unit, config)
        return evaluate_graph(unit, graph, model, config)

    records: List[ExperimentRecord] = []
    failures: List[CellFailure] = []
    sink = open(config.output_csv, "w", newline="", encoding="utf-8") if config.output_csv else None
    try:
        writer = csv.writer(sink) if sink else None
        if writer:
            writer.writerow(RECORD_COLUMNS)
        for unit_records, unit_failures in _ordered(work, units, config.workers):
            records.extend(unit_records)
            failures.extend(unit_failures)
            if writer:
                writer.writerows(record.row() for record in unit_records)
                sink.flush()
    finally:
        if sink:
            sink.close()

    logger.info(f"experiment finished: {len(records)} records, {len(failures)} failed cells")
    return ExperimentResult(config=config, records=records, failures=failures)


def _ordered(work, units: List[GraphUnit], workers: int) -> Iterator[Tuple[List[ExperimentRecord], List[CellFailure]]]:
    if workers <= 1:
        for unit in units:
            yield work(unit)
        return
    # Cells are pure-Python and hold the GIL; the pool keeps result order, not throughput.
    with ThreadPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(work, units)


def load_result(path: Union[str, Path]) -> ExperimentResult:
    """Read a result back from its json dump or a records csv (config defaults for csv)."""
    path = Path(path)
    if path.suffix == ".json":
        try:
            return ExperimentResult.model_validate_json(path.read_text(encoding="utf-8"))
        except ValidationError as e:
            raise ConfigError(f"result file {path}: {e.errors()[0]['msg']}") from e

    frame = pd.read_csv(path, float_precision="round_trip", dtype={"graph": str, "family": str})
    missing = [column for column in RECORD_COLUMNS if column not in frame.columns]
    if missing:
        raise ConfigError(f"result file {path} lacks columns {missing}")
    records = [ExperimentRecord.model_validate(row) for row in frame[RECORD_COLUMNS].to_dict("records")]
    config = ExperimentConfig(
        families=sorted({Family(r.family) for r in records}, key=FAMILY_INDEX.get) or [Family.RANDOM],
        sizes=sorted({r.size for r in records}) or [1],
        processor_counts=sorted({r.n_processors for r in records}) or [1],
        schedulers=[p for p in Priority if any(r.scheduler is p for r in records)] or list(Priority),
        algorithms=[a for a in Algorithm if any(r.algorithm is a for r in records)] or list(Algorithm),
        graph_files=sorted({r.graph for r in records if r.family == Family.FILE.value}),
    )
    return ExperimentResult(config=config, records=records)


def check_orderings(result: ExperimentResult) -> OrderingReport:
    """Per-cell algorithm ordering, makespan identity and family-level savings ordering."""
    frame = result.to_frame()
    report = OrderingReport()
    if frame.empty:
        return report

    cell_keys = ["family", "graph", "n_processors", "scheduler"]
    rank = {algorithm.value: index for index, algorithm in enumerate(CHAIN)}
    for key, cell in frame.groupby(cell_keys, sort=True):
        label = "/".join(str(part) for part in key)
        if cell["makespan"].nunique() > 1:
            report.makespan_mismatches.append(label)
        energies = cell.assign(rank=cell["algorithm"].map(rank)).sort_values("rank")["total_energy"].to_numpy()
        for before, after in zip(energies, energies[1:]):
            if after > before * (1 + ORDER_TOL):
                report.chain_violations.append(label)
                break

    reclaiming = frame[frame["algorithm"] != Algorithm.NONE.value]
    means = reclaiming.groupby(["algorithm", "family"])["savings_pct"].mean()
    for (algorithm, family), value in means.items():
        report.family_savings.setdefault(algorithm, {})[family] = float(value)
    expected = [Family.GAUSS_JORDAN.value, Family.RANDOM.value, Family.LU.value]
    for algorithm, by_family in report.family_savings.items():
        present = [by_family[f] for f in expected if f in by_family]
        if len(present) >= 2:
            report.family_order_ok[algorithm] = all(a < b for a, b in zip(present, present[1:]))

    mfs = report.family_savings.get(Algorithm.MFS.value, {})
    opt = report.family_savings.get(Algorithm.OPT_CONT.value, {})
    for family in sorted(set(mfs) & set(opt)):
        report.opt_gap[family] = opt[family] - mfs[family]

    random_rows = reclaiming[reclaiming["family"] == Family.RANDOM.value]
    by_procs = random_rows.groupby(["algorithm", "n_processors"])["savings_pct"].mean()
    for (algorithm, n_processors), value in by_procs.items():
        report.savings_by_procs.setdefault(algorithm, {})[int(n_processors)] = float(value)

    if report.chain_violations:
        logger.warning(f"algorithm ordering broken in {len(report.chain_violations)} cells")
    if report.makespan_mismatches:
        logger.warning(f"makespan differs across algorithms in {len(report.makespan_mismatches)} cells")
    for algorithm, ok in report.family_order_ok.items():
        if not ok:
            logger.warning(f"{algorithm}: mean savings are not ordered gauss_jordan < random < lu")
    for family, gap in report.opt_gap.items():
        if gap > OPT_GAP_LIMIT:
            logger.warning(f"{family}: OPT_CONT saves {gap:.2f} points more than MFS")
    return report
