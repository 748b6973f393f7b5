#!/usr/bin/env python3
"""
Result reporting: full records as csv/json, and a summary made of plot-ready CSVs
plus a markdown digest rendered with jinja2.
"""
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd
from jinja2 import Environment, FileSystemLoader

from .errors import ParameterError
from .experiment import RECORD_COLUMNS, ExperimentResult, Family, OrderingReport, check_orderings
from .reclaim import Algorithm

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).parent / "templates"
SUMMARY_FILES = {
    "table_savings": "table_savings.csv",
    "savings_by_procs": "savings_by_procs.csv",
    "normalized_by_size": "normalized_by_size.csv",
}


class ReportFormat(str, Enum):
    CSV = "csv"
    JSON = "json"
    SUMMARY = "summary"


def _ordered(values, order: List[str]) -> List[str]:
    present = set(values)
    return [item for item in order if item in present] + sorted(present - set(order))


ALGORITHM_ORDER = [algorithm.value for algorithm in Algorithm]
FAMILY_ORDER = [family.value for family in Family]


def _reclaiming(frame: pd.DataFrame) -> pd.DataFrame:
    # NONE only carries information when nothing else was run.
    rows = frame[frame["algorithm"] != Algorithm.NONE.value]
    return frame if rows.empty else rows


def _family_rows(table: pd.DataFrame) -> pd.DataFrame:
    """Reorder a family-first MultiIndex so families follow FAMILY_ORDER."""
    families = _ordered(table.index.get_level_values("family"), FAMILY_ORDER)
    rank = {family: i for i, family in enumerate(families)}
    keys = sorted(table.index, key=lambda key: (rank[key[0]],) + tuple(key[1:]))
    return table.reindex(pd.MultiIndex.from_tuples(keys, names=table.index.names))


def summary_tables(result: ExperimentResult) -> Dict[str, pd.DataFrame]:
    frame = result.to_frame()
    if frame.empty:
        return {name: pd.DataFrame() for name in SUMMARY_FILES}

    rows = _reclaiming(frame)
    table = rows.pivot_table(index="algorithm", columns="family", values="savings_pct", aggfunc="mean")
    table = table.reindex(
        index=_ordered(table.index, ALGORITHM_ORDER), columns=_ordered(table.columns, FAMILY_ORDER)
    )

    by_procs = rows.pivot_table(
        index=["family", "n_processors"], columns="algorithm", values="savings_pct", aggfunc="mean"
    )
    by_procs = _family_rows(by_procs.reindex(columns=_ordered(by_procs.columns, ALGORITHM_ORDER)))

    by_size = frame.pivot_table(
        index=["family", "scheduler", "size"], columns="algorithm", values="normalized_energy", aggfunc="mean"
    )
    by_size = _family_rows(by_size.reindex(columns=_ordered(by_size.columns, ALGORITHM_ORDER)))

    return {"table_savings": table, "savings_by_procs": by_procs, "normalized_by_size": by_size}


def _markdown_table(title: str, frame: pd.DataFrame, digits: int) -> Dict[str, Any]:
    flat = frame.reset_index()
    rows = []
    for values in flat.itertuples(index=False):
        rows.append([f"{v:.{digits}f}" if isinstance(v, float) else str(v) for v in values])
    return {"title": title, "columns": [str(c) for c in flat.columns], "rows": rows}


def render_summary(
    result: ExperimentResult,
    tables: Optional[Dict[str, pd.DataFrame]] = None,
    orderings: Optional[OrderingReport] = None,
) -> str:
    tables = tables if tables is not None else summary_tables(result)
    env = Environment(loader=FileSystemLoader(str(TEMPLATE_DIR)), trim_blocks=True, lstrip_blocks=True)
    template = env.get_template("summary.md.j2")

    sections = []
    if not tables["table_savings"].empty:
        sections = [
            _markdown_table("Mean energy savings (%) per algorithm and graph family", tables["table_savings"], 3),
            _markdown_table(
                "Mean energy savings (%) by graph family and processor count", tables["savings_by_procs"], 3
            ),
            _markdown_table(
                "Normalized energy by graph family, scheduler and graph size", tables["normalized_by_size"], 4
            ),
        ]
    frame = result.to_frame()
    cells = frame.groupby(["graph", "n_processors", "scheduler"]).ngroups if not frame.empty else 0
    return template.render(
        config=result.config,
        families=[family.value for family in result.config.families],
        n_graphs=frame["graph"].nunique() if not frame.empty else 0,
        n_cells=cells,
        n_records=len(frame),
        tables=sections,
        orderings=orderings,
        failures=result.failures,
    )


def write_report(
    result: ExperimentResult, fmt: Union[ReportFormat, str], out_dir: Union[str, Path]
) -> List[Path]:
    """Write one report format into out_dir and return the files written."""
    try:
        fmt = ReportFormat(fmt)
    except ValueError as e:
        raise ParameterError(f"unknown report format '{fmt}' (expected csv, json or summary)") from e
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if fmt is ReportFormat.CSV:
        path = out_dir / "records.csv"
        result.to_frame().to_csv(path, index=False, columns=RECORD_COLUMNS)
        written = [path]
    elif fmt is ReportFormat.JSON:
        path = out_dir / "result.json"
        path.write_text(result.model_dump_json(indent=2) + "\n", encoding="utf-8")
        written = [path]
    else:
        tables = summary_tables(result)
        written = []
        for name, filename in SUMMARY_FILES.items():
            path = out_dir / filename
            tables[name].to_csv(path)
            written.append(path)
        path = out_dir / "summary.md"
        path.write_text(render_summary(result, tables, check_orderings(result)), encoding="utf-8")
        written.append(path)

    for path in written:
        logger.info(f"report written: {path}")
    return written
