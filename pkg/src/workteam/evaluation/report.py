"""Plain-text and JSON rendering of metric reports and ablation tables."""

from __future__ import annotations

from typing import Mapping, Optional, Union

from .harness import AblationResult
from .metrics import MetricsReport

Row = Union[MetricsReport, AblationResult]


def _cell(value: Optional[float]) -> str:
    return f"{value * 100:.1f}" if value is not None else "-"


def _row_values(row: Row) -> tuple[Optional[float], Optional[float], Optional[float]]:
    if isinstance(row, MetricsReport):
        return row.emr, row.aa, row.pa
    return row.emr, row.aa, row.pa


def render_table(rows: Mapping[str, Row]) -> str:
    """Aligned method-by-metric table; percentages to one decimal, '-' for n/a."""
    name_width = max([len("Method")] + [len(name) for name in rows])
    header = f"{'Method':<{name_width}}  {'EMR (%)':>8}  {'AA (%)':>8}  {'PA (%)':>8}"
    lines = [header]
    for name, row in rows.items():
        emr, aa, pa = _row_values(row)
        lines.append(
            f"{name:<{name_width}}  {_cell(emr):>8}  {_cell(aa):>8}  {_cell(pa):>8}"
        )
    return "\n".join(lines)


def report_to_obj(row: Row) -> dict:
    return row.to_obj()
