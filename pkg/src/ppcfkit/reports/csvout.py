# src/ppcfkit/reports/csvout.py
from __future__ import annotations

import csv
import math
from fractions import Fraction
from typing import Any, Iterable, List, Sequence, TextIO

from ..explore import EnumResult
from ..metrics import DistanceReport

__all__ = [
    "format_cell", "format_float", "write_csv",
    "enum_rows", "sweep_rows", "distance_rows",
    "ENUM_HEADER", "SWEEP_HEADER", "DISTANCE_HEADER",
]

ENUM_HEADER = ("multiset", "numerator", "denominator")
SWEEP_HEADER = ("q", "prob_zero", "expectation_or_inf")
DISTANCE_HEADER = ("context", "prob1", "prob2", "gap")


def format_float(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def format_cell(v: Any) -> str:
    """Fractions as num/den, floats with 12 significant digits."""
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def write_csv(out: TextIO, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    n = 0
    for row in rows:
        w.writerow([format_cell(v) for v in row])
        n += 1
    return n


def enum_rows(res: EnumResult) -> List[tuple]:
    """One row per accepting label multiset (smallest first), then reject and residual.

    Masses are exact, split into numerator and denominator.
    """
    rows: List[tuple] = [
        (str(mu), p.numerator, p.denominator)
        for mu, p in sorted(res.table.items(), key=lambda kv: (kv[0].size(), kv[0].items))
    ]
    for kind, p in (("reject", res.reject_total), ("residual", res.residual)):
        p = Fraction(p)
        rows.append((kind, p.numerator, p.denominator))
    return rows


def sweep_rows(points: Iterable[tuple[float, float, float]]) -> List[tuple]:
    return [(float(q), float(p), float(e)) for q, p, e in points]


def distance_rows(rep: DistanceReport) -> List[tuple]:
    return [(r.context, r.prob1, r.prob2, r.gap) for r in rep.rows]
