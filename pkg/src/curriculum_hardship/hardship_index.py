"""Unit-level Empirical and Composite Hardship Indices and the ranking."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from .graph_builder import Unit
from .stats import describe, zscore

RANKING_COLUMNS = [
    "rank",
    "degree_id",
    "degree_name",
    "curriculum_id",
    "n_subjects",
    "longest_path",
    "mean_blocking_score",
    "pct_high_blocking",
    "h_struct_raw",
    "h_emp_raw",
    "h_struct_z",
    "h_emp_z",
    "h_composite",
]


@dataclass
class UnitHardship:
    unit: Unit
    degree_name: str | None
    mean_blocking_score: float
    pct_high_blocking: float
    h_emp_raw: float
    h_struct_raw: float
    h_struct_z: float
    h_emp_z: float
    h_composite: float
    rank: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("unit")
        return {"degree_id": self.unit[0], "curriculum_id": self.unit[1], **d}


def high_blocking_cut(scores, quantile: float = 0.9) -> float:
    """Pooled decile cut, linear interpolation between order statistics."""
    return float(np.quantile(np.asarray(scores, dtype=float), quantile, method="linear"))


def unit_aggregates(course_hardship: pd.DataFrame, cut: float) -> dict[Unit, tuple[float, float]]:
    """Mean BlockingScore and share of courses strictly above the pooled cut."""
    out = {}
    for (deg, cur), g in course_hardship.groupby(["degree_id", "curriculum_id"], sort=True):
        scores = g["blocking_score"].to_numpy(dtype=float)
        out[(deg, cur)] = (float(scores.mean()), float(np.mean(scores > cut)))
    return out


def h_emp(aggregates: dict[Unit, tuple[float, float]]) -> dict[Unit, float]:
    units = sorted(aggregates)
    z_mean = zscore([aggregates[u][0] for u in units])
    z_pct = zscore([aggregates[u][1] for u in units])
    return {u: float(a + b) for u, a, b in zip(units, z_mean, z_pct)}


def h_composite(h_struct_raw: dict[Unit, float], h_emp_raw: dict[Unit, float]) -> dict[Unit, tuple[float, float, float]]:
    """Return (z_struct, z_emp, composite) per unit over the common unit set."""
    units = sorted(set(h_struct_raw) & set(h_emp_raw))
    zs = zscore([h_struct_raw[u] for u in units])
    ze = zscore([h_emp_raw[u] for u in units])
    return {u: (float(a), float(b), float(0.5 * (a + b))) for u, a, b in zip(units, zs, ze)}


def build_unit_hardship(
    course_hardship: pd.DataFrame,
    h_struct_raw: dict[Unit, float],
    degree_names: dict[str, str] | None = None,
    quantile: float = 0.9,
) -> list[UnitHardship]:
    degree_names = degree_names or {}
    cut = high_blocking_cut(course_hardship["blocking_score"], quantile)
    aggs = unit_aggregates(course_hardship, cut)
    emp = h_emp(aggs)
    comp = h_composite(h_struct_raw, emp)
    units = [
        UnitHardship(
            unit=u,
            degree_name=degree_names.get(u[0]),
            mean_blocking_score=aggs[u][0],
            pct_high_blocking=aggs[u][1],
            h_emp_raw=emp[u],
            h_struct_raw=h_struct_raw[u],
            h_struct_z=comp[u][0],
            h_emp_z=comp[u][1],
            h_composite=comp[u][2],
        )
        for u in sorted(comp)
    ]
    return rank_units(units)


def rank_units(units: list[UnitHardship]) -> list[UnitHardship]:
    """Descending composite; ties broken by ascending unit identifier."""
    ordered = sorted(units, key=lambda h: (-h.h_composite, h.unit))
    for i, h in enumerate(ordered, start=1):
        h.rank = i
    return ordered


def ranking_table(units: list[UnitHardship], structural: dict[Unit, object] | None = None) -> pd.DataFrame:
    structural = structural or {}
    rows = []
    for h in units:
        m = structural.get(h.unit)
        rows.append(
            {
                "rank": h.rank,
                "degree_id": h.unit[0],
                "degree_name": h.degree_name or "",
                "curriculum_id": h.unit[1],
                "n_subjects": getattr(m, "n_subjects", None),
                "longest_path": getattr(m, "longest_path", None),
                "mean_blocking_score": h.mean_blocking_score,
                "pct_high_blocking": h.pct_high_blocking,
                "h_struct_raw": h.h_struct_raw,
                "h_emp_raw": h.h_emp_raw,
                "h_struct_z": h.h_struct_z,
                "h_emp_z": h.h_emp_z,
                "h_composite": h.h_composite,
            }
        )
    return pd.DataFrame(rows, columns=RANKING_COLUMNS)


def hardship_summary(units: list[UnitHardship]) -> dict[str, dict[str, float]]:
    return {
        name: describe([getattr(h, name) for h in units])
        for name in ("h_struct_z", "h_emp_z", "h_composite")
    }
