"""Dropout rate, time to degree, and their association with hardship.

Nothing here reads hardship tables except :func:`associate`, which takes two
plain unit -> value maps.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from .config import OutcomesConfig
from .errors import AssociationError
from .graph_builder import Unit

MEMBERSHIP_COLUMNS = [
    "student_id",
    "degree_id",
    "curriculum_id",
    "start_year",
    "end_year",
    "n_spells",
    "status",
    "time_to_degree",
]
OUTCOME_SUMMARY_COLUMNS = [
    "degree_id",
    "curriculum_id",
    "n_cohort",
    "n_dropouts",
    "n_graduates",
    "censored",
    "dropout_rate",
    "mean_time_to_degree",
]


@dataclass
class OutcomeSummary:
    unit: Unit
    n_cohort: int
    n_dropouts: int
    n_graduates: int
    censored: int
    dropout_rate: float | None
    mean_time_to_degree: float | None

    def row(self) -> dict:
        d = asdict(self)
        d.pop("unit")
        return {"degree_id": self.unit[0], "curriculum_id": self.unit[1], **d}


@dataclass
class Association:
    x_name: str
    y_name: str
    n: int
    pearson_r: float | None
    slope: float | None
    intercept: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def classify_memberships(
    spells: pd.DataFrame, horizon_year: int, config: OutcomesConfig | None = None
) -> pd.DataFrame:
    """Chain each student's spells in a unit into cohort memberships.

    A later spell in the same unit that starts within ``window_years`` of the
    previous spell's last year continues the membership (the student
    reappeared). A membership ends as ``graduate`` if its final spell
    graduated, ``censored`` if its last activity lies within the window of the
    data horizon, and ``dropout`` otherwise (degree switchers included).
    """
    config = config or OutcomesConfig()
    window = config.window_years
    if spells.empty:
        return pd.DataFrame(columns=MEMBERSHIP_COLUMNS)
    unit_key = ["student_id", "degree_id", "curriculum_id"]
    sp = spells.sort_values(unit_key + ["start_year", "start_term", "spell_id"], kind="mergesort")
    sp = sp.reset_index(drop=True)
    same = np.ones(len(sp), dtype=bool)
    for col in unit_key:
        v = sp[col].to_numpy()
        same[1:] &= v[1:] == v[:-1]
    same[0] = False
    prev_end = np.r_[0, sp["end_year"].to_numpy()[:-1]]
    prev_grad = np.r_[False, sp["end_reason"].to_numpy()[:-1] == "graduated"]
    continues = same & ~prev_grad & (sp["start_year"].to_numpy() <= prev_end + window)
    sp["_m"] = np.cumsum(~continues)
    g = sp.groupby("_m", sort=True)
    out = g[unit_key].first()
    out["start_year"] = g["start_year"].first()
    out["end_year"] = g["end_year"].last()
    out["end_term"] = g["end_term"].last()
    out["reason"] = g["end_reason"].last()
    out["n_spells"] = g.size()
    out = out.reset_index(drop=True)

    # a membership followed by another in the same unit was observed to lapse
    has_next = np.zeros(len(out), dtype=bool)
    has_next[:-1] = True
    for col in unit_key:
        v = out[col].to_numpy()
        has_next[:-1] &= v[1:] == v[:-1]
    graduated = out["reason"].eq("graduated")
    censored = ~graduated & ~has_next & (horizon_year - out["end_year"] < window)
    out["status"] = np.where(graduated, "graduate", np.where(censored, "censored", "dropout"))

    degree_start = (
        spells.sort_values(["start_year", "start_term"], kind="mergesort")
        .groupby(["student_id", "degree_id"])[["start_year", "start_term"]]
        .first()
    )
    start = degree_start.reindex(pd.MultiIndex.from_frame(out[["student_id", "degree_id"]]))
    years = out["end_year"].to_numpy(dtype=float) - start["start_year"].to_numpy(dtype=float)
    if config.fractional_terms:
        years = years + (out["end_term"].to_numpy(dtype=float) - start["start_term"].to_numpy(dtype=float)) / config.terms_per_year
    out["time_to_degree"] = np.where(graduated, years, np.nan)
    return out[MEMBERSHIP_COLUMNS]


def in_cohort(memberships: pd.DataFrame, config: OutcomesConfig) -> pd.DataFrame:
    keep = pd.Series(True, index=memberships.index)
    if config.cohort_start is not None:
        keep &= memberships["start_year"] >= config.cohort_start
    if config.cohort_end is not None:
        keep &= memberships["start_year"] <= config.cohort_end
    return memberships[keep]


def dropout_rate(memberships: pd.DataFrame) -> tuple[float | None, int]:
    """(rate, censored count); censored memberships leave the denominator."""
    status = memberships["status"]
    censored = int((status == "censored").sum())
    denom = len(status) - censored
    if denom == 0:
        return None, censored
    return float((status == "dropout").sum() / denom), censored


def time_to_degree(memberships: pd.DataFrame) -> float | None:
    t = memberships.loc[memberships["status"] == "graduate", "time_to_degree"]
    return float(t.mean()) if len(t) else None


def unit_outcomes(memberships: pd.DataFrame, config: OutcomesConfig | None = None) -> list[OutcomeSummary]:
    config = config or OutcomesConfig()
    cohort = in_cohort(memberships, config)
    out = []
    for (deg, cur), g in cohort.groupby(["degree_id", "curriculum_id"], sort=True):
        rate, censored = dropout_rate(g)
        out.append(
            OutcomeSummary(
                unit=(deg, cur),
                n_cohort=len(g),
                n_dropouts=int((g["status"] == "dropout").sum()),
                n_graduates=int((g["status"] == "graduate").sum()),
                censored=censored,
                dropout_rate=rate,
                mean_time_to_degree=time_to_degree(g),
            )
        )
    return out


def associate(x: dict, y: dict, x_name: str = "x", y_name: str = "y") -> Association:
    """Pearson r and least-squares line over units present in both maps."""
    keys = sorted(k for k in set(x) & set(y) if x[k] is not None and y[k] is not None)
    keys = [k for k in keys if math.isfinite(x[k]) and math.isfinite(y[k])]
    n = len(keys)
    if n < 3:
        raise AssociationError(f"association {y_name} ~ {x_name} needs at least 3 units, got {n}")
    xs = np.array([x[k] for k in keys], dtype=float)
    ys = np.array([y[k] for k in keys], dtype=float)
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    sxy = float(dx @ dy)
    if np.all(xs == xs[0]):
        return Association(x_name, y_name, n, None, None, None)
    slope = sxy / sxx
    intercept = float(ys.mean() - slope * xs.mean())
    if np.all(ys == ys[0]):
        return Association(x_name, y_name, n, None, slope, intercept)
    r = sxy / math.sqrt(sxx * syy)
    return Association(x_name, y_name, n, max(-1.0, min(1.0, r)), slope, intercept)
