"""Course-level hardship measures and the pooled BlockingScore."""

from __future__ import annotations

import numpy as np
import pandas as pd

from .config import HardshipConfig
from .errors import StandardizationError
from .graph_builder import CurriculumGraph, unit_matrices
from .ingest import make_period
from .stats import zscore

COMPONENTS = ["fail_first", "fail_ever", "mean_attempts", "dropout_after_fail", "blocking_factor"]

COURSE_COLUMNS = [
    "degree_id",
    "curriculum_id",
    "course_code",
    "n_attempters",
    "n_passers",
    "n_equivalence_passes",
    "n_successors",
    "p_first",
    "p_ever",
    "mean_attempts",
    "mean_attempts_imputed",
    "dropout_after_fail",
    "blocking_factor",
    "z_fail_first",
    "z_fail_ever",
    "z_mean_attempts",
    "z_dropout_after_fail",
    "z_blocking_factor",
    "blocking_score",
]


def first_try_pass(attempts: pd.DataFrame) -> float:
    """Share of a course's attempters whose first attempt is a pass.

    Withdrawals and absences on attempt 1 count as non-passes.
    """
    n = attempts["student_id"].nunique()
    first = attempts[attempts["attempt_index"] == 1]
    return float((first["outcome"] == "pass").sum() / n) if n else 0.0


def eventual_pass(outcomes: pd.DataFrame) -> float:
    return float(outcomes["passed"].mean()) if len(outcomes) else 0.0


def mean_attempts_to_pass(outcomes: pd.DataFrame) -> float | None:
    passers = outcomes.loc[outcomes["passed"], "n_attempts"]
    return float(passers.mean()) if len(passers) else None


def last_spells(spells: pd.DataFrame) -> pd.DataFrame:
    """Each student's final spell in a unit, with its end period ordinal."""
    last = spells.sort_values(["student_id", "start_year", "start_term", "spell_id"]).groupby("student_id").tail(1)
    last = last.set_index("student_id")
    last = last.assign(end_period=make_period(last["end_year"], last["end_term"]))
    return last[["end_reason", "end_period"]]


def dropout_after_fail(
    course_outcomes: pd.DataFrame,
    course_attempts: pd.DataFrame,
    last: pd.DataFrame,
    denominator: str = "attempters",
    population: int | None = None,
) -> float:
    """Share of students whose final activity in the unit failed this course.

    A student counts when their last spell in the unit did not end in
    graduation, they have a non-pass attempt at the course in that final
    period, and they never passed it. Censored students are left out of
    numerator and denominator. ``population`` (non-censored unit students) is
    required for ``denominator="spell_population"``.
    """
    info = last.reindex(course_outcomes["student_id"])
    uncensored = (info["end_reason"] != "censored").to_numpy()
    if denominator == "spell_population":
        denom = population or 0
    else:
        denom = int(uncensored.sum())
    if denom == 0:
        return 0.0
    never = course_outcomes.loc[~course_outcomes["passed"].to_numpy() & uncensored, "student_id"]
    stalled = course_attempts[course_attempts["outcome"] != "pass"]
    stalled = stalled[stalled["student_id"].isin(never)]
    end = last.reindex(stalled["student_id"])
    hit = (stalled["period"].to_numpy() == end["end_period"].to_numpy()) & (
        end["end_reason"].to_numpy() != "graduated"
    )
    return float(stalled.loc[hit, "student_id"].nunique() / denom)


def blocking_factor(
    course: str, descendants: set[str], courses: list[str], first: np.ndarray, passed_at: np.ndarray
) -> float:
    """Sum over reachable successors k of P(first attempt of k after passing course).

    ``first`` and ``passed_at`` are the unit's student x course period
    ordinals (see :func:`unit_matrices`). Same-period attempts are not gated.
    """
    if not descendants:
        return 0.0
    col = {c: i for i, c in enumerate(courses)}
    pass_j = passed_at[:, col[course]]
    passers = ~np.isnan(pass_j)
    n = int(passers.sum())
    if n == 0:
        return 0.0
    ks = [col[k] for k in sorted(descendants)]
    later = first[passers][:, ks] > pass_j[passers][:, None]
    return float(later.sum(axis=0).sum() / n)


def unit_course_measures(
    graph: CurriculumGraph,
    outcomes: pd.DataFrame,
    attempts: pd.DataFrame,
    spells: pd.DataFrame,
    config: HardshipConfig | None = None,
) -> pd.DataFrame:
    """Raw measures for every course node of one unit's graph."""
    config = config or HardshipConfig()
    courses, first, passed_at = unit_matrices(outcomes, "period")
    desc = graph.descendants()
    last = last_spells(spells)
    population = int((last["end_reason"] != "censored").sum())
    out_by = dict(tuple(outcomes.groupby("course_code", sort=True)))
    att_by = dict(tuple(attempts.groupby("course_code", sort=True)))
    rows = []
    for course in graph.nodes:
        oc = out_by[course]
        at = att_by[course]
        p_first = first_try_pass(at)
        p_ever = eventual_pass(oc)
        # p_first <= p_ever by construction; assert to catch table drift
        assert p_first <= p_ever + 1e-12, (graph.unit, course)
        rows.append(
            {
                "degree_id": graph.unit[0],
                "curriculum_id": graph.unit[1],
                "course_code": course,
                "n_attempters": len(oc),
                "n_passers": int(oc["passed"].sum()),
                "n_equivalence_passes": int((oc["pass_provenance"] == "equivalence").sum()),
                "n_successors": len(desc[course]),
                "p_first": p_first,
                "p_ever": p_ever,
                "mean_attempts": mean_attempts_to_pass(oc),
                "dropout_after_fail": dropout_after_fail(oc, at, last, config.dropout_denominator, population),
                "blocking_factor": blocking_factor(course, desc[course], courses, first, passed_at),
            }
        )
    return pd.DataFrame(rows)


def blocking_score(measures: pd.DataFrame, weights=(1.0, 1.0, 1.0, 1.0, 1.0)) -> pd.DataFrame:
    """Pool course measures of all units, z-score each component, weighted sum.

    A missing ``mean_attempts`` (no passers) is imputed with the pooled maximum
    and flagged in ``mean_attempts_imputed``.
    """
    if len(measures) < 2:
        raise StandardizationError(f"BlockingScore needs at least 2 pooled courses, got {len(measures)}")
    df = measures.sort_values(["degree_id", "curriculum_id", "course_code"]).reset_index(drop=True)
    ma = pd.to_numeric(df["mean_attempts"], errors="coerce")
    df["mean_attempts_imputed"] = ma.isna()
    fill = ma.max() if ma.notna().any() else 1.0
    df["mean_attempts"] = ma.fillna(fill)
    raw = {
        "fail_first": 1.0 - df["p_first"].to_numpy(dtype=float),
        "fail_ever": 1.0 - df["p_ever"].to_numpy(dtype=float),
        "mean_attempts": df["mean_attempts"].to_numpy(dtype=float),
        "dropout_after_fail": df["dropout_after_fail"].to_numpy(dtype=float),
        "blocking_factor": df["blocking_factor"].to_numpy(dtype=float),
    }
    score = np.zeros(len(df))
    for w, name in zip(weights, COMPONENTS):
        z = zscore(raw[name])
        df[f"z_{name}"] = z
        score += w * z
    df["blocking_score"] = score
    return df[COURSE_COLUMNS]
