"""subject_attempts and subject_outcomes tables derived from spells."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from .ingest import Segmentation

UNIT = ["degree_id", "curriculum_id"]
KEY = ["student_id", "degree_id", "curriculum_id", "course_code"]
EXAM_KINDS = ("regular_exam", "free_exam", "promotion")
ATTEMPT_RESULTS = ("pass", "fail", "absent", "withdrawal")
# a fail and a pass in the same period: the pass is the later attempt
_OUTCOME_RANK = {"absent": 0, "withdrawal": 1, "fail": 2, "pass": 3}

ATTEMPT_COLUMNS = [
    "student_id",
    "degree_id",
    "curriculum_id",
    "course_code",
    "attempt_index",
    "period_year",
    "period_term",
    "period",
    "outcome",
    "provenance",
    "spell_id",
]
OUTCOME_COLUMNS = [
    "student_id",
    "degree_id",
    "curriculum_id",
    "course_code",
    "first_attempt_year",
    "first_attempt_term",
    "first_attempt_period",
    "pass_year",
    "pass_term",
    "pass_period",
    "n_attempts",
    "passed",
    "first_outcome",
    "pass_provenance",
]


@dataclass
class AttemptStats:
    n_invalid_course_events: int = 0
    n_registrations_collapsed: int = 0
    n_registration_absences: int = 0
    n_equivalence_passes: int = 0
    n_ignored_events: int = 0
    n_post_pass_discarded: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def derive_attempts(
    seg: Segmentation, catalog: pd.DataFrame, include_equivalences: bool = True
) -> tuple[pd.DataFrame, AttemptStats]:
    """Turn course events into one row per attempt.

    Exams and promotions with an attempt result are attempts. A registration
    becomes an ``absent`` attempt only when no exam for the same course
    happened in the same period. Equivalences with result ``pass`` become pass
    attempts with provenance ``equivalence``. Rows after a student's pass are
    discarded.
    """
    stats = AttemptStats()
    ev = seg.events
    ev = ev[ev["course_code"].notna() & ev["event_kind"].isin(EXAM_KINDS + ("registration", "equivalence"))]
    valid = catalog.loc[catalog["valid"], ["degree_id", "curriculum_id", "course_code"]]
    ev = ev.merge(valid.assign(_valid=True), on=["degree_id", "curriculum_id", "course_code"], how="left")
    is_valid = ev["_valid"].eq(True)
    stats.n_invalid_course_events = int((~is_valid).sum())
    ev = ev[is_valid].drop(columns="_valid")

    exams = ev[ev["event_kind"].isin(EXAM_KINDS) & ev["result"].isin(ATTEMPT_RESULTS)]
    equiv = ev[(ev["event_kind"] == "equivalence") & (ev["result"] == "pass")]
    if not include_equivalences:
        equiv = equiv.iloc[0:0]
    regs = ev[ev["event_kind"] == "registration"].drop_duplicates(KEY + ["period"])
    stats.n_ignored_events = int(len(ev) - len(exams) - len(equiv) - (ev["event_kind"] == "registration").sum())

    exam_slots = exams[KEY + ["period"]].drop_duplicates().assign(_exam=True)
    regs = regs.merge(exam_slots, on=KEY + ["period"], how="left")
    has_exam = regs["_exam"].eq(True)
    stats.n_registrations_collapsed = int(has_exam.sum())
    regs = regs[~has_exam].drop(columns="_exam")
    stats.n_registration_absences = len(regs)
    stats.n_equivalence_passes = len(equiv)

    cols = KEY + ["period_year", "period_term", "period", "spell_id"]
    parts = [
        exams[cols].assign(outcome=exams["result"].to_numpy(), provenance=exams["event_kind"].to_numpy()),
        equiv[cols].assign(outcome="pass", provenance="equivalence"),
        regs[cols].assign(outcome="absent", provenance="registration"),
    ]
    att = pd.concat(parts, ignore_index=True)
    if att.empty:
        return pd.DataFrame(columns=ATTEMPT_COLUMNS), stats
    att["_rank"] = att["outcome"].map(_OUTCOME_RANK)
    att = att.sort_values(KEY + ["period", "_rank", "provenance"], kind="mergesort").reset_index(drop=True)

    att["_pass"] = (att["outcome"] == "pass").astype(np.int64)
    prior_passes = att.groupby(KEY, sort=False)["_pass"].cumsum() - att["_pass"]
    after_pass = prior_passes.to_numpy() > 0
    stats.n_post_pass_discarded = int(after_pass.sum())
    att = att[~after_pass].drop(columns=["_rank", "_pass"]).reset_index(drop=True)
    att["attempt_index"] = att.groupby(KEY, sort=False).cumcount() + 1
    return att[ATTEMPT_COLUMNS], stats


def derive_outcomes(attempts: pd.DataFrame) -> pd.DataFrame:
    """Fold attempts into one summary row per (student, unit, course)."""
    if attempts.empty:
        return pd.DataFrame(columns=OUTCOME_COLUMNS)
    att = attempts.sort_values(KEY + ["attempt_index"], kind="mergesort")
    g = att.groupby(KEY, sort=True)
    first = g.first()
    out = pd.DataFrame(
        {
            "first_attempt_year": first["period_year"],
            "first_attempt_term": first["period_term"],
            "first_attempt_period": g["period"].min(),
            "n_attempts": g.size(),
            "first_outcome": first["outcome"],
        }
    )
    passes = att[att["outcome"] == "pass"].set_index(KEY)
    out["pass_year"] = passes["period_year"].reindex(out.index).astype("Int64")
    out["pass_term"] = passes["period_term"].reindex(out.index).astype("Int64")
    out["pass_period"] = passes["period"].reindex(out.index).astype("Int64")
    out["passed"] = out["pass_period"].notna().to_numpy()
    out["pass_provenance"] = passes["provenance"].reindex(out.index)
    return out.reset_index()[OUTCOME_COLUMNS]


def entry_years(spells: pd.DataFrame) -> pd.DataFrame:
    """First spell start year of each student in each unit."""
    return (
        spells.groupby(["student_id", "degree_id", "curriculum_id"], sort=True)["start_year"]
        .min()
        .rename("entry_year")
        .reset_index()
    )
