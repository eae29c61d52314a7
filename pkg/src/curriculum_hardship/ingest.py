"""Load academic-event CSVs, validate rows, segment histories into spells and
build the per-unit course catalog.

Tables are pandas DataFrames with fixed column orders (see the ``*_COLUMNS``
constants). A period is an ordinal ``year * 100 + term`` with a missing term
stored as 0, so integer comparison is the lexicographic (year, term) order.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .config import IngestConfig
from .errors import IngestError, SchemaError

log = logging.getLogger(__name__)

INPUT_COLUMNS = [
    "student_id",
    "degree_id",
    "curriculum_id",
    "course_code",
    "event_kind",
    "result",
    "grade",
    "period_year",
    "period_term",
]

# Sort rank within a period: course activity first, spell-closing markers last.
EVENT_KINDS = {
    "registration": 0,
    "regular_exam": 1,
    "free_exam": 2,
    "promotion": 3,
    "equivalence": 4,
    "graduation": 5,
    "curriculum_change": 6,
    "transfer": 7,
}
COURSE_EVENT_KINDS = ("registration", "regular_exam", "free_exam", "promotion", "equivalence")
CLOSING_KINDS = ("graduation", "curriculum_change", "transfer")
RESULTS = ("pass", "fail", "absent", "withdrawal", "not_applicable")
END_REASONS = ("graduated", "switched_degree", "switched_curriculum", "censored", "inactive")

EVENT_COLUMNS = [
    "student_id",
    "degree_id",
    "curriculum_id",
    "course_code",
    "event_kind",
    "result",
    "grade",
    "period_year",
    "period_term",
    "period",
    "line",
]
SPELL_COLUMNS = [
    "spell_id",
    "student_id",
    "degree_id",
    "curriculum_id",
    "start_year",
    "start_term",
    "end_year",
    "end_term",
    "end_reason",
    "n_events",
]
CATALOG_COLUMNS = [
    "degree_id",
    "curriculum_id",
    "course_code",
    "n_students",
    "n_attempts",
    "first_seen",
    "last_seen",
    "valid",
    "invalid_reason",
]

DEDUP_KEY = ["student_id", "course_code", "event_kind", "period_year", "period_term", "result"]
MAX_TERM = 99


def make_period(year, term):
    return year * 100 + term


@dataclass
class IngestReport:
    n_rows: int = 0
    n_events: int = 0
    n_rejected: int = 0
    n_duplicates: int = 0
    rejected_lines: list[int] = field(default_factory=list)
    reject_reasons: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "n_events": self.n_events,
            "n_rejected": self.n_rejected,
            "n_duplicates": self.n_duplicates,
            "rejected_lines": self.rejected_lines,
            "reject_reasons": dict(sorted(self.reject_reasons.items())),
        }


def read_raw(path: str | Path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise IngestError(f"input file not found: {path}")
    header = pd.read_csv(path, nrows=0, encoding="utf-8").columns.tolist()
    missing = [c for c in INPUT_COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"missing required column(s): {', '.join(missing)}")
    extra = [c for c in header if c not in INPUT_COLUMNS]
    if extra:
        raise SchemaError(f"unexpected column(s): {', '.join(extra)}")
    return pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")


def load_events(path: str | Path, config: IngestConfig | None = None) -> tuple[pd.DataFrame, IngestReport]:
    """Read, validate and deduplicate an event file.

    Returns the clean event table sorted by student and period, plus a report
    of rejected and duplicate rows. Raises :class:`IngestError` when the
    rejected fraction exceeds ``malformed_tolerance``.
    """
    return validate_events(read_raw(path), config)


def validate_events(raw: pd.DataFrame, config: IngestConfig | None = None) -> tuple[pd.DataFrame, IngestReport]:
    config = config or IngestConfig()
    raw = raw[INPUT_COLUMNS].astype(str)
    n = len(raw)
    report = IngestReport(n_rows=n)
    if n == 0:
        return pd.DataFrame(columns=EVENT_COLUMNS), report

    # file line numbers: header is line 1
    line = np.arange(2, n + 2)
    strip = {c: raw[c].str.strip() for c in INPUT_COLUMNS}
    kind = strip["event_kind"]
    result = strip["result"]
    year_num = pd.to_numeric(strip["period_year"], errors="coerce")
    term_txt = strip["period_term"]
    term_num = pd.to_numeric(term_txt.where(term_txt != "", "0"), errors="coerce")
    grade_txt = strip["grade"]
    grade_num = pd.to_numeric(grade_txt.where(grade_txt != "", np.nan), errors="coerce")

    checks = {
        "missing_student": strip["student_id"] == "",
        "bad_event_kind": ~kind.isin(list(EVENT_KINDS)),
        "bad_result": ~result.isin(list(RESULTS)),
        "bad_grade": (grade_txt != "") & grade_num.isna(),
        "bad_year": year_num.isna() | (year_num % 1 != 0),
        "year_out_of_range": year_num.notna()
        & ((year_num < config.min_year) | (year_num > config.max_year)),
        "bad_term": term_num.isna() | (term_num % 1 != 0) | (term_num < 0) | (term_num > MAX_TERM),
        "graduation_result": (kind == "graduation") & (result != "not_applicable"),
        "missing_course": kind.isin(list(COURSE_EVENT_KINDS)) & (strip["course_code"] == ""),
    }
    bad = np.zeros(n, dtype=bool)
    for reason, mask in checks.items():
        # attribute each rejected row to its first failing check only
        hit = mask.to_numpy() & ~bad
        if hit.any():
            report.reject_reasons[reason] = int(hit.sum())
        bad |= hit
    report.n_rejected = int(bad.sum())
    report.rejected_lines = line[bad][:10].tolist()
    if n and report.n_rejected / n > config.malformed_tolerance:
        raise IngestError(
            f"{report.n_rejected} of {n} rows malformed (tolerance {config.malformed_tolerance:.2%}); "
            f"first offending lines: {report.rejected_lines}"
        )
    if report.n_rejected:
        log.warning("rejected %d malformed rows (lines %s...)", report.n_rejected, report.rejected_lines)

    keep = ~bad

    def nullable(col: str) -> pd.Series:
        s = strip[col][keep]
        return s.where(s != "", None)

    events = pd.DataFrame(
        {
            "student_id": strip["student_id"][keep],
            "degree_id": nullable("degree_id"),
            "curriculum_id": nullable("curriculum_id"),
            "course_code": nullable("course_code"),
            "event_kind": kind[keep],
            "result": result[keep],
            "grade": grade_num[keep].astype(float),
            "period_year": year_num[keep].astype(np.int64),
            "period_term": term_num[keep].astype(np.int64),
            "line": line[keep],
        }
    )
    before = len(events)
    events = events.drop_duplicates(subset=DEDUP_KEY, keep="first")
    report.n_duplicates = before - len(events)
    events = sort_events(events)
    report.n_events = len(events)
    return events, report


def sort_events(events: pd.DataFrame) -> pd.DataFrame:
    events = events.copy()
    events["period"] = make_period(events["period_year"], events["period_term"]).astype(np.int64)
    events["_rank"] = events["event_kind"].map(EVENT_KINDS).astype(np.int64)
    keys = ["student_id", "period", "_rank", "degree_id", "curriculum_id", "course_code", "result", "line"]
    events = events.sort_values(keys, kind="mergesort", na_position="first")
    return events.drop(columns="_rank")[EVENT_COLUMNS].reset_index(drop=True)


@dataclass
class Segmentation:
    spells: pd.DataFrame
    # assignable events with a ``spell_id`` column
    events: pd.DataFrame
    n_unassignable: int
    unassignable_lines: list[int]
    horizon_year: int | None


def segment_spells(
    events: pd.DataFrame, window_years: int = 3, horizon_year: int | None = None
) -> Segmentation:
    """Split each student's chronological history into spells.

    A new spell opens at a student's first event, whenever the (degree,
    curriculum) unit changes, and after any transfer, curriculum_change or
    graduation event. Inactivity gaps never split a spell. The last spell of a
    student that did not graduate is ``censored`` when its final year lies
    within ``window_years`` of the data horizon, otherwise ``inactive``.
    """
    unassignable = events["degree_id"].isna() | events["curriculum_id"].isna()
    n_unassignable = int(unassignable.sum())
    bad_lines = events.loc[unassignable, "line"].head(10).tolist()
    ev = events.loc[~unassignable].reset_index(drop=True)
    if horizon_year is None and len(events):
        horizon_year = int(events["period_year"].max())
    if ev.empty:
        spells = pd.DataFrame(columns=SPELL_COLUMNS)
        ev = ev.assign(spell_id=pd.Series(dtype=np.int64))
        return Segmentation(spells, ev, n_unassignable, bad_lines, horizon_year)

    student = ev["student_id"].to_numpy()
    degree = ev["degree_id"].to_numpy()
    curriculum = ev["curriculum_id"].to_numpy()
    closing = ev["event_kind"].isin(CLOSING_KINDS).to_numpy()
    new = np.ones(len(ev), dtype=bool)
    new[1:] = (
        (student[1:] != student[:-1])
        | (degree[1:] != degree[:-1])
        | (curriculum[1:] != curriculum[:-1])
        | closing[:-1]
    )
    spell_id = np.cumsum(new) - 1
    ev["spell_id"] = spell_id

    first = np.flatnonzero(new)
    last = np.r_[first[1:] - 1, len(ev) - 1]
    spells = pd.DataFrame(
        {
            "spell_id": spell_id[first],
            "student_id": student[first],
            "degree_id": degree[first],
            "curriculum_id": curriculum[first],
            "start_year": ev["period_year"].to_numpy()[first],
            "start_term": ev["period_term"].to_numpy()[first],
            "end_year": ev["period_year"].to_numpy()[last],
            "end_term": ev["period_term"].to_numpy()[last],
            "n_events": last - first + 1,
        }
    )
    last_kind = ev["event_kind"].to_numpy()[last]
    next_same_student = np.r_[spells["student_id"].to_numpy()[1:] == spells["student_id"].to_numpy()[:-1], False]
    next_degree = np.r_[spells["degree_id"].to_numpy()[1:], None]
    next_degree_differs = next_degree != spells["degree_id"].to_numpy()

    reason = np.empty(len(spells), dtype=object)
    for i in range(len(spells)):
        k = last_kind[i]
        if k == "graduation":
            reason[i] = "graduated"
        elif k == "transfer":
            reason[i] = "switched_degree"
        elif k == "curriculum_change":
            reason[i] = "switched_curriculum"
        elif next_same_student[i]:
            reason[i] = "switched_degree" if next_degree_differs[i] else "switched_curriculum"
        elif horizon_year is not None and horizon_year - spells["end_year"].iat[i] < window_years:
            reason[i] = "censored"
        else:
            reason[i] = "inactive"
    spells["end_reason"] = reason
    return Segmentation(spells[SPELL_COLUMNS], ev, n_unassignable, bad_lines, horizon_year)


def _placeholder_mask(codes: pd.Series, patterns) -> pd.Series:
    mask = pd.Series(False, index=codes.index)
    for pat in patterns:
        mask |= codes.str.contains(re.compile(pat), regex=True)
    return mask


def build_course_catalog(events: pd.DataFrame, config: IngestConfig | None = None) -> pd.DataFrame:
    """One row per (unit, course) with activity statistics and a validity flag.

    ``events`` is the spell-assigned event table. ``n_attempts`` counts distinct
    (student, period) occasions with course activity, so a same-period
    registration and exam count once.
    """
    config = config or IngestConfig()
    course_ev = events[events["event_kind"].isin(COURSE_EVENT_KINDS) & events["course_code"].notna()]
    if course_ev.empty:
        return pd.DataFrame(columns=CATALOG_COLUMNS)
    keys = ["degree_id", "curriculum_id", "course_code"]
    occasions = course_ev.drop_duplicates(keys + ["student_id", "period"])
    grouped = occasions.groupby(keys, sort=True)
    catalog = grouped.agg(
        n_students=("student_id", "nunique"),
        n_attempts=("student_id", "size"),
        first_seen=("period_year", "min"),
        last_seen=("period_year", "max"),
    ).reset_index()
    placeholder = _placeholder_mask(catalog["course_code"], config.placeholder_patterns)
    reason = np.where(
        placeholder,
        "placeholder_code",
        np.where(
            catalog["n_students"] < config.min_students,
            "few_students",
            np.where(catalog["n_attempts"] < config.min_attempts, "few_attempts", ""),
        ),
    )
    catalog["invalid_reason"] = reason
    catalog["valid"] = catalog["invalid_reason"] == ""
    return catalog[CATALOG_COLUMNS]
