from __future__ import annotations

import pandas as pd
import pytest

from curriculum_hardship.config import IngestConfig, PipelineConfig
from curriculum_hardship.ingest import INPUT_COLUMNS, build_course_catalog, segment_spells, validate_events
from curriculum_hardship.trajectory import derive_attempts, derive_outcomes


def raw_frame(rows) -> pd.DataFrame:
    """Rows are tuples in input column order; cells become strings like a CSV read."""
    data = [["" if v is None else str(v) for v in r] for r in rows]
    return pd.DataFrame(data, columns=INPUT_COLUMNS, dtype=str)


def ev(student, course, kind, result, year, term=1, degree="D1", curriculum="C1", grade=""):
    return (student, degree, curriculum, course, kind, result, grade, year, term)


LENIENT = IngestConfig(min_students=1, min_attempts=1)


def tables_for(rows, config: IngestConfig = LENIENT, window_years: int = 3):
    events, _ = validate_events(raw_frame(rows), config)
    seg = segment_spells(events, window_years=window_years)
    catalog = build_course_catalog(seg.events, config)
    attempts, stats = derive_attempts(seg, catalog)
    return seg, catalog, attempts, derive_outcomes(attempts), stats


def write_csv(path, rows):
    raw_frame(rows).to_csv(path, index=False)
    return path


@pytest.fixture
def default_config() -> PipelineConfig:
    return PipelineConfig()


# one summary line per acceptance criterion, printed after the run
_ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.failed):
        elapsed = dict(report.user_properties).get("elapsed")
        timing = f"{elapsed:.2f}s" if elapsed is not None else "n/a"
        _ACCEPTANCE[number] = ("PASS" if report.passed else "FAIL", title, timing)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, title, timing = _ACCEPTANCE[number]
        terminalreporter.write_line(f"{status} criterion {number}: {title} [{timing}]")
