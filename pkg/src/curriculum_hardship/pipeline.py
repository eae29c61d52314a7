"""In-memory orchestration of the analysis stages.

Each ``stage_*`` function consumes the previous stage's result object; the
CLI persists those objects between invocations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import pandas as pd

from .config import PipelineConfig
from .empirical import blocking_score, unit_course_measures
from .graph_builder import CurriculumGraph, Unit, build_graph
from .hardship_index import UnitHardship, build_unit_hardship
from .ingest import IngestReport, Segmentation, build_course_catalog, segment_spells, validate_events
from .outcomes import Association, OutcomeSummary, associate, classify_memberships, unit_outcomes
from .structural import StructuralMetrics, h_struct, structural_metrics
from .trajectory import AttemptStats, derive_attempts, derive_outcomes, entry_years

log = logging.getLogger(__name__)

UNIT = ["degree_id", "curriculum_id"]
EXCLUSION_REASONS = ("degenerate", "insufficient_cohort", "invalid_subjects")


@dataclass
class IngestResult:
    events: pd.DataFrame
    report: IngestReport
    seg: Segmentation
    catalog: pd.DataFrame


@dataclass
class Tables:
    attempts: pd.DataFrame
    outcomes: pd.DataFrame
    entries: pd.DataFrame
    stats: AttemptStats


@dataclass
class GraphSet:
    graphs: dict[Unit, CurriculumGraph]
    units_in: list[Unit]
    excluded: dict[Unit, str] = field(default_factory=dict)

    @property
    def analytic_units(self) -> list[Unit]:
        return sorted(u for u, g in self.graphs.items() if not g.degenerate)


@dataclass
class HardshipResult:
    course_hardship: pd.DataFrame
    units: list[UnitHardship]


def _units(frame: pd.DataFrame) -> list[Unit]:
    if frame.empty:
        return []
    pairs = frame[UNIT].drop_duplicates().itertuples(index=False, name=None)
    return sorted((str(d), str(c)) for d, c in pairs)


def _split(frame: pd.DataFrame) -> dict[Unit, pd.DataFrame]:
    if frame.empty:
        return {}
    return {(str(d), str(c)): g for (d, c), g in frame.groupby(UNIT, sort=True)}


def stage_ingest(raw: pd.DataFrame, config: PipelineConfig) -> IngestResult:
    events, report = validate_events(raw, config.ingest)
    seg = segment_spells(events, window_years=config.outcomes.window_years)
    catalog = build_course_catalog(seg.events, config.ingest)
    return IngestResult(events, report, seg, catalog)


def stage_tables(ing: IngestResult, config: PipelineConfig) -> Tables:
    attempts, stats = derive_attempts(ing.seg, ing.catalog, config.hardship.include_equivalences)
    outcomes = derive_outcomes(attempts)
    return Tables(attempts, outcomes, entry_years(ing.seg.spells), stats)


def stage_graphs(ing: IngestResult, tables: Tables, config: PipelineConfig) -> GraphSet:
    spells = ing.seg.spells
    units_in = _units(spells)
    n_students = spells.groupby(UNIT)["student_id"].nunique() if len(spells) else pd.Series(dtype=int)
    out_by = _split(tables.outcomes)
    ent_by = _split(tables.entries)
    graphs: dict[Unit, CurriculumGraph] = {}
    excluded: dict[Unit, str] = {}
    for unit in units_in:
        if unit not in out_by:
            excluded[unit] = "invalid_subjects"
            continue
        if int(n_students.get(unit, 0)) < config.min_cohort:
            excluded[unit] = "insufficient_cohort"
            continue
        g = build_graph(unit, out_by[unit], ent_by[unit], config.graph)
        graphs[unit] = g
        if g.degenerate:
            excluded[unit] = "degenerate"
    return GraphSet(graphs, units_in, excluded)


def stage_metrics(graphs: GraphSet, config: PipelineConfig) -> dict[Unit, StructuralMetrics]:
    metrics = {u: structural_metrics(graphs.graphs[u], config.structural) for u in graphs.analytic_units}
    if len(metrics) >= 2:
        h_struct(list(metrics.values()))
    else:
        log.warning("fewer than 2 non-degenerate units; structural index left undefined")
    return metrics


def stage_hardship(
    ing: IngestResult,
    tables: Tables,
    graphs: GraphSet,
    metrics: dict[Unit, StructuralMetrics],
    config: PipelineConfig,
) -> HardshipResult:
    out_by = _split(tables.outcomes)
    att_by = _split(tables.attempts)
    sp_by = _split(ing.seg.spells)
    parts = [
        unit_course_measures(graphs.graphs[u], out_by[u], att_by[u], sp_by[u], config.hardship)
        for u in graphs.analytic_units
    ]
    if not parts:
        return HardshipResult(pd.DataFrame(), [])
    course = blocking_score(pd.concat(parts, ignore_index=True), config.hardship.weights)
    if len(metrics) < 2:
        return HardshipResult(course, [])
    h_struct_raw = {u: m.h_struct_raw for u, m in metrics.items()}
    units = build_unit_hardship(course, h_struct_raw, config.degree_names, config.hardship.high_blocking_quantile)
    return HardshipResult(course, units)


@dataclass
class OutcomeResult:
    memberships: pd.DataFrame
    summaries: list[OutcomeSummary]


def stage_outcomes(ing: IngestResult, config: PipelineConfig) -> OutcomeResult:
    memberships = classify_memberships(ing.seg.spells, ing.seg.horizon_year or 0, config.outcomes)
    return OutcomeResult(memberships, unit_outcomes(memberships, config.outcomes))


def stage_associations(hardship: HardshipResult, outcomes: OutcomeResult) -> list[Association]:
    comp = {h.unit: h.h_composite for h in hardship.units}
    drop = {s.unit: s.dropout_rate for s in outcomes.summaries}
    ttd = {s.unit: s.mean_time_to_degree for s in outcomes.summaries}
    out = []
    for name, y in (("dropout_rate", drop), ("mean_time_to_degree", ttd)):
        try:
            out.append(associate(comp, y, "h_composite", name))
        except Exception as exc:  # noqa: BLE001 - reported, not fatal
            log.warning("association skipped: %s", exc)
    return out


@dataclass
class AnalysisResult:
    ingest: IngestResult
    tables: Tables
    graphs: GraphSet
    metrics: dict[Unit, StructuralMetrics]
    hardship: HardshipResult
    outcomes: OutcomeResult
    associations: list[Association]


def analyze(raw: pd.DataFrame, config: PipelineConfig | None = None) -> AnalysisResult:
    """Run every stage on a raw event frame (ingest CSV schema, string cells)."""
    config = config or PipelineConfig()
    ing = stage_ingest(raw, config)
    tables = stage_tables(ing, config)
    graphs = stage_graphs(ing, tables, config)
    metrics = stage_metrics(graphs, config)
    hardship = stage_hardship(ing, tables, graphs, metrics, config)
    outcomes = stage_outcomes(ing, config)
    return AnalysisResult(ing, tables, graphs, metrics, hardship, outcomes, stage_associations(hardship, outcomes))
