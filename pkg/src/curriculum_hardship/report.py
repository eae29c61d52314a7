"""Artifact writers. All outputs are byte-stable for identical inputs."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import pandas as pd

from .ingest import CATALOG_COLUMNS, SPELL_COLUMNS
from .outcomes import OUTCOME_SUMMARY_COLUMNS
from .pipeline import AnalysisResult, GraphSet, HardshipResult, IngestResult, OutcomeResult, Tables
from .structural import STRUCTURAL_COLUMNS, StructuralMetrics
from .hardship_index import hardship_summary, ranking_table
from .stats import describe
from .trajectory import ATTEMPT_COLUMNS, OUTCOME_COLUMNS

ALL_FORMATS = ("csv", "json", "dot")


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _clean(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return None if math.isnan(v) or math.isinf(v) else v
    if isinstance(value, np.bool_):
        return bool(value)
    if value is pd.NA:
        return None
    return value


def write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_clean(payload), indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def write_csv(path: Path, frame: pd.DataFrame) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    return path


def write_table(base: Path, frame: pd.DataFrame, formats: Iterable[str]) -> list[Path]:
    out = []
    if "csv" in formats:
        out.append(write_csv(base.with_suffix(".csv"), frame))
    if "json" in formats:
        # records in column order; the C writer keeps million-row tables fast
        path = base.with_suffix(".json")
        path.parent.mkdir(parents=True, exist_ok=True)
        text = frame.to_json(orient="records", double_precision=15, force_ascii=False)
        path.write_text(text + "\n", encoding="utf-8")
        out.append(path)
    return out


def unit_slug(unit) -> str:
    safe = lambda s: "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in str(s))  # noqa: E731
    return f"{safe(unit[0])}__{safe(unit[1])}"


def write_ingest(out: Path, ing: IngestResult, formats) -> list[Path]:
    paths = write_table(out / "spells", ing.seg.spells[SPELL_COLUMNS], formats)
    paths += write_table(out / "catalog", ing.catalog[CATALOG_COLUMNS], formats)
    rejects = ing.report.to_dict()
    rejects["n_unassignable"] = ing.seg.n_unassignable
    rejects["unassignable_lines"] = ing.seg.unassignable_lines
    rejects["horizon_year"] = ing.seg.horizon_year
    paths.append(write_json(out / "rejects.json", rejects))
    return paths


def write_tables(out: Path, tables: Tables, formats) -> list[Path]:
    paths = []
    if "csv" in formats:
        for (deg, cur), g in tables.attempts.groupby(["degree_id", "curriculum_id"], sort=True):
            paths.append(write_csv(out / "tables" / unit_slug((deg, cur)) / "subject_attempts.csv", g[ATTEMPT_COLUMNS]))
        for (deg, cur), g in tables.outcomes.groupby(["degree_id", "curriculum_id"], sort=True):
            paths.append(write_csv(out / "tables" / unit_slug((deg, cur)) / "subject_outcomes.csv", g[OUTCOME_COLUMNS]))
    if "json" in formats:
        paths += write_table(out / "subject_attempts", tables.attempts[ATTEMPT_COLUMNS], ("json",))
        paths += write_table(out / "subject_outcomes", tables.outcomes[OUTCOME_COLUMNS], ("json",))
    paths.append(write_json(out / "attempt_stats.json", tables.stats.to_dict()))
    return paths


def write_graphs(out: Path, graphs: GraphSet, formats) -> list[Path]:
    paths = []
    for unit, g in sorted(graphs.graphs.items()):
        slug = unit_slug(unit)
        if "json" in formats:
            paths.append(write_json(out / "graphs" / f"{slug}.json", g.to_dict()))
        if "dot" in formats:
            p = out / "graphs" / f"{slug}.dot"
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(g.to_dot(), encoding="utf-8")
            paths.append(p)
    return paths


def structural_frame(metrics: dict) -> pd.DataFrame:
    rows = [m.row() for _, m in sorted(metrics.items())]
    return pd.DataFrame(rows, columns=STRUCTURAL_COLUMNS)


def write_metrics(out: Path, metrics: dict[tuple, StructuralMetrics], formats) -> list[Path]:
    frame = structural_frame(metrics)
    betweenness = {unit_slug(u): dict(sorted(m.betweenness.items())) for u, m in sorted(metrics.items())}
    return [write_csv(out / "structural_metrics.csv", frame), write_json(out / "betweenness.json", betweenness)]


def write_hardship(out: Path, hardship: HardshipResult, metrics, formats) -> list[Path]:
    paths = []
    if not hardship.course_hardship.empty:
        paths.append(write_csv(out / "course_hardship.csv", hardship.course_hardship))
    table = ranking_table(hardship.units, metrics)
    paths += write_table(out / "hardship_ranking", table, [f for f in formats if f in ("csv", "json")] or ["csv"])
    summary = hardship_summary(hardship.units) if len(hardship.units) >= 1 else {}
    if hardship.units:
        summary["h_struct_raw"] = describe([h.h_struct_raw for h in hardship.units])
        summary["h_emp_raw"] = describe([h.h_emp_raw for h in hardship.units])
    paths.append(write_json(out / "hardship_summary.json", summary))
    return paths


def write_outcomes(out: Path, outcomes: OutcomeResult, hardship: HardshipResult, associations) -> list[Path]:
    frame = pd.DataFrame([s.row() for s in outcomes.summaries], columns=OUTCOME_SUMMARY_COLUMNS)
    paths = [write_csv(out / "outcomes.csv", frame)]
    comp = {h.unit: h.h_composite for h in hardship.units}
    scatter = pd.DataFrame(
        [
            {
                "degree_id": s.unit[0],
                "curriculum_id": s.unit[1],
                "h_composite": comp[s.unit],
                "dropout_rate": s.dropout_rate,
                "mean_time_to_degree": s.mean_time_to_degree,
            }
            for s in outcomes.summaries
            if s.unit in comp
        ],
        columns=["degree_id", "curriculum_id", "h_composite", "dropout_rate", "mean_time_to_degree"],
    )
    paths.append(write_csv(out / "scatter_data.csv", scatter))
    paths.append(write_json(out / "associations.json", [a.to_dict() for a in associations]))
    return paths


def _md_table(frame: pd.DataFrame, floatfmt: str = "{:.3f}") -> str:
    cols = list(frame.columns)
    lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    for row in frame.itertuples(index=False):
        cells = []
        for v in row:
            if isinstance(v, float):
                cells.append("" if math.isnan(v) else floatfmt.format(v))
            else:
                cells.append(str(v))
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines)


def write_report(out: Path, result: AnalysisResult) -> Path:
    """Markdown digest with the descriptive, ranking and index-summary tables."""
    metrics = structural_frame(result.metrics)
    parts = ["# Curriculum hardship report", ""]
    parts.append(
        f"Units observed: {len(result.graphs.units_in)}; analysed: {len(result.graphs.analytic_units)}; "
        f"excluded: {len(result.graphs.excluded)}."
    )
    parts += ["", "Path lengths count edges.", "", "## Structural metrics", ""]
    if not metrics.empty:
        desc = pd.DataFrame(
            {c: describe(metrics[c].astype(float).tolist()) for c in ("n_subjects", "n_edges", "density", "longest_path")}
        ).T.reset_index(names="metric")
        parts.append(_md_table(desc))
    parts += ["", "## Ranking by composite hardship", ""]
    table = ranking_table(result.hardship.units, result.metrics)
    if not table.empty:
        parts.append(_md_table(table[["rank", "degree_id", "curriculum_id", "longest_path", "mean_blocking_score", "h_struct_z", "h_emp_z", "h_composite"]]))
    parts += ["", "## Hardship index summary", ""]
    if result.hardship.units:
        summ = pd.DataFrame(hardship_summary(result.hardship.units)).T.reset_index(names="index")
        parts.append(_md_table(summ))
    parts += ["", "## Associations with outcomes", ""]
    for a in result.associations:
        r = "n/a" if a.pearson_r is None else f"{a.pearson_r:.3f}"
        parts.append(f"- {a.y_name} ~ {a.x_name}: n={a.n}, r={r}")
    path = out / "report.md"
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path
