"""Command-line entry point.

Stages share a run directory ``<out>/run-<config digest>``; each stage pickles
its result under ``cache/`` so later stages (or ``report``) can resume
without recomputing. Exported artifacts are plain CSV/JSON/DOT.
"""

from __future__ import annotations

import argparse
import json
import logging
import pickle
import sys
import time
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Any

import pandas as pd

from . import __version__
from .config import PipelineConfig, load_config, with_overrides
from .errors import HardshipError, IngestError, StageOrderError
from .ingest import read_raw
from .pipeline import (
    AnalysisResult,
    HardshipResult,
    stage_associations,
    stage_graphs,
    stage_hardship,
    stage_ingest,
    stage_metrics,
    stage_outcomes,
    stage_tables,
)
from . import report as rpt
from .synthetic import ground_truth, load_simulation_config, simulate_bundle

log = logging.getLogger("curriculum_hardship")

STAGES = ("ingest", "tables", "graphs", "metrics", "hardship", "outcomes")
UPSTREAM = {
    "ingest": (),
    "tables": ("ingest",),
    "graphs": ("ingest", "tables"),
    "metrics": ("graphs",),
    "hardship": ("ingest", "tables", "graphs", "metrics"),
    "outcomes": ("ingest",),
}


def bundled_simulation_path() -> Path:
    return Path(str(resources.files("curriculum_hardship") / "data" / "bundle.json"))


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class Run:
    """One content-addressed run directory."""

    def __init__(self, root: Path, config: PipelineConfig, formats: tuple[str, ...]):
        self.config = config
        self.formats = formats
        self.dir = root / f"run-{config.digest()[:16]}"
        self.cache = self.dir / "cache"
        self.manifest_path = self.dir / "manifest.json"
        self._memo: dict[str, Any] = {}

    def has(self, stage: str) -> bool:
        return (self.cache / f"{stage}.pkl").exists()

    def load(self, stage: str) -> Any:
        if stage in self._memo:
            return self._memo[stage]
        if not self.has(stage):
            raise StageOrderError(f"stage '{stage}' has no cached output in {self.dir}; run stage {stage} first")
        with open(self.cache / f"{stage}.pkl", "rb") as fh:
            self._memo[stage] = pickle.load(fh)
        return self._memo[stage]

    def save(self, stage: str, obj: Any) -> None:
        self.cache.mkdir(parents=True, exist_ok=True)
        with open(self.cache / f"{stage}.pkl", "wb") as fh:
            pickle.dump(obj, fh, protocol=pickle.HIGHEST_PROTOCOL)
        self._memo[stage] = obj

    def invalidate_downstream(self, stage: str) -> None:
        for other in STAGES[STAGES.index(stage) + 1 :]:
            (self.cache / f"{other}.pkl").unlink(missing_ok=True)
            self._memo.pop(other, None)

    def manifest(self) -> dict:
        if self.manifest_path.exists():
            return json.loads(self.manifest_path.read_text(encoding="utf-8"))
        return {
            "tool": "curriculum_hardship",
            "version": __version__,
            "config": self.config.to_dict(),
            "config_digest": self.config.digest(),
            "stages": {},
        }

    def record(self, stage: str, started: str, rows: dict, outputs: list[Path], extra: dict | None = None) -> None:
        m = self.manifest()
        m["stages"][stage] = {
            "started": started,
            "finished": _now(),
            "rows": rows,
            "outputs": {str(p.relative_to(self.dir)): rpt.sha256_file(p) for p in sorted(outputs)},
        }
        if extra:
            m.update(extra)
        rpt.write_json(self.manifest_path, m)


def _units_block(graphs) -> dict:
    excluded = [
        {"degree_id": u[0], "curriculum_id": u[1], "reason": r} for u, r in sorted(graphs.excluded.items())
    ]
    reported = [{"degree_id": u[0], "curriculum_id": u[1]} for u in graphs.analytic_units]
    return {
        "units": {
            "n_in": len(graphs.units_in),
            "n_reported": len(reported),
            "n_excluded": len(excluded),
            "reported": reported,
            "excluded": excluded,
        }
    }


def run_stage(run: Run, stage: str, input_path: Path | None = None) -> None:
    started = _now()
    t0 = time.perf_counter()
    cfg = run.config
    d = run.dir
    if stage == "ingest":
        if input_path is None:
            raise StageOrderError("stage 'ingest' needs --input <events.csv>")
        digest = rpt.sha256_file(input_path)
        ing = stage_ingest(read_raw(input_path), cfg)
        run.save("ingest", ing)
        run.invalidate_downstream("ingest")
        outputs = rpt.write_ingest(d, ing, run.formats)
        rows = {"rows_read": ing.report.n_rows, "events": ing.report.n_events, "spells": len(ing.seg.spells), "catalog": len(ing.catalog)}
        extra = {"input": {"path": str(input_path), "sha256": digest, "bytes": input_path.stat().st_size}}
        run.record(stage, started, rows, outputs, extra)
    elif stage == "tables":
        ing = run.load("ingest")
        tables = stage_tables(ing, cfg)
        run.save("tables", tables)
        run.invalidate_downstream("tables")
        outputs = rpt.write_tables(d, tables, run.formats)
        run.record(stage, started, {"attempts": len(tables.attempts), "outcomes": len(tables.outcomes)}, outputs)
    elif stage == "graphs":
        ing, tables = run.load("ingest"), run.load("tables")
        graphs = stage_graphs(ing, tables, cfg)
        run.save("graphs", graphs)
        run.invalidate_downstream("graphs")
        outputs = rpt.write_graphs(d, graphs, run.formats)
        rows = {"graphs": len(graphs.graphs), "non_degenerate": len(graphs.analytic_units)}
        run.record(stage, started, rows, outputs, _units_block(graphs))
    elif stage == "metrics":
        graphs = run.load("graphs")
        metrics = stage_metrics(graphs, cfg)
        run.save("metrics", metrics)
        outputs = rpt.write_metrics(d, metrics, run.formats)
        run.record(stage, started, {"units": len(metrics)}, outputs)
    elif stage == "hardship":
        ing, tables, graphs, metrics = (run.load(s) for s in UPSTREAM["hardship"])
        hardship = stage_hardship(ing, tables, graphs, metrics, cfg)
        run.save("hardship", hardship)
        outputs = rpt.write_hardship(d, hardship, metrics, run.formats)
        run.record(stage, started, {"courses": len(hardship.course_hardship), "units": len(hardship.units)}, outputs)
    elif stage == "outcomes":
        ing = run.load("ingest")
        outcomes = stage_outcomes(ing, cfg)
        run.save("outcomes", outcomes)
        if run.has("hardship"):
            hardship = run.load("hardship")
        else:
            log.warning("no hardship stage output; associations and scatter data will be empty")
            hardship = HardshipResult(pd.DataFrame(), [])
        assoc = stage_associations(hardship, outcomes)
        outputs = rpt.write_outcomes(d, outcomes, hardship, assoc)
        run.record(stage, started, {"memberships": len(outcomes.memberships), "units": len(outcomes.summaries)}, outputs)
    log.info("stage %s done in %.2fs", stage, time.perf_counter() - t0)


def cmd_report(run: Run, input_path: Path | None) -> None:
    if input_path is not None:
        digest = rpt.sha256_file(input_path)
        cached = run.manifest().get("input", {}).get("sha256")
        if not run.has("ingest") or cached != digest:
            run_stage(run, "ingest", input_path)
    for stage in STAGES:
        if stage == "ingest":
            if not run.has("ingest"):
                raise StageOrderError("no cached ingest output; pass --input <events.csv> or run stage ingest first")
            continue
        if not run.has(stage):
            run_stage(run, stage)
    started = _now()
    result = AnalysisResult(
        ingest=run.load("ingest"),
        tables=run.load("tables"),
        graphs=run.load("graphs"),
        metrics=run.load("metrics"),
        hardship=run.load("hardship"),
        outcomes=run.load("outcomes"),
        associations=[],
    )
    result.associations = stage_associations(result.hardship, result.outcomes)
    # outcomes may have been exported before hardship existed; refresh them
    outputs = rpt.write_outcomes(run.dir, result.outcomes, result.hardship, result.associations)
    outputs.append(rpt.write_report(run.dir, result))
    run.record("report", started, {"units_ranked": len(result.hardship.units)}, outputs, _units_block(result.graphs))


def cmd_simulate(args: argparse.Namespace) -> Path:
    path = Path(args.config) if args.config else bundled_simulation_path()
    data = load_simulation_config(path)
    events, configs = simulate_bundle(data, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    events_path = rpt.write_csv(out / "events.csv", events)
    truth = []
    for cfg in configs:
        gt = ground_truth(cfg)
        truth.append(
            {
                "degree_id": cfg.degree_id,
                "curriculum_id": cfg.curriculum_id,
                "seed": cfg.seed,
                "edges": sorted(gt.edges),
                "transitive_reduction": sorted(gt.transitive_reduction),
            }
        )
    truth_path = rpt.write_json(out / "ground_truth.json", truth)
    rpt.write_json(
        out / "manifest.json",
        {
            "tool": "curriculum_hardship",
            "version": __version__,
            "simulator_config": str(path),
            "simulator_config_sha256": rpt.sha256_file(path),
            "seed": args.seed if args.seed is not None else data.get("seed", 0),
            "rows": {"events": len(events), "units": len(configs)},
            "outputs": {p.name: rpt.sha256_file(p) for p in (events_path, truth_path)},
            "finished": _now(),
        },
    )
    return events_path


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", default="out", help="output root directory")
    common.add_argument("-v", "--verbose", action="store_true")

    analysis = argparse.ArgumentParser(add_help=False)
    analysis.add_argument("--input", help="academic events CSV")
    analysis.add_argument("--theta-order", type=float)
    analysis.add_argument("--theta-bypass", type=float)
    analysis.add_argument("--min-common", type=int)
    analysis.add_argument("--window-years", type=int)
    analysis.add_argument(
        "--format", action="append", choices=rpt.ALL_FORMATS, help="restrict exported formats (repeatable)"
    )

    parser = argparse.ArgumentParser(prog="curriculum-hardship", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for stage in STAGES:
        sub.add_parser(stage, parents=[common, analysis], help=f"run the {stage} stage")
    sub.add_parser("report", parents=[common, analysis], help="run all missing stages and write the report")
    sim = sub.add_parser("simulate", parents=[common], help="emit a synthetic events CSV")
    sim.add_argument("--seed", type=int, help="master seed override")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        if args.command == "simulate":
            path = cmd_simulate(args)
            print(path)
            return 0
        config = with_overrides(
            load_config(args.config),
            theta_order=args.theta_order,
            theta_bypass=args.theta_bypass,
            min_common=args.min_common,
            window_years=args.window_years,
        )
        run = Run(Path(args.out), config, tuple(args.format or rpt.ALL_FORMATS))
        input_path = Path(args.input) if args.input else None
        if input_path is not None and not input_path.is_file():
            raise IngestError(f"input file not found: {input_path}")
        if args.command == "report":
            cmd_report(run, input_path)
        else:
            for up in UPSTREAM[args.command]:
                if not run.has(up):
                    raise StageOrderError(f"missing output of stage '{up}'; run stage {up} first")
            run_stage(run, args.command, input_path)
        print(run.dir)
        return 0
    except HardshipError as exc:
        print(f"error [{exc.category}]: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
