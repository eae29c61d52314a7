"""Synthetic student event logs generated from a known curriculum DAG.

Serves as the round-trip oracle for graph inference and as a desk-scale
dataset for the full pipeline. Output rows use the ingest CSV schema exactly.
"""

from __future__ import annotations

import dataclasses
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import networkx as nx
import numpy as np
import pandas as pd

from .errors import SimulationConfigError
from .ingest import INPUT_COLUMNS


@dataclass(frozen=True)
class CourseSpec:
    code: str
    difficulty: float


@dataclass(frozen=True)
class SyntheticConfig:
    seed: int = 0
    n_students: int = 500
    courses: tuple[CourseSpec, ...] = ()
    edges: tuple[tuple[str, str], ...] = ()
    compliance: float = 0.95
    max_years: int = 12
    per_year_course_cap: int = 6
    dropout_hazard_base: float = 0.05
    hazard_fail_boost: float = 0.05
    ability_spread: float = 1.0
    degree_id: str = "D1"
    curriculum_id: str = "C1"
    student_prefix: str = "S"
    entry_year_start: int = 2000
    entry_years: int = 8
    horizon_year: int | None = None
    # split of non-pass attempts; the remainder are plain fails
    absent_share: float = 0.15
    withdrawal_share: float = 0.1
    # share of attempts preceded by an explicit registration row
    registration_share: float = 0.1
    # share of dropouts recorded with a transfer event
    transfer_share: float = 0.0

    def __post_init__(self) -> None:
        for name in (
            "compliance",
            "dropout_hazard_base",
            "hazard_fail_boost",
            "absent_share",
            "withdrawal_share",
            "registration_share",
            "transfer_share",
        ):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SimulationConfigError(f"{name}: probability must lie in [0, 1], got {v}")
        if self.absent_share + self.withdrawal_share > 1.0:
            raise SimulationConfigError("absent_share + withdrawal_share must not exceed 1")
        if self.n_students < 0 or self.max_years < 1 or self.per_year_course_cap < 1 or self.entry_years < 1:
            raise SimulationConfigError("n_students >= 0, max_years >= 1, per_year_course_cap >= 1, entry_years >= 1")
        if self.ability_spread < 0:
            raise SimulationConfigError("ability_spread must be non-negative")
        codes = [c.code for c in self.courses]
        if len(set(codes)) != len(codes):
            raise SimulationConfigError("duplicate course codes in dag")
        for c in self.courses:
            if not 0.0 <= c.difficulty <= 1.0:
                raise SimulationConfigError(f"difficulty of {c.code} must lie in [0, 1]")
        known = set(codes)
        for i, j in self.edges:
            if i not in known or j not in known:
                raise SimulationConfigError(f"edge {i}->{j} references an unknown course")
        g = nx.DiGraph(list(self.edges))
        if not nx.is_directed_acyclic_graph(g):
            raise SimulationConfigError("ground-truth dag contains a cycle")

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["courses"] = [{"code": c.code, "difficulty": c.difficulty} for c in self.courses]
        d["edges"] = [list(e) for e in self.edges]
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SyntheticConfig:
        data = dict(data)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise SimulationConfigError(f"unknown simulator key(s): {', '.join(sorted(unknown))}")
        if "courses" in data:
            data["courses"] = tuple(CourseSpec(str(c["code"]), float(c["difficulty"])) for c in data["courses"])
        if "edges" in data:
            data["edges"] = tuple((str(i), str(j)) for i, j in data["edges"])
        return cls(**data)


@dataclass
class GroundTruth:
    edges: set[tuple[str, str]]
    transitive_reduction: set[tuple[str, str]]
    closure: set[tuple[str, str]]
    difficulty: dict[str, float] = field(default_factory=dict)

    def pass_probability(self, course: str, ability: float) -> float:
        return pass_probability(ability, self.difficulty[course])


def ground_truth(config: SyntheticConfig) -> GroundTruth:
    g = nx.DiGraph()
    g.add_nodes_from(c.code for c in config.courses)
    g.add_edges_from(config.edges)
    return GroundTruth(
        edges=set(config.edges),
        transitive_reduction=set(nx.transitive_reduction(g).edges()),
        closure=set(nx.transitive_closure_dag(g).edges()),
        difficulty={c.code: c.difficulty for c in config.courses},
    )


def _logit(p: float) -> float:
    p = min(max(p, 1e-9), 1 - 1e-9)
    return math.log(p / (1 - p))


def pass_probability(ability: float, difficulty: float) -> float:
    return 1.0 / (1.0 + math.exp(-(ability - _logit(difficulty))))


def student_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(2, dtype=np.uint64)[0])


def _depths(config: SyntheticConfig) -> dict[str, int]:
    g = nx.DiGraph()
    g.add_nodes_from(c.code for c in config.courses)
    g.add_edges_from(config.edges)
    depth = {}
    for node in nx.topological_sort(g):
        preds = list(g.predecessors(node))
        depth[node] = 1 + max(depth[p] for p in preds) if preds else 0
    return depth


def simulate(config: SyntheticConfig) -> pd.DataFrame:
    """Generate one unit's event log; deterministic given ``config.seed``."""
    courses = [c.code for c in config.courses]
    prereqs = {c: set() for c in courses}
    for i, j in config.edges:
        prereqs[j].add(i)
    depth = _depths(config)
    logit = {c.code: _logit(c.difficulty) for c in config.courses}
    deg, cur = config.degree_id, config.curriculum_id
    width = max(5, len(str(max(config.n_students - 1, 0))))
    rows: list[tuple] = []
    add = rows.append
    for idx in range(config.n_students):
        rnd = random.Random(student_seed(config.seed, idx))
        sid = f"{config.student_prefix}{idx:0{width}d}"
        ability = rnd.gauss(0.0, config.ability_spread) if config.ability_spread > 0 else 0.0
        entry = config.entry_year_start + rnd.randrange(config.entry_years)
        passed: set[str] = set()
        for y in range(config.max_years):
            year = entry + y
            if config.horizon_year is not None and year > config.horizon_year:
                break
            unpassed = [c for c in courses if c not in passed]
            eligible = [c for c in unpassed if prereqs[c] <= passed]
            rnd.shuffle(eligible)
            eligible.sort(key=depth.__getitem__)
            queue = iter(eligible)
            chosen: list[str] = []
            for _ in range(config.per_year_course_cap):
                if rnd.random() >= config.compliance:
                    pool = [c for c in unpassed if c not in chosen]
                    if pool:
                        chosen.append(rnd.choice(pool))
                    continue
                for c in queue:
                    if c not in chosen:
                        chosen.append(c)
                        break
            fails = 0
            for c in sorted(chosen):
                term = rnd.choice((1, 2))
                p = 1.0 / (1.0 + math.exp(-(ability - logit[c])))
                if rnd.random() < config.registration_share:
                    add((sid, deg, cur, c, "registration", "not_applicable", "", year, term))
                if rnd.random() < p:
                    passed.add(c)
                    u = rnd.random()
                    kind = "promotion" if u < 0.25 else "free_exam" if u < 0.35 else "regular_exam"
                    add((sid, deg, cur, c, kind, "pass", str(rnd.randint(4, 10)), year, term))
                    continue
                fails += 1
                u = rnd.random()
                if u < config.absent_share:
                    add((sid, deg, cur, c, "registration", "not_applicable", "", year, term))
                elif u < config.absent_share + config.withdrawal_share:
                    add((sid, deg, cur, c, "regular_exam", "withdrawal", "", year, term))
                else:
                    kind = "free_exam" if rnd.random() < 0.2 else "regular_exam"
                    add((sid, deg, cur, c, kind, "fail", str(rnd.randint(1, 3)), year, term))
            if len(passed) == len(courses):
                add((sid, deg, cur, "", "graduation", "not_applicable", "", year, 2))
                break
            hazard = config.dropout_hazard_base + config.hazard_fail_boost * fails
            if rnd.random() < hazard:
                if rnd.random() < config.transfer_share:
                    add((sid, deg, cur, "", "transfer", "not_applicable", "", year, 2))
                break
    frame = pd.DataFrame(rows, columns=INPUT_COLUMNS)
    frame["period_year"] = frame["period_year"].astype(str)
    frame["period_term"] = frame["period_term"].astype(str)
    return frame


def layered_dag(
    n_nodes: int = 20,
    n_layers: int = 5,
    seed: int = 0,
    edge_prob: float = 0.3,
    difficulty: tuple[float, float] = (0.2, 0.6),
    prefix: str = "C",
) -> tuple[tuple[CourseSpec, ...], tuple[tuple[str, str], ...]]:
    """Random layered DAG: each node below the top layer gets a parent in the
    layer directly above, plus extra edges from any earlier layer."""
    rng = random.Random(seed)
    sizes = [n_nodes // n_layers + (1 if i < n_nodes % n_layers else 0) for i in range(n_layers)]
    layers: list[list[str]] = []
    k = 0
    for size in sizes:
        layers.append([f"{prefix}{k + i:02d}" for i in range(size)])
        k += size
    edges: set[tuple[str, str]] = set()
    for li in range(1, n_layers):
        for node in layers[li]:
            edges.add((rng.choice(layers[li - 1]), node))
            for lj in range(li):
                for src in layers[lj]:
                    if rng.random() < edge_prob / (li - lj):
                        edges.add((src, node))
    lo, hi = difficulty
    courses = tuple(CourseSpec(c, round(rng.uniform(lo, hi), 4)) for layer in layers for c in layer)
    return courses, tuple(sorted(edges))


def recovery_report(truth: GroundTruth, inferred: set[tuple[str, str]] | list) -> dict[str, float]:
    """Precision against the closure, recall against the transitive reduction.

    Flow-based inference legitimately finds transitive edges, so any edge in
    the closure is correct; recall asks whether every direct dependency was
    found.
    """
    inferred = set(inferred)
    tp_closure = len(inferred & truth.closure)
    found = len(truth.transitive_reduction & inferred)
    precision = tp_closure / len(inferred) if inferred else 1.0
    recall = found / len(truth.transitive_reduction) if truth.transitive_reduction else 1.0
    closure_recall = tp_closure / len(truth.closure) if truth.closure else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return {
        "n_inferred": len(inferred),
        "precision": precision,
        "recall_reduction": recall,
        "recall_closure": closure_recall,
        "f1": f1,
    }


def make_bundle(seed: int = 2024, n_units: int = 29, n_students: int = 2000) -> dict[str, Any]:
    """Multi-unit simulator config with varied size, depth, density and difficulty."""
    rng = random.Random(seed)
    units = []
    for u in range(n_units):
        n_nodes = rng.randint(12, 30)
        n_layers = rng.randint(3, min(8, n_nodes // 2))
        base = rng.uniform(0.25, 0.55)
        courses, edges = layered_dag(
            n_nodes=n_nodes,
            n_layers=n_layers,
            seed=rng.randrange(2**31),
            edge_prob=rng.uniform(0.1, 0.45),
            difficulty=(max(0.05, base - 0.15), min(0.95, base + 0.25)),
            prefix=f"U{u:02d}C",
        )
        cfg = SyntheticConfig(
            seed=u,
            n_students=n_students,
            courses=courses,
            edges=edges,
            compliance=round(rng.uniform(0.85, 1.0), 3),
            dropout_hazard_base=round(rng.uniform(0.02, 0.08), 3),
            hazard_fail_boost=round(rng.uniform(0.02, 0.08), 3),
            degree_id=str(11 + u // 2),
            curriculum_id=str(1990 + 5 * (u % 2) + u % 3),
            student_prefix=f"U{u:02d}-",
            transfer_share=0.2,
        )
        units.append(cfg.to_dict())
    return {"seed": seed, "units": units}


def load_simulation_config(path: str | Path) -> dict[str, Any]:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise SimulationConfigError(f"simulator config not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise SimulationConfigError(f"simulator config is not valid JSON: {exc.msg} (line {exc.lineno})") from exc


def simulate_bundle(data: dict[str, Any], seed: int | None = None) -> tuple[pd.DataFrame, list[SyntheticConfig]]:
    """Simulate a single-unit config or a ``{"seed", "units": [...]}`` bundle.

    ``seed`` overrides the master seed; unit seeds are derived from it so the
    units stay independent and stable.
    """
    if "units" not in data:
        cfg = SyntheticConfig.from_dict(data)
        if seed is not None:
            cfg = dataclasses.replace(cfg, seed=seed)
        return simulate(cfg), [cfg]
    master = data.get("seed", 0) if seed is None else seed
    configs = []
    for k, unit in enumerate(data["units"]):
        cfg = SyntheticConfig.from_dict(unit)
        cfg = dataclasses.replace(cfg, seed=student_seed(master, k) % (2**31))
        configs.append(cfg)
    frames = [simulate(c) for c in configs]
    return pd.concat(frames, ignore_index=True), configs


def recover(config: SyntheticConfig, pipeline_config=None):
    """Simulate one unit, infer its graph with the real pipeline, and score it.

    Returns ``(truth, graph, report)``; ``graph`` is None when the unit never
    reaches graph inference (e.g. too few students).
    """
    from .config import PipelineConfig
    from .pipeline import stage_graphs, stage_ingest, stage_tables

    pipeline_config = pipeline_config or PipelineConfig()
    truth = ground_truth(config)
    ing = stage_ingest(simulate(config), pipeline_config)
    graphs = stage_graphs(ing, stage_tables(ing, pipeline_config), pipeline_config)
    graph = graphs.graphs.get((config.degree_id, config.curriculum_id))
    inferred = set(graph.edges) if graph is not None else set()
    return truth, graph, recovery_report(truth, inferred)
