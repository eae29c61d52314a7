"""Acceptance gate: one test per criterion, each with its runtime bound.

Run alone with ``pytest tests/test_acceptance.py -v``; the terminal summary
prints one PASS/FAIL line per criterion.
"""

import itertools
import pickle
import random
import statistics
import time
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from curriculum_hardship.cli import bundled_simulation_path, main
from curriculum_hardship.config import GraphConfig, PipelineConfig
from curriculum_hardship.empirical import COMPONENTS, blocking_score
from curriculum_hardship.graph_builder import CurriculumGraph, EdgeSupport, infer_edges, pair_stats, sufficiency_filter
from curriculum_hardship.outcomes import associate, classify_memberships, dropout_rate, unit_outcomes
from curriculum_hardship.stats import zscore
from curriculum_hardship.structural import betweenness, longest_path
from curriculum_hardship.synthetic import SyntheticConfig, layered_dag, recover

from oracles import brute_betweenness, brute_longest_path, random_dag, two_pass_pearson
from test_graph_builder import pair_fixture, support_fixture
from test_outcomes import spells

# Mean F1 over seeds 0-4 of the first oracle run (layered_dag(20, 5, seed=0),
# 2000 students, compliance 0.95, default thresholds): 0.7114326693...
F1_BASELINE = 0.7114326693


def finish(request, t0, limit):
    elapsed = time.perf_counter() - t0
    request.node.user_properties.append(("elapsed", elapsed))
    assert elapsed < limit, f"took {elapsed:.2f}s, limit {limit}s"


def _edge(frame):
    drafted = infer_edges(pair_stats(frame))
    return bool(((drafted["course_i"] == "i") & (drafted["course_j"] == "j")).any())


@pytest.mark.acceptance(1, "threshold fidelity at 0.7 / 0.2")
def test_criterion_1_threshold_fidelity(request):
    t0 = time.perf_counter()
    assert _edge(support_fixture(0.85, 0.1)) is True
    assert _edge(support_fixture(0.69, 0.0)) is False
    assert _edge(support_fixture(0.9, 0.25)) is False
    # inclusive boundaries
    assert _edge(support_fixture(0.7, 0.2)) is True
    row = pair_stats(pair_fixture(10)).iloc[0]
    assert (row.p_order, row.p_bypass) == (1.0, 0.0)
    row = pair_stats(pair_fixture(5, n_after=1, n_tie=4), min_ordered=1)
    assert row.set_index(["course_i", "course_j"]).loc[("i", "j"), "p_order"] == pytest.approx(5 / 6)
    row = pair_stats(pair_fixture(10, n_bypass=3)).set_index(["course_i", "course_j"]).loc[("i", "j")]
    assert row.p_bypass == pytest.approx(0.3)
    finish(request, t0, 1.0)


def _graph(n_nodes, n_edges):
    nodes = [f"N{k:02d}" for k in range(n_nodes)]
    pairs = list(itertools.combinations(nodes, 2))[:n_edges]
    support = EdgeSupport(0.9, 0.0, 20, 20)
    return CurriculumGraph(("D", "C"), dict.fromkeys(nodes, 1.0), {e: support for e in pairs})


@pytest.mark.acceptance(2, "degeneracy below 8 nodes or 5 edges")
def test_criterion_2_degeneracy(request):
    t0 = time.perf_counter()
    for n_edges in range(0, 22):
        assert sufficiency_filter(_graph(7, n_edges)).degenerate
    for n_nodes in range(4, 41):
        assert sufficiency_filter(_graph(n_nodes, 4)).degenerate
    assert not sufficiency_filter(_graph(8, 5)).degenerate
    finish(request, t0, 1.0)


@pytest.mark.acceptance(3, "acyclicity over 100+ randomized simulator configs")
def test_criterion_3_acyclicity(request):
    t0 = time.perf_counter()
    rng = random.Random(2718)
    emitted = 0
    for k in range(110):
        courses, edges = layered_dag(
            n_nodes=rng.randint(8, 16), n_layers=rng.randint(2, 5), seed=rng.randrange(2**31), edge_prob=rng.uniform(0.1, 0.5)
        )
        cfg = SyntheticConfig(seed=k, n_students=150, courses=courses, edges=edges, compliance=rng.uniform(0.5, 1.0))
        graph_cfg = GraphConfig(theta_order=rng.uniform(0.51, 0.8), theta_bypass=rng.uniform(0.1, 0.5))
        _, graph, _ = recover(cfg, PipelineConfig(graph=graph_cfg))
        if graph is not None:
            order = graph.topological_order()
            position = {c: i for i, c in enumerate(order)}
            assert all(position[i] < position[j] for i, j in graph.edges)
            emitted += 1
    assert emitted >= 100
    finish(request, t0, 120.0)


@pytest.mark.acceptance(4, "longest path and betweenness equal brute force on 50 DAGs")
def test_criterion_4_structure_oracles(request):
    t0 = time.perf_counter()
    rng = random.Random(44)
    for _ in range(50):
        g = random_dag(rng, rng.randint(3, 12), rng.uniform(0.1, 0.6))
        assert longest_path(g) == brute_longest_path(g)
        got, ref = betweenness(g), brute_betweenness(g)
        assert max(abs(got[v] - ref[v]) for v in g.nodes) <= 1e-9
    finish(request, t0, 30.0)


@pytest.mark.acceptance(5, "round-trip recovery F1 and reduction recall")
def test_criterion_5_round_trip(request):
    t0 = time.perf_counter()
    courses, edges = layered_dag(20, 5, seed=0)
    f1 = [
        recover(SyntheticConfig(seed=s, n_students=2000, courses=courses, edges=edges, compliance=0.95))[2]["f1"]
        for s in range(5)
    ]
    assert statistics.mean(f1) >= F1_BASELINE
    for s in range(5):
        report = recover(SyntheticConfig(seed=s, n_students=2000, courses=courses, edges=edges, compliance=1.0))[2]
        assert report["recall_reduction"] >= 0.9
    finish(request, t0, 120.0)


@pytest.fixture(scope="session")
def bundle_runs(tmp_path_factory):
    """Simulate the bundled dataset, then time two independent ``report`` runs."""
    root = tmp_path_factory.mktemp("bundle")
    assert main(["simulate", "--config", str(bundled_simulation_path()), "--out", str(root / "sim")]) == 0
    events = root / "sim" / "events.csv"
    timings = []
    for name in ("first", "second"):
        t0 = time.perf_counter()
        assert main(["report", "--input", str(events), "--out", str(root / name)]) == 0
        timings.append(time.perf_counter() - t0)
    dirs = [next((root / name).glob("run-*")) for name in ("first", "second")]
    cache = {s: pickle.loads((dirs[0] / "cache" / f"{s}.pkl").read_bytes()) for s in ("metrics", "hardship", "outcomes")}
    return {"dirs": dirs, "timings": timings, "cache": cache}


def _z_vectors(cache):
    course = cache["hardship"].course_hardship
    raw = {
        "fail_first": 1 - course["p_first"],
        "fail_ever": 1 - course["p_ever"],
        "mean_attempts": course["mean_attempts"],
        "dropout_after_fail": course["dropout_after_fail"],
        "blocking_factor": course["blocking_factor"],
    }
    vectors = {f"z_{c}": (raw[c], course[f"z_{c}"]) for c in COMPONENTS}
    metrics = sorted(cache["metrics"].values(), key=lambda m: m.unit)
    for name in ("density", "longest_path", "bottleneck_concentration"):
        vectors[f"z_{name}"] = ([getattr(m, name) for m in metrics], [m.z_components[name] for m in metrics])
    units = cache["hardship"].units
    vectors["h_struct_z"] = ([u.h_struct_raw for u in units], [u.h_struct_z for u in units])
    vectors["h_emp_z"] = ([u.h_emp_raw for u in units], [u.h_emp_z for u in units])
    return vectors


@pytest.mark.acceptance(6, "standardization: mean 0, sample std 1, idempotent")
def test_criterion_6_standardization(request, bundle_runs):
    t0 = time.perf_counter()
    checked = 0
    for name, (raw, z) in _z_vectors(bundle_runs["cache"]).items():
        raw = np.asarray(raw, dtype=float)
        z = np.asarray(z, dtype=float)
        if len(np.unique(raw)) < 2:
            continue
        assert abs(z.mean()) < 1e-9, name
        assert abs(z.std(ddof=1) - 1) < 1e-9, name
        assert np.max(np.abs(zscore(z) - z)) <= 1e-12, name
        checked += 1
    assert checked >= 8
    rng = np.random.default_rng(6)
    for _ in range(200):
        x = rng.normal(rng.uniform(-100, 100), rng.uniform(1e-3, 1e3), size=rng.integers(2, 50))
        z = zscore(x)
        assert abs(z.mean()) < 1e-9 and abs(z.std(ddof=1) - 1) < 1e-9
        assert np.max(np.abs(zscore(z) - z)) <= 1e-12
    comp = np.array([u.h_composite for u in bundle_runs["cache"]["hardship"].units])
    assert abs(comp.mean()) < 1e-9 and comp.std(ddof=1) <= 1 + 1e-12
    finish(request, t0, 1.0)


@pytest.mark.acceptance(7, "BlockingScore invariances on the synthetic bundle")
def test_criterion_7_blocking_invariances(request, bundle_runs):
    t0 = time.perf_counter()
    course = bundle_runs["cache"]["hardship"].course_hardship
    base = course["blocking_score"].to_numpy()
    raw = course.drop(columns=[c for c in course.columns if c.startswith("z_")] + ["blocking_score", "mean_attempts_imputed"])
    for column in ("mean_attempts", "blocking_factor", "dropout_after_fail"):
        scaled = raw.copy()
        scaled[column] = scaled[column] * 10 + 1
        assert np.allclose(blocking_score(scaled)["blocking_score"].to_numpy(), base, rtol=0, atol=1e-9)
    assert abs(base.sum()) < 1e-6 * len(base)
    assert (course["p_first"] <= course["p_ever"]).all()
    sinks = course[course["n_successors"] == 0]
    assert len(sinks) > 0 and (sinks["blocking_factor"] == 0.0).all()
    finish(request, t0, 10.0)


@pytest.mark.acceptance(8, "outcome partition and correlation oracle")
def test_criterion_8_outcomes(request, bundle_runs):
    t0 = time.perf_counter()
    summaries = bundle_runs["cache"]["outcomes"].summaries
    rows = [(f"g{k}", "D1", 2000, 2005, "graduated") for k in range(40)]
    rows += [(f"q{k}", "D1", 2000, 2005, "inactive") for k in range(50)]
    rows += [(f"r{k}", "D1", 2003, 2009, "censored") for k in range(10)]
    fixture = classify_memberships(spells(rows), 2010)
    assert dropout_rate(fixture) == (pytest.approx(50 / 90), 10)
    for s in summaries + unit_outcomes(fixture):
        assert s.n_dropouts + s.n_graduates + s.censored == s.n_cohort
    x = {("U", str(k)): float(k) for k in range(5)}
    line = associate(x, {u: 2 * v + 1 for u, v in x.items()})
    assert line.pearson_r == 1.0
    comp = {u.unit: u.h_composite for u in bundle_runs["cache"]["hardship"].units}
    drop = {s.unit: s.dropout_rate for s in summaries}
    assert len(set(comp) & set(drop)) == 29
    keys = sorted(comp)
    ref = two_pass_pearson([comp[k] for k in keys], [drop[k] for k in keys])
    assert abs(associate(comp, drop).pearson_r - ref) <= 1e-12
    finish(request, t0, 1.0)


def _artifacts(run_dir: Path) -> dict[str, bytes]:
    out = {}
    for p in sorted(run_dir.rglob("*")):
        rel = p.relative_to(run_dir)
        if p.is_file() and rel.parts[0] != "cache" and p.name != "manifest.json":
            out[str(rel)] = p.read_bytes()
    return out


@pytest.mark.acceptance(9, "end-to-end report under 60 s, byte-identical reruns")
def test_criterion_9_determinism(request, bundle_runs):
    t0 = time.perf_counter()
    first, second = (_artifacts(d) for d in bundle_runs["dirs"])
    assert first.keys() == second.keys() and len(first) > 30
    differing = [k for k in first if first[k] != second[k]]
    assert differing == []
    ranking = pd.read_csv(bundle_runs["dirs"][0] / "hardship_ranking.csv")
    assert len(ranking) == 29
    request.node.user_properties.append(("elapsed", max(bundle_runs["timings"])))
    assert max(bundle_runs["timings"]) < 60.0, f"report took {bundle_runs['timings']}"
    assert time.perf_counter() - t0 < 60.0
