"""Infer empirical curriculum DAGs from per-unit outcome tables.

Edge i -> j is drafted when most co-enrolled students first attempt i before
j (``p_order``) and passing j without ever passing i is rare (``p_bypass``).
Cycles in the draft are broken greedily inside strongly connected components
by deleting the edge with the weakest support ``p_order - p_bypass``.
"""

from __future__ import annotations

import dataclasses
import graphlib
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
import pandas as pd

from .config import GraphConfig
from .errors import ConfigError

Unit = tuple[str, str]

PAIR_COLUMNS = ["course_i", "course_j", "n_common", "n_ordered", "n_before", "p_order", "p_bypass"]


@dataclass(frozen=True)
class EdgeSupport:
    p_order: float
    p_bypass: float
    n_common: int
    n_ordered: int

    @property
    def score(self) -> float:
        return self.p_order - self.p_bypass


@dataclass
class CurriculumGraph:
    unit: Unit
    levels: dict[str, float]
    edges: dict[tuple[str, str], EdgeSupport]
    removed_edges: list[dict] = field(default_factory=list)
    degenerate: bool = False
    thresholds: dict = field(default_factory=dict)

    @property
    def nodes(self) -> list[str]:
        return sorted(self.levels)

    @property
    def n_nodes(self) -> int:
        return len(self.levels)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def successors(self) -> dict[str, list[str]]:
        succ: dict[str, list[str]] = {n: [] for n in self.nodes}
        for i, j in sorted(self.edges):
            succ[i].append(j)
        return succ

    def topological_order(self) -> list[str]:
        """Raises ``graphlib.CycleError`` if the edge set is cyclic."""
        preds: dict[str, set[str]] = {n: set() for n in self.nodes}
        for i, j in self.edges:
            preds[j].add(i)
        ts = graphlib.TopologicalSorter(preds)
        ts.prepare()
        order: list[str] = []
        while ts.is_active():
            ready = sorted(ts.get_ready())
            order.extend(ready)
            ts.done(*ready)
        return order

    def descendants(self) -> dict[str, set[str]]:
        succ = self.successors()
        reach: dict[str, set[str]] = {}
        for node in reversed(self.topological_order()):
            acc: set[str] = set()
            for k in succ[node]:
                acc.add(k)
                acc |= reach[k]
            reach[node] = acc
        return reach

    def to_dict(self) -> dict:
        return {
            "degree_id": self.unit[0],
            "curriculum_id": self.unit[1],
            "degenerate": self.degenerate,
            "n_nodes": self.n_nodes,
            "n_edges": self.n_edges,
            "thresholds": dict(sorted(self.thresholds.items())),
            "nodes": [{"course": c, "level": self.levels[c]} for c in self.nodes],
            "edges": [
                {
                    "from": i,
                    "to": j,
                    "p_order": s.p_order,
                    "p_bypass": s.p_bypass,
                    "n_common": s.n_common,
                    "n_ordered": s.n_ordered,
                }
                for (i, j), s in sorted(self.edges.items())
            ],
            "removed_edges": self.removed_edges,
        }

    def to_dot(self, pen_scale: float = 4.0) -> str:
        """Graphviz source; pen width is proportional to ``p_order``."""

        def q(s: str) -> str:
            return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'

        name = f"{self.unit[0]}/{self.unit[1]}"
        lines = [f"digraph {q(name)} {{", "  rankdir=LR;", "  node [shape=box];"]
        for c in sorted(self.levels, key=lambda c: (self.levels[c], c)):
            lines.append(f"  {q(c)} [label={q(c)}, level={self.levels[c]:g}];")
        for (i, j), s in sorted(self.edges.items()):
            lines.append(f"  {q(i)} -> {q(j)} [penwidth={pen_scale * s.p_order:.3f}, label=\"{s.p_order:.2f}\"];")
        lines.append("}")
        return "\n".join(lines) + "\n"


def unit_matrices(outcomes: pd.DataFrame, order_by: str = "period"):
    """Dense student x course matrices for one unit.

    Returns ``(courses, first, passed_at)`` where ``first`` holds each
    student's first-attempt ordinal and ``passed_at`` the pass ordinal, NaN
    where absent. ``order_by="year"`` drops the term component.
    """
    courses = sorted(outcomes["course_code"].unique())
    students = sorted(outcomes["student_id"].unique())
    s_idx = pd.Index(students).get_indexer(outcomes["student_id"])
    c_idx = pd.Index(courses).get_indexer(outcomes["course_code"])
    if order_by == "year":
        first_val = outcomes["first_attempt_year"].to_numpy(dtype=float)
        pass_val = outcomes["pass_year"].to_numpy(dtype=float, na_value=np.nan)
    else:
        first_val = outcomes["first_attempt_period"].to_numpy(dtype=float)
        pass_val = outcomes["pass_period"].to_numpy(dtype=float, na_value=np.nan)
    first = np.full((len(students), len(courses)), np.nan)
    passed_at = np.full_like(first, np.nan)
    first[s_idx, c_idx] = first_val
    passed_at[s_idx, c_idx] = pass_val
    return courses, first, passed_at


def compute_levels(outcomes: pd.DataFrame, entries: pd.DataFrame) -> dict[str, float]:
    """Median spell-relative year (own year 1 = entry year) of first attempts."""
    df = outcomes.merge(entries, on=["student_id", "degree_id", "curriculum_id"], how="left")
    rel = df["first_attempt_year"].astype(float) - df["entry_year"].astype(float) + 1.0
    med = rel.groupby(df["course_code"]).median()
    return {str(c): float(v) for c, v in med.sort_index().items()}


def pair_stats(
    outcomes: pd.DataFrame, min_common: int = 10, min_ordered: int = 10, order_by: str = "period"
) -> pd.DataFrame:
    """Ordering and bypass statistics for every eligible ordered course pair.

    Students tied on first-attempt period count towards ``n_common`` but not
    ``n_ordered``. ``p_bypass`` for (i, j) is the share of co-enrolled students
    who passed j and never passed i.
    """
    courses, first, passed_at = unit_matrices(outcomes, order_by)
    if len(courses) < 2:
        return pd.DataFrame(columns=PAIR_COLUMNS)
    attempted = ~np.isnan(first)
    passed = ~np.isnan(passed_at)
    a = attempted.astype(np.int64)
    n_common = a.T @ a
    before = np.empty_like(n_common)
    for i in range(len(courses)):
        # NaN compares False, so only students attempting both count
        before[i] = np.sum(first[:, [i]] < first, axis=0)
    n_ordered = before + before.T
    not_passed = (attempted & ~passed).astype(np.int64)
    bypass = not_passed.T @ passed.astype(np.int64)

    ii, jj = np.nonzero((n_common >= min_common) & (n_ordered >= min_ordered))
    keep = ii != jj
    ii, jj = ii[keep], jj[keep]
    names = np.asarray(courses, dtype=object)
    frame = pd.DataFrame(
        {
            "course_i": names[ii],
            "course_j": names[jj],
            "n_common": n_common[ii, jj],
            "n_ordered": n_ordered[ii, jj],
            "n_before": before[ii, jj],
            "p_order": before[ii, jj] / n_ordered[ii, jj],
            "p_bypass": bypass[ii, jj] / n_common[ii, jj],
        }
    )
    return frame[PAIR_COLUMNS].sort_values(["course_i", "course_j"]).reset_index(drop=True)


def check_thresholds(theta_order: float, theta_bypass: float) -> None:
    if not 0.5 < theta_order <= 1.0:
        raise ConfigError(f"graph.theta_order: must lie in (0.5, 1], got {theta_order}")
    if not 0.0 <= theta_bypass < 1.0:
        raise ConfigError(f"graph.theta_bypass: must lie in [0, 1), got {theta_bypass}")


def infer_edges(pairs: pd.DataFrame, theta_order: float = 0.7, theta_bypass: float = 0.2) -> pd.DataFrame:
    check_thresholds(theta_order, theta_bypass)
    keep = (pairs["p_order"] >= theta_order) & (pairs["p_bypass"] <= theta_bypass)
    return pairs[keep].reset_index(drop=True)


def _edge_key(edge: tuple[str, str], s: EdgeSupport):
    return (s.score, s.n_common, edge)


def break_cycles(
    unit: Unit, levels: dict[str, float], draft: dict[tuple[str, str], EdgeSupport]
) -> CurriculumGraph:
    """Greedy feedback-arc removal inside strongly connected components.

    Components are visited in topological order of the condensation. Inside a
    component the edge with minimum ``p_order - p_bypass`` (ties: smaller
    ``n_common``, then lexicographic pair) is deleted and the component is
    re-split, until every component is a single node.
    """
    edges = dict(draft)
    removed: list[dict] = []
    g = nx.DiGraph()
    g.add_nodes_from(sorted(levels))
    g.add_edges_from(sorted(edges))
    cond = nx.condensation(g)
    order = nx.lexicographical_topological_sort(cond, key=lambda c: min(cond.nodes[c]["members"]))
    stack = [sorted(cond.nodes[c]["members"]) for c in order]
    stack = [m for m in stack if len(m) > 1]
    while stack:
        comp = stack.pop(0)
        inside = set(comp)
        candidates = [(e, edges[e]) for e in edges if e[0] in inside and e[1] in inside]
        weakest, support = min(candidates, key=lambda es: _edge_key(*es))
        del edges[weakest]
        removed.append(
            {
                "from": weakest[0],
                "to": weakest[1],
                "p_order": support.p_order,
                "p_bypass": support.p_bypass,
                "n_common": support.n_common,
                "reason": "cycle_break",
            }
        )
        sub = nx.DiGraph()
        sub.add_nodes_from(comp)
        sub.add_edges_from(e for e in edges if e[0] in inside and e[1] in inside)
        parts = [sorted(c) for c in nx.strongly_connected_components(sub) if len(c) > 1]
        stack = sorted(parts) + stack
    return CurriculumGraph(unit=unit, levels=dict(levels), edges=edges, removed_edges=removed)


def sufficiency_filter(graph: CurriculumGraph, min_nodes: int = 8, min_edges: int = 5) -> CurriculumGraph:
    degenerate = graph.n_nodes < min_nodes or graph.n_edges < min_edges
    return dataclasses.replace(graph, degenerate=degenerate)


def build_graph(
    unit: Unit, outcomes: pd.DataFrame, entries: pd.DataFrame, config: GraphConfig | None = None
) -> CurriculumGraph:
    """Full inference for one unit: levels, pairs, draft edges, DAG, filter."""
    config = config or GraphConfig()
    levels = compute_levels(outcomes, entries)
    pairs = pair_stats(outcomes, config.min_common, config.min_ordered, config.order_by)
    drafted = infer_edges(pairs, config.theta_order, config.theta_bypass)
    draft = {
        (r.course_i, r.course_j): EdgeSupport(float(r.p_order), float(r.p_bypass), int(r.n_common), int(r.n_ordered))
        for r in drafted.itertuples(index=False)
    }
    graph = break_cycles(unit, levels, draft)
    graph.thresholds = {
        "theta_order": config.theta_order,
        "theta_bypass": config.theta_bypass,
        "min_common": config.min_common,
        "min_ordered": config.min_ordered,
        "order_by": config.order_by,
    }
    return sufficiency_filter(graph, config.min_nodes, config.min_edges)
