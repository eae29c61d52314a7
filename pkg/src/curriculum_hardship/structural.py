"""Size, depth and bottleneck metrics of a curriculum DAG, and the
Structural Hardship Index across units."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .config import StructuralConfig
from .errors import StandardizationError, UndefinedMetricError
from .graph_builder import CurriculumGraph, Unit
from .stats import zscore

STRUCTURAL_COLUMNS = [
    "degree_id",
    "curriculum_id",
    "n_subjects",
    "n_edges",
    "density",
    "longest_path",
    "bottleneck_courses",
    "bottleneck_concentration",
    "z_density",
    "z_longest_path",
    "z_bottleneck_concentration",
    "h_struct_raw",
]


@dataclass
class StructuralMetrics:
    unit: Unit
    n_subjects: int
    n_edges: int
    density: float
    longest_path: int
    betweenness: dict[str, float]
    bottleneck_set: list[str]
    bottleneck_concentration: float
    z_components: dict[str, float] = field(default_factory=dict)
    h_struct_raw: float | None = None

    def row(self) -> dict:
        return {
            "degree_id": self.unit[0],
            "curriculum_id": self.unit[1],
            "n_subjects": self.n_subjects,
            "n_edges": self.n_edges,
            "density": self.density,
            "longest_path": self.longest_path,
            "bottleneck_courses": ";".join(self.bottleneck_set),
            "bottleneck_concentration": self.bottleneck_concentration,
            "z_density": self.z_components.get("density"),
            "z_longest_path": self.z_components.get("longest_path"),
            "z_bottleneck_concentration": self.z_components.get("bottleneck_concentration"),
            "h_struct_raw": self.h_struct_raw,
        }


def density(n_nodes: int, n_edges: int) -> float:
    if n_nodes < 2:
        raise UndefinedMetricError(f"density needs at least 2 nodes, got {n_nodes}")
    return n_edges / (n_nodes * (n_nodes - 1))


def longest_path(graph: CurriculumGraph) -> int:
    """Edge count of the longest directed path (DP over a topological order)."""
    succ = graph.successors()
    depth = {n: 0 for n in graph.nodes}
    for node in graph.topological_order():
        for k in succ[node]:
            if depth[node] + 1 > depth[k]:
                depth[k] = depth[node] + 1
    return max(depth.values(), default=0)


def betweenness(graph: CurriculumGraph, normalized: bool = True) -> dict[str, float]:
    """Directed, unweighted shortest-path betweenness (Brandes accumulation).

    Normalized by (N-1)(N-2), the number of ordered pairs excluding the node.
    """
    nodes = graph.nodes
    succ = graph.successors()
    bc = {v: 0.0 for v in nodes}
    for s in nodes:
        stack: list[str] = []
        preds: dict[str, list[str]] = {v: [] for v in nodes}
        sigma = dict.fromkeys(nodes, 0)
        sigma[s] = 1
        dist = dict.fromkeys(nodes, -1)
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in succ[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = dict.fromkeys(nodes, 0.0)
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                bc[w] += delta[w]
    n = len(nodes)
    if normalized:
        scale = 1.0 / ((n - 1) * (n - 2)) if n > 2 else 0.0
        bc = {v: x * scale for v, x in bc.items()}
    return bc


def bottleneck_concentration(
    scores: dict[str, float], levels: dict[str, float] | None = None, fraction: float = 0.1
) -> tuple[list[str], float]:
    """Top ``ceil(N * fraction)`` courses by betweenness and their mass share.

    Ties prefer the higher course level, then the lexicographically smaller code.
    """
    levels = levels or {}
    n = len(scores)
    if n == 0:
        return [], 0.0
    k = math.ceil(round(n * fraction, 9))
    ranked = sorted(scores, key=lambda c: (-scores[c], -levels.get(c, 0.0), c))
    top = ranked[:k]
    total = sum(scores.values())
    share = sum(scores[c] for c in top) / total if total > 0 else 0.0
    return sorted(top), share


def structural_metrics(graph: CurriculumGraph, config: StructuralConfig | None = None) -> StructuralMetrics:
    config = config or StructuralConfig()
    bc = betweenness(graph, config.normalize_betweenness)
    top, share = bottleneck_concentration(bc, graph.levels, config.bottleneck_fraction)
    return StructuralMetrics(
        unit=graph.unit,
        n_subjects=graph.n_nodes,
        n_edges=graph.n_edges,
        density=density(graph.n_nodes, graph.n_edges),
        longest_path=longest_path(graph),
        betweenness=bc,
        bottleneck_set=top,
        bottleneck_concentration=share,
    )


def h_struct(metrics: list[StructuralMetrics]) -> dict[Unit, float]:
    """Sum of cross-unit z-scores of density, longest path and concentration.

    Fills ``z_components`` and ``h_struct_raw`` on each metrics object.
    """
    if len(metrics) < 2:
        raise StandardizationError(f"structural index needs at least 2 units, got {len(metrics)}")
    metrics = sorted(metrics, key=lambda m: m.unit)
    comps = {
        "density": zscore([m.density for m in metrics]),
        "longest_path": zscore([m.longest_path for m in metrics]),
        "bottleneck_concentration": zscore([m.bottleneck_concentration for m in metrics]),
    }
    out = {}
    for idx, m in enumerate(metrics):
        m.z_components = {name: float(z[idx]) for name, z in comps.items()}
        m.h_struct_raw = sum(m.z_components.values())
        out[m.unit] = m.h_struct_raw
    return out
