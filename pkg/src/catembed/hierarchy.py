"""Ancestor sets, downward step distances, and category prediction weights.

The hierarchical model weights each weighted category c_i of an entity by
``1 / (1 + l(c_i))`` where ``l`` is the average length, in edges, of all
downward paths from c_i to the entity's direct categories; weights are then
normalized to sum to 1. Direct categories have ``l = 0`` (the +1 keeps the
reciprocal defined there). The flat model instead uses the direct categories
only, each with weight exactly 1.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from .corpus import CategoryGraph
from .errors import HierarchyError

WEIGHT_SUM_TOL = 1e-9


@dataclass
class AncestorWeights:
    """Per-entity category weights, ordered by ascending category index."""

    categories: tuple[int, ...]
    weights: np.ndarray  # float64, parallel to categories

    def __len__(self) -> int:
        return len(self.categories)

    def check_normalized(self) -> None:
        if len(self.categories) != len(set(self.categories)):
            raise HierarchyError("duplicate categories in weight list")
        if np.any(self.weights <= 0):
            raise HierarchyError("non-positive category weight")
        total = float(self.weights.sum())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise HierarchyError(f"weights sum to {total!r}, expected 1.0")


def ancestors(graph: CategoryGraph, direct: Iterable[int]) -> set[int]:
    """Direct categories plus all transitive ancestors, excluding the root.

    The root ancestors every entity and carries no discriminative signal, so
    it never receives a weight even when it labels an entity directly.
    """
    direct = set(direct)
    if not direct:
        raise HierarchyError("entity has no direct categories")
    for cat in direct:
        if cat not in graph:
            raise HierarchyError(f"category {cat} not in graph")
    seen = set(direct)
    stack = list(direct)
    while stack:
        node = stack.pop()
        for parent in graph.parents[node]:
            if parent not in seen:
                seen.add(parent)
                stack.append(parent)
    seen.discard(graph.root)
    return seen


def _path_stats(graph: CategoryGraph, direct: frozenset[int]) -> tuple[dict[int, int], dict[int, int]]:
    """Count downward paths into ``direct`` and their total length, per node.

    Walking the graph in reverse topological order gives, for every node v,
    ``n[v]`` = number of downward paths from v ending at a member of ``direct``
    (v itself contributes a zero-length path when it is direct) and ``s[v]`` =
    the summed length of those paths in edges.
    """
    n: dict[int, int] = {}
    s: dict[int, int] = {}
    for node in reversed(graph.topological_order()):
        count = 1 if node in direct else 0
        total = 0
        for child in graph.children[node]:
            count += n[child]
            total += s[child] + n[child]
        n[node] = count
        s[node] = total
    return n, s


def avg_steps_down(graph: CategoryGraph, c_i: int, direct: Iterable[int]) -> float:
    """Mean length of all downward paths from ``c_i`` to the direct categories.

    Returns 0 exactly when ``c_i`` is itself direct; raises when ``c_i`` is not
    an ancestor of the direct set.
    """
    direct = frozenset(direct)
    if c_i in direct:
        return 0.0
    if c_i not in ancestors(graph, direct):
        raise HierarchyError(f"category {c_i} is not an ancestor of {sorted(direct)}")
    n, s = _path_stats(graph, direct)
    return s[c_i] / n[c_i]


def category_weights(graph: CategoryGraph, direct: Iterable[int]) -> AncestorWeights:
    """Normalized weights over the weighted category set of an entity.

    Closer categories (fewer average downward steps) receive strictly larger
    weight; the result sums to 1.
    """
    direct = frozenset(direct)
    anc = ancestors(graph, direct)
    if not anc:
        raise HierarchyError(
            "entity has no weighted categories (directly labeled with the root only)"
        )
    n, s = _path_stats(graph, direct)
    cats = tuple(sorted(anc))
    raw = np.array(
        [1.0 if c in direct else 1.0 / (1.0 + s[c] / n[c]) for c in cats],
        dtype=np.float64,
    )
    out = AncestorWeights(categories=cats, weights=raw / raw.sum())
    out.check_normalized()
    return out


def ce_weights(direct: Iterable[int]) -> AncestorWeights:
    """Direct categories only, each with weight exactly 1 (unnormalized)."""
    cats = tuple(sorted(set(direct)))
    if not cats:
        raise HierarchyError("entity has no direct categories")
    return AncestorWeights(categories=cats, weights=np.ones(len(cats), dtype=np.float64))


def weights_for_entity(graph: CategoryGraph, entity: int, mode: str) -> AncestorWeights:
    direct = graph.entity_categories.get(entity)
    if not direct:
        raise HierarchyError(f"entity {entity} has no category labeling")
    return category_weights(graph, direct) if mode == "hce" else ce_weights(direct)


def weight_csr(
    graph: CategoryGraph, n_entities: int, mode: str
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flatten per-entity weights into CSR arrays for the training kernel.

    Computed once at training start (the graph is static during training).
    Entities without a labeling (context-only entities) get an empty slice.

    Returns ``(offsets, cat_ids, cat_ws)`` where entity e's categories live in
    ``cat_ids[offsets[e]:offsets[e+1]]``.
    """
    if mode not in ("ce", "hce"):
        raise HierarchyError(f"unknown mode {mode!r}")
    offsets = np.zeros(n_entities + 1, dtype=np.int64)
    ids: list[int] = []
    ws: list[float] = []
    for ent in range(n_entities):
        direct = graph.entity_categories.get(ent)
        if direct:
            aw = category_weights(graph, direct) if mode == "hce" else ce_weights(direct)
            ids.extend(aw.categories)
            ws.extend(aw.weights)
        offsets[ent + 1] = len(ids)
    return offsets, np.asarray(ids, dtype=np.int64), np.asarray(ws, dtype=np.float64)
