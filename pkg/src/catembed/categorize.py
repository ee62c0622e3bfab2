"""Concept categorization: clustering scored with purity, and NN classification.

Clustering is self-contained (k-means++ and bottom-up agglomerative merging)
so results are deterministic given a seed, including tie-breaking, which
external toolkits do not guarantee. The cosine metric runs euclidean machinery
on length-normalized copies of the vectors.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingIndex
from .errors import EvalError, FormatError

METRICS = ("euclidean", "cosine")
LINKAGES = ("ward", "complete", "average")


@dataclass
class GoldLabeling:
    """Gold concept -> category assignment; one line per concept on disk."""

    entities: list[str]
    categories: list[str]  # parallel to entities
    class_labels: list[str]  # unique categories, first-seen order

    def __len__(self) -> int:
        return len(self.entities)

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    def class_indices(self) -> np.ndarray:
        lookup = {lab: i for i, lab in enumerate(self.class_labels)}
        return np.array([lookup[c] for c in self.categories], dtype=np.int64)

    def subset(self, keep: Iterable[int]) -> "GoldLabeling":
        keep = list(keep)
        ents = [self.entities[i] for i in keep]
        cats = [self.categories[i] for i in keep]
        classes = list(dict.fromkeys(cats))
        return GoldLabeling(ents, cats, classes)


def load_gold(path: str | Path) -> GoldLabeling:
    path = Path(path)
    if not path.exists():
        raise EvalError(f"gold file not found: {path}")
    entities: list[str] = []
    categories: list[str] = []
    seen: set[str] = set()
    classes: dict[str, None] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 2:
            raise FormatError(f"expected 2 tab-separated fields, got {len(parts)}", str(path), lineno)
        entity, category = parts[0].strip(), parts[1].strip()
        if not entity or not category:
            raise FormatError("empty label", str(path), lineno)
        if entity in seen:
            raise FormatError(f"duplicate entity {entity!r}", str(path), lineno)
        seen.add(entity)
        entities.append(entity)
        categories.append(category)
        classes.setdefault(category)
    if not entities:
        raise EvalError(f"gold file {path} is empty")
    return GoldLabeling(entities, categories, list(classes))


@dataclass
class ClusteringSolution:
    assignment: np.ndarray  # cluster index per item, in [0, k)
    k: int
    objective: float = float("nan")


def _normalize_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return x / norms


def _pairwise_sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return np.maximum(d2, 0.0)


def _kmeanspp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = x[idx]
        d2 = np.minimum(d2, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def _repair_empty(assignment: np.ndarray, d2_assigned: np.ndarray, k: int) -> None:
    """Give every empty cluster the farthest point of a multi-member cluster."""
    sizes = np.bincount(assignment, minlength=k)
    for cluster in range(k):
        while sizes[cluster] == 0:
            eligible = sizes[assignment] > 1
            if not eligible.any():
                raise EvalError("cannot repair empty cluster: all clusters singletons")
            candidates = np.where(eligible)[0]
            steal = candidates[np.argmax(d2_assigned[candidates])]
            sizes[assignment[steal]] -= 1
            assignment[steal] = cluster
            d2_assigned[steal] = 0.0
            sizes[cluster] += 1


def kmeans(
    vectors: np.ndarray,
    k: int,
    metric: str = "euclidean",
    restarts: int = 10,
    max_iters: int = 100,
    seed: int = 0,
) -> ClusteringSolution:
    """Lloyd's algorithm with k-means++ seeding, best of ``restarts`` by inertia."""
    x = np.asarray(vectors, dtype=np.float64)
    n = len(x)
    if k < 1:
        raise EvalError(f"k must be >= 1, got {k}")
    if k > n:
        raise EvalError(f"k={k} exceeds the number of points ({n})")
    if metric not in METRICS:
        raise EvalError(f"metric must be one of {METRICS}, got {metric!r}")
    if metric == "cosine":
        x = _normalize_rows(x)
    if k == n:
        return ClusteringSolution(assignment=np.arange(n), k=k, objective=0.0)

    rng = np.random.default_rng(seed)
    best: ClusteringSolution | None = None
    for _ in range(restarts):
        centers = _kmeanspp_init(x, k, rng)
        assignment = np.full(n, -1, dtype=np.int64)
        for _it in range(max_iters):
            d2 = _pairwise_sq_dists(x, centers)
            new_assignment = d2.argmin(axis=1)
            d2_assigned = d2[np.arange(n), new_assignment]
            _repair_empty(new_assignment, d2_assigned, k)
            if np.array_equal(new_assignment, assignment):
                break
            assignment = new_assignment
            for j in range(k):
                centers[j] = x[assignment == j].mean(axis=0)
        d2 = _pairwise_sq_dists(x, centers)
        objective = float(d2[np.arange(n), assignment].sum())
        if best is None or objective < best.objective:
            best = ClusteringSolution(assignment=assignment.copy(), k=k, objective=objective)
    assert best is not None
    return best


def agglomerative(
    vectors: np.ndarray,
    k: int,
    metric: str = "euclidean",
    linkage: str = "average",
) -> ClusteringSolution:
    """Bottom-up merging until k clusters; ties go to the smallest slot pair."""
    x = np.asarray(vectors, dtype=np.float64)
    n = len(x)
    if k < 1:
        raise EvalError(f"k must be >= 1, got {k}")
    if k > n:
        raise EvalError(f"k={k} exceeds the number of points ({n})")
    if metric not in METRICS:
        raise EvalError(f"metric must be one of {METRICS}, got {metric!r}")
    if linkage not in LINKAGES:
        raise EvalError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    if linkage == "ward" and metric != "euclidean":
        raise EvalError("ward linkage requires the euclidean metric")
    if metric == "cosine":
        x = _normalize_rows(x)

    # Initial dissimilarity: squared euclidean for ward (Lance-Williams form),
    # plain euclidean otherwise.
    diff = x[:, None, :] - x[None, :, :]
    d = (diff**2).sum(axis=2)
    if linkage != "ward":
        d = np.sqrt(np.maximum(d, 0.0))
    np.fill_diagonal(d, np.inf)

    active = np.ones(n, dtype=bool)
    sizes = np.ones(n, dtype=np.int64)
    members: list[list[int]] = [[i] for i in range(n)]

    for _ in range(n - k):
        # argmin over the full matrix scans row-major, so the first minimum is
        # exactly the lexicographically smallest (i, j) slot pair
        flat = np.argmin(d)
        i, j = divmod(int(flat), n)
        if i > j:
            i, j = j, i
        a, b = sizes[i], sizes[j]
        dij = d[i, j]
        for c in np.where(active)[0]:
            if c == i or c == j:
                continue
            if linkage == "average":
                d_new = (a * d[i, c] + b * d[j, c]) / (a + b)
            elif linkage == "complete":
                d_new = max(d[i, c], d[j, c])
            else:  # ward
                cc = sizes[c]
                d_new = ((a + cc) * d[i, c] + (b + cc) * d[j, c] - cc * dij) / (a + b + cc)
            d[i, c] = d[c, i] = d_new
        members[i].extend(members[j])
        sizes[i] += sizes[j]
        active[j] = False
        d[j, :] = np.inf
        d[:, j] = np.inf

    assignment = np.empty(n, dtype=np.int64)
    for cluster, slot in enumerate(np.where(active)[0]):
        assignment[members[slot]] = cluster
    return ClusteringSolution(assignment=assignment, k=k)


def purity(solution: ClusteringSolution, gold: GoldLabeling) -> float:
    """Fraction of items sitting in their cluster's majority gold class."""
    classes = gold.class_indices()
    return purity_from_labels(solution.assignment, classes)


def purity_from_labels(assignment: np.ndarray, classes: np.ndarray) -> float:
    if len(assignment) != len(classes):
        raise EvalError(
            f"solution covers {len(assignment)} items, gold has {len(classes)}"
        )
    n = len(assignment)
    if n == 0:
        raise EvalError("empty clustering")
    total = 0
    for cluster in np.unique(assignment):
        overlap = np.bincount(classes[assignment == cluster])
        total += int(overlap.max())
    return total / n


def nn_classify(entity_vec: np.ndarray, candidates: np.ndarray) -> int:
    """Index of the candidate category vector nearest in euclidean distance."""
    if len(candidates) < 1:
        raise EvalError("nn_classify needs at least one candidate")
    d2 = ((candidates - entity_vec[None, :]) ** 2).sum(axis=1)
    return int(d2.argmin())  # argmin takes the first minimum: lowest index on ties


def _sweep_combos() -> list[tuple[str, str, str | None]]:
    combos: list[tuple[str, str, str | None]] = []
    for metric in METRICS:
        for link in LINKAGES:
            if link == "ward" and metric != "euclidean":
                continue
            combos.append(("agglomerative", metric, link))
    for metric in METRICS:
        combos.append(("kmeans", metric, None))
    return sorted(combos, key=lambda c: (c[0], c[1], c[2] or ""))


def run_categorization(
    index: EmbeddingIndex,
    gold: GoldLabeling,
    method: str = "both",
    restarts: int = 10,
    seed: int = 0,
) -> dict:
    """Score an embedding against a gold labeling.

    ``cluster`` sweeps every clustering algorithm/metric/linkage combination
    with k equal to the number of gold classes and reports the best purity
    with its winning parameters; ``nn`` assigns each concept to the nearest
    candidate category vector. Gold entities missing from the embedding are
    excluded and counted.
    """
    if method not in ("cluster", "nn", "both"):
        raise EvalError(f"method must be cluster, nn or both, got {method!r}")

    resolved: list[int] = []
    excluded: list[str] = []
    rows: list[int] = []
    for i, label in enumerate(gold.entities):
        row = index.match_entity(label)
        if row is None:
            excluded.append(label)
        else:
            resolved.append(i)
            rows.append(row)
    if not resolved:
        raise EvalError("no gold entity resolves to an embedding row")
    sub = gold.subset(resolved)
    vectors = index.ent_vecs[rows]
    classes = sub.class_indices()

    report: dict = {
        "n_gold": len(gold),
        "n_scored": len(sub),
        "n_excluded": len(excluded),
        "excluded": excluded,
        "n_classes": sub.n_classes,
    }

    if method in ("cluster", "both"):
        if sub.n_classes < 2:
            raise EvalError("clustering needs at least 2 gold classes")
        combos = []
        for algo, metric, link in _sweep_combos():
            if algo == "kmeans":
                sol = kmeans(vectors, sub.n_classes, metric=metric, restarts=restarts, seed=seed)
            else:
                sol = agglomerative(vectors, sub.n_classes, metric=metric, linkage=link)
            combos.append({
                "algorithm": algo,
                "metric": metric,
                "linkage": link,
                "purity": purity(sol, sub),
                "solution": sol,
            })
        best = max(combos, key=lambda c: c["purity"])  # max keeps the first on ties
        best_sol = best["solution"]
        report["cluster"] = {
            "purity": best["purity"],
            "best_params": {kk: best[kk] for kk in ("algorithm", "metric", "linkage")},
            "sweep": [
                {kk: c[kk] for kk in ("algorithm", "metric", "linkage", "purity")}
                for c in combos
            ],
            "misclassified": _cluster_misclassifications(best_sol, sub),
        }

    if method in ("nn", "both"):
        cand_rows: list[int] = []
        cand_labels: list[str] = []
        missing_cats: list[str] = []
        for cat in sub.class_labels:
            row = index.match_category(cat)
            if row is None:
                missing_cats.append(cat)
            else:
                cand_rows.append(row)
                cand_labels.append(cat)
        if not cand_labels:
            raise EvalError("no gold category resolves to an embedding row")
        candidates = index.cat_vecs[cand_rows]
        predicted = [cand_labels[nn_classify(v, candidates)] for v in vectors]
        pred_lookup = {lab: i for i, lab in enumerate(dict.fromkeys(cand_labels))}
        pred_idx = np.array([pred_lookup[p] for p in predicted], dtype=np.int64)
        accuracy = float(np.mean([p == g for p, g in zip(predicted, sub.categories)]))
        counts = {lab: predicted.count(lab) for lab in cand_labels}
        report["nn"] = {
            "purity": purity_from_labels(pred_idx, classes),
            "accuracy": accuracy,
            "missing_categories": missing_cats,
            "prediction_counts": counts,  # a single dominant category signals hubness
            "misclassified": _nn_misclassifications(predicted, sub),
        }
    return report


def _nn_misclassifications(predicted: list[str], gold: GoldLabeling) -> dict[str, list[dict]]:
    """Entities wrongly pulled into each predicted category."""
    by_predicted: dict[str, list[dict]] = {}
    for entity, gold_cat, pred in zip(gold.entities, gold.categories, predicted):
        if pred != gold_cat:
            by_predicted.setdefault(pred, []).append({"entity": entity, "gold": gold_cat})
    return by_predicted


def _cluster_misclassifications(solution: ClusteringSolution, gold: GoldLabeling) -> dict[str, list[dict]]:
    """Map each cluster to its majority class, then list the out-of-class items."""
    classes = gold.class_indices()
    by_predicted: dict[str, list[dict]] = {}
    for cluster in np.unique(solution.assignment):
        in_cluster = solution.assignment == cluster
        overlap = np.bincount(classes[in_cluster], minlength=gold.n_classes)
        majority = int(overlap.argmax())
        majority_label = gold.class_labels[majority]
        for i in np.where(in_cluster)[0]:
            if classes[i] != majority:
                by_predicted.setdefault(majority_label, []).append(
                    {"entity": gold.entities[i], "gold": gold.categories[i]}
                )
    return by_predicted
