"""Benchmark the chunk kernel: numba @njit vs the pure-numpy fallback.

Builds a synthetic training workload (random tables, pairs, negatives and a
category weight layout) and times both backends over identical inputs. The
numba path includes a warm-up call so JIT compilation is not billed.

Usage:
    python benchmarks/kernel_bench.py [--entities N] [--dim D] [--pairs N] ...
"""

import argparse
import time

import numpy as np

from catembed import kernels


def build_workload(n_entities, n_categories, dim, n_pairs, negatives, cats_per_entity, seed):
    rng = np.random.default_rng(seed)
    ent_in = rng.normal(0, 0.1, (n_entities, dim))
    cat_in = rng.normal(0, 0.1, (n_categories, dim))
    ent_out = rng.normal(0, 0.1, (n_entities, dim))
    offsets = np.zeros(n_entities + 1, dtype=np.int64)
    ids, ws = [], []
    for e in range(n_entities):
        m = int(rng.integers(1, cats_per_entity + 1))
        cats = rng.choice(n_categories, size=m, replace=False)
        raw = rng.random(m) + 0.1
        ids.extend(int(c) for c in cats)
        ws.extend(raw / raw.sum())
        offsets[e + 1] = len(ids)
    targets = rng.integers(0, n_entities, size=n_pairs).astype(np.int64)
    contexts = rng.integers(0, n_entities, size=n_pairs).astype(np.int64)
    negs = rng.integers(0, n_entities, size=(n_pairs, negatives)).astype(np.int64)
    return (
        ent_in, cat_in, ent_out, targets, contexts, negs,
        offsets, np.array(ids, dtype=np.int64), np.array(ws, dtype=np.float64),
    )


def time_backend(fn, workload, chunk, lr, repeats):
    ent_in, cat_in, ent_out = (a.copy() for a in workload[:3])
    rest = workload[3:]
    targets = rest[0]
    best = float("inf")
    loss = 0.0
    for _ in range(repeats):
        start = time.perf_counter()
        loss = 0.0
        for lo in range(0, len(targets), chunk):
            hi = min(lo + chunk, len(targets))
            loss += fn(
                ent_in, cat_in, ent_out,
                rest[0][lo:hi], rest[1][lo:hi], rest[2][lo:hi],
                rest[3], rest[4], rest[5], lr,
            )
        best = min(best, time.perf_counter() - start)
    return best, loss


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--entities", type=int, default=5000)
    ap.add_argument("--categories", type=int, default=200)
    ap.add_argument("--dim", type=int, default=100)
    ap.add_argument("--pairs", type=int, default=50_000)
    ap.add_argument("--negatives", type=int, default=10)
    ap.add_argument("--cats-per-entity", type=int, default=3)
    ap.add_argument("--chunk", type=int, default=500)
    ap.add_argument("--lr", type=float, default=0.025)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    workload = build_workload(
        args.entities, args.categories, args.dim, args.pairs,
        args.negatives, args.cats_per_entity, args.seed,
    )
    print(
        f"workload: {args.pairs} pairs, {args.entities} entities, dim {args.dim}, "
        f"k={args.negatives}, <= {args.cats_per_entity} categories/entity, chunk {args.chunk}"
    )

    t_np, loss_np = time_backend(kernels.train_chunk_numpy, workload, args.chunk, args.lr, args.repeats)
    print(f"numpy : {t_np:8.3f}s  {args.pairs / t_np:12.0f} pairs/s  (loss {loss_np:.4f})")

    if kernels.train_chunk_numba is None:
        print("numba : unavailable (install numba or unset CATEMBED_NO_NUMBA)")
        return
    # warm-up compiles outside the timed region
    warm = build_workload(50, 10, args.dim, 10, args.negatives, args.cats_per_entity, 1)
    kernels.train_chunk_numba(*(a.copy() for a in warm[:3]), *warm[3:], args.lr)
    t_nb, loss_nb = time_backend(kernels.train_chunk_numba, workload, args.chunk, args.lr, args.repeats)
    print(f"numba : {t_nb:8.3f}s  {args.pairs / t_nb:12.0f} pairs/s  (loss {loss_nb:.4f})")
    print(f"speedup: {t_np / t_nb:.1f}x  (loss agreement: {abs(loss_np - loss_nb):.2e})")


if __name__ == "__main__":
    main()
