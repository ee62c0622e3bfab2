"""SGD update kernels for one chunk of training pairs.

This is the hot loop: per pair it scores the context and k negative output
rows against the target row and its weighted category rows, then applies one
SGD step to every touched row. Two implementations share the exact same math:

* ``train_chunk_numba`` -- explicit loops compiled with ``@njit(nogil=True)``;
  releasing the GIL is what lets multi-worker lock-free training actually run
  in parallel threads.
* ``train_chunk_numpy`` -- per-pair vectorized numpy, used when numba is
  unavailable or when ``CATEMBED_NO_NUMBA=1`` is set.

``train_chunk`` points at the selected backend. Sigmoid pre-activations are
clamped to [-CLAMP, CLAMP] before exponentiation, which bounds every log term
and keeps the tables finite under any learning rate.

Gradient convention: the loss for pair (t, c) with weighted categories
{(c_i, w_i)} and negatives {n} is

    loss = log(1+exp(-u_c.v_t)) + sum_i w_i log(1+exp(-u_c.v_ci))
         + sum_n [log(1+exp(u_n.v_t)) + sum_i w_i log(1+exp(u_n.v_ci))]

i.e. the negated log-sigmoid objective, so lower is better. All deltas for a
pair are computed against the pre-update rows, then applied at once.
"""

from __future__ import annotations

import math
import os

import numpy as np

CLAMP = 30.0

_ENV_FLAG = "CATEMBED_NO_NUMBA"


def train_chunk_numpy(
    ent_in: np.ndarray,
    cat_in: np.ndarray,
    ent_out: np.ndarray,
    targets: np.ndarray,
    contexts: np.ndarray,
    negatives: np.ndarray,
    cat_offsets: np.ndarray,
    cat_ids: np.ndarray,
    cat_ws: np.ndarray,
    lr: float,
) -> float:
    """Pure-numpy chunk kernel; sequential per-pair updates."""
    n_pairs = targets.shape[0]
    total = 0.0
    for i in range(n_pairs):
        t = targets[i]
        c = contexts[i]
        negs = negatives[i]
        lo, hi = cat_offsets[t], cat_offsets[t + 1]
        cids = cat_ids[lo:hi]
        m = hi - lo

        preds = np.empty((1 + m, ent_in.shape[1]))
        preds[0] = ent_in[t]
        preds[1:] = cat_in[cids]
        w = np.empty(1 + m)
        w[0] = 1.0
        w[1:] = cat_ws[lo:hi]
        outs = np.empty((1 + negs.shape[0], ent_in.shape[1]))
        outs[0] = ent_out[c]
        outs[1:] = ent_out[negs]

        scores = np.clip(outs @ preds.T, -CLAMP, CLAMP)
        exp_s = np.exp(scores)
        # row 0 is the positive context, the rest are negatives
        pos_loss = w * np.log1p(1.0 / exp_s[0])
        neg_loss = w[None, :] * np.log1p(exp_s[1:])
        total += float(pos_loss.sum() + neg_loss.sum())

        coef = np.empty_like(scores)
        coef[0] = -w / (1.0 + exp_s[0])          # -w * sigmoid(-s)
        coef[1:] = w[None, :] * (exp_s[1:] / (1.0 + exp_s[1:]))  # w * sigmoid(s)

        d_preds = coef.T @ outs
        d_outs = coef @ preds

        ent_in[t] -= lr * d_preds[0]
        if m:
            cat_in[cids] -= lr * d_preds[1:]
        ent_out[c] -= lr * d_outs[0]
        np.subtract.at(ent_out, negs, lr * d_outs[1:])
    return total


def _train_chunk_loops(
    ent_in, cat_in, ent_out, targets, contexts, negatives, cat_offsets, cat_ids, cat_ws, lr
):
    n_pairs = targets.shape[0]
    d = ent_in.shape[1]
    k = negatives.shape[1]
    max_m = 0
    for e in range(cat_offsets.shape[0] - 1):
        width = cat_offsets[e + 1] - cat_offsets[e]
        if width > max_m:
            max_m = width
    pred_delta = np.zeros((1 + max_m, d))
    out_delta = np.zeros((1 + k, d))
    total = 0.0
    for i in range(n_pairs):
        t = targets[i]
        c = contexts[i]
        lo = cat_offsets[t]
        m = cat_offsets[t + 1] - lo
        for p in range(1 + m):
            if p == 0:
                v = ent_in[t]
                wp = 1.0
            else:
                v = cat_in[cat_ids[lo + p - 1]]
                wp = cat_ws[lo + p - 1]
            for o in range(1 + k):
                u = ent_out[c] if o == 0 else ent_out[negatives[i, o - 1]]
                s = 0.0
                for j in range(d):
                    s += u[j] * v[j]
                if s > CLAMP:
                    s = CLAMP
                elif s < -CLAMP:
                    s = -CLAMP
                es = math.exp(s)
                if o == 0:
                    total += wp * math.log1p(1.0 / es)
                    g = -wp / (1.0 + es)
                else:
                    total += wp * math.log1p(es)
                    g = wp * (es / (1.0 + es))
                for j in range(d):
                    pred_delta[p, j] += g * u[j]
                    out_delta[o, j] += g * v[j]
        for j in range(d):
            ent_in[t, j] -= lr * pred_delta[0, j]
            pred_delta[0, j] = 0.0
        for p in range(1, 1 + m):
            cid = cat_ids[lo + p - 1]
            for j in range(d):
                cat_in[cid, j] -= lr * pred_delta[p, j]
                pred_delta[p, j] = 0.0
        for j in range(d):
            ent_out[c, j] -= lr * out_delta[0, j]
            out_delta[0, j] = 0.0
        for o in range(1, 1 + k):
            nid = negatives[i, o - 1]
            for j in range(d):
                ent_out[nid, j] -= lr * out_delta[o, j]
                out_delta[o, j] = 0.0
    return total


def _env_disables_numba() -> bool:
    return os.environ.get(_ENV_FLAG, "").strip() not in ("", "0")


train_chunk_numba = None
if not _env_disables_numba():
    try:
        from numba import njit

        train_chunk_numba = njit(nogil=True, cache=True)(_train_chunk_loops)
    except ImportError:
        train_chunk_numba = None

if train_chunk_numba is not None:
    train_chunk = train_chunk_numba
    BACKEND = "numba"
else:
    train_chunk = train_chunk_numpy
    BACKEND = "numpy"
