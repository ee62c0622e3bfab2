"""Optimization of the flat (CE) and hierarchy-weighted (HCE) objectives.

Per-pair negative-sampling SGD. ``pair_loss_and_grad`` is the slow reference
used by tests and oracles; ``train`` drives the chunk kernels in
:mod:`catembed.kernels` over the pair stream.

Concurrency: with ``workers > 1`` each epoch's pair arrays are split into
contiguous shards and processed by threads that read and write the shared
embedding arrays without synchronization (lost updates are tolerated, as
usual for asynchronous SGD). The tables are never reallocated during
training, so concurrent row access stays in bounds. Runs are bit-reproducible
only with ``workers=1``.
"""

from __future__ import annotations

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from . import kernels
from .corpus import CategoryGraph, Corpus, NodeId
from .embeddings import EmbeddingTable, init_embeddings, save_text
from .errors import ConfigError, TrainError
from .hierarchy import AncestorWeights, weight_csr
from .sampler import build_noise_table, draw_negatives_batch, pairs_arrays

log = logging.getLogger(__name__)

MODES = ("ce", "hce")


@dataclass
class TrainConfig:
    dim: int = 100
    epochs: int = 5
    lr0: float = 0.025
    lr_min: float | None = None  # defaults to 1e-4 * lr0
    negatives: int = 10
    chunk: int = 500
    noise_alpha: float = 0.75
    seed: int = 1
    workers: int = 1
    mode: str = "hce"
    shuffle: bool = True
    subsample: float = 0.0  # 0 disables frequent-entity subsampling
    checkpoint_every: int = 0  # chunks between checkpoints; 0 disables

    def __post_init__(self) -> None:
        if self.lr_min is None:
            self.lr_min = 1e-4 * self.lr0
        self.mode = str(self.mode).lower()

    def validate(self) -> None:
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.negatives < 1:
            raise ConfigError(f"negatives must be >= 1, got {self.negatives}")
        if self.chunk < 1:
            raise ConfigError(f"chunk must be >= 1, got {self.chunk}")
        if not (0.0 < self.lr_min <= self.lr0):
            raise ConfigError(f"need 0 < lr_min <= lr0, got lr_min={self.lr_min}, lr0={self.lr0}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.subsample < 0:
            raise ConfigError(f"subsample must be >= 0, got {self.subsample}")


@dataclass
class PairGradient:
    """Sparse gradient of one pair's loss: (table name, row) -> d-vector."""

    loss: float
    deltas: dict[tuple[str, int], np.ndarray] = field(default_factory=dict)

    def _add(self, table: str, row: int, delta: np.ndarray) -> None:
        key = (table, int(row))
        if key in self.deltas:
            self.deltas[key] += delta
        else:
            self.deltas[key] = delta.copy()


def softmax_prob(table: EmbeddingTable, predictor: NodeId, context: int) -> float:
    """Exact softmax p(context | predictor) over all entity output rows.

    Test oracle only: iterates the whole vocabulary, with max-subtraction for
    stability.
    """
    v = table.input_vector(predictor)
    scores = table.ent_out @ v
    scores -= scores.max()
    exp_s = np.exp(scores)
    return float(exp_s[context] / exp_s.sum())


def pair_loss_and_grad(
    table: EmbeddingTable,
    pair: tuple[int, int],
    weights: AncestorWeights,
    negatives: np.ndarray,
) -> PairGradient:
    """Reference loss and exact analytic gradient for one training pair.

    Touches exactly the rows {target input, each weighted category input,
    context output, each negative output}; duplicate negatives accumulate.
    """
    t, c = pair
    cids = np.asarray(weights.categories, dtype=np.int64)
    w = np.concatenate(([1.0], np.asarray(weights.weights, dtype=np.float64)))
    preds = np.vstack([table.ent_in[t][None, :], table.cat_in[cids]]) if len(cids) else table.ent_in[t][None, :]
    negatives = np.asarray(negatives, dtype=np.int64)
    outs = np.vstack([table.ent_out[c][None, :], table.ent_out[negatives]]) if negatives.size else table.ent_out[c][None, :]

    scores = np.clip(outs @ preds.T, -kernels.CLAMP, kernels.CLAMP)
    exp_s = np.exp(scores)
    loss = float((w * np.log1p(1.0 / exp_s[0])).sum() + (w[None, :] * np.log1p(exp_s[1:])).sum())

    coef = np.empty_like(scores)
    coef[0] = -w / (1.0 + exp_s[0])
    coef[1:] = w[None, :] * (exp_s[1:] / (1.0 + exp_s[1:]))
    d_preds = coef.T @ outs
    d_outs = coef @ preds

    grad = PairGradient(loss=loss)
    grad._add("ent_in", t, d_preds[0])
    for row, delta in zip(cids, d_preds[1:]):
        grad._add("cat_in", row, delta)
    grad._add("ent_out", c, d_outs[0])
    for row, delta in zip(negatives, d_outs[1:]):
        grad._add("ent_out", row, delta)
    return grad


def apply_gradient(table: EmbeddingTable, grad: PairGradient, lr: float) -> None:
    """One SGD step: row <- row - lr * delta for every touched row."""
    for (name, row), delta in grad.deltas.items():
        getattr(table, name)[row] -= lr * delta


@dataclass
class ChunkStats:
    epoch: int
    pairs_done: int
    total_pairs: int
    lr: float
    loss_per_pair: float
    worker: int = 0


class _Progress:
    """Shared pair counter for the linear learning-rate schedule.

    The lock guards scheduling metadata only; table rows are updated without
    synchronization by design.
    """

    def __init__(self, total: int):
        self.total = max(1, total)
        self.done = 0
        self._lock = threading.Lock()

    def advance(self, n: int) -> int:
        with self._lock:
            self.done += n
            return self.done


def _subsample_mask(
    targets: np.ndarray, contexts: np.ndarray, counts: np.ndarray, threshold: float, rng
) -> np.ndarray:
    freq = counts / counts.sum()
    keep_prob = np.minimum(1.0, np.sqrt(threshold / freq[contexts]))
    return rng.random(len(contexts)) < keep_prob


def train(
    corpus: Corpus,
    graph: CategoryGraph,
    config: TrainConfig,
    on_chunk: Callable[[ChunkStats], None] | None = None,
    checkpoint_dir: str | Path | None = None,
) -> EmbeddingTable:
    """Run negative-sampling SGD over the corpus and return the final table.

    The learning rate decays linearly from lr0 to lr_min over all scheduled
    pairs, re-evaluated once per chunk; updates themselves are per-pair.
    """
    config.validate()
    vocab = corpus.vocab
    mode_weights = weight_csr(graph, vocab.n_entities, config.mode)
    cat_offsets, cat_ids, cat_ws = mode_weights
    table = init_embeddings(vocab.n_entities, max(1, vocab.n_categories), config.dim, config.seed)
    noise = build_noise_table(vocab, config.noise_alpha)
    counts = vocab.entity_counts().astype(np.float64)

    shuffle_rng = np.random.default_rng([config.seed, 101])
    subsample_rng = np.random.default_rng([config.seed, 301])
    worker_rngs = [np.random.default_rng([config.seed, 201, w]) for w in range(config.workers)]

    n_docs = len(corpus.documents)
    pairs_per_epoch = corpus.n_pairs
    if pairs_per_epoch == 0:
        raise TrainError("corpus yields no training pairs")
    progress = _Progress(config.epochs * pairs_per_epoch)
    lr_span = config.lr0 - config.lr_min
    chunk_counter = [0]
    ckpt_lock = threading.Lock()

    def lr_at(done: int) -> float:
        frac = min(1.0, done / progress.total)
        return max(config.lr_min, config.lr0 - lr_span * frac)

    def maybe_checkpoint() -> None:
        if not config.checkpoint_every or checkpoint_dir is None:
            return
        with ckpt_lock:
            chunk_counter[0] += 1
            if chunk_counter[0] % config.checkpoint_every != 0:
                return
            out = Path(checkpoint_dir)
            out.mkdir(parents=True, exist_ok=True)
            save_text(table, vocab, out / f"checkpoint_{chunk_counter[0]:06d}.txt")

    def run_shard(epoch: int, worker: int, targets: np.ndarray, contexts: np.ndarray) -> None:
        rng = worker_rngs[worker]
        for start in range(0, len(targets), config.chunk):
            stop = min(start + config.chunk, len(targets))
            lr = lr_at(progress.done)
            negs = draw_negatives_batch(noise, config.negatives, contexts[start:stop], rng)
            loss = kernels.train_chunk(
                table.ent_in, table.cat_in, table.ent_out,
                targets[start:stop], contexts[start:stop], negs,
                cat_offsets, cat_ids, cat_ws, lr,
            )
            if not math.isfinite(loss):
                raise TrainError(
                    f"non-finite loss at epoch {epoch}, pairs {progress.done}: {loss!r}"
                )
            done = progress.advance(stop - start)
            if on_chunk is not None:
                on_chunk(ChunkStats(
                    epoch=epoch, pairs_done=done, total_pairs=progress.total,
                    lr=lr, loss_per_pair=loss / (stop - start), worker=worker,
                ))
            maybe_checkpoint()

    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n_docs) if config.shuffle else np.arange(n_docs)
        targets, contexts = pairs_arrays(corpus, order)
        if config.subsample > 0:
            mask = _subsample_mask(targets, contexts, counts, config.subsample, subsample_rng)
            targets, contexts = targets[mask], contexts[mask]
        if len(targets) == 0:
            continue
        if config.workers == 1:
            run_shard(epoch, 0, targets, contexts)
        else:
            bounds = np.linspace(0, len(targets), config.workers + 1, dtype=np.int64)
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                futures = [
                    pool.submit(run_shard, epoch, w, targets[bounds[w]:bounds[w + 1]], contexts[bounds[w]:bounds[w + 1]])
                    for w in range(config.workers)
                    if bounds[w + 1] > bounds[w]
                ]
                for fut in futures:
                    fut.result()
        log.debug("epoch %d/%d done (%d pairs)", epoch, config.epochs, progress.done)

    table.assert_finite()
    return table


def config_as_dict(config: TrainConfig) -> dict:
    return {f.name: getattr(config, f.name) for f in fields(config)}


def config_from_dict(values: dict) -> TrainConfig:
    known = {f.name for f in fields(TrainConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown training options: {sorted(unknown)}")
    return TrainConfig(**values)
