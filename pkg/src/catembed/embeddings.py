"""Embedding storage and the on-disk export formats.

Text format: first line ``<row_count> <dim>``, then one row per line,
``<prefixed_label> <v1> ... <vd>`` with prefix ``e:`` for entities and ``c:``
for categories, floats printed with 6 significant digits. The binary variant
keeps the same text header line, then per row the prefixed label, a single
space, ``dim`` little-endian float64 values, and a newline byte.

Only input vectors are exported; output (context) vectors exist solely to
train against and are discarded here.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import NodeId, NodeKind, Vocabulary, normalize_label
from .errors import CorpusError, FormatError


@dataclass
class EmbeddingTable:
    """Training-side vectors: inputs for entities and categories, outputs for entities."""

    ent_in: np.ndarray
    cat_in: np.ndarray
    ent_out: np.ndarray

    @property
    def dim(self) -> int:
        return self.ent_in.shape[1]

    @property
    def n_entities(self) -> int:
        return self.ent_in.shape[0]

    @property
    def n_categories(self) -> int:
        return self.cat_in.shape[0]

    def assert_finite(self) -> None:
        for name in ("ent_in", "cat_in", "ent_out"):
            if not np.isfinite(getattr(self, name)).all():
                raise CorpusError(f"non-finite values in {name}")

    def input_vector(self, node: NodeId) -> np.ndarray:
        return (self.ent_in if node.kind is NodeKind.ENTITY else self.cat_in)[node.index]


def init_embeddings(n_entities: int, n_categories: int, dim: int, seed: int) -> EmbeddingTable:
    """Fresh table: inputs uniform in [-0.5/dim, 0.5/dim), outputs zero."""
    if n_entities < 1 or n_categories < 1 or dim < 1:
        raise CorpusError("embedding table sizes must be >= 1")
    rng = np.random.default_rng(seed)
    scale = 1.0 / dim
    ent_in = (rng.random((n_entities, dim)) - 0.5) * scale
    cat_in = (rng.random((n_categories, dim)) - 0.5) * scale
    ent_out = np.zeros((n_entities, dim))
    return EmbeddingTable(ent_in=ent_in, cat_in=cat_in, ent_out=ent_out)


def _prefixed_rows(table: EmbeddingTable, vocab: Vocabulary):
    for i in range(table.n_entities):
        yield "e:" + vocab.entity_label(i), table.ent_in[i]
    for i in range(table.n_categories):
        yield "c:" + vocab.category_label(i), table.cat_in[i]


def _write_text(rows, n_rows: int, dim: int, path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"{n_rows} {dim}\n")
        for label, vec in rows:
            fh.write(label + " " + " ".join(f"{x:.6g}" for x in vec) + "\n")


def _write_binary(rows, n_rows: int, dim: int, path: Path) -> None:
    with path.open("wb") as fh:
        fh.write(f"{n_rows} {dim}\n".encode("utf-8"))
        for label, vec in rows:
            fh.write(label.encode("utf-8") + b" ")
            fh.write(np.ascontiguousarray(vec, dtype="<f8").tobytes())
            fh.write(b"\n")


def save_text(table: EmbeddingTable, vocab: Vocabulary, path: str | Path) -> None:
    _write_text(_prefixed_rows(table, vocab), table.n_entities + table.n_categories, table.dim, Path(path))


def save_binary(table: EmbeddingTable, vocab: Vocabulary, path: str | Path) -> None:
    _write_binary(_prefixed_rows(table, vocab), table.n_entities + table.n_categories, table.dim, Path(path))


class EmbeddingIndex:
    """Loaded embedding file: label-addressable input vectors for evaluation."""

    def __init__(self, ent_labels: list[str], cat_labels: list[str], ent_vecs: np.ndarray, cat_vecs: np.ndarray):
        self.ent_labels = ent_labels
        self.cat_labels = cat_labels
        self.ent_vecs = ent_vecs
        self.cat_vecs = cat_vecs
        self._ent_index = {lab: i for i, lab in enumerate(ent_labels)}
        self._cat_index = {lab: i for i, lab in enumerate(cat_labels)}
        self._folded_ent: dict[str, int] = {}
        self._folded_cat: dict[str, int] = {}
        for lab, i in self._ent_index.items():
            self._folded_ent.setdefault(normalize_label(lab), i)
        for lab, i in self._cat_index.items():
            self._folded_cat.setdefault(normalize_label(lab), i)

    @property
    def dim(self) -> int:
        return self.ent_vecs.shape[1] if self.ent_vecs.size else self.cat_vecs.shape[1]

    @property
    def n_rows(self) -> int:
        return len(self.ent_labels) + len(self.cat_labels)

    def match_entity(self, word: str) -> int | None:
        return self._folded_ent.get(normalize_label(word))

    def match_category(self, word: str) -> int | None:
        return self._folded_cat.get(normalize_label(word))

    def vector(self, node: NodeId) -> np.ndarray:
        return (self.ent_vecs if node.kind is NodeKind.ENTITY else self.cat_vecs)[node.index]

    def label(self, node: NodeId) -> str:
        return (self.ent_labels if node.kind is NodeKind.ENTITY else self.cat_labels)[node.index]

    @classmethod
    def from_table(cls, table: EmbeddingTable, vocab: Vocabulary) -> "EmbeddingIndex":
        return cls(
            ent_labels=vocab.entity_labels(),
            cat_labels=vocab.category_labels(),
            ent_vecs=table.ent_in.copy(),
            cat_vecs=table.cat_in.copy(),
        )

    def _rows(self):
        for label, vec in zip(self.ent_labels, self.ent_vecs):
            yield "e:" + label, vec
        for label, vec in zip(self.cat_labels, self.cat_vecs):
            yield "c:" + label, vec

    def save_text(self, path: str | Path) -> None:
        _write_text(self._rows(), self.n_rows, self.dim, Path(path))

    def save_binary(self, path: str | Path) -> None:
        _write_binary(self._rows(), self.n_rows, self.dim, Path(path))


def _split_prefixed(label: str, source: str, lineno: int) -> tuple[NodeKind, str]:
    if label.startswith("e:"):
        return NodeKind.ENTITY, label[2:]
    if label.startswith("c:"):
        return NodeKind.CATEGORY, label[2:]
    raise FormatError(f"row label {label!r} lacks an e:/c: prefix", source, lineno)


def load_text(path: str | Path) -> EmbeddingIndex:
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"embedding file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise FormatError("empty embedding file", str(path), 1)
    try:
        n_rows, dim = (int(x) for x in lines[0].split())
    except ValueError:
        raise FormatError(f"bad header {lines[0]!r}", str(path), 1) from None
    ent_labels: list[str] = []
    cat_labels: list[str] = []
    ent_vecs: list[np.ndarray] = []
    cat_vecs: list[np.ndarray] = []
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != dim + 1:
            raise FormatError(f"expected {dim + 1} columns, got {len(parts)}", str(path), lineno)
        kind, label = _split_prefixed(parts[0], str(path), lineno)
        vec = np.array([float(x) for x in parts[1:]])
        if kind is NodeKind.ENTITY:
            ent_labels.append(label)
            ent_vecs.append(vec)
        else:
            cat_labels.append(label)
            cat_vecs.append(vec)
    if len(ent_labels) + len(cat_labels) != n_rows:
        raise FormatError(
            f"header promised {n_rows} rows, found {len(ent_labels) + len(cat_labels)}", str(path)
        )
    return EmbeddingIndex(
        ent_labels,
        cat_labels,
        np.vstack(ent_vecs) if ent_vecs else np.empty((0, dim)),
        np.vstack(cat_vecs) if cat_vecs else np.empty((0, dim)),
    )


def load_binary(path: str | Path) -> EmbeddingIndex:
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"embedding file not found: {path}")
    data = path.read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError("missing header line", str(path), 1)
    try:
        n_rows, dim = (int(x) for x in data[:nl].split())
    except ValueError:
        raise FormatError(f"bad header {data[:nl]!r}", str(path), 1) from None
    ent_labels: list[str] = []
    cat_labels: list[str] = []
    ent_vecs: list[np.ndarray] = []
    cat_vecs: list[np.ndarray] = []
    pos = nl + 1
    row_bytes = 8 * dim
    for row in range(n_rows):
        sp = data.find(b" ", pos)
        if sp < 0:
            raise FormatError(f"truncated row {row + 1}", str(path))
        kind, label = _split_prefixed(data[pos:sp].decode("utf-8"), str(path), row + 2)
        start = sp + 1
        end = start + row_bytes
        if end + 1 > len(data) or data[end:end + 1] != b"\n":
            raise FormatError(f"truncated or misaligned row {row + 1}", str(path))
        vec = np.frombuffer(data[start:end], dtype="<f8").astype(np.float64)
        if kind is NodeKind.ENTITY:
            ent_labels.append(label)
            ent_vecs.append(vec)
        else:
            cat_labels.append(label)
            cat_vecs.append(vec)
        pos = end + 1
    return EmbeddingIndex(
        ent_labels,
        cat_labels,
        np.vstack(ent_vecs) if ent_vecs else np.empty((0, dim)),
        np.vstack(cat_vecs) if cat_vecs else np.empty((0, dim)),
    )


def load_embeddings(path: str | Path) -> EmbeddingIndex:
    """Load an export, sniffing text vs binary from the content."""
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"embedding file not found: {path}")
    with path.open("rb") as fh:
        header = fh.readline()
        probe = fh.read(4096)
    try:
        probe.decode("utf-8")
        header.decode("ascii")
    except UnicodeDecodeError:
        return load_binary(path)
    # A text row after the header never contains NUL; binary float payloads often do.
    if b"\x00" in probe:
        return load_binary(path)
    return load_text(path)
