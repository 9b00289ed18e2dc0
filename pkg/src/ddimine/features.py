"""Per-sample features: summed sparse word counts and tf-weighted embedding sums."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import TokenizedAbstract
from .errors import ValidationError
from .labeling import InteractionSample
from .rng import Rng

_UNDERSAMPLE_STREAM = 21


@dataclass
class Vocabulary:
    """Tokens ordered by corpus frequency (descending, ties lexicographic).

    Must be built from train-split abstracts only; the split contract depends
    on it.
    """

    words: list[tuple[str, int]]
    index: dict[str, int]

    def __len__(self) -> int:
        return len(self.words)


def build_vocab(train_abstracts: Sequence[TokenizedAbstract], top_k: int | None = None) -> Vocabulary:
    """Count token occurrences over the train abstracts and keep the top k.

    ``top_k=None`` keeps everything; ``top_k=0`` gives an empty vocabulary.
    """
    if top_k is not None and top_k < 0:
        raise ValidationError(f"top_k must be nonnegative, got {top_k}")
    counts: Counter[str] = Counter()
    for ab in train_abstracts:
        counts.update(ab.tokens)
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    if top_k is not None:
        ordered = ordered[:top_k]
    return Vocabulary(ordered, {tok: col for col, (tok, _) in enumerate(ordered)})


def save_vocab(vocab: Vocabulary, path: Path | str, extra_header: dict[str, str] | None = None) -> None:
    lines = ["# vocabulary"]
    for key, val in (extra_header or {}).items():
        lines.append(f"# {key}: {val}")
    for tok, freq in vocab.words:
        lines.append(f"{tok}\t{freq}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_vocab(path: Path | str) -> Vocabulary:
    words = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            tok, _, freq = line.partition("\t")
            words.append((tok, int(freq)))
    return Vocabulary(words, {tok: col for col, (tok, _) in enumerate(words)})


@dataclass
class SparseVector:
    dims: int
    entries: dict[int, float]  # no explicit zeros


def _abstract_columns(ab: TokenizedAbstract, vocab: Vocabulary) -> dict[int, int]:
    cols: dict[int, int] = {}
    index = vocab.index
    for tok in ab.tokens:
        col = index.get(tok)
        if col is not None:
            cols[col] = cols.get(col, 0) + 1
    return cols


def count_vector(
    sample: InteractionSample,
    abstracts_by_id: Mapping[str, TokenizedAbstract],
    vocab: Vocabulary,
) -> SparseVector:
    """Word counts summed over the sample's assigned abstracts."""
    entries: dict[int, float] = {}
    for aid in sorted(sample.abstract_ids):
        ab = abstracts_by_id.get(aid)
        if ab is None:
            raise ValidationError(f"sample {sample.key!r} references unknown abstract {aid!r}")
        for col, n in _abstract_columns(ab, vocab).items():
            entries[col] = entries.get(col, 0) + n
    return SparseVector(len(vocab), entries)


class EmbeddingTable:
    """token -> dense vector, all of the same width."""

    def __init__(self, vectors: Mapping[str, np.ndarray]):
        if not vectors:
            raise ValidationError("embedding table is empty")
        dims = {len(v) for v in vectors.values()}
        if len(dims) != 1:
            raise ValidationError(f"inconsistent embedding widths: {sorted(dims)}")
        self.dim = dims.pop()
        self.vectors = {tok: np.asarray(v, dtype=float) for tok, v in vectors.items()}

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    @classmethod
    def load(cls, path: Path | str) -> "EmbeddingTable":
        """Read the plain-text vector format: ``token v1 v2 ... vd`` per line."""
        vectors: dict[str, np.ndarray] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.split()
                if not parts:
                    continue
                tok = parts[0]
                if tok in vectors:
                    raise ValidationError(f"{path}:{lineno}: duplicate token {tok!r}")
                try:
                    vectors[tok] = np.array([float(x) for x in parts[1:]], dtype=float)
                except ValueError as exc:
                    raise ValidationError(f"{path}:{lineno}: bad vector component") from exc
                if vectors[tok].size == 0:
                    raise ValidationError(f"{path}:{lineno}: token {tok!r} has no components")
        return cls(vectors)


def load_stopwords(path: Path | str) -> frozenset[str]:
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip()
            if word and not word.startswith("#"):
                words.add(word.lower())
    return frozenset(words)


def default_stopwords() -> frozenset[str]:
    """The English stopword list shipped with the package."""
    text = resources.files("ddimine").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


def embed_abstract(
    ab: TokenizedAbstract, table: EmbeddingTable, stopwords: frozenset[str] | set[str]
) -> tuple[np.ndarray, int]:
    """Term-frequency weighted sum of embeddings over non-stopword tokens.

    Returns (vector, misses) where misses counts the distinct tokens absent
    from the table.  Tokens are accumulated in sorted order so the float sum
    is independent of token order in the abstract.
    """
    vec = np.zeros(table.dim, dtype=float)
    misses = 0
    tf = Counter(tok for tok in ab.tokens if tok not in stopwords)
    for tok in sorted(tf):
        v = table.vectors.get(tok)
        if v is None:
            misses += 1
        else:
            vec += tf[tok] * v
    return vec, misses


def embed_sample(
    sample: InteractionSample,
    abstracts_by_id: Mapping[str, TokenizedAbstract],
    table: EmbeddingTable,
    stopwords: frozenset[str] | set[str],
) -> tuple[np.ndarray, int]:
    """Sum of abstract embeddings over the sample's assigned abstracts."""
    vec = np.zeros(table.dim, dtype=float)
    misses = 0
    for aid in sorted(sample.abstract_ids):
        ab = abstracts_by_id.get(aid)
        if ab is None:
            raise ValidationError(f"sample {sample.key!r} references unknown abstract {aid!r}")
        part, m = embed_abstract(ab, table, stopwords)
        vec += part
        misses += m
    return vec, misses


@dataclass
class FeatureMatrix:
    """Aligned sample keys, feature rows, and binary labels."""

    keys: list[str]
    X: sp.csr_matrix | np.ndarray
    y: np.ndarray
    kind: str  # "counts" | "embeddings"

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def dims(self) -> int:
        return self.X.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.X)


def build_count_matrix(
    samples: Sequence[InteractionSample],
    abstracts_by_id: Mapping[str, TokenizedAbstract],
    vocab: Vocabulary,
    drop_empty: bool = False,
    jobs: int = 1,
) -> FeatureMatrix:
    """Sparse count features for every sample, rows in sample order."""
    if drop_empty:
        samples = [s for s in samples if s.abstract_ids]
    cache = {aid: _abstract_columns(ab, vocab) for aid, ab in abstracts_by_id.items()}

    def row_of(sample: InteractionSample) -> dict[int, int]:
        entries: dict[int, int] = {}
        for aid in sample.abstract_ids:
            cols = cache.get(aid)
            if cols is None:
                raise ValidationError(f"sample {sample.key!r} references unknown abstract {aid!r}")
            for col, n in cols.items():
                entries[col] = entries.get(col, 0) + n
        return entries

    rows = _ordered_map(row_of, samples, jobs)
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for entries in rows:
        for col in sorted(entries):
            indices.append(col)
            data.append(float(entries[col]))
        indptr.append(len(indices))
    X = sp.csr_matrix(
        (np.array(data, dtype=float), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(samples), len(vocab)),
    )
    y = np.array([s.label for s in samples], dtype=np.int64)
    return FeatureMatrix([s.key for s in samples], X, y, "counts")


def build_embedding_matrix(
    samples: Sequence[InteractionSample],
    abstracts_by_id: Mapping[str, TokenizedAbstract],
    table: EmbeddingTable,
    stopwords: frozenset[str] | set[str],
    drop_empty: bool = False,
    jobs: int = 1,
) -> tuple[FeatureMatrix, int]:
    """Dense embedding features; returns the matrix and the total miss count."""
    if drop_empty:
        samples = [s for s in samples if s.abstract_ids]
    cache = {aid: embed_abstract(ab, table, stopwords) for aid, ab in abstracts_by_id.items()}

    def row_of(sample: InteractionSample) -> tuple[np.ndarray, int]:
        vec = np.zeros(table.dim, dtype=float)
        misses = 0
        for aid in sorted(sample.abstract_ids):
            if aid not in cache:
                raise ValidationError(f"sample {sample.key!r} references unknown abstract {aid!r}")
            part, m = cache[aid]
            vec = vec + part
            misses += m
        return vec, misses

    rows = _ordered_map(row_of, samples, jobs)
    X = np.vstack([vec for vec, _ in rows]) if rows else np.zeros((0, table.dim))
    total_misses = sum(m for _, m in rows)
    y = np.array([s.label for s in samples], dtype=np.int64)
    return FeatureMatrix([s.key for s in samples], X, y, "embeddings"), total_misses


def _ordered_map(fn, items: Sequence, jobs: int) -> list:
    """Map preserving input order; thread-parallel when jobs > 1.

    Row construction is pure, so any evaluation order gives the same rows.
    """
    if jobs <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def undersample(matrix: FeatureMatrix, seed: int) -> FeatureMatrix:
    """Balance labels by sampling the majority class down to the minority count.

    All minority rows survive; majority survivors are drawn without
    replacement by the seeded generator.  Row order is the original order
    restricted to survivors.  Already-balanced input is returned as-is.
    """
    y = matrix.y
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise ValidationError("undersample requires both classes present")
    if len(pos) == len(neg):
        return matrix
    minority, majority = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    rng = Rng(seed).derive(_UNDERSAMPLE_STREAM)
    chosen = rng.sample_indices(len(majority), len(minority))
    keep = np.sort(np.concatenate([minority, majority[np.array(chosen, dtype=np.int64)]]))
    X = matrix.X[keep]
    return FeatureMatrix([matrix.keys[i] for i in keep], X, y[keep], matrix.kind)


def save_matrix(matrix: FeatureMatrix, path: Path | str, extra_header: dict[str, str] | None = None) -> None:
    """Persist as a text header plus one row record per sample.

    Sparse rows are ``col:value`` pairs; dense rows are the full value list.
    """
    lines = ["# feature-matrix"]
    for key, val in (extra_header or {}).items():
        lines.append(f"# {key}: {val}")
    storage = "sparse" if matrix.is_sparse else "dense"
    lines.append(f"rows {matrix.n_rows}")
    lines.append(f"dims {matrix.dims}")
    lines.append(f"storage {storage}")
    lines.append(f"kind {matrix.kind}")
    for i, key in enumerate(matrix.keys):
        label = int(matrix.y[i])
        if matrix.is_sparse:
            start, end = matrix.X.indptr[i], matrix.X.indptr[i + 1]
            cells = " ".join(
                f"{int(matrix.X.indices[j])}:{float(matrix.X.data[j])!r}" for j in range(start, end)
            )
            lines.append(f"row {key} {label} {cells}".rstrip())
        else:
            cells = " ".join(repr(float(v)) for v in matrix.X[i])
            lines.append(f"row {key} {label} {cells}".rstrip())
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_matrix(path: Path | str) -> tuple[FeatureMatrix, dict[str, str]]:
    """Inverse of :func:`save_matrix`; returns the matrix and header fields."""
    header: dict[str, str] = {}
    meta: dict[str, str] = {}
    keys: list[str] = []
    labels: list[int] = []
    row_lines: list[list[str]] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    k, _, v = body.partition(":")
                    header[k.strip()] = v.strip()
                continue
            parts = line.split(" ")
            if parts[0] in ("rows", "dims", "storage", "kind"):
                meta[parts[0]] = parts[1]
            elif parts[0] == "row":
                keys.append(parts[1])
                labels.append(int(parts[2]))
                row_lines.append(parts[3:])
            else:
                raise ValidationError(f"{path}: unexpected line {line!r}")
    try:
        n_rows, dims = int(meta["rows"]), int(meta["dims"])
        storage, kind = meta["storage"], meta["kind"]
    except KeyError as exc:
        raise ValidationError(f"{path}: incomplete matrix header") from exc
    if len(keys) != n_rows:
        raise ValidationError(f"{path}: header says {n_rows} rows, found {len(keys)}")
    y = np.array(labels, dtype=np.int64)
    if storage == "sparse":
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        for cells in row_lines:
            for cell in cells:
                col, _, val = cell.partition(":")
                indices.append(int(col))
                data.append(float(val))
            indptr.append(len(indices))
        X = sp.csr_matrix(
            (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
            shape=(n_rows, dims),
        )
    elif storage == "dense":
        X = np.array([[float(v) for v in cells] for cells in row_lines], dtype=float)
        X = X.reshape((n_rows, dims))
    else:
        raise ValidationError(f"{path}: unknown storage kind {storage!r}")
    return FeatureMatrix(keys, X, y, kind), header
