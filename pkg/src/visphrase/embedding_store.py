"""Labeled vector spaces, cosine similarity and nearest-neighbor retrieval.

An :class:`EmbeddingSpace` holds one vector per label, plus optional
part-of-speech tags and corpus frequency ranks. The same type serves as the
visual space (one vector per image or concept) and the linguistic space (one
vector per word). Vectors are stored exactly as given; callers that want unit
vectors ask for :meth:`EmbeddingSpace.normalized` explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import ContractError, EmptyPoolError, FormatError, UndefinedSimilarityError

POS_TAGS = ("ADJ", "NOUN", "OTHER")
FORMATS = ("word2vec", "tsv")


@dataclass(frozen=True)
class Ranking:
    """Scored candidate labels for one query, best first.

    Items are sorted by descending score; equal scores are ordered by
    ascending label so that output is identical across platforms.
    """

    query_id: str
    items: tuple[tuple[str, float], ...]

    def __post_init__(self):
        seen = set()
        prev = None
        for label, score in self.items:
            if label in seen:
                raise ContractError(f"duplicate label {label!r} in ranking {self.query_id!r}")
            seen.add(label)
            if prev is not None and (score > prev[1] or (score == prev[1] and label < prev[0])):
                raise ContractError(f"ranking {self.query_id!r} is not sorted at {label!r}")
            prev = (label, score)

    @classmethod
    def from_scores(cls, query_id: str, labels: Sequence[str], scores: Sequence[float]) -> "Ranking":
        if len(labels) != len(scores):
            raise ContractError("labels and scores differ in length")
        order = sorted(range(len(labels)), key=lambda i: (-scores[i], labels[i]))
        return cls(query_id, tuple((labels[i], float(scores[i])) for i in order))

    @property
    def labels(self) -> list[str]:
        return [label for label, _ in self.items]

    @property
    def scores(self) -> list[float]:
        return [score for _, score in self.items]

    def top(self, k: int) -> "Ranking":
        return Ranking(self.query_id, self.items[:k])

    def rank_of(self, label: str) -> int:
        """1-based position of ``label``; raises ContractError if absent."""
        for i, (item, _) in enumerate(self.items):
            if item == label:
                return i + 1
        raise ContractError(f"label {label!r} not in ranking {self.query_id!r}")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[tuple[str, float]]:
        return iter(self.items)


class EmbeddingSpace:
    """Immutable labeled collection of equal-length real vectors."""

    def __init__(
        self,
        labels: Sequence[str],
        vectors,
        pos: Mapping[str, str] | None = None,
        frequency_rank: Mapping[str, int] | None = None,
    ):
        labels = tuple(str(label) for label in labels)
        vectors = np.array(vectors, dtype=float)
        if vectors.ndim != 2 or vectors.shape[0] != len(labels):
            raise ContractError(
                f"expected a ({len(labels)}, dim) matrix, got shape {vectors.shape}"
            )
        if vectors.shape[1] < 1:
            raise ContractError("dimension must be positive")
        index = {}
        for i, label in enumerate(labels):
            if label in index:
                raise ContractError(f"duplicate label {label!r}")
            index[label] = i
        if pos is not None:
            missing = [label for label in labels if label not in pos]
            if missing:
                raise ContractError(f"no POS tag for {len(missing)} labels, e.g. {missing[0]!r}")
            bad = {pos[label] for label in labels} - set(POS_TAGS)
            if bad:
                raise ContractError(f"unknown POS tags {sorted(bad)}")
            pos = {label: pos[label] for label in labels}
        if frequency_rank is not None:
            frequency_rank = {label: int(frequency_rank[label]) for label in labels if label in frequency_rank}
            if any(r < 1 for r in frequency_rank.values()):
                raise ContractError("frequency ranks must be positive")
        vectors.flags.writeable = False
        self._labels = labels
        self._vectors = vectors
        self._index = index
        self._pos = pos
        self._frequency_rank = frequency_rank
        self._norms = None

    @property
    def labels(self) -> tuple[str, ...]:
        return self._labels

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    @property
    def dim(self) -> int:
        return self._vectors.shape[1]

    @property
    def pos(self) -> dict[str, str] | None:
        return None if self._pos is None else dict(self._pos)

    @property
    def frequency_rank(self) -> dict[str, int] | None:
        return None if self._frequency_rank is None else dict(self._frequency_rank)

    @property
    def norms(self) -> np.ndarray:
        if self._norms is None:
            norms = np.linalg.norm(self._vectors, axis=1)
            norms.flags.writeable = False
            self._norms = norms
        return self._norms

    def __len__(self) -> int:
        return len(self._labels)

    def __contains__(self, label) -> bool:
        return label in self._index

    def __iter__(self) -> Iterator[str]:
        return iter(self._labels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingSpace):
            return NotImplemented
        return (
            self._labels == other._labels
            and np.array_equal(self._vectors, other._vectors)
            and self._pos == other._pos
            and self._frequency_rank == other._frequency_rank
        )

    def __repr__(self) -> str:
        return f"EmbeddingSpace(n={len(self)}, dim={self.dim})"

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise ContractError(f"unknown label {label!r}") from None

    def vector(self, label: str) -> np.ndarray:
        return self._vectors[self.index(label)]

    def tag(self, label: str) -> str | None:
        if self._pos is None:
            return None
        return self._pos[label]

    def labels_with_pos(self, tag: str) -> list[str]:
        if self._pos is None:
            raise ContractError("space has no POS tags")
        return [label for label in self._labels if self._pos[label] == tag]

    def most_frequent(self, n: int, pos: str | None = None) -> set[str]:
        """The ``n`` best frequency-ranked labels, optionally of one POS."""
        if self._frequency_rank is None:
            raise ContractError("space has no frequency ranks")
        pool = self._labels if pos is None else self.labels_with_pos(pos)
        ranked = sorted((self._frequency_rank[l], l) for l in pool if l in self._frequency_rank)
        return {label for _, label in ranked[:n]}

    def subset(self, labels: Iterable[str]) -> "EmbeddingSpace":
        labels = list(labels)
        rows = [self.index(label) for label in labels]
        pos = None if self._pos is None else {l: self._pos[l] for l in labels}
        freq = None
        if self._frequency_rank is not None:
            freq = {l: self._frequency_rank[l] for l in labels if l in self._frequency_rank}
        return EmbeddingSpace(labels, self._vectors[rows], pos, freq)

    def with_pos(self, pos: Mapping[str, str]) -> "EmbeddingSpace":
        return EmbeddingSpace(self._labels, self._vectors, pos, self._frequency_rank)

    def with_frequency_rank(self, frequency_rank: Mapping[str, int]) -> "EmbeddingSpace":
        return EmbeddingSpace(self._labels, self._vectors, self._pos, frequency_rank)

    def normalized(self) -> "EmbeddingSpace":
        """Copy with every nonzero vector scaled to unit length."""
        norms = self.norms.copy()
        norms[norms == 0] = 1.0
        return EmbeddingSpace(self._labels, self._vectors / norms[:, None], self._pos, self._frequency_rank)


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise ContractError(f"cosine needs equal-length vectors, got {u.shape} and {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise UndefinedSimilarityError("cosine is undefined for a zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def _candidate_rows(space: EmbeddingSpace, pos_filter, restrict) -> np.ndarray:
    if pos_filter is not None and space.pos is None:
        raise ContractError("POS filter requested on a space without POS tags")
    pos = space._pos
    keep = []
    for i, label in enumerate(space.labels):
        if pos_filter is not None and pos[label] != pos_filter:
            continue
        if restrict is not None and label not in restrict:
            continue
        if space.norms[i] == 0:
            # cosine is undefined for zero vectors, so they never enter the pool
            continue
        keep.append(i)
    if not keep:
        raise EmptyPoolError(f"no candidates left (pos={pos_filter!r}, restrict={restrict is not None})")
    return np.array(keep, dtype=int)


def nearest_batch(
    space: EmbeddingSpace,
    queries,
    k: int,
    pos_filter: str | None = None,
    restrict: Iterable[str] | None = None,
    query_ids: Sequence[str] | None = None,
) -> list[Ranking]:
    """Top-``k`` cosine neighbors for every row of ``queries``."""
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if queries.shape[1] != space.dim:
        raise ContractError(f"query dim {queries.shape[1]} != space dim {space.dim}")
    if k < 1:
        raise ContractError("k must be at least 1")
    if restrict is not None:
        restrict = set(restrict)
    if query_ids is None:
        query_ids = [str(i) for i in range(len(queries))]
    elif len(query_ids) != len(queries):
        raise ContractError("query_ids and queries differ in length")
    qnorms = np.linalg.norm(queries, axis=1)
    if np.any(qnorms == 0):
        raise UndefinedSimilarityError("cosine is undefined for a zero query vector")

    rows = _candidate_rows(space, pos_filter, restrict)
    labels = [space.labels[i] for i in rows]
    # tie-break key: position of each candidate label in sorted order
    lex = np.empty(len(rows), dtype=int)
    lex[np.argsort(np.array(labels, dtype=object), kind="stable")] = np.arange(len(rows))
    sims = (queries @ space.vectors[rows].T) / np.outer(qnorms, space.norms[rows])
    np.clip(sims, -1.0, 1.0, out=sims)
    k = min(k, len(rows))

    out = []
    for qid, row in zip(query_ids, sims):
        order = np.lexsort((lex, -row))[:k]
        out.append(Ranking(qid, tuple((labels[j], float(row[j])) for j in order)))
    return out


def nearest(
    space: EmbeddingSpace,
    query,
    k: int,
    pos_filter: str | None = None,
    restrict: Iterable[str] | None = None,
    query_id: str = "",
) -> Ranking:
    """Top-``k`` labels of ``space`` by cosine to ``query``.

    ``pos_filter`` keeps only labels with that tag and ``restrict`` keeps only
    labels in the given set. Fewer than ``k`` items come back only when the
    filtered pool is smaller than ``k``.
    """
    query = np.asarray(query, dtype=float)
    if query.ndim != 1:
        raise ContractError("query must be a single vector")
    return nearest_batch(space, query[None, :], k, pos_filter, restrict, [query_id])[0]


def _parse_row(parts: list[str], lineno: int, path) -> tuple[str, list[float]]:
    label = parts[0]
    try:
        values = [float(x) for x in parts[1:]]
    except ValueError as exc:
        raise FormatError(f"{path}:{lineno}: non-numeric value ({exc})") from None
    return label, values


def load_space(path, format: str = "word2vec") -> EmbeddingSpace:
    """Read a space from ``word2vec`` text (``<count> <dim>`` header,
    space-separated rows) or ``tsv`` (``label<TAB>v1<TAB>...``) format."""
    if format not in FORMATS:
        raise ContractError(f"unknown format {format!r}; expected one of {FORMATS}")
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n").rstrip("\r") for line in fh]

    labels, rows = [], []
    declared_count = declared_dim = None
    start = 0
    if format == "word2vec":
        if not lines:
            raise FormatError(f"{path}: empty file, expected '<count> <dim>' header")
        header = lines[0].split()
        try:
            declared_count, declared_dim = (int(x) for x in header)
        except ValueError:
            raise FormatError(f"{path}:1: bad header {lines[0]!r}") from None
        if declared_dim < 1 or declared_count < 0:
            raise FormatError(f"{path}:1: bad header {lines[0]!r}")
        start = 1

    seen = set()
    for lineno, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        parts = line.split(" ") if format == "word2vec" else line.split("\t")
        parts = [p for p in parts if p != ""] if format == "word2vec" else parts
        label, values = _parse_row(parts, lineno, path)
        dim = declared_dim if declared_dim is not None else (len(rows[0]) if rows else len(values))
        if len(values) != dim:
            raise FormatError(f"{path}:{lineno}: {label!r} has {len(values)} values, expected {dim}")
        if label in seen:
            raise FormatError(f"{path}:{lineno}: duplicate label {label!r}")
        seen.add(label)
        labels.append(label)
        rows.append(values)

    if declared_count is not None and declared_count != len(rows):
        raise FormatError(f"{path}: header declares {declared_count} rows, found {len(rows)}")
    if not rows:
        if declared_dim is None:
            raise FormatError(f"{path}: no vectors")
        return EmbeddingSpace([], np.zeros((0, declared_dim)))
    return EmbeddingSpace(labels, np.array(rows, dtype=float))


def save_space(space: EmbeddingSpace, path, format: str = "word2vec") -> None:
    """Write ``space`` so that :func:`load_space` reads back identical floats."""
    if format not in FORMATS:
        raise ContractError(f"unknown format {format!r}; expected one of {FORMATS}")
    sep = " " if format == "word2vec" else "\t"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if format == "word2vec":
            fh.write(f"{len(space)} {space.dim}\n")
        for label, row in zip(space.labels, space.vectors):
            forbidden = (" ", "\t", "\n") if format == "word2vec" else ("\t", "\n")
            if any(ch in label for ch in forbidden):
                raise FormatError(f"label {label!r} cannot be written in {format} format")
            fh.write(label + sep + sep.join(repr(float(x)) for x in row) + "\n")


def load_pos(path) -> dict[str, str]:
    """Read a ``label<TAB>tag`` sidecar file."""
    tags = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[1] not in POS_TAGS:
                raise FormatError(f"{path}:{lineno}: expected 'label<TAB>{{ADJ,NOUN,OTHER}}'")
            if parts[0] in tags:
                raise FormatError(f"{path}:{lineno}: duplicate label {parts[0]!r}")
            tags[parts[0]] = parts[1]
    return tags


def save_pos(pos: Mapping[str, str], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for label, tag in pos.items():
            fh.write(f"{label}\t{tag}\n")
