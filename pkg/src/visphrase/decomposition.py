"""Linear decomposition of a phrase vector into adjective and noun vectors.

The decomposition map ``F_dec`` (``2*d x d``) is fit by ridge regression from
corpus phrase vectors to the concatenation ``[w_adj; w_noun]`` of their
constituents. One joint ridge fit is the same as two independent half-maps
sharing a penalty, since the least-squares problem separates by output row.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .embedding_store import EmbeddingSpace
from .errors import ContractError, FormatError, NumericalError
from .projection import ridge_solve
from .serialize import read_container, write_container

DEFAULT_GCV_GRID = tuple(float(x) for x in np.logspace(-3, 3, 13))


def balance_training(triples: Iterable[Sequence[str]], cap: int = 100) -> list:
    """Greedy frequency cap: keep a (phrase, adj, noun) triple only while
    both its adjective and its noun have been kept fewer than ``cap`` times.

    Input order encodes priority (e.g. corpus frequency).
    """
    if cap < 1:
        raise ContractError("cap must be at least 1")
    adj_count, noun_count = Counter(), Counter()
    kept = []
    for triple in triples:
        _, adj, noun = triple
        if adj_count[adj] < cap and noun_count[noun] < cap:
            adj_count[adj] += 1
            noun_count[noun] += 1
            kept.append(triple)
    return kept


@dataclass(frozen=True)
class PhraseTrainingSet:
    """Phrase vectors (rows) paired with their adjective and noun labels."""

    phrases: np.ndarray
    adjectives: tuple[str, ...]
    nouns: tuple[str, ...]
    word_space: EmbeddingSpace

    def __post_init__(self):
        phrases = np.atleast_2d(np.asarray(self.phrases, dtype=float))
        if not (phrases.shape[0] == len(self.adjectives) == len(self.nouns)):
            raise ContractError("phrase vectors, adjectives and nouns differ in length")
        if phrases.shape[1] != self.word_space.dim:
            raise ContractError(f"phrase dim {phrases.shape[1]} != word space dim {self.word_space.dim}")
        missing = sorted({w for w in (*self.adjectives, *self.nouns) if w not in self.word_space})
        if missing:
            raise ContractError(f"constituents not in word space: {missing[:5]}")
        object.__setattr__(self, "phrases", phrases)
        object.__setattr__(self, "adjectives", tuple(self.adjectives))
        object.__setattr__(self, "nouns", tuple(self.nouns))

    def __len__(self) -> int:
        return len(self.adjectives)

    @property
    def targets(self) -> np.ndarray:
        ws = self.word_space
        adj = ws.vectors[[ws.index(a) for a in self.adjectives]]
        noun = ws.vectors[[ws.index(n) for n in self.nouns]]
        return np.hstack([adj, noun])

    @classmethod
    def from_spaces(
        cls,
        phrase_space: EmbeddingSpace,
        triples: Sequence[Sequence[str]],
        word_space: EmbeddingSpace,
        cap: int | None = None,
    ) -> "PhraseTrainingSet":
        """Build from ``(phrase_label, adj, noun)`` triples, optionally capped."""
        if cap is not None:
            triples = balance_training(triples, cap)
        rows = [phrase_space.index(p) for p, _, _ in triples]
        return cls(
            phrase_space.vectors[rows],
            tuple(a for _, a, _ in triples),
            tuple(n for _, _, n in triples),
            word_space,
        )


@dataclass(frozen=True)
class DecompositionModel:
    F_dec: np.ndarray
    lam: float
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        F = np.asarray(self.F_dec, dtype=float)
        if F.ndim != 2 or F.shape[0] != 2 * F.shape[1]:
            raise ContractError(f"F_dec must have shape (2d, d), got {F.shape}")
        if not np.all(np.isfinite(F)):
            raise NumericalError("F_dec has non-finite entries")
        object.__setattr__(self, "F_dec", F)

    @property
    def dim(self) -> int:
        return self.F_dec.shape[1]


def gcv_scores(X, Y, grid: Sequence[float]) -> list[float]:
    """Generalized cross-validation ``n * RSS / (n - tr H)^2`` per grid value.

    Uses the thin SVD of ``X`` so each grid point costs O(rank * q).
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = X.shape[0]
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    Z = U.T @ Y
    outside = float(np.sum((Y - U @ Z) ** 2))
    znorm = np.sum(Z**2, axis=1)
    s2 = s**2
    scores = []
    for lam in grid:
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(s2 > 0, s2 / (s2 + lam), 0.0)
        rss = outside + float(np.sum((1 - f) ** 2 * znorm))
        dof = n - float(np.sum(f))
        scores.append(np.inf if dof <= 0 else n * rss / dof**2)
    return scores


def train_dec(
    data: PhraseTrainingSet,
    lam: float | str = "auto-gcv",
    grid: Sequence[float] = DEFAULT_GCV_GRID,
) -> DecompositionModel:
    if len(data) < 2:
        raise ContractError("decomposition needs at least 2 training triples")
    X, Y = data.phrases, data.targets
    meta = {"n_triples": len(data), "dim": data.word_space.dim}
    if lam == "auto-gcv":
        if len(grid) == 0:
            raise ContractError("GCV grid is empty")
        scores = gcv_scores(X, Y, grid)
        best = min(range(len(grid)), key=lambda i: (scores[i], grid[i]))
        lam = float(grid[best])
        meta.update(grid=[float(g) for g in grid], gcv=[float(s) for s in scores])
    elif isinstance(lam, str):
        raise ContractError(f"lambda must be a number or 'auto-gcv', got {lam!r}")
    F, fallback = ridge_solve(X, Y, float(lam))
    meta["pinv_fallback"] = fallback
    return DecompositionModel(F, float(lam), meta)


def decompose(model: DecompositionModel, w) -> tuple[np.ndarray, np.ndarray]:
    """Split ``F_dec w`` into its adjective and noun halves.

    ``w`` may be one vector or a matrix of row vectors.
    """
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != model.dim:
        raise ContractError(f"input dim {w.shape[-1]} != decomposition dim {model.dim}")
    out = w @ model.F_dec.T
    d = model.dim
    return out[..., :d], out[..., d:]


def save_dec(model: DecompositionModel, path, metadata: dict | None = None) -> None:
    meta = dict(model.metadata)
    meta.update(metadata or {})
    write_container(path, "dec", {"lambda": model.lam}, {"F_dec": model.F_dec}, meta)


def load_dec(path) -> DecompositionModel:
    variant, params, m, meta = read_container(path)
    if variant != "dec":
        raise ContractError(f"{path}: not a decomposition model (variant {variant!r})")
    return DecompositionModel(m["F_dec"], float(params["lambda"]), meta)


def load_triples(path) -> list[tuple[str, str, str]]:
    """Read ``phrase<TAB>adj<TAB>noun`` lines."""
    triples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 'phrase<TAB>adj<TAB>noun'")
            triples.append((parts[0], parts[1], parts[2]))
    return triples
