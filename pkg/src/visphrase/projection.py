"""Cross-modal mapping from a visual space to a linguistic space.

Two mapping families are provided:

* Ridge regression, a linear map ``F`` (``d2 x d1``) with an L2 penalty,
  applied as ``w' = F v``.
* Normalized CCA, a pair of projections into a shared canonical space whose
  directions are scaled by a power of the canonical correlations. Annotation
  with an nCCA model compares the projected image against the projected
  word vectors inside that shared space.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .embedding_store import EmbeddingSpace
from .errors import ContractError, NumericalError, RankDeficiencyWarning
from .serialize import read_container, write_container

DEFAULT_LAMBDA_GRID = tuple(float(x) for x in np.logspace(-3, 3, 9))
DEFAULT_POWER_GRID = (0.0, 0.25, 0.5, 1.0, 2.0)
# relative covariance ridge: eps = COV_REG * trace(C) / d
COV_REG = 1e-8


@dataclass(frozen=True)
class PairedDataset:
    """Aligned (source vector, target label) pairs.

    ``sources`` is an ``(n, d1)`` matrix whose row ``i`` is paired with the
    word ``labels[i]`` of ``target_space``. Labels may repeat.
    """

    sources: np.ndarray
    labels: tuple[str, ...]
    target_space: EmbeddingSpace
    ids: tuple[str, ...] | None = None

    def __post_init__(self):
        sources = np.atleast_2d(np.asarray(self.sources, dtype=float))
        labels = tuple(self.labels)
        if sources.shape[0] != len(labels):
            raise ContractError(f"{sources.shape[0]} source vectors but {len(labels)} labels")
        missing = sorted({l for l in labels if l not in self.target_space})
        if missing:
            raise ContractError(f"target labels not in target space: {missing[:5]}")
        if self.ids is not None and len(self.ids) != len(labels):
            raise ContractError("ids and labels differ in length")
        object.__setattr__(self, "sources", sources)
        object.__setattr__(self, "labels", labels)
        if self.ids is not None:
            object.__setattr__(self, "ids", tuple(self.ids))

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def targets(self) -> np.ndarray:
        rows = [self.target_space.index(l) for l in self.labels]
        return self.target_space.vectors[rows]

    @property
    def source_dim(self) -> int:
        return self.sources.shape[1]

    @property
    def target_dim(self) -> int:
        return self.target_space.dim

    def take(self, idx) -> "PairedDataset":
        idx = np.asarray(idx, dtype=int)
        ids = None if self.ids is None else tuple(self.ids[i] for i in idx)
        return PairedDataset(self.sources[idx], tuple(self.labels[i] for i in idx), self.target_space, ids)

    def without_label(self, label: str) -> "PairedDataset":
        keep = [i for i, l in enumerate(self.labels) if l != label]
        return self.take(keep)

    @classmethod
    def from_spaces(cls, source_space: EmbeddingSpace, pairs: Sequence[tuple[str, str]], target_space: EmbeddingSpace):
        """Build from ``(source_label, target_label)`` pairs."""
        ids = [s for s, _ in pairs]
        rows = [source_space.index(s) for s in ids]
        return cls(source_space.vectors[rows], tuple(t for _, t in pairs), target_space, tuple(ids))


@dataclass(frozen=True)
class RidgeModel:
    F: np.ndarray
    lam: float
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def source_dim(self) -> int:
        return self.F.shape[1]

    @property
    def target_dim(self) -> int:
        return self.F.shape[0]


@dataclass(frozen=True)
class NCCAModel:
    """Normalized CCA: ``A`` acts on target-side (word) vectors, ``B`` on
    source-side (image) vectors, both after centering."""

    A: np.ndarray
    B: np.ndarray
    sigma: np.ndarray
    power: float
    mean_x: np.ndarray
    mean_y: np.ndarray
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def source_dim(self) -> int:
        return self.B.shape[0]

    @property
    def target_dim(self) -> int:
        return self.A.shape[0]

    @property
    def shared_dim(self) -> int:
        return self.A.shape[1]


ProjectionModel = Union[RidgeModel, NCCAModel]


def ridge_solve(X, Y, lam: float) -> tuple[np.ndarray, bool]:
    """Closed-form ridge map ``F`` with ``Y ~ X F^T``.

    ``X`` is ``(n, p)``, ``Y`` is ``(n, q)``; returns ``F`` of shape ``(q, p)``
    minimizing ``||Y^T - F X^T||^2 + lam ||F||^2`` and a flag telling whether
    the pseudoinverse fallback was used (``lam == 0`` and rank-deficient X).
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if lam < 0:
        raise ContractError("lambda must be non-negative")
    p = X.shape[1]
    if lam == 0 and np.linalg.matrix_rank(X) < p:
        warnings.warn("rank-deficient system at lambda=0; using the pseudoinverse", RankDeficiencyWarning, stacklevel=3)
        return (np.linalg.pinv(X) @ Y).T, True
    G = X.T @ X + lam * np.eye(p)
    try:
        F = np.linalg.solve(G, X.T @ Y).T
    except np.linalg.LinAlgError:
        warnings.warn("singular ridge system; using the pseudoinverse", RankDeficiencyWarning, stacklevel=3)
        return (np.linalg.pinv(X) @ Y).T, True
    return F, False


def _fold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, folds)


def cv_errors(data: PairedDataset, grid: Sequence[float], folds: int = 5, seed: int = 0) -> list[float]:
    """Mean held-out squared error (per pair) of ridge for each grid value."""
    if folds < 2:
        raise ContractError("need at least 2 folds")
    if len(data) < folds:
        raise ContractError(f"{len(data)} pairs cannot be split into {folds} folds")
    V, W = data.sources, data.targets
    parts = _fold_indices(len(data), folds, seed)
    errors = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficiencyWarning)
        for lam in grid:
            sse = 0.0
            for k, test in enumerate(parts):
                train = np.concatenate([p for j, p in enumerate(parts) if j != k])
                F, _ = ridge_solve(V[train], W[train], lam)
                resid = W[test] - V[test] @ F.T
                sse += float(np.sum(resid**2))
            errors.append(sse / len(data))
    return errors


def tune_lambda(data: PairedDataset, grid: Sequence[float] = DEFAULT_LAMBDA_GRID, folds: int = 5, seed: int = 0) -> float:
    """Grid value with the lowest k-fold error; ties go to the smallest value."""
    if len(grid) == 0:
        raise ContractError("lambda grid is empty")
    errors = cv_errors(data, grid, folds, seed)
    best = min(range(len(grid)), key=lambda i: (errors[i], grid[i]))
    return float(grid[best])


def train_ridge(
    data: PairedDataset,
    lam: float | str = "auto",
    grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    folds: int = 5,
    seed: int = 0,
) -> RidgeModel:
    if len(data) < 2:
        raise ContractError("ridge needs at least 2 pairs")
    meta = {"n_pairs": len(data), "source_dim": data.source_dim, "target_dim": data.target_dim}
    if lam == "auto":
        errors = cv_errors(data, grid, folds, seed)
        best = min(range(len(grid)), key=lambda i: (errors[i], grid[i]))
        lam = float(grid[best])
        meta.update(grid=[float(g) for g in grid], cv_errors=errors, folds=folds, seed=seed)
    elif isinstance(lam, str):
        raise ContractError(f"lambda must be a number or 'auto', got {lam!r}")
    F, fallback = ridge_solve(data.sources, data.targets, float(lam))
    if not np.all(np.isfinite(F)):
        raise NumericalError("ridge solution is not finite")
    meta["pinv_fallback"] = fallback
    return RidgeModel(F, float(lam), meta)


def _inv_sqrt(C: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(C)
    if evals.min() <= 0 or not np.all(np.isfinite(evals)):
        raise NumericalError(
            f"covariance not positive definite after regularization (min eigenvalue {evals.min():.3g})"
        )
    return (evecs / np.sqrt(evals)) @ evecs.T


def _regularized_cov(Z: np.ndarray, reg: float) -> np.ndarray:
    n, d = Z.shape
    C = Z.T @ Z / max(n - 1, 1)
    if np.trace(C) <= 0:
        raise NumericalError("zero-variance input; covariance cannot be regularized")
    return C + reg * np.trace(C) / d * np.eye(d)


def cca(X, Y, n_components: int | None = None, reg: float = COV_REG):
    """Whitened CCA of row-paired views ``X`` (n, dx) and ``Y`` (n, dy).

    Returns ``(A, B, sigma, mean_x, mean_y)`` where ``(X - mean_x) @ A`` and
    ``(Y - mean_y) @ B`` have unit variance per column and canonical
    correlations ``sigma`` in non-increasing order. Column signs are fixed so
    that the largest-magnitude entry of each left singular vector is
    non-negative.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[0] != Y.shape[0]:
        raise ContractError("views must have the same number of rows")
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - mx, Y - my
    n = X.shape[0]
    Cxx = _regularized_cov(Xc, reg)
    Cyy = _regularized_cov(Yc, reg)
    Cxy = Xc.T @ Yc / max(n - 1, 1)
    Wx, Wy = _inv_sqrt(Cxx), _inv_sqrt(Cyy)
    U, s, Vt = np.linalg.svd(Wx @ Cxy @ Wy, full_matrices=False)
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U, V = U * signs, Vt.T * signs
    r = len(s) if n_components is None else n_components
    if not 1 <= r <= len(s):
        raise ContractError(f"n_components must lie in [1, {len(s)}]")
    return Wx @ U[:, :r], Wy @ V[:, :r], s[:r], mx, my


def train_ncca(
    data: PairedDataset,
    power: float | str = "auto",
    grid: Sequence[float] = DEFAULT_POWER_GRID,
    n_components: int | None = None,
    holdout: float = 0.2,
    seed: int = 0,
    reg: float = COV_REG,
) -> NCCAModel:
    """Fit nCCA between word vectors (target side) and image vectors.

    ``power="auto"`` picks the grid value with the best held-out top-1
    retrieval accuracy, ties to the earlier grid entry.
    """
    meta = {"n_pairs": len(data), "source_dim": data.source_dim, "target_dim": data.target_dim, "reg": reg}
    if power == "auto":
        power, scores = tune_power(data, grid, holdout=holdout, seed=seed, n_components=n_components, reg=reg)
        meta.update(grid=[float(g) for g in grid], holdout_accuracy=scores, holdout=holdout, seed=seed)
    elif isinstance(power, str):
        raise ContractError(f"power must be a number or 'auto', got {power!r}")
    A, B, s, mx, my = cca(data.targets, data.sources, n_components, reg)
    scale = s ** float(power)
    return NCCAModel(A * scale, B * scale, s, float(power), mx, my, meta)


def tune_power(
    data: PairedDataset,
    grid: Sequence[float] = DEFAULT_POWER_GRID,
    holdout: float = 0.2,
    seed: int = 0,
    n_components: int | None = None,
    reg: float = COV_REG,
) -> tuple[float, list[float]]:
    if len(grid) == 0:
        raise ContractError("power grid is empty")
    n = len(data)
    n_test = int(round(holdout * n))
    if n_test < 1 or n_test >= n:
        raise ContractError(f"holdout fraction {holdout} leaves no train or test pairs")
    perm = np.random.default_rng(seed).permutation(n)
    test, train = data.take(perm[:n_test]), data.take(perm[n_test:])
    candidates = sorted(set(data.labels))
    cand_vecs = data.target_space.subset(candidates).vectors
    gold = np.array([candidates.index(l) for l in test.labels])
    A0, B0, s, mx, my = cca(train.targets, train.sources, n_components, reg)
    scores = []
    for p in grid:
        scale = s ** float(p)
        q = (test.sources - my) @ (B0 * scale)
        c = (cand_vecs - mx) @ (A0 * scale)
        sims = _row_normalize(q) @ _row_normalize(c).T
        scores.append(float(np.mean(np.argmax(sims, axis=1) == gold)))
    best = max(range(len(grid)), key=lambda i: (scores[i], -i))
    return float(grid[best]), scores


def _row_normalize(a: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(a, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return a / norms


def _check_source(model: ProjectionModel, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != model.source_dim:
        raise ContractError(f"input dim {v.shape[-1]} != model source dim {model.source_dim}")
    return v


def project(model: ProjectionModel, v) -> np.ndarray:
    """Map image vector(s) into the space where labels are compared.

    For Ridge this is the linguistic space (``F v``). For nCCA it is the
    shared canonical space; compare against :func:`comparison_space`.
    Accepts a single vector or a matrix of row vectors.
    """
    v = _check_source(model, v)
    if isinstance(model, RidgeModel):
        return v @ model.F.T
    return (v - model.mean_y) @ model.B


def to_target(model: ProjectionModel, v) -> np.ndarray:
    """Map image vector(s) to linguistic-space coordinates.

    nCCA models reconstruct target coordinates from the shared space by
    least squares through the pseudoinverse of ``A``.
    """
    if isinstance(model, RidgeModel):
        return project(model, v)
    shared = project(model, v)
    return model.mean_x + shared @ np.linalg.pinv(model.A)


def comparison_space(model: ProjectionModel, space: EmbeddingSpace) -> EmbeddingSpace:
    """The label space that :func:`project` outputs should be searched in."""
    if space.dim != model.target_dim:
        raise ContractError(f"space dim {space.dim} != model target dim {model.target_dim}")
    if isinstance(model, RidgeModel):
        return space
    return EmbeddingSpace(space.labels, (space.vectors - model.mean_x) @ model.A, space.pos, space.frequency_rank)


def save_model(model: ProjectionModel, path, metadata: dict | None = None) -> None:
    meta = dict(model.metadata)
    meta.update(metadata or {})
    if isinstance(model, RidgeModel):
        write_container(path, "ridge", {"lambda": model.lam}, {"F": model.F}, meta)
    else:
        write_container(
            path,
            "ncca",
            {"power": model.power},
            {"A": model.A, "B": model.B, "sigma": model.sigma, "mean_x": model.mean_x, "mean_y": model.mean_y},
            meta,
        )


def load_model(path) -> ProjectionModel:
    variant, params, m, meta = read_container(path)
    if variant == "ridge":
        return RidgeModel(m["F"], float(params["lambda"]), meta)
    if variant == "ncca":
        return NCCAModel(m["A"], m["B"], m["sigma"], float(params["power"]), m["mean_x"], m["mean_y"], meta)
    raise ContractError(f"{path}: not a projection model (variant {variant!r})")
