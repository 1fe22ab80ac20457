"""Attribute-centric image representations and linear classification.

An image's attribute vector holds the cosine of its decomposed adjective
vector with every adjective of a vocabulary, sparsified by zeroing entries
below a mean cosine. It can be used alone or concatenated with the raw
visual features and reduced by SVD (fusion) before a one-vs-all linear SVM.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decomposition import DecompositionModel, decompose
from .embedding_store import EmbeddingSpace
from .errors import ContractError, FormatError, StateError
from .preprocess import SVDResult, svd_reduce
from .projection import ProjectionModel, to_target
from .serialize import read_container, write_container


@dataclass(frozen=True)
class AttributeVector:
    image_id: str
    values: np.ndarray
    vocabulary: tuple[str, ...]
    sparsity_threshold: float

    def nonzero(self) -> dict[str, float]:
        return {a: float(v) for a, v in zip(self.vocabulary, self.values) if v != 0}


def _cosines(queries: np.ndarray, vocab: np.ndarray) -> np.ndarray:
    qn = np.linalg.norm(queries, axis=1, keepdims=True)
    vn = np.linalg.norm(vocab, axis=1)
    qn[qn == 0] = 1.0
    vn[vn == 0] = 1.0
    return (queries / qn) @ (vocab / vn[:, None]).T


def attribute_vectors(
    proj: ProjectionModel,
    dec: DecompositionModel,
    images,
    adjectives: EmbeddingSpace,
    image_ids: Sequence[str] | None = None,
    scope: str = "image",
) -> list[AttributeVector]:
    """Sparse adjective-appropriateness vectors for a batch of images.

    ``scope="image"`` thresholds each image at the mean of its own cosines;
    ``scope="global"`` uses the mean cosine over the whole batch. Entries
    strictly below the threshold are set to zero.
    """
    images = np.atleast_2d(np.asarray(images, dtype=float))
    if image_ids is None:
        image_ids = [str(i) for i in range(len(images))]
    if len(image_ids) != len(images):
        raise ContractError("image_ids and images differ in length")
    w_adj, _ = decompose(dec, to_target(proj, images))
    if adjectives.dim != dec.dim:
        raise ContractError(f"adjective space dim {adjectives.dim} != decomposition dim {dec.dim}")
    sims = _cosines(np.atleast_2d(w_adj), adjectives.vectors)
    if scope == "image":
        thresholds = sims.mean(axis=1)
    elif scope == "global":
        thresholds = np.full(len(sims), sims.mean())
    else:
        raise ContractError(f"unknown sparsification scope {scope!r}")
    vocab = tuple(adjectives.labels)
    out = []
    for iid, row, t in zip(image_ids, sims, thresholds):
        values = np.where(row < t, 0.0, row)
        out.append(AttributeVector(iid, values, vocab, float(t)))
    return out


def attribute_vector(proj, dec, image, adjectives: EmbeddingSpace, image_id: str = "", scope: str = "image") -> AttributeVector:
    return attribute_vectors(proj, dec, np.asarray(image, dtype=float)[None, :], adjectives, [image_id], scope)[0]


class Fusion:
    """Concatenate raw and attribute features and reduce them with an SVD
    basis fitted on training rows only."""

    def __init__(self, target_dim: int = 100):
        if target_dim < 1:
            raise ContractError("target_dim must be positive")
        self.target_dim = target_dim
        self._svd: SVDResult | None = None
        self._raw_dim = self._attr_dim = None

    @staticmethod
    def _concat(raw, attr) -> np.ndarray:
        raw = np.atleast_2d(np.asarray(raw, dtype=float))
        if isinstance(attr, AttributeVector):
            attr = attr.values
        elif isinstance(attr, (list, tuple)) and attr and isinstance(attr[0], AttributeVector):
            attr = np.array([a.values for a in attr])
        attr = np.atleast_2d(np.asarray(attr, dtype=float))
        if raw.shape[0] != attr.shape[0]:
            raise ContractError("raw and attribute feature counts differ")
        return np.hstack([raw, attr])

    def fit(self, raw, attr) -> "Fusion":
        x = self._concat(raw, attr)
        if self.target_dim > min(x.shape):
            raise ContractError(f"target_dim {self.target_dim} exceeds min{x.shape} of the training matrix")
        self._raw_dim = np.atleast_2d(raw).shape[1]
        self._attr_dim = x.shape[1] - self._raw_dim
        self._svd = svd_reduce(x, self.target_dim)
        return self

    @property
    def basis(self) -> np.ndarray:
        if self._svd is None:
            raise StateError("fusion basis has not been fitted")
        return self._svd.basis

    def fuse(self, raw, attr) -> np.ndarray:
        basis = self.basis
        x = self._concat(raw, attr)
        if x.shape[1] != basis.shape[0] or np.atleast_2d(raw).shape[1] != self._raw_dim:
            raise ContractError(f"expected {self._raw_dim}+{self._attr_dim} features, got {x.shape[1]}")
        return x @ basis


def fuse(raw, attr, fusion: Fusion) -> np.ndarray:
    """Fused representation of one image (or a batch) under a fitted basis."""
    out = fusion.fuse(raw, attr)
    return out[0] if np.asarray(raw).ndim == 1 else out


@dataclass(frozen=True)
class LinearClassifier:
    classes: tuple[str, ...]
    weights: np.ndarray
    bias: np.ndarray
    reg: float
    epochs: int
    seed: int
    metadata: dict = field(default_factory=dict, compare=False)

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.weights.shape[1]:
            raise ContractError(f"feature dim {X.shape[1]} != classifier dim {self.weights.shape[1]}")
        return X @ self.weights.T + self.bias

    def predict(self, X) -> list[str]:
        # classes are sorted, and argmax returns the first maximum
        idx = np.argmax(self.decision_function(X), axis=1)
        return [self.classes[i] for i in idx]


def train_ova(
    features,
    labels: Sequence[str],
    reg: float = 1e-3,
    seed: int = 0,
    epochs: int = 50,
) -> LinearClassifier:
    """One-vs-all linear SVMs trained by stochastic subgradient descent.

    Each binary problem minimizes ``reg/2 ||w||^2 + mean(hinge)`` with the
    Pegasos step size ``1 / (reg * t)``; a constant feature supplies the
    bias. All classes share one seeded visiting order, so the result is
    bit-identical for a fixed seed.
    """
    X = np.atleast_2d(np.asarray(features, dtype=float))
    labels = list(labels)
    if X.shape[0] != len(labels):
        raise ContractError("features and labels differ in length")
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise ContractError("one-vs-all needs at least 2 classes")
    if reg <= 0:
        raise ContractError("reg must be positive")
    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    cls_index = {c: i for i, c in enumerate(classes)}
    Y = -np.ones((n, len(classes)))
    Y[np.arange(n), [cls_index[l] for l in labels]] = 1.0

    rng = np.random.default_rng(seed)
    W = np.zeros((len(classes), d + 1))
    radius = 1.0 / np.sqrt(reg)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (reg * t)
            x, y = Xa[i], Y[i]
            violated = y * (W @ x) < 1.0
            W *= 1.0 - eta * reg
            W[violated] += eta * y[violated, None] * x
            norms = np.linalg.norm(W, axis=1)
            over = norms > radius
            W[over] *= (radius / norms[over])[:, None]
    return LinearClassifier(classes, W[:, :d].copy(), W[:, d].copy(), float(reg), int(epochs), int(seed))


def accuracy(clf: LinearClassifier, X, y: Sequence[str]) -> float:
    pred = clf.predict(X)
    return float(np.mean([p == t for p, t in zip(pred, y)]))


def select_reg(
    X, y: Sequence[str], grid: Sequence[float] = (1e-4, 1e-3, 1e-2, 1e-1), holdout: float = 0.25, seed: int = 0, epochs: int = 50
) -> float:
    """Regularization strength with the best accuracy on a seeded held-out
    split; ties go to the earlier grid entry."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = list(y)
    n = len(y)
    n_test = int(round(holdout * n))
    if n_test < 1 or n_test >= n:
        raise ContractError("holdout leaves no train or test samples")
    perm = np.random.default_rng(seed).permutation(n)
    test, train = perm[:n_test], perm[n_test:]
    ytr = [y[i] for i in train]
    if len(set(ytr)) < 2:
        return float(grid[0])
    scores = []
    for reg in grid:
        clf = train_ova(X[train], ytr, reg, seed, epochs)
        scores.append(accuracy(clf, X[test], [y[i] for i in test]))
    best = max(range(len(grid)), key=lambda i: (scores[i], -i))
    return float(grid[best])


def select_fusion_dim(
    raw, attr, y: Sequence[str], dims: Sequence[int], reg: float = 1e-3, holdout: float = 0.25, seed: int = 0, epochs: int = 50
) -> int:
    """Fusion target dimension with the best held-out accuracy; the basis is
    refit on the inner training part for every candidate. Ties go to the
    earlier grid entry."""
    raw = np.atleast_2d(np.asarray(raw, dtype=float))
    attr = np.atleast_2d(np.asarray(attr, dtype=float))
    y = list(y)
    n = len(y)
    n_test = int(round(holdout * n))
    if n_test < 1 or n_test >= n:
        raise ContractError("holdout leaves no train or test samples")
    perm = np.random.default_rng(seed).permutation(n)
    test, train = perm[:n_test], perm[n_test:]
    ytr, yte = [y[i] for i in train], [y[i] for i in test]
    if len(set(ytr)) < 2:
        return int(dims[0])
    scores = []
    for dim in dims:
        fusion = Fusion(int(dim)).fit(raw[train], attr[train])
        clf = train_ova(fusion.fuse(raw[train], attr[train]), ytr, reg, seed, epochs)
        scores.append(accuracy(clf, fusion.fuse(raw[test], attr[test]), yte))
    best = max(range(len(dims)), key=lambda i: (scores[i], -i))
    return int(dims[best])


@dataclass(frozen=True)
class ConfusionReport:
    classes: tuple[str, ...]
    counts: np.ndarray
    proportions: np.ndarray
    accuracy: float

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "counts": self.counts.astype(int).tolist(),
            "proportions": self.proportions.tolist(),
            "accuracy": self.accuracy,
        }


def confusion_matrix(clf: LinearClassifier, X, y: Sequence[str]) -> ConfusionReport:
    """Row-normalized confusion proportions (gold rows, predicted columns)."""
    y = list(y)
    unknown = sorted(set(y) - set(clf.classes))
    if unknown:
        raise ContractError(f"test classes unknown to the classifier: {unknown}")
    if not y:
        raise ContractError("empty test set")
    index = {c: i for i, c in enumerate(clf.classes)}
    counts = np.zeros((len(clf.classes), len(clf.classes)))
    for gold, pred in zip(y, clf.predict(X)):
        counts[index[gold], index[pred]] += 1
    totals = counts.sum(axis=1, keepdims=True)
    props = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    return ConfusionReport(clf.classes, counts, props, float(np.trace(counts) / len(y)))


def save_classifier(clf: LinearClassifier, path, metadata: dict | None = None) -> None:
    meta = dict(clf.metadata)
    meta.update(metadata or {})
    params = {"classes": list(clf.classes), "reg": clf.reg, "epochs": clf.epochs, "seed": clf.seed}
    write_container(path, "ova-svm", params, {"weights": clf.weights, "bias": clf.bias}, meta)


def load_classifier(path) -> LinearClassifier:
    variant, p, m, meta = read_container(path)
    if variant != "ova-svm":
        raise ContractError(f"{path}: not a classifier (variant {variant!r})")
    return LinearClassifier(tuple(p["classes"]), m["weights"], m["bias"], float(p["reg"]), int(p["epochs"]), int(p["seed"]), meta)


def save_attribute_vectors(vectors: Sequence[AttributeVector], path, header: str | None = None) -> None:
    """Sparse TSV ``image_id<TAB>adjective<TAB>value``; zeros are omitted."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write(f"# {header}\n")
        for v in vectors:
            for adj, value in zip(v.vocabulary, v.values):
                if value != 0:
                    fh.write(f"{v.image_id}\t{adj}\t{float(value)!r}\n")


def load_attribute_vectors(path, vocabulary: Sequence[str]) -> dict[str, np.ndarray]:
    """Dense rows, in ``vocabulary`` order, keyed by image id."""
    index = {a: i for i, a in enumerate(vocabulary)}
    out: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[1] not in index:
                raise FormatError(f"{path}:{lineno}: expected 'image_id<TAB>adjective<TAB>value' with a known adjective")
            row = out.setdefault(parts[0], np.zeros(len(vocabulary)))
            try:
                row[index[parts[1]]] = float(parts[2])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: bad value {parts[2]!r}") from None
    return out
