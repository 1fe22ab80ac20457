"""Count-matrix post-processing: positive PMI weighting and truncated SVD."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding_store import EmbeddingSpace
from .errors import ContractError, DegenerateInputError, FormatError, RankDeficiencyWarning


@dataclass(frozen=True)
class CountMatrix:
    rows: tuple[str, ...]
    cols: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.rows), len(self.cols)):
            raise ContractError(f"values shape {values.shape} does not match labels")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ContractError("counts must be finite and non-negative")
        values.flags.writeable = False
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "cols", tuple(self.cols))
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class SVDResult:
    """Truncated SVD of a matrix.

    ``reduced`` holds ``U_k * S_k`` (one row per input row) and ``basis`` holds
    ``V_k``; a new row ``x`` is folded in as ``x @ basis``. ``rank_deficient``
    is set when fewer than ``k`` nonzero singular values exist, in which case
    the surplus columns of ``reduced`` and ``basis`` are zero.
    """

    reduced: np.ndarray
    basis: np.ndarray
    singular_values: np.ndarray
    rank_deficient: bool = False

    def fold_in(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        if rows.shape[-1] != self.basis.shape[0]:
            raise ContractError(f"row dim {rows.shape[-1]} != basis dim {self.basis.shape[0]}")
        return rows @ self.basis


def ppmi(m: CountMatrix) -> CountMatrix:
    """Positive pointwise mutual information, natural log, no smoothing."""
    x = m.values
    total = x.sum()
    if total <= 0:
        raise DegenerateInputError("PPMI of an all-zero count matrix")
    r = x.sum(axis=1, keepdims=True)
    c = x.sum(axis=0, keepdims=True)
    out = np.zeros_like(x)
    nz = x > 0
    # zero cells stay zero; nonzero cells imply nonzero margins
    expected = (r @ c)[nz]
    out[nz] = np.maximum(0.0, np.log(x[nz] * total / expected))
    return CountMatrix(m.rows, m.cols, out)


def _fix_signs(u: np.ndarray, vt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # largest-|.| entry of each right singular vector made non-negative
    idx = np.argmax(np.abs(vt), axis=1)
    signs = np.sign(vt[np.arange(vt.shape[0]), idx])
    signs[signs == 0] = 1.0
    return u * signs, vt * signs[:, None]


def svd_reduce(m, k: int, tol: float | None = None) -> SVDResult:
    """Keep the top ``k`` singular directions of ``m``.

    Returns ``U_k S_k`` as the reduced rows and ``V_k`` as the fold-in basis.
    If the numerical rank of ``m`` is below ``k``, the trailing columns are
    zero-filled and a :class:`RankDeficiencyWarning` is issued.
    """
    a = np.asarray(m.values if isinstance(m, CountMatrix) else m, dtype=float)
    if a.ndim != 2:
        raise ContractError("svd_reduce expects a 2-D matrix")
    if not 1 <= k <= min(a.shape):
        raise ContractError(f"k={k} must lie in [1, {min(a.shape)}] for shape {a.shape}")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    u, vt = _fix_signs(u, vt)
    if tol is None:
        tol = (s[0] if s.size else 0.0) * max(a.shape) * np.finfo(float).eps
    rank = int(np.sum(s > tol))
    u, s, vt = u[:, :k], s[:k].copy(), vt[:k]
    deficient = rank < k
    if deficient:
        warnings.warn(
            f"matrix rank {rank} is below k={k}; padding with zero columns",
            RankDeficiencyWarning,
            stacklevel=2,
        )
        s[rank:] = 0.0
        u = u.copy()
        vt = vt.copy()
        u[:, rank:] = 0.0
        vt[rank:] = 0.0
    return SVDResult(u * s, vt.T.copy(), s, deficient)


def build_visual_space(counts: CountMatrix, k: int) -> EmbeddingSpace:
    """PPMI-weight ``counts`` and reduce each row to ``k`` dimensions."""
    result = svd_reduce(ppmi(counts), k)
    return EmbeddingSpace(counts.rows, result.reduced)


def load_counts(path) -> CountMatrix:
    """Read a TSV count matrix: a header row of feature labels (first cell
    ignored), then ``item<TAB>c1<TAB>c2...`` rows."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = [l.rstrip("\n") for l in fh if l.strip() and not l.startswith("#")]
    if not lines:
        raise FormatError(f"{path}: empty count file")
    cols = lines[0].split("\t")[1:]
    rows, values, seen = [], [], set()
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != len(cols) + 1:
            raise FormatError(f"{path}:{lineno}: expected {len(cols)} counts, got {len(parts) - 1}")
        if parts[0] in seen:
            raise FormatError(f"{path}:{lineno}: duplicate row label {parts[0]!r}")
        seen.add(parts[0])
        try:
            values.append([float(x) for x in parts[1:]])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-numeric count") from None
        rows.append(parts[0])
    try:
        return CountMatrix(tuple(rows), tuple(cols), np.array(values, dtype=float).reshape(len(rows), len(cols)))
    except ContractError as exc:
        raise FormatError(f"{path}: {exc}") from None


def save_counts(m: CountMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(("",) + m.cols) + "\n")
        for label, row in zip(m.rows, m.values):
            fh.write(label + "\t" + "\t".join(repr(float(x)) for x in row) + "\n")
