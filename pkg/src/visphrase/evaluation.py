"""Retrieval metrics, ROC AUC, cross-space structure correlation and
adjective concreteness."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .embedding_store import EmbeddingSpace, Ranking
from .errors import ContractError, FormatError, UndefinedMetricError


@dataclass(frozen=True)
class GoldAnnotation:
    image_id: str
    gold_adjectives: frozenset
    gold_noun: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "gold_adjectives", frozenset(self.gold_adjectives))


def load_gold(path) -> list[GoldAnnotation]:
    """Read ``image_id<TAB>noun<TAB>adj1,adj2,...`` rows (noun may be empty)."""
    out, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 'image_id<TAB>noun<TAB>adjectives'")
            image_id, noun, adjs = parts
            if image_id in seen:
                raise FormatError(f"{path}:{lineno}: duplicate image id {image_id!r}")
            seen.add(image_id)
            adjectives = frozenset(a for a in adjs.split(",") if a)
            out.append(GoldAnnotation(image_id, adjectives, noun or None))
    return out


def save_gold(gold: Iterable[GoldAnnotation], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for g in gold:
            fh.write(f"{g.image_id}\t{g.gold_noun or ''}\t{','.join(sorted(g.gold_adjectives))}\n")


def _gold_sets(rankings: Sequence[Ranking], gold: Sequence[GoldAnnotation], target: str) -> list[frozenset]:
    by_id = {g.image_id: g for g in gold}
    sets = []
    for r in rankings:
        g = by_id.get(r.query_id)
        if g is None:
            raise ContractError(f"no gold annotation for image {r.query_id!r}")
        if target == "adjectives":
            if not g.gold_adjectives:
                raise ContractError(f"image {r.query_id!r} has no gold adjectives")
            sets.append(g.gold_adjectives)
        elif target == "noun":
            if g.gold_noun is None:
                raise ContractError(f"image {r.query_id!r} has no gold noun")
            sets.append(frozenset([g.gold_noun]))
        else:
            raise ContractError(f"unknown target {target!r}")
    return sets


def _check_ks(ks: Sequence[int]) -> list[int]:
    ks = [int(k) for k in ks]
    if not ks or any(k < 1 for k in ks):
        raise ContractError("ks must be a non-empty list of positive integers")
    return ks


def hit_at_k(
    rankings: Sequence[Ranking], gold: Sequence[GoldAnnotation], ks: Sequence[int], target: str = "adjectives"
) -> dict[int, float]:
    """Percentage of images with at least one gold label in the top ``k``."""
    ks = _check_ks(ks)
    sets = _gold_sets(rankings, gold, target)
    if not rankings:
        raise ContractError("no rankings to evaluate")
    out = {}
    for k in ks:
        hits = sum(1 for r, g in zip(rankings, sets) if g.intersection(r.labels[:k]))
        out[k] = 100.0 * hits / len(rankings)
    return out


def recall_at_k(
    rankings: Sequence[Ranking], gold: Sequence[GoldAnnotation], ks: Sequence[int], target: str = "adjectives"
) -> dict[int, float]:
    """Per-image fraction of gold labels found in the top ``k``, averaged
    over images, as a percentage."""
    ks = _check_ks(ks)
    sets = _gold_sets(rankings, gold, target)
    if not rankings:
        raise ContractError("no rankings to evaluate")
    out = {}
    for k in ks:
        total = sum(len(g.intersection(r.labels[:k])) / len(g) for r, g in zip(rankings, sets))
        out[k] = 100.0 * total / len(rankings)
    return out


def auc(scores: Sequence[tuple[str, float]], positives: Iterable[str]) -> float:
    """ROC AUC as the Mann-Whitney statistic: the fraction of
    (positive, negative) pairs where the positive scores higher, ties
    counting one half."""
    positives = set(positives)
    values = np.array([s for _, s in scores], dtype=float)
    is_pos = np.array([i in positives for i, _ in scores], dtype=bool)
    n_pos = int(is_pos.sum())
    n_neg = len(values) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(f"AUC needs positives and negatives (got {n_pos} and {n_neg})")
    ranks = rankdata(values, method="average")
    u = ranks[is_pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def per_attribute_auc(
    image_ids: Sequence[str],
    similarities: np.ndarray,
    attributes: Sequence[str],
    gold: Sequence[GoldAnnotation],
) -> dict[str, float]:
    """AUC for each attribute column of an ``(images, attributes)`` cosine
    matrix; attributes without both positives and negatives are skipped."""
    by_id = {g.image_id: g for g in gold}
    out = {}
    for j, attr in enumerate(attributes):
        pos = {i for i in image_ids if attr in by_id[i].gold_adjectives}
        if not pos or len(pos) == len(image_ids):
            continue
        out[attr] = auc(list(zip(image_ids, similarities[:, j])), pos)
    return out


def mean_attribute_rank(rankings: Sequence[Ranking], attribute: str) -> float:
    """Average 1-based rank of ``attribute`` over the given rankings."""
    if not rankings:
        raise ContractError("no rankings given")
    return float(np.mean([r.rank_of(attribute) for r in rankings]))


@dataclass(frozen=True)
class StructureCorrelation:
    rho: float
    p_value: float
    n_labels: int
    n_pairs: int
    method: str
    n_permutations: int


def _pairwise_cosines(space: EmbeddingSpace, labels: Sequence[str]) -> np.ndarray:
    x = space.subset(labels).vectors
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        raise ContractError("zero vector among shared labels")
    x = x / norms[:, None]
    return x @ x.T


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if denom == 0:
        raise UndefinedMetricError("correlation undefined for constant similarities")
    return float(np.dot(a, b) / denom)


def structure_correlation(
    space_a: EmbeddingSpace,
    space_b: EmbeddingSpace,
    shared: Sequence[str],
    method: str = "spearman",
    n_permutations: int = 1000,
    seed: int = 0,
    alternative: str = "two-sided",
) -> StructureCorrelation:
    """Correlation between the pairwise-cosine structures of two spaces.

    The statistic correlates the cosines of all unordered pairs of shared
    labels in ``space_a`` with those in ``space_b``. Significance comes from
    a label-permutation test: the labels of ``space_b`` are shuffled, which
    permutes rows and columns of its similarity matrix together.
    """
    shared = list(dict.fromkeys(shared))
    if len(shared) < 3:
        raise ContractError("need at least 3 shared labels")
    if method not in ("spearman", "pearson"):
        raise ContractError(f"unknown method {method!r}")
    if alternative not in ("two-sided", "greater"):
        raise ContractError(f"unknown alternative {alternative!r}")
    if n_permutations < 1:
        raise ContractError("need at least one permutation")
    sa = _pairwise_cosines(space_a, shared)
    sb = _pairwise_cosines(space_b, shared)
    n = len(shared)
    iu = np.triu_indices(n, k=1)
    if method == "spearman":
        # ranks are computed once; permuting labels only reorders them
        flat_b = sb[iu]
        rank_b = np.zeros_like(sb)
        rank_b[iu] = rankdata(flat_b)
        rank_b = rank_b + rank_b.T
        va = rankdata(sa[iu])
        mat_b = rank_b
    else:
        va = sa[iu]
        mat_b = sb
    rho = _pearson(va, mat_b[iu])

    rng = np.random.default_rng(seed)
    exceed = 0
    for _ in range(n_permutations):
        perm = rng.permutation(n)
        r = _pearson(va, mat_b[np.ix_(perm, perm)][iu])
        if alternative == "two-sided":
            exceed += abs(r) >= abs(rho) - 1e-12
        else:
            exceed += r >= rho - 1e-12
    p = (exceed + 1) / (n_permutations + 1)
    return StructureCorrelation(rho, float(p), n, len(va), method, n_permutations)


def adjective_concreteness(
    cooc: Mapping[str, Mapping[str, float]], noun_concreteness: Mapping[str, float]
) -> dict[str, float]:
    """Count-weighted mean concreteness of the nouns each adjective modifies.

    Only nouns with a known concreteness score contribute.
    """
    num: dict[str, float] = {}
    den: dict[str, float] = {}
    for noun, adjs in cooc.items():
        if noun not in noun_concreteness:
            continue
        c = float(noun_concreteness[noun])
        for adj, count in adjs.items():
            if count > 0:
                num[adj] = num.get(adj, 0.0) + count * c
                den[adj] = den.get(adj, 0.0) + count
    return {adj: num[adj] / den[adj] for adj in num}


def concreteness_score(
    ranking: Ranking,
    noun_concreteness: Mapping[str, float],
    cooc: Mapping[str, Mapping[str, float]],
    top_n: int = 5,
    table: Mapping[str, float] | None = None,
) -> float:
    """Mean concreteness of the top ``top_n`` adjectives of ``ranking``.

    Adjectives without any scored modified noun are dropped with a warning.
    Pass a precomputed :func:`adjective_concreteness` ``table`` when scoring
    many rankings.
    """
    if top_n < 1:
        raise ContractError("top_n must be positive")
    if table is None:
        table = adjective_concreteness(cooc, noun_concreteness)
    top = ranking.labels[:top_n]
    known = [table[a] for a in top if a in table]
    dropped = [a for a in top if a not in table]
    if dropped:
        warnings.warn(f"no concreteness for adjectives {dropped}", stacklevel=2)
    if not known:
        raise UndefinedMetricError(f"no top-{top_n} adjective of {ranking.query_id!r} has a concreteness score")
    return float(np.mean(known))


def load_concreteness(path) -> dict[str, float]:
    """Read ``noun<TAB>score`` rows."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            try:
                out[parts[0]] = float(parts[1])
            except (IndexError, ValueError):
                raise FormatError(f"{path}:{lineno}: expected 'noun<TAB>score'") from None
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected 'noun<TAB>score'")
    return out


@dataclass
class EvalReport:
    """Aggregated figures of merit for one annotation run.

    ``per_k`` maps a label kind (``"ADJ"`` or ``"NOUN"``) to
    ``{k: {"hit_percent": .., "recall_percent": ..}}``.
    """

    per_k: dict
    per_attribute_auc: dict = field(default_factory=dict)
    mean_ranks: dict = field(default_factory=dict)
    concreteness: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "per_k": {
                kind: {str(k): dict(v) for k, v in sorted(table.items())} for kind, table in sorted(self.per_k.items())
            },
            "per_attribute_auc": dict(sorted(self.per_attribute_auc.items())),
            "mean_ranks": dict(sorted(self.mean_ranks.items())),
            "concreteness": dict(self.concreteness),
            "metadata": dict(self.metadata),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def to_table(self) -> str:
        lines = []
        for kind, table in sorted(self.per_k.items()):
            lines.append(f"{kind} retrieval (%)")
            lines.append(f"{'':>6} {'hit':>8} {'recall':>8}")
            for k, row in sorted(table.items()):
                lines.append(f"{'@' + str(k):>6} {row['hit_percent']:8.2f} {row['recall_percent']:8.2f}")
            lines.append("")
        if self.per_attribute_auc:
            lines.append("per-attribute AUC")
            width = max(len(a) for a in self.per_attribute_auc)
            for attr, value in sorted(self.per_attribute_auc.items()):
                lines.append(f"{attr:<{width}} {value:.4f}")
            lines.append("")
        if self.mean_ranks:
            lines.append("mean attribute rank")
            for key, value in sorted(self.mean_ranks.items()):
                lines.append(f"{key} {value:.2f}")
            lines.append("")
        if self.concreteness:
            lines.append("concreteness")
            for key in ("mean", "median", "n_images"):
                if key in self.concreteness:
                    lines.append(f"{key} {self.concreteness[key]:g}")
            lines.append("")
        return "\n".join(lines)


def report_schema() -> dict:
    """JSON schema that :meth:`EvalReport.to_dict` output conforms to."""
    text = resources.files("visphrase").joinpath("report_schema.json").read_text(encoding="utf-8")
    return json.loads(text)
