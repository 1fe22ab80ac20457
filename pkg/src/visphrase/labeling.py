"""Adjective and noun label rankings for images.

Image-driven methods:

* direct retrieval (``annotate_direct``): project the image, then take the
  nearest words of one part of speech;
* decompositional retrieval (``annotate_dec``): project, split the result
  into an adjective vector and a noun vector, and search each separately.

Object-informed baselines that see the gold noun instead of the image:
``lm_rank`` (bigram conditional probability with stupid backoff),
``sp_rank`` (selectional-preference prototype) and ``vlm_rank`` (equal-weight
rank interpolation of LM with direct retrieval).
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .decomposition import DecompositionModel, decompose
from .embedding_store import EmbeddingSpace, Ranking, cosine, nearest_batch
from .errors import ContractError, FormatError, NoPrototypeError
from .projection import ProjectionModel, comparison_space, project, to_target

BACKOFF_ALPHA = 0.4
SP_THRESHOLD = 20


@dataclass(frozen=True)
class BigramTable:
    unigram_counts: Mapping[str, float]
    bigram_counts: Mapping[tuple[str, str], float]
    total_unigrams: float | None = None

    def __post_init__(self):
        uni = dict(self.unigram_counts)
        bi = dict(self.bigram_counts)
        if any(c < 0 for c in uni.values()) or any(c < 0 for c in bi.values()):
            raise ContractError("counts must be non-negative")
        for adj, noun in bi:
            if adj not in uni or noun not in uni:
                raise ContractError(f"bigram ({adj!r}, {noun!r}) has a part without a unigram count")
        total = float(sum(uni.values())) if self.total_unigrams is None else float(self.total_unigrams)
        object.__setattr__(self, "unigram_counts", uni)
        object.__setattr__(self, "bigram_counts", bi)
        object.__setattr__(self, "total_unigrams", total)


class ModifierCooc(dict):
    """``noun -> {adjective -> modifier co-occurrence count}``."""

    def adjectives_of(self, noun: str) -> dict[str, float]:
        return dict(self.get(noun, {}))


def lm_score(table: BigramTable, adj: str, noun: str, alpha: float = BACKOFF_ALPHA) -> float:
    pair = table.bigram_counts.get((adj, noun), 0)
    noun_count = table.unigram_counts.get(noun, 0)
    if pair > 0 and noun_count > 0:
        return pair / noun_count
    if table.total_unigrams <= 0:
        return 0.0
    return alpha * table.unigram_counts.get(adj, 0) / table.total_unigrams


def lm_rank(
    table: BigramTable,
    noun: str,
    adjectives: Iterable[str],
    alpha: float = BACKOFF_ALPHA,
    query_id: str | None = None,
) -> Ranking:
    """Rank ``adjectives`` by ``p(adj | noun)`` with stupid backoff."""
    adjectives = sorted(set(adjectives))
    if not adjectives:
        raise ContractError("adjective candidate set is empty")
    scores = [lm_score(table, a, noun, alpha) for a in adjectives]
    return Ranking.from_scores(noun if query_id is None else query_id, adjectives, scores)


def sp_prototype(cooc: ModifierCooc, noun: str, space: EmbeddingSpace, threshold: int = SP_THRESHOLD) -> np.ndarray:
    """Mean of the unit vectors of adjectives modifying ``noun`` strictly
    more than ``threshold`` times."""
    if noun not in cooc:
        raise NoPrototypeError(f"noun {noun!r} has no modifier counts")
    chosen = sorted(a for a, c in cooc[noun].items() if c > threshold and a in space)
    if not chosen:
        raise NoPrototypeError(f"no adjective modifies {noun!r} more than {threshold} times")
    vecs = np.array([space.vector(a) for a in chosen])
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return (vecs / norms).mean(axis=0)


def sp_rank(
    cooc: ModifierCooc,
    noun: str,
    space: EmbeddingSpace,
    threshold: int = SP_THRESHOLD,
    adjectives: Iterable[str] | None = None,
    query_id: str | None = None,
) -> Ranking:
    proto = sp_prototype(cooc, noun, space, threshold)
    if adjectives is None:
        adjectives = space.labels_with_pos("ADJ")
    adjectives = sorted(set(adjectives))
    if not adjectives:
        raise ContractError("adjective candidate set is empty")
    scores = [cosine(space.vector(a), proto) for a in adjectives]
    return Ranking.from_scores(noun if query_id is None else query_id, adjectives, scores)


def vlm_rank(lm: Ranking, direct: Ranking, query_id: str | None = None) -> Ranking:
    """Equal-weight interpolation of the ranks of two full rankings.

    The combined score is minus the mean rank, so the best mean rank comes
    first and equal means are ordered by label.
    """
    if set(lm.labels) != set(direct.labels) or len(lm) != len(direct):
        raise ContractError("LM and direct rankings must cover the same candidates")
    r_dir = {label: i + 1 for i, label in enumerate(direct.labels)}
    labels = lm.labels
    scores = [-((i + 1) + r_dir[label]) / 2.0 for i, label in enumerate(labels)]
    return Ranking.from_scores(direct.query_id if query_id is None else query_id, labels, scores)


def annotate_direct_batch(
    model: ProjectionModel,
    images,
    space: EmbeddingSpace,
    pos: str | None,
    k: int,
    restrict: Iterable[str] | None = None,
    image_ids: Sequence[str] | None = None,
) -> list[Ranking]:
    images = np.atleast_2d(np.asarray(images, dtype=float))
    queries = project(model, images)
    return nearest_batch(comparison_space(model, space), queries, k, pos, restrict, image_ids)


def annotate_direct(
    model: ProjectionModel,
    image,
    space: EmbeddingSpace,
    pos: str | None,
    k: int,
    restrict: Iterable[str] | None = None,
    image_id: str = "",
) -> Ranking:
    return annotate_direct_batch(model, np.asarray(image, dtype=float)[None, :], space, pos, k, restrict, [image_id])[0]


def annotate_dec_batch(
    proj: ProjectionModel,
    dec: DecompositionModel,
    images,
    space: EmbeddingSpace,
    k: int,
    adj_restrict: Iterable[str] | None = None,
    noun_restrict: Iterable[str] | None = None,
    image_ids: Sequence[str] | None = None,
) -> tuple[list[Ranking], list[Ranking]]:
    images = np.atleast_2d(np.asarray(images, dtype=float))
    if proj.target_dim != dec.dim:
        raise ContractError(f"projection target dim {proj.target_dim} != decomposition dim {dec.dim}")
    w_adj, w_noun = decompose(dec, to_target(proj, images))
    adj = nearest_batch(space, w_adj, k, "ADJ", adj_restrict, image_ids)
    noun = nearest_batch(space, w_noun, k, "NOUN", noun_restrict, image_ids)
    return adj, noun


def annotate_dec(
    proj: ProjectionModel,
    dec: DecompositionModel,
    image,
    space: EmbeddingSpace,
    k: int,
    adj_restrict: Iterable[str] | None = None,
    noun_restrict: Iterable[str] | None = None,
    image_id: str = "",
) -> tuple[Ranking, Ranking]:
    adj, noun = annotate_dec_batch(
        proj, dec, np.asarray(image, dtype=float)[None, :], space, k, adj_restrict, noun_restrict, [image_id]
    )
    return adj[0], noun[0]


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line.strip() and not line.startswith("#"):
                yield lineno, line


def _count(value: str, path, lineno) -> float:
    try:
        c = float(value)
    except ValueError:
        raise FormatError(f"{path}:{lineno}: bad count {value!r}") from None
    if c < 0:
        raise FormatError(f"{path}:{lineno}: negative count")
    return c


def load_bigrams(path) -> BigramTable:
    """Read unigram rows ``word<TAB>count`` and bigram rows
    ``adj<TAB>noun<TAB>count``; optional ``[unigrams]``/``[bigrams]``
    section lines are accepted."""
    uni, bi = {}, {}
    for lineno, line in _data_lines(path):
        if line.strip() in ("[unigrams]", "[bigrams]"):
            continue
        parts = line.split("\t")
        if len(parts) == 2:
            uni[parts[0]] = uni.get(parts[0], 0) + _count(parts[1], path, lineno)
        elif len(parts) == 3:
            key = (parts[0], parts[1])
            bi[key] = bi.get(key, 0) + _count(parts[2], path, lineno)
        else:
            raise FormatError(f"{path}:{lineno}: expected 2 or 3 tab-separated fields")
    try:
        return BigramTable(uni, bi)
    except ContractError as exc:
        raise FormatError(f"{path}: {exc}") from None


def _fmt_count(c: float) -> str:
    c = float(c)
    return str(int(c)) if c.is_integer() else repr(c)


def save_bigrams(table: BigramTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("[unigrams]\n")
        for word, c in table.unigram_counts.items():
            fh.write(f"{word}\t{_fmt_count(c)}\n")
        fh.write("[bigrams]\n")
        for (adj, noun), c in table.bigram_counts.items():
            fh.write(f"{adj}\t{noun}\t{_fmt_count(c)}\n")


def load_cooc(path) -> ModifierCooc:
    """Read ``noun<TAB>adj<TAB>count`` rows."""
    table = defaultdict(dict)
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(f"{path}:{lineno}: expected 'noun<TAB>adj<TAB>count'")
        noun, adj = parts[0], parts[1]
        table[noun][adj] = table[noun].get(adj, 0) + _count(parts[2], path, lineno)
    return ModifierCooc(table)


def save_cooc(cooc: Mapping[str, Mapping[str, float]], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for noun, adjs in cooc.items():
            for adj, c in adjs.items():
                fh.write(f"{noun}\t{adj}\t{_fmt_count(c)}\n")
