"""Synthetic data with planted structure, for tests and desk-scale runs.

:func:`bimodal_world` builds a toy version of the full setting:

* word vectors for adjectives and nouns that share topic directions and
  differ in which coordinates carry most of their variance;
* nouns as attribute bundles: each noun vector includes the mean of a few
  adjective vectors;
* corpus phrase vectors as the average of two constituents plus noise;
* image vectors as a fixed random linear image of the depicted
  (attributes, object) phrase, plus noise.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embedding_store import EmbeddingSpace
from .evaluation import GoldAnnotation
from .labeling import BigramTable, ModifierCooc


def planted_linear(n: int, d1: int, d2: int, noise: float = 0.0, seed: int = 0):
    """Pairs ``w = F* v + noise``; returns ``(V, W, F*)`` with rows as pairs."""
    rng = np.random.default_rng(seed)
    F = rng.normal(size=(d2, d1))
    V = rng.normal(size=(n, d1))
    W = V @ F.T + noise * rng.normal(size=(n, d2))
    return V, W, F


def labeled_space(vectors, prefix: str = "w", pos: str | None = None) -> EmbeddingSpace:
    labels = [f"{prefix}{i:03d}" for i in range(len(vectors))]
    tags = None if pos is None else {label: pos for label in labels}
    return EmbeddingSpace(labels, vectors, tags)


def additive_phrases(n_adj: int = 15, n_noun: int = 15, dim: int = 40, noise: float = 0.0, seed: int = 0):
    """Random constituent words and every phrase ``(w_adj + w_noun)/2``.

    Returns ``(word_space, phrase_space, triples)``; triples are
    ``(phrase_label, adj, noun)`` over all adjective-noun combinations.
    """
    rng = np.random.default_rng(seed)
    adjs = [f"adj{i:02d}" for i in range(n_adj)]
    nouns = [f"noun{j:02d}" for j in range(n_noun)]
    A = rng.normal(size=(n_adj, dim))
    N = rng.normal(size=(n_noun, dim))
    pos = {**{a: "ADJ" for a in adjs}, **{n: "NOUN" for n in nouns}}
    words = EmbeddingSpace(adjs + nouns, np.vstack([A, N]), pos)
    triples, rows = [], []
    for i, a in enumerate(adjs):
        for j, n in enumerate(nouns):
            triples.append((f"{a}_{n}", a, n))
            rows.append((A[i] + N[j]) / 2 + noise * rng.normal(size=dim))
    phrases = EmbeddingSpace([t[0] for t in triples], np.array(rows))
    return words, phrases, triples


def correlated_spaces(n_labels: int = 30, dim: int = 20, noise: float = 1.0, seed: int = 0):
    """Two spaces over the same labels whose similarity structures are
    related: space B is a random linear image of space A plus noise."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n_labels, dim))
    M = rng.normal(size=(dim, dim)) / np.sqrt(dim)
    Y = X @ M.T + noise * rng.normal(size=(n_labels, dim))
    labels = [f"c{i:03d}" for i in range(n_labels)]
    return EmbeddingSpace(labels, X), EmbeddingSpace(labels, Y)


@dataclass
class BimodalWorld:
    word_space: EmbeddingSpace
    phrase_space: EmbeddingSpace
    triples: list
    train_images: EmbeddingSpace
    train_pairs: list
    test_images: EmbeddingSpace
    gold: list
    bigrams: BigramTable
    cooc: ModifierCooc
    concreteness: dict
    bundles: dict
    train_nouns: list
    test_nouns: list
    params: dict = field(default_factory=dict)
    _visual_map: np.ndarray | None = field(default=None, repr=False)

    @property
    def adjectives(self) -> list[str]:
        return self.word_space.labels_with_pos("ADJ")

    @property
    def nouns(self) -> list[str]:
        return self.word_space.labels_with_pos("NOUN")

    def render(self, noun: str, attributes, rng) -> np.ndarray:
        """A fresh noisy image of ``noun`` depicting ``attributes``."""
        ws = self.word_space
        attr = np.mean([ws.vector(a) for a in attributes], axis=0)
        z = (attr + ws.vector(noun)) / 2
        M = self._visual_map
        return M @ z + self.params["vis_noise"] * rng.normal(size=M.shape[0])

    def classification_set(self, classes, n_per_class: int, seed: int = 0) -> tuple[EmbeddingSpace, list[str]]:
        """Images of the given nouns, each depicting 1-2 bundle attributes."""
        rng = np.random.default_rng(seed)
        ids, rows, labels = [], [], []
        for c in classes:
            for r in range(n_per_class):
                bundle = self.bundles[c]
                attrs = rng.choice(bundle, size=rng.integers(1, 3), replace=False)
                ids.append(f"{c}#{r:04d}")
                rows.append(self.render(c, attrs, rng))
                labels.append(c)
        return EmbeddingSpace(ids, np.array(rows)), labels


def bimodal_world(
    seed: int = 0,
    n_adj: int = 150,
    n_noun: int = 300,
    d_word: int = 60,
    d_visual: int = 60,
    n_topics: int = 8,
    topic_weight: float = 1.5,
    pos_contrast: float = 0.5,
    bundle_weight: float = 0.6,
    bundle_size: int = 4,
    images_per_noun: int = 10,
    test_images_per_noun: int = 3,
    test_fraction: float = 1 / 3,
    vis_noise: float = 0.5,
    phrase_noise: float = 0.1,
    extra_phrase_rate: float = 0.15,
) -> BimodalWorld:
    """Planted-structure world of words, phrases and images.

    Training images carry noun labels only; test images belong to nouns not
    seen in training and carry gold adjectives (the depicted attributes) and
    the gold noun.
    """
    rng = np.random.default_rng(seed)
    adjs = [f"a{i:03d}" for i in range(n_adj)]
    nouns = [f"n{j:03d}" for j in range(n_noun)]

    topics = rng.normal(size=(n_topics, d_word))
    adj_topic = rng.integers(n_topics, size=n_adj)
    noun_topic = rng.integers(n_topics, size=n_noun)
    first_half = np.arange(d_word) < d_word // 2
    adj_scale = np.where(first_half, 1 + pos_contrast, 1 - pos_contrast)
    noun_scale = np.where(first_half, 1 - pos_contrast, 1 + pos_contrast)
    A = rng.normal(size=(n_adj, d_word)) * adj_scale + topic_weight * topics[adj_topic]
    U = rng.normal(size=(n_noun, d_word)) * noun_scale + topic_weight * topics[noun_topic]
    bundle_idx = [rng.choice(n_adj, size=bundle_size, replace=False) for _ in range(n_noun)]
    N = U + bundle_weight * np.array([A[b].mean(axis=0) for b in bundle_idx])
    bundles = {nouns[j]: [adjs[i] for i in sorted(b)] for j, b in enumerate(bundle_idx)}

    # word frequency ranks follow a random order within each POS
    freq = {}
    for group in (adjs, nouns):
        for r, i in enumerate(rng.permutation(len(group))):
            freq[group[i]] = r + 1
    pos = {**{a: "ADJ" for a in adjs}, **{n: "NOUN" for n in nouns}}
    words = EmbeddingSpace(adjs + nouns, np.vstack([A, N]), pos, freq)

    triples, phrase_rows = [], []
    cooc: dict = {}
    for j, noun in enumerate(nouns):
        in_bundle = set(bundle_idx[j])
        for i, adj in enumerate(adjs):
            if i in in_bundle or rng.random() < extra_phrase_rate:
                triples.append((f"{adj}_{noun}", adj, noun))
                phrase_rows.append((A[i] + N[j]) / 2 + phrase_noise * rng.normal(size=d_word))
                # bundle modifiers clear the default selectional-preference threshold
                count = int(rng.integers(25, 200)) if i in in_bundle else int(rng.integers(1, 21))
                cooc.setdefault(noun, {})[adj] = count
    phrases = EmbeddingSpace([t[0] for t in triples], np.array(phrase_rows))

    unigrams = {w: float(rng.integers(50, 5000)) for w in adjs + nouns}
    bigram_counts = {}
    for noun, adjs_of in cooc.items():
        for adj, count in adjs_of.items():
            bigram_counts[(adj, noun)] = float(min(count, unigrams[noun]))
    bigrams = BigramTable(unigrams, bigram_counts)
    concreteness = {n: round(float(rng.uniform(1.0, 5.0)), 3) for n in nouns}

    M = rng.normal(size=(d_visual, d_word)) / np.sqrt(d_word)
    params = dict(
        seed=seed, n_adj=n_adj, n_noun=n_noun, d_word=d_word, d_visual=d_visual, n_topics=n_topics,
        topic_weight=topic_weight, pos_contrast=pos_contrast, bundle_weight=bundle_weight,
        bundle_size=bundle_size, vis_noise=vis_noise, phrase_noise=phrase_noise,
    )

    def render(j, attr_idx):
        z = (A[attr_idx].mean(axis=0) + N[j]) / 2
        return M @ z + vis_noise * rng.normal(size=d_visual)

    perm = rng.permutation(n_noun)
    n_test = int(round(test_fraction * n_noun))
    test_j, train_j = sorted(perm[:n_test]), sorted(perm[n_test:])

    train_ids, train_rows, train_pairs = [], [], []
    for j in train_j:
        for r in range(images_per_noun):
            attrs = rng.choice(bundle_idx[j], size=rng.integers(1, 3), replace=False)
            iid = f"tr_{nouns[j]}_{r:02d}"
            train_ids.append(iid)
            train_rows.append(render(j, attrs))
            train_pairs.append((iid, nouns[j]))

    test_ids, test_rows, gold = [], [], []
    for j in test_j:
        for r in range(test_images_per_noun):
            attrs = rng.choice(bundle_idx[j], size=rng.integers(1, 3), replace=False)
            iid = f"te_{nouns[j]}_{r:02d}"
            test_ids.append(iid)
            test_rows.append(render(j, attrs))
            gold.append(GoldAnnotation(iid, {adjs[i] for i in attrs}, nouns[j]))

    return BimodalWorld(
        word_space=words,
        phrase_space=phrases,
        triples=triples,
        train_images=EmbeddingSpace(train_ids, np.array(train_rows)),
        train_pairs=train_pairs,
        test_images=EmbeddingSpace(test_ids, np.array(test_rows)),
        gold=gold,
        bigrams=bigrams,
        cooc=ModifierCooc(cooc),
        concreteness=concreteness,
        bundles=bundles,
        train_nouns=[nouns[j] for j in train_j],
        test_nouns=[nouns[j] for j in test_j],
        params=params,
        _visual_map=M,
    )
