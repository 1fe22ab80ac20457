import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from visphrase.decomposition import DecompositionModel
from visphrase.embedding_store import EmbeddingSpace, Ranking
from visphrase.errors import ContractError, FormatError, NoPrototypeError
from visphrase.labeling import (
    BigramTable,
    ModifierCooc,
    annotate_dec,
    annotate_dec_batch,
    annotate_direct,
    annotate_direct_batch,
    load_bigrams,
    load_cooc,
    lm_rank,
    lm_score,
    save_bigrams,
    save_cooc,
    sp_prototype,
    sp_rank,
    vlm_rank,
)
from visphrase.projection import PairedDataset, RidgeModel, train_ncca, train_ridge
from visphrase.synthetic import additive_phrases


def mean_rank_oracle(lm, direct):
    """Sort candidates by the average of their two 1-based ranks, then label."""
    r1 = {l: i + 1 for i, l in enumerate(lm.labels)}
    r2 = {l: i + 1 for i, l in enumerate(direct.labels)}
    return sorted(r1, key=lambda l: ((r1[l] + r2[l]) / 2, l))


def ranking_of(labels, qid="q"):
    n = len(labels)
    return Ranking(qid, tuple((l, float(n - i)) for i, l in enumerate(labels)))


# ---------------------------------------------------------------- LM


@pytest.fixture
def table():
    return BigramTable({"cat": 10, "furry": 30, "shiny": 50, "red": 910}, {("furry", "cat"): 8}, total_unigrams=1000)


def test_lm_direct_ratio(table):
    assert lm_score(table, "furry", "cat") == pytest.approx(0.8)


def test_lm_backoff(table):
    assert lm_score(table, "shiny", "cat") == pytest.approx(0.4 * 0.05)


def test_lm_unknown_noun_is_pure_backoff(table):
    assert lm_score(table, "furry", "dog") == pytest.approx(0.4 * 30 / 1000)


def test_lm_rank_order(table):
    r = lm_rank(table, "cat", ["shiny", "furry", "red"])
    assert r.labels == ["furry", "red", "shiny"]
    assert r.query_id == "cat"


def test_lm_rank_empty_candidates(table):
    with pytest.raises(ContractError):
        lm_rank(table, "cat", [])


def test_bigram_parts_must_have_unigrams():
    with pytest.raises(ContractError):
        BigramTable({"cat": 1}, {("furry", "cat"): 1})


def test_total_defaults_to_sum():
    assert BigramTable({"a": 2, "b": 3}, {}).total_unigrams == 5


def test_lm_rank_same_noun_same_ranking(table):
    a = lm_rank(table, "cat", ["shiny", "furry", "red"], query_id="img1")
    b = lm_rank(table, "cat", ["red", "furry", "shiny"], query_id="img2")
    assert a.items == b.items


# ---------------------------------------------------------------- SP


@pytest.fixture
def adj_space():
    vecs = np.array([[1.0, 0, 0], [0, 2.0, 0], [0, 0, 1.0], [1.0, 1.0, 0]])
    labels = ["red", "soft", "tall", "warm"]
    return EmbeddingSpace(labels, vecs, {l: "ADJ" for l in labels})


def test_sp_single_qualifier(adj_space):
    cooc = ModifierCooc({"cat": {"soft": 21, "red": 3}})
    np.testing.assert_allclose(sp_prototype(cooc, "cat", adj_space), [0, 1, 0])
    r = sp_rank(cooc, "cat", adj_space)
    assert r.labels[0] == "soft"
    assert r.scores[0] == pytest.approx(1.0)


def test_sp_two_orthogonal_qualifiers(adj_space):
    cooc = ModifierCooc({"cat": {"red": 50, "soft": 40}})
    r = sp_rank(cooc, "cat", adj_space, adjectives=["red", "soft"])
    np.testing.assert_allclose(r.scores, [math.cos(math.pi / 4)] * 2, atol=1e-12)


def test_sp_threshold_is_strict(adj_space):
    cooc = ModifierCooc({"cat": {"red": 20, "soft": 21}})
    np.testing.assert_allclose(sp_prototype(cooc, "cat", adj_space), [0, 1, 0])
    with pytest.raises(NoPrototypeError):
        sp_prototype(ModifierCooc({"cat": {"red": 20}}), "cat", adj_space)
    with pytest.raises(NoPrototypeError):
        sp_prototype(ModifierCooc({}), "cat", adj_space)


def test_sp_prototype_averages_unit_vectors(adj_space):
    cooc = ModifierCooc({"cat": {"red": 30, "soft": 30}})
    # soft has length 2; unit-normalizing first weights both adjectives equally
    np.testing.assert_allclose(sp_prototype(cooc, "cat", adj_space), [0.5, 0.5, 0])


@given(st.integers(0, 60))
def test_sp_boundary_property(count):
    space = EmbeddingSpace(["a", "b"], np.eye(2), {"a": "ADJ", "b": "ADJ"})
    cooc = ModifierCooc({"n": {"a": count, "b": 100}})
    proto = sp_prototype(cooc, "n", space)
    assert (proto[0] > 0) == (count > 20)


# ---------------------------------------------------------------- vLM


def test_vlm_identical_inputs():
    r = ranking_of(list("abcde"))
    assert vlm_rank(r, r).labels == list("abcde")


def test_vlm_tie_broken_lexicographically():
    # "b" ranked 1 and 3, "a" ranked 2 and 2: both mean 2
    lm = ranking_of(["b", "a", "c"])
    direct = ranking_of(["c", "a", "b"])
    out = vlm_rank(lm, direct)
    assert out.labels.index("a") < out.labels.index("b")
    assert out.scores[out.labels.index("a")] == out.scores[out.labels.index("b")] == -2.0


def test_vlm_matches_oracle(rng):
    labels = [f"adj{i:02d}" for i in range(50)]
    for _ in range(20):
        lm = ranking_of([labels[i] for i in rng.permutation(50)])
        direct = ranking_of([labels[i] for i in rng.permutation(50)])
        assert vlm_rank(lm, direct).labels == mean_rank_oracle(lm, direct)


def test_vlm_candidate_mismatch():
    with pytest.raises(ContractError):
        vlm_rank(ranking_of(["a", "b"]), ranking_of(["a", "c"]))


@given(st.permutations(list("abcdefgh")), st.permutations(list("abcdefgh")))
def test_vlm_rank_bounds(p1, p2):
    lm, direct = ranking_of(p1), ranking_of(p2)
    out = vlm_rank(lm, direct)
    n = len(p1)
    for label in p1:
        r = out.rank_of(label)
        assert 1 <= r <= n
        # a label can be overtaken only by labels with a smaller or equal mean rank
        mean = (lm.rank_of(label) + direct.rank_of(label)) / 2
        ahead = [l for l in p1 if (lm.rank_of(l) + direct.rank_of(l)) / 2 < mean]
        assert r >= len(ahead) + 1


# ---------------------------------------------------------------- image-driven


def word_space(rng, n_adj=25, n_noun=25, dim=30):
    adjs = [f"a{i:02d}" for i in range(n_adj)]
    nouns = [f"n{i:02d}" for i in range(n_noun)]
    pos = {**{a: "ADJ" for a in adjs}, **{n: "NOUN" for n in nouns}}
    return EmbeddingSpace(adjs + nouns, rng.normal(size=(n_adj + n_noun, dim)), pos)


def test_identity_projection_direct(rng):
    space = word_space(rng)
    model = RidgeModel(np.eye(space.dim), 0.0)
    r = annotate_direct(model, space.vector("a07"), space, "ADJ", 3, image_id="img")
    assert r.labels[0] == "a07" and r.query_id == "img"


def test_planted_map_direct_all_train_items(rng):
    space = word_space(rng)
    F = rng.normal(size=(space.dim, 40))
    adjs = space.labels_with_pos("ADJ")
    images = np.linalg.pinv(F) @ np.array([space.vector(a) for a in adjs]).T
    images = images.T
    extra = rng.normal(size=(40, 40))
    sources = np.vstack([images, extra])
    targets = np.vstack([images @ F.T, extra @ F.T])
    tspace = EmbeddingSpace([f"t{i:03d}" for i in range(len(targets))], targets)
    model = train_ridge(PairedDataset(sources, tspace.labels, tspace), lam=0.0)
    out = annotate_direct_batch(model, images, space, "ADJ", 1, image_ids=adjs)
    assert [r.labels[0] for r in out] == adjs


def test_direct_batch_matches_single(rng):
    space = word_space(rng)
    model = RidgeModel(rng.normal(size=(space.dim, 8)), 0.0)
    imgs = rng.normal(size=(5, 8))
    batch = annotate_direct_batch(model, imgs, space, "NOUN", 4, image_ids=list("abcde"))
    for img, r, qid in zip(imgs, batch, "abcde"):
        single = annotate_direct(model, img, space, "NOUN", 4, image_id=qid)
        assert r.labels == single.labels


def test_dec_pipeline_noiseless():
    words, phrases, triples = additive_phrases(n_adj=15, n_noun=15, dim=40, seed=0)
    # planted projection: image = M^+ phrase, so F = M recovers the phrase exactly
    rng = np.random.default_rng(1)
    M = rng.normal(size=(40, 50))
    images = (np.linalg.pinv(M) @ phrases.vectors.T).T
    proj = RidgeModel(M, 0.0)
    from visphrase.decomposition import PhraseTrainingSet, train_dec

    dec = train_dec(PhraseTrainingSet.from_spaces(phrases, triples, words), lam=1e-6)
    adj, noun = annotate_dec_batch(proj, dec, images, words, 1, image_ids=[t[0] for t in triples])
    both = np.mean([a.labels[0] == t[1] and n.labels[0] == t[2] for a, n, t in zip(adj, noun, triples)])
    assert both >= 0.9


def test_dec_pos_purity(rng):
    space = word_space(rng)
    proj = RidgeModel(rng.normal(size=(space.dim, 6)), 0.0)
    dec = DecompositionModel(rng.normal(size=(2 * space.dim, space.dim)), 0.0)
    adj, noun = annotate_dec(proj, dec, rng.normal(size=6), space, 100)
    assert all(space.tag(l) == "ADJ" for l in adj.labels)
    assert all(space.tag(l) == "NOUN" for l in noun.labels)
    assert len(adj) == 25 and len(noun) == 25


def test_dec_dim_mismatch(rng):
    space = word_space(rng)
    proj = RidgeModel(rng.normal(size=(space.dim, 6)), 0.0)
    dec = DecompositionModel(rng.normal(size=(8, 4)), 0.0)
    with pytest.raises(ContractError):
        annotate_dec(proj, dec, rng.normal(size=6), space, 3)


def test_direct_with_ncca_model(rng):
    space = word_space(rng, dim=6)
    F = rng.normal(size=(6, 6))
    labels = space.labels
    images = (np.linalg.inv(F) @ space.vectors.T).T
    model = train_ncca(PairedDataset(images, labels, space), power=0.0)
    r = annotate_direct(model, images[3], space, None, 1)
    assert r.labels == [labels[3]]


# ---------------------------------------------------------------- files


def test_bigram_file_round_trip(tmp_path, table):
    save_bigrams(table, tmp_path / "b.txt")
    back = load_bigrams(tmp_path / "b.txt")
    assert back.unigram_counts == table.unigram_counts
    assert back.bigram_counts == table.bigram_counts


def test_bigram_file_large_counts_exact(tmp_path):
    t = BigramTable({"cat": 123456789.0, "big": 2.5}, {("big", "cat"): 7654321.0})
    save_bigrams(t, tmp_path / "b.txt")
    back = load_bigrams(tmp_path / "b.txt")
    assert back.unigram_counts == t.unigram_counts and back.bigram_counts == t.bigram_counts


def test_bigram_file_without_sections(tmp_path):
    (tmp_path / "b.txt").write_text("cat\t10\nfurry\t5\nfurry\tcat\t3\n")
    t = load_bigrams(tmp_path / "b.txt")
    assert lm_score(t, "furry", "cat") == pytest.approx(0.3)


def test_bigram_file_errors(tmp_path):
    (tmp_path / "b.txt").write_text("cat\t10\nfurry\tcat\t3\n")
    with pytest.raises(FormatError):
        load_bigrams(tmp_path / "b.txt")
    (tmp_path / "c.txt").write_text("cat\tx\n")
    with pytest.raises(FormatError):
        load_bigrams(tmp_path / "c.txt")


def test_cooc_round_trip(tmp_path):
    cooc = {"cat": {"furry": 30, "black": 4}, "car": {"red": 25}}
    save_cooc(cooc, tmp_path / "c.tsv")
    back = load_cooc(tmp_path / "c.tsv")
    assert back == cooc
    assert back.adjectives_of("dog") == {}
