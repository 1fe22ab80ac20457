import warnings

import jsonschema
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import pearsonr, spearmanr

from visphrase.embedding_store import EmbeddingSpace, Ranking
from visphrase.errors import ContractError, FormatError, UndefinedMetricError
from visphrase.evaluation import (
    EvalReport,
    GoldAnnotation,
    adjective_concreteness,
    auc,
    concreteness_score,
    hit_at_k,
    load_concreteness,
    load_gold,
    mean_attribute_rank,
    per_attribute_auc,
    recall_at_k,
    report_schema,
    save_gold,
    structure_correlation,
)
from visphrase.synthetic import correlated_spaces


# ---------------------------------------------------------------- oracles


def hit_oracle(rankings, gold, k):
    g = {x.image_id: x.gold_adjectives for x in gold}
    hits = 0
    for r in rankings:
        found = False
        for label in r.labels[:k]:
            if label in g[r.query_id]:
                found = True
        hits += found
    return 100.0 * hits / len(rankings)


def recall_oracle(rankings, gold, k):
    g = {x.image_id: x.gold_adjectives for x in gold}
    total = 0.0
    for r in rankings:
        total += len([l for l in r.labels[:k] if l in g[r.query_id]]) / len(g[r.query_id])
    return 100.0 * total / len(rankings)


def sweep_auc(scores, positives):
    """Trapezoidal area under the ROC curve traced by sweeping every
    distinct threshold from high to low."""
    vals = [s for _, s in scores]
    pos = [i in positives for i, _ in scores]
    P = sum(pos)
    N = len(pos) - P
    points = [(0.0, 0.0)]
    for t in sorted(set(vals), reverse=True):
        tp = sum(1 for v, p in zip(vals, pos) if v >= t and p)
        fp = sum(1 for v, p in zip(vals, pos) if v >= t and not p)
        points.append((fp / N, tp / P))
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2
    return area


def random_fixture(rng, n_images=None, n_labels=None):
    n_images = n_images or int(rng.integers(20, 51))
    n_labels = n_labels or int(rng.integers(20, 51))
    labels = [f"l{i:02d}" for i in range(n_labels)]
    rankings, gold = [], []
    for i in range(n_images):
        iid = f"img{i:03d}"
        order = rng.permutation(n_labels)
        rankings.append(Ranking(iid, tuple((labels[j], float(n_labels - r)) for r, j in enumerate(order))))
        size = int(rng.integers(1, 4))
        gold.append(GoldAnnotation(iid, frozenset(labels[j] for j in rng.choice(n_labels, size, replace=False)), labels[0]))
    return rankings, gold


# ---------------------------------------------------------------- hit / recall


def test_hit_all_rank_one():
    rankings = [Ranking(f"i{i}", (("a", 1.0), ("b", 0.5))) for i in range(3)]
    gold = [GoldAnnotation(f"i{i}", frozenset({"a"})) for i in range(3)]
    assert hit_at_k(rankings, gold, [1, 2]) == {1: 100.0, 2: 100.0}


def test_hit_gold_absent():
    rankings = [Ranking("i", (("a", 1.0), ("b", 0.5)))]
    gold = [GoldAnnotation("i", frozenset({"z"}))]
    assert hit_at_k(rankings, gold, [1, 2, 5]) == {1: 0.0, 2: 0.0, 5: 0.0}


def test_recall_half():
    rankings = [Ranking("i", (("a", 0.9), ("c", 0.8), ("b", 0.1)))]
    gold = [GoldAnnotation("i", frozenset({"a", "b"}))]
    assert recall_at_k(rankings, gold, [2])[2] == pytest.approx(50.0)
    assert recall_at_k(rankings, gold, [3])[3] == pytest.approx(100.0)


def test_noun_target():
    rankings = [Ranking("i", (("cat", 0.9), ("dog", 0.8)))]
    gold = [GoldAnnotation("i", frozenset({"x"}), "dog")]
    assert hit_at_k(rankings, gold, [1, 2], target="noun") == {1: 0.0, 2: 100.0}


def test_missing_gold_is_contract_error():
    with pytest.raises(ContractError):
        hit_at_k([Ranking("i", (("a", 1.0),))], [GoldAnnotation("j", frozenset({"a"}))], [1])
    with pytest.raises(ContractError):
        recall_at_k([Ranking("i", (("a", 1.0),))], [GoldAnnotation("i", frozenset())], [1])


def test_hit_recall_match_oracles(rng):
    for _ in range(100):
        rankings, gold = random_fixture(rng)
        ks = [1, 3, 5, 10, 20]
        hits = hit_at_k(rankings, gold, ks)
        recalls = recall_at_k(rankings, gold, ks)
        for k in ks:
            assert hits[k] == hit_oracle(rankings, gold, k)
            assert recalls[k] == pytest.approx(recall_oracle(rankings, gold, k), abs=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_monotone_and_hit_dominates_recall(seed):
    rankings, gold = random_fixture(np.random.default_rng(seed), n_images=10, n_labels=15)
    ks = list(range(1, 16))
    h, r = hit_at_k(rankings, gold, ks), recall_at_k(rankings, gold, ks)
    for a, b in zip(ks, ks[1:]):
        assert h[b] >= h[a] and r[b] >= r[a] - 1e-12
    assert all(h[k] >= r[k] - 1e-12 for k in ks)


# ---------------------------------------------------------------- AUC


def test_auc_separated_and_ties():
    scores = [("a", 0.9), ("b", 0.8), ("c", 0.1), ("d", 0.0)]
    assert auc(scores, {"a", "b"}) == 1.0
    assert auc(scores, {"c", "d"}) == 0.0
    assert auc([(i, 0.3) for i in "abcd"], {"a"}) == 0.5


def test_auc_undefined():
    with pytest.raises(UndefinedMetricError):
        auc([("a", 1.0)], {"a"})
    with pytest.raises(UndefinedMetricError):
        auc([("a", 1.0)], set())


def test_auc_matches_threshold_sweep(rng):
    for _ in range(100):
        n = int(rng.integers(20, 51))
        # coarse values create ties
        vals = np.round(rng.normal(size=n), 1)
        ids = [f"x{i}" for i in range(n)]
        pos = {ids[i] for i in rng.choice(n, int(rng.integers(1, n)), replace=False)}
        scores = list(zip(ids, vals))
        assert abs(auc(scores, pos) - sweep_auc(scores, pos)) <= 1e-12


@given(st.lists(st.integers(-1000, 1000), min_size=4, max_size=30, unique=True), st.data())
def test_auc_transform_and_negation(vals, data):
    # distinct integers keep the transform strictly increasing in floating point
    vals = [float(v) for v in vals]
    ids = [f"x{i}" for i in range(len(vals))]
    n_pos = data.draw(st.integers(1, len(vals) - 1))
    pos = set(ids[:n_pos])
    a = auc(list(zip(ids, vals)), pos)
    assert 0.0 <= a <= 1.0
    assert auc(list(zip(ids, np.exp(np.array(vals) / 500.0) * 3 + 1)), pos) == pytest.approx(a, abs=1e-12)
    assert a + auc(list(zip(ids, [-v for v in vals])), pos) == pytest.approx(1.0, abs=1e-12)


def test_per_attribute_auc_skips_degenerate_columns():
    ids = ["i1", "i2", "i3"]
    gold = [GoldAnnotation("i1", frozenset({"red", "big"})), GoldAnnotation("i2", frozenset({"big"})), GoldAnnotation("i3", frozenset({"big"}))]
    sims = np.array([[0.9, 0.1], [0.2, 0.2], [0.1, 0.3]])
    out = per_attribute_auc(ids, sims, ["red", "big"], gold)
    assert out == {"red": 1.0}


# ---------------------------------------------------------------- mean rank


def test_mean_rank_examples():
    r1 = Ranking("a", (("yellow", 1.0), ("red", 0.5)))
    r2 = Ranking("b", (("red", 1.0), ("yellow", 0.5), ("big", 0.1)))
    r3 = Ranking("c", (("red", 1.0), ("big", 0.5), ("yellow", 0.1)))
    assert mean_attribute_rank([r1], "yellow") == 1.0
    assert mean_attribute_rank([r2, r3], "yellow") == 2.5
    with pytest.raises(ContractError):
        mean_attribute_rank([r1], "big")


def test_mean_rank_matches_oracle(rng):
    for _ in range(100):
        rankings, _ = random_fixture(rng)
        label = rankings[0].labels[int(rng.integers(len(rankings[0])))]
        oracle = sum(r.labels.index(label) + 1 for r in rankings) / len(rankings)
        assert mean_attribute_rank(rankings, label) == oracle


# ---------------------------------------------------------------- structure correlation


def rotated_copy(space, rng, scale=3.0):
    Q = np.linalg.qr(rng.normal(size=(space.dim, space.dim)))[0]
    return EmbeddingSpace(space.labels, scale * space.vectors @ Q)


def test_rotated_copy_is_perfectly_correlated(rng):
    a, _ = correlated_spaces(seed=1)
    res = structure_correlation(a, rotated_copy(a, rng), a.labels, n_permutations=200)
    assert res.rho == pytest.approx(1.0, abs=1e-12)
    assert res.n_pairs == 30 * 29 // 2
    assert res.p_value == pytest.approx(1 / 201)


def test_matches_scipy_statistics():
    a, b = correlated_spaces(seed=2)
    labels = list(a.labels)
    iu = np.triu_indices(len(labels), 1)
    ca = a.normalized().vectors @ a.normalized().vectors.T
    cb = b.normalized().vectors @ b.normalized().vectors.T
    sp = structure_correlation(a, b, labels, n_permutations=10)
    pe = structure_correlation(a, b, labels, method="pearson", n_permutations=10)
    assert sp.rho == pytest.approx(spearmanr(ca[iu], cb[iu])[0], abs=1e-12)
    assert pe.rho == pytest.approx(pearsonr(ca[iu], cb[iu])[0], abs=1e-12)


def test_permutation_p_value_matches_oracle():
    a, b = correlated_spaces(n_labels=12, noise=3.0, seed=3)
    labels = list(a.labels)
    iu = np.triu_indices(12, 1)
    ca = a.normalized().vectors @ a.normalized().vectors.T
    cb = b.normalized().vectors @ b.normalized().vectors.T
    rho = spearmanr(ca[iu], cb[iu])[0]
    rng = np.random.default_rng(7)
    exceed = 0
    for _ in range(300):
        p = rng.permutation(12)
        exceed += abs(spearmanr(ca[iu], cb[np.ix_(p, p)][iu])[0]) >= abs(rho) - 1e-12
    res = structure_correlation(a, b, labels, n_permutations=300, seed=7)
    assert res.p_value == pytest.approx((exceed + 1) / 301)


def test_random_spaces_mostly_insignificant():
    rng = np.random.default_rng(4)
    ps = []
    for seed in range(10):
        labels = [f"c{i:02d}" for i in range(20)]
        a = EmbeddingSpace(labels, rng.normal(size=(20, 10)))
        b = EmbeddingSpace(labels, rng.normal(size=(20, 10)))
        res = structure_correlation(a, b, labels, n_permutations=500, seed=seed)
        assert abs(res.rho) < 0.3
        ps.append(res.p_value)
    assert sum(p > 0.05 for p in ps) >= 7


@given(st.integers(0, 10_000), st.floats(0.1, 10))
def test_structure_invariant_to_rotation_and_scale(seed, scale):
    rng = np.random.default_rng(seed)
    a, b = correlated_spaces(n_labels=10, dim=5, seed=seed)
    base = structure_correlation(a, b, a.labels, n_permutations=5).rho
    moved = structure_correlation(rotated_copy(a, rng, scale), rotated_copy(b, rng, 1 / scale), a.labels, n_permutations=5).rho
    assert moved == pytest.approx(base, abs=1e-9)


def test_structure_needs_three_labels():
    a, b = correlated_spaces(n_labels=5)
    with pytest.raises(ContractError):
        structure_correlation(a, b, a.labels[:2])


# ---------------------------------------------------------------- concreteness


def test_single_noun_adjective():
    assert adjective_concreteness({"rock": {"hard": 3}}, {"rock": 4.0}) == {"hard": 4.0}


def test_weighted_mean():
    table = adjective_concreteness({"n1": {"a": 1}, "n2": {"a": 3}}, {"n1": 2.0, "n2": 4.0})
    assert table["a"] == pytest.approx(3.5)


def test_uniform_concreteness_constant(rng):
    nouns = [f"n{i}" for i in range(5)]
    adjs = [f"a{i}" for i in range(8)]
    cooc = {n: {a: int(rng.integers(1, 9)) for a in adjs} for n in nouns}
    conc = {n: 3.25 for n in nouns}
    for _ in range(5):
        order = rng.permutation(8)
        r = Ranking("i", tuple((adjs[j], float(8 - k)) for k, j in enumerate(order)))
        assert concreteness_score(r, conc, cooc) == pytest.approx(3.25)


def test_unscored_adjectives_dropped_with_warning():
    r = Ranking("i", (("x", 1.0), ("a", 0.5)))
    with pytest.warns(UserWarning):
        assert concreteness_score(r, {"n": 2.0}, {"n": {"a": 1}}, top_n=2) == 2.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(UndefinedMetricError):
            concreteness_score(r, {"n": 2.0}, {"n": {"a": 1}}, top_n=1)


def test_load_concreteness(tmp_path):
    (tmp_path / "c.tsv").write_text("rock\t4.5\nidea\t1.2\n")
    assert load_concreteness(tmp_path / "c.tsv") == {"rock": 4.5, "idea": 1.2}
    (tmp_path / "d.tsv").write_text("rock 4.5\n")
    with pytest.raises(FormatError):
        load_concreteness(tmp_path / "d.tsv")


# ---------------------------------------------------------------- gold + report


def test_gold_round_trip(tmp_path):
    gold = [GoldAnnotation("i1", frozenset({"red", "shiny"}), "car"), GoldAnnotation("i2", frozenset({"furry"}))]
    save_gold(gold, tmp_path / "g.tsv")
    assert load_gold(tmp_path / "g.tsv") == gold


def test_gold_duplicate_id(tmp_path):
    (tmp_path / "g.tsv").write_text("i1\tcar\tred\ni1\tcar\tblue\n")
    with pytest.raises(FormatError):
        load_gold(tmp_path / "g.tsv")


def test_report_validates_against_schema(rng):
    rankings, gold = random_fixture(rng)
    ks = [1, 5, 10]
    h, r = hit_at_k(rankings, gold, ks), recall_at_k(rankings, gold, ks)
    report = EvalReport(
        {"ADJ": {k: {"hit_percent": h[k], "recall_percent": r[k]} for k in ks}},
        per_attribute_auc={"l01": 0.75},
        mean_ranks={"l00:l01": 2.5},
        concreteness={"mean": 3.0, "median": 3.0, "n_images": 2, "per_image": {"a": 3.0}},
        metadata={"library_version": "x", "config_hash": "y", "mode": "dec", "candidate_sizes": {"ADJ": 20}},
    )
    import json

    jsonschema.validate(json.loads(report.to_json()), report_schema())
    text = report.to_table()
    assert "ADJ retrieval" in text and "l01 0.7500" in text
    bad = report.to_dict()
    bad["per_attribute_auc"]["l01"] = 1.5
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, report_schema())
