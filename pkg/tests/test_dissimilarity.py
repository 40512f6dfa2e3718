"""Distance measures against closed forms and brute-force oracles."""

import json
import math

import numpy as np
import pytest

from mixmood.dissimilarity import (
    DatasetDissimilarity,
    DissimilarityParams,
    cosine_distance,
    density_distance_round,
    js_divergence,
    measure_dissimilarity,
    nn_distance_round,
    shared_histograms,
    subsample_pair,
)
from mixmood.errors import ValidationError
from mixmood.rng import derive_round_seed


def gaussian_blob(n, dim, shift=0.0, seed=0):
    rng = np.random.default_rng(seed)
    return (rng.normal(size=(n, dim)) + shift).astype(np.float32)


# --- subsampling ----------------------------------------------------------------


def test_subsample_full_draw_is_permutation():
    m = np.arange(40, dtype=np.float32).reshape(10, 4)
    h_a, h_b = subsample_pair(m, m, 10, round_seed=3)
    assert sorted(map(tuple, h_a)) == sorted(map(tuple, m))
    assert sorted(map(tuple, h_b)) == sorted(map(tuple, m))
    assert not np.array_equal(h_a, h_b)  # decorrelated draw order


def test_subsample_deterministic():
    a = gaussian_blob(30, 3, seed=1)
    b = gaussian_blob(25, 3, seed=2)
    first = subsample_pair(a, b, 8, round_seed=99)
    second = subsample_pair(a, b, 8, round_seed=99)
    assert np.array_equal(first[0], second[0])
    assert np.array_equal(first[1], second[1])


def test_subsample_tau_too_large():
    a = gaussian_blob(5, 2)
    with pytest.raises(ValidationError, match="tau"):
        subsample_pair(a, a, 6, round_seed=0)


def test_subsample_inclusion_frequency_binomial_bound():
    rows, tau, rounds = 20, 5, 10_000
    m = np.arange(rows * 2, dtype=np.float32).reshape(rows, 2)
    counts = np.zeros(rows)
    for c in range(rounds):
        h_a, _ = subsample_pair(m, m, tau, round_seed=derive_round_seed(77, c))
        counts[h_a[:, 0].astype(int) // 2] += 1
    p = tau / rows
    sigma = math.sqrt(p * (1 - p) / rounds)
    assert np.all(np.abs(counts / rounds - p) <= 3 * sigma)


# --- nearest-neighbour rounds -----------------------------------------------------


def test_nn_distance_identical_sets_zero():
    h = gaussian_blob(15, 6, seed=4)
    assert nn_distance_round(h, h, 1) == 0.0
    assert nn_distance_round(h, h, 2) == 0.0


def test_nn_distance_three_four_five():
    a = np.array([[0.0, 0.0]])
    b = np.array([[3.0, 4.0]])
    assert nn_distance_round(a, b, 2) == pytest.approx(5.0)
    assert nn_distance_round(a, b, 1) == pytest.approx(7.0)


def test_nn_distance_matches_double_loop_oracle():
    rng = np.random.default_rng(8)
    for trial in range(5):
        a = rng.normal(size=(20, 5))
        b = rng.normal(size=(20, 5))
        for p in (1, 2):
            got = nn_distance_round(a, b, p)
            total = 0.0
            for row in a:
                best = math.inf
                for other in b:
                    if p == 1:
                        d = float(np.abs(row - other).sum())
                    else:
                        d = float(math.sqrt(((row - other) ** 2).sum()))
                    best = min(best, d)
                total += best
            assert got == pytest.approx(total / len(a), abs=1e-9)


def test_nn_distance_dimension_mismatch():
    with pytest.raises(ValidationError, match="dimensions"):
        nn_distance_round(np.ones((2, 3)), np.ones((2, 4)), 2)


# --- histograms -------------------------------------------------------------------


def test_shared_histograms_identical_columns():
    col = np.array([0.0, 0.5, 0.5, 2.0])
    pa, pb = shared_histograms(col, col, 4)
    assert np.array_equal(pa.mass, pb.mass)
    assert np.array_equal(pa.edges, pb.edges)
    assert pa.mass.sum() == pytest.approx(1.0, abs=1e-12)


def test_shared_histograms_separated_point_masses():
    pa, pb = shared_histograms([0.0, 0.0], [1.0, 1.0], 2)
    assert np.allclose(pa.mass, [1.0, 0.0])
    assert np.allclose(pb.mass, [0.0, 1.0])


def test_shared_histograms_degenerate_span_widened():
    pa, pb = shared_histograms([2.0, 2.0], [2.0, 2.0], 2)
    assert pa.edges[0] == pytest.approx(1.5)
    assert pa.edges[-1] == pytest.approx(2.5)
    assert pa.mass.sum() == pytest.approx(1.0)


def test_shared_histograms_match_counting_oracle():
    rng = np.random.default_rng(12)
    for _ in range(10):
        a = rng.normal(size=40)
        b = rng.normal(size=40) + rng.uniform(-1, 1)
        bins = int(rng.integers(2, 12))
        pa, pb = shared_histograms(a, b, bins)
        edges = pa.edges
        assert edges[0] == min(a.min(), b.min())
        assert edges[-1] == max(a.max(), b.max())
        for values, hist in ((a, pa), (b, pb)):
            counts = [0] * bins
            for v in values:  # right-open bins, top edge inclusive
                for k in range(bins):
                    if edges[k] <= v < edges[k + 1] or (k == bins - 1 and v == edges[-1]):
                        counts[k] += 1
                        break
            assert np.array_equal(hist.mass, np.array(counts) / len(values))


# --- histogram divergences --------------------------------------------------------


def test_js_divergence_examples():
    assert js_divergence(np.array([0.3, 0.7]), np.array([0.3, 0.7])) == 0.0
    assert js_divergence(np.array([1.0, 0.0]), np.array([0.5, 0.5])) == pytest.approx(
        0.31128, abs=1e-5
    )
    assert js_divergence(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(1.0)


def test_cosine_distance_examples():
    assert cosine_distance(np.array([0.5, 0.5]), np.array([0.5, 0.5])) == 0.0
    assert cosine_distance(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(1.0)
    assert cosine_distance(np.array([1.0, 0.0]), np.array([0.5, 0.5])) == pytest.approx(
        1.0 - 1.0 / math.sqrt(2.0), abs=1e-5
    )


def test_divergences_symmetric_and_zero_iff_equal():
    rng = np.random.default_rng(13)
    for _ in range(20):
        p = rng.dirichlet(np.ones(6))
        q = rng.dirichlet(np.ones(6))
        assert js_divergence(p, q) == pytest.approx(js_divergence(q, p), abs=1e-12)
        assert cosine_distance(p, q) == pytest.approx(cosine_distance(q, p), abs=1e-12)
        assert 0.0 <= js_divergence(p, q) <= 1.0
        assert 0.0 <= cosine_distance(p, q) <= 1.0
        if not np.allclose(p, q, atol=1e-12):
            assert js_divergence(p, q) > 0.0
            assert cosine_distance(p, q) > 0.0
        assert js_divergence(p, p) <= 1e-12
        assert cosine_distance(p, p) <= 1e-12


def test_js_requires_shared_edges():
    pa, _ = shared_histograms([0.0, 1.0], [0.0, 1.0], 2)
    _, qb = shared_histograms([5.0, 9.0], [5.0, 9.0], 2)
    with pytest.raises(ValidationError, match="edges"):
        js_divergence(pa, qb)


# --- density rounds ---------------------------------------------------------------


def test_density_distance_identical_sets_zero():
    h = gaussian_blob(30, 5, seed=14)
    assert density_distance_round(h, h, "js", 10) == 0.0
    assert density_distance_round(h, h, "cos", 10) == 0.0


def test_density_distance_additivity():
    # two dimensions with known per-dimension values add up
    col0_a, col0_b = np.zeros(4), np.ones(4)
    col1_a = np.array([0.0, 0.0, 1.0, 1.0])
    col1_b = col1_a.copy()
    h_a = np.column_stack([col0_a, col1_a])
    h_b = np.column_stack([col0_b, col1_b])
    v0 = js_divergence(*shared_histograms(col0_a, col0_b, 4))
    v1 = js_divergence(*shared_histograms(col1_a, col1_b, 4))
    assert v1 == 0.0
    got = density_distance_round(h_a, h_b, "js", 4)
    assert got == pytest.approx(v0 + v1, abs=1e-12)


def test_vectorized_histograms_bit_identical_to_reference():
    from mixmood.dissimilarity import _column_histograms

    rng = np.random.default_rng(77)
    a = rng.normal(size=(37, 12))
    b = rng.normal(size=(37, 12)) + 0.25
    a[:, 3] = 1.5  # degenerate column on one side
    b[:, 3] = 1.5  # fully degenerate pooled span
    edges, mass_a, mass_b = _column_histograms(a, b, 9)
    for r in range(12):
        pa, pb = shared_histograms(a[:, r], b[:, r], 9)
        assert np.array_equal(edges[r], pa.edges)
        assert np.array_equal(mass_a[r], pa.mass)
        assert np.array_equal(mass_b[r], pb.mass)


def test_density_distance_matches_per_dimension_oracle():
    rng = np.random.default_rng(15)
    h_a = rng.normal(size=(80, 8))
    h_b = rng.normal(size=(80, 8)) + 0.5
    for kind, delta in (("js", js_divergence), ("cos", cosine_distance)):
        got = density_distance_round(h_a, h_b, kind, 10)
        expected = sum(
            delta(*shared_histograms(h_a[:, r], h_b[:, r], 10)) for r in range(8)
        )
        assert got == pytest.approx(expected, abs=1e-9)
        assert 0.0 <= got <= 8.0


# --- full measure ------------------------------------------------------------------


def test_measure_constant_matrix_flags_low_confidence():
    m = np.ones((50, 4), dtype=np.float32)
    report = measure_dissimilarity(m, m, DissimilarityParams(measure="l2", tau=10, rounds=8))
    assert report.d_bar == 0.0
    assert report.p_value == 1.0
    assert report.low_confidence


def test_measure_closed_form_zero_vs_one_rows():
    s_a = np.zeros((40, 2), dtype=np.float32)
    s_b = np.ones((40, 2), dtype=np.float32)
    report = measure_dissimilarity(
        s_a, s_b, DissimilarityParams(measure="l1", tau=7, rounds=5, seed=3)
    )
    assert report.inter == (2.0,) * 5
    assert report.intra == (0.0,) * 5
    assert report.d_bar == 2.0


def test_measure_detects_larger_shift():
    s_l = gaussian_blob(200, 6, seed=20)
    near = gaussian_blob(200, 6, shift=0.0, seed=21)
    far = gaussian_blob(200, 6, shift=4.0, seed=22)
    params = DissimilarityParams(measure="cos", tau=40, rounds=10, seed=5)
    assert (
        measure_dissimilarity(s_l, far, params).d_bar
        > measure_dissimilarity(s_l, near, params).d_bar
    )


@pytest.mark.parametrize("measure", ["l1", "l2", "js", "cos"])
def test_measure_monotone_in_shift(measure):
    s_l = gaussian_blob(300, 8, seed=30)
    params = DissimilarityParams(measure=measure, tau=40, rounds=10, seed=9)
    d_bars = [
        measure_dissimilarity(s_l, gaussian_blob(300, 8, shift=mu, seed=31), params).d_bar
        for mu in (0.0, 1.0, 2.0, 4.0)
    ]
    assert all(a < b for a, b in zip(d_bars, d_bars[1:])), d_bars


def test_self_distance_below_shifted_distance():
    s = gaussian_blob(150, 5, seed=33)
    shifted = s + np.float32(2.0)
    params = DissimilarityParams(measure="l2", tau=30, rounds=10, seed=2)
    assert (
        measure_dissimilarity(s, s, params).d_bar
        <= measure_dissimilarity(s, shifted, params).d_bar
    )


def test_measure_thread_count_does_not_change_results():
    s_a = gaussian_blob(100, 6, seed=40)
    s_b = gaussian_blob(100, 6, shift=1.0, seed=41)
    params = DissimilarityParams(measure="js", tau=25, rounds=12, seed=7)
    seq = measure_dissimilarity(s_a, s_b, params, n_threads=1)
    par = measure_dissimilarity(s_a, s_b, params, n_threads=8)
    assert seq == par
    assert seq.to_json() == par.to_json()


def test_measure_rejects_mismatched_dims():
    with pytest.raises(ValidationError, match="dimensions"):
        measure_dissimilarity(
            np.ones((10, 3), dtype=np.float32),
            np.ones((10, 4), dtype=np.float32),
            DissimilarityParams(tau=5, rounds=2),
        )


def test_params_validation():
    with pytest.raises(ValidationError):
        DissimilarityParams(measure="manhattan")
    with pytest.raises(ValidationError):
        DissimilarityParams(tau=1)
    with pytest.raises(ValidationError):
        DissimilarityParams(rounds=0)
    with pytest.raises(ValidationError):
        DissimilarityParams(bins=1)


def test_report_json_is_stable_and_ordered():
    s_a = gaussian_blob(60, 4, seed=50)
    s_b = gaussian_blob(60, 4, shift=1.0, seed=51)
    params = DissimilarityParams(measure="cos", tau=15, rounds=6, seed=11)
    r1 = measure_dissimilarity(s_a, s_b, params)
    r2 = measure_dissimilarity(s_a, s_b, params)
    assert r1.to_json() == r2.to_json()
    doc = json.loads(r1.to_json())
    assert list(doc) == [
        "measure", "d_bar", "p_value", "low_confidence", "inter", "intra", "diffs", "params",
    ]
    assert doc["params"]["wilcoxon_alternative"] == "two-sided"
    assert doc["d_bar"] == pytest.approx(np.mean(np.abs(np.array(doc["inter"]) - doc["intra"])))


def test_estimator_facade():
    s_l = gaussian_blob(100, 4, seed=60)
    est = DatasetDissimilarity(measure="cos", tau=20, rounds=5, seed=1)
    assert est.get_params()["measure"] == "cos"
    est.fit(s_l)
    near = gaussian_blob(100, 4, shift=0.5, seed=61)
    far = gaussian_blob(100, 4, shift=3.0, seed=62)
    assert est.score_candidate(near) < est.score_candidate(far)
    ranking = est.rank({"far": far, "near": near})
    assert ranking.best == "near"


def test_estimator_requires_fit():
    with pytest.raises(ValidationError, match="not fitted"):
        DatasetDissimilarity().report(np.ones((5, 2), dtype=np.float32))
