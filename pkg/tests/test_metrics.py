import numpy as np
import pytest

from dethetgp import MetricTriple, empirical_mse, score, true_mse


def test_true_mse_identical_vectors():
    v = np.array([0.1, -0.2, 3.0])
    assert true_mse(v, v) == 0.0


def test_true_mse_simple_value():
    assert true_mse([0.0, 0.0], [1.0, 3.0]) == pytest.approx(5.0)


def test_true_mse_matches_naive_loop():
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal(40), rng.standard_normal(40)
    total = 0.0
    for x, y in zip(a, b):
        total += (x - y) ** 2
    assert true_mse(a, b) == pytest.approx(total / 40, abs=1e-15)


def test_true_mse_length_mismatch():
    with pytest.raises(ValueError):
        true_mse([0.0], [1.0, 2.0])


def test_empirical_mse_zero_when_draws_equal_means():
    means = np.array([1.0, -2.0])
    draws = np.tile(means, (5, 1))
    assert empirical_mse(means, draws) == 0.0


def test_empirical_mse_single_column():
    assert empirical_mse([0.0], np.array([[1.0], [-1.0]])) == pytest.approx(1.0)


def test_empirical_mse_matches_naive_loop():
    rng = np.random.default_rng(1)
    means = rng.standard_normal(7)
    draws = rng.standard_normal((9, 7))
    total = 0.0
    for r in range(9):
        for m in range(7):
            total += (draws[r, m] - means[m]) ** 2
    assert empirical_mse(means, draws) == pytest.approx(total / 63, abs=1e-14)


def test_empirical_mse_decomposes_into_truth_error_plus_variance():
    rng = np.random.default_rng(2)
    mu, sigma_sq = 0.7, 1.9
    draws = rng.normal(mu, np.sqrt(sigma_sq), size=(10_000, 1))
    got = empirical_mse([mu], draws)
    assert got == pytest.approx(sigma_sq, rel=0.05)


def test_score_zero_at_exact_unit_variance_predictions():
    means = np.zeros(10)
    draws = np.tile(means, (10, 1))
    assert score(means, np.ones(10), draws) == 0.0


def test_score_single_pair():
    assert score([0.0], [1.0], np.array([[1.0]])) == pytest.approx(-1.0)


def test_score_matches_naive_loop():
    rng = np.random.default_rng(3)
    means = rng.standard_normal(6)
    variances = rng.uniform(0.2, 2.0, 6)
    draws = rng.standard_normal((8, 6))
    total = 0.0
    for r in range(8):
        for m in range(6):
            total += -((draws[r, m] - means[m]) ** 2) / variances[m] - np.log(variances[m])
    assert score(means, variances, draws) == pytest.approx(total, abs=1e-10)


def test_score_requires_positive_variance():
    with pytest.raises(ValueError):
        score([0.0], [0.0], np.array([[1.0]]))


def test_score_is_total_not_mean():
    means = np.zeros(4)
    variances = np.full(4, 2.0)
    draws = np.zeros((25, 4))
    assert score(means, variances, draws) == pytest.approx(-100 * np.log(2.0))


def test_score_prefers_the_generating_parameters():
    rng = np.random.default_rng(4)
    mu, var = 0.3, 1.4
    hits_mean, hits_var = 0, 0
    for _ in range(50):
        draws = rng.normal(mu, np.sqrt(var), size=(1000, 1))
        at_truth = score([mu], [var], draws)
        hits_mean += at_truth > score([mu + 0.5], [var], draws)
        hits_var += at_truth > score([mu], [2.0 * var], draws)
    assert hits_mean >= 48
    assert hits_var >= 48


def test_metrics_permutation_invariant():
    rng = np.random.default_rng(5)
    means = rng.standard_normal(12)
    variances = rng.uniform(0.5, 1.5, 12)
    truth = rng.standard_normal(12)
    draws = rng.standard_normal((6, 12))
    perm = rng.permutation(12)
    assert true_mse(means, truth) == pytest.approx(true_mse(means[perm], truth[perm]))
    assert empirical_mse(means, draws) == pytest.approx(
        empirical_mse(means[perm], draws[:, perm]))
    assert score(means, variances, draws) == pytest.approx(
        score(means[perm], variances[perm], draws[:, perm]))


def test_metric_triple_validation():
    MetricTriple(true_mse=None, mse=0.1, score=-3.0)
    with pytest.raises(ValueError):
        MetricTriple(true_mse=-0.1, mse=0.1, score=0.0)
    with pytest.raises(ValueError):
        MetricTriple(true_mse=0.1, mse=-0.1, score=0.0)
