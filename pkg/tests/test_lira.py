"""
Testes do LiRA: razão de verossimilhança gaussiana e a frota online.
"""
import numpy as np
import pytest

from attacks.lira import fit_gaussian, gaussian_log_ratio, lira_attack, lira_result
from exceptions import MissingFleet
from models.fleet import LiraFleet, balanced_inclusion


def test_symmetric_midpoint_scores_zero():
    score = gaussian_log_ratio(1.0, [2.0], [[1.0]], [0.0], [[1.0]])
    assert score == pytest.approx(0.0, abs=1e-12)


def test_closed_form_score_favors_in():
    score = gaussian_log_ratio(2.0, [2.0], [[1.0]], [0.0], [[1.0]])
    assert score == pytest.approx(-2.0, abs=1e-12)


def test_fit_gaussian_regularizes_covariance():
    mean, cov = fit_gaussian(np.ones((4, 2)))
    assert np.allclose(mean, [1.0, 1.0])
    assert np.allclose(cov, 1e-6 * np.eye(2))


def test_negative_scores_predict_member():
    result = lira_result(np.array([-1.0, 0.5, -0.1, 2.0]), np.array([1, 0, 1, 0]))
    assert result.predictions.tolist() == [1, 0, 1, 0]
    assert result.metrics["auc"] == pytest.approx(1.0)


def test_identical_distributions_give_null_scores(bench_target, bench_bundle):
    samples = bench_bundle.target_test.subset(range(20))
    fleet = LiraFleet(models=[bench_target] * 4, pool=samples, inclusion=balanced_inclusion(4, len(samples), 0))
    membership = np.array([1, 0] * 10)
    result = lira_attack(bench_target, fleet, samples, membership)
    assert np.allclose(result.scores, 0.0, atol=1e-9)


def test_samples_outside_pool(bench_target, bench_bundle):
    pool = bench_bundle.target_test.subset(range(10))
    fleet = LiraFleet(models=[bench_target] * 4, pool=pool, inclusion=balanced_inclusion(4, 10, 0))
    outside = bench_bundle.shadow_test.subset(range(3))
    with pytest.raises(MissingFleet):
        lira_attack(bench_target, fleet, outside, np.array([1, 0, 1]))
