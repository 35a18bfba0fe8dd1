"""
Testes dos ataques adversariais (PGD e Square) e do perfil L2.
"""
import numpy as np
import pytest

from conftest import toy_model
from attacks.adversarial import AdvParams, adv_l2_profile, p_selection, pgd_attack, square_attack
from exceptions import InvalidSpec

IDENTITY = [[1.0, 0.0], [0.0, 1.0]]


def _near_boundary():
    return np.array([[[0.51, 0.50]]], dtype=np.float32)


def test_pgd_zero_budget():
    model = toy_model(IDENTITY, [0.0, 0.0], (1, 1, 2))
    result = pgd_attack(model, _near_boundary(), epsilon=0.0)
    assert not result.flipped
    assert result.l2_distance == 0.0
    assert np.array_equal(result.adversarial, _near_boundary())


def test_pgd_no_iterations():
    model = toy_model(IDENTITY, [0.0, 0.0], (1, 1, 2))
    result = pgd_attack(model, _near_boundary(), epsilon=0.1, max_iters=0)
    assert np.array_equal(result.adversarial, _near_boundary())
    assert result.queries_or_iters == 0


def test_pgd_linear_model_flips_in_one_step():
    model = toy_model(IDENTITY, [0.0, 0.0], (1, 1, 2))
    result = pgd_attack(model, _near_boundary(), epsilon=0.05, step=0.02, max_iters=10)

    assert result.flipped
    assert result.queries_or_iters == 1
    # gradiente da CE do rótulo 0 tem sinal (-1, +1)
    assert result.adversarial.ravel() == pytest.approx([0.49, 0.52], abs=1e-6)
    assert result.l2_distance == pytest.approx(np.sqrt(2) * 0.02, abs=1e-6)


def test_square_zero_budget():
    model = toy_model(IDENTITY, [0.0, 0.0], (1, 1, 2))
    result = square_attack(model, _near_boundary(), max_queries=0)
    assert not result.flipped
    assert result.l2_distance == 0.0


def test_square_on_constant_model_never_flips():
    model = toy_model(np.zeros((2, 16)), [0.0, 0.0], (1, 4, 4))
    features = np.full((1, 4, 4), 0.5, dtype=np.float32)
    result = square_attack(model, features, epsilon=0.1, max_queries=30, seed=0)
    assert not result.flipped
    assert result.queries_or_iters == 30


def test_square_is_deterministic(bench_target, bench_bundle):
    features = bench_bundle.target_test.features[0]
    a = square_attack(bench_target, features, epsilon=0.1, max_queries=50, seed=9)
    b = square_attack(bench_target, features, epsilon=0.1, max_queries=50, seed=9)
    assert a.flipped == b.flipped
    assert a.queries_or_iters == b.queries_or_iters
    assert np.array_equal(a.adversarial, b.adversarial)
    assert a.queries_or_iters <= 50
    assert np.max(np.abs(a.adversarial - features)) <= 0.1 + 1e-6


def test_p_selection_schedule_decreases():
    values = [p_selection(0.3, i, 1000) for i in (0, 100, 500, 900)]
    assert values == sorted(values, reverse=True)
    assert values[0] == pytest.approx(0.3)


def test_l2_profile_zero_epsilon(bench_target, bench_bundle):
    samples = bench_bundle.target_test.subset(range(5))
    params = AdvParams(epsilon=0.0)
    for mode in ("pgd", "square"):
        assert np.array_equal(adv_l2_profile(bench_target, samples, mode, params), np.zeros(5))


def test_invalid_params():
    with pytest.raises(InvalidSpec):
        AdvParams(mode="fgsm").validate()
    with pytest.raises(InvalidSpec):
        AdvParams(epsilon=-1.0).validate()
