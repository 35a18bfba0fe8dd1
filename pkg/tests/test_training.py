"""
Testes do treino alvo/sombra, do DP-SGD e das visões do modelo.
"""
from dataclasses import replace

import numpy as np
import pytest
import torch

from exceptions import InvalidSpec
from models.fleet import balanced_inclusion, train_lira_fleet, train_shadow_fleet
from models.privacy import DPConfig, clip_per_sample_gradients, compute_noise_multiplier
from models.training import ModelConfig, accuracy, init_model, train_dp_model, train_model
from models.views import head_loss, head_parameters, model_views
from transform.samples import PropertyProportion, SampleSet

TINY = ModelConfig(architecture_id="mlp", max_epochs=3, batch_size=64, seed=0)


@pytest.fixture(scope="module")
def split(synthetic_small):
    return synthetic_small.subset(range(0, 200)), synthetic_small.subset(range(200, 400))


@pytest.fixture(scope="module")
def trained(split):
    train, test = split
    return train_model(TINY, train, test)


def test_max_epochs_one(split):
    train, test = split
    model = train_model(replace(TINY, max_epochs=1), train, test)
    assert len(model.training_log) == 1
    assert model.stop_reason in ("max_epochs", "overfit")


def _memorisable_split(n=32):
    # teste com os mesmos pontos e rótulos trocados: test_acc = 1 - train_acc
    labels = np.arange(n) % 2
    features = np.full((n, 1, 4, 4), 0.5, dtype=np.float32)
    features[:, 0, 0, 0] = np.where(labels == 1, 0.95, 0.05)

    def build(task_labels):
        return SampleSet(
            ids=np.arange(n), features=features, task_labels=task_labels,
            attributes=np.zeros(n, dtype=int), properties=np.zeros(n, dtype=int),
            num_classes=2, num_attributes=2, num_properties=2,
        )

    return build(labels), build(1 - labels)


def test_overfit_threshold_zero_stops_at_first_gap():
    train, test = _memorisable_split()
    config = ModelConfig(
        architecture_id="mlp", max_epochs=200, batch_size=64, learning_rate=1e-2, overfit_threshold=0.0
    )
    model = train_model(config, train, test)

    gaps = [e.train_acc - e.test_acc for e in model.training_log]
    assert model.stop_reason == "overfit"
    assert gaps[-1] > 0.0
    assert all(g <= 0.0 for g in gaps[:-1])
    assert model.epochs_trained == len(gaps) < 200


def test_invalid_config(split):
    train, test = split
    with pytest.raises(InvalidSpec):
        train_model(replace(TINY, max_epochs=0), train, test)
    with pytest.raises(InvalidSpec):
        train_model(replace(TINY, overfit_threshold=1.5), train, test)


def test_training_is_deterministic(split, trained):
    train, test = split
    again = train_model(TINY, train, test)
    assert again.fingerprint() == trained.fingerprint()


def test_separable_task_learns():
    rng = np.random.default_rng(0)
    n = 400
    labels = rng.integers(0, 2, size=n)
    features = rng.random((n, 1, 4, 4)).astype(np.float32) * 0.2
    features[:, 0, 0, 0] = np.where(labels == 1, 0.95, 0.05)
    samples = SampleSet(
        ids=np.arange(n), features=features, task_labels=labels,
        attributes=np.zeros(n, dtype=int), properties=np.zeros(n, dtype=int),
        num_classes=2, num_attributes=2, num_properties=2,
    )
    config = ModelConfig(architecture_id="mlp", max_epochs=50, batch_size=64, overfit_threshold=1.0)
    model = train_model(config, samples.subset(range(300)), samples.subset(range(300, n)))
    assert model.final_train_acc >= 0.95


def test_posteriors_are_distributions(trained, split):
    posteriors = trained.posteriors(split[1].features)
    assert np.all(posteriors >= 0)
    assert np.allclose(posteriors.sum(axis=1), 1.0, atol=1e-6)


def test_init_model_is_untrained(split):
    train, test = split
    model = init_model(TINY, train, test)
    assert model.epochs_trained == 0
    assert 0.0 <= accuracy(model, test) <= 1.0


# --- DP-SGD ---

def test_clipping_to_unit_norm():
    gradients = {"w": torch.tensor([[4.0, 0.0], [0.3, 0.4]])}
    clipped, norms = clip_per_sample_gradients(gradients, 1.0)
    assert torch.allclose(norms, torch.tensor([1.0, 0.5]))
    assert torch.allclose(clipped["w"][0], torch.tensor([1.0, 0.0]))
    assert torch.allclose(clipped["w"][1], torch.tensor([0.3, 0.4]))


def test_noise_multiplier_monotone_in_epsilon():
    sigmas = [compute_noise_multiplier(DPConfig(epsilon=eps), 10, 64, 1000) for eps in (10.0, 20.0, 50.0)]
    assert sigmas[0] > sigmas[1] > sigmas[2] > 0


def test_dp_training_respects_clip_norm(split):
    train, test = split
    dp = DPConfig(epsilon=10.0, clip_norm=1.0)
    model = train_dp_model(replace(TINY, max_epochs=1, dp=dp), train, test)
    assert model.noise_multiplier > 0
    assert model.training_log[0].max_clipped_norm <= 1.0 + 1e-6


def test_dp_without_noise_matches_plain_training(split):
    train, test = split
    dp = DPConfig(epsilon=10.0, clip_norm=1e6, noise_multiplier=0.0)
    plain = train_model(replace(TINY, max_epochs=1), train, test)
    private = train_model(replace(TINY, max_epochs=1, dp=dp), train, test)

    assert private.noise_multiplier == 0.0
    expected, actual = plain.state_arrays(), private.state_arrays()
    assert expected.keys() == actual.keys()
    for name in expected:
        assert np.allclose(actual[name], expected[name], atol=1e-4), name


# --- Visões ---

def test_last_layer_gradient_matches_finite_differences(trained, split):
    samples = split[1].subset(range(3))
    views = model_views(trained, samples)
    weight, bias = head_parameters(trained)
    labels = np.asarray(samples.task_labels)
    h = 1e-5

    numeric = np.zeros_like(views.last_layer_gradient)
    flat = np.concatenate([weight.ravel(), bias])
    for j in range(len(flat)):
        plus, minus = flat.copy(), flat.copy()
        plus[j] += h
        minus[j] -= h
        split_at = weight.size
        loss_plus = head_loss(views.embeddings, labels, plus[:split_at].reshape(weight.shape), plus[split_at:])
        loss_minus = head_loss(views.embeddings, labels, minus[:split_at].reshape(weight.shape), minus[split_at:])
        numeric[:, j] = (loss_plus - loss_minus) / (2 * h)

    assert np.allclose(views.last_layer_gradient, numeric, rtol=1e-3, atol=1e-7)


def test_views_are_aligned(trained, split):
    views = model_views(trained, split[1])
    assert len(views) == len(split[1])
    assert np.array_equal(views.predicted_label, np.argmax(views.posteriors, axis=1))
    assert np.all(views.loss >= 0)


# --- Frotas ---

def test_shadow_fleet_cardinality(synthetic_small):
    labels = [PropertyProportion((0.2, 0.8)), PropertyProportion((0.5, 0.5))]
    config = replace(TINY, max_epochs=1)
    fleet = train_shadow_fleet(config, synthetic_small, labels, 3, seed=1, samples_per_model=40)
    assert len(fleet) == 6
    assert [label for _, label in fleet] == [labels[0]] * 3 + [labels[1]] * 3


def test_shadow_fleet_is_deterministic(synthetic_small):
    labels = [PropertyProportion((0.2, 0.8))]
    config = replace(TINY, max_epochs=1)
    a = train_shadow_fleet(config, synthetic_small, labels, 1, seed=2, samples_per_model=40)
    b = train_shadow_fleet(config, synthetic_small, labels, 1, seed=2, samples_per_model=40)
    assert a[0][0].fingerprint() == b[0][0].fingerprint()
    assert all(label == labels[0] for _, label in a)


def test_balanced_inclusion_halves():
    inclusion = balanced_inclusion(6, 50, seed=0)
    assert np.all(inclusion.sum(axis=0) == 3)


def test_lira_fleet_rejects_odd_size(synthetic_small):
    with pytest.raises(InvalidSpec):
        train_lira_fleet(TINY, synthetic_small.subset(range(40)), 5, seed=0)
