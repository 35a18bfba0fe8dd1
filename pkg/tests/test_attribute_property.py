"""
Testes de AttrInf e PropInf.
"""
import numpy as np
import pytest

from conftest import make_samples, toy_model
from attacks.attribute import AttrInfConfig, attrinf_attack
from attacks.property import posterior_features, propinf_attack
from exceptions import DegenerateLabels, MissingAuxiliary, MissingFleet
from transform.samples import PropertyProportion, SampleSet

LABELS = [PropertyProportion((0.2, 0.8)), PropertyProportion((0.5, 0.5))]


def _planted_attribute(n, seed):
    """Amostras em que a feature 0 codifica o atributo."""
    rng = np.random.default_rng(seed)
    attributes = rng.integers(0, 2, size=n)
    features = rng.random((n, 1, 1, 8)).astype(np.float32) * 0.3 + 0.35
    features[:, 0, 0, 0] = np.where(attributes == 1, 0.9, 0.1)
    return SampleSet(
        ids=np.arange(n) + seed * 10000, features=features, task_labels=np.zeros(n, dtype=int),
        attributes=attributes, properties=attributes,
        num_classes=2, num_attributes=2, num_properties=2,
    )


@pytest.fixture
def identity_embedding():
    return toy_model(np.zeros((2, 8)), [0.0, 0.0], (1, 1, 8))


def test_planted_attribute_is_inferred(identity_embedding):
    result = attrinf_attack(identity_embedding, _planted_attribute(200, 1), _planted_attribute(200, 2))
    assert result.metrics["accuracy"] >= 0.95


def test_eval_on_aux_matches_training(identity_embedding):
    aux = _planted_attribute(200, 1)
    result = attrinf_attack(identity_embedding, aux, aux, AttrInfConfig(seed=3))
    assert result.metrics["accuracy"] >= result.details["training_accuracy"] - 0.05


def test_single_attribute_aux(identity_embedding):
    aux = _planted_attribute(50, 1)
    single = aux.subset(np.flatnonzero(aux.attributes == 0))
    with pytest.raises(DegenerateLabels):
        attrinf_attack(identity_embedding, single, aux)


def test_same_config_same_hash():
    assert AttrInfConfig(seed=1).config_hash() == AttrInfConfig(seed=1).config_hash()
    assert AttrInfConfig(seed=1).config_hash() != AttrInfConfig(seed=2).config_hash()


# --- PropInf ---

def _separable_fleet(per_label=20):
    rng = np.random.default_rng(0)
    fleets, features = [], {}
    for index, label in enumerate(LABELS):
        for replica in range(per_label):
            key = (index, replica)
            features[key] = rng.normal(3.0 * index, 0.3, size=6)
            fleets.append((key, label))
    return fleets, features


def _query_aux():
    return {LABELS[0]: make_samples([0, 1, 1, 1])}


def test_separable_fleet_is_learned():
    fleets, features = _separable_fleet()
    result = propinf_attack(fleets[0][0], fleets, _query_aux(), seed=0, feature_fn=features.__getitem__)
    assert result.metrics["accuracy"] >= 0.9
    assert result.feature_length == 6


def test_fleet_member_resubstitution():
    fleets, features = _separable_fleet()
    for model, label in (fleets[0], fleets[-1]):
        result = propinf_attack(model, fleets, _query_aux(), seed=0, feature_fn=features.__getitem__)
        assert result.predicted_proportion == label
        assert 0.5 <= result.confidence <= 1.0


def test_single_label_fleet():
    fleets, features = _separable_fleet()
    only_first = [(m, l) for m, l in fleets if l == LABELS[0]]
    with pytest.raises(MissingFleet):
        propinf_attack(only_first[0][0], only_first, _query_aux(), feature_fn=features.__getitem__)


def test_empty_query_aux():
    fleets, features = _separable_fleet()
    with pytest.raises(MissingAuxiliary):
        propinf_attack(fleets[0][0], fleets, {}, feature_fn=features.__getitem__)


def test_posterior_feature_length(bench_target, bench_bundle):
    vector = posterior_features(bench_target, bench_bundle.query_aux)
    assert vector.shape == (20 * bench_target.num_classes,)
