"""
Testes da partição em quatro componentes e dos conjuntos auxiliares.
"""
import numpy as np
import pytest

from conftest import make_samples
from exceptions import DisjointnessViolation, InsufficientSamples, InvalidSpec
from transform.partition import PARTITIONS, DatasetBundle, PartitionSpec, partition_dataset
from transform.samples import PropertyProportion


@pytest.fixture
def thousand():
    return make_samples([0] * 500 + [1] * 500)


def _quarter_spec(**overrides):
    base = dict(fractions={p: 0.25 for p in PARTITIONS})
    base.update(overrides)
    return PartitionSpec(**base)


def test_symmetric_split(thousand):
    half = PropertyProportion((0.5, 0.5))
    spec = _quarter_spec(proportions={"target_train": half, "shadow_train": half})
    bundle = partition_dataset(thousand, spec, seed=0)

    for name, part in bundle.partitions().items():
        assert len(part) == 250, name
    assert bundle.target_train.property_counts().tolist() == [125, 125]
    assert bundle.shadow_train.property_counts().tolist() == [125, 125]
    assert len(bundle.query_pool) == 0


def test_skewed_target_train(thousand):
    spec = _quarter_spec(proportions={"target_train": PropertyProportion.from_ratio(2, 8)})
    bundle = partition_dataset(thousand, spec, seed=0)
    assert bundle.target_train.property_counts().tolist() == [50, 200]


def test_partition_is_deterministic(thousand):
    spec = PartitionSpec()
    a = partition_dataset(thousand, spec, seed=11)
    b = partition_dataset(thousand, spec, seed=11)
    for name in PARTITIONS:
        assert np.array_equal(getattr(a, name).ids, getattr(b, name).ids)


def test_partitions_are_disjoint(thousand):
    spec = PartitionSpec(query_proportions=[PropertyProportion((0.2, 0.8))], query_per_set=20)
    bundle = partition_dataset(thousand, spec, seed=1)

    ids = [part.id_set() for part in bundle.partitions().values()]
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            assert not ids[i] & ids[j]
    train = bundle.target_train.id_set() | bundle.shadow_train.id_set()
    for query in bundle.query_aux.values():
        assert not query.id_set() & train
    assert bundle.partial_aux.id_set() <= bundle.target_train.id_set()
    assert len(bundle.partial_aux) == 100


def test_fractions_over_one(thousand):
    spec = PartitionSpec(fractions={p: 0.3 for p in PARTITIONS})
    with pytest.raises(InvalidSpec):
        partition_dataset(thousand, spec, seed=0)


def test_unreachable_proportion():
    samples = make_samples([0] * 50 + [1] * 950)
    spec = _quarter_spec(proportions={"target_train": PropertyProportion((0.5, 0.5))})
    with pytest.raises(InsufficientSamples):
        partition_dataset(samples, spec, seed=0)


def test_bundle_rejects_overlap(thousand):
    bundle = partition_dataset(thousand, PartitionSpec(), seed=0)
    with pytest.raises(DisjointnessViolation):
        DatasetBundle(
            target_train=bundle.target_train,
            target_test=bundle.target_train,
            shadow_train=bundle.shadow_train,
            shadow_test=bundle.shadow_test,
            query_aux={},
            partial_aux=bundle.partial_aux,
            query_pool=bundle.query_pool,
            seed=0,
            spec=bundle.spec,
        )


def test_spec_dict_round_trip():
    spec = PartitionSpec(
        proportions={"target_train": PropertyProportion.from_ratio(2, 8)},
        query_proportions=[PropertyProportion((0.5, 0.5))],
        query_per_set=15,
    )
    assert PartitionSpec.from_dict(spec.to_dict()) == spec
