"""
Testes de MemInf: features, rede de ataque e os cenários com dado parcial.
"""
import numpy as np
import pytest

from conftest import BENCH_MODEL
from attacks.membership import (
    AttackFeatureRecord,
    MemInfAttackConfig,
    build_meminf_features,
    meminf_attack,
    prepare_membership,
    train_meminf_attack_model,
)
from exceptions import DegenerateLabels, DisjointnessViolation, MissingAuxiliary
from ingestion.synthetic_generator import SyntheticSpec, generate_synthetic
from models.training import init_model
from taxonomy import FeatureSetting, MemInfSetting
from transform.partition import PartitionSpec, partition_dataset


def _separated_records(n=100):
    members = [
        AttackFeatureRecord(ranked_posteriors=np.array([1.0, 0.0]), correct=1, member=1, sample_id=i)
        for i in range(n)
    ]
    nonmembers = [
        AttackFeatureRecord(ranked_posteriors=np.array([0.5, 0.5]), correct=0, member=0, sample_id=n + i)
        for i in range(n)
    ]
    return members + nonmembers


FAST = MemInfAttackConfig(epochs=30, learning_rate=1e-2, seed=0)


def test_ranked_posteriors_are_descending(bench_target, bench_bundle):
    records = build_meminf_features(
        bench_target, bench_bundle.target_train.subset(range(5)), bench_bundle.target_test.subset(range(5)), "bb"
    )
    assert len(records) == 10
    assert [r.member for r in records] == [1] * 5 + [0] * 5
    for record in records:
        assert np.all(np.diff(record.ranked_posteriors) <= 0)
        assert record.loss is None


def test_white_box_records_carry_gradient(bench_target, bench_bundle):
    records = build_meminf_features(
        bench_target, bench_bundle.target_train.subset(range(2)), bench_bundle.target_test.subset(range(2)), "wb"
    )
    record = records[0]
    assert record.loss is not None
    assert record.onehot_label.sum() == 1
    assert record.last_layer_gradient.shape == (64 * 2 + 2,)


def test_overlapping_sets_rejected(bench_target, bench_bundle):
    members = bench_bundle.target_train.subset(range(4))
    with pytest.raises(DisjointnessViolation):
        build_meminf_features(bench_target, members, members, "bb")


def test_separated_records_are_learned():
    attack = train_meminf_attack_model(_separated_records(), FeatureSetting.BB, FAST)
    assert attack.training_accuracy >= 0.99


def _l2_separated_records(n=100):
    # posteriors iguais; só a distância L2 distingue membros
    return [
        AttackFeatureRecord(
            ranked_posteriors=np.array([0.6, 0.4]), correct=1, adv_l2=2.0 if member else 0.0,
            member=member, sample_id=i,
        )
        for i, member in enumerate([1] * n + [0] * n)
    ]


def test_separating_l2_distance_is_learned():
    records = _l2_separated_records()
    attack = train_meminf_attack_model(records, FeatureSetting.BB, FAST)
    assert attack.training_accuracy >= 0.99
    scores = attack.score_records(records)
    assert scores[:100].min() > scores[100:].max()


def test_attack_model_is_deterministic():
    records = _separated_records(20)
    a = train_meminf_attack_model(records, FeatureSetting.BB, FAST)
    b = train_meminf_attack_model(records, FeatureSetting.BB, FAST)
    assert np.array_equal(a.score_records(records), b.score_records(records))


def test_single_class_records():
    members = [r for r in _separated_records(10) if r.member == 1]
    with pytest.raises(DegenerateLabels):
        train_meminf_attack_model(members, FeatureSetting.BB, FAST)


def test_partial_splits_are_disjoint(bench_target, bench_bundle):
    splits = prepare_membership(bench_target, bench_bundle, "mb_dp", seed=0)
    assert splits.reference is bench_target
    assert not splits.train_members.id_set() & splits.eval_members.id_set()
    assert not splits.train_nonmembers.id_set() & splits.eval_nonmembers.id_set()
    assert len(splits.eval_members) == len(splits.eval_nonmembers)
    assert splits.train_members.id_set() <= bench_bundle.partial_aux.id_set()


def test_missing_partial_aux(bench_target, bench_bundle):
    spec = PartitionSpec(partial_fraction=0.0)
    samples = generate_synthetic(SyntheticSpec(n_samples=300, image_size=8, num_classes=2), seed=1)
    bundle = partition_dataset(samples, spec, seed=1)
    with pytest.raises(MissingAuxiliary):
        prepare_membership(bench_target, bundle, MemInfSetting.BB_PARTIAL)


def test_untrained_target_is_random_guess():
    samples = generate_synthetic(SyntheticSpec(n_samples=4000, image_size=8, num_classes=2), seed=5)
    bundle = partition_dataset(samples, PartitionSpec(), seed=5)
    target = init_model(BENCH_MODEL, bundle.target_train, bundle.target_test)

    result = meminf_attack(target, bundle, "mb_dp", seed=5)
    assert len(result) >= 400
    assert 0.45 <= result.metrics["accuracy"] <= 0.55
