"""
Testes do armazenamento de artefatos: reaproveitamento por hash,
artefatos ausentes e recarga de modelos e bundles do disco.
"""
import numpy as np
import pytest

from attacks.results import AttackResult
from dao.artifact_store import (
    ArtifactStore,
    load_attack_result,
    load_bundle,
    load_model,
    load_shadow_fleet,
    proportion_from_text,
    proportion_text,
    read_manifest,
    save_attack_result,
    save_bundle,
    save_model,
    save_shadow_fleet,
    write_manifest,
)
from exceptions import MissingUpstream
from transform.samples import PropertyProportion


def _save_value(value, directory):
    write_manifest(directory, {"kind": "value", "value": value})


def _load_value(directory):
    return read_manifest(directory)["value"]


def test_ensure_computes_once(tmp_path):
    store = ArtifactStore(tmp_path)
    calls = []

    def compute():
        calls.append(1)
        return 42

    assert store.ensure("prepare", "seed0", "h1", compute, _save_value, _load_value) == 42
    assert ArtifactStore(tmp_path).ensure("prepare", "seed0", "h1", compute, _save_value, _load_value) == 42
    assert len(calls) == 1


def test_changed_inputs_recompute(tmp_path):
    store = ArtifactStore(tmp_path)
    store.ensure("prepare", "seed0", "h1", lambda: 1, _save_value, _load_value)
    fresh = ArtifactStore(tmp_path)
    assert fresh.ensure("prepare", "seed0", "h2", lambda: 2, _save_value, _load_value) == 2
    assert fresh.misses == 1
    assert fresh.list_artifacts("prepare")["input_hash"].tolist() == ["h2"]


def test_require_missing_names_artifact(tmp_path):
    store = ArtifactStore(tmp_path)
    with pytest.raises(MissingUpstream, match="attack/seed0/target/meminf_mb_ds"):
        store.require("attack", "seed0/target/meminf_mb_ds", _load_value)


def test_require_stale(tmp_path):
    store = ArtifactStore(tmp_path)
    store.ensure("prepare", "seed0", "h1", lambda: 1, _save_value, _load_value)
    with pytest.raises(MissingUpstream):
        ArtifactStore(tmp_path).require("prepare", "seed0", _load_value, input_hash="other")
    assert ArtifactStore(tmp_path).require("prepare", "seed0", _load_value, input_hash="h1") == 1


def test_cached_features_are_reused(tmp_path, bench_target, bench_bundle):
    store = ArtifactStore(tmp_path)
    samples = bench_bundle.target_test.subset(range(3))
    calls = []

    def compute():
        calls.append(1)
        return np.arange(3.0)

    first = store.cached_features("adv_l2", bench_target, samples, {"epsilon": 0.1}, compute)
    second = ArtifactStore(tmp_path).cached_features("adv_l2", bench_target, samples, {"epsilon": 0.1}, compute)
    assert np.array_equal(first, second)
    assert len(calls) == 1
    assert not second.flags.writeable


def test_proportion_text_is_lossless():
    proportion = PropertyProportion.from_ratio(1, 2)
    assert proportion_from_text(proportion_text(proportion)) == proportion


def test_model_reload(tmp_path, bench_target, bench_bundle):
    save_model(bench_target, tmp_path / "model")
    loaded = load_model(tmp_path / "model")
    features = bench_bundle.target_test.features[:10]
    assert loaded.fingerprint() == bench_target.fingerprint()
    assert np.array_equal(loaded.posteriors(features), bench_target.posteriors(features))
    assert loaded.epochs_trained == bench_target.epochs_trained


def test_bundle_reload(tmp_path, bench_bundle):
    save_bundle(bench_bundle, tmp_path / "bundle")
    loaded = load_bundle(tmp_path / "bundle")
    for name, part in bench_bundle.partitions().items():
        assert loaded.partitions()[name].fingerprint() == part.fingerprint()
    assert set(loaded.query_aux) == set(bench_bundle.query_aux)
    assert loaded.partial_aux.fingerprint() == bench_bundle.partial_aux.fingerprint()


def test_fleet_reload(tmp_path, bench_target):
    fleet = [(bench_target, PropertyProportion.from_ratio(1, 2)), (bench_target, PropertyProportion((0.5, 0.5)))]
    save_shadow_fleet(fleet, tmp_path / "fleet")
    loaded = load_shadow_fleet(tmp_path / "fleet")
    assert [label for _, label in loaded] == [label for _, label in fleet]


def test_attack_result_reload(tmp_path):
    scores = np.array([0.9, 0.1, 0.4, 0.7])
    result = AttackResult.from_scores(scores, (scores >= 0.5).astype(int), np.array([1, 0, 0, 1]),
                                      sample_ids=np.arange(4), setting="mb_ds")
    save_attack_result(result, tmp_path / "attack")
    loaded = load_attack_result(tmp_path / "attack")
    assert np.array_equal(loaded.scores, result.scores)
    assert loaded.metrics == result.metrics
    assert loaded.details["setting"] == "mb_ds"
