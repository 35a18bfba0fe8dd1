"""
Testes de ponta a ponta do pipeline num experimento mínimo (MLP, 1 época).
"""
import pytest

from conftest import TINY_EXPERIMENT as TINY
from exceptions import ConfigError, MissingUpstream
from service import list_artifacts, run_pipeline, validate_config
from service.pipeline_service import composition_items, required_attacks


@pytest.fixture
def tiny_config(tmp_path):
    config, errors = validate_config(TINY)
    assert errors == []
    return config.with_overrides(output_dir=tmp_path / "run")


def test_required_attacks_follow_compositions(tiny_config):
    assert required_attacks(tiny_config) == ["meminf_mb_dp"]
    assert [key for key, _, _ in composition_items(tiny_config)] == ["adv2meminf_mb_dp"]


def test_prepare_only(tiny_config):
    run = run_pipeline(tiny_config, ["prepare"])

    assert run.status == 0
    assert run.stages == ("prepare",)
    index = list_artifacts(run.directory)
    assert list(index["stage"].unique()) == ["prepare"]
    assert (run.directory / "experiment.toml").exists()


def test_compose_without_attack_artifacts(tiny_config):
    run_pipeline(tiny_config, ["prepare", "train"])

    with pytest.raises(MissingUpstream, match="attack/seed0/target/meminf_mb_dp"):
        run_pipeline(tiny_config, ["compose"])


def test_unknown_stage(tiny_config):
    with pytest.raises(ConfigError):
        run_pipeline(tiny_config, ["deploy"])


def test_second_run_reuses_everything(tiny_config):
    first = run_pipeline(tiny_config)

    assert first.computed > 0
    assert any(p.name == "comparison.csv" for p in first.report_files)
    assert list(list_artifacts(first.directory, "compose")["artifact_key"]) == [
        "seed0/target/adv2meminf_mb_dp"
    ]

    second = run_pipeline(tiny_config)

    assert second.computed == 0
    assert second.reused > 0
    assert second.report_files == first.report_files


def test_changed_attack_config_recomputes_downstream(tiny_config, tmp_path):
    run_pipeline(tiny_config)
    config, _ = validate_config(TINY.replace("epochs = 2", "epochs = 3"))
    config = config.with_overrides(output_dir=tmp_path / "run")

    run = run_pipeline(config, ["attack", "compose"])

    # ataque e composição; dados e modelo são reaproveitados
    assert run.computed == 2
