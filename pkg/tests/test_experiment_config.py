"""
Testes da configuração de experimento: erros acumulados, texto canônico e sobrescritas.
"""
from pathlib import Path

import pytest

from exceptions import ConfigError
from service.experiment_config import canonical_text, load_config, validate_config
from taxonomy import MemInfSetting

MINIMAL = """
seed = 0

[attacks]
meminf_settings = ["mb_ds"]
propinf = false

[[compositions]]
name = "adv2meminf"
settings = ["mb_ds"]
"""

DESK = Path(__file__).resolve().parents[1] / "experiments" / "desk.toml"


def test_minimal_config_is_valid():
    config, errors = validate_config(MINIMAL)

    assert errors == []
    assert config.attacks.meminf_settings == (MemInfSetting.BB_SHADOW,)
    assert [c.name for c in config.compositions] == ["adv2meminf"]


def test_canonical_text_is_stable():
    config, _ = validate_config(MINIMAL)
    text = canonical_text(config)

    again, errors = validate_config(text)

    assert errors == []
    assert canonical_text(again) == text
    assert again.config_hash() == config.config_hash()


def test_fractions_over_one_reported():
    raw = MINIMAL + """
[partition.fractions]
target_train = 0.4
target_test = 0.4
shadow_train = 0.2
shadow_test = 0.2
"""
    config, errors = validate_config(raw)

    assert config is None
    assert any(e.startswith("partition.fractions") for e in errors)


def test_unknown_tuple_cites_allowed_plans():
    raw = MINIMAL + """
[[compositions]]
support = "adv"
primary = "attrinf"
level = "preparation"
"""
    config, errors = validate_config(raw)

    assert config is None
    assert len(errors) == 1
    assert errors[0].startswith("compositions[1]")
    assert "Permitidos" in errors[0]


def test_all_errors_collected():
    raw = """
seed = "zero"
workers = 0

[attacks]
meminf_settings = ["mb_xx"]
propinf = false

[fleet]
lira_models = 3
"""
    config, errors = validate_config(raw)

    assert config is None
    assert any(e.startswith("seed") for e in errors)
    assert any(e.startswith("workers") for e in errors)
    assert any("mb_xx" in e for e in errors)
    assert any(e.startswith("fleet.lira_models") for e in errors)


def test_propinf_requires_fleet_labels():
    config, errors = validate_config("seed = 1\n")

    assert config is None
    assert any(e.startswith("fleet.proportion_labels") for e in errors)
    assert any(e.startswith("partition.query_proportions") for e in errors)


def test_broken_toml():
    config, errors = validate_config("seed = = 1")

    assert config is None
    assert errors[0].startswith("TOML inválido")


def test_load_config_raises_with_every_error(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("workers = 0\nrepeats = 0\n", encoding="utf-8")

    with pytest.raises(ConfigError) as info:
        load_config(path)

    assert any(e.startswith("workers") for e in info.value.errors)
    assert any(e.startswith("repeats") for e in info.value.errors)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nao_existe.toml")


def test_overrides_change_seed_everywhere(tmp_path):
    config, _ = validate_config(MINIMAL)

    changed = config.with_overrides(seed=9, workers=2, output_dir=tmp_path)

    assert changed.seed == 9
    assert changed.target.model.seed == 9
    assert changed.workers == 2
    assert changed.output_dir == tmp_path
    assert changed.config_hash() != config.config_hash()
    assert config.with_overrides().config_hash() == config.config_hash()


def test_desk_experiment_is_valid():
    config = load_config(DESK)

    assert len(config.compositions) == 6
    assert config.target.dp_epsilons == (10.0, 20.0, 50.0)
    assert config.compositions[2].plan.mode == "empirical"
