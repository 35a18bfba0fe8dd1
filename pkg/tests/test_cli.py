"""
Testes dos códigos de saída da linha de comando.
"""
import pytest

from cli import EXIT_CONFIG, EXIT_MISSING_UPSTREAM, EXIT_OK, build_parser, main
from conftest import TINY_EXPERIMENT


@pytest.fixture
def tiny_file(tmp_path):
    path = tmp_path / "tiny.toml"
    path.write_text(TINY_EXPERIMENT, encoding="utf-8")
    return path


def test_invalid_config_exit_code(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("workers = 0\n", encoding="utf-8")

    assert main(["all", "--config", str(path), "--out", str(tmp_path / "run")]) == EXIT_CONFIG


def test_missing_upstream_exit_code(tiny_file, tmp_path):
    status = main(["compose", "--config", str(tiny_file), "--out", str(tmp_path / "run")])

    assert status == EXIT_MISSING_UPSTREAM


def test_prepare_command(tiny_file, tmp_path):
    out = tmp_path / "run"

    assert main(["prepare", "--config", str(tiny_file), "--out", str(out)]) == EXIT_OK
    assert (out / "experiment.toml").exists()


def test_unknown_stage_rejected_by_parser(tiny_file):
    with pytest.raises(SystemExit):
        build_parser().parse_args(["all", "--config", str(tiny_file), "--stages", "prepare,deploy"])
