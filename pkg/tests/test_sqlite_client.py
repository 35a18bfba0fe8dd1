"""
Testes do cliente SQLite do índice de artefatos.

Cobre:
- Criação de tabela
- Upsert de linhas (insere e depois atualiza pela chave primária)
- Leitura por (estágio, chave) e do índice inteiro
"""
import pandas as pd
import pytest

from dao.sqlite_client import (
    get_artifact,
    get_connection,
    ensure_table_exists,
    index_path,
    read_index,
    table_exists,
    upsert_rows,
)


@pytest.fixture
def db_path(tmp_path):
    return index_path(tmp_path)


def _row(stage, key, input_hash, kind="prepare"):
    return {"stage": stage, "artifact_key": key, "input_hash": input_hash, "kind": kind, "path": f"{stage}/{key}"}


def test_table_is_created(db_path):
    assert not table_exists(db_path)
    ensure_table_exists(db_path)
    assert table_exists(db_path)
    ensure_table_exists(db_path)


def test_upsert_inserts_then_updates(db_path):
    upsert_rows(pd.DataFrame([_row("prepare", "seed0", "aaa")]), db_path)
    assert get_artifact(db_path, "prepare", "seed0")["input_hash"] == "aaa"

    upsert_rows(pd.DataFrame([_row("prepare", "seed0", "bbb")]), db_path)
    index = read_index(db_path)
    assert len(index) == 1
    assert index.loc[0, "input_hash"] == "bbb"


def test_upsert_requires_primary_key(db_path):
    with pytest.raises(ValueError):
        upsert_rows(pd.DataFrame([{"stage": "prepare", "input_hash": "x"}]), db_path)


def test_missing_artifact(db_path):
    assert get_artifact(db_path, "train", "seed0/target") is None
    ensure_table_exists(db_path)
    assert get_artifact(db_path, "train", "seed0/target") is None


def test_read_index_filters_and_orders(db_path):
    rows = [
        _row("train", "seed0/target", "h1", "model"),
        _row("prepare", "seed1", "h2"),
        _row("prepare", "seed0", "h3"),
    ]
    upsert_rows(pd.DataFrame(rows), db_path)

    assert read_index(db_path)["artifact_key"].tolist() == ["seed0", "seed1", "seed0/target"]
    assert read_index(db_path, "train")["kind"].tolist() == ["model"]
    assert read_index(index_path(db_path.parent / "nowhere")).empty


def test_connection_rolls_back_on_error(db_path):
    ensure_table_exists(db_path)
    with pytest.raises(RuntimeError):
        with get_connection(db_path) as conn:
            conn.execute(
                "INSERT INTO artifacts (stage, artifact_key, input_hash) VALUES ('prepare', 'seed0', 'h')"
            )
            raise RuntimeError("falha no meio da transação")
    assert get_artifact(db_path, "prepare", "seed0") is None
