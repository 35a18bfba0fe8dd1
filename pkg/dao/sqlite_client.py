"""
Cliente SQLite de baixo nível para o índice de artefatos de um experimento.

Este módulo fornece funções básicas para:
- Gerenciamento de conexões
- Criação do schema do índice
- Operações de upsert e consulta

O índice registra, para cada (estágio, chave de artefato), o hash das
entradas que o produziram e o caminho do artefato no disco. É ele que
permite pular estágios cujas entradas não mudaram. Apenas o processo do
pipeline escreve no índice.
"""
import sqlite3
import logging
from pathlib import Path
from contextlib import contextmanager
from typing import Optional, List, Dict, Any
import pandas as pd

from config import ARTIFACT_INDEX_NAME, ARTIFACT_TABLE_NAME, PRIMARY_KEY_COLUMNS

# Configurar logger
log = logging.getLogger(__name__)

DATA_COLUMNS = ["input_hash", "kind", "path"]


def index_path(root: Path) -> Path:
    return Path(root) / ARTIFACT_INDEX_NAME


@contextmanager
def get_connection(db_path: Path):
    """
    Context manager para conexão SQLite.

    Garante que a conexão seja fechada corretamente e cria o diretório
    do banco se não existir.

    Args:
        db_path: Caminho do arquivo do índice

    Yields:
        sqlite3.Connection: Conexão com o banco de dados
    """
    db_path = Path(db_path)
    db_path.parent.mkdir(parents=True, exist_ok=True)

    conn = sqlite3.connect(str(db_path))
    conn.row_factory = sqlite3.Row  # Permite acesso por nome de coluna

    try:
        yield conn
        conn.commit()
    except Exception as e:
        conn.rollback()
        log.error(f"Erro na transação SQLite: {e}")
        raise
    finally:
        conn.close()


def table_exists(db_path: Path, table_name: str = ARTIFACT_TABLE_NAME) -> bool:
    with get_connection(db_path) as conn:
        cursor = conn.cursor()
        cursor.execute("""
            SELECT name FROM sqlite_master
            WHERE type='table' AND name=?
        """, (table_name,))
        return cursor.fetchone() is not None


def ensure_table_exists(db_path: Path, table_name: str = ARTIFACT_TABLE_NAME) -> None:
    """
    Cria a tabela de artefatos se ela não existir.

    A tabela é criada com:
    - Chave primária composta usando PRIMARY_KEY_COLUMNS do config.py
      (estágio + chave do artefato)
    - Hash das entradas, tipo e caminho do artefato
    - Colunas de controle: created_at, updated_at
    """
    if table_exists(db_path, table_name):
        log.debug(f"Tabela {table_name} já existe")
        return

    pk_columns_def = ", ".join([f"{col} TEXT NOT NULL" for col in PRIMARY_KEY_COLUMNS])
    data_columns_def = ", ".join([f"{col} TEXT" for col in DATA_COLUMNS])
    pk_constraint = ", ".join(PRIMARY_KEY_COLUMNS)

    with get_connection(db_path) as conn:
        cursor = conn.cursor()
        cursor.execute(f"""
            CREATE TABLE IF NOT EXISTS {table_name} (
                {pk_columns_def},
                {data_columns_def},
                created_at DATETIME DEFAULT CURRENT_TIMESTAMP,
                updated_at DATETIME DEFAULT CURRENT_TIMESTAMP,
                PRIMARY KEY ({pk_constraint})
            )
        """)
        log.info(f"Tabela {table_name} criada em {db_path}")


def upsert_rows(
    df: pd.DataFrame,
    db_path: Path,
    table_name: str = ARTIFACT_TABLE_NAME,
    pk_columns: Optional[List[str]] = None
) -> None:
    """
    Insere ou atualiza linhas na tabela baseado na chave primária.

    Usa INSERT ... ON CONFLICT DO UPDATE, preservando created_at quando a
    linha já existe.

    Args:
        df: DataFrame com as colunas da PK e de DATA_COLUMNS
        db_path: Caminho do índice
        table_name: Nome da tabela (padrão: ARTIFACT_TABLE_NAME)
        pk_columns: Colunas da chave primária (padrão: PRIMARY_KEY_COLUMNS)

    Raises:
        ValueError: Se o DataFrame não contiver as colunas da PK
    """
    if df.empty:
        log.warning("DataFrame vazio, nada a inserir")
        return

    if pk_columns is None:
        pk_columns = PRIMARY_KEY_COLUMNS

    missing_pk = [col for col in pk_columns if col not in df.columns]
    if missing_pk:
        raise ValueError(f"DataFrame não contém colunas da PK: {missing_pk}")

    ensure_table_exists(db_path, table_name)

    columns_to_insert = [col for col in df.columns.tolist()
                         if col not in ['created_at', 'updated_at']]
    placeholders = ', '.join(['?' for _ in columns_to_insert])
    columns_str = ', '.join(columns_to_insert)

    update_columns = [col for col in columns_to_insert if col not in pk_columns]
    update_parts = [f'{col} = excluded.{col}' for col in update_columns]
    update_parts.append('updated_at = CURRENT_TIMESTAMP')
    update_set = ', '.join(update_parts)

    # SQLite aceita None como NULL, mas não aceita NAType do pandas
    values = [
        tuple(None if pd.isna(val) else str(val) for val in row)
        for row in df[columns_to_insert].itertuples(index=False)
    ]

    pk_constraint = ", ".join(pk_columns)
    query = f"""
        INSERT INTO {table_name} ({columns_str}, created_at, updated_at)
        VALUES ({placeholders}, CURRENT_TIMESTAMP, CURRENT_TIMESTAMP)
        ON CONFLICT({pk_constraint}) DO UPDATE SET
            {update_set}
    """

    with get_connection(db_path) as conn:
        cursor = conn.cursor()
        cursor.executemany(query, values)
        log.debug(f"Inseridas/atualizadas {cursor.rowcount} linhas em {table_name}")


def get_artifact(db_path: Path, stage: str, artifact_key: str) -> Optional[Dict[str, Any]]:
    """
    Linha do índice para (estágio, chave), ou None se não registrada.
    """
    if not Path(db_path).exists() or not table_exists(db_path):
        return None
    with get_connection(db_path) as conn:
        cursor = conn.cursor()
        cursor.execute(
            f"SELECT * FROM {ARTIFACT_TABLE_NAME} WHERE stage = ? AND artifact_key = ?",
            (stage, artifact_key),
        )
        row = cursor.fetchone()
        return dict(row) if row is not None else None


def read_index(db_path: Path, stage: Optional[str] = None) -> pd.DataFrame:
    """
    Índice completo (ou de um estágio) como DataFrame, ordenado por (stage, artifact_key).
    """
    columns = PRIMARY_KEY_COLUMNS + DATA_COLUMNS + ["created_at", "updated_at"]
    if not Path(db_path).exists() or not table_exists(db_path):
        return pd.DataFrame(columns=columns)
    query = f"SELECT * FROM {ARTIFACT_TABLE_NAME}"
    params: tuple = ()
    if stage is not None:
        query += " WHERE stage = ?"
        params = (stage,)
    query += " ORDER BY stage, artifact_key"
    with get_connection(db_path) as conn:
        return pd.read_sql_query(query, conn, params=params)
