"""
Tabelas de comparação origem x composição.

Colunas fixas: setting, model, dataset, seed, metric, origin, composition, delta.
Uma linha por (execução, métrica); ordenação estável por (setting, seed).
"""
import json
import logging
from pathlib import Path
from typing import Iterable, List

import pandas as pd

from config import SCHEMA_VERSION
from exceptions import SchemaMismatch

log = logging.getLogger(__name__)

COLUMNS = ["setting", "model", "dataset", "seed", "metric", "origin", "composition", "delta"]


def comparison_table(manifests: Iterable[dict]) -> pd.DataFrame:
    """
    Linhas de comparação a partir dos manifestos das composições.

    Args:
        manifests: Manifestos (CompositionOutcome.manifest com contexto de setting/model/dataset/seed)

    Returns:
        DataFrame com COLUMNS (vazio, só cabeçalho, se não houver manifestos)

    Raises:
        SchemaMismatch: Manifestos com versões de schema diferentes entre si ou
            da versão atual (SCHEMA_VERSION)
    """
    manifests = list(manifests)
    versions = {str(m.get("schema_version")) for m in manifests}
    if len(versions) > 1:
        raise SchemaMismatch(f"Manifestos com versões de schema diferentes: {sorted(versions)}")
    if versions and versions != {SCHEMA_VERSION}:
        raise SchemaMismatch(f"Manifestos com schema {versions.pop()}, esperado {SCHEMA_VERSION}")

    rows = []
    for manifest in manifests:
        origin, composition = manifest["origin"], manifest["composition"]
        for metric in sorted(set(origin) & set(composition)):
            rows.append({
                "setting": str(manifest.get("setting", manifest.get("plan", {}).get("name", ""))),
                "model": str(manifest.get("model", "")),
                "dataset": str(manifest.get("dataset", "")),
                "seed": int(manifest.get("seed", 0)),
                "metric": metric,
                "origin": float(origin[metric]),
                "composition": float(composition[metric]),
                "delta": float(composition[metric]) - float(origin[metric]),
            })

    table = pd.DataFrame(rows, columns=COLUMNS)
    if table.empty:
        return table
    return table.sort_values(["setting", "seed"], kind="stable").reset_index(drop=True)


def write_csv(table: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, columns=COLUMNS, float_format="%.6f", lineterminator="\n")
    log.info(f"Tabela de comparação salva em {path} ({len(table)} linhas)")
    return path


def write_json(table: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records: List[dict] = json.loads(table.to_json(orient="records", double_precision=10))
    payload = {"schema_version": SCHEMA_VERSION, "columns": COLUMNS, "rows": records}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
