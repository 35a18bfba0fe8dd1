"""
Serialização canônica, hashes de conteúdo e derivação de sementes.

Todo artefato do pipeline é identificado pelo hash do JSON canônico das suas
entradas (chaves ordenadas, sem espaços). A semente de cada estágio é o hash de
(semente global, nome do estágio, índice).
"""
import dataclasses
import hashlib
import json
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np


def _default(obj: Any) -> Any:
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return dataclasses.asdict(obj)
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"Objeto não serializável: {type(obj).__name__}")


def canonical_json(obj: Any) -> str:
    """
    Serializa um objeto em JSON canônico (chaves ordenadas, separadores compactos).

    Args:
        obj: Estrutura com dicts, listas, enums, dataclasses ou arrays numpy

    Returns:
        Texto JSON estável entre execuções
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_default)


def content_hash(obj: Any) -> str:
    """Hash SHA-256 (hex) do JSON canônico de `obj`."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def array_hash(*arrays: np.ndarray) -> str:
    """Hash SHA-256 do conteúdo binário de um ou mais arrays (inclui shape e dtype)."""
    digest = hashlib.sha256()
    for array in arrays:
        array = np.ascontiguousarray(array)
        digest.update(str(array.dtype).encode("utf-8"))
        digest.update(str(array.shape).encode("utf-8"))
        digest.update(array.tobytes())
    return digest.hexdigest()


def derive_seed(global_seed: int, stage: str, index: int = 0) -> int:
    """
    Deriva a semente de um estágio: hash(global_seed, stage, index).

    Args:
        global_seed: Semente global do experimento
        stage: Nome do estágio ou do job (ex: "fleet", "prepare")
        index: Índice do job dentro do estágio

    Returns:
        Inteiro em [0, 2**31)
    """
    key = f"{int(global_seed)}:{stage}:{int(index)}".encode("utf-8")
    return int(hashlib.sha256(key).hexdigest()[:8], 16) & 0x7FFFFFFF
