"""
Carregador de conjuntos rotulados externos em formato .npz.

Chaves obrigatórias: features, task_labels, attributes, properties.
Chave opcional: ids. Features uint8 são reescaladas para [0, 1];
features (N, H, W) ganham a dimensão de canal.
"""
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from exceptions import InvalidSpec
from transform.samples import SampleSet

log = logging.getLogger(__name__)

REQUIRED_KEYS = ("features", "task_labels", "attributes", "properties")


def load_npz(
    path,
    num_classes: Optional[int] = None,
    num_attributes: Optional[int] = None,
    num_properties: Optional[int] = None,
) -> SampleSet:
    """
    Carrega um conjunto externo.

    Args:
        path: Caminho do arquivo .npz
        num_classes / num_attributes / num_properties: cardinais (inferidos
            como max + 1 quando omitidos)

    Returns:
        SampleSet validado

    Raises:
        InvalidSpec: Se faltar alguma chave ou os valores violarem as invariantes
    """
    path = Path(path)
    if not path.exists():
        raise InvalidSpec(f"Arquivo de dataset não encontrado: {path}")

    with np.load(path) as data:
        missing = [key for key in REQUIRED_KEYS if key not in data.files]
        if missing:
            raise InvalidSpec(f"Chaves ausentes em {path.name}: {missing}")
        arrays = {key: data[key] for key in data.files}

    features = arrays["features"]
    if features.dtype == np.uint8:
        features = features.astype(np.float32) / 255.0
    if features.ndim == 3:
        features = features[:, None, :, :]
    if features.ndim != 4:
        raise InvalidSpec(f"features deve ter 3 ou 4 dimensões, tem {features.ndim}")

    ids = arrays.get("ids", np.arange(len(features)))
    samples = SampleSet(
        ids=ids,
        features=features,
        task_labels=arrays["task_labels"],
        attributes=arrays["attributes"],
        properties=arrays["properties"],
        num_classes=num_classes or int(arrays["task_labels"].max()) + 1,
        num_attributes=num_attributes or int(arrays["attributes"].max()) + 1,
        num_properties=num_properties or int(arrays["properties"].max()) + 1,
    )
    log.info(f"Carregado dataset externo {path.name}: {len(samples)} amostras, shape {samples.input_shape}")
    return samples
