"""
Inferência de atributo (AttrInf) a partir dos embeddings da penúltima camada.
"""
import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import torch
from sklearn.preprocessing import StandardScaler
from torch import nn

from config import ATTRINF_BATCH_SIZE, ATTRINF_EPOCHS, ATTRINF_HIDDEN, ATTRINF_LR
from exceptions import DegenerateLabels
from attacks.results import AttackResult
from models.training import TrainedModel
from transform.canonical import content_hash
from transform.samples import SampleSet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttrInfConfig:
    epochs: int = ATTRINF_EPOCHS
    learning_rate: float = ATTRINF_LR
    hidden: int = ATTRINF_HIDDEN
    batch_size: int = ATTRINF_BATCH_SIZE
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        return content_hash(self.to_dict())


def attrinf_attack(
    target: TrainedModel,
    aux: SampleSet,
    eval: SampleSet,
    config: Optional[AttrInfConfig] = None,
) -> AttackResult:
    """
    Treina um MLP de 2 camadas (embedding -> atributo) em `aux` e avalia em `eval`.

    Args:
        target: Modelo com acesso aos embeddings
        aux: Dado auxiliar do adversário com atributos
        eval: Amostras cujo atributo é inferido (tipicamente target_train)
        config: Hiperparâmetros (padrão: 100 épocas, taxa 1e-2)

    Returns:
        AttackResult com acurácia e F1 macro (AUC quando o atributo é binário)

    Raises:
        DegenerateLabels: Apenas um valor de atributo em `aux`
    """
    config = config or AttrInfConfig()
    if len(np.unique(aux.attributes)) < 2:
        raise DegenerateLabels("AttrInf precisa de pelo menos dois valores de atributo no auxiliar")

    scaler = StandardScaler().fit(target.embeddings(aux.features))
    train_x = torch.as_tensor(scaler.transform(target.embeddings(aux.features)), dtype=torch.float32)
    train_y = torch.as_tensor(aux.attributes, dtype=torch.long)

    torch.manual_seed(config.seed)
    classifier = nn.Sequential(
        nn.Linear(train_x.shape[1], config.hidden),
        nn.ReLU(),
        nn.Linear(config.hidden, aux.num_attributes),
    )
    optimizer = torch.optim.Adam(classifier.parameters(), lr=config.learning_rate)
    generator = torch.Generator().manual_seed(config.seed)
    for _ in range(config.epochs):
        order = torch.randperm(len(train_y), generator=generator)
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            optimizer.zero_grad()
            nn.functional.cross_entropy(classifier(train_x[batch]), train_y[batch]).backward()
            optimizer.step()

    classifier.eval()
    with torch.no_grad():
        train_acc = float((classifier(train_x).argmax(dim=1) == train_y).float().mean())
        eval_x = torch.as_tensor(scaler.transform(target.embeddings(eval.features)), dtype=torch.float32)
        probabilities = torch.softmax(classifier(eval_x).double(), dim=1).numpy()

    predictions = np.argmax(probabilities, axis=1)
    binary = aux.num_attributes == 2 and len(np.unique(eval.attributes)) == 2
    scores = probabilities[:, 1] if aux.num_attributes == 2 else probabilities.max(axis=1)
    result = AttackResult.from_scores(
        scores,
        predictions,
        eval.attributes,
        sample_ids=eval.ids,
        average="binary" if aux.num_attributes == 2 else "macro",
        ranked=binary,
        attrinf_config=config.config_hash(),
        aux_fingerprint=aux.fingerprint(),
        training_accuracy=train_acc,
        n_aux=len(aux),
    )
    log.info(f"AttrInf em {len(aux)} auxiliares / {len(eval)} avaliadas: {result.metrics}")
    return result
