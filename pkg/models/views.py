"""
Visões caixa-preta e caixa-branca de um modelo treinado.

O gradiente da última camada é analítico: para cross-entropy com softmax,
dL/dW = (p - onehot(y)) ⊗ h e dL/db = (p - onehot(y)), com h o embedding
da penúltima camada. Tudo é calculado em float64 sobre a cabeça linear.
"""
import logging
from dataclasses import dataclass

import numpy as np
import torch

from exceptions import ShapeMismatch
from models.training import TrainedModel
from transform.samples import SampleSet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelViews:
    """Saídas por amostra, alinhadas por posição com o SampleSet consultado."""
    posteriors: np.ndarray
    predicted_label: np.ndarray
    loss: np.ndarray
    embeddings: np.ndarray
    last_layer_gradient: np.ndarray

    def __len__(self) -> int:
        return len(self.loss)


def head_parameters(model: TrainedModel) -> tuple:
    """(W, b) da camada final em float64; W tem shape (K, E)."""
    head = model.network.head
    return (
        head.weight.detach().cpu().numpy().astype(np.float64),
        head.bias.detach().cpu().numpy().astype(np.float64),
    )


def head_posteriors(embeddings: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    logits = torch.as_tensor(embeddings @ weight.T + bias, dtype=torch.float64)
    return torch.softmax(logits, dim=1).numpy()


def head_loss(embeddings: np.ndarray, labels: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Cross-entropy por amostra em função dos parâmetros da cabeça."""
    logits = torch.as_tensor(embeddings @ weight.T + bias, dtype=torch.float64)
    log_probs = torch.log_softmax(logits, dim=1).numpy()
    return -log_probs[np.arange(len(labels)), labels]


def model_views(model: TrainedModel, samples: SampleSet) -> ModelViews:
    """
    Calcula posteriors, rótulo previsto, loss, embedding e gradiente da última camada.

    Args:
        model: Modelo treinado
        samples: Amostras consultadas (com task_label)

    Returns:
        ModelViews; o gradiente tem K*E + K colunas (pesos em ordem de linha, depois bias)

    Raises:
        ShapeMismatch: Se o shape das features não for o de entrada do modelo
    """
    if len(samples) and samples.input_shape != tuple(model.input_shape):
        raise ShapeMismatch(
            f"Entrada com shape {samples.input_shape}, modelo espera {tuple(model.input_shape)}"
        )
    embeddings = model.embeddings(samples.features).astype(np.float64)
    weight, bias = head_parameters(model)
    labels = np.asarray(samples.task_labels)

    posteriors = head_posteriors(embeddings, weight, bias)
    loss = head_loss(embeddings, labels, weight, bias)

    residual = posteriors.copy()
    residual[np.arange(len(labels)), labels] -= 1.0
    grad_weight = residual[:, :, None] * embeddings[:, None, :]
    gradient = np.concatenate([grad_weight.reshape(len(labels), -1), residual], axis=1)

    log.debug(f"Visões calculadas para {len(samples)} amostras")
    return ModelViews(
        posteriors=posteriors,
        predicted_label=np.argmax(posteriors, axis=1),
        loss=loss,
        embeddings=embeddings,
        last_layer_gradient=gradient,
    )
