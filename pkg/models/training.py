"""
Treino dos modelos alvo e sombra.

Protocolo: Adam, lote 256, taxa 1e-2, parada na primeira época em que
train_acc - test_acc > overfit_threshold (0.250) ou em max_epochs.
O log registra qual das duas condições disparou.
"""
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from torch.utils.data import DataLoader, TensorDataset

from config import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_EPOCHS,
    DEFAULT_OVERFIT_THRESHOLD,
)
from exceptions import DivergedTraining, InvalidSpec
from models.architectures import Classifier, build_network
from models.privacy import (
    DPConfig,
    clip_per_sample_gradients,
    compute_noise_multiplier,
    per_sample_gradients,
)
from transform.canonical import array_hash, content_hash
from transform.samples import SampleSet

log = logging.getLogger(__name__)

INFERENCE_BATCH = 1024


@dataclass(frozen=True)
class ModelConfig:
    architecture_id: str = "small_cnn"
    max_epochs: int = DEFAULT_MAX_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    learning_rate: float = DEFAULT_LEARNING_RATE
    optimizer: str = "adam"
    overfit_threshold: float = DEFAULT_OVERFIT_THRESHOLD
    dp: Optional[DPConfig] = None
    seed: int = 0

    def validate(self) -> None:
        """
        Raises:
            InvalidSpec: max_epochs < 1, limiar fora de [0, 1], taxa <= 0, otimizador desconhecido
        """
        if self.max_epochs < 1:
            raise InvalidSpec(f"max_epochs deve ser >= 1, recebido {self.max_epochs}")
        # 0 é aceito: para na primeira época com qualquer gap positivo
        if not 0.0 <= self.overfit_threshold <= 1.0:
            raise InvalidSpec(f"overfit_threshold fora de [0, 1]: {self.overfit_threshold}")
        if self.learning_rate <= 0:
            raise InvalidSpec(f"learning_rate deve ser > 0, recebido {self.learning_rate}")
        if self.batch_size < 1:
            raise InvalidSpec(f"batch_size deve ser >= 1, recebido {self.batch_size}")
        if self.optimizer != "adam":
            raise InvalidSpec(f"Otimizador não suportado: {self.optimizer}")
        if self.dp is not None:
            self.dp.validate()

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        data = dict(data)
        if data.get("dp") is not None:
            data["dp"] = DPConfig(**data["dp"])
        return cls(**data)


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    train_loss: float
    train_acc: float
    test_acc: float
    max_clipped_norm: Optional[float] = None


@dataclass(eq=False)
class TrainedModel:
    """
    Handle de um classificador treinado (visões caixa-preta e caixa-branca).

    `network` é tratado como imutável depois do treino: todas as consultas
    rodam em modo eval e sem gradiente nos parâmetros.
    """
    network: Classifier
    config: ModelConfig
    input_shape: Tuple[int, ...]
    num_classes: int
    training_log: List[EpochLog] = field(default_factory=list)
    final_train_acc: float = 0.0
    final_test_acc: float = 0.0
    stop_reason: str = "untrained"
    noise_multiplier: Optional[float] = None

    @property
    def architecture_id(self) -> str:
        return self.config.architecture_id

    @property
    def dp(self) -> Optional[DPConfig]:
        return self.config.dp

    @property
    def epochs_trained(self) -> int:
        return len(self.training_log)

    def logits(self, features: np.ndarray) -> np.ndarray:
        return self._batched(features, lambda x: self.network(x))

    def embeddings(self, features: np.ndarray) -> np.ndarray:
        return self._batched(features, lambda x: self.network.embed(x))

    def posteriors(self, features: np.ndarray) -> np.ndarray:
        """Vetor de probabilidade por amostra (float64, soma 1)."""
        logits = torch.as_tensor(self.logits(features), dtype=torch.float64)
        return torch.softmax(logits, dim=1).numpy()

    def predict(self, features: np.ndarray) -> np.ndarray:
        # np.argmax devolve o menor índice em empates exatos
        return np.argmax(self.posteriors(features), axis=1)

    def _batched(self, features: np.ndarray, fn: Callable) -> np.ndarray:
        features = np.asarray(features, dtype=np.float32)
        if features.ndim == len(self.input_shape):
            features = features[None]
        outputs = []
        self.network.eval()
        with torch.no_grad():
            for start in range(0, len(features), INFERENCE_BATCH):
                batch = torch.from_numpy(np.ascontiguousarray(features[start:start + INFERENCE_BATCH]))
                outputs.append(fn(batch).numpy())
        if not outputs:
            return np.zeros((0, self.num_classes), dtype=np.float32)
        return np.concatenate(outputs)

    def state_arrays(self) -> Dict[str, np.ndarray]:
        return {name: t.detach().cpu().numpy() for name, t in self.network.state_dict().items()}

    def fingerprint(self) -> str:
        """Hash dos pesos + configuração (chave dos caches de features)."""
        state = self.state_arrays()
        return content_hash({
            "config": self.config.to_dict(),
            "weights": array_hash(*[state[k] for k in sorted(state)]),
        })

    def provenance(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "input_shape": list(self.input_shape),
            "num_classes": self.num_classes,
            "training_log": [asdict(entry) for entry in self.training_log],
            "final_train_acc": self.final_train_acc,
            "final_test_acc": self.final_test_acc,
            "stop_reason": self.stop_reason,
            "noise_multiplier": self.noise_multiplier,
        }

    @classmethod
    def from_network(cls, network: Classifier, input_shape, num_classes: int, config: Optional[ModelConfig] = None):
        """Embrulha uma rede já construída (modelos de teste, redes externas)."""
        network.eval()
        return cls(network=network, config=config or ModelConfig(), input_shape=tuple(input_shape), num_classes=num_classes)


def accuracy(model: TrainedModel, samples: SampleSet) -> float:
    if len(samples) == 0:
        return 0.0
    return float(np.mean(model.predict(samples.features) == samples.task_labels))


def _loader(samples: SampleSet, batch_size: int, seed: int) -> DataLoader:
    dataset = TensorDataset(
        torch.from_numpy(np.asarray(samples.features)),
        torch.from_numpy(np.asarray(samples.task_labels)),
    )
    generator = torch.Generator().manual_seed(seed)
    return DataLoader(dataset, batch_size=batch_size, shuffle=True, generator=generator)


def _check_inputs(config: ModelConfig, train: SampleSet, test: SampleSet) -> None:
    config.validate()
    if len(train) == 0:
        raise InvalidSpec("Conjunto de treino vazio")
    if len(test) == 0:
        raise InvalidSpec("Conjunto de teste vazio")


def _fit(
    config: ModelConfig,
    train: SampleSet,
    test: SampleSet,
    step: Callable,
    noise_multiplier: Optional[float] = None,
) -> TrainedModel:
    network = build_network(config.architecture_id, train.input_shape, train.num_classes, config.seed)
    optimizer = torch.optim.Adam(network.parameters(), lr=config.learning_rate)
    model = TrainedModel(
        network=network,
        config=config,
        input_shape=train.input_shape,
        num_classes=train.num_classes,
        noise_multiplier=noise_multiplier,
    )
    loader = _loader(train, config.batch_size, config.seed)

    stop_reason = "max_epochs"
    for epoch in range(1, config.max_epochs + 1):
        network.train()
        losses, max_norm = [], None
        for inputs, targets in loader:
            optimizer.zero_grad()
            loss, clipped_norm = step(network, inputs, targets)
            if not torch.isfinite(loss):
                log.error(f"Loss não-finita na época {epoch}")
                raise DivergedTraining(f"Loss não-finita ({loss.item()}) na época {epoch}")
            optimizer.step()
            losses.append(loss.item())
            if clipped_norm is not None:
                max_norm = clipped_norm if max_norm is None else max(max_norm, clipped_norm)
        network.eval()

        train_acc, test_acc = accuracy(model, train), accuracy(model, test)
        model.training_log.append(EpochLog(epoch, float(np.mean(losses)), train_acc, test_acc, max_norm))
        log.debug(f"Época {epoch}: train_acc={train_acc:.3f} test_acc={test_acc:.3f}")
        if train_acc - test_acc > config.overfit_threshold:
            stop_reason = "overfit"
            break

    model.final_train_acc = model.training_log[-1].train_acc
    model.final_test_acc = model.training_log[-1].test_acc
    model.stop_reason = stop_reason
    log.info(
        f"Treino {config.architecture_id} concluído em {model.epochs_trained} épocas "
        f"({stop_reason}): train_acc={model.final_train_acc:.3f} test_acc={model.final_test_acc:.3f}"
    )
    return model


def _plain_step(network, inputs, targets):
    loss = F.cross_entropy(network(inputs), targets)
    if torch.isfinite(loss):
        loss.backward()
    return loss.detach(), None


def train_model(config: ModelConfig, train: SampleSet, test: SampleSet) -> TrainedModel:
    """
    Treina um classificador com a regra de parada por overfitting.

    Args:
        config: Configuração (arquitetura, épocas, lote, taxa, limiar, semente)
        train: Conjunto de treino (não vazio)
        test: Conjunto de teste (não vazio), usado apenas na regra de parada

    Returns:
        TrainedModel com uma entrada de log por época completada

    Raises:
        InvalidSpec: Configuração inválida ou conjuntos vazios
        DivergedTraining: Loss não-finita
    """
    _check_inputs(config, train, test)
    if config.dp is not None:
        return train_dp_model(config, train, test)
    return _fit(config, train, test, _plain_step)


def train_dp_model(config: ModelConfig, train: SampleSet, test: SampleSet) -> TrainedModel:
    """
    Treino com DP-SGD: corte por amostra em clip_norm e ruído N(0, (sigma*C)^2).

    Args:
        config: Configuração com `dp` preenchido
        train: Conjunto de treino
        test: Conjunto de teste

    Returns:
        TrainedModel com a DPConfig, o sigma usado e a maior norma cortada por época

    Raises:
        InvalidSpec: Sem `dp` na configuração
        AccountingError: Nenhum sigma atinge o alvo
    """
    if config.dp is None:
        raise InvalidSpec("train_dp_model exige config.dp")
    _check_inputs(config, train, test)
    dp = config.dp
    sigma = compute_noise_multiplier(dp, config.max_epochs, config.batch_size, len(train))
    noise_generator = torch.Generator().manual_seed(config.seed + 1)

    def dp_step(network, inputs, targets):
        with torch.no_grad():
            loss = F.cross_entropy(network(inputs), targets)
        if not torch.isfinite(loss):
            return loss, None
        gradients = per_sample_gradients(network, inputs, targets)
        clipped, norms = clip_per_sample_gradients(gradients, dp.clip_norm)
        batch_size = inputs.shape[0]
        for name, param in network.named_parameters():
            summed = clipped[name].sum(dim=0)
            if sigma > 0:
                noise = torch.normal(
                    0.0, sigma * dp.clip_norm, size=summed.shape, generator=noise_generator
                )
                summed = summed + noise
            param.grad = summed / batch_size
        return loss, float(norms.max())

    log.info(f"Treino DP: epsilon={dp.epsilon}, delta={dp.delta}, C={dp.clip_norm}, sigma={sigma:.4f}")
    return _fit(config, train, test, dp_step, noise_multiplier=sigma)


def init_model(config: ModelConfig, train: SampleSet, test: SampleSet) -> TrainedModel:
    """Modelo com pesos iniciais (zero épocas), usado como linha de base aleatória."""
    config.validate()
    network = build_network(config.architecture_id, train.input_shape, train.num_classes, config.seed)
    model = TrainedModel(network=network, config=config, input_shape=train.input_shape, num_classes=train.num_classes)
    model.final_train_acc = accuracy(model, train)
    model.final_test_acc = accuracy(model, test)
    return model


def with_seed(config: ModelConfig, seed: int) -> ModelConfig:
    return replace(config, seed=seed)
