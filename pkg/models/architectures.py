"""
Arquiteturas de bancada.

Todas expõem `embed(x)` (embedding da penúltima camada, dimensão fixa
EMBEDDING_DIM) e `head` (camada final linear), e não usam BatchNorm nem
Dropout, o que permite gradientes por amostra com torch.func.
"""
import logging
from typing import Tuple

import torch
from torch import nn

from config import ARCHITECTURES
from exceptions import InvalidSpec

log = logging.getLogger(__name__)

EMBEDDING_DIM = 64


class Classifier(nn.Module):
    """Base: forward(x) = head(embed(x))."""

    def __init__(self, num_classes: int):
        super().__init__()
        self.num_classes = num_classes
        self.head = nn.Linear(EMBEDDING_DIM, num_classes)

    def embed(self, x: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.embed(x))


class SmallCNN(Classifier):
    """2 blocos convolucionais + 2 camadas densas."""

    def __init__(self, input_shape: Tuple[int, ...], num_classes: int):
        super().__init__(num_classes)
        channels, height, width = input_shape
        self.features = nn.Sequential(
            nn.Conv2d(channels, 16, kernel_size=3, padding=1),
            nn.ReLU(),
            nn.MaxPool2d(2),
            nn.Conv2d(16, 32, kernel_size=3, padding=1),
            nn.ReLU(),
            nn.MaxPool2d(2),
            nn.Flatten(),
        )
        self.dense = nn.Sequential(
            nn.Linear(32 * (height // 4) * (width // 4), EMBEDDING_DIM),
            nn.ReLU(),
        )

    def embed(self, x):
        return self.dense(self.features(x))


class MLP(Classifier):
    """3 camadas densas."""

    def __init__(self, input_shape: Tuple[int, ...], num_classes: int):
        super().__init__(num_classes)
        n_inputs = 1
        for dim in input_shape:
            n_inputs *= dim
        self.body = nn.Sequential(
            nn.Flatten(),
            nn.Linear(n_inputs, 128),
            nn.ReLU(),
            nn.Linear(128, EMBEDDING_DIM),
            nn.ReLU(),
        )

    def embed(self, x):
        return self.body(x)


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, kernel_size=3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, kernel_size=3, padding=1)
        self.relu = nn.ReLU()

    def forward(self, x):
        out = self.relu(self.conv1(x))
        return self.relu(x + self.conv2(out))


class ResNetSmall(Classifier):
    """Stem convolucional + 3 blocos residuais + pooling global."""

    def __init__(self, input_shape: Tuple[int, ...], num_classes: int):
        super().__init__(num_classes)
        channels = input_shape[0]
        self.stem = nn.Sequential(nn.Conv2d(channels, 16, kernel_size=3, padding=1), nn.ReLU())
        self.blocks = nn.Sequential(ResidualBlock(16), ResidualBlock(16), ResidualBlock(16))
        self.pool = nn.Sequential(nn.AdaptiveAvgPool2d(1), nn.Flatten())
        self.dense = nn.Sequential(nn.Linear(16, EMBEDDING_DIM), nn.ReLU())

    def embed(self, x):
        return self.dense(self.pool(self.blocks(self.stem(x))))


_REGISTRY = {
    "small_cnn": SmallCNN,
    "mlp": MLP,
    "resnet_small": ResNetSmall,
}


def build_network(
    architecture_id: str,
    input_shape: Tuple[int, ...],
    num_classes: int,
    seed: int,
) -> Classifier:
    """
    Instancia a arquitetura com pesos iniciais determinísticos.

    Args:
        architecture_id: Uma de ARCHITECTURES
        input_shape: (C, H, W)
        num_classes: K
        seed: Semente da inicialização

    Returns:
        Rede em modo eval

    Raises:
        InvalidSpec: Arquitetura desconhecida
    """
    if architecture_id not in _REGISTRY:
        raise InvalidSpec(f"Arquitetura desconhecida: {architecture_id}. Válidas: {list(ARCHITECTURES)}")
    torch.manual_seed(seed)
    network = _REGISTRY[architecture_id](tuple(input_shape), num_classes)
    network.eval()
    log.debug(
        f"Rede {architecture_id} criada: "
        f"{sum(p.numel() for p in network.parameters())} parâmetros"
    )
    return network
