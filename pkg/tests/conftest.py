"""
Fixtures compartilhadas dos testes.

Coloca a raiz do repositório no sys.path (os módulos são importados a partir
da raiz, como nos scripts) e monta coleções pequenas de amostras.
"""
import logging
import sys
from pathlib import Path

import numpy as np
import pytest
import torch
from torch import nn

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from ingestion.synthetic_generator import SyntheticSpec, generate_synthetic  # noqa: E402
from models.architectures import Classifier  # noqa: E402
from models.training import ModelConfig, TrainedModel, train_model  # noqa: E402
from transform.partition import PartitionSpec, partition_dataset  # noqa: E402
from transform.samples import PropertyProportion, SampleSet  # noqa: E402

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)


def make_samples(properties, num_classes=2, num_attributes=2, num_properties=2, seed=0, shape=(1, 4, 4)):
    """Coleção com propriedades dadas e o resto aleatório (features em [0, 1])."""
    properties = np.asarray(properties, dtype=np.int64)
    rng = np.random.default_rng(seed)
    n = len(properties)
    return SampleSet(
        ids=np.arange(n),
        features=rng.random((n, *shape)).astype(np.float32),
        task_labels=rng.integers(0, num_classes, size=n),
        attributes=rng.integers(0, num_attributes, size=n),
        properties=properties,
        num_classes=num_classes,
        num_attributes=num_attributes,
        num_properties=num_properties,
    )


@pytest.fixture
def balanced_pool():
    """100 amostras, 50 de cada propriedade."""
    return make_samples([0] * 50 + [1] * 50)


@pytest.fixture(scope="session")
def synthetic_small():
    spec = SyntheticSpec(n_samples=400, image_size=8, num_classes=2, noise=0.1)
    return generate_synthetic(spec, seed=7)


class LinearToy(Classifier):
    """Classificador linear sobre a entrada achatada (embedding = entrada)."""

    def __init__(self, n_inputs, num_classes):
        super().__init__(num_classes)
        self.head = nn.Linear(n_inputs, num_classes)

    def embed(self, x):
        return x.flatten(1)


def toy_model(weight, bias, input_shape):
    """TrainedModel linear com pesos fixos."""
    weight = np.asarray(weight, dtype=np.float32)
    network = LinearToy(weight.shape[1], weight.shape[0])
    with torch.no_grad():
        network.head.weight.copy_(torch.from_numpy(weight))
        network.head.bias.copy_(torch.as_tensor(np.asarray(bias, dtype=np.float32)))
    return TrainedModel.from_network(network, input_shape, weight.shape[0])


QUERY_PROPORTIONS = [PropertyProportion((0.2, 0.8)), PropertyProportion((0.5, 0.5))]
BENCH_MODEL = ModelConfig(architecture_id="mlp", max_epochs=5, batch_size=64, seed=0)


@pytest.fixture(scope="session")
def bench_bundle():
    """Bundle de bancada: 1200 amostras 8x8, atributo acoplado à propriedade."""
    spec = SyntheticSpec(n_samples=1200, image_size=8, num_classes=2, noise=0.1, attribute_property_coupling=0.8)
    samples = generate_synthetic(spec, seed=3)
    partition = PartitionSpec(query_proportions=QUERY_PROPORTIONS, query_per_set=10)
    return partition_dataset(samples, partition, seed=3)


@pytest.fixture(scope="session")
def bench_target(bench_bundle):
    return train_model(BENCH_MODEL, bench_bundle.target_train, bench_bundle.target_test)


# experimento mínimo de ponta a ponta: MLP de 1 época, só MemInf com D_aux^P
TINY_EXPERIMENT = """
seed = 0
workers = 1
repeats = 1

[dataset.synthetic]
n_samples = 600
image_size = 8
num_classes = 2
attribute_property_coupling = 0.8

[target]
architecture_id = "mlp"
max_epochs = 1
batch_size = 64

[attacks]
meminf_settings = ["mb_dp"]
attrinf = false
propinf = false

[attacks.adv]
max_iters = 2

[attacks.meminf]
epochs = 2

[[compositions]]
name = "adv2meminf"
settings = ["mb_dp"]
"""
