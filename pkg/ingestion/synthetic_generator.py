"""
Gerador sintético de imagens pequenas (um canal) com três eixos plantados.

Cada amostra é uma grade HxW em [0, 1] com:
    - um bloco na posição da classe da tarefa (task_label);
    - a textura do bloco definida pelo atributo (sólida, xadrez, listrada, ...);
    - uma faixa inferior cuja intensidade codifica a propriedade, que também
      atenua o bloco da tarefa (a composição de propriedades do treino muda
      o comportamento do modelo, o que o PropInf explora);
    - ruído gaussiano e uma fração de rótulos trocados (memorização).
"""
import logging
from dataclasses import asdict, dataclass

import numpy as np

from config import SYNTHETIC_DEFAULTS
from exceptions import InvalidSpec
from transform.samples import SampleSet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyntheticSpec:
    n_samples: int = SYNTHETIC_DEFAULTS["n_samples"]
    image_size: int = SYNTHETIC_DEFAULTS["image_size"]
    num_classes: int = SYNTHETIC_DEFAULTS["num_classes"]
    num_attributes: int = SYNTHETIC_DEFAULTS["num_attributes"]
    num_properties: int = SYNTHETIC_DEFAULTS["num_properties"]
    noise: float = SYNTHETIC_DEFAULTS["noise"]
    label_noise: float = 0.1
    attribute_property_coupling: float = SYNTHETIC_DEFAULTS["attribute_property_coupling"]

    def validate(self) -> None:
        if self.image_size < 8:
            raise InvalidSpec(f"image_size deve ser >= 8, recebido {self.image_size}")
        if min(self.num_classes, self.num_attributes, self.num_properties) < 2:
            raise InvalidSpec("num_classes, num_attributes e num_properties devem ser >= 2")
        if self.num_classes > 9:
            raise InvalidSpec("O gerador planta no máximo 9 posições de classe")
        if not 0.0 <= self.attribute_property_coupling <= 1.0:
            raise InvalidSpec("attribute_property_coupling fora de [0, 1]")
        if self.attribute_property_coupling > 0 and self.num_attributes != self.num_properties:
            raise InvalidSpec("Acoplamento atributo-propriedade exige A == P")
        if not 0.0 <= self.label_noise < 1.0:
            raise InvalidSpec("label_noise fora de [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


def _block_slots(image_size: int, num_classes: int) -> list:
    """Cantos superiores esquerdos dos blocos de cada classe (grade 3x3 na área útil)."""
    block = image_size // 4
    usable = image_size - 3 - block
    coords = np.linspace(0, usable, 3).astype(int)
    slots = [(int(r), int(c)) for r in coords for c in coords]
    return slots[:num_classes], block


def _textures(block: int, num_attributes: int) -> np.ndarray:
    rows, cols = np.mgrid[0:block, 0:block]
    patterns = [
        np.ones((block, block)),
        ((rows + cols) % 2 == 0).astype(float),
        (rows % 2 == 0).astype(float),
        (cols % 2 == 0).astype(float),
        ((rows // 2 + cols // 2) % 2 == 0).astype(float),
    ]
    textures = []
    for a in range(num_attributes):
        base = patterns[a % len(patterns)]
        textures.append(0.5 + 0.5 * base if a >= len(patterns) else base)
    return np.stack(textures)


def generate_synthetic(spec: SyntheticSpec, seed: int) -> SampleSet:
    """
    Gera a coleção sintética de bancada.

    Args:
        spec: Parâmetros do gerador
        seed: Semente (resultado determinístico)

    Returns:
        SampleSet com ids 0..n-1 e features em [0, 1] de shape (n, 1, H, W)
    """
    spec.validate()
    rng = np.random.default_rng(seed)
    n, size = spec.n_samples, spec.image_size

    task = rng.integers(0, spec.num_classes, size=n)
    attributes = rng.integers(0, spec.num_attributes, size=n)
    properties = rng.integers(0, spec.num_properties, size=n)
    if spec.attribute_property_coupling > 0:
        coupled = rng.random(n) < spec.attribute_property_coupling
        properties = np.where(coupled, attributes, properties)

    slots, block = _block_slots(size, spec.num_classes)
    textures = _textures(block, spec.num_attributes)
    images = rng.normal(0.0, spec.noise, size=(n, size, size)) + 0.3

    # propriedade atenua o bloco da tarefa e pinta a faixa inferior
    amplitude = 0.6 - 0.25 * properties / max(spec.num_properties - 1, 1)
    stripe = 0.2 + 0.6 * properties / max(spec.num_properties - 1, 1)
    for i in range(n):
        r, c = slots[task[i]]
        images[i, r:r + block, c:c + block] += amplitude[i] * textures[attributes[i]]
        images[i, size - 2:, :] = stripe[i] + rng.normal(0.0, spec.noise / 2, size=(2, size))

    flipped = rng.random(n) < spec.label_noise
    labels = np.where(flipped, rng.integers(0, spec.num_classes, size=n), task)

    features = np.clip(images, 0.0, 1.0)[:, None, :, :].astype(np.float32)
    samples = SampleSet(
        ids=np.arange(n),
        features=features,
        task_labels=labels,
        attributes=attributes,
        properties=properties,
        num_classes=spec.num_classes,
        num_attributes=spec.num_attributes,
        num_properties=spec.num_properties,
    )
    log.info(
        f"Gerado conjunto sintético: {n} amostras {size}x{size}, "
        f"K={spec.num_classes}, A={spec.num_attributes}, P={spec.num_properties}, "
        f"{int(flipped.sum())} rótulos trocados"
    )
    return samples
