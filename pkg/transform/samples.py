"""
Tipos de domínio das amostras: Sample, SampleSet e PropertyProportion.

Cada amostra carrega três eixos de rótulo lidos pelos ataques:
    - task_label: rótulo da tarefa (0..K-1), o que o classificador aprende;
    - attribute: atributo sensível (0..A-1), alvo do AttrInf;
    - property: propriedade secundária (0..P-1), alvo do PropInf.
"""
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from exceptions import InvalidSpec
from transform.canonical import array_hash

log = logging.getLogger(__name__)

PROPORTION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Sample:
    sample_id: int
    features: np.ndarray
    task_label: int
    attribute: int
    property: int


def _readonly(array: np.ndarray, dtype) -> np.ndarray:
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SampleSet:
    """
    Coleção imutável de amostras (arrays alinhados por posição).

    A identidade de uma amostra é seu `id`; disjunção entre partições é
    sempre verificada por id, nunca por conteúdo.
    """
    ids: np.ndarray
    features: np.ndarray
    task_labels: np.ndarray
    attributes: np.ndarray
    properties: np.ndarray
    num_classes: int
    num_attributes: int
    num_properties: int

    def __post_init__(self):
        object.__setattr__(self, "ids", _readonly(self.ids, np.int64))
        object.__setattr__(self, "features", _readonly(self.features, np.float32))
        object.__setattr__(self, "task_labels", _readonly(self.task_labels, np.int64))
        object.__setattr__(self, "attributes", _readonly(self.attributes, np.int64))
        object.__setattr__(self, "properties", _readonly(self.properties, np.int64))

        n = len(self.ids)
        for name in ("features", "task_labels", "attributes", "properties"):
            if len(getattr(self, name)) != n:
                raise InvalidSpec(f"Campo '{name}' com {len(getattr(self, name))} linhas, esperado {n}")
        if n == 0:
            return
        if len(np.unique(self.ids)) != n:
            raise InvalidSpec("Ids de amostra duplicados no SampleSet")
        if not np.all(np.isfinite(self.features)):
            raise InvalidSpec("Features com valores não-finitos")
        if self.features.min() < 0.0 or self.features.max() > 1.0:
            raise InvalidSpec("Features fora do intervalo [0, 1]")
        checks = (
            ("task_labels", self.task_labels, self.num_classes),
            ("attributes", self.attributes, self.num_attributes),
            ("properties", self.properties, self.num_properties),
        )
        for name, values, bound in checks:
            if values.min() < 0 or values.max() >= bound:
                raise InvalidSpec(f"Campo '{name}' fora de [0, {bound})")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def input_shape(self) -> tuple:
        return tuple(self.features.shape[1:])

    def subset(self, positions: Sequence[int]) -> "SampleSet":
        """Nova coleção com as amostras nas posições dadas (na ordem dada)."""
        positions = np.asarray(positions, dtype=np.int64)
        return SampleSet(
            ids=self.ids[positions],
            features=self.features[positions],
            task_labels=self.task_labels[positions],
            attributes=self.attributes[positions],
            properties=self.properties[positions],
            num_classes=self.num_classes,
            num_attributes=self.num_attributes,
            num_properties=self.num_properties,
        )

    def sample(self, position: int) -> Sample:
        return Sample(
            sample_id=int(self.ids[position]),
            features=self.features[position],
            task_label=int(self.task_labels[position]),
            attribute=int(self.attributes[position]),
            property=int(self.properties[position]),
        )

    def __iter__(self) -> Iterable[Sample]:
        for position in range(len(self)):
            yield self.sample(position)

    def property_counts(self) -> np.ndarray:
        return np.bincount(self.properties, minlength=self.num_properties)

    def attribute_counts(self) -> np.ndarray:
        return np.bincount(self.attributes, minlength=self.num_attributes)

    def id_set(self) -> frozenset:
        return frozenset(int(i) for i in self.ids)

    def fingerprint(self) -> str:
        """Hash do conteúdo (ids, features e os três eixos de rótulo)."""
        return array_hash(self.ids, self.features, self.task_labels, self.attributes, self.properties)

    def to_arrays(self) -> dict:
        return {
            "ids": np.asarray(self.ids),
            "features": np.asarray(self.features),
            "task_labels": np.asarray(self.task_labels),
            "attributes": np.asarray(self.attributes),
            "properties": np.asarray(self.properties),
        }

    @classmethod
    def empty_like(cls, other: "SampleSet") -> "SampleSet":
        return other.subset([])

    @classmethod
    def concat(cls, *sets: "SampleSet") -> "SampleSet":
        """Concatena coleções com os mesmos cardinais de rótulo."""
        if not sets:
            raise InvalidSpec("concat precisa de pelo menos uma coleção")
        first = sets[0]
        return SampleSet(
            ids=np.concatenate([s.ids for s in sets]),
            features=np.concatenate([s.features for s in sets]),
            task_labels=np.concatenate([s.task_labels for s in sets]),
            attributes=np.concatenate([s.attributes for s in sets]),
            properties=np.concatenate([s.properties for s in sets]),
            num_classes=first.num_classes,
            num_attributes=first.num_attributes,
            num_properties=first.num_properties,
        )


@dataclass(frozen=True)
class PropertyProportion:
    """
    Distribuição de pesos sobre os P valores da propriedade.

    Invariantes: pesos não-negativos que somam 1 (tolerância 1e-9).
    É hashable e ordenável, então serve de chave para os conjuntos de consulta.
    """
    weights: tuple = field()

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        if not weights:
            raise InvalidSpec("PropertyProportion sem pesos")
        if any(w < 0 or not np.isfinite(w) for w in weights):
            raise InvalidSpec(f"Pesos negativos ou não-finitos: {weights}")
        if abs(sum(weights) - 1.0) > PROPORTION_TOLERANCE:
            raise InvalidSpec(f"Pesos devem somar 1, somam {sum(weights)}: {weights}")
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_ratio(cls, *parts: float) -> "PropertyProportion":
        """Cria a partir de uma razão não normalizada (ex: from_ratio(2, 8))."""
        total = float(sum(parts))
        if total <= 0:
            raise InvalidSpec(f"Razão inválida: {parts}")
        weights = [p / total for p in parts]
        # fecha a soma exatamente em 1 no último peso não-nulo
        weights[-1] = 1.0 - sum(weights[:-1])
        return cls(tuple(max(w, 0.0) for w in weights))

    @classmethod
    def uniform(cls, num_properties: int) -> "PropertyProportion":
        return cls.from_ratio(*([1.0] * num_properties))

    @classmethod
    def parse(cls, text: str) -> "PropertyProportion":
        """Inverso de `key()`: "0.2:0.8" -> PropertyProportion((0.2, 0.8))."""
        return cls.from_ratio(*(float(part) for part in str(text).split(":")))

    def __len__(self) -> int:
        return len(self.weights)

    def __lt__(self, other: "PropertyProportion") -> bool:
        return self.weights < other.weights

    def key(self) -> str:
        return ":".join(format(w, ".6g") for w in self.weights)

    def __str__(self) -> str:
        return self.key()

    def to_dict(self) -> dict:
        return {"weights": list(self.weights)}

    def is_uniform(self, tol: float = 1e-12) -> bool:
        target = 1.0 / len(self.weights)
        return all(abs(w - target) <= tol for w in self.weights)

    def counts(self, n: int) -> np.ndarray:
        """
        Contagens inteiras por valor de propriedade pelo método do maior resto.

        Args:
            n: Total de amostras

        Returns:
            Array de inteiros que soma n; empates de resto vão para o menor índice
        """
        exact = np.asarray(self.weights) * n
        counts = np.floor(exact + 1e-9).astype(np.int64)
        remainder = int(n - counts.sum())
        if remainder > 0:
            fractional = exact - counts
            # argsort estável sobre -fração: maior resto primeiro, menor índice no empate
            order = np.argsort(-fractional, kind="stable")
            counts[order[:remainder]] += 1
        return counts
