"""
Partição em quatro componentes (alvo treino/teste, sombra treino/teste)
mais os conjuntos auxiliares D_aux^P e D_aux^Q.

Ordem de sorteio: treinos (com proporção pedida), testes (balanceados pela
propriedade), e o restante vira o pool de consulta, de onde saem os conjuntos
D_aux^Q. Nada é reutilizado entre componentes.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from exceptions import DisjointnessViolation, InsufficientSamples, InvalidSpec
from transform.canonical import derive_seed
from transform.samples import PropertyProportion, SampleSet
from transform.sampling import build_query_aux, draw_positions, uniform_subset

log = logging.getLogger(__name__)

PARTITIONS = ("target_train", "target_test", "shadow_train", "shadow_test")
TRAIN_PARTITIONS = ("target_train", "shadow_train")


@dataclass(frozen=True)
class PartitionSpec:
    """
    Frações de cada partição e proporções de propriedade dos treinos.

    Atributos:
        fractions: fração do total por partição (soma <= 1); o resto é o pool de consulta
        proportions: proporção pedida para target_train / shadow_train (None = uniforme)
        partial_fraction: fração de target_train que forma D_aux^P
        partial_per_class: se True, D_aux^P é estratificado pela propriedade
        query_proportions: proporções dos conjuntos D_aux^Q
        query_per_set: tamanho de cada conjunto D_aux^Q
    """
    fractions: Dict[str, float] = field(default_factory=lambda: {p: 0.2 for p in PARTITIONS})
    proportions: Dict[str, Optional[PropertyProportion]] = field(default_factory=dict)
    partial_fraction: float = 0.5
    partial_per_class: bool = False
    query_proportions: List[PropertyProportion] = field(default_factory=list)
    query_per_set: int = 20

    def validate(self) -> None:
        """
        Valida frações e proporções.

        Raises:
            InvalidSpec: frações negativas, soma > 1, partição desconhecida
        """
        unknown = set(self.fractions) - set(PARTITIONS)
        if unknown:
            raise InvalidSpec(f"Partições desconhecidas: {sorted(unknown)}")
        negative = {k: v for k, v in self.fractions.items() if v < 0}
        if negative:
            raise InvalidSpec(f"Frações negativas: {negative}")
        total = sum(self.fractions.values())
        if total > 1.0 + 1e-9:
            raise InvalidSpec(f"Frações somam {total:.3f} > 1")
        if not 0.0 <= self.partial_fraction <= 1.0:
            raise InvalidSpec(f"partial_fraction fora de [0, 1]: {self.partial_fraction}")
        unknown_props = set(self.proportions) - set(TRAIN_PARTITIONS)
        if unknown_props:
            raise InvalidSpec(f"Proporções só valem para {TRAIN_PARTITIONS}, recebido {sorted(unknown_props)}")
        if self.query_per_set < 0:
            raise InvalidSpec(f"query_per_set negativo: {self.query_per_set}")

    def to_dict(self) -> dict:
        return {
            "fractions": dict(sorted(self.fractions.items())),
            "proportions": {
                k: (None if v is None else list(v.weights))
                for k, v in sorted(self.proportions.items())
            },
            "partial_fraction": self.partial_fraction,
            "partial_per_class": self.partial_per_class,
            "query_proportions": [list(p.weights) for p in self.query_proportions],
            "query_per_set": self.query_per_set,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PartitionSpec":
        """Inverso de to_dict (usado ao recarregar um bundle do disco)."""
        return cls(
            fractions=dict(data.get("fractions", {p: 0.2 for p in PARTITIONS})),
            proportions={
                k: (None if v is None else PropertyProportion(tuple(v)))
                for k, v in data.get("proportions", {}).items()
            },
            partial_fraction=float(data.get("partial_fraction", 0.5)),
            partial_per_class=bool(data.get("partial_per_class", False)),
            query_proportions=[PropertyProportion(tuple(w)) for w in data.get("query_proportions", [])],
            query_per_set=int(data.get("query_per_set", 20)),
        )


@dataclass(frozen=True, eq=False)
class DatasetBundle:
    """
    As quatro partições, D_aux^P, D_aux^Q e o pool de consulta remanescente.

    Imutável após a construção; `__post_init__` verifica a disjunção por id.
    `positions` guarda, por componente, as posições na coleção de origem
    (fonte da verdade do manifesto).
    """
    target_train: SampleSet
    target_test: SampleSet
    shadow_train: SampleSet
    shadow_test: SampleSet
    query_aux: Dict[PropertyProportion, SampleSet]
    partial_aux: SampleSet
    query_pool: SampleSet
    seed: int
    spec: PartitionSpec
    positions: Dict[str, List[int]] = field(default_factory=dict)

    def __post_init__(self):
        self.check_disjointness()

    def partitions(self) -> Dict[str, SampleSet]:
        return {name: getattr(self, name) for name in PARTITIONS}

    def check_disjointness(self) -> None:
        """
        Verifica as invariantes de disjunção do bundle.

        Raises:
            DisjointnessViolation: partições com interseção, D_aux^Q tocando
                algum treino, ou D_aux^P fora de target_train
        """
        parts = {name: s.id_set() for name, s in self.partitions().items()}
        names = list(parts)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                shared = parts[a] & parts[b]
                if shared:
                    raise DisjointnessViolation(f"{a} e {b} compartilham {len(shared)} amostras")
        train_ids = parts["target_train"] | parts["shadow_train"]
        for proportion, query in self.query_aux.items():
            if query.id_set() & train_ids:
                raise DisjointnessViolation(f"D_aux^Q {proportion} contém amostras de treino")
        if not self.partial_aux.id_set() <= parts["target_train"]:
            raise DisjointnessViolation("D_aux^P deve ser subconjunto de target_train")

    def attribute_aux(self) -> SampleSet:
        """Dado auxiliar do adversário com atributos: sombra treino + teste."""
        return SampleSet.concat(self.shadow_train, self.shadow_test)

    def manifest(self) -> dict:
        return {
            "seed": self.seed,
            "spec": self.spec.to_dict(),
            "positions": {k: list(map(int, v)) for k, v in sorted(self.positions.items())},
            "query_aux": sorted(p.key() for p in self.query_aux),
            "sizes": {name: len(s) for name, s in self.partitions().items()},
        }


def _draw_train(
    samples: SampleSet,
    available: np.ndarray,
    size: int,
    proportion: PropertyProportion,
    rng: np.random.Generator,
) -> np.ndarray:
    counts = proportion.counts(size)
    return draw_positions(samples.properties, np.flatnonzero(available), counts, rng)


def _draw_balanced(
    samples: SampleSet,
    available: np.ndarray,
    size: int,
    rng: np.random.Generator,
    name: str,
) -> np.ndarray:
    candidates = np.flatnonzero(available)
    per_class = np.bincount(samples.properties[candidates], minlength=samples.num_properties)
    feasible = int(per_class.min()) * samples.num_properties
    if size > feasible:
        log.warning(f"{name}: balanceamento truncado de {size} para {feasible} amostras")
        size = feasible
    counts = PropertyProportion.uniform(samples.num_properties).counts(size)
    return draw_positions(samples.properties, candidates, counts, rng)


def partition_dataset(samples: SampleSet, spec: PartitionSpec, seed: int) -> DatasetBundle:
    """
    Particiona uma coleção nos quatro componentes e nos conjuntos auxiliares.

    Args:
        samples: Coleção completa
        spec: Frações, proporções e parâmetros dos auxiliares
        seed: Semente (o resultado é determinístico dado seed)

    Returns:
        DatasetBundle que satisfaz todas as invariantes

    Raises:
        InvalidSpec: frações negativas ou soma > 1
        InsufficientSamples: proporção pedida inalcançável
    """
    spec.validate()
    n_total = len(samples)
    available = np.ones(n_total, dtype=bool)
    positions: Dict[str, np.ndarray] = {}

    for index, name in enumerate(PARTITIONS):
        size = int(np.floor(spec.fractions.get(name, 0.0) * n_total + 1e-9))
        rng = np.random.default_rng(derive_seed(seed, f"partition:{name}", index))
        if name in TRAIN_PARTITIONS:
            proportion = spec.proportions.get(name) or PropertyProportion.uniform(samples.num_properties)
            if len(proportion) != samples.num_properties:
                raise InvalidSpec(f"Proporção de {name} com {len(proportion)} pesos para P={samples.num_properties}")
            try:
                chosen = _draw_train(samples, available, size, proportion, rng)
            except InsufficientSamples as e:
                raise InsufficientSamples(f"{name} ({proportion}): {e}") from e
        else:
            chosen = _draw_balanced(samples, available, size, rng, name)
        available[chosen] = False
        positions[name] = chosen
        log.debug(f"Partição {name}: {len(chosen)} amostras")

    query_positions = np.flatnonzero(available)
    query_pool = samples.subset(query_positions)
    query_aux = {}
    if spec.query_proportions:
        query_aux = build_query_aux(
            query_pool, spec.query_proportions, spec.query_per_set, derive_seed(seed, "query_aux")
        )

    target_train = samples.subset(positions["target_train"])
    partial_aux = uniform_subset(
        target_train,
        int(round(spec.partial_fraction * len(target_train))),
        derive_seed(seed, "partial_aux"),
        stratify=spec.partial_per_class,
    )

    bundle = DatasetBundle(
        target_train=target_train,
        target_test=samples.subset(positions["target_test"]),
        shadow_train=samples.subset(positions["shadow_train"]),
        shadow_test=samples.subset(positions["shadow_test"]),
        query_aux=query_aux,
        partial_aux=partial_aux,
        query_pool=query_pool,
        seed=seed,
        spec=spec,
        positions={k: v.tolist() for k, v in positions.items()},
    )
    log.info(
        "Partição concluída: "
        + ", ".join(f"{name}={len(s)}" for name, s in bundle.partitions().items())
        + f", pool de consulta={len(query_pool)}, D_aux^P={len(partial_aux)}"
    )
    return bundle
