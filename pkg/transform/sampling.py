"""
Amostragem com proporção controlada da propriedade.

Todas as funções são puras: o resultado depende apenas das entradas e da
semente. A amostragem é sempre sem reposição.
"""
import logging
from typing import Dict, List, Optional

import numpy as np

from exceptions import InsufficientSamples, InvalidSpec
from transform.canonical import derive_seed
from transform.samples import PropertyProportion, SampleSet

log = logging.getLogger(__name__)


def draw_positions(
    properties: np.ndarray,
    candidates: np.ndarray,
    counts: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Sorteia posições entre `candidates` com `counts[v]` amostras por propriedade v.

    Args:
        properties: Valor de propriedade de cada posição da coleção inteira
        candidates: Posições elegíveis (ordenadas)
        counts: Quantidade pedida por valor de propriedade
        rng: Gerador numpy já semeado

    Returns:
        Posições sorteadas, em ordem embaralhada

    Raises:
        InsufficientSamples: Se algum valor não tiver candidatos suficientes
    """
    chosen = []
    for value, count in enumerate(counts):
        if count == 0:
            continue
        pool_v = candidates[properties[candidates] == value]
        if len(pool_v) < count:
            raise InsufficientSamples(
                f"Propriedade {value}: pedidas {count} amostras, disponíveis {len(pool_v)}"
            )
        chosen.append(rng.choice(pool_v, size=int(count), replace=False))
    if not chosen:
        return np.zeros(0, dtype=np.int64)
    return rng.permutation(np.concatenate(chosen)).astype(np.int64)


def sample_with_proportion(
    pool: SampleSet,
    proportion: PropertyProportion,
    n: int,
    seed: int,
) -> SampleSet:
    """
    Sorteia n amostras do pool com a proporção de propriedade pedida.

    As contagens por valor seguem o maior resto (ex: (1/3, 2/3) com n=10 -> (3, 7)).

    Args:
        pool: Coleção de origem
        proportion: Pesos por valor de propriedade
        n: Tamanho do resultado
        seed: Semente

    Returns:
        SampleSet com n amostras

    Raises:
        InvalidSpec: Se o tamanho da proporção não casar com P ou n < 0
        InsufficientSamples: Se o pool não tiver amostras suficientes de algum valor
    """
    if n < 0:
        raise InvalidSpec(f"n deve ser não-negativo, recebido {n}")
    if len(proportion) != pool.num_properties:
        raise InvalidSpec(
            f"Proporção com {len(proportion)} pesos para P={pool.num_properties}"
        )
    counts = proportion.counts(n)
    rng = np.random.default_rng(seed)
    positions = draw_positions(pool.properties, np.arange(len(pool)), counts, rng)
    log.debug(f"Amostradas {n} amostras com proporção {proportion} -> contagens {counts.tolist()}")
    return pool.subset(positions)


def build_query_aux(
    pool: SampleSet,
    proportions: List[PropertyProportion],
    n_per_set: int,
    seed: int,
) -> Dict[PropertyProportion, SampleSet]:
    """
    Constrói um conjunto de consulta (D_aux^Q) de tamanho fixo por proporção.

    Os conjuntos nunca compartilham amostras: cada proporção sorteia apenas
    entre as posições ainda não usadas.

    Args:
        pool: Coleção disjunta das partições de treino
        proportions: Proporções pedidas (uma entrada por conjunto)
        n_per_set: Tamanho de cada conjunto
        seed: Semente

    Returns:
        Dicionário proporção -> SampleSet

    Raises:
        InsufficientSamples: Se a demanda somada ultrapassar o pool
    """
    available = np.ones(len(pool), dtype=bool)
    result: Dict[PropertyProportion, SampleSet] = {}
    for index, proportion in enumerate(proportions):
        if proportion in result:
            log.warning(f"Proporção {proportion} repetida, ignorada")
            continue
        if len(proportion) != pool.num_properties:
            raise InvalidSpec(f"Proporção {proportion} incompatível com P={pool.num_properties}")
        counts = proportion.counts(n_per_set)
        rng = np.random.default_rng(derive_seed(seed, "query_aux", index))
        positions = draw_positions(pool.properties, np.flatnonzero(available), counts, rng)
        available[positions] = False
        result[proportion] = pool.subset(positions)
        log.debug(f"Conjunto de consulta {proportion}: contagens {counts.tolist()}")

    log.info(f"Construídos {len(result)} conjuntos de consulta com {n_per_set} amostras cada")
    return result


def max_feasible_size(pool: SampleSet, proportion: PropertyProportion) -> int:
    """
    Maior n tal que sample_with_proportion(pool, proportion, n) é viável.

    Args:
        pool: Coleção de origem
        proportion: Pesos por valor de propriedade

    Returns:
        Tamanho máximo (limitado por len(pool))
    """
    available = pool.property_counts()
    n = len(pool)
    while n > 0 and np.any(proportion.counts(n) > available):
        n -= 1
    return n


def uniform_subset(pool: SampleSet, n: int, seed: int, stratify: bool = False) -> SampleSet:
    """
    Subconjunto de tamanho n, uniforme ou estratificado pela propriedade.

    Args:
        pool: Coleção de origem
        n: Tamanho pedido (limitado por len(pool))
        seed: Semente
        stratify: Se True, preserva a frequência empírica de cada propriedade

    Returns:
        SampleSet com min(n, len(pool)) amostras
    """
    n = min(int(n), len(pool))
    rng = np.random.default_rng(seed)
    if not stratify or n == 0:
        return pool.subset(np.sort(rng.choice(len(pool), size=n, replace=False)))
    empirical = PropertyProportion.from_ratio(*pool.property_counts())
    positions = draw_positions(pool.properties, np.arange(len(pool)), empirical.counts(n), rng)
    return pool.subset(np.sort(positions))


def balanced_by_property(pool: SampleSet, n: Optional[int], seed: int) -> SampleSet:
    """
    Subconjunto balanceado entre os valores de propriedade (±1 por classe).

    Se alguma classe não tiver amostras suficientes, trunca pelo tamanho da
    menor classe.
    """
    available = pool.property_counts()
    target = len(pool) if n is None else int(n)
    feasible = int(available.min()) * pool.num_properties
    if target > feasible:
        log.warning(
            f"Balanceamento truncado: pedido {target}, menor classe permite {feasible}"
        )
        target = feasible
    counts = PropertyProportion.uniform(pool.num_properties).counts(target)
    rng = np.random.default_rng(seed)
    return pool.subset(draw_positions(pool.properties, np.arange(len(pool)), counts, rng))
