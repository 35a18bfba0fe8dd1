"""
Frotas de modelos sombra.

- Frota de PropInf: `fleet_size_per_label` modelos por rótulo de proporção,
  cada um treinado em um subconjunto reamostrado do pool.
- Frota de LiRA (online): cada modelo treina em metade do pool; cada
  amostra fica "in" em exatamente metade dos modelos.

Cada job é independente e recebe a semente derive_seed(seed, estágio, job),
então a ordem de execução entre workers não altera o resultado.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from exceptions import InsufficientSamples, InvalidSpec
from models.training import ModelConfig, TrainedModel, train_model
from transform.canonical import derive_seed
from transform.samples import PropertyProportion, SampleSet
from transform.sampling import max_feasible_size, sample_with_proportion, uniform_subset

log = logging.getLogger(__name__)

FleetMember = Tuple[TrainedModel, PropertyProportion]


def _run_jobs(fn, jobs: list, workers: int, desc: str) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in tqdm(jobs, desc=desc, leave=False)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(tqdm(pool.map(fn, jobs), total=len(jobs), desc=desc, leave=False))


def _train_fleet_member(job: tuple) -> FleetMember:
    config, pool, proportion, n, job_seed = job
    train = sample_with_proportion(pool, proportion, n, job_seed)
    remainder = pool.subset(np.flatnonzero(~np.isin(pool.ids, train.ids)))
    test = uniform_subset(remainder, n, derive_seed(job_seed, "fleet_test"))
    model = train_model(replace(config, seed=job_seed), train, test)
    return model, proportion


def default_samples_per_model(pool: SampleSet, proportion_labels: List[PropertyProportion]) -> int:
    """Metade do maior tamanho viável para a proporção mais restritiva."""
    return min(max_feasible_size(pool, p) for p in proportion_labels) // 2


def train_shadow_fleet(
    config: ModelConfig,
    pool: SampleSet,
    proportion_labels: List[PropertyProportion],
    fleet_size_per_label: int,
    seed: int,
    samples_per_model: Optional[int] = None,
    workers: int = 1,
) -> List[FleetMember]:
    """
    Treina a frota de sombras para PropInf.

    Args:
        config: Configuração base (a semente é substituída por job)
        pool: Dado auxiliar de onde cada treino é reamostrado
        proportion_labels: Rótulos de proporção da frota
        fleet_size_per_label: Modelos por rótulo
        seed: Semente da frota
        samples_per_model: Tamanho do treino de cada sombra (padrão: ver default_samples_per_model)
        workers: Processos paralelos

    Returns:
        Lista de (modelo, rótulo), na ordem rótulo x réplica

    Raises:
        InsufficientSamples: O pool não comporta a proporção pedida
        DivergedTraining: Propagado do treino
    """
    if fleet_size_per_label < 1:
        raise InvalidSpec(f"fleet_size_per_label deve ser >= 1, recebido {fleet_size_per_label}")
    if not proportion_labels:
        raise InvalidSpec("Frota sem rótulos de proporção")
    n = samples_per_model or default_samples_per_model(pool, proportion_labels)
    if n < 1:
        raise InsufficientSamples(f"Pool de {len(pool)} amostras não comporta os rótulos da frota")

    jobs = []
    for label in proportion_labels:
        for _ in range(fleet_size_per_label):
            jobs.append((config, pool, label, n, derive_seed(seed, "fleet", len(jobs))))

    log.info(
        f"Treinando frota: {len(proportion_labels)} rótulos x {fleet_size_per_label} modelos, "
        f"{n} amostras por modelo, {workers} worker(s)"
    )
    return _run_jobs(_train_fleet_member, jobs, workers, "frota")


@dataclass(frozen=True, eq=False)
class LiraFleet:
    """
    Frota online de LiRA.

    `inclusion[m, i]` é True se a amostra i do pool estava no treino do modelo m.
    """
    models: List[TrainedModel]
    pool: SampleSet
    inclusion: np.ndarray

    def in_models(self, position: int) -> List[int]:
        return np.flatnonzero(self.inclusion[:, position]).tolist()

    def out_models(self, position: int) -> List[int]:
        return np.flatnonzero(~self.inclusion[:, position]).tolist()


def balanced_inclusion(n_models: int, n_samples: int, seed: int) -> np.ndarray:
    """Matriz (modelos x amostras) em que cada coluna tem exatamente n_models/2 entradas True."""
    rng = np.random.default_rng(seed)
    half = n_models // 2
    inclusion = np.zeros((n_models, n_samples), dtype=bool)
    for i in range(n_samples):
        inclusion[rng.permutation(n_models)[:half], i] = True
    return inclusion


def _train_lira_member(job: tuple) -> TrainedModel:
    config, pool, mask, job_seed = job
    train = pool.subset(np.flatnonzero(mask))
    test = pool.subset(np.flatnonzero(~mask))
    return train_model(replace(config, seed=job_seed), train, test)


def train_lira_fleet(
    config: ModelConfig,
    pool: SampleSet,
    n_models: int,
    seed: int,
    workers: int = 1,
) -> LiraFleet:
    """
    Treina a frota online de LiRA sobre `pool`.

    Raises:
        InvalidSpec: n_models ímpar ou menor que 4 (cada amostra precisa de
            pelo menos 2 modelos in e 2 out)
    """
    if n_models < 4 or n_models % 2:
        raise InvalidSpec(f"n_models deve ser par e >= 4, recebido {n_models}")
    inclusion = balanced_inclusion(n_models, len(pool), derive_seed(seed, "lira_inclusion"))
    jobs = [
        (config, pool, inclusion[m], derive_seed(seed, "lira_fleet", m))
        for m in range(n_models)
    ]
    log.info(f"Treinando frota LiRA: {n_models} modelos sobre {len(pool)} amostras")
    models = _run_jobs(_train_lira_member, jobs, workers, "frota LiRA")
    inclusion.setflags(write=False)
    return LiraFleet(models=models, pool=pool, inclusion=inclusion)
