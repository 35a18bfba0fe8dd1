"""
LiRA: teste de razão de verossimilhança por amostra.

Para cada amostra avaliada, ajusta uma gaussiana (multivariada quando há
features auxiliares) sobre as observações dos modelos que treinaram com ela
("in") e outra sobre os que não treinaram ("out"). O score é

    s(x) = -log N(x; in) + log N(x; out)

e valores negativos favorecem "membro". As métricas usam -s.
"""
import logging
from dataclasses import replace
from typing import Optional, Tuple

import numpy as np
from scipy.stats import multivariate_normal

from config import (
    LIRA_COV_REGULARIZATION,
    LIRA_DEFAULT_FLEET_SIZE,
    LIRA_LOGIT_CLAMP,
    LIRA_MIN_MODELS_PER_SIDE,
)
from exceptions import MissingFleet
from analysis.metrics import compute_metrics
from attacks.adversarial import AdvParams, adv_l2_profile
from attacks.results import AttackResult
from models.fleet import LiraFleet, train_lira_fleet
from models.training import TrainedModel
from taxonomy import MemInfSetting, adversarial_mode_for
from transform.canonical import derive_seed
from transform.partition import DatasetBundle
from transform.samples import SampleSet

log = logging.getLogger(__name__)


def lira_confidence(posteriors: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Logit da probabilidade da classe verdadeira, limitado a +-LIRA_LOGIT_CLAMP."""
    p = np.asarray(posteriors, dtype=np.float64)[np.arange(len(labels)), labels]
    with np.errstate(divide="ignore"):
        logit = np.log(p) - np.log1p(-p)
    return np.clip(np.nan_to_num(logit, nan=0.0), -LIRA_LOGIT_CLAMP, LIRA_LOGIT_CLAMP)


def fit_gaussian(observations: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Média e covariância das observações (linhas), com 1e-6*I somado à covariância.

    A regularização faz da covariância uma matriz sempre invertível, mesmo
    com frotas pequenas ou observações idênticas.
    """
    obs = np.asarray(observations, dtype=np.float64)
    if obs.ndim == 1:
        obs = obs[:, None]
    mean = obs.mean(axis=0)
    cov = np.atleast_2d(np.cov(obs, rowvar=False, ddof=1)) if len(obs) > 1 else np.zeros((obs.shape[1],) * 2)
    return mean, cov + LIRA_COV_REGULARIZATION * np.eye(obs.shape[1])


def gaussian_log_ratio(x, mean_in, cov_in, mean_out, cov_out) -> float:
    """-log N(x; in) + log N(x; out)."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    log_in = multivariate_normal.logpdf(x, mean=np.atleast_1d(mean_in), cov=np.atleast_2d(cov_in))
    log_out = multivariate_normal.logpdf(x, mean=np.atleast_1d(mean_out), cov=np.atleast_2d(cov_out))
    return float(-log_in + log_out)


def lira_result(raw_scores: np.ndarray, membership: np.ndarray, sample_ids=None, **details) -> AttackResult:
    """AttackResult com os scores crus; predição de membro quando s < 0."""
    raw_scores = np.asarray(raw_scores, dtype=np.float64)
    predictions = (raw_scores < 0).astype(int)
    report = compute_metrics(-raw_scores, predictions, membership)
    return AttackResult(
        scores=raw_scores,
        predictions=predictions,
        ground_truth=np.asarray(membership),
        metrics=report.to_dict(),
        sample_ids=None if sample_ids is None else np.asarray(sample_ids),
        details=details,
    )


def lira_attack(
    target: TrainedModel,
    fleet: LiraFleet,
    eval_samples: SampleSet,
    membership: np.ndarray,
    aux_scores: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> AttackResult:
    """
    Scores LiRA para as amostras avaliadas.

    Args:
        target: Modelo alvo
        fleet: Frota online cujo pool contém todas as amostras avaliadas
        eval_samples: Amostras avaliadas
        membership: Ground truth de pertinência ao treino do alvo
        aux_scores: (aux do alvo com shape (n,) ou (n, d), aux da frota com
            shape (M, n) ou (M, n, d)), concatenados à confiança

    Returns:
        AttackResult com os scores crus s(x)

    Raises:
        MissingFleet: Amostra fora do pool ou com menos de 2 modelos in/out
    """
    position_of = {int(i): p for p, i in enumerate(fleet.pool.ids)}
    missing = [int(i) for i in eval_samples.ids if int(i) not in position_of]
    if missing:
        raise MissingFleet(f"{len(missing)} amostras avaliadas fora do pool da frota LiRA")
    positions = np.array([position_of[int(i)] for i in eval_samples.ids], dtype=np.int64)

    labels = eval_samples.task_labels
    fleet_obs = np.stack([
        lira_confidence(m.posteriors(eval_samples.features), labels) for m in fleet.models
    ])[..., None]
    target_obs = lira_confidence(target.posteriors(eval_samples.features), labels)[:, None]
    if aux_scores is not None:
        target_aux, fleet_aux = (np.asarray(a, dtype=np.float64) for a in aux_scores)
        target_aux = target_aux.reshape(len(eval_samples), -1)
        fleet_aux = fleet_aux.reshape(len(fleet.models), len(eval_samples), -1)
        target_obs = np.concatenate([target_obs, target_aux], axis=1)
        fleet_obs = np.concatenate([fleet_obs, fleet_aux], axis=2)

    scores = np.zeros(len(eval_samples))
    for i, position in enumerate(positions):
        inside = fleet.inclusion[:, position]
        if inside.sum() < LIRA_MIN_MODELS_PER_SIDE or (~inside).sum() < LIRA_MIN_MODELS_PER_SIDE:
            raise MissingFleet(
                f"Amostra {int(eval_samples.ids[i])}: {int(inside.sum())} modelos in e "
                f"{int((~inside).sum())} out, mínimo {LIRA_MIN_MODELS_PER_SIDE} de cada"
            )
        mean_in, cov_in = fit_gaussian(fleet_obs[inside, i])
        mean_out, cov_out = fit_gaussian(fleet_obs[~inside, i])
        scores[i] = gaussian_log_ratio(target_obs[i], mean_in, cov_in, mean_out, cov_out)

    return lira_result(
        scores,
        membership,
        eval_samples.ids,
        setting=MemInfSetting.LIRA_SHADOW.value,
        n_models=len(fleet.models),
        observation_dim=int(target_obs.shape[1]),
    )


def train_lira_fleet_for(
    target: TrainedModel,
    bundle: DatasetBundle,
    splits,
    seed: int = 0,
    n_models: int = LIRA_DEFAULT_FLEET_SIZE,
    workers: int = 1,
) -> LiraFleet:
    """Frota online sobre shadow_train + candidatos avaliados, com a configuração do alvo sem DP."""
    pool = SampleSet.concat(bundle.shadow_train, splits.eval_samples())
    return train_lira_fleet(replace(target.config, dp=None), pool, n_models, derive_seed(seed, "lira"), workers)


def lira_meminf(
    target: TrainedModel,
    bundle: DatasetBundle,
    splits,
    seed: int = 0,
    fleet: Optional[LiraFleet] = None,
    adv_params: Optional[AdvParams] = None,
    n_models: int = LIRA_DEFAULT_FLEET_SIZE,
) -> AttackResult:
    """
    Cenário lira_ds: frota online sobre shadow_train + candidatos avaliados.

    Com `adv_params`, a distância L2 adversarial entra como segunda
    dimensão da gaussiana conjunta.
    """
    candidates = splits.eval_samples()
    if fleet is None:
        fleet = train_lira_fleet_for(target, bundle, splits, seed, n_models)

    aux = None
    if adv_params is not None:
        mode = adversarial_mode_for(MemInfSetting.LIRA_SHADOW)
        target_l2 = adv_l2_profile(target, candidates, mode, adv_params)
        fleet_l2 = np.stack([adv_l2_profile(m, candidates, mode, adv_params) for m in fleet.models])
        aux = (target_l2, fleet_l2)

    result = lira_attack(target, fleet, candidates, splits.eval_truth(), aux)
    result.details.update(splits=splits.manifest(), adv_augment=adv_params is not None)
    log.info(f"LiRA (adv={adv_params is not None}): {result.metrics}")
    return result
