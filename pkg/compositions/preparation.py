"""
Nível de preparação: PropInf -> AttrInf.

A proporção inferida pelo PropInf reamostra o dado auxiliar do AttrInf. A
arquitetura e os hiperparâmetros do AttrInf não mudam (mesmo AttrInfConfig,
mesmo hash); só o auxiliar muda.

Regra de reamostragem, com p a proporção inferida e c a confiança:
    w_v = c * (1 - p_v) + (1 - c) / P, normalizado.
No modo teórico c = 1.
"""
import logging
from typing import Optional

import numpy as np

from exceptions import InvalidPlan, MissingPropInf
from attacks.attribute import AttrInfConfig, attrinf_attack
from attacks.property import PropInfResult
from compositions.plans import CompositionOutcome, CompositionPlan
from models.training import TrainedModel
from transform.samples import PropertyProportion, SampleSet
from transform.sampling import max_feasible_size, sample_with_proportion

log = logging.getLogger(__name__)


def sampling_ratio(confidence: float, proportion: float) -> float:
    """Razão de amostragem c * (1 - p) de um valor de propriedade."""
    return confidence * (1.0 - proportion)


def rebalance_weights(inferred: PropertyProportion, confidence: float, mode: str) -> PropertyProportion:
    """
    Pesos de reamostragem do auxiliar a partir da proporção inferida.

    Args:
        inferred: Proporção prevista pelo PropInf
        confidence: Posterior do meta-classificador para a proporção prevista
        mode: "empirical" (usa a confiança) ou "theoretical" (c = 1)

    Returns:
        PropertyProportion normalizada
    """
    if mode not in ("empirical", "theoretical"):
        raise InvalidPlan(f"Modo de reamostragem inválido: {mode}")
    c = 1.0 if mode == "theoretical" else float(confidence)
    p = np.asarray(inferred.weights)
    raw = [sampling_ratio(c, pv) + (1.0 - c) / len(p) for pv in p]
    if sum(raw) <= 0:
        return PropertyProportion.uniform(len(p))
    return PropertyProportion.from_ratio(*raw)


def resample_aux(pool: SampleSet, weights: PropertyProportion, seed: int) -> SampleSet:
    """
    Maior subconjunto do pool com a proporção pedida.

    Se o pool já realiza essa proporção a menos do arredondamento (diferença
    de no máximo uma amostra por valor), é devolvido sem alteração.
    """
    requested = weights.counts(len(pool))
    if np.all(np.abs(requested - pool.property_counts()) <= 1):
        return pool
    n = max_feasible_size(pool, weights)
    log.info(f"Reamostrando auxiliar: {len(pool)} -> {n} amostras com proporção {weights}")
    return sample_with_proportion(pool, weights, n, seed)


def propinf_to_attrinf(
    target: TrainedModel,
    propinf_out: Optional[PropInfResult],
    aux_pool: SampleSet,
    mode: str,
    eval: SampleSet,
    config: Optional[AttrInfConfig] = None,
    seed: int = 0,
) -> CompositionOutcome:
    """
    AttrInf com o auxiliar reamostrado pela proporção inferida.

    Args:
        target: Modelo alvo (caixa-branca)
        propinf_out: Saída do PropInf
        aux_pool: Auxiliar com atributo e propriedade
        mode: "empirical" ou "theoretical"
        eval: Amostras avaliadas
        config: Hiperparâmetros do AttrInf (os mesmos na origem e na composição)
        seed: Semente da reamostragem

    Returns:
        CompositionOutcome (origem = AttrInf sobre aux_pool)

    Raises:
        MissingPropInf: Sem saída do PropInf
        InsufficientSamples: Propagado da reamostragem
    """
    if propinf_out is None:
        raise MissingPropInf("propinf_to_attrinf precisa da saída do PropInf")
    plan = CompositionPlan.from_name("propinf2attrinf", mode)
    config = config or AttrInfConfig(seed=seed)

    weights = rebalance_weights(propinf_out.predicted_proportion, propinf_out.confidence, mode)
    resampled = resample_aux(aux_pool, weights, seed)

    origin = attrinf_attack(target, aux_pool, eval, config)
    composition = attrinf_attack(target, resampled, eval, config)
    return CompositionOutcome(
        plan=plan,
        origin=origin,
        composition=composition,
        diagnostics={
            "inferred_proportion": propinf_out.predicted_proportion.key(),
            "confidence": propinf_out.confidence,
            "sampling_weights": list(weights.weights),
            "aux_size": len(aux_pool),
            "resampled_size": len(resampled),
            "attrinf_config": config.config_hash(),
        },
    )
