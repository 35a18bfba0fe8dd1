"""
Nível de execução: ADV -> MemInf e ADV -> PropInf.

A distância L2 até o exemplo adversarial entra como feature extra. O
protocolo de rotulagem e os conjuntos de avaliação são os mesmos da origem
(mesmo MembershipSplits, mesma frota).
"""
import logging
from typing import Dict, List, Optional

import numpy as np

from analysis.diagnostics import ks_shift
from attacks.adversarial import AdvParams, adv_l2_profile
from attacks.lira import lira_meminf, train_lira_fleet_for
from attacks.membership import MemInfAttackConfig, classifier_meminf, meminf_result, prepare_membership
from attacks.property import ordered_query_sets, posterior_features, propinf_attack
from compositions.plans import CompositionOutcome, CompositionPlan
from models.fleet import LiraFleet
from models.training import TrainedModel
from taxonomy import MemInfSetting, get_setting
from transform.canonical import content_hash
from transform.partition import DatasetBundle
from transform.samples import PropertyProportion, SampleSet

log = logging.getLogger(__name__)


def adv_to_meminf(
    target: TrainedModel,
    bundle: DatasetBundle,
    setting,
    adv_params: AdvParams,
    attack_config: Optional[MemInfAttackConfig] = None,
    seed: int = 0,
    lira_fleet: Optional[LiraFleet] = None,
) -> CompositionOutcome:
    """
    MemInf com e sem a distância L2 adversarial, sobre os mesmos conjuntos.

    Square nos cenários caixa-preta e LiRA, PGD nos caixa-branca. No LiRA a
    distância vira a segunda dimensão da gaussiana conjunta.

    Raises:
        MissingAuxiliary: Propagado de prepare_membership
    """
    setting = get_setting(setting)
    plan = CompositionPlan.from_name("adv2meminf")
    splits = prepare_membership(target, bundle, setting, seed)

    if setting == MemInfSetting.LIRA_SHADOW:
        if lira_fleet is None:
            lira_fleet = train_lira_fleet_for(target, bundle, splits, seed)
        origin = lira_meminf(target, bundle, splits, seed, lira_fleet, None)
        composition = lira_meminf(target, bundle, splits, seed, lira_fleet, adv_params)
        return CompositionOutcome(plan, origin, composition, diagnostics={"setting": setting.value})

    origin_attack, _, origin_eval = classifier_meminf(target, splits, attack_config, None)
    attack, _, eval_records = classifier_meminf(target, splits, attack_config, adv_params)
    details = {"setting": setting.value, "attack_config": content_hash(attack.config.to_dict())}
    origin = meminf_result(origin_attack.score_records(origin_eval), splits,
                           feature_schema=content_hash(origin_attack.schema), **details)
    composition = meminf_result(attack.score_records(eval_records), splits,
                                feature_schema=content_hash(attack.schema), **details)

    distances = np.array([r.adv_l2 for r in eval_records])
    members = np.array([r.member == 1 for r in eval_records])
    shift = ks_shift(distances[members], distances[~members])
    log.info(
        f"ADV->MemInf {setting.value}: KS={shift.statistic:.3f} (rejeita={shift.reject}), "
        f"acurácia {origin.metrics['accuracy']:.3f} -> {composition.metrics['accuracy']:.3f}"
    )
    return CompositionOutcome(
        plan,
        origin,
        composition,
        diagnostics={
            "setting": setting.value,
            "ks_statistic": shift.statistic,
            "ks_reject": shift.reject,
            "mean_l2_members": float(distances[members].mean()),
            "mean_l2_nonmembers": float(distances[~members].mean()),
        },
        arrays={"eval_l2": distances, "eval_member": members},
    )


def l2_features(model: TrainedModel, query_aux: Dict[PropertyProportion, SampleSet], adv_params: AdvParams) -> np.ndarray:
    """Distâncias L2 do modelo em todas as amostras de consulta, na ordem das features do PropInf."""
    return np.concatenate([
        adv_l2_profile(model, query, adv_params.mode, adv_params) for query in ordered_query_sets(query_aux)
    ])


def adv_to_propinf(
    target: TrainedModel,
    fleets: List[tuple],
    query_aux: Dict[PropertyProportion, SampleSet],
    adv_params: AdvParams,
    seed: int = 0,
) -> CompositionOutcome:
    """
    PropInf com o vetor de distâncias L2 concatenado aos posteriors.

    O vetor de cada modelo cresce sum(|D_aux^Q|) posições.
    """
    plan = CompositionPlan.from_name("adv2propinf")
    origin = propinf_attack(target, fleets, query_aux, seed=seed)

    def widened(model: TrainedModel) -> np.ndarray:
        return np.concatenate([posterior_features(model, query_aux), l2_features(model, query_aux, adv_params)])

    composition = propinf_attack(target, fleets, query_aux, seed=seed, feature_fn=widened)
    log.info(
        f"ADV->PropInf: features {origin.feature_length} -> {composition.feature_length}, "
        f"confiança {composition.confidence:.3f}"
    )
    return CompositionOutcome(
        plan,
        origin,
        composition,
        diagnostics={
            "origin_feature_length": origin.feature_length,
            "composition_feature_length": composition.feature_length,
            "origin_prediction": origin.predicted_proportion.key(),
            "composition_prediction": composition.predicted_proportion.key(),
            "confidence": composition.confidence,
        },
    )
