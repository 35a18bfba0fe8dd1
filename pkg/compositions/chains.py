"""
Cadeias ADV -> PropInf -> AttrInf e ADV -> PropInf -> MemInf.

A predição e a confiança de ADV -> PropInf alimentam a composição seguinte.
A cadeia de AttrInf roda apenas no modo empírico.
"""
import logging
from typing import Dict, List, Optional

from attacks.adversarial import AdvParams
from attacks.attribute import AttrInfConfig
from attacks.membership import MemInfAttackConfig
from compositions.evaluation import propinf_to_meminf
from compositions.execution import adv_to_propinf
from compositions.plans import CompositionOutcome, CompositionPlan
from compositions.preparation import propinf_to_attrinf
from models.fleet import LiraFleet
from models.training import TrainedModel
from transform.partition import DatasetBundle
from transform.samples import PropertyProportion, SampleSet

log = logging.getLogger(__name__)


def _chain_outcome(name: str, support: CompositionOutcome, step: CompositionOutcome) -> CompositionOutcome:
    propinf = support.composition
    log.info(
        f"Cadeia {name}: PropInf previu {propinf.predicted_proportion} "
        f"com confiança {propinf.confidence:.4f}"
    )
    return CompositionOutcome(
        CompositionPlan.from_name(name),
        step.origin,
        step.composition,
        diagnostics={
            **step.diagnostics,
            "propinf_prediction": propinf.predicted_proportion.key(),
            "propinf_confidence": propinf.confidence,
            "propinf_metrics": dict(sorted(propinf.metrics.items())),
        },
        arrays=step.arrays,
    )


def chain_adv_propinf_attrinf(
    target: TrainedModel,
    fleets: List[tuple],
    query_aux: Dict[PropertyProportion, SampleSet],
    adv_params: AdvParams,
    aux_pool: SampleSet,
    eval: SampleSet,
    config: Optional[AttrInfConfig] = None,
    seed: int = 0,
) -> CompositionOutcome:
    """ADV -> PropInf seguido de PropInf -> AttrInf (modo empírico)."""
    support = adv_to_propinf(target, fleets, query_aux, adv_params, seed)
    step = propinf_to_attrinf(target, support.composition, aux_pool, "empirical", eval, config, seed)
    return _chain_outcome("adv2propinf2attrinf", support, step)


def chain_adv_propinf_meminf(
    target: TrainedModel,
    bundle: DatasetBundle,
    setting,
    fleets: List[tuple],
    query_aux: Dict[PropertyProportion, SampleSet],
    adv_params: AdvParams,
    attack_config: Optional[MemInfAttackConfig] = None,
    seed: int = 0,
    lira_fleet: Optional[LiraFleet] = None,
) -> CompositionOutcome:
    """ADV -> PropInf seguido de PropInf -> MemInf."""
    support = adv_to_propinf(target, fleets, query_aux, adv_params, seed)
    step = propinf_to_meminf(target, bundle, setting, support.composition, attack_config, seed, lira_fleet)
    return _chain_outcome("adv2propinf2meminf", support, step)
