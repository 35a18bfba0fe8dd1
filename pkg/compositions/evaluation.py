"""
Nível de avaliação: PropInf -> MemInf.

O score calibrado de cada amostra é

    score(x) = origem(x) + lambda(posteriors(x)) * (P(propriedade(x)) - 0.5)

com P a proporção inferida pelo PropInf e lambda a saída de um codificador
denso de 4 camadas, treinado junto com a rede de ataque de origem. No LiRA o
ajuste é multiplicativo: s_i * P(propriedade_i).
"""
import logging
from typing import Optional

import numpy as np
import torch
from torch import nn

from config import CALIBRATION_HIDDEN, CALIBRATION_SCORE_CLAMP
from exceptions import MissingPropInf, ShapeMismatch
from attacks.lira import lira_meminf, lira_result, train_lira_fleet_for
from attacks.membership import (
    MemInfAttackConfig,
    MemInfAttackModel,
    MembershipAttackNet,
    build_meminf_features,
    dense_stack,
    feature_schema,
    fit_binary,
    fit_scalers,
    member_labels,
    meminf_result,
    prepare_membership,
    stack_records,
)
from attacks.property import PropInfResult
from compositions.plans import CompositionOutcome, CompositionPlan
from models.fleet import LiraFleet
from models.training import TrainedModel
from taxonomy import MemInfSetting, feature_setting_for, get_setting
from transform.canonical import content_hash
from transform.partition import DatasetBundle
from transform.samples import PropertyProportion, SampleSet

log = logging.getLogger(__name__)


class CalibrationHead(nn.Module):
    """Codificador posteriors -> lambda (4 camadas densas) e a proporção inferida."""

    def __init__(self, num_classes: int, inferred_proportion: PropertyProportion, hidden: int = CALIBRATION_HIDDEN):
        super().__init__()
        self.inferred_proportion = inferred_proportion
        self.encoder = dense_stack([num_classes, hidden, hidden, hidden, 1])

    def forward(self, posteriors: torch.Tensor) -> torch.Tensor:
        return self.encoder(posteriors).squeeze(1)

    def centered(self, properties: np.ndarray) -> np.ndarray:
        """P(propriedade) - 0.5 por amostra."""
        return np.asarray(self.inferred_proportion.weights, dtype=np.float64)[np.asarray(properties)] - 0.5

    def lam(self, posteriors: np.ndarray) -> np.ndarray:
        self.eval()
        with torch.no_grad():
            return self(torch.as_tensor(posteriors, dtype=torch.float32)).numpy().astype(np.float64)


def propinf_to_lira(scores: np.ndarray, property_of: np.ndarray, prior: PropertyProportion) -> np.ndarray:
    """
    Score LiRA ajustado pela proporção inferida: s_i * prior[propriedade_i].

    Raises:
        ShapeMismatch: Tamanhos diferentes
    """
    scores = np.asarray(scores, dtype=np.float64)
    property_of = np.asarray(property_of)
    if len(scores) != len(property_of):
        raise ShapeMismatch(f"{len(scores)} scores para {len(property_of)} propriedades")
    return scores * np.asarray(prior.weights, dtype=np.float64)[property_of]


def _lira_composition(target, bundle, splits, propinf_out, seed, lira_fleet) -> CompositionOutcome:
    if lira_fleet is None:
        lira_fleet = train_lira_fleet_for(target, bundle, splits, seed)
    origin = lira_meminf(target, bundle, splits, seed, lira_fleet, None)
    properties = splits.eval_samples().properties
    adjusted = propinf_to_lira(origin.scores, properties, propinf_out.predicted_proportion)
    composition = lira_result(adjusted, origin.ground_truth, origin.sample_ids, **origin.details)
    return CompositionOutcome(
        CompositionPlan.from_name("propinf2meminf"),
        origin,
        composition,
        diagnostics={"setting": MemInfSetting.LIRA_SHADOW.value,
                     "inferred_proportion": propinf_out.predicted_proportion.key()},
    )


def propinf_to_meminf(
    target: TrainedModel,
    bundle: DatasetBundle,
    setting,
    propinf_out: Optional[PropInfResult],
    attack_config: Optional[MemInfAttackConfig] = None,
    seed: int = 0,
    lira_fleet: Optional[LiraFleet] = None,
) -> CompositionOutcome:
    """
    MemInf com o score calibrado pela proporção inferida.

    A rede de ataque é construída antes do codificador, com a mesma semente
    da origem; os dois são otimizados juntos contra a BCE do score calibrado.
    O score de origem continua disponível (outcome.origin) e
    composição - origem = lambda * (P - 0.5) exatamente, por amostra.

    Atenção: outcome.origin é a rede de ataque treinada em conjunto com a
    cabeça de calibração, lida antes do termo lambda; não é o resultado de um
    meminf_attack isolado. Para comparar com o MemInf sozinho, use o artefato
    do estágio attack.

    Raises:
        MissingPropInf: Sem saída do PropInf
        MissingAuxiliary: Propagado de prepare_membership
    """
    if propinf_out is None:
        raise MissingPropInf("propinf_to_meminf precisa da saída do PropInf")
    setting = get_setting(setting)
    splits = prepare_membership(target, bundle, setting, seed)
    if setting == MemInfSetting.LIRA_SHADOW:
        return _lira_composition(target, bundle, splits, propinf_out, seed, lira_fleet)

    config = attack_config or MemInfAttackConfig()
    features = feature_setting_for(setting)
    train_records = build_meminf_features(splits.reference, splits.train_members, splits.train_nonmembers, features)
    eval_records = build_meminf_features(target, splits.eval_members, splits.eval_nonmembers, features)
    inputs = stack_records(train_records, features)
    labels = member_labels(train_records)

    torch.manual_seed(config.seed)
    schema = feature_schema(inputs)
    attack = MemInfAttackModel(
        network=MembershipAttackNet(schema), scalers=fit_scalers(inputs), setting=features, config=config, schema=schema
    )
    head = CalibrationHead(target.num_classes, propinf_out.predicted_proportion)

    train_samples = SampleSet.concat(splits.train_members, splits.train_nonmembers)
    tensors = attack.tensors(inputs)
    train_post = torch.as_tensor(splits.reference.posteriors(train_samples.features), dtype=torch.float32)
    train_centered = torch.as_tensor(head.centered(train_samples.properties), dtype=torch.float32)

    def calibrated(idx):
        origin = torch.sigmoid(attack.network({k: v[idx] for k, v in tensors.items()}))
        score = origin + head(train_post[idx]) * train_centered[idx]
        return score.clamp(CALIBRATION_SCORE_CLAMP, 1.0 - CALIBRATION_SCORE_CLAMP)

    attack.network.train()
    head.train()
    fit_binary(list(attack.network.parameters()) + list(head.parameters()), calibrated, labels, config)
    attack.network.eval()

    eval_samples = splits.eval_samples()
    origin_scores = attack.score_records(eval_records)
    lam = head.lam(target.posteriors(eval_samples.features))
    centered = head.centered(eval_samples.properties)
    calibrated_scores = origin_scores + lam * centered

    details = {
        "setting": setting.value,
        "feature_schema": content_hash(schema),
        "attack_config": content_hash(config.to_dict()),
    }
    origin = meminf_result(origin_scores, splits, **details)
    composition = meminf_result(calibrated_scores, splits, **details)
    log.info(
        f"PropInf->MemInf {setting.value}: P={propinf_out.predicted_proportion}, "
        f"lambda médio {lam.mean():.4f}, acurácia {origin.metrics['accuracy']:.3f} -> "
        f"{composition.metrics['accuracy']:.3f}"
    )
    return CompositionOutcome(
        CompositionPlan.from_name("propinf2meminf"),
        origin,
        composition,
        diagnostics={
            "setting": setting.value,
            "inferred_proportion": propinf_out.predicted_proportion.key(),
            "mean_lambda": float(lam.mean()),
            "mean_calibration_term": float(np.mean(lam * centered)),
        },
        arrays={"lambda": lam, "centered": centered},
    )
