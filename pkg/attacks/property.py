"""
Inferência de propriedade (PropInf) com meta-classificador sobre a frota.

Ordem das features de um modelo: conjuntos de consulta ordenados pela
proporção, depois amostras na ordem do conjunto, depois classes. O vetor
tem sum(|D_aux^Q|) * K posições.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import train_test_split
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from exceptions import MissingAuxiliary, MissingFleet
from attacks.results import AttackResult
from models.training import TrainedModel
from transform.samples import PropertyProportion, SampleSet

log = logging.getLogger(__name__)

HELDOUT_FRACTION = 0.3

FeatureFn = Callable[[TrainedModel], np.ndarray]


def ordered_query_sets(query_aux: Dict[PropertyProportion, SampleSet]) -> List[SampleSet]:
    return [query_aux[p] for p in sorted(query_aux)]


def posterior_features(model: TrainedModel, query_aux: Dict[PropertyProportion, SampleSet]) -> np.ndarray:
    """Concatenação dos posteriors do modelo em todos os conjuntos de consulta."""
    return np.concatenate([
        model.posteriors(query.features).ravel() for query in ordered_query_sets(query_aux)
    ])


@dataclass(frozen=True, eq=False)
class PropInfResult:
    """
    Proporção prevista para o alvo e a confiança do meta-classificador.

    `heldout` mede o meta-classificador em uma fração estratificada da frota.
    """
    predicted_proportion: PropertyProportion
    confidence: float
    class_posteriors: Dict[str, float]
    heldout: AttackResult
    labels: List[PropertyProportion] = field(default_factory=list)
    feature_length: int = 0

    @property
    def metrics(self) -> Dict[str, float]:
        return self.heldout.metrics

    def to_dict(self) -> dict:
        return {
            "predicted_proportion": self.predicted_proportion.key(),
            "confidence": self.confidence,
            "class_posteriors": dict(sorted(self.class_posteriors.items())),
            "labels": [p.key() for p in self.labels],
            "feature_length": self.feature_length,
            "heldout": self.heldout.to_dict(),
        }


def _meta_classifier(seed: int):
    return make_pipeline(StandardScaler(), LogisticRegression(max_iter=2000, random_state=seed))


def _heldout_result(features: np.ndarray, targets: np.ndarray, n_labels: int, seed: int, fraction: float) -> AttackResult:
    counts = np.bincount(targets, minlength=n_labels)
    if counts.min() >= 2 and int(round(fraction * len(targets))) >= n_labels:
        train_idx, test_idx = train_test_split(
            np.arange(len(targets)), test_size=fraction, stratify=targets, random_state=seed
        )
    else:
        log.warning("Frota pequena demais para separar held-out; avaliando por ressubstituição")
        train_idx = test_idx = np.arange(len(targets))

    classifier = _meta_classifier(seed).fit(features[train_idx], targets[train_idx])
    probabilities = classifier.predict_proba(features[test_idx])
    predictions = np.argmax(probabilities, axis=1)
    truth = targets[test_idx]
    binary = n_labels == 2 and len(np.unique(truth)) == 2
    return AttackResult.from_scores(
        probabilities[:, 1] if n_labels == 2 else probabilities.max(axis=1),
        predictions,
        truth,
        average="binary" if n_labels == 2 else "macro",
        ranked=binary,
        n_train=len(train_idx),
        n_heldout=len(test_idx),
    )


def propinf_attack(
    target: TrainedModel,
    fleets: List[tuple],
    query_aux: Dict[PropertyProportion, SampleSet],
    seed: int = 0,
    feature_fn: Optional[FeatureFn] = None,
    heldout_fraction: float = HELDOUT_FRACTION,
) -> PropInfResult:
    """
    Prevê a proporção de propriedade do treino do alvo.

    Args:
        target: Modelo alvo (caixa-preta)
        fleets: Saída de train_shadow_fleet: (modelo, rótulo de proporção)
        query_aux: Conjuntos de consulta D_aux^Q
        seed: Semente do meta-classificador e da separação held-out
        feature_fn: Vetor de features de um modelo (padrão: posterior_features)
        heldout_fraction: Fração da frota reservada para as métricas

    Returns:
        PropInfResult

    Raises:
        MissingFleet: Menos de dois rótulos de proporção distintos
        MissingAuxiliary: query_aux vazio
    """
    if not query_aux or all(len(q) == 0 for q in query_aux.values()):
        raise MissingAuxiliary("PropInf precisa de pelo menos um conjunto de consulta não vazio")
    labels = sorted({label for _, label in fleets})
    if len(labels) < 2:
        raise MissingFleet(f"PropInf precisa de >= 2 rótulos de proporção na frota, recebido {len(labels)}")
    feature_fn = feature_fn or (lambda model: posterior_features(model, query_aux))

    index_of = {label: i for i, label in enumerate(labels)}
    features = np.stack([feature_fn(model) for model, _ in fleets])
    targets = np.array([index_of[label] for _, label in fleets], dtype=np.int64)

    heldout = _heldout_result(features, targets, len(labels), seed, heldout_fraction)
    classifier = _meta_classifier(seed).fit(features, targets)
    probabilities = classifier.predict_proba(feature_fn(target)[None])[0]
    predicted = int(np.argmax(probabilities))

    result = PropInfResult(
        predicted_proportion=labels[predicted],
        confidence=float(probabilities[predicted]),
        class_posteriors={label.key(): float(p) for label, p in zip(labels, probabilities)},
        heldout=heldout,
        labels=labels,
        feature_length=int(features.shape[1]),
    )
    log.info(
        f"PropInf: proporção prevista {result.predicted_proportion} "
        f"(confiança {result.confidence:.3f}), held-out {heldout.metrics}"
    )
    return result
