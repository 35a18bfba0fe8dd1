"""
Métricas dos ataques: acurácia, F1, AUC e TPR a FPR baixo.

- AUC pela estatística de postos (Mann-Whitney) com empates pela média.
- TPR@FPR pela varredura de limiares: limiares nos pontos médios entre
  scores distintos ordenados, mais -inf/+inf. Um score acima do limiar é
  classificado como positivo.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional

import numpy as np
from scipy.stats import rankdata
from sklearn.metrics import accuracy_score, f1_score

from config import DEFAULT_FPR_TARGETS
from exceptions import DegenerateLabels, ShapeMismatch

log = logging.getLogger(__name__)


def fpr_key(target: float) -> str:
    """Nome da métrica de um alvo de FPR (ex: 0.001 -> 'tpr_at_fpr_0.001')."""
    return f"tpr_at_fpr_{target:g}"


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    f1: float
    auc: Optional[float]
    tpr_at_fpr: Dict[float, float] = field(default_factory=dict)
    n_eval: int = 0

    def to_dict(self) -> Dict[str, float]:
        """Dicionário plano no formato das linhas de comparação."""
        result = {"accuracy": self.accuracy, "f1": self.f1}
        if self.auc is not None:
            result["auc"] = self.auc
        for target, tpr in sorted(self.tpr_at_fpr.items()):
            result[fpr_key(target)] = tpr
        return result


def _binary_truth(ground_truth: np.ndarray, positive_class) -> np.ndarray:
    truth = np.asarray(ground_truth) == positive_class
    if truth.all() or not truth.any():
        raise DegenerateLabels("AUC/TPR exigem ao menos um positivo e um negativo no ground truth")
    return truth


def auc_score(scores: np.ndarray, ground_truth: np.ndarray, positive_class=1) -> float:
    """
    AUC pela estatística de postos (empates recebem o posto médio).

    Raises:
        DegenerateLabels: Uma das classes ausente
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = _binary_truth(ground_truth, positive_class)
    ranks = rankdata(scores, method="average")
    n_pos = int(truth.sum())
    n_neg = len(truth) - n_pos
    return float((ranks[truth].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_points(scores: np.ndarray, ground_truth: np.ndarray, positive_class=1) -> tuple:
    """
    (fpr, tpr) para cada limiar da varredura, em ordem crescente de FPR.

    O primeiro ponto corresponde ao limiar +inf (nenhum positivo previsto).
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = _binary_truth(ground_truth, positive_class)
    distinct = np.unique(scores)[::-1]
    pos_sorted = np.sort(scores[truth])
    neg_sorted = np.sort(scores[~truth])
    # positivos previstos no limiar logo abaixo de cada score distinto: score >= v
    tp = len(pos_sorted) - np.searchsorted(pos_sorted, distinct, side="left")
    fp = len(neg_sorted) - np.searchsorted(neg_sorted, distinct, side="left")
    tpr = np.concatenate([[0.0], tp / len(pos_sorted)])
    fpr = np.concatenate([[0.0], fp / len(neg_sorted)])
    return fpr, tpr


def tpr_at_fpr(scores: np.ndarray, ground_truth: np.ndarray, target: float, positive_class=1) -> float:
    """Maior TPR entre os limiares com FPR empírico <= target (0 se nenhum)."""
    fpr, tpr = roc_points(scores, ground_truth, positive_class)
    admissible = fpr <= target
    return float(tpr[admissible].max()) if admissible.any() else 0.0


def compute_metrics(
    scores: Optional[np.ndarray],
    predictions: np.ndarray,
    ground_truth: np.ndarray,
    fpr_targets: Iterable[float] = DEFAULT_FPR_TARGETS,
    positive_class=1,
    average: str = "binary",
) -> MetricReport:
    """
    Calcula o conjunto de métricas de um ataque.

    Args:
        scores: Score por amostra (maior = mais provável positivo); None pula AUC/TPR
        predictions: Rótulo previsto por amostra
        ground_truth: Rótulo verdadeiro por amostra
        fpr_targets: Alvos de FPR para o TPR@FPR
        positive_class: Classe positiva (membro = 1)
        average: "binary" (F1 da classe positiva) ou "macro" (AttrInf multiclasse)

    Returns:
        MetricReport

    Raises:
        ShapeMismatch: Tamanhos diferentes
        DegenerateLabels: AUC/TPR pedidos com uma só classe no ground truth
    """
    predictions = np.asarray(predictions)
    ground_truth = np.asarray(ground_truth)
    if len(predictions) != len(ground_truth) or (scores is not None and len(scores) != len(ground_truth)):
        raise ShapeMismatch(
            f"Tamanhos diferentes: predictions={len(predictions)}, ground_truth={len(ground_truth)}"
            + ("" if scores is None else f", scores={len(scores)}")
        )

    accuracy = float(accuracy_score(ground_truth, predictions))
    if average == "binary":
        f1 = float(f1_score(ground_truth, predictions, pos_label=positive_class, average="binary", zero_division=0))
    else:
        f1 = float(f1_score(ground_truth, predictions, average=average, zero_division=0))

    auc, tprs = None, {}
    if scores is not None:
        auc = auc_score(scores, ground_truth, positive_class)
        tprs = {float(t): tpr_at_fpr(scores, ground_truth, t, positive_class) for t in fpr_targets}

    return MetricReport(accuracy=accuracy, f1=f1, auc=auc, tpr_at_fpr=tprs, n_eval=len(ground_truth))
