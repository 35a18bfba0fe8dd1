"""
Diagnósticos de distribuição: teste KS e imagens de ROC / histograma de scores.
"""
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy.stats import ks_2samp  # noqa: E402

from config import KS_ALPHA  # noqa: E402
from analysis.metrics import roc_points  # noqa: E402
from exceptions import InvalidSpec  # noqa: E402

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KSResult:
    statistic: float
    critical_value: float
    reject: bool
    p_value: float
    alpha: float

    def to_dict(self) -> dict:
        return asdict(self)


def ks_critical_value(n: int, m: int, alpha: float = KS_ALPHA) -> float:
    """Valor crítico assintótico c(alpha) * sqrt((n + m) / (n * m))."""
    c_alpha = math.sqrt(-math.log(alpha / 2.0) / 2.0)
    return c_alpha * math.sqrt((n + m) / (n * m))


def ks_shift(dist_a: np.ndarray, dist_b: np.ndarray, alpha: float = KS_ALPHA) -> KSResult:
    """
    Teste KS de duas amostras com decisão pelo valor crítico assintótico.

    Args:
        dist_a: Primeira amostra (ex: distâncias L2 dos membros)
        dist_b: Segunda amostra (ex: distâncias L2 dos não-membros)
        alpha: Nível de significância

    Returns:
        KSResult; reject=True quando a estatística passa do valor crítico
    """
    dist_a = np.asarray(dist_a, dtype=np.float64)
    dist_b = np.asarray(dist_b, dtype=np.float64)
    if len(dist_a) == 0 or len(dist_b) == 0:
        raise InvalidSpec("ks_shift exige duas amostras não vazias")
    test = ks_2samp(dist_a, dist_b)
    critical = ks_critical_value(len(dist_a), len(dist_b), alpha)
    statistic = float(test.statistic)
    return KSResult(
        statistic=statistic,
        critical_value=critical,
        reject=statistic > critical,
        p_value=float(test.pvalue),
        alpha=alpha,
    )


def plot_roc(scores: np.ndarray, ground_truth: np.ndarray, path: Path, title: str = "") -> Path:
    """Curva ROC com eixo de FPR em escala log (região de FPR baixo)."""
    fpr, tpr = roc_points(scores, ground_truth)
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.plot(fpr, tpr, drawstyle="steps-post")
    ax.plot([1e-4, 1], [1e-4, 1], linestyle="--", color="gray", linewidth=0.8)
    ax.set_xscale("log")
    ax.set_xlim(1e-4, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel("FPR")
    ax.set_ylabel("TPR")
    ax.set_title(title)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_score_histogram(scores: np.ndarray, ground_truth: np.ndarray, path: Path, title: str = "") -> Path:
    """Histogramas sobrepostos dos scores de membros e não-membros."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(ground_truth) == 1
    bins = np.histogram_bin_edges(scores, bins=30)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(scores[truth], bins=bins, alpha=0.6, label="membros")
    ax.hist(scores[~truth], bins=bins, alpha=0.6, label="não-membros")
    ax.set_xlabel("score")
    ax.set_ylabel("amostras")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
