"""
Resultado comum a todos os ataques.
"""
import json
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import pandas as pd

from analysis.metrics import compute_metrics
from exceptions import ShapeMismatch
from transform.canonical import canonical_json


@dataclass(frozen=True, eq=False)
class AttackResult:
    """
    Scores, predições e ground truth por amostra, mais as métricas derivadas.

    `details` guarda metadados do ataque (cenário, hashes de config,
    proporção prevista...) e vai junto no JSON exportado.
    """
    scores: np.ndarray
    predictions: np.ndarray
    ground_truth: np.ndarray
    metrics: Dict[str, float]
    sample_ids: Optional[np.ndarray] = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.ground_truth)
        if len(self.scores) != n or len(self.predictions) != n:
            raise ShapeMismatch(
                f"AttackResult com tamanhos diferentes: scores={len(self.scores)}, "
                f"predictions={len(self.predictions)}, ground_truth={n}"
            )
        if self.sample_ids is not None and len(self.sample_ids) != n:
            raise ShapeMismatch("sample_ids com tamanho diferente do ground_truth")

    def __len__(self) -> int:
        return len(self.ground_truth)

    @classmethod
    def from_scores(
        cls,
        scores: np.ndarray,
        predictions: np.ndarray,
        ground_truth: np.ndarray,
        sample_ids: Optional[np.ndarray] = None,
        average: str = "binary",
        ranked: bool = True,
        **details,
    ) -> "AttackResult":
        """Monta o resultado calculando as métricas a partir dos scores."""
        report = compute_metrics(
            scores if ranked else None, predictions, ground_truth, average=average
        )
        return cls(
            scores=np.asarray(scores, dtype=np.float64),
            predictions=np.asarray(predictions),
            ground_truth=np.asarray(ground_truth),
            metrics=report.to_dict(),
            sample_ids=None if sample_ids is None else np.asarray(sample_ids),
            details=details,
        )

    def to_frame(self) -> pd.DataFrame:
        """Uma linha por amostra (exportação CSV)."""
        frame = pd.DataFrame({
            "score": self.scores,
            "prediction": self.predictions,
            "ground_truth": self.ground_truth,
        })
        if self.sample_ids is not None:
            frame.insert(0, "sample_id", self.sample_ids)
        return frame

    def to_dict(self) -> dict:
        return {
            "metrics": dict(sorted(self.metrics.items())),
            "details": self.details,
            "n_eval": len(self),
        }

    def to_json(self) -> str:
        return json.dumps(json.loads(canonical_json(self.to_dict())), indent=2, sort_keys=True)
