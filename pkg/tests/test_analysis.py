"""
Testes das métricas, do teste KS e da tabela de comparação.
"""
import json
from itertools import product

import numpy as np
import pandas as pd
import pytest

from analysis.diagnostics import ks_shift, plot_roc, plot_score_histogram
from analysis.metrics import auc_score, compute_metrics, fpr_key, tpr_at_fpr
from analysis.reports import COLUMNS, comparison_table, write_csv, write_json
from exceptions import DegenerateLabels, SchemaMismatch


def _brute_tpr_at_fpr(scores, truth, target):
    """Varre todos os limiares possíveis (inclusive +inf)."""
    best = 0.0
    for threshold in list(np.unique(scores)) + [np.inf]:
        predicted = scores >= threshold
        fpr = predicted[truth == 0].mean()
        if fpr <= target:
            best = max(best, predicted[truth == 1].mean())
    return best


def _brute_auc(scores, truth):
    pos, neg = scores[truth == 1], scores[truth == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in product(pos, neg))
    return wins / (len(pos) * len(neg))


def test_perfect_separation():
    scores = np.array([0.9, 0.8, 0.2, 0.1])
    truth = np.array([1, 1, 0, 0])
    report = compute_metrics(scores, (scores >= 0.5).astype(int), truth)
    assert report.auc == 1.0
    assert report.tpr_at_fpr[0.001] == 1.0
    assert report.accuracy == 1.0
    assert report.to_dict()[fpr_key(0.001)] == 1.0


def test_tied_scores_give_half_auc():
    assert auc_score(np.full(6, 0.3), np.array([1, 0, 1, 0, 1, 0])) == pytest.approx(0.5)


def test_against_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(20):
        truth = rng.integers(0, 2, size=12)
        truth[:2] = [0, 1]
        scores = np.round(rng.random(12), 1)
        assert auc_score(scores, truth) == pytest.approx(_brute_auc(scores, truth))
        for target in (0.001, 0.1, 0.5):
            assert tpr_at_fpr(scores, truth, target) == pytest.approx(_brute_tpr_at_fpr(scores, truth, target))


def test_tpr_with_few_negatives():
    scores = np.array([0.9, 0.7, 0.6, 0.8, 0.5, 0.4, 0.3])
    truth = np.array([1, 1, 1, 0, 0, 0, 0])
    # qualquer falso positivo já dá FPR 0.25
    assert tpr_at_fpr(scores, truth, 0.001) == pytest.approx(1 / 3)


def test_invariant_under_increasing_transform():
    rng = np.random.default_rng(1)
    scores = rng.random(50)
    truth = rng.integers(0, 2, size=50)
    predictions = (scores >= 0.5).astype(int)
    a = compute_metrics(scores, predictions, truth, fpr_targets=(0.001, 0.1))
    b = compute_metrics(2 * scores + 1, predictions, truth, fpr_targets=(0.001, 0.1))
    assert a.auc == pytest.approx(b.auc)
    assert a.tpr_at_fpr == pytest.approx(b.tpr_at_fpr)


def test_single_class_truth():
    with pytest.raises(DegenerateLabels):
        auc_score(np.array([0.1, 0.2]), np.array([1, 1]))


def test_ks_identical_and_disjoint():
    same = ks_shift(np.arange(10.0), np.arange(10.0))
    assert same.statistic == 0.0
    assert not same.reject

    disjoint = ks_shift(np.arange(10.0), np.arange(10.0) + 100)
    assert disjoint.statistic == 1.0
    assert disjoint.reject


def test_ks_shifted_normals():
    rng = np.random.default_rng(42)
    result = ks_shift(rng.normal(0, 1, 200), rng.normal(3, 1, 200))
    assert result.reject


def _manifest(setting, seed, origin, composition, version="1"):
    return {
        "schema_version": version,
        "setting": setting,
        "model": "mlp",
        "dataset": "synthetic",
        "seed": seed,
        "origin": {"accuracy": origin},
        "composition": {"accuracy": composition},
    }


def test_comparison_delta():
    table = comparison_table([_manifest("adv2meminf_mb_ds", 0, 0.6, 0.7)])
    assert len(table) == 1
    assert table.loc[0, "delta"] == pytest.approx(0.1)


def test_empty_comparison(tmp_path):
    table = comparison_table([])
    assert table.empty
    assert list(table.columns) == COLUMNS
    path = write_csv(table, tmp_path / "comparison.csv")
    assert path.read_text().strip() == ",".join(COLUMNS)


def test_comparison_sorted_by_setting_and_seed():
    table = comparison_table([
        _manifest("b", 1, 0.5, 0.6),
        _manifest("a", 2, 0.5, 0.6),
        _manifest("a", 1, 0.5, 0.6),
    ])
    assert list(zip(table["setting"], table["seed"])) == [("a", 1), ("a", 2), ("b", 1)]


def test_two_manifests_same_key():
    table = comparison_table([_manifest("a", 0, 0.5, 0.6), _manifest("a", 0, 0.5, 0.7)])
    assert len(table) == 2
    assert table["composition"].tolist() == [0.6, 0.7]


def test_schema_mismatch():
    with pytest.raises(SchemaMismatch):
        comparison_table([_manifest("a", 0, 0.5, 0.6), _manifest("a", 1, 0.5, 0.6, version="0")])


def test_stale_schema_rejected_even_when_uniform():
    with pytest.raises(SchemaMismatch, match="esperado"):
        comparison_table([_manifest("a", 0, 0.5, 0.6, version="0"), _manifest("a", 1, 0.5, 0.6, version="0")])


def test_json_export(tmp_path):
    table = comparison_table([_manifest("a", 0, 0.5, 0.75)])
    payload = json.loads(write_json(table, tmp_path / "comparison.json").read_text())
    assert payload["columns"] == COLUMNS
    assert payload["rows"][0]["delta"] == pytest.approx(0.25)
    assert pd.read_csv(write_csv(table, tmp_path / "comparison.csv"))["delta"].iloc[0] == pytest.approx(0.25)


def test_figures_are_written(tmp_path):
    scores = np.array([0.9, 0.8, 0.2, 0.1])
    truth = np.array([1, 1, 0, 0])
    assert plot_roc(scores, truth, tmp_path / "roc.png", "ROC").exists()
    assert plot_score_histogram(scores, truth, tmp_path / "hist.png").exists()
