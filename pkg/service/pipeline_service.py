"""
Pipeline de experimento: prepare -> train -> attack -> compose -> report.

Cada artefato é identificado por (estágio, chave) e pelo hash das suas
entradas, derivado só da configuração; assim um estágio pedido sozinho sabe
se o que está no disco ainda vale. Estágios pedidos computam (ou reaproveitam)
seus artefatos; estágios anteriores não pedidos apenas carregam do disco e
levantam MissingUpstream quando o artefato não existe.

Sementes: cada repetição usa seed + r, e cada estágio deriva a sua por
derive_seed(seed_da_repetição, estágio, índice).
"""
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from exceptions import ConfigError, MissingUpstream, StageError
from analysis.diagnostics import plot_roc, plot_score_histogram
from analysis.reports import comparison_table, write_csv, write_json
from attacks.adversarial import use_profile_cache
from attacks.attribute import attrinf_attack
from attacks.lira import train_lira_fleet_for
from attacks.membership import meminf_attack, prepare_membership
from attacks.property import PropInfResult, propinf_attack
from attacks.results import AttackResult
from compositions.chains import chain_adv_propinf_attrinf, chain_adv_propinf_meminf
from compositions.evaluation import propinf_to_meminf
from compositions.execution import adv_to_meminf, adv_to_propinf
from compositions.preparation import propinf_to_attrinf
from dao.artifact_store import (
    ArtifactStore,
    load_bundle,
    load_lira_fleet,
    load_model,
    load_outcome,
    load_result,
    load_shadow_fleet,
    read_manifest,
    save_bundle,
    save_lira_fleet,
    save_model,
    save_outcome,
    save_result,
    save_shadow_fleet,
    write_manifest,
)
from ingestion.external_loader import load_npz
from ingestion.synthetic_generator import generate_synthetic
from models.fleet import train_shadow_fleet
from models.training import ModelConfig, train_model
from service.experiment_config import CompositionSpec, ExperimentConfig, canonical_text
from taxonomy import AttackKind, MemInfSetting
from transform.canonical import content_hash, derive_seed
from transform.partition import partition_dataset

log = logging.getLogger(__name__)

STAGES = ("prepare", "train", "attack", "compose", "report")

PROPINF_COMPOSITIONS = ("propinf2attrinf", "adv2propinf", "propinf2meminf", "adv2propinf2attrinf", "adv2propinf2meminf")
ATTRINF_COMPOSITIONS = ("propinf2attrinf", "adv2propinf2attrinf")


@dataclass
class PipelineRun:
    """Resultado de uma execução: status de saída, diretório e contagem de artefatos."""
    status: int
    directory: Path
    stages: Tuple[str, ...]
    computed: int = 0
    reused: int = 0
    report_files: List[Path] = field(default_factory=list)


@dataclass
class Report:
    comparison: pd.DataFrame
    attacks: pd.DataFrame
    curves: Dict[str, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)


@dataclass
class RunContext:
    """Estado de uma repetição: semente e hashes de entrada já calculados."""
    run_seed: int
    hashes: Dict[str, str] = field(default_factory=dict)


def required_attacks(config: ExperimentConfig) -> List[str]:
    """Ataques configurados mais os exigidos pelas composições, em ordem fixa."""
    settings = set(config.attacks.meminf_settings)
    attrinf, propinf = config.attacks.attrinf, config.attacks.propinf
    for spec in config.compositions:
        if spec.plan.primary_attack == AttackKind.MEMINF:
            settings.update(spec.settings)
        propinf = propinf or spec.name in PROPINF_COMPOSITIONS
        attrinf = attrinf or spec.name in ATTRINF_COMPOSITIONS
    names = [f"meminf_{s.value}" for s in MemInfSetting if s in settings]
    if attrinf:
        names.append("attrinf")
    if propinf:
        names.append("propinf")
    return names


def composition_items(config: ExperimentConfig) -> List[Tuple[str, CompositionSpec, Optional[MemInfSetting]]]:
    """(chave, composição, cenário): uma entrada por cenário nas composições com MemInf."""
    items = []
    for spec in config.compositions:
        if spec.plan.primary_attack == AttackKind.MEMINF:
            items.extend((f"{spec.name}_{s.value}", spec, s) for s in spec.settings)
        else:
            items.append((spec.name, spec, None))
    return items


def _membership_scores(result: AttackResult) -> np.ndarray:
    # score LiRA cru: membro quando negativo
    if result.details.get("setting") == MemInfSetting.LIRA_SHADOW.value:
        return -result.scores
    return result.scores


def _save_report(report: Report, directory: Path) -> None:
    write_csv(report.comparison, directory / "comparison.csv")
    write_json(report.comparison, directory / "comparison.json")
    report.attacks.to_csv(directory / "attack_metrics.csv", index=False, float_format="%.6f", lineterminator="\n")
    for name, (scores, truth) in sorted(report.curves.items()):
        plot_roc(scores, truth, directory / "figures" / f"{name}_roc.png", title=name)
        plot_score_histogram(scores, truth, directory / "figures" / f"{name}_hist.png", title=name)
    write_manifest(directory, {
        "kind": "report",
        "rows": len(report.comparison),
        "attack_rows": len(report.attacks),
        "figures": sorted(report.curves),
    })


def _load_report(directory: Path) -> Report:
    read_manifest(directory)
    return Report(
        comparison=pd.read_csv(directory / "comparison.csv"),
        attacks=pd.read_csv(directory / "attack_metrics.csv"),
    )


class ExperimentPipeline:
    """
    Executa os estágios pedidos de um experimento sobre um ArtifactStore.

    Os getters (bundle, model, fleet, ...) resolvem cada artefato pelo
    estágio dono: computam se o estágio foi pedido, senão carregam do disco.
    """

    def __init__(self, config: ExperimentConfig, stages: Sequence[str], store: Optional[ArtifactStore] = None):
        unknown = [s for s in stages if s not in STAGES]
        if unknown:
            raise ConfigError([f"Estágios desconhecidos: {unknown}. Válidos: {list(STAGES)}"])
        self.config = config
        self.stages = tuple(s for s in STAGES if s in stages)
        self.store = store or ArtifactStore(config.output_dir)
        self.section = config.to_dict()
        self.attacks = required_attacks(config)
        self.compositions = composition_items(config)
        self.lira_needed = any(
            name == f"meminf_{MemInfSetting.LIRA_SHADOW.value}" for name in self.attacks
        )

    # --- Resolução de artefatos ---

    def _obtain(self, stage: str, key: str, input_hash: str, compute: Callable, save: Callable, load: Callable):
        if stage in self.stages:
            return self.store.ensure(stage, key, input_hash, compute, save, load)
        return self.store.require(stage, key, load, input_hash)

    def _data_hash(self, ctx: RunContext) -> str:
        return ctx.hashes.setdefault("data", content_hash({
            "dataset": self.section["dataset"],
            "partition": self.section["partition"],
            "seed": ctx.run_seed,
        }))

    def bundle(self, ctx: RunContext):
        def compute():
            dataset = self.config.dataset
            if dataset.source == "npz":
                samples = load_npz(dataset.path)
            else:
                samples = generate_synthetic(dataset.synthetic, derive_seed(ctx.run_seed, "dataset"))
            return partition_dataset(samples, self.config.partition, derive_seed(ctx.run_seed, "prepare"))

        return self._obtain("prepare", f"seed{ctx.run_seed}", self._data_hash(ctx), compute, save_bundle, load_bundle)

    def model_specs(self, ctx: RunContext) -> List[Tuple[str, ModelConfig]]:
        """Alvo sem DP e um alvo por epsilon da ablação."""
        base = self.config.target.model
        specs = [("target", replace(base, dp=None, seed=derive_seed(ctx.run_seed, "train", 0)))]
        for index, epsilon in enumerate(self.config.target.dp_epsilons, start=1):
            specs.append((
                f"dp_eps{epsilon:g}",
                replace(base, dp=self.config.target.dp_config(epsilon), seed=derive_seed(ctx.run_seed, "train", index)),
            ))
        return specs

    def _model_hash(self, ctx: RunContext, name: str) -> str:
        config = dict(self.model_specs(ctx))[name]
        return ctx.hashes.setdefault(f"model:{name}", content_hash({
            "data": self._data_hash(ctx), "model": config.to_dict(),
        }))

    def model(self, ctx: RunContext, name: str):
        config = dict(self.model_specs(ctx))[name]

        def compute():
            bundle = self.bundle(ctx)
            return train_model(config, bundle.target_train, bundle.target_test)

        return self._obtain("train", f"seed{ctx.run_seed}/{name}", self._model_hash(ctx, name), compute, save_model, load_model)

    def _fleet_config(self, ctx: RunContext) -> ModelConfig:
        return replace(self.model_specs(ctx)[0][1], dp=None)

    def _fleet_hash(self, ctx: RunContext) -> str:
        fleet = {k: v for k, v in self.section["fleet"].items() if k != "lira_models"}
        return ctx.hashes.setdefault("fleet", content_hash({
            "data": self._data_hash(ctx), "model": self._fleet_config(ctx).to_dict(), "fleet": fleet,
        }))

    def fleet(self, ctx: RunContext):
        """Frota de PropInf sobre o auxiliar do adversário (sombra treino + teste)."""
        def compute():
            fleet = self.config.fleet
            return train_shadow_fleet(
                self._fleet_config(ctx),
                self.bundle(ctx).attribute_aux(),
                list(fleet.proportion_labels),
                fleet.size_per_label,
                derive_seed(ctx.run_seed, "fleet"),
                samples_per_model=fleet.samples_per_model,
                workers=self.config.workers,
            )

        return self._obtain("train", f"seed{ctx.run_seed}/fleet", self._fleet_hash(ctx), compute,
                            save_shadow_fleet, load_shadow_fleet)

    def _lira_hash(self, ctx: RunContext, name: str) -> str:
        return ctx.hashes.setdefault(f"lira:{name}", content_hash({
            "model": self._model_hash(ctx, name), "n_models": self.config.fleet.lira_models,
            "seed": self.attack_seed(ctx),
        }))

    def lira_fleet(self, ctx: RunContext, name: str):
        def compute():
            target, bundle = self.model(ctx, name), self.bundle(ctx)
            splits = prepare_membership(target, bundle, MemInfSetting.LIRA_SHADOW, self.attack_seed(ctx))
            return train_lira_fleet_for(target, bundle, splits, self.attack_seed(ctx),
                                        self.config.fleet.lira_models, self.config.workers)

        return self._obtain("train", f"seed{ctx.run_seed}/{name}/lira_fleet", self._lira_hash(ctx, name),
                            compute, save_lira_fleet, load_lira_fleet)

    def _lira_for(self, ctx: RunContext, name: str, setting: Optional[MemInfSetting]):
        return self.lira_fleet(ctx, name) if setting == MemInfSetting.LIRA_SHADOW else None

    # --- Parâmetros dos ataques ---

    def attack_seed(self, ctx: RunContext) -> int:
        return derive_seed(ctx.run_seed, "attack")

    def adv_params(self, ctx: RunContext):
        return replace(self.config.attacks.adv, seed=derive_seed(ctx.run_seed, "adv"))

    def meminf_config(self, ctx: RunContext):
        return replace(self.config.attacks.meminf, seed=derive_seed(ctx.run_seed, "meminf_net"))

    def attrinf_config(self, ctx: RunContext):
        return replace(self.config.attacks.attribute, seed=derive_seed(ctx.run_seed, "attrinf_net"))

    def _attack_hash(self, ctx: RunContext, name: str, attack: str) -> str:
        inputs = {"model": self._model_hash(ctx, name), "attack": attack, "seed": self.attack_seed(ctx)}
        if attack.startswith("meminf_"):
            inputs["meminf"] = self.meminf_config(ctx).to_dict()
            if attack == f"meminf_{MemInfSetting.LIRA_SHADOW.value}":
                inputs["lira"] = self._lira_hash(ctx, name)
        elif attack == "attrinf":
            inputs["attrinf"] = self.attrinf_config(ctx).to_dict()
        else:
            inputs["fleet"] = self._fleet_hash(ctx)
        return ctx.hashes.setdefault(f"attack:{name}:{attack}", content_hash(inputs))

    def attack(self, ctx: RunContext, name: str, attack: str):
        def compute():
            target, bundle = self.model(ctx, name), self.bundle(ctx)
            if attack.startswith("meminf_"):
                setting = MemInfSetting(attack[len("meminf_"):])
                return meminf_attack(
                    target, bundle, setting,
                    attack_config=self.meminf_config(ctx),
                    seed=self.attack_seed(ctx),
                    lira_fleet=self._lira_for(ctx, name, setting),
                )
            if attack == "attrinf":
                return attrinf_attack(target, bundle.attribute_aux(), bundle.target_train, self.attrinf_config(ctx))
            return propinf_attack(target, self.fleet(ctx), bundle.query_aux, seed=self.attack_seed(ctx))

        return self._obtain("attack", f"seed{ctx.run_seed}/{name}/{attack}", self._attack_hash(ctx, name, attack),
                            compute, save_result, load_result)

    # --- Composições ---

    def _upstream_attacks(self, spec: CompositionSpec, setting: Optional[MemInfSetting]) -> List[str]:
        names = []
        if setting is not None:
            names.append(f"meminf_{setting.value}")
        if spec.name in ATTRINF_COMPOSITIONS:
            names.append("attrinf")
        if spec.name in PROPINF_COMPOSITIONS:
            names.append("propinf")
        return names

    def _compose_hash(self, ctx: RunContext, name: str, spec: CompositionSpec, setting) -> str:
        return content_hash({
            "plan": spec.plan.to_dict(),
            "setting": None if setting is None else setting.value,
            "upstream": [self._attack_hash(ctx, name, a) for a in self._upstream_attacks(spec, setting)],
            "adv": self.adv_params(ctx).to_dict(),
        })

    def _context(self, ctx: RunContext, name: str, key: str) -> dict:
        config = dict(self.model_specs(ctx))[name]
        dataset = self.config.dataset
        return {
            "setting": key,
            "model": config.architecture_id if config.dp is None else f"{config.architecture_id}+dp(eps={config.dp.epsilon:g})",
            "dataset": dataset.source if dataset.source == "synthetic" else Path(dataset.path).stem,
            "seed": ctx.run_seed,
        }

    def _run_composition(self, ctx: RunContext, name: str, spec: CompositionSpec, setting):
        # os ataques de origem precisam existir (ou ser computados nesta execução)
        upstream = {a: self.attack(ctx, name, a) for a in self._upstream_attacks(spec, setting)}
        target, bundle = self.model(ctx, name), self.bundle(ctx)
        seed, adv = self.attack_seed(ctx), self.adv_params(ctx)
        meminf_config, attrinf_config = self.meminf_config(ctx), self.attrinf_config(ctx)
        lira = self._lira_for(ctx, name, setting)
        propinf: Optional[PropInfResult] = upstream.get("propinf")

        if spec.name == "adv2meminf":
            return adv_to_meminf(target, bundle, setting, adv, meminf_config, seed, lira)
        if spec.name == "adv2propinf":
            return adv_to_propinf(target, self.fleet(ctx), bundle.query_aux, adv, seed)
        if spec.name == "propinf2attrinf":
            return propinf_to_attrinf(target, propinf, bundle.attribute_aux(), spec.plan.mode,
                                      bundle.target_train, attrinf_config, seed)
        if spec.name == "propinf2meminf":
            return propinf_to_meminf(target, bundle, setting, propinf, meminf_config, seed, lira)
        if spec.name == "adv2propinf2attrinf":
            return chain_adv_propinf_attrinf(target, self.fleet(ctx), bundle.query_aux, adv,
                                             bundle.attribute_aux(), bundle.target_train, attrinf_config, seed)
        return chain_adv_propinf_meminf(target, bundle, setting, self.fleet(ctx), bundle.query_aux, adv,
                                        meminf_config, seed, lira)

    def composition(self, ctx: RunContext, name: str, key: str, spec: CompositionSpec, setting):
        context = self._context(ctx, name, key)
        return self._obtain(
            "compose",
            f"seed{ctx.run_seed}/{name}/{key}",
            self._compose_hash(ctx, name, spec, setting),
            lambda: self._run_composition(ctx, name, spec, setting),
            lambda outcome, directory: save_outcome(outcome, directory, **context),
            load_outcome,
        )

    # --- Estágios ---

    def stage_prepare(self, contexts: List[RunContext]) -> None:
        for ctx in contexts:
            bundle = self.bundle(ctx)
            log.info(f"[prepare] seed {ctx.run_seed}: " + ", ".join(f"{k}={len(v)}" for k, v in bundle.partitions().items()))

    def stage_train(self, contexts: List[RunContext]) -> None:
        for ctx in contexts:
            for name, _ in self.model_specs(ctx):
                model = self.model(ctx, name)
                log.info(
                    f"[train] seed {ctx.run_seed} {name}: {model.epochs_trained} épocas ({model.stop_reason}), "
                    f"treino {model.final_train_acc:.3f}, teste {model.final_test_acc:.3f}"
                )
                if self.lira_needed:
                    self.lira_fleet(ctx, name)
            if "propinf" in self.attacks:
                self.fleet(ctx)

    def stage_attack(self, contexts: List[RunContext]) -> None:
        for ctx in contexts:
            for name, _ in self.model_specs(ctx):
                for attack in self.attacks:
                    result = self.attack(ctx, name, attack)
                    log.info(f"[attack] seed {ctx.run_seed} {name}/{attack}: {dict(sorted(result.metrics.items()))}")

    def stage_compose(self, contexts: List[RunContext]) -> None:
        for ctx in contexts:
            for name, _ in self.model_specs(ctx):
                for key, spec, setting in self.compositions:
                    outcome = self.composition(ctx, name, key, spec, setting)
                    log.info(f"[compose] seed {ctx.run_seed} {name}/{key}: delta {outcome.deltas()}")

    def stage_report(self, contexts: List[RunContext]) -> Report:
        items = [
            (ctx, name, key, spec, setting)
            for ctx in contexts
            for name, _ in self.model_specs(ctx)
            for key, spec, setting in self.compositions
        ]
        input_hash = content_hash({
            "compose": [self._compose_hash(ctx, name, spec, setting) for ctx, name, _, spec, setting in items],
            "attack": [self._attack_hash(ctx, name, a) for ctx in contexts
                       for name, _ in self.model_specs(ctx) for a in self.attacks],
            "fpr_targets": list(self.config.fpr_targets),
        })

        def compute() -> Report:
            manifests, curves = [], {}
            for ctx, name, key, spec, setting in items:
                outcome = self.composition(ctx, name, key, spec, setting)
                manifests.append(outcome.manifest(**self._context(ctx, name, key)))
                if setting is not None:
                    label = f"seed{ctx.run_seed}_{name}_{key}"
                    curves[f"{label}_origin"] = (_membership_scores(outcome.origin), outcome.origin.ground_truth)
                    curves[f"{label}_composition"] = (_membership_scores(outcome.composition), outcome.composition.ground_truth)
            rows = []
            for ctx in contexts:
                for name, _ in self.model_specs(ctx):
                    for attack in self.attacks:
                        for metric, value in sorted(self.attack(ctx, name, attack).metrics.items()):
                            rows.append({"seed": ctx.run_seed, "model": name, "attack": attack,
                                         "metric": metric, "value": float(value)})
            attacks = pd.DataFrame(rows, columns=["seed", "model", "attack", "metric", "value"])
            return Report(comparison=comparison_table(manifests), attacks=attacks, curves=curves)

        return self._obtain("report", "summary", input_hash, compute, _save_report, _load_report)

    def run(self) -> PipelineRun:
        contexts = [RunContext(self.config.seed + r) for r in range(self.config.repeats)]
        self.store.root.joinpath("experiment.toml").write_text(canonical_text(self.config), encoding="utf-8")
        log.info(f"Executando estágios {list(self.stages)} em {self.store.root}")

        use_profile_cache(self.store.cached_features)
        report_files: List[Path] = []
        try:
            for stage in self.stages:
                try:
                    getattr(self, f"stage_{stage}")(contexts)
                except (MissingUpstream, ConfigError):
                    raise
                except Exception as e:
                    log.error(f"Estágio {stage} falhou: {e}")
                    raise StageError(stage, e) from e
                if stage == "report":
                    report_dir = self.store.artifact_dir("report", "summary")
                    report_files = sorted(p for p in report_dir.rglob("*") if p.is_file())
        finally:
            use_profile_cache(None)

        log.info(f"Concluído: {self.store.misses} artefatos computados, {self.store.hits} reaproveitados")
        return PipelineRun(
            status=0,
            directory=self.store.root,
            stages=self.stages,
            computed=self.store.misses,
            reused=self.store.hits,
            report_files=report_files,
        )


def run_pipeline(config: ExperimentConfig, stages: Sequence[str] = STAGES) -> PipelineRun:
    """
    Executa os estágios pedidos de um experimento.

    Args:
        config: Configuração validada
        stages: Subconjunto de STAGES (a ordem canônica é sempre respeitada)

    Returns:
        PipelineRun com status 0 e o diretório de artefatos

    Raises:
        ConfigError: Estágio desconhecido
        MissingUpstream: Artefato de estágio anterior ausente ou desatualizado
        StageError: Erro de um módulo, com o estágio em que ocorreu
    """
    return ExperimentPipeline(config, stages).run()


def list_artifacts(directory: Path, stage: Optional[str] = None) -> pd.DataFrame:
    """Índice de artefatos de um experimento como DataFrame."""
    return ArtifactStore(directory).list_artifacts(stage)
