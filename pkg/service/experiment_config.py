"""
Configuração de experimento em TOML.

Um arquivo de experimento descreve o dataset, a partição, o treino do alvo
(com a ablação de DP), as frotas sombra, os ataques, as composições e as
métricas. `validate_config` devolve todas as violações de uma vez; o texto
canônico (chaves ordenadas, todos os campos explícitos) é o que vai para o
hash do experimento.

Exemplo mínimo:

    seed = 0

    [attacks]
    meminf_settings = ["mb_ds"]
    propinf = false

    [[compositions]]
    name = "adv2meminf"
    settings = ["mb_ds"]
"""
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import tomlkit
from tomlkit.exceptions import TOMLKitError

from config import (
    DEFAULT_FPR_TARGETS,
    DEFAULT_WORKERS,
    DP_DEFAULT_CLIP_NORM,
    DP_DEFAULT_DELTA,
    LIRA_DEFAULT_FLEET_SIZE,
    OUTPUT_ROOT,
)
from exceptions import ConfigError, InvalidPlan, InvalidSpec
from attacks.adversarial import AdvParams
from attacks.attribute import AttrInfConfig
from attacks.membership import MemInfAttackConfig
from compositions.plans import CompositionPlan, allowed_plans
from ingestion.synthetic_generator import SyntheticSpec
from models.privacy import DPConfig
from models.training import ModelConfig
from taxonomy import AttackKind, MemInfSetting, get_composition
from transform.canonical import content_hash
from transform.partition import PARTITIONS, PartitionSpec
from transform.samples import PropertyProportion

log = logging.getLogger(__name__)

DATASET_SOURCES = ("synthetic", "npz")


@dataclass(frozen=True)
class DatasetConfig:
    source: str = "synthetic"
    path: Optional[str] = None
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)


@dataclass(frozen=True)
class TargetConfig:
    """Modelo alvo e a ablação de DP (um alvo extra por epsilon)."""
    model: ModelConfig = field(default_factory=ModelConfig)
    dp_epsilons: Tuple[float, ...] = ()
    dp_delta: float = DP_DEFAULT_DELTA
    dp_clip_norm: float = DP_DEFAULT_CLIP_NORM

    def dp_config(self, epsilon: float) -> DPConfig:
        return DPConfig(epsilon=epsilon, delta=self.dp_delta, clip_norm=self.dp_clip_norm)


@dataclass(frozen=True)
class FleetConfig:
    proportion_labels: Tuple[PropertyProportion, ...] = ()
    size_per_label: int = 10
    samples_per_model: Optional[int] = None
    lira_models: int = LIRA_DEFAULT_FLEET_SIZE


@dataclass(frozen=True)
class AttackSpecs:
    meminf_settings: Tuple[MemInfSetting, ...] = tuple(MemInfSetting)
    attrinf: bool = True
    propinf: bool = True
    adv: AdvParams = field(default_factory=AdvParams)
    meminf: MemInfAttackConfig = field(default_factory=MemInfAttackConfig)
    attribute: AttrInfConfig = field(default_factory=AttrInfConfig)


@dataclass(frozen=True)
class CompositionSpec:
    plan: CompositionPlan
    settings: Tuple[MemInfSetting, ...] = ()

    @property
    def name(self) -> str:
        return self.plan.name


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    output_dir: Path = OUTPUT_ROOT / "default"
    workers: int = DEFAULT_WORKERS
    repeats: int = 1
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    partition: PartitionSpec = field(default_factory=PartitionSpec)
    target: TargetConfig = field(default_factory=TargetConfig)
    fleet: FleetConfig = field(default_factory=FleetConfig)
    attacks: AttackSpecs = field(default_factory=AttackSpecs)
    compositions: Tuple[CompositionSpec, ...] = ()
    fpr_targets: Tuple[float, ...] = DEFAULT_FPR_TARGETS

    def to_dict(self) -> dict:
        """Forma aninhada de dicts/listas, sem None (TOML não tem nulo)."""
        return _drop_none({
            "seed": self.seed,
            "output_dir": str(self.output_dir),
            "workers": self.workers,
            "repeats": self.repeats,
            "dataset": {
                "source": self.dataset.source,
                "path": self.dataset.path,
                "synthetic": asdict(self.dataset.synthetic),
            },
            "partition": {
                "fractions": dict(self.partition.fractions),
                "target_proportion": _weights(self.partition.proportions.get("target_train")),
                "shadow_proportion": _weights(self.partition.proportions.get("shadow_train")),
                "partial_fraction": self.partition.partial_fraction,
                "partial_per_class": self.partition.partial_per_class,
                "query_proportions": [list(p.weights) for p in self.partition.query_proportions],
                "query_per_set": self.partition.query_per_set,
            },
            "target": {
                **{k: v for k, v in self.target.model.to_dict().items() if k not in ("dp", "seed")},
                "dp_epsilons": list(self.target.dp_epsilons),
                "dp_delta": self.target.dp_delta,
                "dp_clip_norm": self.target.dp_clip_norm,
            },
            "fleet": {
                "proportion_labels": [list(p.weights) for p in self.fleet.proportion_labels],
                "size_per_label": self.fleet.size_per_label,
                "samples_per_model": self.fleet.samples_per_model,
                "lira_models": self.fleet.lira_models,
            },
            "attacks": {
                "meminf_settings": [s.value for s in self.attacks.meminf_settings],
                "attrinf": self.attacks.attrinf,
                "propinf": self.attacks.propinf,
                "adv": {k: v for k, v in self.attacks.adv.to_dict().items() if k not in ("mode", "seed")},
                "meminf": {k: v for k, v in self.attacks.meminf.to_dict().items() if k != "seed"},
                "attribute": {k: v for k, v in self.attacks.attribute.to_dict().items() if k != "seed"},
            },
            "compositions": [
                {"name": c.name, "mode": c.plan.mode, "settings": [s.value for s in c.settings]}
                for c in self.compositions
            ],
            "metrics": {"fpr_targets": list(self.fpr_targets)},
        })

    def config_hash(self) -> str:
        return content_hash(self.to_dict())

    def with_overrides(self, seed: Optional[int] = None, workers: Optional[int] = None,
                       output_dir: Optional[Path] = None) -> "ExperimentConfig":
        """Sobrescritas da linha de comando (--seed, --workers, --out)."""
        changes: Dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = seed
            changes["target"] = replace(self.target, model=replace(self.target.model, seed=seed))
        if workers is not None:
            changes["workers"] = workers
        if output_dir is not None:
            changes["output_dir"] = Path(output_dir)
        return replace(self, **changes)


def _weights(proportion: Optional[PropertyProportion]) -> Optional[list]:
    return None if proportion is None else list(proportion.weights)


def _drop_none(value):
    if isinstance(value, dict):
        return {k: _drop_none(v) for k, v in value.items() if v is not None}
    if isinstance(value, list):
        return [_drop_none(v) for v in value]
    return value


def _sorted_container(value):
    """Chaves ordenadas, escalares antes das tabelas."""
    if isinstance(value, dict):
        scalars = {k: v for k, v in value.items() if not _is_table(v)}
        tables = {k: v for k, v in value.items() if _is_table(v)}
        ordered = {}
        for key in sorted(scalars):
            ordered[key] = _sorted_container(scalars[key])
        for key in sorted(tables):
            ordered[key] = _sorted_container(tables[key])
        return ordered
    if isinstance(value, list):
        return [_sorted_container(v) for v in value]
    return value


def _is_table(value) -> bool:
    return isinstance(value, dict) or (
        isinstance(value, list) and bool(value) and all(isinstance(v, dict) for v in value)
    )


def canonical_text(config: ExperimentConfig) -> str:
    """Texto TOML canônico: todos os campos explícitos, chaves ordenadas."""
    return tomlkit.dumps(_sorted_container(config.to_dict()))


# --- Parsing com coleta de erros ---

class _Reader:
    """Lê campos tipados de um dict aninhado acumulando erros com o caminho do campo."""

    def __init__(self, errors: List[str]):
        self.errors = errors

    def section(self, data: dict, key: str, path: str) -> dict:
        value = data.get(key, {})
        if not isinstance(value, dict):
            self.errors.append(f"{path}{key}: esperado uma tabela")
            return {}
        return value

    def get(self, data: dict, key: str, kind, default, path: str):
        if key not in data:
            return default
        value = data[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if kind is not None and not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
            self.errors.append(f"{path}{key}: tipo inválido ({type(value).__name__})")
            return default
        return value

    def proportion(self, value, path: str) -> Optional[PropertyProportion]:
        try:
            return PropertyProportion.from_ratio(*[float(v) for v in value])
        except (InvalidSpec, TypeError, ValueError) as e:
            self.errors.append(f"{path}: proporção inválida {value!r} ({e})")
            return None

    def proportions(self, values, path: str) -> Tuple[PropertyProportion, ...]:
        if not isinstance(values, list):
            self.errors.append(f"{path}: esperado uma lista de proporções")
            return ()
        parsed = [self.proportion(v, f"{path}[{i}]") for i, v in enumerate(values)]
        return tuple(p for p in parsed if p is not None)

    def check(self, fn, path: str) -> None:
        try:
            fn()
        except (InvalidSpec, InvalidPlan, ValueError) as e:
            self.errors.append(f"{path}: {e}")


def _parse_dataset(reader: _Reader, data: dict) -> DatasetConfig:
    section = reader.section(data, "dataset", "")
    source = reader.get(section, "source", str, "synthetic", "dataset.")
    if source not in DATASET_SOURCES:
        reader.errors.append(f"dataset.source: '{source}' inválido. Válidos: {DATASET_SOURCES}")
    path = reader.get(section, "path", str, None, "dataset.")
    if source == "npz" and not path:
        reader.errors.append("dataset.path: obrigatório quando source = 'npz'")
    synthetic_raw = reader.section(section, "synthetic", "dataset.")
    defaults = asdict(SyntheticSpec())
    values = {}
    for key, default in defaults.items():
        values[key] = reader.get(synthetic_raw, key, type(default), default, "dataset.synthetic.")
    unknown = set(synthetic_raw) - set(defaults)
    if unknown:
        reader.errors.append(f"dataset.synthetic: campos desconhecidos {sorted(unknown)}")
    synthetic = SyntheticSpec(**values)
    reader.check(synthetic.validate, "dataset.synthetic")
    return DatasetConfig(source=source, path=path, synthetic=synthetic)


def _parse_partition(reader: _Reader, data: dict) -> PartitionSpec:
    section = reader.section(data, "partition", "")
    defaults = PartitionSpec()
    fractions_raw = reader.section(section, "fractions", "partition.")
    fractions = dict(defaults.fractions)
    for key, value in fractions_raw.items():
        if key not in PARTITIONS:
            reader.errors.append(f"partition.fractions.{key}: partição desconhecida. Válidas: {list(PARTITIONS)}")
            continue
        fractions[key] = reader.get(fractions_raw, key, float, fractions[key], "partition.fractions.")
    total = sum(fractions.values())
    if total > 1.0 + 1e-9:
        reader.errors.append(f"partition.fractions: frações somam {total:.3f} > 1")

    proportions = {}
    for key, partition in (("target_proportion", "target_train"), ("shadow_proportion", "shadow_train")):
        if key in section:
            proportions[partition] = reader.proportion(section[key], f"partition.{key}")

    spec = PartitionSpec(
        fractions=fractions,
        proportions={k: v for k, v in proportions.items() if v is not None},
        partial_fraction=reader.get(section, "partial_fraction", float, defaults.partial_fraction, "partition."),
        partial_per_class=reader.get(section, "partial_per_class", bool, defaults.partial_per_class, "partition."),
        query_proportions=list(reader.proportions(section.get("query_proportions", []), "partition.query_proportions")),
        query_per_set=reader.get(section, "query_per_set", int, defaults.query_per_set, "partition."),
    )
    if total <= 1.0 + 1e-9:
        reader.check(spec.validate, "partition")
    return spec


def _parse_target(reader: _Reader, data: dict, seed: int) -> TargetConfig:
    section = reader.section(data, "target", "")
    defaults = ModelConfig()
    model = ModelConfig(
        architecture_id=reader.get(section, "architecture_id", str, defaults.architecture_id, "target."),
        max_epochs=reader.get(section, "max_epochs", int, defaults.max_epochs, "target."),
        batch_size=reader.get(section, "batch_size", int, defaults.batch_size, "target."),
        learning_rate=reader.get(section, "learning_rate", float, defaults.learning_rate, "target."),
        optimizer=reader.get(section, "optimizer", str, defaults.optimizer, "target."),
        overfit_threshold=reader.get(section, "overfit_threshold", float, defaults.overfit_threshold, "target."),
        seed=seed,
    )
    reader.check(model.validate, "target")
    epsilons = section.get("dp_epsilons", [])
    if not isinstance(epsilons, list) or not all(isinstance(e, (int, float)) and e > 0 for e in epsilons):
        reader.errors.append(f"target.dp_epsilons: esperado lista de reais > 0, recebido {epsilons!r}")
        epsilons = []
    target = TargetConfig(
        model=model,
        dp_epsilons=tuple(float(e) for e in epsilons),
        dp_delta=reader.get(section, "dp_delta", float, DP_DEFAULT_DELTA, "target."),
        dp_clip_norm=reader.get(section, "dp_clip_norm", float, DP_DEFAULT_CLIP_NORM, "target."),
    )
    for epsilon in target.dp_epsilons:
        reader.check(target.dp_config(epsilon).validate, f"target.dp_epsilons[{epsilon}]")
    return target


def _parse_fleet(reader: _Reader, data: dict) -> FleetConfig:
    section = reader.section(data, "fleet", "")
    fleet = FleetConfig(
        proportion_labels=reader.proportions(section.get("proportion_labels", []), "fleet.proportion_labels"),
        size_per_label=reader.get(section, "size_per_label", int, 10, "fleet."),
        samples_per_model=reader.get(section, "samples_per_model", int, None, "fleet."),
        lira_models=reader.get(section, "lira_models", int, LIRA_DEFAULT_FLEET_SIZE, "fleet."),
    )
    if fleet.size_per_label < 1:
        reader.errors.append(f"fleet.size_per_label: deve ser >= 1, recebido {fleet.size_per_label}")
    if fleet.lira_models < 4 or fleet.lira_models % 2:
        reader.errors.append(f"fleet.lira_models: deve ser par e >= 4, recebido {fleet.lira_models}")
    return fleet


def _sub_config(reader: _Reader, section: dict, key: str, cls, skip: Tuple[str, ...]):
    raw = reader.section(section, key, "attacks.")
    defaults = cls()
    values = {}
    for name, default in asdict(defaults).items():
        if name in skip:
            continue
        values[name] = reader.get(raw, name, type(default), default, f"attacks.{key}.")
    unknown = set(raw) - set(values)
    if unknown:
        reader.errors.append(f"attacks.{key}: campos desconhecidos {sorted(unknown)}")
    return cls(**values)


def _parse_settings(reader: _Reader, values, path: str) -> Tuple[MemInfSetting, ...]:
    if not isinstance(values, list):
        reader.errors.append(f"{path}: esperado uma lista de cenários")
        return ()
    settings = []
    for value in values:
        try:
            settings.append(MemInfSetting(value))
        except ValueError:
            reader.errors.append(
                f"{path}: cenário '{value}' desconhecido. Válidos: {[s.value for s in MemInfSetting]}"
            )
    return tuple(settings)


def _parse_attacks(reader: _Reader, data: dict) -> AttackSpecs:
    section = reader.section(data, "attacks", "")
    adv = _sub_config(reader, section, "adv", AdvParams, ("mode", "seed"))
    reader.check(adv.validate, "attacks.adv")
    return AttackSpecs(
        meminf_settings=_parse_settings(
            reader, section.get("meminf_settings", [s.value for s in MemInfSetting]), "attacks.meminf_settings"
        ),
        attrinf=reader.get(section, "attrinf", bool, True, "attacks."),
        propinf=reader.get(section, "propinf", bool, True, "attacks."),
        adv=adv,
        meminf=_sub_config(reader, section, "meminf", MemInfAttackConfig, ("seed",)),
        attribute=_sub_config(reader, section, "attribute", AttrInfConfig, ("seed",)),
    )


def _plan_from_tuple(entry: dict, mode: Optional[str]) -> CompositionPlan:
    try:
        plan = CompositionPlan(entry.get("support"), entry.get("primary"), entry.get("level"), mode)
    except ValueError:
        raise InvalidPlan(
            f"Plano ({entry.get('support')}, {entry.get('primary')}, {entry.get('level')}) "
            f"não permitido. Permitidos: {allowed_plans()}"
        )
    plan.validate()
    return plan


def _uses_propinf(plan: CompositionPlan) -> bool:
    entry = get_composition(plan.name)
    return AttackKind.PROPINF in (entry["support"], entry["primary"], *(entry["chain"] or ()))


def _parse_compositions(reader: _Reader, data: dict) -> Tuple[CompositionSpec, ...]:
    entries = data.get("compositions", [])
    if not isinstance(entries, list):
        reader.errors.append("compositions: esperado um array de tabelas [[compositions]]")
        return ()
    specs = []
    for index, entry in enumerate(entries):
        path = f"compositions[{index}]"
        if not isinstance(entry, dict):
            reader.errors.append(f"{path}: esperado uma tabela")
            continue
        mode = entry.get("mode")
        try:
            if "name" in entry:
                plan = CompositionPlan.from_name(entry["name"], mode)
            else:
                plan = _plan_from_tuple(entry, mode)
        except InvalidPlan as e:
            reader.errors.append(f"{path}: {e}")
            continue
        if plan.name == "propinf2attrinf" and mode is None:
            plan = CompositionPlan.from_name(plan.name, "empirical")
        settings = _parse_settings(reader, entry.get("settings", []), f"{path}.settings")
        if plan.primary_attack == AttackKind.MEMINF and not settings:
            reader.errors.append(f"{path}.settings: composições com MemInf precisam de ao menos um cenário")
        specs.append(CompositionSpec(plan=plan, settings=settings))
    return tuple(specs)


def validate_config(raw_text: str) -> Tuple[Optional[ExperimentConfig], List[str]]:
    """
    Valida o texto TOML de um experimento.

    Args:
        raw_text: Conteúdo do arquivo de configuração

    Returns:
        (ExperimentConfig, []) se válido; (None, erros) caso contrário, com
        todas as violações encontradas
    """
    errors: List[str] = []
    try:
        data = tomlkit.parse(raw_text).unwrap()
    except TOMLKitError as e:
        return None, [f"TOML inválido: {e}"]

    reader = _Reader(errors)
    known = {"seed", "output_dir", "workers", "repeats", "dataset", "partition", "target",
             "fleet", "attacks", "compositions", "metrics"}
    unknown = set(data) - known
    if unknown:
        errors.append(f"Campos desconhecidos na raiz: {sorted(unknown)}")

    seed = reader.get(data, "seed", int, 0, "")
    workers = reader.get(data, "workers", int, DEFAULT_WORKERS, "")
    repeats = reader.get(data, "repeats", int, 1, "")
    if workers < 1:
        errors.append(f"workers: deve ser >= 1, recebido {workers}")
    if repeats < 1:
        errors.append(f"repeats: deve ser >= 1, recebido {repeats}")
    output_dir = Path(reader.get(data, "output_dir", str, str(OUTPUT_ROOT / "default"), ""))

    dataset = _parse_dataset(reader, data)
    partition = _parse_partition(reader, data)
    target = _parse_target(reader, data, seed)
    fleet = _parse_fleet(reader, data)
    attacks = _parse_attacks(reader, data)
    compositions = _parse_compositions(reader, data)

    metrics = reader.section(data, "metrics", "")
    fpr_targets = metrics.get("fpr_targets", list(DEFAULT_FPR_TARGETS))
    if not isinstance(fpr_targets, list) or not all(isinstance(t, (int, float)) and 0 < t < 1 for t in fpr_targets):
        errors.append(f"metrics.fpr_targets: esperado lista de reais em (0, 1), recebido {fpr_targets!r}")
        fpr_targets = list(DEFAULT_FPR_TARGETS)

    uses_propinf = attacks.propinf or any(_uses_propinf(c.plan) for c in compositions)
    if uses_propinf and len(fleet.proportion_labels) < 2:
        errors.append("fleet.proportion_labels: PropInf precisa de ao menos 2 rótulos de proporção")
    if uses_propinf and not partition.query_proportions:
        errors.append("partition.query_proportions: PropInf precisa dos conjuntos D_aux^Q")
    num_properties = dataset.synthetic.num_properties if dataset.source == "synthetic" else None
    if num_properties is not None:
        for proportion in list(fleet.proportion_labels) + list(partition.query_proportions):
            if len(proportion) != num_properties:
                errors.append(f"Proporção {proportion} com {len(proportion)} pesos para P={num_properties}")

    if errors:
        for error in errors:
            log.debug(f"Configuração inválida: {error}")
        return None, errors

    config = ExperimentConfig(
        seed=seed,
        output_dir=output_dir,
        workers=workers,
        repeats=repeats,
        dataset=dataset,
        partition=partition,
        target=target,
        fleet=fleet,
        attacks=attacks,
        compositions=compositions,
        fpr_targets=tuple(float(t) for t in fpr_targets),
    )
    return config, []


def load_config(path: Path) -> ExperimentConfig:
    """
    Lê e valida um arquivo de experimento.

    Raises:
        ConfigError: Com a lista completa de violações
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"Arquivo de configuração não encontrado: {path}"])
    config, errors = validate_config(path.read_text(encoding="utf-8"))
    if errors:
        raise ConfigError(errors)
    return config
