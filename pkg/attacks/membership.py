"""
Inferência de pertinência (MemInf) nos cinco cenários de ameaça.

Cenários com modelo sombra (mb_ds, mw_ds) treinam uma sombra em
shadow_train / shadow_test e rotulam suas saídas como membro / não-membro.
Cenários com dado parcial (mb_dp, mw_dp) consultam o alvo diretamente com
D_aux^P (membros) e metade de target_test (não-membros), sem sombra.
A avaliação é sempre sobre membros / não-membros do alvo disjuntos dos dados
de treino do ataque, balanceados.
"""
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import torch
from sklearn.preprocessing import StandardScaler
from torch import nn

from config import (
    MEMINF_ATTACK_BATCH_SIZE,
    MEMINF_ATTACK_EPOCHS,
    MEMINF_ATTACK_LR,
)
from exceptions import DegenerateLabels, DisjointnessViolation, MissingAuxiliary, ShapeMismatch
from attacks.adversarial import AdvParams, adv_l2_profile
from attacks.results import AttackResult
from models.training import TrainedModel, train_model
from models.views import model_views
from taxonomy import (
    FeatureSetting,
    MemInfSetting,
    adversarial_mode_for,
    feature_setting_for,
    get_setting,
    uses_shadow,
)
from transform.canonical import array_hash, content_hash, derive_seed
from transform.partition import DatasetBundle
from transform.samples import SampleSet
from transform.sampling import uniform_subset

log = logging.getLogger(__name__)

BRANCHES = {
    FeatureSetting.BB: ("posteriors", "correct"),
    FeatureSetting.WB: ("posteriors", "loss", "gradient", "onehot"),
}
ADV_BRANCH = "adv_l2"


@dataclass(frozen=True)
class AttackFeatureRecord:
    ranked_posteriors: np.ndarray
    correct: int
    loss: Optional[float] = None
    last_layer_gradient: Optional[np.ndarray] = None
    onehot_label: Optional[np.ndarray] = None
    adv_l2: Optional[float] = None
    member: Optional[int] = None
    sample_id: Optional[int] = None


def build_meminf_features(
    model: TrainedModel,
    members: SampleSet,
    nonmembers: SampleSet,
    setting: FeatureSetting,
    adv_l2: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> List[AttackFeatureRecord]:
    """
    Features por amostra para o modelo de ataque.

    Args:
        model: Alvo ou sombra consultado
        members: Amostras rotuladas como membro (member=1)
        nonmembers: Amostras rotuladas como não-membro (member=0)
        setting: bb (posteriors ordenados + acerto) ou wb (+ loss, gradiente, one-hot)
        adv_l2: (distâncias dos membros, distâncias dos não-membros), opcional

    Returns:
        Registros de membros seguidos dos de não-membros

    Raises:
        ShapeMismatch: adv_l2 com tamanhos diferentes dos conjuntos
        DisjointnessViolation: membros e não-membros compartilham amostras
    """
    setting = FeatureSetting(setting)
    if members.id_set() & nonmembers.id_set():
        raise DisjointnessViolation("Membros e não-membros compartilham amostras")
    if adv_l2 is not None and (len(adv_l2[0]) != len(members) or len(adv_l2[1]) != len(nonmembers)):
        raise ShapeMismatch(
            f"adv_l2 com ({len(adv_l2[0])}, {len(adv_l2[1])}) distâncias para "
            f"({len(members)}, {len(nonmembers)}) amostras"
        )

    samples = SampleSet.concat(members, nonmembers)
    views = model_views(model, samples)
    ranked = -np.sort(-views.posteriors, axis=1)
    correct = (views.predicted_label == samples.task_labels).astype(int)
    membership = np.concatenate([np.ones(len(members), dtype=int), np.zeros(len(nonmembers), dtype=int)])
    distances = None if adv_l2 is None else np.concatenate([adv_l2[0], adv_l2[1]])
    onehot = np.eye(samples.num_classes)[samples.task_labels]

    white_box = setting == FeatureSetting.WB
    return [
        AttackFeatureRecord(
            ranked_posteriors=ranked[i],
            correct=int(correct[i]),
            loss=float(views.loss[i]) if white_box else None,
            last_layer_gradient=views.last_layer_gradient[i] if white_box else None,
            onehot_label=onehot[i] if white_box else None,
            adv_l2=None if distances is None else float(distances[i]),
            member=int(membership[i]),
            sample_id=int(samples.ids[i]),
        )
        for i in range(len(samples))
    ]


def stack_records(records: List[AttackFeatureRecord], setting: FeatureSetting) -> Dict[str, np.ndarray]:
    """Matrizes por ramo da rede de ataque (uma linha por registro)."""
    setting = FeatureSetting(setting)
    columns = {
        "posteriors": lambda r: r.ranked_posteriors,
        "correct": lambda r: [r.correct],
        "loss": lambda r: [r.loss],
        "gradient": lambda r: r.last_layer_gradient,
        "onehot": lambda r: r.onehot_label,
    }
    inputs = {
        name: np.asarray([columns[name](r) for r in records], dtype=np.float64)
        for name in BRANCHES[setting]
    }
    if records and records[0].adv_l2 is not None:
        inputs[ADV_BRANCH] = np.asarray([[r.adv_l2] for r in records], dtype=np.float64)
    return inputs


def member_labels(records: List[AttackFeatureRecord]) -> np.ndarray:
    return np.asarray([r.member for r in records], dtype=np.float32)


def feature_schema(inputs: Dict[str, np.ndarray]) -> Dict[str, int]:
    return {name: int(array.shape[1]) for name, array in sorted(inputs.items())}


def dense_stack(sizes: List[int]) -> nn.Sequential:
    """Camadas densas com ReLU entre elas (sem ativação na última)."""
    layers = []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        layers.append(nn.Linear(n_in, n_out))
        if i < len(sizes) - 2:
            layers.append(nn.ReLU())
    return nn.Sequential(*layers)


class MembershipAttackNet(nn.Module):
    """
    Um ramo denso de 2 camadas por entrada, concatenados e passados a uma
    cabeça densa de 4 camadas com uma saída (logit).
    """

    def __init__(self, schema: Dict[str, int], branch_width: int = 64):
        super().__init__()
        self.names = sorted(schema)
        self.branches = nn.ModuleDict({
            name: nn.Sequential(dense_stack([schema[name], branch_width, branch_width]), nn.ReLU())
            for name in self.names
        })
        self.head = dense_stack([branch_width * len(self.names), 256, 128, 64, 1])

    def forward(self, inputs: Dict[str, torch.Tensor]) -> torch.Tensor:
        fused = torch.cat([self.branches[name](inputs[name]) for name in self.names], dim=1)
        return self.head(fused).squeeze(1)


@dataclass(frozen=True)
class MemInfAttackConfig:
    epochs: int = MEMINF_ATTACK_EPOCHS
    learning_rate: float = MEMINF_ATTACK_LR
    batch_size: int = MEMINF_ATTACK_BATCH_SIZE
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class MemInfAttackModel:
    """Rede de ataque treinada + os scalers de cada ramo."""
    network: MembershipAttackNet
    scalers: Dict[str, StandardScaler]
    setting: FeatureSetting
    config: MemInfAttackConfig
    schema: Dict[str, int] = field(default_factory=dict)
    training_accuracy: float = 0.0

    def tensors(self, inputs: Dict[str, np.ndarray]) -> Dict[str, torch.Tensor]:
        if feature_schema(inputs) != self.schema:
            raise ShapeMismatch(f"Schema de features {feature_schema(inputs)} diferente do treino {self.schema}")
        return {
            name: torch.as_tensor(self.scalers[name].transform(array), dtype=torch.float32)
            for name, array in inputs.items()
        }

    def logits(self, inputs: Dict[str, np.ndarray]) -> np.ndarray:
        self.network.eval()
        with torch.no_grad():
            return self.network(self.tensors(inputs)).numpy().astype(np.float64)

    def scores(self, inputs: Dict[str, np.ndarray]) -> np.ndarray:
        """Probabilidade de membro em [0, 1]."""
        return 1.0 / (1.0 + np.exp(-self.logits(inputs)))

    def score_records(self, records: List[AttackFeatureRecord]) -> np.ndarray:
        return self.scores(stack_records(records, self.setting))


def fit_scalers(inputs: Dict[str, np.ndarray]) -> Dict[str, StandardScaler]:
    return {name: StandardScaler().fit(array) for name, array in inputs.items()}


def fit_binary(
    parameters,
    forward: Callable[[torch.Tensor], torch.Tensor],
    labels: np.ndarray,
    config: MemInfAttackConfig,
) -> None:
    """
    Laço de treino com BCE sobre probabilidades, em mini-lotes embaralhados.

    `forward(indices)` devolve a probabilidade de membro das linhas indicadas.
    """
    optimizer = torch.optim.Adam(parameters, lr=config.learning_rate)
    targets = torch.as_tensor(labels, dtype=torch.float32)
    generator = torch.Generator().manual_seed(config.seed)
    n = len(labels)
    for _ in range(config.epochs):
        order = torch.randperm(n, generator=generator)
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            optimizer.zero_grad()
            loss = nn.functional.binary_cross_entropy(forward(batch), targets[batch])
            loss.backward()
            optimizer.step()


def train_meminf_attack_model(
    records: List[AttackFeatureRecord],
    setting: FeatureSetting,
    config: Optional[MemInfAttackConfig] = None,
) -> MemInfAttackModel:
    """
    Treina a rede de ataque de MemInf.

    Args:
        records: Registros com o bit member preenchido
        setting: bb ou wb (define os ramos; adv_l2 ganha um ramo extra se presente)
        config: Épocas, taxa, lote e semente (padrão: 50 épocas, taxa 1e-5)

    Returns:
        MemInfAttackModel com saída sigmoide em [0, 1]

    Raises:
        DegenerateLabels: Apenas uma classe entre os registros
    """
    config = config or MemInfAttackConfig()
    setting = FeatureSetting(setting)
    labels = member_labels(records)
    if len(np.unique(labels)) < 2:
        raise DegenerateLabels("Treino do ataque de MemInf precisa de membros e não-membros")

    inputs = stack_records(records, setting)
    schema = feature_schema(inputs)
    torch.manual_seed(config.seed)
    model = MemInfAttackModel(
        network=MembershipAttackNet(schema),
        scalers=fit_scalers(inputs),
        setting=setting,
        config=config,
        schema=schema,
    )
    tensors = model.tensors(inputs)
    model.network.train()
    fit_binary(
        model.network.parameters(),
        lambda idx: torch.sigmoid(model.network({k: v[idx] for k, v in tensors.items()})),
        labels,
        config,
    )
    model.network.eval()
    model.training_accuracy = float(np.mean((model.scores(inputs) >= 0.5) == labels))
    log.info(
        f"Modelo de ataque {setting.value} ({', '.join(schema)}) treinado em {len(records)} registros: "
        f"acurácia de treino {model.training_accuracy:.3f}"
    )
    return model


@dataclass(frozen=True, eq=False)
class MembershipSplits:
    """
    Conjuntos de um experimento de MemInf.

    `reference` é o modelo que gera as features de treino do ataque: a
    sombra nos cenários com D_aux^S, o próprio alvo nos cenários com D_aux^P.
    """
    setting: MemInfSetting
    reference: Optional[TrainedModel]
    train_members: SampleSet
    train_nonmembers: SampleSet
    eval_members: SampleSet
    eval_nonmembers: SampleSet
    shadow_trained: bool

    def eval_samples(self) -> SampleSet:
        return SampleSet.concat(self.eval_members, self.eval_nonmembers)

    def eval_truth(self) -> np.ndarray:
        return np.concatenate([np.ones(len(self.eval_members), dtype=int), np.zeros(len(self.eval_nonmembers), dtype=int)])

    def manifest(self) -> dict:
        """Hash dos ids de cada conjunto (contrato do nível de execução)."""
        return {
            "setting": self.setting.value,
            "shadow_trained": self.shadow_trained,
            "train_members": array_hash(self.train_members.ids),
            "train_nonmembers": array_hash(self.train_nonmembers.ids),
            "eval_members": array_hash(self.eval_members.ids),
            "eval_nonmembers": array_hash(self.eval_nonmembers.ids),
        }


def _balanced_pair(a: SampleSet, b: SampleSet, seed: int, stage: str) -> Tuple[SampleSet, SampleSet]:
    n = min(len(a), len(b))
    return (
        uniform_subset(a, n, derive_seed(seed, stage, 0)),
        uniform_subset(b, n, derive_seed(seed, stage, 1)),
    )


def _halves(samples: SampleSet, seed: int) -> Tuple[SampleSet, SampleSet]:
    order = np.random.default_rng(seed).permutation(len(samples))
    half = len(samples) // 2
    return samples.subset(np.sort(order[:half])), samples.subset(np.sort(order[half:]))


def prepare_membership(
    target: TrainedModel,
    bundle: DatasetBundle,
    setting,
    seed: int = 0,
    train_fn: Optional[Callable] = None,
) -> MembershipSplits:
    """
    Monta os conjuntos de treino do ataque e de avaliação para um cenário.

    Raises:
        MissingAuxiliary: O bundle não traz o dado auxiliar do cenário
    """
    setting = get_setting(setting)
    train_fn = train_fn or train_model

    if uses_shadow(setting):
        if len(bundle.shadow_train) == 0 or len(bundle.shadow_test) == 0:
            raise MissingAuxiliary(f"{setting.value} exige shadow_train e shadow_test não vazios")
        eval_members, eval_nonmembers = _balanced_pair(bundle.target_train, bundle.target_test, seed, "meminf_eval")
        if setting == MemInfSetting.LIRA_SHADOW:
            empty = SampleSet.empty_like(bundle.shadow_train)
            return MembershipSplits(setting, None, empty, empty, eval_members, eval_nonmembers, False)
        shadow_config = replace(target.config, dp=None, seed=derive_seed(seed, "shadow"))
        log.info(f"{setting.value}: treinando modelo sombra em {len(bundle.shadow_train)} amostras")
        shadow = train_fn(shadow_config, bundle.shadow_train, bundle.shadow_test)
        train_members, train_nonmembers = _balanced_pair(bundle.shadow_train, bundle.shadow_test, seed, "meminf_train")
        return MembershipSplits(setting, shadow, train_members, train_nonmembers, eval_members, eval_nonmembers, True)

    if len(bundle.partial_aux) == 0:
        raise MissingAuxiliary(f"{setting.value} exige D_aux^P (partial_aux) não vazio")
    nonmember_train, nonmember_eval = _halves(bundle.target_test, derive_seed(seed, "meminf_halves"))
    partial_ids = np.fromiter(bundle.partial_aux.id_set(), dtype=np.int64)
    remaining = bundle.target_train.subset(np.flatnonzero(~np.isin(bundle.target_train.ids, partial_ids)))
    if len(remaining) == 0:
        raise MissingAuxiliary(f"{setting.value}: D_aux^P cobre todo target_train, sem membros para avaliação")
    train_members, train_nonmembers = _balanced_pair(bundle.partial_aux, nonmember_train, seed, "meminf_train")
    eval_members, eval_nonmembers = _balanced_pair(remaining, nonmember_eval, seed, "meminf_eval")
    return MembershipSplits(setting, target, train_members, train_nonmembers, eval_members, eval_nonmembers, False)


def adv_distances(
    model: TrainedModel,
    members: SampleSet,
    nonmembers: SampleSet,
    setting: MemInfSetting,
    params: AdvParams,
) -> Tuple[np.ndarray, np.ndarray]:
    """Distâncias L2 (Square nos cenários caixa-preta, PGD nos caixa-branca)."""
    mode = adversarial_mode_for(setting)
    return (
        adv_l2_profile(model, members, mode, params),
        adv_l2_profile(model, nonmembers, mode, params),
    )


def classifier_meminf(
    target: TrainedModel,
    splits: MembershipSplits,
    attack_config: Optional[MemInfAttackConfig] = None,
    adv_params: Optional[AdvParams] = None,
) -> Tuple[MemInfAttackModel, List[AttackFeatureRecord], List[AttackFeatureRecord]]:
    """
    Constrói registros de treino / avaliação e treina a rede de ataque.

    Com `adv_params`, os registros carregam a distância L2 e a rede ganha o
    ramo extra; rótulos e conjuntos de avaliação não mudam.
    """
    features = feature_setting_for(splits.setting)
    train_l2 = eval_l2 = None
    if adv_params is not None:
        train_l2 = adv_distances(splits.reference, splits.train_members, splits.train_nonmembers, splits.setting, adv_params)
        eval_l2 = adv_distances(target, splits.eval_members, splits.eval_nonmembers, splits.setting, adv_params)
    train_records = build_meminf_features(splits.reference, splits.train_members, splits.train_nonmembers, features, train_l2)
    eval_records = build_meminf_features(target, splits.eval_members, splits.eval_nonmembers, features, eval_l2)
    attack = train_meminf_attack_model(train_records, features, attack_config)
    return attack, train_records, eval_records


def meminf_result(
    scores: np.ndarray,
    splits: MembershipSplits,
    **details,
) -> AttackResult:
    """AttackResult de MemInf com limiar 0.5 sobre o score."""
    return AttackResult.from_scores(
        scores,
        (np.asarray(scores) >= 0.5).astype(int),
        splits.eval_truth(),
        sample_ids=splits.eval_samples().ids,
        splits=splits.manifest(),
        **details,
    )


def meminf_attack(
    target: TrainedModel,
    bundle: DatasetBundle,
    setting,
    adv_augment: bool = False,
    adv_params: Optional[AdvParams] = None,
    attack_config: Optional[MemInfAttackConfig] = None,
    seed: int = 0,
    train_fn: Optional[Callable] = None,
    lira_fleet=None,
) -> AttackResult:
    """
    Executa MemInf em um dos cinco cenários.

    Args:
        target: Modelo alvo
        bundle: Partições e auxiliares
        setting: mb_ds, mb_dp, mw_ds, mw_dp ou lira_ds
        adv_augment: Acrescenta a distância L2 adversarial às features
        adv_params: Hiperparâmetros do ataque adversarial (padrão: AdvParams())
        attack_config: Hiperparâmetros da rede de ataque
        seed: Semente do experimento
        train_fn: Função de treino da sombra (padrão: train_model)
        lira_fleet: Frota LiRA já treinada (apenas lira_ds)

    Returns:
        AttackResult com accuracy, f1, auc e tpr_at_fpr_0.001

    Raises:
        MissingAuxiliary: O bundle não traz o dado auxiliar do cenário
    """
    setting = get_setting(setting)
    splits = prepare_membership(target, bundle, setting, seed, train_fn)
    if adv_augment and adv_params is None:
        adv_params = AdvParams(seed=derive_seed(seed, "adv"))

    if setting == MemInfSetting.LIRA_SHADOW:
        from attacks.lira import lira_meminf
        return lira_meminf(target, bundle, splits, seed=seed, fleet=lira_fleet,
                           adv_params=adv_params if adv_augment else None)

    attack, _, eval_records = classifier_meminf(
        target, splits, attack_config, adv_params if adv_augment else None
    )
    scores = attack.score_records(eval_records)
    result = meminf_result(
        scores,
        splits,
        setting=setting.value,
        adv_augment=adv_augment,
        feature_schema=content_hash(attack.schema),
        attack_config=content_hash(attack.config.to_dict()),
    )
    log.info(f"MemInf {setting.value} (adv={adv_augment}): {result.metrics}")
    return result
