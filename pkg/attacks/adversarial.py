"""
Ataques adversariais (ADV) usados como ataque de suporte.

- PGD (caixa-branca): passos de sinal do gradiente, projeção na bola L-inf
  de raio epsilon e corte em [0, 1].
- Square (caixa-preta): busca aleatória com janelas quadradas de +-epsilon
  sobre a perda de margem, com o cronograma de p do método original.

Os dois param na primeira iteração em que o rótulo previsto muda. A
distância L2 de uma amostra não invertida é a distância no fim do orçamento.
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable, List, Optional

import numpy as np
import torch
import torch.nn.functional as F
from tqdm import tqdm

from config import PGD_DEFAULTS, SQUARE_DEFAULTS
from exceptions import InvalidSpec
from models.training import TrainedModel
from transform.canonical import derive_seed
from transform.samples import SampleSet

log = logging.getLogger(__name__)

ADV_MODES = ("pgd", "square")

# Cache de perfis L2 instalado pelo pipeline: cache(kind, model, samples, params, compute) -> array
_profile_cache: Optional[Callable] = None


@dataclass(frozen=True)
class AdvParams:
    mode: str = "pgd"
    epsilon: float = PGD_DEFAULTS["epsilon"]
    step: float = PGD_DEFAULTS["step"]
    max_iters: int = PGD_DEFAULTS["max_iters"]
    max_queries: int = SQUARE_DEFAULTS["max_queries"]
    p_init: float = SQUARE_DEFAULTS["p_init"]
    seed: int = 0

    def validate(self) -> None:
        if self.mode not in ADV_MODES:
            raise InvalidSpec(f"Modo adversarial desconhecido: {self.mode}. Válidos: {ADV_MODES}")
        if self.epsilon < 0 or self.step < 0:
            raise InvalidSpec("epsilon e step devem ser >= 0")
        if self.max_iters < 0 or self.max_queries < 0:
            raise InvalidSpec("max_iters e max_queries devem ser >= 0")
        if not 0.0 < self.p_init <= 1.0:
            raise InvalidSpec(f"p_init fora de (0, 1]: {self.p_init}")

    def with_mode(self, mode: str) -> "AdvParams":
        return AdvParams(**{**asdict(self), "mode": mode})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AdvResult:
    adversarial: np.ndarray
    l2_distance: float
    flipped: bool
    queries_or_iters: int


def _result(original: np.ndarray, adversarial: np.ndarray, flipped: bool, count: int) -> AdvResult:
    diff = adversarial.astype(np.float64) - original.astype(np.float64)
    return AdvResult(
        adversarial=adversarial,
        l2_distance=float(np.linalg.norm(diff.ravel())),
        flipped=flipped,
        queries_or_iters=count,
    )


def pgd_attack(
    model: TrainedModel,
    features: np.ndarray,
    epsilon: float = PGD_DEFAULTS["epsilon"],
    step: float = PGD_DEFAULTS["step"],
    max_iters: int = PGD_DEFAULTS["max_iters"],
) -> AdvResult:
    """
    PGD L-inf sem início aleatório, contra o rótulo previsto originalmente.

    Args:
        model: Modelo com acesso a gradientes de entrada
        features: Uma amostra com shape model.input_shape, valores em [0, 1]
        epsilon: Raio da bola L-inf
        step: Tamanho do passo de sinal
        max_iters: Máximo de iterações

    Returns:
        AdvResult; queries_or_iters é o número de iterações executadas
    """
    original = np.asarray(features, dtype=np.float32)
    label = int(model.predict(original)[0])
    if epsilon == 0 or max_iters == 0:
        return _result(original, original.copy(), False, 0)

    network = model.network
    network.eval()
    x0 = torch.from_numpy(original).unsqueeze(0)
    target = torch.tensor([label])
    x = x0.clone()
    for iteration in range(1, max_iters + 1):
        x.requires_grad_(True)
        with torch.enable_grad():
            loss = F.cross_entropy(network(x), target)
            (gradient,) = torch.autograd.grad(loss, x)
        with torch.no_grad():
            x = x + step * gradient.sign()
            x = torch.max(torch.min(x, x0 + epsilon), x0 - epsilon).clamp(0.0, 1.0)
        candidate = x.squeeze(0).numpy()
        assert np.all(np.abs(candidate - original) <= epsilon + 1e-6)
        if int(model.predict(candidate)[0]) != label:
            return _result(original, candidate, True, iteration)
    return _result(original, x.squeeze(0).numpy(), False, max_iters)


def p_selection(p_init: float, iteration: int, max_queries: int) -> float:
    """Fração da imagem coberta pela janela na iteração dada (cronograma reescalado para 10000)."""
    it = int(iteration / max(max_queries, 1) * 10000)
    schedule = ((10, 1), (50, 2), (200, 4), (500, 8), (1000, 16), (2000, 32), (4000, 64), (6000, 128), (8000, 256))
    divisor = 512
    for upper, div in schedule:
        if it <= upper:
            divisor = div
            break
    return p_init / divisor


def _margin_objective(posteriors: np.ndarray, label: int) -> float:
    others = np.delete(posteriors, label)
    return float(others.max() - posteriors[label])


def square_attack(
    model: TrainedModel,
    features: np.ndarray,
    epsilon: float = SQUARE_DEFAULTS["epsilon"],
    max_queries: int = SQUARE_DEFAULTS["max_queries"],
    seed: int = 0,
    p_init: float = SQUARE_DEFAULTS["p_init"],
) -> AdvResult:
    """
    Square Attack L-inf, usando apenas posteriors do modelo.

    Um candidato é aceito se não diminui max_{k != y} p_k - p_y. A
    inicialização por faixas verticais conta como uma consulta.

    Args:
        model: Modelo consultado como caixa-preta
        features: Uma amostra (C, H, W) em [0, 1]
        epsilon: Raio L-inf
        max_queries: Orçamento de consultas
        seed: Semente da busca aleatória
        p_init: Fração inicial da janela

    Returns:
        AdvResult com queries_or_iters <= max_queries
    """
    original = np.asarray(features, dtype=np.float32)
    label = int(model.predict(original)[0])
    if max_queries == 0 or epsilon == 0:
        return _result(original, original.copy(), False, 0)

    rng = np.random.default_rng(seed)
    shape = original.shape if original.ndim == 3 else (1, 1, original.size)
    x = original.reshape(shape).astype(np.float64)
    c, h, w = shape
    n_features = c * h * w

    def query(candidate: np.ndarray) -> np.ndarray:
        return model.posteriors(candidate.reshape(original.shape).astype(np.float32))[0]

    x_best = np.clip(x + epsilon * rng.choice([-1.0, 1.0], size=(c, 1, w)), 0.0, 1.0)
    posteriors = query(x_best)
    best = _margin_objective(posteriors, label)
    queries = 1
    if int(np.argmax(posteriors)) != label:
        return _result(original, x_best.reshape(original.shape).astype(np.float32), True, queries)

    while queries < max_queries:
        p = p_selection(p_init, queries - 1, max_queries)
        s = min(max(int(round(math.sqrt(p * n_features / c))), 1), h, w)
        vh = int(rng.integers(0, h - s + 1))
        vw = int(rng.integers(0, w - s + 1))
        delta = x_best - x
        delta[:, vh:vh + s, vw:vw + s] = epsilon * rng.choice([-1.0, 1.0], size=(c, 1, 1))
        candidate = np.clip(x + delta, 0.0, 1.0)

        posteriors = query(candidate)
        queries += 1
        objective = _margin_objective(posteriors, label)
        if objective >= best:
            best, x_best = objective, candidate
            if int(np.argmax(posteriors)) != label:
                return _result(original, x_best.reshape(original.shape).astype(np.float32), True, queries)

    return _result(original, x_best.reshape(original.shape).astype(np.float32), False, queries)


def run_adversarial(model: TrainedModel, features: np.ndarray, params: AdvParams, sample_seed: int) -> AdvResult:
    if params.mode == "pgd":
        return pgd_attack(model, features, params.epsilon, params.step, params.max_iters)
    return square_attack(model, features, params.epsilon, params.max_queries, sample_seed, params.p_init)


def adv_profile(model: TrainedModel, samples: SampleSet, params: AdvParams) -> List[AdvResult]:
    """AdvResult de cada amostra; a semente do Square é derivada do id da amostra."""
    params.validate()
    results = []
    for position in tqdm(range(len(samples)), desc=f"ADV ({params.mode})", leave=False):
        sample_seed = derive_seed(params.seed, "square", int(samples.ids[position]))
        results.append(run_adversarial(model, samples.features[position], params, sample_seed))
    flipped = sum(r.flipped for r in results)
    if results and flipped < len(results):
        log.warning(f"ADV ({params.mode}): {len(results) - flipped}/{len(results)} amostras sem inversão de rótulo")
    return results


def adv_l2_profile(model: TrainedModel, samples: SampleSet, attack_mode: str, params: AdvParams) -> np.ndarray:
    """
    Distância L2 adversarial de cada amostra.

    Args:
        model: Modelo atacado
        samples: Amostras
        attack_mode: "pgd" ou "square" (sobrepõe params.mode)
        params: Hiperparâmetros do ataque

    Returns:
        Vetor float64 com uma distância (>= 0, finita) por amostra
    """
    params = params.with_mode(attack_mode)

    def compute() -> np.ndarray:
        return np.array([r.l2_distance for r in adv_profile(model, samples, params)], dtype=np.float64)

    if _profile_cache is None or len(samples) == 0:
        return compute()
    return np.array(_profile_cache("adv_l2", model, samples, params.to_dict(), compute), dtype=np.float64)


def use_profile_cache(cache: Optional[Callable]) -> None:
    """Instala (ou remove, com None) o cache de perfis L2."""
    global _profile_cache
    _profile_cache = cache
