"""
Mecânica de DP-SGD: gradientes por amostra, clipping e contador de privacidade.

O sigma é obtido pelo contador RDP do opacus (busca binária sobre o
multiplicador de ruído até atingir o (epsilon, delta) pedido).
"""
import logging
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import torch
import torch.nn.functional as F
from opacus.accountants.utils import get_noise_multiplier
from torch.func import functional_call, grad, vmap

from config import DP_DEFAULT_CLIP_NORM, DP_DEFAULT_DELTA, DP_EPSILON_PRESETS
from exceptions import AccountingError, InvalidSpec

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DPConfig:
    """
    Parâmetros de DP-SGD.

    `noise_multiplier` fixa sigma diretamente e ignora o contador
    (modo de teste; sigma=0 reproduz o treino sem ruído).
    """
    epsilon: float
    delta: float = DP_DEFAULT_DELTA
    clip_norm: float = DP_DEFAULT_CLIP_NORM
    noise_multiplier: Optional[float] = None

    def validate(self) -> None:
        if self.epsilon <= 0:
            raise InvalidSpec(f"epsilon deve ser > 0, recebido {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise InvalidSpec(f"delta deve estar em (0, 1), recebido {self.delta}")
        if self.clip_norm <= 0:
            raise InvalidSpec(f"clip_norm deve ser > 0, recebido {self.clip_norm}")
        if self.noise_multiplier is not None and self.noise_multiplier < 0:
            raise InvalidSpec(f"noise_multiplier negativo: {self.noise_multiplier}")
        if self.epsilon not in DP_EPSILON_PRESETS:
            log.debug(f"epsilon={self.epsilon} fora dos presets {DP_EPSILON_PRESETS}")

    def to_dict(self) -> dict:
        return asdict(self)


def compute_noise_multiplier(dp: DPConfig, epochs: int, batch_size: int, n_train: int) -> float:
    """
    Sigma que garante (epsilon, delta)-DP após `epochs` épocas.

    Args:
        dp: Configuração de DP
        epochs: Número máximo de épocas (pior caso do orçamento)
        batch_size: Tamanho do lote
        n_train: Tamanho do conjunto de treino

    Returns:
        Multiplicador de ruído sigma

    Raises:
        AccountingError: Se o contador não encontrar sigma para o alvo pedido
    """
    dp.validate()
    if dp.noise_multiplier is not None:
        return float(dp.noise_multiplier)

    sample_rate = min(1.0, batch_size / max(n_train, 1))
    try:
        sigma = get_noise_multiplier(
            target_epsilon=dp.epsilon,
            target_delta=dp.delta,
            sample_rate=sample_rate,
            epochs=epochs,
            accountant="rdp",
        )
    except ValueError as e:
        raise AccountingError(
            f"Nenhum sigma atinge epsilon={dp.epsilon}, delta={dp.delta} "
            f"(q={sample_rate:.4f}, épocas={epochs}): {e}"
        ) from e
    log.info(f"Sigma para epsilon={dp.epsilon}, delta={dp.delta}: {sigma:.4f}")
    return float(sigma)


def per_sample_gradients(
    network: torch.nn.Module,
    inputs: torch.Tensor,
    targets: torch.Tensor,
) -> Dict[str, torch.Tensor]:
    """
    Gradiente da cross-entropy de cada amostra em relação a todos os parâmetros.

    Returns:
        Dicionário nome_do_parâmetro -> tensor (B, *shape_do_parâmetro)
    """
    params = {name: p.detach() for name, p in network.named_parameters()}

    def sample_loss(p, x, y):
        logits = functional_call(network, p, (x.unsqueeze(0),))
        return F.cross_entropy(logits, y.unsqueeze(0))

    return vmap(grad(sample_loss), in_dims=(None, 0, 0))(params, inputs, targets)


def clip_per_sample_gradients(
    gradients: Dict[str, torch.Tensor],
    clip_norm: float,
) -> Tuple[Dict[str, torch.Tensor], torch.Tensor]:
    """
    Limita a norma L2 (sobre todos os parâmetros) de cada gradiente por amostra.

    Args:
        gradients: Saída de per_sample_gradients
        clip_norm: Norma máxima C

    Returns:
        (gradientes cortados, norma de cada gradiente após o corte)
    """
    flat = torch.cat([g.reshape(g.shape[0], -1) for g in gradients.values()], dim=1)
    norms = flat.norm(dim=1)
    factor = clip_norm / torch.clamp(norms, min=clip_norm)
    clipped = {
        name: g * factor.view(-1, *([1] * (g.dim() - 1)))
        for name, g in gradients.items()
    }
    return clipped, norms * factor
