"""
Mapeamento semântico dos cenários de ataque e das composições.

Este módulo é a fonte da verdade para:
    - os cinco cenários de MemInf (acesso ao modelo x tipo de dado auxiliar);
    - as quatro composições e as duas cadeias, com o nível da taxonomia
      (preparação, execução, avaliação) em que cada uma atua.

Estrutura:
    MEMINF_SETTINGS[nome] = {
        "descricao": "...",
        "access": "black_box" | "white_box" | "lira",
        "auxiliary": "shadow" | "partial",
        "adversarial": "square" | "pgd",
    }
    COMPOSITION_MAP[nome] = {
        "descricao": "...",
        "support": AttackKind, "primary": AttackKind, "level": Level,
        "chain": tupla de AttackKind ou None,
    }
"""
from enum import Enum
from typing import Optional


class AttackKind(str, Enum):
    ADV = "adv"
    MEMINF = "meminf"
    ATTRINF = "attrinf"
    PROPINF = "propinf"


class Level(str, Enum):
    PREPARATION = "preparation"
    EXECUTION = "execution"
    EVALUATION = "evaluation"
    CHAIN = "chain"


class MemInfSetting(str, Enum):
    BB_SHADOW = "mb_ds"
    BB_PARTIAL = "mb_dp"
    WB_SHADOW = "mw_ds"
    WB_PARTIAL = "mw_dp"
    LIRA_SHADOW = "lira_ds"


class FeatureSetting(str, Enum):
    """Conjunto de features que o modelo de ataque de MemInf consome."""
    BB = "bb"
    WB = "wb"


MEMINF_SETTINGS = {
    MemInfSetting.BB_SHADOW: {
        "descricao": "Caixa-preta (posteriors) com modelo sombra treinado em D_aux^S",
        "access": "black_box",
        "auxiliary": "shadow",
        "adversarial": "square",
    },
    MemInfSetting.BB_PARTIAL: {
        "descricao": """
        Caixa-preta com parte do treino do alvo (D_aux^P).
        Não treina modelo sombra: consulta o alvo diretamente.
        """,
        "access": "black_box",
        "auxiliary": "partial",
        "adversarial": "square",
    },
    MemInfSetting.WB_SHADOW: {
        "descricao": "Caixa-branca (loss, gradientes, rótulo) com modelo sombra em D_aux^S",
        "access": "white_box",
        "auxiliary": "shadow",
        "adversarial": "pgd",
    },
    MemInfSetting.WB_PARTIAL: {
        "descricao": "Caixa-branca com parte do treino do alvo (D_aux^P)",
        "access": "white_box",
        "auxiliary": "partial",
        "adversarial": "pgd",
    },
    MemInfSetting.LIRA_SHADOW: {
        "descricao": """
        LiRA: razão de verossimilhança por amostra entre gaussianas ajustadas
        sobre modelos sombra que incluem (in) ou não (out) a amostra.
        """,
        "access": "lira",
        "auxiliary": "shadow",
        "adversarial": "square",
    },
}


COMPOSITION_MAP = {
    "propinf2attrinf": {
        "descricao": "PropInf reamostra o dado auxiliar do AttrInf (nível de preparação)",
        "support": AttackKind.PROPINF,
        "primary": AttackKind.ATTRINF,
        "level": Level.PREPARATION,
        "chain": None,
    },
    "adv2meminf": {
        "descricao": "Distância L2 adversarial como feature extra do MemInf (execução)",
        "support": AttackKind.ADV,
        "primary": AttackKind.MEMINF,
        "level": Level.EXECUTION,
        "chain": None,
    },
    "adv2propinf": {
        "descricao": "Vetor de distâncias L2 concatenado às features do meta-classificador",
        "support": AttackKind.ADV,
        "primary": AttackKind.PROPINF,
        "level": Level.EXECUTION,
        "chain": None,
    },
    "propinf2meminf": {
        "descricao": "Proporção inferida calibra o score do MemInf (nível de avaliação)",
        "support": AttackKind.PROPINF,
        "primary": AttackKind.MEMINF,
        "level": Level.EVALUATION,
        "chain": None,
    },
    "adv2propinf2attrinf": {
        "descricao": "Cadeia ADV -> PropInf -> AttrInf (apenas modo empírico)",
        "support": AttackKind.ADV,
        "primary": AttackKind.ATTRINF,
        "level": Level.CHAIN,
        "chain": (AttackKind.ADV, AttackKind.PROPINF, AttackKind.ATTRINF),
    },
    "adv2propinf2meminf": {
        "descricao": "Cadeia ADV -> PropInf -> MemInf",
        "support": AttackKind.ADV,
        "primary": AttackKind.MEMINF,
        "level": Level.CHAIN,
        "chain": (AttackKind.ADV, AttackKind.PROPINF, AttackKind.MEMINF),
    },
}


# --- Funções auxiliares ---

def get_setting(name) -> MemInfSetting:
    """
    Converte um nome (ou o próprio enum) em MemInfSetting.

    Args:
        name: Nome do cenário (ex: "mb_ds") ou MemInfSetting

    Returns:
        MemInfSetting correspondente

    Raises:
        ValueError: Se o nome não for um cenário conhecido
    """
    try:
        return MemInfSetting(name)
    except ValueError:
        raise ValueError(
            f"Cenário de MemInf desconhecido: {name}. "
            f"Valores válidos: {[s.value for s in MemInfSetting]}"
        )


def feature_setting_for(setting: MemInfSetting) -> FeatureSetting:
    """Cenários caixa-branca usam as quatro entradas; os demais, duas."""
    if MEMINF_SETTINGS[setting]["access"] == "white_box":
        return FeatureSetting.WB
    return FeatureSetting.BB


def uses_shadow(setting: MemInfSetting) -> bool:
    return MEMINF_SETTINGS[setting]["auxiliary"] == "shadow"


def adversarial_mode_for(setting: MemInfSetting) -> str:
    """Square para cenários caixa-preta (e LiRA), PGD para caixa-branca."""
    return MEMINF_SETTINGS[setting]["adversarial"]


def get_composition(name: str) -> Optional[dict]:
    """
    Retorna a entrada do COMPOSITION_MAP ou None se o nome não existir.

    Args:
        name: Nome da composição (ex: "adv2meminf")

    Returns:
        Dicionário com support, primary, level e chain
    """
    return COMPOSITION_MAP.get(name)


def list_compositions() -> list[str]:
    return list(COMPOSITION_MAP.keys())
