"""
Planos de composição e o resultado comum das composições.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from config import SCHEMA_VERSION
from exceptions import InvalidPlan
from taxonomy import COMPOSITION_MAP, AttackKind, Level

log = logging.getLogger(__name__)

MODES = ("empirical", "theoretical")


def allowed_plans() -> list:
    """Tuplas (suporte, primário, nível) aceitas, em texto."""
    return sorted(
        f"({e['support'].value}, {e['primary'].value}, {e['level'].value})"
        for e in COMPOSITION_MAP.values()
    )


@dataclass(frozen=True)
class CompositionPlan:
    support_attack: AttackKind
    primary_attack: AttackKind
    level: Level
    mode: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "support_attack", AttackKind(self.support_attack))
        object.__setattr__(self, "primary_attack", AttackKind(self.primary_attack))
        object.__setattr__(self, "level", Level(self.level))

    @property
    def name(self) -> Optional[str]:
        for name, entry in COMPOSITION_MAP.items():
            if (entry["support"], entry["primary"], entry["level"]) == (self.support_attack, self.primary_attack, self.level):
                return name
        return None

    def validate(self) -> None:
        """
        Raises:
            InvalidPlan: Tupla (suporte, primário, nível) fora do mapa ou modo inválido
        """
        if self.name is None:
            raise InvalidPlan(
                f"Plano ({self.support_attack.value}, {self.primary_attack.value}, {self.level.value}) "
                f"não permitido. Permitidos: {allowed_plans()}"
            )
        if self.mode is not None and self.mode not in MODES:
            raise InvalidPlan(f"Modo {self.mode} inválido. Válidos: {MODES}")
        if self.mode is not None and self.name != "propinf2attrinf":
            raise InvalidPlan(f"Modo só se aplica a propinf2attrinf, recebido em {self.name}")

    @classmethod
    def from_name(cls, name: str, mode: Optional[str] = None) -> "CompositionPlan":
        entry = COMPOSITION_MAP.get(name)
        if entry is None:
            raise InvalidPlan(f"Composição desconhecida: {name}. Válidas: {sorted(COMPOSITION_MAP)}")
        plan = cls(entry["support"], entry["primary"], entry["level"], mode)
        plan.validate()
        return plan

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "support_attack": self.support_attack.value,
            "primary_attack": self.primary_attack.value,
            "level": self.level.value,
            "mode": self.mode,
        }


@dataclass(frozen=True, eq=False)
class CompositionOutcome:
    """
    Origem e composição lado a lado.

    `diagnostics` guarda valores escalares que vão para o manifesto;
    `arrays` guarda vetores por amostra (não serializados no manifesto).
    """
    plan: CompositionPlan
    origin: Any
    composition: Any
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    arrays: Dict[str, Any] = field(default_factory=dict)

    def deltas(self) -> Dict[str, float]:
        return {
            name: self.composition.metrics[name] - self.origin.metrics[name]
            for name in sorted(self.origin.metrics)
            if name in self.composition.metrics
        }

    def manifest(self, **context) -> dict:
        """Manifesto da execução: plano, métricas de origem e composição, deltas e contexto."""
        return {
            "schema_version": SCHEMA_VERSION,
            "plan": self.plan.to_dict(),
            "origin": dict(sorted(self.origin.metrics.items())),
            "composition": dict(sorted(self.composition.metrics.items())),
            "delta": self.deltas(),
            "diagnostics": self.diagnostics,
            **context,
        }
