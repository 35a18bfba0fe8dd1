"""
Erros nomeados do toolkit.

Erros de valor (entrada inválida, dados insuficientes) herdam de ValueError;
falhas de execução herdam de RuntimeError. Todos compartilham ToolkitError
para que a CLI consiga mapear códigos de saída.
"""


class ToolkitError(Exception):
    """Base de todos os erros do toolkit."""


class InsufficientSamples(ToolkitError, ValueError):
    """Não há amostras suficientes para honrar a proporção pedida."""


class InvalidSpec(ToolkitError, ValueError):
    """Especificação de partição ou proporção inválida."""


class DisjointnessViolation(ToolkitError, ValueError):
    """Dois conjuntos que deveriam ser disjuntos compartilham amostras."""


class DivergedTraining(ToolkitError, RuntimeError):
    """A loss de treino ficou não-finita."""


class AccountingError(ToolkitError, ValueError):
    """Nenhum sigma atinge o (epsilon, delta) pedido."""


class ShapeMismatch(ToolkitError, ValueError):
    """Vetores que deveriam ter o mesmo tamanho não têm."""


class DegenerateLabels(ToolkitError, ValueError):
    """Apenas uma classe presente onde duas ou mais são necessárias."""


class MissingAuxiliary(ToolkitError, ValueError):
    """O bundle não traz os dados auxiliares exigidos pelo cenário."""


class MissingFleet(ToolkitError, ValueError):
    """A frota de modelos sombra não tem rótulos de proporção suficientes."""


class MissingPropInf(ToolkitError, ValueError):
    """A composição precisa da saída de PropInf e ela não foi fornecida."""


class InvalidPlan(ToolkitError, ValueError):
    """Plano de composição fora do conjunto permitido."""


class SchemaMismatch(ToolkitError, ValueError):
    """Manifestos com versões de schema diferentes."""


class ConfigError(ToolkitError, ValueError):
    """Configuração de experimento inválida (lista todas as violações)."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class MissingUpstream(ToolkitError, RuntimeError):
    """Um estágio foi pedido sem os artefatos do estágio anterior."""


class StageError(ToolkitError, RuntimeError):
    """Erro de módulo propagado com a atribuição do estágio."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
