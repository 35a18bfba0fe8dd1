"""Camada de serviço - Interface pública para rodar e inspecionar experimentos."""
from service.experiment_config import ExperimentConfig, load_config, validate_config
from service.pipeline_service import STAGES, list_artifacts, run_pipeline

__all__ = [
    "ExperimentConfig",
    "STAGES",
    "list_artifacts",
    "load_config",
    "run_pipeline",
    "validate_config",
]
