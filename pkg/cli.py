"""
Linha de comando do toolkit.

Uso:
    python cli.py all --config experiments/desk.toml
    python cli.py train --config experiments/desk.toml --workers 4
    python cli.py attack --config experiments/desk.toml --stages attack,compose --seed 3

Códigos de saída: 0 sucesso, 2 configuração inválida, 3 artefato de estágio
anterior ausente, 1 qualquer outro erro.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from config import LOG_FORMAT, LOG_LEVEL
from exceptions import ConfigError, MissingUpstream
from service.experiment_config import load_config
from service.pipeline_service import STAGES, run_pipeline

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_MISSING_UPSTREAM = 3


def _stage_list(text: str) -> List[str]:
    stages = [s.strip() for s in text.split(",") if s.strip()]
    unknown = [s for s in stages if s not in STAGES]
    if unknown:
        raise argparse.ArgumentTypeError(f"estágios desconhecidos: {unknown}; válidos: {list(STAGES)}")
    return stages


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cli.py",
        description="Composição de ataques de ML: prepara dados, treina, ataca, compõe e relata.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in (*STAGES, "all"):
        sub = subparsers.add_parser(command, help="todos os estágios" if command == "all" else f"estágio {command}")
        sub.add_argument("--config", type=Path, required=True, help="arquivo TOML do experimento")
        sub.add_argument("--stages", type=_stage_list, default=None,
                         help="lista separada por vírgulas (sobrepõe o subcomando)")
        sub.add_argument("--workers", type=int, default=None, help="processos para treinar as frotas")
        sub.add_argument("--seed", type=int, default=None, help="semente global (sobrepõe a configuração)")
        sub.add_argument("--out", type=Path, default=None, help="diretório de artefatos")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=LOG_LEVEL, format=LOG_FORMAT)
    args = build_parser().parse_args(argv)

    if args.stages is not None:
        stages = args.stages
    elif args.command == "all":
        stages = list(STAGES)
    else:
        stages = [args.command]

    try:
        config = load_config(args.config).with_overrides(seed=args.seed, workers=args.workers, output_dir=args.out)
        run = run_pipeline(config, stages)
    except ConfigError as e:
        for error in e.errors:
            log.error(f"Configuração: {error}")
        return EXIT_CONFIG
    except MissingUpstream as e:
        log.error(str(e))
        return EXIT_MISSING_UPSTREAM
    except Exception as e:
        log.error(f"Falha: {e}")
        return EXIT_ERROR

    log.info(f"Artefatos em {run.directory}")
    for path in run.report_files:
        log.info(f"  {path}")
    return run.status


if __name__ == "__main__":
    sys.exit(main())
