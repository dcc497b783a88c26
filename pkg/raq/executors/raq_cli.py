"""
Interface de linha de comando do RAQ.

Subcomandos: train, adapt, eval, gen-data, inspect-codebook.
Códigos de saída: 0 sucesso, 2 caminho/checkpoint ausente, 3 treino divergiu,
4 configuração ou método inválido.
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from ..config import DEFAULT_RUN_NAME, ExperimentConfig, add_config_arguments, config_from_args, get_default_paths, load_config
from ..extractors.idx_reader import write_idx
from ..extractors.synthetic_shapes import gen_synthetic_shapes
from ..quantizers.vq_core import load_codebook
from ..untils.constants import ADAPT_METHODS, EVAL_METHODS
from ..untils.errors import RaqError, TrainingDivergedError
from ..untils.log_utils import configure_logging
from .adaptation import cmd_adapt, codebook_stats
from .evaluation import EVAL_BATCH_SIZE, cmd_eval, write_eval_manifest
from .report_writer import summarize, write_excel_summary, write_report_csv
from .training import checkpoint_dirs, cmd_train_sweep

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISSING = 2
EXIT_DIVERGED = 3
EXIT_INVALID = 4


def _int_list(text: str) -> List[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="raq",
        description="Quantização com taxa adaptável: treino, adaptação de codebooks e avaliação taxa–distorção.",
    )
    parser.add_argument("--debug", action="store_true", help="Mostra mensagens de depuração")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="Treina um modelo VQ com adaptador de taxa")
    train.add_argument("--config", default=None, help="Arquivo de configuração chave = valor")
    train.add_argument("--output", default=None, help="Diretório do checkpoint")
    train.add_argument("--seeds", type=int, default=1, help="Número de sementes (seed, seed+1, ...)")
    train.add_argument("--resume", action="store_true", help="Continua do checkpoint existente em --output")
    add_config_arguments(train)

    adapt = sub.add_parser("adapt", help="Gera um codebook adaptado de tamanho K̃")
    adapt.add_argument("--checkpoint", required=True, help="Diretório do checkpoint")
    adapt.add_argument("--method", required=True, choices=ADAPT_METHODS)
    adapt.add_argument("--k-tilde", type=int, required=True, help="Tamanho alvo K̃")
    adapt.add_argument("--output", required=True, help="Arquivo RQCB de saída")
    adapt.add_argument("--seed", type=int, default=None, help="Semente (padrão: a do checkpoint)")

    evaluate = sub.add_parser("eval", help="Avalia checkpoints em vários tamanhos de codebook")
    evaluate.add_argument("--checkpoint", nargs="+", required=True,
                          help="Diretórios de checkpoint (ou de uma varredura com seed_*)")
    evaluate.add_argument("--methods", default="seq2seq", help=f"Lista separada por vírgula: {','.join(EVAL_METHODS)}")
    evaluate.add_argument("--sizes", type=_int_list, default=None, help="K̃ separados por vírgula (padrão: eval_sizes)")
    evaluate.add_argument("--codebooks", nargs="*", default=[], help="Arquivos RQCB adicionais")
    evaluate.add_argument("--output", required=True, help="CSV de saída")
    evaluate.add_argument("--excel", default=None, help="Planilha Excel de resumo (opcional)")
    evaluate.add_argument("--no-cache", action="store_true", help="Regenera o codebook adaptado a cada lote")
    evaluate.add_argument("--dump-recons", default=None, help="Diretório para PNGs das reconstruções")
    evaluate.add_argument("--batch-size", type=int, default=EVAL_BATCH_SIZE)

    gen = sub.add_parser("gen-data", help="Gera o conjunto sintético como arquivo IDX")
    gen.add_argument("--n", type=int, default=1000)
    gen.add_argument("--size", type=int, default=16)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--output", required=True, help="Arquivo IDX de saída")

    inspect = sub.add_parser("inspect-codebook", help="Mostra estatísticas de um arquivo RQCB")
    inspect.add_argument("path")
    return parser


def _run_train(args) -> int:
    base = load_config(args.config) if args.config else ExperimentConfig()
    config = config_from_args(args, base)
    output = Path(args.output) if args.output else Path(get_default_paths()["runs"]) / DEFAULT_RUN_NAME
    results = cmd_train_sweep(config, output, args.seeds, resume=args.resume)
    for result in results:
        print(f"[OK] Treino de {result.steps} passo(s) salvo em: {result.output_dir}")
    return EXIT_OK


def _run_adapt(args) -> int:
    adapted = cmd_adapt(args.checkpoint, args.method, args.k_tilde, args.output, seed=args.seed)
    print(f"[OK] Codebook {args.method} com K̃={adapted.size} salvo em: {os.path.abspath(args.output)}")
    return EXIT_OK


def _run_eval(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    checkpoints = [path for item in args.checkpoint for path in checkpoint_dirs(item)]
    run, loaded = cmd_eval(
        checkpoints,
        methods,
        sizes=args.sizes,
        codebook_files=args.codebooks,
        use_cache=not args.no_cache,
        dump_dir=args.dump_recons,
        batch_size=args.batch_size,
    )
    if not run.records:
        print("[AVISO] Nenhuma combinação (método, K̃) compatível para avaliar.")
        return EXIT_OK
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    df = write_report_csv(run.records, output)
    config = loaded[0].config
    write_eval_manifest(output.with_name(output.stem + "_manifest.txt"), checkpoints, run, config, not args.no_cache)
    if args.excel:
        summary = summarize(df, config.codebook_size, config.latent_positions, config.pixels)
        write_excel_summary(df, summary, args.excel)
        print(f"[OK] Resumo Excel em: {os.path.abspath(args.excel)}")
    print(f"[OK] Gerado CSV com {len(df)} linha(s) em: {output.resolve()}")
    return EXIT_OK


def _run_gen_data(args) -> int:
    images = gen_synthetic_shapes(args.n, args.size, args.seed)
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    write_idx(images, output)
    print(f"[OK] {args.n} imagem(ns) {args.size}x{args.size} gravadas em: {output.resolve()}")
    return EXIT_OK


def _run_inspect(args) -> int:
    stats = codebook_stats(load_codebook(args.path))
    for key, value in stats.items():
        print(f"{key}: {value:.6g}" if isinstance(value, float) else f"{key}: {value}")
    return EXIT_OK


COMMANDS = {
    "train": _run_train,
    "adapt": _run_adapt,
    "eval": _run_eval,
    "gen-data": _run_gen_data,
    "inspect-codebook": _run_inspect,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Função principal do programa."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(debug=args.debug)
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        logger.error("Caminho não encontrado: %s", exc)
        return EXIT_MISSING
    except TrainingDivergedError as exc:
        logger.error("%s", exc)
        return EXIT_DIVERGED
    except RaqError as exc:
        logger.error("%s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
