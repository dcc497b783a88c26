#!/usr/bin/env python3
"""
Execução ultra simples: treina o modelo padrão e avalia os métodos principais.
Uso: python -m raq.executors.processar_simples [passos]
Sem argumento, usa o número de passos da configuração padrão.
"""
import os
import sys
from datetime import datetime

from ..config import get_default_paths
from .raq_cli import main


def main_simples(argv=None) -> int:
    """Treino + avaliação com a configuração padrão e saídas com data no nome."""
    argv = sys.argv[1:] if argv is None else argv
    print("RAQ - quantização com taxa adaptável")
    print("=" * 40)

    paths = get_default_paths()
    data_atual = datetime.now().strftime("%Y%m%d_%H%M")
    run_dir = os.path.join(paths["runs"], f"raq_{data_atual}")
    os.makedirs(paths["reports"], exist_ok=True)
    csv_path = os.path.join(paths["reports"], f"avaliacao_{data_atual}.csv")
    excel_path = os.path.join(paths["reports"], f"avaliacao_{data_atual}.xlsx")

    train_args = ["train", "--output", run_dir]
    if argv:
        train_args += ["--steps", argv[0]]

    print(f"Checkpoint: {run_dir}")
    print(f"Relatório: {csv_path}")
    print("-" * 40)

    exit_code = main(train_args)
    if exit_code != 0:
        return exit_code
    return main([
        "eval",
        "--checkpoint", run_dir,
        "--methods", "seq2seq,model_based,random_subset",
        "--output", csv_path,
        "--excel", excel_path,
    ])


if __name__ == "__main__":
    try:
        exit_code = main_simples()
        if exit_code == 0:
            print("\nProcessamento concluído com sucesso!")
        else:
            print(f"\nProcessamento falhou com código: {exit_code}")
        sys.exit(exit_code)
    except KeyboardInterrupt:
        print("\nProcessamento interrompido pelo usuário.")
        sys.exit(1)
