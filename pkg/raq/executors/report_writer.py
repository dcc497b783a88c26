"""
Relatórios: CSV de avaliação, log de treino e planilha Excel de resumo.
"""
import logging
from pathlib import Path
from typing import Iterable, List, Mapping, Union

import pandas as pd

from ..metrics import EvalRecord, bits_per_index, bits_per_pixel
from ..untils.constants import REPORT_COLUMNS, TRAIN_LOG_COLUMNS

logger = logging.getLogger(__name__)

SUMMARY_SHEET = "Resumo"
RECORDS_SHEET = "Registros"


def to_dataframe(records: Iterable[EvalRecord]) -> pd.DataFrame:
    """Converte registros de avaliação para DataFrame, na ordem de colunas do CSV."""
    return pd.DataFrame([r.as_row() for r in records], columns=REPORT_COLUMNS)


def write_report_csv(records: Iterable[EvalRecord], path: Union[str, Path]) -> pd.DataFrame:
    df = to_dataframe(records)
    df.to_csv(path, index=False, float_format="%.8g", lineterminator="\n")
    return df


def read_report_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path)


def write_training_log(rows: List[Mapping[str, object]], path: Union[str, Path]) -> None:
    df = pd.DataFrame(list(rows), columns=TRAIN_LOG_COLUMNS)
    df.to_csv(path, index=False, float_format="%.8g", lineterminator="\n")


def read_training_log(path: Union[str, Path]) -> List[dict]:
    path = Path(path)
    if not path.is_file():
        return []
    return pd.read_csv(path).to_dict("records")


def summarize(df: pd.DataFrame, codebook_size: int, latent_positions: int, pixels: int) -> pd.DataFrame:
    """Média ± desvio por (método, K̃) sobre as sementes, com taxa e sinalização de extrapolação."""
    grouped = df.groupby(["method", "k_tilde"], sort=True)
    summary = grouped.agg(
        seeds=("seed", "nunique"),
        mse_mean=("mse", "mean"),
        mse_std=("mse", "std"),
        psnr_mean=("psnr", "mean"),
        psnr_std=("psnr", "std"),
        ssim_mean=("ssim", "mean"),
        ssim_std=("ssim", "std"),
        perplexity_mean=("perplexity", "mean"),
        usage_mean=("usage", "mean"),
    ).reset_index()
    summary = summary.fillna({"mse_std": 0.0, "psnr_std": 0.0, "ssim_std": 0.0})
    summary["bits_per_index"] = summary["k_tilde"].map(bits_per_index)
    summary["bpp"] = summary["k_tilde"].map(lambda k: bits_per_pixel(k, latent_positions, pixels))
    summary["extrapolation"] = (summary["method"] == "seq2seq") & (summary["k_tilde"] > 2 * codebook_size)
    return summary


def _autofit_columns(ws) -> None:
    for column_cells in ws.columns:
        width = max(len(str(cell.value)) if cell.value is not None else 0 for cell in column_cells)
        ws.column_dimensions[column_cells[0].column_letter].width = width + 2


def _apply_number_format(ws, headers: Iterable[str], number_format: str) -> None:
    header_to_col = {cell.value: cell.column for cell in next(ws.iter_rows(min_row=1, max_row=1))}
    for header in headers:
        col_idx = header_to_col.get(header)
        if col_idx is None:
            continue
        for column in ws.iter_cols(min_col=col_idx, max_col=col_idx, min_row=2, max_row=ws.max_row):
            for cell in column:
                cell.number_format = number_format


def write_excel_summary(df: pd.DataFrame, summary: pd.DataFrame, path: Union[str, Path]) -> None:
    """Planilha com o resumo por (método, K̃) e os registros brutos."""
    with pd.ExcelWriter(path, engine="openpyxl") as writer:
        summary.to_excel(writer, index=False, sheet_name=SUMMARY_SHEET)
        df.to_excel(writer, index=False, sheet_name=RECORDS_SHEET)

        ws = writer.sheets[SUMMARY_SHEET]
        _apply_number_format(ws, ["mse_mean", "mse_std", "ssim_mean", "ssim_std"], "0.00000")
        _apply_number_format(ws, ["psnr_mean", "psnr_std", "perplexity_mean", "usage_mean", "bits_per_index", "bpp"], "0.00")
        _autofit_columns(ws)

        ws = writer.sheets[RECORDS_SHEET]
        _apply_number_format(ws, ["mse", "ssim"], "0.00000")
        _apply_number_format(ws, ["psnr", "perplexity"], "0.00")
        _autofit_columns(ws)
    logger.debug("Resumo Excel com %d linha(s) em %s", len(summary), path)
