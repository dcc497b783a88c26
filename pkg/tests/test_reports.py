"""
Testes dos relatórios: CSV de avaliação, log de treino e planilha de resumo.
"""
import pandas as pd
import pytest

from raq.executors.report_writer import (
    read_report_csv,
    read_training_log,
    summarize,
    to_dataframe,
    write_excel_summary,
    write_report_csv,
    write_training_log,
)
from raq.metrics import EvalRecord
from raq.untils.constants import REPORT_COLUMNS, TRAIN_LOG_COLUMNS


def _records():
    return [
        EvalRecord(8, "seq2seq", 0.02, 17.0, 0.70, 6.5, 8, 0),
        EvalRecord(8, "seq2seq", 0.04, 14.0, 0.60, 5.5, 7, 1),
        EvalRecord(128, "seq2seq", 0.01, 20.0, 0.80, 90.0, 100, 0),
        EvalRecord(16, "dkm", 0.03, 15.2, 0.65, 12.0, 16, 0),
    ]


class TestReportCsv:
    def test_header_and_order(self, tmp_path):
        path = tmp_path / "eval.csv"
        write_report_csv(_records(), path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == ",".join(REPORT_COLUMNS)
        assert lines[1] == "8,seq2seq,0.02,17,0.7,6.5,8,0"
        assert len(lines) == 5

    def test_read_back(self, tmp_path):
        write_report_csv(_records(), tmp_path / "eval.csv")
        df = read_report_csv(tmp_path / "eval.csv")
        pd.testing.assert_frame_equal(df, to_dataframe(_records()), check_dtype=False)

    def test_empty_records_keep_header(self, tmp_path):
        write_report_csv([], tmp_path / "eval.csv")
        assert (tmp_path / "eval.csv").read_text(encoding="utf-8").strip() == ",".join(REPORT_COLUMNS)


class TestTrainingLog:
    def test_roundtrip(self, tmp_path):
        rows = [{"step": 0, "k_tilde": 12, "loss_vq": 0.5, "loss_raq": 0.6, "recon_vq": 0.1,
                 "recon_raq": 0.2, "perplexity_vq": 3.0, "perplexity_raq": 2.5}]
        write_training_log(rows, tmp_path / "log.csv")
        assert (tmp_path / "log.csv").read_text(encoding="utf-8").splitlines()[0] == ",".join(TRAIN_LOG_COLUMNS)
        assert read_training_log(tmp_path / "log.csv") == rows

    def test_missing_log_is_empty(self, tmp_path):
        assert read_training_log(tmp_path / "nada.csv") == []


class TestSummary:
    def test_groups_over_seeds(self):
        summary = summarize(to_dataframe(_records()), codebook_size=32, latent_positions=16, pixels=256)
        row = summary[(summary["method"] == "seq2seq") & (summary["k_tilde"] == 8)].iloc[0]
        assert row["seeds"] == 2
        assert row["mse_mean"] == pytest.approx(0.03)
        assert row["psnr_std"] == pytest.approx(pd.Series([17.0, 14.0]).std())
        assert row["bits_per_index"] == pytest.approx(3.0)
        assert row["bpp"] == pytest.approx(16 * 3 / 256)

    def test_single_seed_has_zero_std(self):
        summary = summarize(to_dataframe(_records()), 32, 16, 256)
        assert summary[summary["method"] == "dkm"]["mse_std"].iloc[0] == 0.0

    def test_extrapolation_flag(self):
        summary = summarize(to_dataframe(_records()), 32, 16, 256)
        flagged = summary[summary["extrapolation"]]
        assert list(zip(flagged["method"], flagged["k_tilde"])) == [("seq2seq", 128)]


class TestExcelSummary:
    def test_sheets_and_formats(self, tmp_path):
        df = to_dataframe(_records())
        path = tmp_path / "resumo.xlsx"
        write_excel_summary(df, summarize(df, 32, 16, 256), path)
        sheets = pd.read_excel(path, sheet_name=None, engine="openpyxl")
        assert set(sheets) == {"Resumo", "Registros"}
        assert len(sheets["Registros"]) == 4
        assert len(sheets["Resumo"]) == 3

        from openpyxl import load_workbook

        ws = load_workbook(path)["Registros"]
        headers = [cell.value for cell in ws[1]]
        assert ws.cell(row=2, column=headers.index("mse") + 1).number_format == "0.00000"
        assert ws.cell(row=2, column=headers.index("psnr") + 1).number_format == "0.00"
