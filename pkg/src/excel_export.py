"""
Excel export of the report tables.

One workbook per report: a summary sheet, the model comparison and, when
available, the synthetic-data ablation. Metric columns are stored as numbers
with a fixed display format, the best value of each metric is bold and
ablation deltas are colored by sign.
"""

from io import BytesIO
from pathlib import Path
from typing import Any, Optional

import pandas as pd
from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.worksheet.worksheet import Worksheet

from src.errors import ReefIOError
from src.evalbench import ModelSummary
from src.logging_config import get_logger
from src.reporting import Ablation, ablation_frame, comparison_frame

logger = get_logger(__name__)

# column -> Excel number format
NUMBER_FORMATS = {
    "inference_ms": "0.0",
    "pipeline_hz": "0.0",
    "map50": "0.000",
    "map50_95": "0.000",
    "map50_s": "0.000",
    "map50_95_s": "0.000",
    "map50_r": "0.000",
    "map50_95_r": "0.000",
    "delta_map50": "+0.000;-0.000;0.000",
    "delta_map50_95": "+0.000;-0.000;0.000",
}
LOWER_IS_BETTER = {"inference_ms"}
DELTA_COLUMNS = {"delta_map50", "delta_map50_95"}
MAX_COLUMN_WIDTH = 40


class ExcelExporter:
    """Workbook builder for report tables."""

    HEADER_BG = "0B5563"  # teal
    HEADER_FG = "FFFFFF"
    BORDER_COLOR = "C9D6D8"
    GAIN_FG = "1E7B34"
    LOSS_FG = "B3261E"

    def __init__(self):
        self.workbook = Workbook()
        self.workbook.remove(self.workbook.active)

    def _style(self, ws: Worksheet, n_rows: int, n_cols: int) -> None:
        side = Side(style="thin", color=self.BORDER_COLOR)
        border = Border(left=side, right=side, top=side, bottom=side)
        header_fill = PatternFill(start_color=self.HEADER_BG, end_color=self.HEADER_BG, fill_type="solid")
        for row in ws.iter_rows(min_row=1, max_row=n_rows, max_col=n_cols):
            for cell in row:
                cell.border = border
                if cell.row == 1:
                    cell.font = Font(bold=True, color=self.HEADER_FG)
                    cell.fill = header_fill
                    cell.alignment = Alignment(horizontal="center", vertical="center")
        for column in ws.iter_cols(min_row=1, max_row=n_rows, max_col=n_cols):
            width = max((len(str(c.value)) for c in column if c.value is not None), default=0)
            ws.column_dimensions[column[0].column_letter].width = min(width + 2, MAX_COLUMN_WIDTH)

    def _mark_metrics(self, ws: Worksheet, df: pd.DataFrame) -> None:
        for c_idx, name in enumerate(df.columns, 1):
            cells = [ws.cell(row=r, column=c_idx) for r in range(2, len(df) + 2)]
            if name in DELTA_COLUMNS:
                for cell in cells:
                    if cell.value:
                        cell.font = Font(color=self.GAIN_FG if cell.value > 0 else self.LOSS_FG)
            elif name in NUMBER_FORMATS and cells:
                pick = min if name in LOWER_IS_BETTER else max
                best = pick(cell.value for cell in cells)
                for cell in cells:
                    if cell.value == best:
                        cell.font = Font(bold=True)

    def add_dataframe_sheet(self, df: pd.DataFrame, sheet_name: str, freeze_header: bool = True) -> Worksheet:
        """
        Add a dataframe as a formatted sheet.

        Columns listed in NUMBER_FORMATS hold formatted strings in the report
        frames; they are written back as floats so spreadsheets can sort and chart them.

        Returns:
            Created worksheet
        """
        ws = self.workbook.create_sheet(title=sheet_name)
        ws.append([str(name) for name in df.columns])
        for record in df.itertuples(index=False):
            ws.append([float(v) if name in NUMBER_FORMATS else v for name, v in zip(df.columns, record)])
        for c_idx, name in enumerate(df.columns, 1):
            fmt = NUMBER_FORMATS.get(name)
            if fmt:
                for r in range(2, len(df) + 2):
                    ws.cell(row=r, column=c_idx).number_format = fmt

        self._style(ws, len(df) + 1, len(df.columns))
        self._mark_metrics(ws, df)
        if freeze_header:
            ws.freeze_panes = "A2"
        return ws

    def add_summary_sheet(self, summary_data: dict[str, Any], sheet_name: str = "Resumo") -> Worksheet:
        """Add a two-column key/value sheet."""
        ws = self.workbook.create_sheet(title=sheet_name)
        ws.append(["Métrica", "Valor"])
        for key, value in summary_data.items():
            ws.append([key, value])
        self._style(ws, len(summary_data) + 1, 2)
        return ws

    def save_to_bytes(self) -> BytesIO:
        buffer = BytesIO()
        self.workbook.save(buffer)
        buffer.seek(0)
        return buffer

    def save_to_file(self, filename: Path | str) -> None:
        try:
            self.workbook.save(filename)
        except OSError as e:
            raise ReefIOError(f"Falha ao gravar {filename}: {e}") from e
        logger.info(f"Planilha gravada em {filename}")


def create_report_export(rows: list[ModelSummary], ablation: Optional[Ablation] = None) -> BytesIO:
    """
    Build the report workbook.

    Args:
        rows: Per-model summaries
        ablation: Optional with/without synthetic data pairs

    Returns:
        BytesIO buffer with the .xlsx file
    """
    exporter = ExcelExporter()
    summary: dict[str, Any] = {"Modelos": len(rows)}
    if rows:
        best = max(rows, key=lambda r: r.map50_95)
        summary["Melhor mAP50-95"] = f"{best.model} ({best.map50_95:.3f})"
        fastest = min(rows, key=lambda r: r.inference_ms)
        summary["Menor latência"] = f"{fastest.model} ({fastest.inference_ms:.1f} ms)"
    if ablation is not None:
        gains = sum(1 for m, s in ablation.synthetic.items() if m in ablation.real and s.map50 > ablation.real[m].map50)
        summary["Ganho mAP50 com sintético"] = f"{gains}/{len(ablation.synthetic)}"
    exporter.add_summary_sheet(summary)
    exporter.add_dataframe_sheet(comparison_frame(rows), "Comparação de Modelos")
    if ablation is not None:
        exporter.add_dataframe_sheet(ablation_frame(ablation), "Ablação Sintético")
    return exporter.save_to_bytes()
