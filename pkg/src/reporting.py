"""
Módulo para agregação e geração de relatórios consolidados.

Recebe os resumos por modelo (latência, frequência, mAP) e, opcionalmente,
os pares com/sem dados sintéticos, e os consolida em tabelas de texto e CSV.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.errors import ReefIOError, ReefValidationError
from src.evalbench import EvalReport, ModelSummary
from src.logging_config import get_logger

logger = get_logger(__name__)

COMPARISON_COLUMNS = ["model", "inference_ms", "pipeline_hz", "map50", "map50_95"]
ABLATION_COLUMNS = ["model", "map50_s", "map50_95_s", "map50_r", "map50_95_r", "delta_map50", "delta_map50_95"]


class AccuracyPair(BaseModel):
    """mAP50 e mAP50-95 de um modelo em uma configuração de treino."""

    model_config = ConfigDict(frozen=True)

    map50: float = Field(ge=0.0, le=1.0)
    map50_95: float = Field(ge=0.0, le=1.0)

    @classmethod
    def from_report(cls, report: EvalReport) -> "AccuracyPair":
        return cls(map50=report.map50, map50_95=report.map50_95)


@dataclass(frozen=True)
class Ablation:
    """Resultados com (S) e sem (R) dados sintéticos, por modelo."""

    synthetic: Mapping[str, AccuracyPair]
    real: Mapping[str, AccuracyPair]


@dataclass(frozen=True)
class RenderedTables:
    text: str
    comparison_csv: str
    ablation_csv: Optional[str] = None


def _fmt3(value: float) -> str:
    return f"{value:.3f}"


def _csv(df: pd.DataFrame) -> str:
    return df.to_csv(index=False, lineterminator="\n")


def comparison_frame(rows: Sequence[ModelSummary]) -> pd.DataFrame:
    """Tabela de comparação de modelos com valores já formatados."""
    return pd.DataFrame(
        [
            {
                "model": row.model,
                "inference_ms": f"{row.inference_ms:.1f}",
                "pipeline_hz": f"{row.pipeline_hz:.1f}",
                "map50": _fmt3(row.map50),
                "map50_95": _fmt3(row.map50_95),
            }
            for row in rows
        ],
        columns=COMPARISON_COLUMNS,
    )


def ablation_frame(ablation: Ablation) -> pd.DataFrame:
    """
    Pares (S)/(R) na ordem dos modelos de `synthetic`.

    Raises:
        ReefValidationError: conjuntos de modelos diferentes entre S e R.
    """
    if set(ablation.synthetic) != set(ablation.real):
        missing = sorted(set(ablation.synthetic) ^ set(ablation.real))
        raise ReefValidationError(f"Ablação com modelos sem par: {', '.join(missing)}")
    records = []
    for model, s in ablation.synthetic.items():
        r = ablation.real[model]
        records.append(
            {
                "model": model,
                "map50_s": _fmt3(s.map50),
                "map50_95_s": _fmt3(s.map50_95),
                "map50_r": _fmt3(r.map50),
                "map50_95_r": _fmt3(r.map50_95),
                "delta_map50": f"{s.map50 - r.map50:+.3f}",
                "delta_map50_95": f"{s.map50_95 - r.map50_95:+.3f}",
            }
        )
    return pd.DataFrame(records, columns=ABLATION_COLUMNS)


def render_tables(rows: Sequence[ModelSummary], ablation: Optional[Ablation] = None) -> RenderedTables:
    """
    Gera o relatório em texto e CSV.

    Args:
        rows: Resumos por modelo, na ordem de exibição.
        ablation: Pares com/sem sintético; seção omitida quando None.

    Returns:
        RenderedTables com texto, CSV de comparação e CSV de ablação.

    Raises:
        ReefValidationError: nenhum modelo ou ablação com chaves divergentes.
    """
    if not rows:
        raise ReefValidationError("Relatório requer ao menos um modelo")
    comparison = comparison_frame(rows)
    lines = ["Model comparison", ", ".join(COMPARISON_COLUMNS)]
    lines += [", ".join(record) for record in comparison.itertuples(index=False, name=None)]

    ablation_csv = None
    if ablation is not None:
        table = ablation_frame(ablation)
        lines += ["", "Synthetic-data ablation: with (S) vs without (R)"]
        for record in table.itertuples(index=False):
            lines.append(
                f"{record.model} (S) {record.map50_s}/{record.map50_95_s} vs (R) {record.map50_r}/{record.map50_95_r}"
            )
        ablation_csv = _csv(table)

    return RenderedTables(text="\n".join(lines) + "\n", comparison_csv=_csv(comparison), ablation_csv=ablation_csv)


def _read_json(path: Path | str):
    source = Path(path)
    try:
        return json.loads(source.read_text(encoding="utf-8"))
    except OSError as e:
        raise ReefIOError(f"Falha ao ler {source}: {e}") from e
    except json.JSONDecodeError as e:
        raise ReefValidationError(f"{source}:{e.lineno}: JSON inválido ({e.msg})") from e


def load_model_summaries(path: Path | str) -> list[ModelSummary]:
    """Array JSON de {model, inference_ms, pipeline_hz, map50, map50_95}."""
    data = _read_json(path)
    if not isinstance(data, list):
        raise ReefValidationError(f"{path}: esperado um array de modelos")
    try:
        return [ModelSummary.model_validate(item) for item in data]
    except ValidationError as e:
        raise ReefValidationError(f"{path}: {e}") from e


def load_ablation(path: Path | str) -> Ablation:
    """Objeto JSON {"synthetic": {modelo: {map50, map50_95}}, "real": {...}}."""
    data = _read_json(path)
    if not isinstance(data, dict) or not {"synthetic", "real"} <= set(data):
        raise ReefValidationError(f"{path}: esperado objeto com 'synthetic' e 'real'")
    try:
        return Ablation(
            synthetic={k: AccuracyPair.model_validate(v) for k, v in data["synthetic"].items()},
            real={k: AccuracyPair.model_validate(v) for k, v in data["real"].items()},
        )
    except ValidationError as e:
        raise ReefValidationError(f"{path}: {e}") from e
