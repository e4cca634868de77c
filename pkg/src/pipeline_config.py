"""
Configuração do pipeline: arquivo `chave: valor` plano + flags da CLI.

O arquivo é lido com yaml.safe_load; intervalos são listas de dois
elementos (`camera_tilt_deg: [10, 25]`). Mapeamentos aninhados são
rejeitados. Flags da linha de comando sempre vencem o arquivo.
"""

import os
from pathlib import Path
from typing import Any, Literal, Mapping, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from config.settings import settings
from src.errors import ReefIOError, ReefValidationError
from src.logging_config import get_logger
from src.oystermesh import OysterDistribution
from src.scenegen import CameraConfig, Region

logger = get_logger(__name__)

Range = tuple[float, float]
IntRange = tuple[int, int]

# Campos que não alteram nenhum artefato: ficam fora do eco gravado nos manifests
RUNTIME_ONLY_FIELDS = {"threads", "out", "concurrency"}


class PipelineConfig(BaseModel):
    """Parâmetros de todos os estágios, com defaults de campo."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(0, ge=0)
    scenes: int = Field(10, ge=0)
    oysters_per_scene: IntRange = (20, 80)
    region_m: Range = (1.0, 1.0)
    min_spacing_m: float = Field(0.0, ge=0.0)
    max_oyster_tilt_deg: float = Field(15.0, ge=0.0, lt=90.0)

    camera_height_m: Range = (0.4, 1.0)
    camera_tilt_deg: Range = (10.0, 25.0)
    camera_yaw_deg: Range = (0.0, 360.0)
    image_width: int = Field(640, gt=0)
    image_height: int = Field(480, gt=0)
    hfov_deg: float = Field(60.0, gt=0.0, lt=180.0)

    oyster_length_cm: Range = (5.0, 12.0)
    oyster_width_cm: Range = (3.5, 8.0)
    oyster_height_cm: Range = (1.5, 4.0)
    oyster_layers: IntRange = (8, 8)
    samples_per_perimeter: IntRange = (16, 16)
    roughness_amp_cm: Range = (0.0, 0.0)
    knot_style: Literal["clamped", "uniform"] = "clamped"

    near_m: float = Field(0.05, gt=0.0)
    max_depth_m: float = Field(2.0, gt=0.0)
    include_ground: bool = False
    mask_vis: bool = False

    backend_url: Optional[str] = None
    prompts_dir: Optional[str] = None
    positive_prompt: Optional[str] = None
    negative_prompt: Optional[str] = None
    denoise_strength: float = Field(0.75, ge=0.0, le=1.0)
    include_preview: bool = False
    concurrency: Optional[int] = Field(None, ge=1)

    real_train_frac: float = Field(0.30, ge=0.0, le=1.0)
    min_pixels: int = Field(25, ge=1)
    model: str = "yolov10l.pt"
    max_det: int = Field(300, ge=1)

    out: str = "out"
    threads: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _check_ranges(self) -> "PipelineConfig":
        lo, hi = self.oysters_per_scene
        if lo < 0 or lo > hi:
            raise ValueError(f"oysters_per_scene malformado: {self.oysters_per_scene}")
        if min(self.region_m) <= 0:
            raise ValueError(f"region_m deve ter lados positivos: {self.region_m}")
        # Monta os modelos derivados para validar seus intervalos já na carga
        try:
            self.camera_config()
            self.oyster_distribution()
        except ValidationError as e:
            raise ValueError(e.errors()[0]["msg"]) from e
        return self

    @property
    def worker_threads(self) -> int:
        return self.threads or os.cpu_count() or 1

    def region(self) -> Region:
        return Region.centered(*self.region_m)

    def camera_config(self) -> CameraConfig:
        return CameraConfig(
            height_m=self.camera_height_m,
            tilt_deg=self.camera_tilt_deg,
            yaw_deg=self.camera_yaw_deg,
            width=self.image_width,
            height=self.image_height,
            hfov_deg=self.hfov_deg,
            look_at=self.region().center,
        )

    def oyster_distribution(self) -> OysterDistribution:
        return OysterDistribution(
            length_cm=self.oyster_length_cm,
            width_cm=self.oyster_width_cm,
            height_cm=self.oyster_height_cm,
            num_layers=self.oyster_layers,
            samples_per_perimeter=self.samples_per_perimeter,
            roughness_amp=self.roughness_amp_cm,
            knot_style=self.knot_style,
        )

    def resolved_backend_url(self) -> Optional[str]:
        return self.backend_url or settings.backend.url

    def echo(self) -> dict[str, Any]:
        """Configuração efetiva gravada nos manifests (sem campos só de execução)."""
        return self.model_dump(mode="json", exclude=RUNTIME_ONLY_FIELDS)


def read_config_file(path: Path | str) -> dict[str, Any]:
    """
    Lê um arquivo `chave: valor` plano.

    Raises:
        ReefIOError: arquivo ilegível.
        ReefValidationError: YAML inválido, documento não-mapeamento ou valor aninhado.
    """
    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as e:
        raise ReefIOError(f"Falha ao ler configuração {source}: {e}") from e
    try:
        loaded = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f":{mark.line + 1}" if mark is not None else ""
        raise ReefValidationError(f"{source}{where}: YAML inválido") from e
    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise ReefValidationError(f"{source}: esperado um mapeamento chave: valor")
    for key, value in loaded.items():
        if isinstance(value, dict):
            raise ReefValidationError(f"{source}: '{key}' é aninhado; o formato é plano")
    return loaded


def load_pipeline_config(
    path: Optional[Path | str] = None, overrides: Optional[Mapping[str, Any]] = None
) -> PipelineConfig:
    """
    Arquivo (opcional) + overrides; valores None nos overrides são ignorados.

    Raises:
        ReefValidationError: chave desconhecida ou valor fora das invariantes.
    """
    values: dict[str, Any] = read_config_file(path) if path is not None else {}
    flag_values = {k: v for k, v in (overrides or {}).items() if v is not None}
    values.update(flag_values)
    try:
        config = PipelineConfig.model_validate(values)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors())
        raise ReefValidationError(f"Configuração inválida: {problems}") from e
    logger.debug(f"Configuração carregada ({len(flag_values)} flags sobrepostas)")
    return config
