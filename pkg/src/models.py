"""
Módulo de modelos de dados Pydantic.

Define a estrutura, validação e tipagem das anotações de detecção, das
entradas do dataset misto (real + sintético) e das detecções avaliadas.
"""

from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

BOX_TOLERANCE = 1e-9
OYSTER_CLASS_ID = 0
CLASS_NAMES = ("oyster",)

Source = Literal["real", "synthetic"]
SplitName = Literal["train", "test"]


class BoundingBox(BaseModel):
    """Caixa YOLO normalizada pelo tamanho da imagem."""

    model_config = ConfigDict(frozen=True)

    class_id: int = Field(OYSTER_CLASS_ID, ge=0, description="Classe (0 = ostra).")
    cx: float = Field(ge=0.0, le=1.0)
    cy: float = Field(ge=0.0, le=1.0)
    w: float = Field(gt=0.0, le=1.0)
    h: float = Field(gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_contained(self) -> "BoundingBox":
        for center, size, axis in ((self.cx, self.w, "x"), (self.cy, self.h, "y")):
            if center - size / 2 < -BOX_TOLERANCE or center + size / 2 > 1 + BOX_TOLERANCE:
                raise ValueError(f"Caixa extrapola a imagem no eixo {axis}")
        return self

    def to_pixels(self, width: int, height: int) -> tuple[float, float, float, float]:
        """(x_min, y_min, x_max, y_max) em pixels, convenção de bordas de pixel."""
        return (
            (self.cx - self.w / 2) * width,
            (self.cy - self.h / 2) * height,
            (self.cx + self.w / 2) * width,
            (self.cy + self.h / 2) * height,
        )


class LabeledImage(BaseModel):
    """Imagem do dataset com suas caixas."""

    model_config = ConfigDict(frozen=True)

    image_path: str = Field(description="Caminho da imagem (chave da entrada no split).")
    width: int = Field(gt=0)
    height: int = Field(gt=0)
    boxes: tuple[BoundingBox, ...] = ()
    source: Source
    scene_ref: Optional[str] = None

    @model_validator(mode="after")
    def _check_scene_ref(self) -> "LabeledImage":
        if self.source == "synthetic" and not self.scene_ref:
            raise ValueError(f"Entrada sintética sem scene_ref: {self.image_path}")
        return self


class DatasetManifest(BaseModel):
    """Dataset misto e seu split train/test."""

    model_config = ConfigDict(frozen=True)

    entries: tuple[LabeledImage, ...]
    split: dict[str, SplitName]
    seed: int = Field(ge=0)
    real_train_frac: float = Field(ge=0.0, le=1.0)
    min_pixels: int = Field(25, ge=1)
    config_echo: dict[str, Any] = Field(default_factory=dict)
    tool_version: str = ""

    @model_validator(mode="after")
    def _check_split(self) -> "DatasetManifest":
        paths = [e.image_path for e in self.entries]
        if len(set(paths)) != len(paths):
            raise ValueError("Entradas com image_path duplicado")
        if set(paths) != set(self.split):
            raise ValueError("Split deve cobrir cada entrada exatamente uma vez")
        for entry in self.entries:
            if self.split[entry.image_path] == "test" and entry.source != "real":
                raise ValueError(f"Entrada sintética no split de teste: {entry.image_path}")
        return self

    def subset(self, name: SplitName) -> list[LabeledImage]:
        return [e for e in self.entries if self.split[e.image_path] == name]


class GroundTruth(BaseModel):
    """Retângulo anotado em pixels."""

    model_config = ConfigDict(frozen=True)

    image_id: str
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    class_id: int = OYSTER_CLASS_ID

    @model_validator(mode="after")
    def _check_box(self) -> "GroundTruth":
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(
                f"Retângulo degenerado ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max}) em {self.image_id}"
            )
        return self

    @property
    def box(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


class Detection(GroundTruth):
    """Predição do detector: retângulo em pixels com confiança."""

    confidence: float = Field(ge=0.0, le=1.0)
