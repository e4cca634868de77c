"""
Geração procedural de malhas de ostras.

Modelo em dois estágios: perímetro 2D formado por duas B-splines cúbicas
(metade superior e inferior da concha, unidas na charneira e na borda) e
modelo 3D estratificado, com cópias escaladas do perímetro em camadas de
profundidade crescente costuradas por faixas de triângulos e fechadas por
leques nas tampas.

O cronograma de camadas (8 camadas, escala afunilando de 1.0 no meio até
0.35 nas tampas) é um substituto plausível: não há dados de escaneamento
para calibrá-lo.

Unidades: centímetros. A conversão para metros acontece em scenegen.
"""

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.errors import GeometryError, ReefValidationError
from src.logging_config import get_logger
from src.rng import STREAM_OYSTER, STREAM_ROUGHNESS, make_rng
from src.splinecore import BSplineCurve2D, sample_curve

logger = get_logger(__name__)

MIN_TRIANGLE_AREA_CM2 = 1e-9
DEFAULT_NUM_LAYERS = 8
DEFAULT_TAPER_MIN_SCALE = 0.35

Point2 = tuple[float, float]

# Perfil normalizado: charneira em x=-1, borda em x=+1
TOP_PROFILE: tuple[Point2, ...] = ((-1.0, 0.0), (-0.85, 0.35), (-0.3, 0.8), (0.35, 0.95), (0.85, 0.7), (1.0, 0.0))
BOTTOM_PROFILE: tuple[Point2, ...] = (
    (-1.0, 0.0),
    (-0.85, -0.3),
    (-0.3, -0.75),
    (0.35, -0.9),
    (0.85, -0.65),
    (1.0, 0.0),
)


class OysterParams(BaseModel):
    """Parâmetros completos de uma ostra (função pura da seed + distribuição)."""

    model_config = ConfigDict(frozen=True)

    seed: int = Field(ge=0, lt=2**64, description="Seed de 64 bits da ostra.")
    length_cm: float = Field(gt=0, description="Comprimento (charneira-borda) em cm.")
    width_cm: float = Field(gt=0, description="Largura em cm.")
    height_cm: float = Field(gt=0, description="Espessura nominal em cm; o perfil de camadas define o z de cada camada.")
    num_layers: int = Field(ge=2, description="Número de camadas do modelo estratificado.")
    layer_profile: tuple[tuple[float, float], ...] = Field(
        description="(fator de escala em (0,1], offset de profundidade em cm) por camada."
    )
    top_controls: tuple[Point2, ...] = Field(min_length=4, description="Pontos de controle da metade superior.")
    bottom_controls: tuple[Point2, ...] = Field(min_length=4, description="Pontos de controle da metade inferior.")
    samples_per_perimeter: int = Field(ge=8, description="Amostras por metade do perímetro.")
    roughness_amp: float = Field(0.0, ge=0, description="Amplitude do jitter de vértices em cm.")
    knot_style: Literal["clamped", "uniform"] = Field("clamped", description="Convenção do vetor de nós.")

    @field_validator("layer_profile")
    @classmethod
    def _check_layer_profile(cls, v: tuple[tuple[float, float], ...]) -> tuple[tuple[float, float], ...]:
        for scale, _ in v:
            if not 0.0 < scale <= 1.0:
                raise ValueError(f"Fator de escala de camada fora de (0, 1]: {scale}")
        offsets = [offset for _, offset in v]
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ValueError("Offsets de profundidade devem ser estritamente crescentes")
        return v

    @model_validator(mode="after")
    def _check_consistency(self) -> "OysterParams":
        if len(self.layer_profile) != self.num_layers:
            raise ValueError(f"layer_profile tem {len(self.layer_profile)} camadas, esperado {self.num_layers}")
        _check_halves_join(self.top_controls, self.bottom_controls)
        return self


def _check_halves_join(top: tuple[Point2, ...], bottom: tuple[Point2, ...]) -> None:
    if tuple(top[0]) != tuple(bottom[0]) or tuple(top[-1]) != tuple(bottom[-1]):
        raise ReefValidationError(
            "As metades da concha devem compartilhar o primeiro e o último ponto (charneira e borda)"
        )


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Malha triangular (cm) com identidade de instância."""

    vertices: np.ndarray
    triangles: np.ndarray
    instance_id: int = 1

    def __post_init__(self) -> None:
        vertices = np.array(self.vertices, dtype=np.float64)
        triangles = np.array(self.triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise GeometryError(f"Vértices devem ter forma (V, 3), recebeu {vertices.shape}")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise GeometryError(f"Triângulos devem ter forma (T, 3), recebeu {triangles.shape}")
        if self.instance_id < 1:
            raise ReefValidationError(f"instance_id deve ser >= 1 (0 é o fundo), recebeu {self.instance_id}")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise GeometryError("Índice de triângulo fora do intervalo de vértices")
        areas = triangle_areas(vertices, triangles)
        if areas.size and areas.min() < MIN_TRIANGLE_AREA_CM2:
            raise GeometryError(f"Triângulo degenerado (área {areas.min():.3e} cm²)")
        vertices.setflags(write=False)
        triangles.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)

    def with_instance_id(self, instance_id: int) -> "TriangleMesh":
        return TriangleMesh(self.vertices, self.triangles, instance_id)


def triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    v0, v1, v2 = (vertices[triangles[:, c]] for c in range(3))
    return 0.5 * np.linalg.norm(np.cross(v1 - v0, v2 - v0), axis=1)


def mesh_volume(mesh: TriangleMesh) -> float:
    """Volume pelo teorema da divergência (positivo para orientação para fora)."""
    v0, v1, v2 = (mesh.vertices[mesh.triangles[:, c]] for c in range(3))
    return float(np.einsum("ij,ij->i", v0, np.cross(v1, v2)).sum() / 6.0)


def edge_use_counts(mesh: TriangleMesh) -> dict[tuple[int, int], int]:
    """Quantos triângulos usam cada aresta não-direcionada."""
    counts: Counter[tuple[int, int]] = Counter()
    for a, b, c in mesh.triangles.tolist():
        for u, v in ((a, b), (b, c), (c, a)):
            counts[(min(u, v), max(u, v))] += 1
    return dict(counts)


def _signed_area(ring: np.ndarray) -> float:
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _is_simple(ring: np.ndarray) -> bool:
    """True se nenhum par de segmentos não-adjacentes do anel se toca."""
    n = len(ring)
    p = ring
    q = np.roll(ring, -1, axis=0)
    d = q - p

    def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]

    pi, qi, di = p[:, None, :], q[:, None, :], d[:, None, :]
    pj, qj, dj = p[None, :, :], q[None, :, :], d[None, :, :]
    o1 = cross(di, pj - pi)
    o2 = cross(di, qj - pi)
    o3 = cross(dj, pi - pj)
    o4 = cross(dj, qi - pj)

    collinear = (o1 == 0) & (o2 == 0)
    overlap = np.ones((n, n), dtype=bool)
    for axis in (0, 1):
        lo_i = np.minimum(pi[..., axis], qi[..., axis])
        hi_i = np.maximum(pi[..., axis], qi[..., axis])
        lo_j = np.minimum(pj[..., axis], qj[..., axis])
        hi_j = np.maximum(pj[..., axis], qj[..., axis])
        overlap &= np.maximum(lo_i, lo_j) <= np.minimum(hi_i, hi_j)
    hits = ((o1 * o2 <= 0) & (o3 * o4 <= 0) & ~collinear) | (collinear & overlap)

    idx = np.arange(n)
    gap = np.abs(idx[:, None] - idx[None, :])
    candidates = (idx[:, None] < idx[None, :]) & (gap != 1) & (gap != n - 1)
    return not bool(np.any(hits & candidates))


def _half_curve(controls: tuple[Point2, ...], knot_style: str) -> BSplineCurve2D:
    points = [tuple(p) for p in controls]
    if knot_style == "uniform":
        # Multiplicidade 3 nas pontas: a B-spline uniforme cúbica passa pelas extremidades
        points = [points[0]] * 2 + points + [points[-1]] * 2
        return BSplineCurve2D.uniform(points, degree=3)
    return BSplineCurve2D.clamped(points, degree=3)


def perimeter_2d(params: OysterParams) -> np.ndarray:
    """
    Perímetro fechado da concha a partir das duas B-splines cúbicas.

    Amostra a metade superior (charneira -> borda) com s pontos e a inferior
    invertida (borda -> charneira) com s - 1 pontos (a borda não se repete).
    Resultado: 2s - 1 pontos, o último igual ao primeiro (charneira), ou seja
    2s - 2 pontos distintos; escalado para
    length_cm x width_cm e centrado na origem.

    Raises:
        ReefValidationError: metades que não se encontram ou área nula.
    """
    _check_halves_join(params.top_controls, params.bottom_controls)
    s = params.samples_per_perimeter
    top = sample_curve(_half_curve(params.top_controls, params.knot_style), s)
    bottom = sample_curve(_half_curve(params.bottom_controls, params.knot_style), s)[::-1]
    raw = np.vstack([top, bottom[1:]])
    raw[-1] = raw[0]

    extent = float(np.ptp(raw, axis=0).max())
    if extent == 0.0 or abs(_signed_area(raw[:-1])) <= 1e-9 * extent**2:
        raise ReefValidationError("Perímetro degenerado: área interna nula (pontos de controle colineares?)")

    lo, hi = raw.min(axis=0), raw.max(axis=0)
    center = (lo + hi) / 2.0
    scale = np.array([params.length_cm / (hi[0] - lo[0]), params.width_cm / (hi[1] - lo[1])])
    return (raw - center) * scale


def default_layer_profile(
    num_layers: int, height_cm: float, min_scale: float = DEFAULT_TAPER_MIN_SCALE
) -> tuple[tuple[float, float], ...]:
    """Cronograma afunilado: escala min + (1 - min)·sin(pi·u), offset u·altura."""
    if num_layers < 2:
        raise ReefValidationError(f"num_layers deve ser >= 2, recebeu {num_layers}")
    if not 0.0 < min_scale <= 1.0:
        raise ReefValidationError(f"min_scale fora de (0, 1]: {min_scale}")
    profile = []
    for j in range(num_layers):
        u = j / (num_layers - 1)
        scale = min(1.0, min_scale + (1.0 - min_scale) * math.sin(math.pi * u))
        profile.append((scale, u * height_cm))
    return tuple(profile)


def extrude_layers(perimeter: np.ndarray, params: OysterParams) -> TriangleMesh:
    """
    Empilha cópias escaladas do perímetro nas profundidades das camadas.

    Camadas adjacentes são costuradas com faixas de triângulos; base e topo
    recebem leques a partir do centro do anel. A camada j fica em z = offset_j
    (cm); height_cm só entra via default_layer_profile, que gera offsets até ele.

    Raises:
        GeometryError: perímetro aberto ou auto-intersectante.
        ReefValidationError: num_layers < 2.
    """
    if params.num_layers < 2 or len(params.layer_profile) < 2:
        raise ReefValidationError(f"num_layers deve ser >= 2, recebeu {params.num_layers}")
    pts = np.asarray(perimeter, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4 or not np.array_equal(pts[0], pts[-1]):
        raise GeometryError("Perímetro deve ser uma polilinha 2D fechada com ao menos 3 pontos distintos")
    ring = pts[:-1]
    area = _signed_area(ring)
    if area == 0.0:
        raise GeometryError("Perímetro com área nula")
    if not _is_simple(ring):
        raise GeometryError("Perímetro auto-intersectante")
    if area < 0:
        ring = ring[::-1]  # CCW visto de +z

    scales = np.array([scale for scale, _ in params.layer_profile])
    offsets = np.array([offset for _, offset in params.layer_profile])
    z = offsets

    n_layers, r = len(scales), len(ring)
    layers = [np.column_stack([ring * scales[j], np.full(r, z[j])]) for j in range(n_layers)]
    rings = np.vstack(layers)
    if params.roughness_amp > 0:
        rng = make_rng(params.seed, STREAM_ROUGHNESS)
        rings = rings + rng.uniform(-params.roughness_amp, params.roughness_amp, size=rings.shape)
    bottom_center = rings[:r].mean(axis=0)
    top_center = rings[-r:].mean(axis=0)
    vertices = np.vstack([rings, bottom_center, top_center])

    a = np.arange(r)
    b = (a + 1) % r
    faces = []
    for j in range(n_layers - 1):
        lo, hi = j * r, (j + 1) * r
        faces.append(np.column_stack([lo + a, lo + b, hi + b]))
        faces.append(np.column_stack([lo + a, hi + b, hi + a]))
    c_bottom, c_top = n_layers * r, n_layers * r + 1
    top_base = (n_layers - 1) * r
    faces.append(np.column_stack([np.full(r, c_bottom), b, a]))
    faces.append(np.column_stack([np.full(r, c_top), top_base + a, top_base + b]))
    return TriangleMesh(vertices, np.vstack(faces))


def build_oyster(params: OysterParams, instance_id: int = 1) -> TriangleMesh:
    """Perímetro + extrusão: malha completa de uma ostra."""
    return extrude_layers(perimeter_2d(params), params).with_instance_id(instance_id)


Range = tuple[float, float]
IntRange = tuple[int, int]


class OysterDistribution(BaseModel):
    """Intervalos uniformes para sortear OysterParams."""

    model_config = ConfigDict(frozen=True)

    length_cm: Range = (5.0, 12.0)
    width_cm: Range = (3.5, 8.0)
    height_cm: Range = (1.5, 4.0)
    num_layers: IntRange = (DEFAULT_NUM_LAYERS, DEFAULT_NUM_LAYERS)
    samples_per_perimeter: IntRange = (16, 16)
    roughness_amp: Range = (0.0, 0.0)
    taper_min_scale: Range = (DEFAULT_TAPER_MIN_SCALE, DEFAULT_TAPER_MIN_SCALE)
    profile_jitter: Range = (0.0, 0.15)
    knot_style: Literal["clamped", "uniform"] = "clamped"

    @model_validator(mode="after")
    def _check_ranges(self) -> "OysterDistribution":
        for name in (
            "length_cm",
            "width_cm",
            "height_cm",
            "num_layers",
            "samples_per_perimeter",
            "roughness_amp",
            "taper_min_scale",
            "profile_jitter",
        ):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"Intervalo malformado em {name}: min {lo} > max {hi}")
        for name in ("length_cm", "width_cm", "height_cm"):
            if getattr(self, name)[0] <= 0:
                raise ValueError(f"{name} deve ser positivo")
        if self.num_layers[0] < 2:
            raise ValueError("num_layers mínimo deve ser >= 2")
        if self.samples_per_perimeter[0] < 8:
            raise ValueError("samples_per_perimeter mínimo deve ser >= 8")
        if self.roughness_amp[0] < 0:
            raise ValueError("roughness_amp não pode ser negativo")
        if not (0.0 < self.taper_min_scale[0] and self.taper_min_scale[1] <= 1.0):
            raise ValueError("taper_min_scale deve estar em (0, 1]")
        if not (0.0 <= self.profile_jitter[0] and self.profile_jitter[1] < 1.0):
            raise ValueError("profile_jitter deve estar em [0, 1)")
        return self


def _jitter_profile(profile: tuple[Point2, ...], rng: np.random.Generator, amount: float) -> tuple[Point2, ...]:
    # Só os pontos internos variam: charneira e borda ficam fixas
    jittered = [profile[0]]
    for x, y in profile[1:-1]:
        jittered.append((x, y * (1.0 + rng.uniform(-amount, amount))))
    jittered.append(profile[-1])
    return tuple(jittered)


def random_oyster(seed: int, distribution: Optional[OysterDistribution] = None) -> OysterParams:
    """
    Sorteia OysterParams dos intervalos configurados (PCG64 nomeado).

    A ordem dos sorteios é fixa: mesma seed, mesmos parâmetros.
    """
    dist = distribution or OysterDistribution()
    rng = make_rng(seed, STREAM_OYSTER)
    length = float(rng.uniform(*dist.length_cm))
    width = float(rng.uniform(*dist.width_cm))
    height = float(rng.uniform(*dist.height_cm))
    num_layers = int(rng.integers(dist.num_layers[0], dist.num_layers[1] + 1))
    samples = int(rng.integers(dist.samples_per_perimeter[0], dist.samples_per_perimeter[1] + 1))
    roughness = float(rng.uniform(*dist.roughness_amp))
    taper = float(rng.uniform(*dist.taper_min_scale))
    jitter = float(rng.uniform(*dist.profile_jitter))
    top = _jitter_profile(TOP_PROFILE, rng, jitter)
    bottom = _jitter_profile(BOTTOM_PROFILE, rng, jitter)

    return OysterParams(
        seed=seed,
        length_cm=length,
        width_cm=width,
        height_cm=height,
        num_layers=num_layers,
        layer_profile=default_layer_profile(num_layers, height, taper),
        top_controls=top,
        bottom_controls=bottom,
        samples_per_perimeter=samples,
        roughness_amp=roughness,
        knot_style=dist.knot_style,
    )


def export_obj(mesh: TriangleMesh, path: Path | str) -> Path:
    """Exporta a malha como OBJ ASCII (apenas registros v/f) para inspeção externa."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# reefforge oyster instance {mesh.instance_id}"]
    lines += [f"v {x:.6f} {y:.6f} {z:.6f}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles.tolist()]
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.debug(f"OBJ exportado em {out} ({len(mesh.vertices)} vértices)")
    return out
