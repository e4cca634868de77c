"""
Montagem de cenas de recife: ostras distribuídas sobre um plano e câmera
pinhole levemente inclinada, no ponto de vista de um AUV.

Convenções:
- Mundo em metros, z para cima, chão em z = 0.
- Câmera no padrão OpenCV: x para a direita, y para baixo, z para frente.
- A pose da câmera leva pontos do mundo para a câmera: p_cam = R·p + t.
- Malhas de ostra chegam em cm (oystermesh) e são convertidas aqui.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import CapacityError, ReefValidationError
from src.logging_config import get_logger
from src.oystermesh import OysterDistribution, OysterParams, TriangleMesh, build_oyster, random_oyster
from src.rng import STREAM_CAMERA, STREAM_PLACEMENT, derive_seed, make_rng, prng_info

logger = get_logger(__name__)

CM_TO_M = 0.01
ORTHONORMAL_TOL = 1e-9
DEFAULT_WIDTH = 640
DEFAULT_HEIGHT = 480
DEFAULT_MAX_TILT_DEG = 15.0


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotação ortonormal (det +1) seguida de translação, em metros."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        rotation = np.array(self.rotation, dtype=np.float64)
        translation = np.array(self.translation, dtype=np.float64).reshape(-1)
        if rotation.shape != (3, 3) or translation.shape != (3,):
            raise ReefValidationError(f"Pose inválida: rotação {rotation.shape}, translação {translation.shape}")
        if not np.all(np.isfinite(rotation)) or not np.all(np.isfinite(translation)):
            raise ReefValidationError("Pose com valores não-finitos")
        if np.abs(rotation @ rotation.T - np.eye(3)).max() > ORTHONORMAL_TOL:
            raise ReefValidationError("Rotação não-ortonormal (R·Rᵀ != I)")
        if abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOL:
            raise ReefValidationError("Rotação com determinante diferente de +1")
        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def from_euler(
        cls, yaw: float, pitch: float = 0.0, roll: float = 0.0, translation: Sequence[float] = (0.0, 0.0, 0.0)
    ) -> "RigidTransform":
        """Rz(yaw)·Ry(pitch)·Rx(roll), ângulos em radianos."""
        cy, sy = math.cos(yaw), math.sin(yaw)
        cp, sp = math.cos(pitch), math.sin(pitch)
        cr, sr = math.cos(roll), math.sin(roll)
        rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
        ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
        rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
        return cls(rz @ ry @ rx, np.asarray(translation, dtype=np.float64))

    @classmethod
    def from_matrix(cls, matrix: Sequence[Sequence[float]]) -> "RigidTransform":
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape != (4, 4) or not np.array_equal(m[3], [0.0, 0.0, 0.0, 1.0]):
            raise ReefValidationError("Matriz de pose deve ser 4x4 homogênea")
        return cls(m[:3, :3], m[:3, 3])

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other: aplica `other` primeiro."""
        return RigidTransform(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


class Region(BaseModel):
    """Retângulo no plano do chão, em metros."""

    model_config = ConfigDict(frozen=True)

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @model_validator(mode="after")
    def _check_area(self) -> "Region":
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError(f"Região com área nula ou negativa: {self}")
        return self

    @classmethod
    def centered(cls, width_m: float = 1.0, height_m: float = 1.0) -> "Region":
        return cls(x_min=-width_m / 2, y_min=-height_m / 2, x_max=width_m / 2, y_max=height_m / 2)

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


@dataclass(frozen=True, eq=False)
class OysterInstance:
    params: OysterParams
    pose: RigidTransform
    instance_id: int


@dataclass(frozen=True, eq=False)
class ScenePlacement:
    """Ostras posicionadas no chão de uma cena."""

    instances: tuple[OysterInstance, ...]
    ground_extent: Region
    seed: int
    min_spacing: float = 0.0
    scene_id: str = "scene"

    def __post_init__(self) -> None:
        ids = [inst.instance_id for inst in self.instances]
        if ids != list(range(1, len(ids) + 1)):
            raise ReefValidationError(f"instance_ids devem ser consecutivos a partir de 1, recebeu {ids[:10]}")
        for inst in self.instances:
            x, y, _ = inst.pose.translation
            if not self.ground_extent.contains(x, y):
                raise ReefValidationError(f"Ostra {inst.instance_id} fora da região: ({x:.3f}, {y:.3f})")


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Câmera pinhole com pose mundo -> câmera."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    pose: RigidTransform = field(default_factory=RigidTransform)

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise ReefValidationError(f"Focais devem ser positivas: fx={self.fx}, fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise ReefValidationError(f"Tamanho de imagem inválido: {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ReefValidationError(f"Ponto principal ({self.cx}, {self.cy}) fora da imagem")

    @property
    def center(self) -> np.ndarray:
        """Posição da câmera no mundo."""
        return -self.pose.rotation.T @ self.pose.translation

    @property
    def optical_axis(self) -> np.ndarray:
        """Direção +z da câmera em coordenadas do mundo."""
        return self.pose.rotation[2].copy()

    @property
    def tilt_deg(self) -> float:
        """Ângulo entre o eixo óptico e o nadir (-z do mundo)."""
        return math.degrees(math.acos(max(-1.0, min(1.0, -float(self.pose.rotation[2, 2])))))

    def to_camera(self, points_world: np.ndarray) -> np.ndarray:
        return self.pose.apply(points_world)


Range = tuple[float, float]


class CameraConfig(BaseModel):
    """Intervalos de amostragem da câmera."""

    model_config = ConfigDict(frozen=True)

    height_m: Range = (0.4, 1.0)
    tilt_deg: Range = (10.0, 25.0)
    yaw_deg: Range = (0.0, 360.0)
    width: int = Field(DEFAULT_WIDTH, gt=0)
    height: int = Field(DEFAULT_HEIGHT, gt=0)
    hfov_deg: float = Field(60.0, gt=0, lt=180)
    look_at: tuple[float, float] = (0.0, 0.0)

    @model_validator(mode="after")
    def _check_ranges(self) -> "CameraConfig":
        for name in ("height_m", "tilt_deg", "yaw_deg"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"Intervalo malformado em {name}: min {lo} > max {hi}")
        if self.height_m[0] <= 0:
            raise ValueError("height_m deve ser positivo")
        if self.tilt_deg[0] < 0 or self.tilt_deg[1] >= 90:
            raise ValueError("tilt_deg deve estar em [0, 90)")
        return self

    @property
    def focal_px(self) -> float:
        return (self.width / 2.0) / math.tan(math.radians(self.hfov_deg) / 2.0)


def look_down_pose(
    target: Sequence[float], height_m: float, tilt_rad: float, yaw_rad: float
) -> RigidTransform:
    """
    Pose de uma câmera a `height_m` do chão mirando `target` (z = 0).

    Com tilt 0 o eixo óptico é exatamente -z; o topo da imagem aponta
    na direção do yaw.
    """
    heading = np.array([math.cos(yaw_rad), math.sin(yaw_rad), 0.0])
    forward = math.sin(tilt_rad) * heading - math.cos(tilt_rad) * np.array([0.0, 0.0, 1.0])
    x_axis = np.cross(heading, [0.0, 0.0, 1.0])
    y_axis = np.cross(forward, x_axis)
    rotation = np.vstack([x_axis, y_axis, forward])
    target3 = np.array([target[0], target[1], 0.0])
    position = target3 - (height_m / math.cos(tilt_rad)) * forward
    return RigidTransform(rotation, -rotation @ position)


def sample_camera(seed: int, config: Optional[CameraConfig] = None) -> CameraModel:
    """
    Sorteia altura, inclinação e yaw da câmera a partir da seed.

    Args:
        seed: Seed da cena.
        config: Intervalos e intrínsecos (default: 0.4-1.0 m, 10-25°, 640x480).

    Returns:
        CameraModel determinístico para (seed, config).
    """
    cfg = config or CameraConfig()
    rng = make_rng(seed, STREAM_CAMERA)
    height_m = float(rng.uniform(*cfg.height_m))
    tilt = math.radians(float(rng.uniform(*cfg.tilt_deg)))
    yaw = math.radians(float(rng.uniform(*cfg.yaw_deg)))
    focal = cfg.focal_px
    return CameraModel(
        fx=focal,
        fy=focal,
        cx=cfg.width / 2.0,
        cy=cfg.height / 2.0,
        width=cfg.width,
        height=cfg.height,
        pose=look_down_pose(cfg.look_at, height_m, tilt, yaw),
    )


def place_oysters(
    n: int,
    region: Region,
    seed: int,
    min_spacing: float = 0.0,
    max_attempts: Optional[int] = None,
    distribution: Optional[OysterDistribution] = None,
    max_tilt_deg: float = DEFAULT_MAX_TILT_DEG,
    scene_id: str = "scene",
) -> ScenePlacement:
    """
    Distribui n ostras na região por amostragem por rejeição.

    Posição e yaw uniformes, roll/pitch uniformes em ±max_tilt_deg; os
    centros ficam a pelo menos min_spacing uns dos outros. Cada ostra
    recebe uma seed filha derivada de (seed, instance_id).

    Raises:
        ReefValidationError: n ou min_spacing negativos.
        CapacityError: tentativas esgotadas (default 1000·n).
    """
    if n < 0:
        raise ReefValidationError(f"n deve ser >= 0, recebeu {n}")
    if min_spacing < 0:
        raise ReefValidationError(f"min_spacing deve ser >= 0, recebeu {min_spacing}")
    budget = max_attempts if max_attempts is not None else 1000 * n
    rng = make_rng(seed, STREAM_PLACEMENT)
    tilt = math.radians(max_tilt_deg)

    centers: list[tuple[float, float]] = []
    instances: list[OysterInstance] = []
    attempts = 0
    for instance_id in range(1, n + 1):
        while True:
            if attempts >= budget:
                raise CapacityError(
                    f"Amostragem por rejeição esgotou {budget} tentativas com {len(centers)}/{n} ostras: "
                    f"restrição min_spacing={min_spacing} m insatisfeita na região "
                    f"{region.x_max - region.x_min:.3f} x {region.y_max - region.y_min:.3f} m"
                )
            attempts += 1
            x = float(rng.uniform(region.x_min, region.x_max))
            y = float(rng.uniform(region.y_min, region.y_max))
            if min_spacing == 0.0 or all(math.hypot(x - cx, y - cy) >= min_spacing for cx, cy in centers):
                break
        yaw = float(rng.uniform(0.0, 2 * math.pi))
        pitch = float(rng.uniform(-tilt, tilt))
        roll = float(rng.uniform(-tilt, tilt))
        centers.append((x, y))
        params = random_oyster(derive_seed(seed, instance_id), distribution)
        pose = RigidTransform.from_euler(yaw, pitch, roll, (x, y, 0.0))
        instances.append(OysterInstance(params=params, pose=pose, instance_id=instance_id))

    logger.debug(f"{scene_id}: {n} ostras posicionadas em {attempts} tentativas")
    return ScenePlacement(
        instances=tuple(instances), ground_extent=region, seed=seed, min_spacing=min_spacing, scene_id=scene_id
    )


def world_meshes(scene: ScenePlacement) -> list[TriangleMesh]:
    """Malhas das ostras em metros, no referencial do mundo."""
    meshes = []
    for inst in scene.instances:
        local = build_oyster(inst.params, inst.instance_id)
        vertices = inst.pose.apply(local.vertices * CM_TO_M)
        meshes.append(TriangleMesh(vertices, local.triangles, inst.instance_id))
    return meshes


def scene_to_json(
    scene: ScenePlacement, camera: CameraModel, config_echo: Optional[dict[str, Any]] = None
) -> dict[str, Any]:
    """Registro canônico de reprodutibilidade da cena (poses 4x4 row-major)."""
    return {
        "scene_id": scene.scene_id,
        "seed": scene.seed,
        "min_spacing": scene.min_spacing,
        "ground_extent": scene.ground_extent.model_dump(),
        "instances": [
            {
                "instance_id": inst.instance_id,
                "oyster_seed": inst.params.seed,
                "params": inst.params.model_dump(mode="json"),
                "pose": inst.pose.as_matrix().tolist(),
            }
            for inst in scene.instances
        ],
        "camera": {
            "fx": camera.fx,
            "fy": camera.fy,
            "cx": camera.cx,
            "cy": camera.cy,
            "width": camera.width,
            "height": camera.height,
            "pose": camera.pose.as_matrix().tolist(),
            "tilt_deg": camera.tilt_deg,
        },
        "prng": prng_info(),
        "config": config_echo or {},
    }


def scene_from_json(doc: dict[str, Any]) -> tuple[ScenePlacement, CameraModel]:
    """Inverso de scene_to_json."""
    try:
        instances = tuple(
            OysterInstance(
                params=OysterParams.model_validate(item["params"]),
                pose=RigidTransform.from_matrix(item["pose"]),
                instance_id=int(item["instance_id"]),
            )
            for item in doc["instances"]
        )
        scene = ScenePlacement(
            instances=instances,
            ground_extent=Region.model_validate(doc["ground_extent"]),
            seed=int(doc["seed"]),
            min_spacing=float(doc.get("min_spacing", 0.0)),
            scene_id=str(doc["scene_id"]),
        )
        cam = doc["camera"]
        camera = CameraModel(
            fx=float(cam["fx"]),
            fy=float(cam["fy"]),
            cx=float(cam["cx"]),
            cy=float(cam["cy"]),
            width=int(cam["width"]),
            height=int(cam["height"]),
            pose=RigidTransform.from_matrix(cam["pose"]),
        )
    except KeyError as e:
        raise ReefValidationError(f"Documento de cena sem o campo {e}") from e
    return scene, camera
