"""
Rasterizador por software com z-buffer.

Produz, por cena/câmera, o par de condicionamento do ControlNet: mapa de
profundidade e máscara de instâncias (mais uma prévia com sombreamento
plano opcional).

Regras de amostragem:
- Cada pixel (col, lin) é amostrado no centro (col + 0.5, lin + 0.5),
  sem anti-aliasing.
- Um pixel é coberto quando as três funções de aresta têm o mesmo sinal
  da área (bordas inclusivas, qualquer orientação: sem back-face culling).
- Profundidade = z no eixo óptico, interpolada com correção de perspectiva.
- Empate exato de profundidade: vence o triângulo que vem antes na ordem
  (instância, índice do triângulo).
- Triângulos que cruzam o plano próximo (0.05 m) são recortados.

A renderização de uma imagem pode ser dividida em faixas de linhas, cada
uma com seu próprio z-buffer; como cada pixel pertence a uma única faixa,
o resultado independe do número de threads.
"""

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from src.errors import CapacityError, ReefValidationError
from src.logging_config import get_logger
from src.oystermesh import TriangleMesh
from src.scenegen import CameraModel, ScenePlacement, world_meshes

logger = get_logger(__name__)

DEFAULT_NEAR_M = 0.05
MAX_MASK_ID = 65535
SCREEN_AREA_EPS = 1e-12
CANDIDATE_CHUNK = 2_000_000
PREVIEW_AMBIENT = 0.2
PALETTE_MULTIPLIER = 2654435761


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Profundidade em metros no eixo óptico; fundo = inf."""

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.float64)
        if data.shape != (self.height, self.width):
            raise ReefValidationError(f"DepthMap {data.shape} difere de {self.height}x{self.width}")
        finite = np.isfinite(data)
        if np.any(data[finite] <= 0):
            raise ReefValidationError("Profundidade finita deve ser > 0")
        object.__setattr__(self, "data", _frozen(data))

    @classmethod
    def empty(cls, width: int, height: int) -> "DepthMap":
        return cls(width, height, np.full((height, width), np.inf))


@dataclass(frozen=True, eq=False)
class InstanceMask:
    """Ids por pixel: 0 = fundo, k >= 1 = instância k."""

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.uint32)
        if data.shape != (self.height, self.width):
            raise ReefValidationError(f"InstanceMask {data.shape} difere de {self.height}x{self.width}")
        object.__setattr__(self, "data", _frozen(data))

    def ids(self) -> list[int]:
        return [int(i) for i in np.unique(self.data) if i != 0]


@dataclass(frozen=True, eq=False)
class RenderOutput:
    """Par profundidade/máscara alinhado pixel a pixel, mais prévia e chão opcionais."""

    depth: DepthMap
    mask: InstanceMask
    preview: Optional[np.ndarray] = None
    scene_ref: str = ""
    ground: Optional[DepthMap] = None

    def __post_init__(self) -> None:
        if (self.depth.width, self.depth.height) != (self.mask.width, self.mask.height):
            raise ReefValidationError("Profundidade e máscara com dimensões diferentes")
        if not np.array_equal(np.isfinite(self.depth.data), self.mask.data != 0):
            raise ReefValidationError("Máscara e profundidade desalinhadas")
        if self.preview is not None:
            preview = np.array(self.preview, dtype=np.uint8)
            if preview.shape != (self.depth.height, self.depth.width, 3):
                raise ReefValidationError(f"Prévia com forma {preview.shape}")
            object.__setattr__(self, "preview", _frozen(preview))


@dataclass(frozen=True, eq=False)
class ScreenTriangles:
    """
    Triângulos já recortados e projetados, na ordem de prioridade.

    xy: (T, 3, 2) em pixels; z: (T, 3) profundidade no eixo óptico;
    ids: (T,) instância; normals: (T, 3) normais unitárias na câmera.
    """

    xy: np.ndarray
    z: np.ndarray
    ids: np.ndarray
    normals: np.ndarray

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    @property
    def area2(self) -> np.ndarray:
        """Área orientada dobrada no espaço de tela."""
        x, y = self.xy[..., 0], self.xy[..., 1]
        return (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (y[:, 1] - y[:, 0]) * (x[:, 2] - x[:, 0])


def _clip_near(tri: np.ndarray, near: float) -> list[np.ndarray]:
    """Sutherland-Hodgman contra z >= near; devolve o leque de triângulos resultante."""
    poly = []
    for i in range(3):
        a, b = tri[i], tri[(i + 1) % 3]
        a_in, b_in = a[2] >= near, b[2] >= near
        if a_in:
            poly.append(a)
        if a_in != b_in:
            s = (near - a[2]) / (b[2] - a[2])
            p = a + s * (b - a)
            p[2] = near
            poly.append(p)
    return [np.stack([poly[0], poly[i], poly[i + 1]]) for i in range(1, len(poly) - 1)]


def project_scene(
    meshes: Sequence[TriangleMesh], camera: CameraModel, near: float = DEFAULT_NEAR_M
) -> ScreenTriangles:
    """
    Leva as malhas (mundo, metros) para a tela da câmera.

    Descarta triângulos inteiramente atrás do plano próximo, recorta os
    que o cruzam e remove os degenerados em tela.
    """
    if near <= 0:
        raise ReefValidationError(f"Plano próximo deve ser > 0, recebeu {near}")
    tri_cam: list[np.ndarray] = []
    tri_ids: list[np.ndarray] = []
    for mesh in meshes:
        cam = camera.to_camera(mesh.vertices)
        tris = cam[mesh.triangles]
        inside = tris[:, :, 2] >= near
        full = inside.all(axis=1)
        partial = inside.any(axis=1) & ~full
        if not partial.any():
            kept = tris[full]
        else:
            # Mantém a ordem original dos triângulos, com os recortes no lugar
            pieces = []
            for idx in np.flatnonzero(full | partial):
                if full[idx]:
                    pieces.append(tris[idx][None])
                else:
                    pieces.extend(piece[None] for piece in _clip_near(tris[idx].copy(), near))
            kept = np.concatenate(pieces) if pieces else np.empty((0, 3, 3))
        tri_cam.append(kept)
        tri_ids.append(np.full(len(kept), mesh.instance_id, dtype=np.uint32))

    if tri_cam:
        cam_all = np.concatenate(tri_cam)
        ids = np.concatenate(tri_ids)
    else:
        cam_all = np.empty((0, 3, 3))
        ids = np.empty(0, dtype=np.uint32)

    z = cam_all[:, :, 2]
    xy = np.empty(cam_all.shape[:2] + (2,))
    xy[..., 0] = camera.fx * cam_all[:, :, 0] / z + camera.cx
    xy[..., 1] = camera.fy * cam_all[:, :, 1] / z + camera.cy

    normals = np.cross(cam_all[:, 1] - cam_all[:, 0], cam_all[:, 2] - cam_all[:, 0])
    lengths = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = np.divide(normals, lengths, out=np.zeros_like(normals), where=lengths > 0)

    screen = ScreenTriangles(xy=xy, z=z, ids=ids, normals=normals)
    keep = np.abs(screen.area2) > SCREEN_AREA_EPS
    return ScreenTriangles(xy=xy[keep], z=z[keep], ids=ids[keep], normals=normals[keep])


def _rasterize_band(
    tris: ScreenTriangles, width: int, row0: int, row1: int
) -> tuple[np.ndarray, np.ndarray]:
    """z-buffer das linhas [row0, row1): devolve (profundidade, índice do triângulo vencedor)."""
    n_pix = (row1 - row0) * width
    depth = np.full(n_pix, np.inf)
    winner = np.full(n_pix, -1, dtype=np.int64)
    if len(tris) == 0:
        return depth.reshape(-1, width), winner.reshape(-1, width)

    xs, ys = tris.xy[..., 0], tris.xy[..., 1]
    col_lo = np.maximum(np.ceil(xs.min(axis=1) - 0.5), 0)
    col_hi = np.minimum(np.floor(xs.max(axis=1) - 0.5), width - 1)
    row_lo = np.maximum(np.ceil(ys.min(axis=1) - 0.5), row0)
    row_hi = np.minimum(np.floor(ys.max(axis=1) - 0.5), row1 - 1)
    valid = (col_lo <= col_hi) & (row_lo <= row_hi)
    idx = np.flatnonzero(valid)
    if idx.size == 0:
        return depth.reshape(-1, width), winner.reshape(-1, width)

    col_lo_i = col_lo[idx].astype(np.int64)
    row_lo_i = row_lo[idx].astype(np.int64)
    ncols = col_hi[idx].astype(np.int64) - col_lo_i + 1
    nrows = row_hi[idx].astype(np.int64) - row_lo_i + 1
    counts = ncols * nrows
    area2 = tris.area2[idx]

    start = 0
    cumulative = np.cumsum(counts)
    while start < idx.size:
        base = cumulative[start - 1] if start else 0
        stop = max(int(np.searchsorted(cumulative, base + CANDIDATE_CHUNK, side="right")), start + 1)
        sel = np.arange(start, stop)
        cnt = counts[sel]
        rep = np.repeat(sel, cnt)
        offsets = np.arange(int(cnt.sum())) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        px = col_lo_i[rep] + offsets % ncols[rep]
        py = row_lo_i[rep] + offsets // ncols[rep]
        pcx = px + 0.5
        pcy = py + 0.5

        t = idx[rep]
        x0, x1, x2 = xs[t, 0], xs[t, 1], xs[t, 2]
        y0, y1, y2 = ys[t, 0], ys[t, 1], ys[t, 2]
        e0 = (x2 - x1) * (pcy - y1) - (y2 - y1) * (pcx - x1)
        e1 = (x0 - x2) * (pcy - y2) - (y0 - y2) * (pcx - x2)
        e2 = (x1 - x0) * (pcy - y0) - (y1 - y0) * (pcx - x0)
        a = area2[rep]
        inside = np.where(
            a > 0,
            (e0 >= 0) & (e1 >= 0) & (e2 >= 0),
            (e0 <= 0) & (e1 <= 0) & (e2 <= 0),
        )
        if inside.any():
            e0, e1, e2, a, t = e0[inside], e1[inside], e2[inside], a[inside], t[inside]
            zs = tris.z[t]
            inv = (e0 / a) / zs[:, 0] + (e1 / a) / zs[:, 1] + (e2 / a) / zs[:, 2]
            zc = 1.0 / inv
            pix = (py[inside] - row0) * width + px[inside]

            order = np.lexsort((t, zc, pix))
            pix_sorted = pix[order]
            first = np.ones(order.size, dtype=bool)
            first[1:] = pix_sorted[1:] != pix_sorted[:-1]
            best = order[first]
            p, zb, tb = pix[best], zc[best], t[best]
            better = zb < depth[p]
            depth[p[better]] = zb[better]
            winner[p[better]] = tb[better]
        start = stop

    return depth.reshape(-1, width), winner.reshape(-1, width)


def _band_bounds(height: int, threads: int) -> list[tuple[int, int]]:
    bands = max(1, min(threads, height))
    edges = np.linspace(0, height, bands + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _ground_depth(camera: CameraModel) -> DepthMap:
    """Profundidade do plano z = 0 (mundo) em cada centro de pixel; inf onde o raio não o atinge."""
    cols = np.arange(camera.width) + 0.5
    rows = np.arange(camera.height) + 0.5
    u, v = np.meshgrid(cols, rows)
    rays = np.stack([(u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, np.ones_like(u)], axis=-1)
    world_dirs = rays @ camera.pose.rotation  # Rᵀ·r por pixel
    center_z = float(camera.center[2])
    dz = world_dirs[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = -center_z / dz
    depth = np.where((dz != 0) & (lam > 0), lam, np.inf)
    return DepthMap(camera.width, camera.height, depth)


def _shade_preview(tris: ScreenTriangles, winner: np.ndarray) -> np.ndarray:
    height, width = winner.shape
    preview = np.zeros((height, width, 3), dtype=np.uint8)
    covered = winner >= 0
    if not covered.any():
        return preview
    hit = winner[covered]
    lambert = np.abs(tris.normals[hit, 2])
    shade = PREVIEW_AMBIENT + (1.0 - PREVIEW_AMBIENT) * lambert
    colors = palette_colors(tris.ids[hit]).astype(np.float64)
    preview[covered] = np.clip(np.floor(colors * shade[:, None] + 0.5), 0, 255).astype(np.uint8)
    return preview


def render_meshes(
    meshes: Sequence[TriangleMesh],
    camera: CameraModel,
    *,
    scene_ref: str = "",
    near: float = DEFAULT_NEAR_M,
    threads: int = 1,
    preview: bool = True,
    include_ground: bool = False,
) -> RenderOutput:
    """
    Renderiza malhas no referencial do mundo (metros).

    Args:
        meshes: Malhas com instance_id >= 1.
        camera: Câmera da cena.
        scene_ref: Identificador da cena gravado na saída.
        near: Plano próximo em metros.
        threads: Número de faixas de linhas processadas em paralelo.
        preview: Gera a prévia RGB com sombreamento plano.
        include_ground: Anexa o mapa de profundidade do chão (camada separada).

    Returns:
        RenderOutput com profundidade e máscara alinhadas.
    """
    tris = project_scene(meshes, camera, near)
    width, height = camera.width, camera.height
    bands = _band_bounds(height, threads)
    if len(bands) == 1:
        results = [_rasterize_band(tris, width, 0, height)]
    else:
        with ThreadPoolExecutor(max_workers=len(bands)) as pool:
            results = list(pool.map(lambda b: _rasterize_band(tris, width, b[0], b[1]), bands))

    depth = np.vstack([d for d, _ in results])
    winner = np.vstack([w for _, w in results])
    mask = np.zeros((height, width), dtype=np.uint32)
    covered = winner >= 0
    mask[covered] = tris.ids[winner[covered]]

    logger.debug(f"{scene_ref}: {len(tris)} triângulos, {int(covered.sum())} pixels cobertos")
    return RenderOutput(
        depth=DepthMap(width, height, depth),
        mask=InstanceMask(width, height, mask),
        preview=_shade_preview(tris, winner) if preview else None,
        scene_ref=scene_ref,
        ground=_ground_depth(camera) if include_ground else None,
    )


def render(
    scene: ScenePlacement,
    camera: CameraModel,
    *,
    near: float = DEFAULT_NEAR_M,
    threads: int = 1,
    preview: bool = True,
    include_ground: bool = False,
) -> RenderOutput:
    """Renderiza uma cena posicionada: malhas das ostras convertidas para metros."""
    return render_meshes(
        world_meshes(scene),
        camera,
        scene_ref=scene.scene_id,
        near=near,
        threads=threads,
        preview=preview,
        include_ground=include_ground,
    )


# --- Codecs PNG ---


def _png_bytes(array: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(array)).save(buffer, format="PNG")
    return buffer.getvalue()


def depth_to_uint16(depth: DepthMap, max_depth_m: float, near_bright: bool = True) -> np.ndarray:
    """value = floor(65535·(1 − clamp(d/max)) + 0.5); fundo = 0."""
    if not max_depth_m > 0:
        raise ReefValidationError(f"max_depth_m deve ser > 0, recebeu {max_depth_m}")
    data = depth.data
    finite = np.isfinite(data)
    ratio = np.clip(np.where(finite, data, 0.0) / max_depth_m, 0.0, 1.0)
    scaled = 65535.0 * (1.0 - ratio) if near_bright else 65535.0 * ratio
    values = np.floor(scaled + 0.5).astype(np.uint16)
    values[~finite] = 0
    return values


def encode_depth_png(
    depth: DepthMap, max_depth_m: float, near_bright: bool = True, ground: Optional[DepthMap] = None
) -> bytes:
    """
    Codifica a profundidade em PNG 16 bits em tons de cinza.

    Com `ground`, pixels de fundo recebem a profundidade do chão.
    """
    if ground is not None:
        if (ground.width, ground.height) != (depth.width, depth.height):
            raise ReefValidationError("Camada de chão com dimensões diferentes da profundidade")
        merged = np.where(np.isfinite(depth.data), depth.data, ground.data)
        depth = DepthMap(depth.width, depth.height, merged)
    return _png_bytes(depth_to_uint16(depth, max_depth_m, near_bright))


def decode_depth_png(data: bytes) -> np.ndarray:
    """Valores 16 bits brutos de um PNG de profundidade."""
    with Image.open(io.BytesIO(data)) as img:
        return np.asarray(img).astype(np.uint16)


def instance_color(instance_id: int) -> tuple[int, int, int]:
    """
    Cor fixa por id: hash multiplicativo (id·2654435761 mod 2³²), um byte por
    canal, mapeado para [64, 255]. Fundo (0) é preto.
    """
    if instance_id == 0:
        return (0, 0, 0)
    h = (instance_id * PALETTE_MULTIPLIER) & 0xFFFFFFFF
    return tuple(64 + ((h >> shift) & 0xFF) % 192 for shift in (0, 8, 16))  # type: ignore[return-value]


def palette_colors(ids: np.ndarray) -> np.ndarray:
    """Versão vetorizada de instance_color: (N,) -> (N, 3) uint8."""
    h = (ids.astype(np.uint64) * np.uint64(PALETTE_MULTIPLIER)) & np.uint64(0xFFFFFFFF)
    channels = [np.uint64(64) + ((h >> np.uint64(s)) & np.uint64(0xFF)) % np.uint64(192) for s in (0, 8, 16)]
    colors = np.stack(channels, axis=-1).astype(np.uint8)
    colors[ids == 0] = 0
    return colors


def encode_mask_png(mask: InstanceMask) -> tuple[bytes, bytes]:
    """
    Máscara em PNG 16 bits (ids brutos) e visualização RGB 8 bits.

    Raises:
        CapacityError: id maior que 65535.
    """
    if mask.data.size and int(mask.data.max()) > MAX_MASK_ID:
        raise CapacityError(f"Id de instância {int(mask.data.max())} excede {MAX_MASK_ID}")
    raw = _png_bytes(mask.data.astype(np.uint16))
    vis = _png_bytes(palette_colors(mask.data.reshape(-1)).reshape(mask.height, mask.width, 3))
    return raw, vis


def decode_mask_png(data: bytes) -> InstanceMask:
    with Image.open(io.BytesIO(data)) as img:
        array = np.asarray(img).astype(np.uint32)
    return InstanceMask(array.shape[1], array.shape[0], array)


def encode_preview_png(preview: np.ndarray) -> bytes:
    return _png_bytes(np.asarray(preview, dtype=np.uint8))
