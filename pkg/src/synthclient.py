"""
Cliente do serviço externo de síntese (Stable Diffusion + ControlNet).

Contrato HTTP:
    POST /synthesize, multipart: depth (PNG), mask (PNG 16 bits, ids brutos),
    ref0..ref3 (JPEG/PNG), params (JSON: positive_prompt, negative_prompt,
    seed, denoise_strength, width, height), preview (PNG, opcional).
    200 -> corpo image/png + header X-Backend-Id.
    4xx/5xx -> JSON {"error": texto}.

Inclui um backend mock determinístico para testes herméticos. Dimensão
errada na resposta é erro de protocolo: nunca redimensionamos, para não
desalinhar imagem e máscara.
"""

import asyncio
import hashlib
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Protocol, Sequence

import httpx
import numpy as np
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config.settings import PROMPTS_DIR, settings
from src.errors import BackendError, ProtocolError, ReefIOError, ReefValidationError, SynthesisError, TransportError
from src.logging_config import get_logger
from src.rasterizer import RenderOutput, decode_depth_png, decode_mask_png, encode_depth_png, encode_mask_png
from src.rasterizer import encode_preview_png
from src.rng import STREAM_MOCK_NOISE, STREAM_REFERENCES, make_rng

logger = get_logger(__name__)

NUM_REFERENCES = 4
DEFAULT_DENOISE_STRENGTH = 0.75
DEFAULT_MAX_DEPTH_M = 2.0
MOCK_BACKEND_ID = "mock-controlnet-v1"
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

# Paleta do mock: verde escuro (longe) -> marrom (perto)
MOCK_FAR_RGB = np.array([24.0, 64.0, 52.0])
MOCK_NEAR_RGB = np.array([156.0, 124.0, 78.0])
MOCK_BACKGROUND_RGB = (14, 42, 40)
MOCK_BOUNDARY_FACTOR = 0.5
MOCK_NOISE_AMPLITUDE = 12.0
MOCK_NOISE_CELL_PX = 32


def image_size(data: bytes) -> tuple[int, int]:
    """(largura, altura) de uma imagem codificada."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            return img.size
    except (UnidentifiedImageError, OSError) as e:
        raise ProtocolError(f"Bytes não são uma imagem válida: {e}") from e


class PromptConfig(BaseModel):
    """Par de prompts positivo/negativo."""

    model_config = ConfigDict(frozen=True)

    positive: str
    negative: str = ""


def load_prompts(prompts_dir: Optional[Path] = None) -> PromptConfig:
    """
    Carrega oyster_positive.txt e oyster_negative.txt.

    Raises:
        ReefIOError: Arquivo de prompt positivo ausente.
    """
    directory = Path(prompts_dir or PROMPTS_DIR)
    positive_path = directory / "oyster_positive.txt"
    negative_path = directory / "oyster_negative.txt"
    if not positive_path.exists():
        raise ReefIOError(f"Prompt positivo não encontrado: {positive_path}")
    negative = negative_path.read_text(encoding="utf-8").strip() if negative_path.exists() else ""
    return PromptConfig(positive=positive_path.read_text(encoding="utf-8").strip(), negative=negative)


class SynthesisRequest(BaseModel):
    """Entrada de condicionamento de uma síntese."""

    model_config = ConfigDict(frozen=True)

    depth_png: bytes
    mask_png: bytes
    reference_images: tuple[bytes, ...]
    positive_prompt: str
    negative_prompt: str = ""
    seed: int = Field(ge=0)
    denoise_strength: float = Field(DEFAULT_DENOISE_STRENGTH, ge=0.0, le=1.0)
    output_size: tuple[int, int]
    scene_ref: str = ""
    preview_png: Optional[bytes] = None

    @model_validator(mode="after")
    def _check_contract(self) -> "SynthesisRequest":
        if len(self.reference_images) != NUM_REFERENCES:
            raise ValueError(f"São necessárias exatamente {NUM_REFERENCES} imagens de referência")
        try:
            depth_size = image_size(self.depth_png)
            mask_size = image_size(self.mask_png)
        except ProtocolError as e:
            raise ValueError(str(e)) from e
        if depth_size != mask_size:
            raise ValueError(f"Profundidade {depth_size} e máscara {mask_size} com tamanhos diferentes")
        if depth_size != tuple(self.output_size):
            raise ValueError(f"Condicionamento {depth_size} difere de output_size {self.output_size}")
        return self

    def params(self) -> dict:
        width, height = self.output_size
        return {
            "positive_prompt": self.positive_prompt,
            "negative_prompt": self.negative_prompt,
            "seed": self.seed,
            "denoise_strength": self.denoise_strength,
            "width": width,
            "height": height,
        }

    def params_json(self) -> str:
        return json.dumps(self.params(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class SynthesisResult(BaseModel):
    """Imagem sintetizada, pareada à máscara da cena de origem."""

    model_config = ConfigDict(frozen=True)

    image: bytes
    request_digest: str
    backend_id: str
    elapsed_ms: float = Field(ge=0.0)
    scene_ref: str = ""


def request_digest(request: SynthesisRequest) -> str:
    """sha256 dos parâmetros canônicos e de cada parte binária (com prefixo de tamanho)."""
    h = hashlib.sha256()
    h.update(request.params_json().encode("utf-8"))
    parts = [("depth", request.depth_png), ("mask", request.mask_png)]
    parts += [(f"ref{i}", ref) for i, ref in enumerate(request.reference_images)]
    if request.preview_png is not None:
        parts.append(("preview", request.preview_png))
    for name, data in parts:
        h.update(name.encode("ascii"))
        h.update(len(data).to_bytes(8, "big"))
        h.update(data)
    return h.hexdigest()


def select_references(pool_size: int, seed: int) -> list[int]:
    """Índices de 4 referências distintas sorteadas do pool."""
    if pool_size < NUM_REFERENCES:
        raise ReefValidationError(f"Pool de referências com {pool_size} imagens; mínimo {NUM_REFERENCES}")
    rng = make_rng(seed, STREAM_REFERENCES)
    return [int(i) for i in rng.choice(pool_size, size=NUM_REFERENCES, replace=False)]


def build_request(
    render: RenderOutput,
    real_pool: Sequence[bytes],
    prompts: PromptConfig,
    seed: int,
    *,
    max_depth_m: float = DEFAULT_MAX_DEPTH_M,
    denoise_strength: float = DEFAULT_DENOISE_STRENGTH,
    include_preview: bool = False,
) -> SynthesisRequest:
    """
    Monta a requisição: par profundidade/máscara da renderização + 4 referências reais.

    Raises:
        ReefValidationError: pool com menos de 4 imagens.
    """
    mask_png, _ = encode_mask_png(render.mask)
    preview_png = None
    if include_preview and render.preview is not None:
        preview_png = encode_preview_png(render.preview)
    return request_from_pngs(
        encode_depth_png(render.depth, max_depth_m, ground=render.ground),
        mask_png,
        real_pool,
        prompts,
        seed,
        scene_ref=render.scene_ref,
        denoise_strength=denoise_strength,
        preview_png=preview_png,
    )


def request_from_pngs(
    depth_png: bytes,
    mask_png: bytes,
    real_pool: Sequence[bytes],
    prompts: PromptConfig,
    seed: int,
    *,
    scene_ref: str = "",
    denoise_strength: float = DEFAULT_DENOISE_STRENGTH,
    preview_png: Optional[bytes] = None,
) -> SynthesisRequest:
    """Mesma requisição a partir dos PNGs já gravados pelo estágio de geração."""
    indices = select_references(len(real_pool), seed)
    return SynthesisRequest(
        depth_png=depth_png,
        mask_png=mask_png,
        reference_images=tuple(real_pool[i] for i in indices),
        positive_prompt=prompts.positive,
        negative_prompt=prompts.negative,
        seed=seed,
        denoise_strength=denoise_strength,
        output_size=image_size(depth_png),
        scene_ref=scene_ref,
        preview_png=preview_png,
    )


def placeholder_reference_pool(size: tuple[int, int] = (64, 48)) -> list[bytes]:
    """Quatro referências lisas (tons de água) para execuções --mock sem pool real."""
    colors = [(18, 52, 60), (30, 70, 58), (46, 62, 40), (22, 40, 66)]
    pool = []
    for color in colors:
        buffer = io.BytesIO()
        Image.new("RGB", size, color).save(buffer, format="PNG")
        pool.append(buffer.getvalue())
    return pool


def load_reference_pool(directory: Path) -> list[bytes]:
    """Lê as imagens reais de um diretório, em ordem de nome."""
    path = Path(directory)
    if not path.is_dir():
        raise ReefIOError(f"Diretório de referências não encontrado: {path}")
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    return [p.read_bytes() for p in files]


# --- Backends ---


@dataclass(frozen=True)
class BackendResponse:
    image: bytes
    backend_id: str


class SynthesisBackend(Protocol):
    async def submit(self, request: SynthesisRequest) -> BackendResponse: ...


def mock_image(request: SynthesisRequest) -> bytes:
    """
    Composição determinística: profundidade colorida (verde -> marrom),
    bordas de instância escurecidas e ruído de baixa frequência da seed
    sobre o primeiro plano. Fundo sem profundidade fica uniforme.
    """
    depth = decode_depth_png(request.depth_png).astype(np.float64)
    ids = decode_mask_png(request.mask_png).data
    height, width = depth.shape
    foreground = depth > 0

    t = (depth / 65535.0)[..., None]
    rgb = MOCK_FAR_RGB * (1.0 - t) + MOCK_NEAR_RGB * t

    rng = make_rng(request.seed, STREAM_MOCK_NOISE)
    grid = rng.uniform(-1.0, 1.0, (height // MOCK_NOISE_CELL_PX + 2, width // MOCK_NOISE_CELL_PX + 2))
    coarse = Image.fromarray(grid.astype(np.float32))
    noise = np.asarray(coarse.resize((width, height), Image.Resampling.BILINEAR), dtype=np.float64)
    rgb = rgb + (MOCK_NOISE_AMPLITUDE * noise)[..., None]

    boundary = np.zeros_like(foreground)
    boundary[:, 1:] |= ids[:, 1:] != ids[:, :-1]
    boundary[:, :-1] |= ids[:, 1:] != ids[:, :-1]
    boundary[1:, :] |= ids[1:, :] != ids[:-1, :]
    boundary[:-1, :] |= ids[1:, :] != ids[:-1, :]
    rgb[boundary] *= MOCK_BOUNDARY_FACTOR

    out = np.empty((height, width, 3), dtype=np.uint8)
    out[...] = MOCK_BACKGROUND_RGB
    painted = foreground | boundary
    out[painted] = np.clip(np.floor(rgb[painted] + 0.5), 0, 255).astype(np.uint8)

    buffer = io.BytesIO()
    Image.fromarray(out).save(buffer, format="PNG")
    return buffer.getvalue()


def mock_backend(request: SynthesisRequest) -> SynthesisResult:
    """Backend mock: função pura dos bytes da requisição."""
    return SynthesisResult(
        image=mock_image(request),
        request_digest=request_digest(request),
        backend_id=MOCK_BACKEND_ID,
        elapsed_ms=0.0,
        scene_ref=request.scene_ref,
    )


MockFault = Literal["wrong_size", "server_error", "unreachable"]


@dataclass
class MockBackend:
    """Backend em processo com injeção de falhas."""

    fault: Optional[MockFault] = None
    calls: int = field(default=0, init=False)

    async def submit(self, request: SynthesisRequest) -> BackendResponse:
        self.calls += 1
        if self.fault == "unreachable":
            raise TransportError("Mock: backend inacessível")
        if self.fault == "server_error":
            raise BackendError(500, "mock: falha interna")
        if self.fault == "wrong_size":
            width, height = request.output_size
            buffer = io.BytesIO()
            Image.new("RGB", (width + 1, height), MOCK_BACKGROUND_RGB).save(buffer, format="PNG")
            return BackendResponse(buffer.getvalue(), MOCK_BACKEND_ID)
        return BackendResponse(mock_image(request), MOCK_BACKEND_ID)


class HttpBackend:
    """Backend HTTP (contrato multipart POST /synthesize)."""

    def __init__(
        self,
        base_url: Optional[str] = None,
        timeout: Optional[float] = None,
        transport: Optional[httpx.AsyncBaseTransport] = None,
    ):
        """
        Args:
            base_url: URL do serviço. Se None, usa REEFFORGE_BACKEND_URL.
            timeout: Timeout em segundos (default 120).
            transport: Transporte httpx alternativo (testes).
        """
        self.base_url = base_url or settings.backend.url
        if not self.base_url:
            raise ReefValidationError("URL do backend não configurada (REEFFORGE_BACKEND_URL ou --backend-url)")
        self.timeout = timeout if timeout is not None else settings.backend.timeout
        self.transport = transport

    async def submit(self, request: SynthesisRequest) -> BackendResponse:
        files: list[tuple[str, tuple[Optional[str], bytes, str]]] = [
            ("depth", ("depth.png", request.depth_png, "image/png")),
            ("mask", ("mask.png", request.mask_png, "image/png")),
        ]
        for i, ref in enumerate(request.reference_images):
            files.append((f"ref{i}", (f"ref{i}", ref, _sniff_mime(ref))))
        if request.preview_png is not None:
            files.append(("preview", ("preview.png", request.preview_png, "image/png")))
        files.append(("params", (None, request.params_json().encode("utf-8"), "application/json")))

        try:
            async with httpx.AsyncClient(
                base_url=self.base_url, timeout=self.timeout, transport=self.transport
            ) as client:
                response = await client.post("/synthesize", files=files)
        except httpx.TimeoutException as e:
            raise TransportError(f"Timeout após {self.timeout}s: {e}") from e
        except httpx.TransportError as e:
            raise TransportError(f"Backend inacessível em {self.base_url}: {e}") from e

        if response.status_code != 200:
            raise BackendError(response.status_code, _error_message(response))
        content_type = response.headers.get("content-type", "")
        if not content_type.startswith("image/png"):
            raise ProtocolError(f"Resposta com content-type inesperado: {content_type!r}")
        return BackendResponse(response.content, response.headers.get("x-backend-id", "unknown"))


def _sniff_mime(data: bytes) -> str:
    return "image/jpeg" if data[:3] == b"\xff\xd8\xff" else "image/png"


def _error_message(response: httpx.Response) -> str:
    try:
        payload = response.json()
        if isinstance(payload, dict) and "error" in payload:
            return str(payload["error"])
    except ValueError:
        pass
    return response.text[:500] or response.reason_phrase


# --- Cliente ---


async def synthesize(
    request: SynthesisRequest,
    backend: SynthesisBackend,
    *,
    max_retries: int = 3,
    backoff_base: float = 1.0,
) -> SynthesisResult:
    """
    Envia a requisição com retry exponencial para falhas transitórias.

    Transporte e 5xx são retentados até max_retries vezes (esperas
    base, 2·base, 4·base...); 4xx e erros de protocolo não.

    Raises:
        TransportError: backend inacessível ou timeout após os retries.
        BackendError: resposta não-sucesso, com a mensagem do servidor.
        ProtocolError: imagem com dimensões diferentes de output_size.
    """
    digest = request_digest(request)
    for attempt in range(max_retries + 1):
        start = time.perf_counter()
        try:
            response = await backend.submit(request)
        except (TransportError, BackendError) as e:
            transient = isinstance(e, TransportError) or (isinstance(e, BackendError) and e.transient)
            if not transient or attempt == max_retries:
                logger.error(f"{request.scene_ref}: síntese falhou (tentativa {attempt + 1}): {e}")
                raise
            delay = backoff_base * 2**attempt
            logger.warning(f"{request.scene_ref}: {e} (tentativa {attempt + 1}/{max_retries + 1}, nova em {delay}s)")
            await asyncio.sleep(delay)
            continue

        elapsed_ms = (time.perf_counter() - start) * 1000
        size = image_size(response.image)
        if size != tuple(request.output_size):
            raise ProtocolError(f"Backend devolveu {size[0]}x{size[1]}, esperado {request.output_size}")
        return SynthesisResult(
            image=response.image,
            request_digest=digest,
            backend_id=response.backend_id,
            elapsed_ms=elapsed_ms,
            scene_ref=request.scene_ref,
        )
    raise AssertionError("unreachable")


class SynthClient:
    """Várias requisições em voo com limite de concorrência."""

    def __init__(
        self,
        backend: SynthesisBackend,
        concurrency: Optional[int] = None,
        max_retries: Optional[int] = None,
        backoff_base: float = 1.0,
    ):
        self.backend = backend
        self.concurrency = concurrency or settings.backend.concurrency
        self.max_retries = max_retries if max_retries is not None else settings.backend.max_retries
        self.backoff_base = backoff_base
        if self.concurrency < 1:
            raise ReefValidationError(f"Concorrência deve ser >= 1, recebeu {self.concurrency}")

    async def synthesize(self, request: SynthesisRequest) -> SynthesisResult:
        return await synthesize(
            request, self.backend, max_retries=self.max_retries, backoff_base=self.backoff_base
        )

    async def synthesize_many(
        self, requests: Sequence[SynthesisRequest], fail_fast: bool = False
    ) -> list[SynthesisResult | SynthesisError]:
        """
        Sintetiza em paralelo (até `concurrency` em voo).

        Args:
            requests: Requisições, uma por cena.
            fail_fast: Propaga a primeira falha em vez de devolvê-la na lista.

        Returns:
            Lista na ordem das requisições: resultado ou o erro de síntese.
        """
        semaphore = asyncio.Semaphore(self.concurrency)

        async def one(request: SynthesisRequest) -> SynthesisResult:
            async with semaphore:
                return await self.synthesize(request)

        if fail_fast:
            return list(await asyncio.gather(*(one(r) for r in requests)))

        outcomes = await asyncio.gather(*(one(r) for r in requests), return_exceptions=True)
        results: list[SynthesisResult | SynthesisError] = []
        for outcome in outcomes:
            if isinstance(outcome, SynthesisError) or isinstance(outcome, SynthesisResult):
                results.append(outcome)
            elif isinstance(outcome, BaseException):
                raise outcome
        return results

    def synthesize_sync(self, request: SynthesisRequest) -> SynthesisResult:
        """Versão bloqueante (um event loop por chamada; segura entre threads)."""
        return asyncio.run(self.synthesize(request))
