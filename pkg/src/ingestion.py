"""
Módulo de ingestão: imagens anotadas, predições e ground truth de diversas fontes.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Literal, Optional, Type, TypeVar

from PIL import Image, UnidentifiedImageError
from pydantic import ValidationError

from src.datasetkit import label_path_for, parse_yolo_text, read_yolo_labels
from src.errors import ParseError, ReefIOError, ReefValidationError
from src.logging_config import get_logger
from src.models import Detection, GroundTruth, LabeledImage, Source

# Logger para este módulo
logger = get_logger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
MAX_ERROR_SAMPLES = 10

BoxT = TypeVar("BoxT", bound=GroundTruth)


@dataclass
class LoadResult:
    """Resultado estruturado de carregamento de dados com metricas de erro."""

    entries: list[LabeledImage] = field(default_factory=list)
    total_rows: int = 0
    success_count: int = 0
    error_count: int = 0
    error_samples: list[str] = field(default_factory=list)

    @property
    def success_rate(self) -> float:
        """Taxa de sucesso do carregamento (0.0 a 1.0)."""
        if self.total_rows == 0:
            return 1.0
        return self.success_count / self.total_rows

    @property
    def has_errors(self) -> bool:
        """Indica se houve erros durante o carregamento."""
        return self.error_count > 0

    def add_error(self, message: str) -> None:
        self.error_count += 1
        if len(self.error_samples) < MAX_ERROR_SAMPLES:
            self.error_samples.append(message)


def list_images(directory: Path | str) -> list[Path]:
    """Imagens do diretório em ordem de nome."""
    path = Path(directory)
    if not path.is_dir():
        raise ReefIOError(f"Diretório de imagens não encontrado: {path}")
    return sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def read_image_size(path: Path) -> tuple[int, int]:
    """(largura, altura) lida do cabeçalho da imagem."""
    try:
        with Image.open(path) as img:
            return img.size
    except (UnidentifiedImageError, OSError) as e:
        raise ReefIOError(f"Imagem ilegível {path}: {e}") from e


def default_labels_dir(images_dir: Path) -> Path:
    """Convenção YOLO: .../images -> .../labels; caso contrário, o próprio diretório."""
    if images_dir.name == "images":
        return images_dir.parent / "labels"
    return images_dir


def load_labeled_dir(
    images_dir: Path | str,
    labels_dir: Optional[Path | str] = None,
    source: Source = "real",
) -> LoadResult:
    """
    Carrega pares imagem + label YOLO de um diretório.

    Imagens sem arquivo de label entram sem caixas (imagens de fundo). Pares
    com label malformado ou imagem ilegível são contados como erro e pulados.

    Args:
        images_dir: Diretório das imagens.
        labels_dir: Diretório dos labels (default: irmão `labels` ou o próprio).
        source: "real" ou "synthetic"; sintéticas recebem scene_ref = nome do arquivo.

    Returns:
        LoadResult com as entradas válidas e as amostras de erro.
    """
    images_path = Path(images_dir)
    labels_path = Path(labels_dir) if labels_dir is not None else default_labels_dir(images_path)
    result = LoadResult()

    for image in list_images(images_path):
        result.total_rows += 1
        try:
            width, height = read_image_size(image)
            label_file = label_path_for(image, labels_path)
            boxes = read_yolo_labels(label_file) if label_file.exists() else []
            entry = LabeledImage(
                image_path=image.as_posix(),
                width=width,
                height=height,
                boxes=tuple(boxes),
                source=source,
                scene_ref=image.stem if source == "synthetic" else None,
            )
        except (ParseError, ReefIOError, ValidationError) as e:
            result.add_error(f"{image.name}: {e}")
            logger.warning(f"Par ignorado {image.name}: {e}")
            continue
        result.entries.append(entry)
        result.success_count += 1

    logger.info(
        f"{result.success_count}/{result.total_rows} imagens carregadas de {images_path} "
        f"({result.error_count} erros)"
    )
    return result


# --- Predições / ground truth em JSON ---


def _iter_array_items(text: str, path: Path) -> Iterator[tuple[int, Any]]:
    """Itens de um array JSON de topo com o número da linha onde cada um começa."""
    decoder = json.JSONDecoder()

    def skip_ws(i: int) -> int:
        while i < len(text) and text[i] in " \t\r\n":
            i += 1
        return i

    def line_of(i: int) -> int:
        return text.count("\n", 0, i) + 1

    idx = skip_ws(0)
    if idx >= len(text) or text[idx] != "[":
        raise ParseError("esperado um array JSON de detecções", path, line_of(idx))
    idx = skip_ws(idx + 1)
    if idx < len(text) and text[idx] == "]":
        return
    while True:
        try:
            item, end = decoder.raw_decode(text, idx)
        except json.JSONDecodeError as e:
            raise ParseError(f"JSON inválido ({e.msg})", path, e.lineno) from e
        yield line_of(idx), item
        idx = skip_ws(end)
        if idx < len(text) and text[idx] == ",":
            idx = skip_ws(idx + 1)
            continue
        if idx < len(text) and text[idx] == "]":
            break
        raise ParseError("esperado ',' ou ']'", path, line_of(idx))
    if skip_ws(idx + 1) != len(text):
        raise ParseError("conteúdo após o array", path, line_of(idx + 1))


def _load_boxes_json(path: Path | str, model: Type[BoxT]) -> list[BoxT]:
    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as e:
        raise ReefIOError(f"Falha ao ler {source}: {e}") from e

    items: list[BoxT] = []
    for line, raw in _iter_array_items(text, source):
        if not isinstance(raw, dict):
            raise ParseError("cada item deve ser um objeto", source, line)
        if isinstance(raw.get("image_id"), int):
            raw = {**raw, "image_id": str(raw["image_id"])}
        try:
            items.append(model.model_validate(raw))
        except ValidationError as e:
            error = e.errors()[0]
            where = ".".join(str(p) for p in error["loc"])
            raise ParseError(f"{where}: {error['msg']}" if where else error["msg"], source, line) from e
    return items


def load_detections_json(path: Path | str) -> list[Detection]:
    """
    Predições: array de {image_id, x_min, y_min, x_max, y_max, confidence, class_id}.

    Raises:
        ReefIOError: arquivo ilegível.
        ParseError: item fora do schema, com caminho e linha.
    """
    return _load_boxes_json(path, Detection)


def load_ground_truth_json(path: Path | str) -> list[GroundTruth]:
    """Ground truth no mesmo schema (confidence ignorada se presente)."""
    return _load_boxes_json(path, GroundTruth)


def load_yolo_dir_as_detections(
    labels_dir: Path | str,
    sizes: dict[str, tuple[int, int]],
    default_confidence: float = 1.0,
    kind: Literal["detection", "ground_truth"] = "detection",
) -> list[Any]:
    """
    Converte um diretório de labels YOLO em retângulos de pixel.

    Uma 6ª coluna opcional é lida como confiança; sem ela, usa default_confidence.
    image_id é o nome do arquivo sem extensão.

    Raises:
        ReefValidationError: label sem tamanho de imagem conhecido.
    """
    directory = Path(labels_dir)
    if not directory.is_dir():
        raise ReefIOError(f"Diretório de labels não encontrado: {directory}")
    out: list[Any] = []
    for label_file in sorted(directory.glob("*.txt")):
        image_id = label_file.stem
        if image_id not in sizes:
            raise ReefValidationError(f"Tamanho desconhecido para a imagem '{image_id}' ({label_file})")
        width, height = sizes[image_id]
        try:
            text = label_file.read_text(encoding="utf-8")
        except OSError as e:
            raise ReefIOError(f"Falha ao ler {label_file}: {e}") from e
        for box, confidence in parse_yolo_text(text, label_file, allow_confidence=True):
            x_min, y_min, x_max, y_max = box.to_pixels(width, height)
            fields = dict(image_id=image_id, x_min=x_min, y_min=y_min, x_max=x_max, y_max=y_max, class_id=box.class_id)
            if kind == "ground_truth":
                out.append(GroundTruth(**fields))
            else:
                conf = default_confidence if confidence is None else confidence
                out.append(Detection(**fields, confidence=conf))
    return out


def image_size_index(source: Path | str) -> dict[str, tuple[int, int]]:
    """
    Índice image_id -> (largura, altura).

    Aceita um diretório de imagens (tamanhos lidos com Pillow), um manifest
    de dataset (entries com image_path/width/height) ou um objeto JSON
    {image_id: [largura, altura]}.
    """
    path = Path(source)
    if path.is_dir():
        return {image.stem: read_image_size(image) for image in list_images(path)}
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ReefIOError(f"Falha ao ler {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"JSON inválido ({e.msg})", path, e.lineno) from e

    if isinstance(data, dict) and "entries" in data:
        return {Path(e["image_path"]).stem: (int(e["width"]), int(e["height"])) for e in data["entries"]}
    if isinstance(data, dict):
        index = {}
        for key, value in data.items():
            if not (isinstance(value, list) and len(value) == 2):
                raise ReefValidationError(f"{path}: tamanho de '{key}' deve ser [largura, altura]")
            index[str(key)] = (int(value[0]), int(value[1]))
        return index
    raise ReefValidationError(f"{path}: índice de tamanhos deve ser um objeto JSON")
