"""
Anotações de detecção a partir de máscaras de instância, labels YOLO,
split do dataset misto e configuração do treinador externo.

O split segue o protocolo de avaliação: uma fração das imagens reais
(default 30%) vai para treino junto com todo o sintético; o restante das
reais forma o teste. Sintético nunca entra no teste.
"""

from concurrent.futures import ThreadPoolExecutor
from decimal import ROUND_FLOOR, Decimal
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import pandas as pd
import yaml
from pydantic import ValidationError

from src import __version__
from src.errors import ParseError, ReefIOError, ReefValidationError
from src.fileio import atomic_write_text
from src.logging_config import get_logger
from src.models import CLASS_NAMES, BoundingBox, DatasetManifest, LabeledImage
from src.rasterizer import InstanceMask
from src.rng import STREAM_SPLIT, make_rng

logger = get_logger(__name__)

DEFAULT_MIN_PIXELS = 25
DEFAULT_REAL_TRAIN_FRAC = 0.30
DEFAULT_MODEL = "yolov10l.pt"
YOLO_FIELDS = 5

# Hiperparâmetros de treino do detector (YOLOv10 sobre o dataset misto)
TRAINING_DEFAULTS: dict[str, Any] = {
    "epochs": 300,
    "lr0": 0.01,
    "scheduler": "cosine",
    "optimizer": "Adam",
    "momentum": 0.937,
    "weight_decay": 0.0005,
    "batch": 16,
    "imgsz": 640,
    "mosaic": 1.0,
    "close_mosaic": 10,
    "augment": "randaugment",
    "erasing": 0.4,
    "fliplr": 0.5,
    "scale": 0.5,
    "val_iou": 0.7,
    "max_det": 300,
}


# --- Máscara -> caixas ---


def mask_to_boxes(mask: InstanceMask, min_pixels: int = DEFAULT_MIN_PIXELS) -> list[BoundingBox]:
    """
    Caixa justa de cada instância visível, normalizada com bordas de pixel.

    cx = (x_min + x_max + 1) / (2·largura), w = (x_max − x_min + 1) / largura
    (idem para y/h). Instâncias com menos de `min_pixels` pixels são descartadas.

    Returns:
        Caixas em ordem crescente de id (lista vazia para máscara vazia).
    """
    ys, xs = np.nonzero(mask.data)
    if ys.size == 0:
        return []
    pixels = pd.DataFrame({"id": mask.data[ys, xs], "x": xs, "y": ys})
    extents = pixels.groupby("id", sort=True).agg(
        x_min=("x", "min"), x_max=("x", "max"), y_min=("y", "min"), y_max=("y", "max"), pixels=("x", "size")
    )
    kept = extents[extents["pixels"] >= min_pixels]
    dropped = len(extents) - len(kept)
    if dropped:
        logger.debug(f"{dropped} instâncias com menos de {min_pixels} pixels visíveis descartadas")

    width, height = mask.width, mask.height
    return [
        BoundingBox(
            cx=(row.x_min + row.x_max + 1) / (2 * width),
            cy=(row.y_min + row.y_max + 1) / (2 * height),
            w=(row.x_max - row.x_min + 1) / width,
            h=(row.y_max - row.y_min + 1) / height,
        )
        for row in kept.itertuples()
    ]


def masks_to_boxes(
    masks: Sequence[InstanceMask], min_pixels: int = DEFAULT_MIN_PIXELS, threads: int = 1
) -> list[list[BoundingBox]]:
    """mask_to_boxes em paralelo por imagem, resultado na ordem de entrada."""
    if threads <= 1 or len(masks) <= 1:
        return [mask_to_boxes(m, min_pixels) for m in masks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda m: mask_to_boxes(m, min_pixels), masks))


# --- Labels YOLO ---


def format_yolo_line(box: BoundingBox) -> str:
    return f"{box.class_id} {box.cx:.6f} {box.cy:.6f} {box.w:.6f} {box.h:.6f}\n"


def label_path_for(image_path: str | Path, labels_dir: Path | str) -> Path:
    return Path(labels_dir) / f"{Path(image_path).stem}.txt"


def write_yolo_labels(entry: LabeledImage, labels_dir: Path | str) -> Path:
    """Um arquivo por imagem, uma linha por caixa, LF."""
    path = label_path_for(entry.image_path, labels_dir)
    atomic_write_text(path, "".join(format_yolo_line(b) for b in entry.boxes))
    return path


def parse_yolo_text(
    text: str, path: Optional[Path | str] = None, allow_confidence: bool = False
) -> list[tuple[BoundingBox, Optional[float]]]:
    """
    Parse de labels YOLO; linhas vazias são ignoradas.

    Com allow_confidence, aceita uma 6ª coluna opcional (confiança em [0, 1]).

    Raises:
        ParseError: contagem de campos, número inválido ou valor fora do intervalo.
    """
    parsed: list[tuple[BoundingBox, Optional[float]]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        expected = (YOLO_FIELDS, YOLO_FIELDS + 1) if allow_confidence else (YOLO_FIELDS,)
        if len(fields) not in expected:
            raise ParseError(f"esperados {YOLO_FIELDS} campos, encontrados {len(fields)}", path, lineno)
        try:
            class_id = int(fields[0])
            values = [float(v) for v in fields[1:]]
        except ValueError as e:
            raise ParseError(f"valor não numérico: {e}", path, lineno) from e
        confidence = values[4] if len(values) == 5 else None
        if confidence is not None and not 0.0 <= confidence <= 1.0:
            raise ParseError(f"confiança fora de [0, 1]: {confidence}", path, lineno)
        try:
            box = BoundingBox(class_id=class_id, cx=values[0], cy=values[1], w=values[2], h=values[3])
        except ValidationError as e:
            raise ParseError(f"caixa inválida ({e.errors()[0]['msg']})", path, lineno) from e
        parsed.append((box, confidence))
    return parsed


def read_yolo_labels(path: Path | str) -> list[BoundingBox]:
    """
    Inverso de write_yolo_labels (até 1e-6).

    Raises:
        ReefIOError: arquivo ilegível.
        ParseError: linha malformada, com número da linha.
    """
    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as e:
        raise ReefIOError(f"Falha ao ler labels {source}: {e}") from e
    return [box for box, _ in parse_yolo_text(text, source)]


# --- Split ---


def train_count(total: int, fraction: float) -> int:
    """floor(fraction · total) sobre o valor decimal da fração (0.30·2025 = 607)."""
    return int((Decimal(repr(fraction)) * total).to_integral_value(rounding=ROUND_FLOOR))


def mix_split(
    real: Sequence[LabeledImage],
    synth: Sequence[LabeledImage],
    real_train_frac: float = DEFAULT_REAL_TRAIN_FRAC,
    seed: int = 0,
    *,
    min_pixels: int = DEFAULT_MIN_PIXELS,
    config_echo: Optional[dict[str, Any]] = None,
) -> DatasetManifest:
    """
    Monta o dataset misto.

    Args:
        real: Entradas reais (ordem de entrada faz parte da determinação do split).
        synth: Entradas sintéticas; todas vão para treino.
        real_train_frac: Fração das reais usada em treino.
        seed: Seed do embaralhamento.

    Raises:
        ReefValidationError: fração fora de [0, 1] ou entrada com source trocado.
    """
    if not 0.0 <= real_train_frac <= 1.0:
        raise ReefValidationError(f"real_train_frac deve estar em [0, 1], recebeu {real_train_frac}")
    if any(e.source != "real" for e in real):
        raise ReefValidationError("Entrada não-real na lista de reais")
    if any(e.source != "synthetic" for e in synth):
        raise ReefValidationError("Entrada não-sintética na lista de sintéticas")

    n_train = train_count(len(real), real_train_frac)
    order = make_rng(seed, STREAM_SPLIT).permutation(len(real))
    chosen = set(int(i) for i in order[:n_train])

    split: dict[str, str] = {}
    for i, entry in enumerate(real):
        split[entry.image_path] = "train" if i in chosen else "test"
    for entry in synth:
        split[entry.image_path] = "train"

    manifest = DatasetManifest(
        entries=tuple(real) + tuple(synth),
        split=split,  # type: ignore[arg-type]
        seed=seed,
        real_train_frac=real_train_frac,
        min_pixels=min_pixels,
        config_echo=config_echo or {},
        tool_version=__version__,
    )
    logger.info(
        f"Split: {n_train} reais + {len(synth)} sintéticas em treino, {len(real) - n_train} reais em teste"
    )
    return manifest


def write_manifest(manifest: DatasetManifest, path: Path | str) -> Path:
    target = Path(path)
    atomic_write_text(target, manifest.model_dump_json(indent=2) + "\n")
    return target


def read_manifest(path: Path | str) -> DatasetManifest:
    """
    Raises:
        ReefIOError: arquivo ilegível.
        pydantic.ValidationError: manifest fora do schema.
    """
    source = Path(path)
    try:
        raw = source.read_text(encoding="utf-8")
    except OSError as e:
        raise ReefIOError(f"Falha ao ler manifest {source}: {e}") from e
    return DatasetManifest.model_validate_json(raw)


# --- Configuração do treinador ---


def emit_training_config(
    manifest: DatasetManifest,
    out: Path | str,
    *,
    model: str = DEFAULT_MODEL,
    overrides: Optional[dict[str, Any]] = None,
) -> Path:
    """
    Grava a configuração do treinador (YAML chave: valor) e as listas train.txt/test.txt ao lado.

    Raises:
        ReefIOError: caminho não gravável.
    """
    target = Path(out)
    train_list = target.parent / "train.txt"
    test_list = target.parent / "test.txt"
    atomic_write_text(train_list, "".join(f"{e.image_path}\n" for e in manifest.subset("train")))
    atomic_write_text(test_list, "".join(f"{e.image_path}\n" for e in manifest.subset("test")))

    config: dict[str, Any] = {
        "model": model,
        "train": train_list.name,
        "val": test_list.name,
        "nc": len(CLASS_NAMES),
        "names": list(CLASS_NAMES),
        **TRAINING_DEFAULTS,
        **(overrides or {}),
    }
    atomic_write_text(target, yaml.safe_dump(config, sort_keys=False, default_flow_style=None))
    logger.info(f"Configuração de treino gravada em {target}")
    return target


def read_training_config(path: Path | str) -> dict[str, Any]:
    source = Path(path)
    try:
        loaded = yaml.safe_load(source.read_text(encoding="utf-8"))
    except OSError as e:
        raise ReefIOError(f"Falha ao ler {source}: {e}") from e
    if not isinstance(loaded, dict):
        raise ReefValidationError(f"Configuração de treino deve ser um mapeamento: {source}")
    return loaded
