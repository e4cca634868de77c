"""
Avaliação de detecção no estilo COCO e benchmark de latência/frequência.

AP usa interpolação de 101 pontos sobre o envelope de precisão; o mAP50-95
é a média do AP nos limiares de IoU 0.50, 0.55, ..., 0.95. Avaliação é
agnóstica a classe (classe única: ostra).

Frequência é vazão ponta a ponta (quadros concluídos por segundo de relógio),
sempre reportada junto do tempo de inferência pura.
"""

import importlib
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import BenchRunnerError, ReefValidationError, UndefinedMetricError
from src.logging_config import get_logger
from src.models import Detection, GroundTruth

logger = get_logger(__name__)

IOU_THRESHOLDS: tuple[float, ...] = tuple(float(t) for t in np.round(np.linspace(0.5, 0.95, 10), 2))
RECALL_POINTS = np.linspace(0.0, 1.0, 101)
DEFAULT_MAX_DET = 300

Rect = tuple[float, float, float, float]


def threshold_key(threshold: float) -> str:
    return f"{threshold:.2f}"


def _check_rect(rect: Rect) -> None:
    x_min, y_min, x_max, y_max = rect
    if not (x_min < x_max and y_min < y_max):
        raise ReefValidationError(f"Retângulo degenerado: {rect}")


def iou(a: Rect, b: Rect) -> float:
    """
    Interseção sobre união de dois retângulos (x_min, y_min, x_max, y_max).

    Raises:
        ReefValidationError: retângulo degenerado.
    """
    _check_rect(a)
    _check_rect(b)
    iw = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    ih = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union


def iou_matrix(dets: np.ndarray, gts: np.ndarray) -> np.ndarray:
    """IoU (N, M) entre retângulos (N, 4) e (M, 4), mesma aritmética de iou()."""
    if len(dets) == 0 or len(gts) == 0:
        return np.zeros((len(dets), len(gts)))
    d = dets[:, None, :]
    g = gts[None, :, :]
    iw = np.maximum(0.0, np.minimum(d[..., 2], g[..., 2]) - np.maximum(d[..., 0], g[..., 0]))
    ih = np.maximum(0.0, np.minimum(d[..., 3], g[..., 3]) - np.maximum(d[..., 1], g[..., 1]))
    inter = iw * ih
    area_d = (d[..., 2] - d[..., 0]) * (d[..., 3] - d[..., 1])
    area_g = (g[..., 2] - g[..., 0]) * (g[..., 3] - g[..., 1])
    return inter / (area_d + area_g - inter)


# --- Matching ---


@dataclass(frozen=True)
class MatchRecord:
    """Uma detecção após o matching; `rank` é a posição na ordem global estável."""

    image_id: str
    confidence: float
    is_tp: bool
    rank: int


@dataclass(frozen=True)
class MatchResult:
    records: tuple[MatchRecord, ...]
    num_gt: int

    @property
    def tp(self) -> int:
        return sum(r.is_tp for r in self.records)

    @property
    def fp(self) -> int:
        return len(self.records) - self.tp

    @property
    def fn(self) -> int:
        return self.num_gt - self.tp


def _group_by_image(items: Sequence[Any]) -> dict[str, list[tuple[int, Any]]]:
    grouped: dict[str, list[tuple[int, Any]]] = defaultdict(list)
    for index, item in enumerate(items):
        grouped[item.image_id].append((index, item))
    return grouped


def _match_image(
    dets: list[tuple[int, Detection]], gts: list[tuple[int, GroundTruth]], iou_threshold: float, max_det: int
) -> list[tuple[int, Detection, bool]]:
    # Confiança decrescente; empate mantém a ordem de entrada
    ordered = sorted(dets, key=lambda pair: (-pair[1].confidence, pair[0]))[:max_det]
    if not ordered:
        return []
    det_boxes = np.array([d.box for _, d in ordered], dtype=np.float64)
    gt_boxes = np.array([g.box for _, g in gts], dtype=np.float64).reshape(-1, 4)
    overlaps = iou_matrix(det_boxes, gt_boxes)
    taken = np.zeros(len(gts), dtype=bool)

    out = []
    for row, (index, det) in enumerate(ordered):
        is_tp = False
        if len(gts):
            candidates = np.where(taken, -1.0, overlaps[row])
            best = int(np.argmax(candidates))
            if not taken[best] and candidates[best] >= iou_threshold:
                taken[best] = True
                is_tp = True
        out.append((index, det, is_tp))
    return out


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    iou_threshold: float,
    max_det: int = DEFAULT_MAX_DET,
    threads: int = 1,
) -> MatchResult:
    """
    Matching guloso por imagem.

    Detecções em confiança decrescente (empate: ordem de entrada), truncadas
    em max_det por imagem; cada uma casa com o GT livre de maior IoU >= limiar.

    Returns:
        MatchResult com os registros na ordem global (confiança decrescente,
        empates pela ordem das imagens e depois pela posição na imagem).
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ReefValidationError(f"iou_threshold deve estar em (0, 1], recebeu {iou_threshold}")
    dets_by_image = _group_by_image(dets)
    gts_by_image = _group_by_image(gts)
    image_ids = sorted(set(dets_by_image) | set(gts_by_image))

    def run(image_id: str) -> list[tuple[int, Detection, bool]]:
        return _match_image(dets_by_image.get(image_id, []), gts_by_image.get(image_id, []), iou_threshold, max_det)

    if threads > 1 and len(image_ids) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_image = list(pool.map(run, image_ids))
    else:
        per_image = [run(image_id) for image_id in image_ids]

    merged = [
        (-det.confidence, image_pos, det_pos, det, is_tp)
        for image_pos, matches in enumerate(per_image)
        for det_pos, (_, det, is_tp) in enumerate(matches)
    ]
    merged.sort(key=lambda item: item[:3])
    records = tuple(
        MatchRecord(image_id=det.image_id, confidence=det.confidence, is_tp=is_tp, rank=rank)
        for rank, (_, _, _, det, is_tp) in enumerate(merged)
    )
    return MatchResult(records=records, num_gt=len(gts))


def average_precision(result: MatchResult) -> float:
    """
    AP interpolado em 101 pontos de recall sobre o envelope de precisão.

    Raises:
        UndefinedMetricError: nenhum ground truth.
    """
    if result.num_gt == 0:
        raise UndefinedMetricError("AP indefinido sem ground truth")
    if not result.records:
        return 0.0
    hits = np.array([r.is_tp for r in result.records], dtype=np.float64)
    tp = np.cumsum(hits)
    fp = np.cumsum(1.0 - hits)
    recall = tp / result.num_gt
    precision = tp / (tp + fp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]

    idx = np.searchsorted(recall, RECALL_POINTS, side="left")
    sampled = np.where(idx < len(envelope), envelope[np.minimum(idx, len(envelope) - 1)], 0.0)
    return float(np.mean(sampled))


class DetectionCounts(BaseModel):
    tp: int = Field(ge=0)
    fp: int = Field(ge=0)
    fn: int = Field(ge=0)


class EvalReport(BaseModel):
    """AP por limiar de IoU, mAP50, mAP50-95 e contagens em IoU 0.5."""

    model_config = ConfigDict(frozen=True)

    per_threshold_ap: dict[str, float]
    map50: float = Field(ge=0.0, le=1.0)
    map50_95: float = Field(ge=0.0, le=1.0)
    counts: DetectionCounts
    config_echo: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_consistency(self) -> "EvalReport":
        if set(self.per_threshold_ap) != {threshold_key(t) for t in IOU_THRESHOLDS}:
            raise ValueError("per_threshold_ap deve conter os 10 limiares 0.50..0.95")
        if any(not 0.0 <= ap <= 1.0 for ap in self.per_threshold_ap.values()):
            raise ValueError("AP fora de [0, 1]")
        if self.map50 != self.per_threshold_ap[threshold_key(0.5)]:
            raise ValueError("map50 difere do AP em 0.50")
        mean = float(np.mean([self.per_threshold_ap[threshold_key(t)] for t in IOU_THRESHOLDS]))
        if abs(self.map50_95 - mean) > 1e-12:
            raise ValueError("map50_95 difere da média dos APs")
        return self


def map_report(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    *,
    max_det: int = DEFAULT_MAX_DET,
    threads: int = 1,
    config_echo: Optional[dict[str, Any]] = None,
) -> EvalReport:
    """
    AP em cada limiar 0.50..0.95, mAP50 e mAP50-95.

    Raises:
        UndefinedMetricError: nenhum ground truth.
    """
    per_threshold: dict[str, float] = {}
    counts: Optional[DetectionCounts] = None
    for threshold in IOU_THRESHOLDS:
        result = match_detections(dets, gts, threshold, max_det=max_det, threads=threads)
        per_threshold[threshold_key(threshold)] = average_precision(result)
        if counts is None:
            counts = DetectionCounts(tp=result.tp, fp=result.fp, fn=result.fn)

    aps = [per_threshold[threshold_key(t)] for t in IOU_THRESHOLDS]
    report = EvalReport(
        per_threshold_ap=per_threshold,
        map50=per_threshold[threshold_key(0.5)],
        map50_95=float(np.mean(aps)),
        counts=counts,  # type: ignore[arg-type]
        config_echo=config_echo or {},
    )
    logger.info(f"mAP50={report.map50:.3f} mAP50-95={report.map50_95:.3f} ({len(dets)} detecções, {len(gts)} GTs)")
    return report


# --- Benchmark ---


class BenchReport(BaseModel):
    """Latência de inferência e frequência ponta a ponta de um modelo."""

    model_config = ConfigDict(frozen=True)

    model: str = ""
    inference_ms_mean: float = Field(ge=0.0)
    inference_ms_median: float = Field(ge=0.0)
    inference_ms_p95: float = Field(ge=0.0)
    pipeline_hz: float = Field(ge=0.0)
    frame_count: int = Field(gt=0)
    warmup_count: int = Field(ge=0)


class SleepRunner:
    """Runner sintético: dorme `ms` milissegundos por quadro."""

    def __init__(self, ms: float):
        if ms < 0:
            raise ReefValidationError(f"Duração negativa: {ms}")
        self.ms = ms

    def __call__(self, frame: Any) -> None:
        time.sleep(self.ms / 1000.0)


def load_runner(spec: str) -> Callable[[Any], Any]:
    """
    Runner a partir de uma especificação.

    "sleep:<ms>" usa SleepRunner; "pacote.modulo:atributo" importa o
    atributo (classes são instanciadas sem argumentos).

    Raises:
        ReefValidationError: especificação inválida ou atributo não-chamável.
    """
    prefix, sep, target = spec.partition(":")
    if not sep or not target:
        raise ReefValidationError(f"Runner inválido '{spec}': use 'sleep:<ms>' ou 'modulo:atributo'")
    if prefix == "sleep":
        try:
            return SleepRunner(float(target))
        except ValueError as e:
            raise ReefValidationError(f"Duração inválida em '{spec}'") from e
    try:
        attr = getattr(importlib.import_module(prefix), target)
    except (ImportError, AttributeError) as e:
        raise ReefValidationError(f"Runner '{spec}' não encontrado: {e}") from e
    runner = attr() if isinstance(attr, type) else attr
    if not callable(runner):
        raise ReefValidationError(f"Runner '{spec}' não é chamável")
    return runner


def bench(
    runner: Callable[[Any], Any],
    frames: Sequence[Any],
    warmup: int = 0,
    *,
    model: str = "",
    preprocess: Optional[Callable[[Any], Any]] = None,
    postprocess: Optional[Callable[[Any], Any]] = None,
) -> BenchReport:
    """
    Mede o runner quadro a quadro.

    Pré e pós-processamento entram no relógio de parede, não na inferência.
    Quadros de aquecimento são executados e descartados das estatísticas.

    Raises:
        ReefValidationError: quadros insuficientes para o aquecimento.
        BenchRunnerError: falha em algum quadro, com o índice.
    """
    if warmup < 0 or len(frames) <= warmup:
        raise ReefValidationError(f"São necessários mais quadros ({len(frames)}) que aquecimento ({warmup})")

    durations: list[float] = []
    span_start: Optional[float] = None
    span_end = 0.0
    for index, frame in enumerate(frames):
        frame_start = time.perf_counter()
        try:
            prepared = preprocess(frame) if preprocess else frame
            t0 = time.perf_counter()
            output = runner(prepared)
            t1 = time.perf_counter()
            if postprocess:
                postprocess(output)
        except Exception as e:
            raise BenchRunnerError(index, e) from e
        frame_end = time.perf_counter()
        if index < warmup:
            continue
        if span_start is None:
            span_start = frame_start
        span_end = frame_end
        durations.append(t1 - t0)

    measured = len(durations)
    wall = max(span_end - (span_start or span_end), sum(durations))
    ms = np.array(durations) * 1000.0
    report = BenchReport(
        model=model,
        inference_ms_mean=float(ms.mean()),
        inference_ms_median=float(np.median(ms)),
        inference_ms_p95=float(np.percentile(ms, 95)),
        pipeline_hz=measured / wall if wall > 0 else float("inf"),
        frame_count=len(frames),
        warmup_count=warmup,
    )
    logger.info(f"{model or 'runner'}: {report.inference_ms_mean:.1f} ms, {report.pipeline_hz:.1f} Hz")
    return report


class ModelSummary(BaseModel):
    """Linha da tabela de comparação de modelos."""

    model_config = ConfigDict(frozen=True)

    model: str
    inference_ms: float = Field(ge=0.0)
    pipeline_hz: float = Field(ge=0.0)
    map50: float = Field(ge=0.0, le=1.0)
    map50_95: float = Field(ge=0.0, le=1.0)


def summarize(model: str, evaluation: EvalReport, benchmark: BenchReport) -> ModelSummary:
    return ModelSummary(
        model=model,
        inference_ms=benchmark.inference_ms_mean,
        pipeline_hz=benchmark.pipeline_hz,
        map50=evaluation.map50,
        map50_95=evaluation.map50_95,
    )
