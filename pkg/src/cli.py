"""
Linha de comando do reefforge: um subcomando por estágio do pipeline.

    generate  cenas aleatórias -> <out>/scenes (JSON + PNGs de profundidade, máscara e prévia)
    synth     PNGs de condicionamento -> <out>/synth/images + labels YOLO
    mix       reais + sintéticas -> <out>/dataset (manifest do split + config do treinador)
    eval      predições vs ground truth -> <out>/eval/eval_report.json
    bench     latência / frequência de um runner -> <out>/bench
    report    tabelas de comparação e ablação -> <out>/report

Cada estágio pode rodar em outra máquina; todo diretório de saída recebe
um manifest.json. Códigos de saída: 0 sucesso, 1 validação, 2 I/O,
3 backend/transporte.
"""

import argparse
import asyncio
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterator, Optional, Sequence

import numpy as np
from PIL import Image
from pydantic import ValidationError

from src import __version__
from src.datasetkit import emit_training_config, masks_to_boxes, mix_split, write_manifest, write_yolo_labels
from src.errors import EXIT_IO, EXIT_OK, EXIT_VALIDATION, ReefError, ReefIOError, ReefValidationError
from src.errors import SynthesisError
from src.evalbench import EvalReport, bench, load_runner, map_report, summarize
from src.excel_export import create_report_export
from src.fileio import MANIFEST_FILENAME, ArtifactWriter, StageManifest, atomic_write_bytes, read_json
from src.fileio import read_stage_manifest
from src.ingestion import (
    LoadResult,
    image_size_index,
    list_images,
    load_detections_json,
    load_ground_truth_json,
    load_labeled_dir,
    load_yolo_dir_as_detections,
)
from src.logging_config import get_logger, set_level, start_run_log, stop_run_log
from src.metrics import BatchMetrics, SynthesisMetrics
from src.models import LabeledImage
from src.observability import capture_exception, capture_message, init_sentry, set_tags
from src.pipeline_config import PipelineConfig, load_pipeline_config
from src.rasterizer import InstanceMask, decode_mask_png, encode_depth_png, encode_mask_png, encode_preview_png
from src.rasterizer import render
from src.reporting import RenderedTables, load_ablation, load_model_summaries, render_tables
from src.rng import STREAM_SCENE_SIZE, derive_seed, make_rng
from src.scenegen import place_oysters, sample_camera, scene_to_json
from src.synthclient import (
    HttpBackend,
    MockBackend,
    PromptConfig,
    SynthClient,
    SynthesisBackend,
    SynthesisRequest,
    image_size,
    load_prompts,
    load_reference_pool,
    placeholder_reference_pool,
    request_digest,
    request_from_pngs,
)

logger = get_logger(__name__)

PROGRESS_EVERY = 10
SYNTH_BATCH = 32
SCENE_GLOB = "scene_*.json"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def scene_name(index: int) -> str:
    return f"scene_{index:05d}"


def scenes_dir(config: PipelineConfig) -> Path:
    return Path(config.out) / "scenes"


def synth_dir(config: PipelineConfig) -> Path:
    return Path(config.out) / "synth"


def oysters_in_scene(scene_seed: int, bounds: tuple[int, int]) -> int:
    lo, hi = bounds
    return int(make_rng(scene_seed, STREAM_SCENE_SIZE).integers(lo, hi + 1))


@contextmanager
def _stage(stage: str, scene_id: str = "", scene_seed: Optional[int] = None) -> Iterator[None]:
    """Registra no log e no Sentry qual estágio/cena falhou, e propaga o erro."""
    try:
        yield
    except ReefError as e:
        where = f"{scene_id} (seed {scene_seed})" if scene_id else "execução"
        logger.error(f"{where}: falha no estágio '{stage}': {e}")
        capture_exception(e, stage=stage, scene_id=scene_id, scene_seed=scene_seed)
        raise


def _progress(stage: str, done: int, total: int) -> None:
    if done % PROGRESS_EVERY == 0 or done == total:
        logger.info(f"{stage}: {done}/{total} cenas")


# --- generate ---


def cmd_generate(config: PipelineConfig) -> StageManifest:
    """
    place_oysters -> sample_camera -> render -> PNGs + JSON de cena, por seed de cena.

    Seeds de cena são derivadas de (seed, índice); a saída é idêntica byte a
    byte entre execuções e para qualquer número de threads.
    """
    writer = ArtifactWriter(scenes_dir(config))
    region = config.region()
    camera_config = config.camera_config()
    distribution = config.oyster_distribution()
    echo = config.echo()
    threads = config.worker_threads
    logger.info(f"Gerando {config.scenes} cenas em {writer.root} (seed {config.seed}, {threads} threads)")

    for index in range(config.scenes):
        scene_id = scene_name(index)
        scene_seed = derive_seed(config.seed, index)
        with _stage("placement", scene_id, scene_seed):
            scene = place_oysters(
                oysters_in_scene(scene_seed, config.oysters_per_scene),
                region,
                scene_seed,
                min_spacing=config.min_spacing_m,
                distribution=distribution,
                max_tilt_deg=config.max_oyster_tilt_deg,
                scene_id=scene_id,
            )
        with _stage("camera", scene_id, scene_seed):
            camera = sample_camera(scene_seed, camera_config)
        with _stage("render", scene_id, scene_seed):
            output = render(
                scene, camera, near=config.near_m, threads=threads, preview=True, include_ground=config.include_ground
            )
        with _stage("encode", scene_id, scene_seed):
            mask_raw, mask_vis = encode_mask_png(output.mask)
            writer.write_json(f"{scene_id}.json", scene_to_json(scene, camera, echo))
            writer.write_bytes(
                f"{scene_id}_depth.png", encode_depth_png(output.depth, config.max_depth_m, ground=output.ground)
            )
            writer.write_bytes(f"{scene_id}_mask.png", mask_raw)
            if output.preview is not None:
                writer.write_bytes(f"{scene_id}_preview.png", encode_preview_png(output.preview))
            if config.mask_vis:
                writer.write_bytes(f"{scene_id}_maskvis.png", mask_vis)
        _progress("generate", index + 1, config.scenes)

    return writer.finish("generate", config.seed, echo, scenes=config.scenes)


# --- synth ---


@dataclass(frozen=True)
class SynthJob:
    scene_id: str
    seed: int
    request: SynthesisRequest
    mask: InstanceMask


def _prompts(config: PipelineConfig) -> PromptConfig:
    prompts = load_prompts(Path(config.prompts_dir) if config.prompts_dir else None)
    return PromptConfig(
        positive=config.positive_prompt or prompts.positive,
        negative=config.negative_prompt if config.negative_prompt is not None else prompts.negative,
    )


def _load_job(scene_file: Path, pool: Sequence[bytes], prompts: PromptConfig, config: PipelineConfig) -> SynthJob:
    doc = read_json(scene_file)
    if not isinstance(doc, dict):
        raise ReefValidationError(f"Documento de cena deve ser um objeto JSON: {scene_file}")
    scene_id = str(doc.get("scene_id", scene_file.stem))
    seed = int(doc.get("seed", 0))
    base = scene_file.parent
    with _stage("load", scene_id, seed):
        try:
            depth_png = (base / f"{scene_id}_depth.png").read_bytes()
            mask_png = (base / f"{scene_id}_mask.png").read_bytes()
            preview_path = base / f"{scene_id}_preview.png"
            preview_png = preview_path.read_bytes() if config.include_preview and preview_path.exists() else None
        except OSError as e:
            raise ReefIOError(f"PNGs de condicionamento ausentes para {scene_id}: {e}") from e
        request = request_from_pngs(
            depth_png,
            mask_png,
            pool,
            prompts,
            seed,
            scene_ref=scene_id,
            denoise_strength=config.denoise_strength,
            preview_png=preview_png,
        )
    return SynthJob(scene_id, seed, request, decode_mask_png(mask_png))


def _batches(items: Sequence[Path], size: int) -> Iterator[Sequence[Path]]:
    for start in range(0, len(items), size):
        yield items[start : start + size]


def _previous_pairing(target: Path) -> dict[str, dict[str, Any]]:
    """Pareamento do manifest de uma execução anterior; vazio se não houver."""
    if not (target / MANIFEST_FILENAME).exists():
        return {}
    try:
        pairing = read_stage_manifest(target).extra.get("pairing", {})
    except ReefValidationError as e:
        logger.warning(f"Manifest anterior ignorado: {e}")
        return {}
    return pairing if isinstance(pairing, dict) else {}


def _reusable_image(target: Path, previous: dict[str, dict[str, Any]], job: SynthJob) -> Optional[bytes]:
    record = previous.get(job.scene_id)
    path = target / "images" / f"{job.scene_id}.png"
    if not record or record.get("request_digest") != request_digest(job.request) or not path.is_file():
        return None
    return path.read_bytes()


def cmd_synth(
    config: PipelineConfig,
    *,
    scenes_from: Optional[Path] = None,
    mock: bool = False,
    mock_fault: Optional[str] = None,
    real_pool: Optional[Path] = None,
    fail_fast: bool = False,
    force: bool = False,
) -> StageManifest:
    """
    build_request -> synthesize -> imagem; mask_to_boxes -> labels YOLO, por cena.

    Falhas de síntese são registradas por cena; com fail_fast a primeira
    aborta o estágio. Sem fail_fast, o estágio termina, grava o manifest e
    encerra com erro se alguma cena falhou.

    Ao repetir o estágio no mesmo diretório, cenas cujo request_digest bate
    com o manifest anterior reaproveitam a imagem já gravada, sem chamar o
    backend. force=True ressintetiza tudo.

    Raises:
        ReefIOError: diretório de cenas ausente.
        ReefValidationError: backend sem URL ou pool sem referências.
        SynthesisError: cenas com falha de síntese.
    """
    source = Path(scenes_from) if scenes_from else scenes_dir(config)
    if not source.is_dir():
        raise ReefIOError(f"Diretório de cenas não encontrado: {source} (rode 'generate' antes)")
    scene_files = sorted(source.glob(SCENE_GLOB))

    if real_pool is not None:
        pool = load_reference_pool(real_pool)
    elif mock:
        pool = placeholder_reference_pool()
    else:
        raise ReefValidationError("--real-pool é obrigatório sem --mock")
    backend: SynthesisBackend
    if mock:
        backend = MockBackend(fault=mock_fault)  # type: ignore[arg-type]
    else:
        backend = HttpBackend(config.resolved_backend_url())
    client = SynthClient(backend, concurrency=config.concurrency)
    prompts = _prompts(config)

    target = synth_dir(config)
    writer = ArtifactWriter(target)
    metrics = BatchMetrics()
    sizes: dict[str, list[int]] = {}
    pairing: dict[str, dict[str, Any]] = {}
    failures: dict[str, str] = {}
    logger.info(f"Sintetizando {len(scene_files)} cenas de {source} ({'mock' if mock else 'http'})")

    previous = {} if force else _previous_pairing(target)

    for batch in _batches(scene_files, SYNTH_BATCH):
        jobs = [_load_job(path, pool, prompts, config) for path in batch]
        reused = {job.scene_id: _reusable_image(target, previous, job) for job in jobs}
        pending = [job for job in jobs if reused[job.scene_id] is None]
        fresh: list[Any] = []
        if pending:
            with _stage("synthesize", f"{pending[0].scene_id}..{pending[-1].scene_id}", pending[0].seed):
                fresh = asyncio.run(client.synthesize_many([job.request for job in pending], fail_fast=fail_fast))
        outcomes = dict(zip((job.scene_id for job in pending), fresh))
        boxes_per_scene = masks_to_boxes([job.mask for job in jobs], config.min_pixels, config.worker_threads)

        for job, boxes in zip(jobs, boxes_per_scene):
            metrics.total_requests += 1
            cached = reused[job.scene_id]
            if cached is not None:
                metrics.add_skip()
                image = cached
                digest = previous[job.scene_id]["request_digest"]
                backend_id = previous[job.scene_id].get("backend_id", "")
            else:
                outcome = outcomes[job.scene_id]
                if isinstance(outcome, SynthesisError):
                    metrics.add_error()
                    failures[job.scene_id] = str(outcome)
                    logger.error(f"{job.scene_id} (seed {job.seed}): síntese falhou: {outcome}")
                    capture_exception(outcome, stage="synthesize", scene_id=job.scene_id, scene_seed=job.seed)
                    continue
                metrics.add_api_call(SynthesisMetrics.from_result(outcome))
                image = outcome.image
                digest = outcome.request_digest
                backend_id = outcome.backend_id
            width, height = image_size(image)
            image_rel = f"images/{job.scene_id}.png"
            writer.write_bytes(image_rel, image)
            entry = LabeledImage(
                image_path=image_rel,
                width=width,
                height=height,
                boxes=tuple(boxes),
                source="synthetic",
                scene_ref=job.scene_id,
            )
            write_yolo_labels(entry, target / "labels")
            writer.record(f"labels/{job.scene_id}.txt")
            sizes[job.scene_id] = [width, height]
            pairing[job.scene_id] = {
                "mask": f"{job.scene_id}_mask.png",
                "request_digest": digest,
                "backend_id": backend_id,
                "boxes": len(boxes),
            }
        _progress("synth", metrics.total_requests, len(scene_files))

    writer.write_json("sizes.json", sizes)
    manifest = writer.finish(
        "synth",
        config.seed,
        config.echo(),
        backend="mock" if mock else "http",
        mock_fault=mock_fault,
        pairing=pairing,
        failures=failures,
    )
    logger.info(f"Síntese: {metrics.summary()}")
    if failures:
        capture_message(f"{len(failures)} cenas falharam na síntese", level="error", failed=sorted(failures))
        raise SynthesisError(f"{len(failures)} de {len(scene_files)} cenas falharam na síntese")
    return manifest


# --- mix ---


def cmd_mix(
    config: PipelineConfig, *, real_dir: Optional[Path] = None, synth_from: Optional[Path] = None
) -> StageManifest:
    """Split misto (reais fracionadas, sintéticas só em treino) + config do treinador."""
    synth_root = Path(synth_from) if synth_from else synth_dir(config)
    if not (synth_root / "images").is_dir():
        raise ReefIOError(f"Imagens sintéticas não encontradas em {synth_root / 'images'} (rode 'synth' antes)")
    synth = load_labeled_dir(synth_root / "images", synth_root / "labels", source="synthetic")
    real = load_labeled_dir(real_dir, source="real") if real_dir else LoadResult()
    for name, loaded in (("reais", real), ("sintéticas", synth)):
        if loaded.has_errors:
            logger.warning(f"{loaded.error_count} imagens {name} ignoradas: {loaded.error_samples[:3]}")

    with _stage("split"):
        manifest = mix_split(
            real.entries,
            synth.entries,
            config.real_train_frac,
            config.seed,
            min_pixels=config.min_pixels,
            config_echo=config.echo(),
        )

    writer = ArtifactWriter(Path(config.out) / "dataset")
    write_manifest(manifest, writer.root / "dataset.json")
    emit_training_config(manifest, writer.root / "train.yaml", model=config.model)
    for relative in ("dataset.json", "train.yaml", "train.txt", "test.txt"):
        writer.record(relative)
    counts = {"train": len(manifest.subset("train")), "test": len(manifest.subset("test"))}
    return writer.finish(
        "mix",
        config.seed,
        config.echo(),
        counts=counts,
        real=len(real.entries),
        synthetic=len(synth.entries),
        skipped=real.error_count + synth.error_count,
    )


# --- eval ---


def _load_boxes(path: Path, sizes: Optional[dict[str, tuple[int, int]]], kind: str) -> list[Any]:
    if path.is_dir():
        if sizes is None:
            raise ReefValidationError(f"{path} é um diretório de labels YOLO: informe --sizes")
        return load_yolo_dir_as_detections(path, sizes, kind=kind)  # type: ignore[arg-type]
    if kind == "detection":
        return load_detections_json(path)
    return load_ground_truth_json(path)


def cmd_eval(
    config: PipelineConfig, *, predictions: Path, ground_truth: Path, sizes: Optional[Path] = None
) -> EvalReport:
    """mAP50 / mAP50-95 das predições (JSON ou diretório YOLO) contra o ground truth."""
    index = image_size_index(sizes) if sizes is not None else None
    detections = _load_boxes(Path(predictions), index, "detection")
    truths = _load_boxes(Path(ground_truth), index, "ground_truth")
    logger.info(f"Avaliando {len(detections)} detecções contra {len(truths)} caixas de referência")

    with _stage("evaluate"):
        report = map_report(
            detections, truths, max_det=config.max_det, threads=config.worker_threads, config_echo=config.echo()
        )
    writer = ArtifactWriter(Path(config.out) / "eval")
    writer.write_text("eval_report.json", report.model_dump_json(indent=2) + "\n")
    writer.finish("eval", config.seed, config.echo(), map50=report.map50, map50_95=report.map50_95)
    return report


# --- bench ---


def _load_frames(directory: Path) -> list[np.ndarray]:
    frames = []
    for path in list_images(directory):
        try:
            with Image.open(path) as img:
                frames.append(np.asarray(img.convert("RGB")))
        except OSError as e:
            raise ReefIOError(f"Quadro ilegível: {path}: {e}") from e
    return frames


def _read_eval_report(path: Path) -> EvalReport:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ReefIOError(f"Falha ao ler {path}: {e}") from e
    return EvalReport.model_validate_json(raw)


def cmd_bench(
    config: PipelineConfig,
    *,
    runner_spec: str,
    frames_dir: Optional[Path] = None,
    count: int = 20,
    warmup: int = 2,
    model_name: Optional[str] = None,
    eval_report: Optional[Path] = None,
) -> dict[str, Any]:
    """
    Mede um runner plugável sobre quadros reais ou sintéticos (pretos).

    Com eval_report, grava também a linha de resumo (latência, Hz, mAP) usada
    pelo subcomando report.
    """
    runner = load_runner(runner_spec)
    if frames_dir is not None:
        frames = _load_frames(frames_dir)
    else:
        frames = [np.zeros((config.image_height, config.image_width, 3), dtype=np.uint8)] * count
    name = model_name or runner_spec

    with _stage("bench"):
        report = bench(runner, frames, warmup, model=name)
    writer = ArtifactWriter(Path(config.out) / "bench")
    writer.write_text("bench_report.json", report.model_dump_json(indent=2) + "\n")
    result: dict[str, Any] = {"bench": report.model_dump(mode="json")}
    if eval_report is not None:
        summary = summarize(name, _read_eval_report(eval_report), report)
        writer.write_text("summary.json", summary.model_dump_json(indent=2) + "\n")
        result["summary"] = summary.model_dump(mode="json")
    writer.finish("bench", config.seed, config.echo(), runner=runner_spec, frames=len(frames), warmup=warmup)
    return result


# --- report ---


def cmd_report(
    config: PipelineConfig, *, table1: Path, ablation: Optional[Path] = None, xlsx: Optional[Path] = None
) -> RenderedTables:
    """Tabelas de comparação de modelos e de ablação com/sem sintético (texto, CSV e XLSX opcional)."""
    rows = load_model_summaries(table1)
    pairs = load_ablation(ablation) if ablation is not None else None
    tables = render_tables(rows, pairs)

    writer = ArtifactWriter(Path(config.out) / "report")
    writer.write_text("report.txt", tables.text)
    writer.write_text("comparison.csv", tables.comparison_csv)
    if tables.ablation_csv is not None:
        writer.write_text("ablation.csv", tables.ablation_csv)
    if xlsx is not None:
        atomic_write_bytes(xlsx, create_report_export(rows, pairs).getvalue())
        logger.info(f"Planilha gravada em {xlsx}")
    writer.finish("report", config.seed, config.echo(), models=[r.model for r in rows])
    return tables


# --- argparse ---


def _run_generate(config: PipelineConfig, args: argparse.Namespace) -> None:
    cmd_generate(config)
    print(scenes_dir(config))


def _run_synth(config: PipelineConfig, args: argparse.Namespace) -> None:
    cmd_synth(
        config,
        scenes_from=args.scenes_from,
        mock=args.mock,
        mock_fault=args.mock_fault,
        real_pool=args.real_pool,
        fail_fast=args.fail_fast,
        force=args.force,
    )
    print(synth_dir(config))


def _run_mix(config: PipelineConfig, args: argparse.Namespace) -> None:
    cmd_mix(config, real_dir=args.real_dir, synth_from=args.synth_from)
    print(Path(config.out) / "dataset")


def _run_eval(config: PipelineConfig, args: argparse.Namespace) -> None:
    report = cmd_eval(config, predictions=args.predictions, ground_truth=args.gt, sizes=args.sizes)
    print(report.model_dump_json(indent=2))


def _run_bench(config: PipelineConfig, args: argparse.Namespace) -> None:
    result = cmd_bench(
        config,
        runner_spec=args.runner,
        frames_dir=args.frames,
        count=args.count,
        warmup=args.warmup,
        model_name=args.model_name,
        eval_report=args.eval_report,
    )
    bench_report = result["bench"]
    print(f"{bench_report['model']}: {bench_report['inference_ms_mean']:.1f} ms, {bench_report['pipeline_hz']:.1f} Hz")


def _run_report(config: PipelineConfig, args: argparse.Namespace) -> None:
    tables = cmd_report(config, table1=args.table1, ablation=args.ablation, xlsx=args.xlsx)
    print(tables.text, end="")


def _flag(parser: argparse.ArgumentParser, name: str, dest: str, help: str) -> None:
    # None quando ausente: só sobrepõe o arquivo de configuração se passado
    parser.add_argument(name, dest=dest, action="store_const", const=True, default=None, help=help)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Arquivo chave: valor (as flags vencem)")
    common.add_argument("--seed", type=int, help="Seed base da execução")
    common.add_argument("--threads", type=int, help="Threads de trabalho (default: núcleos da máquina)")
    common.add_argument("--out", help="Diretório raiz das saídas (default: out)")
    common.add_argument("--log-level", choices=LOG_LEVELS, type=str.upper, help="Nível de log")
    common.add_argument("--log-file", action="store_true", help="Também grava logs/<comando>_<data>.log")

    parser = argparse.ArgumentParser(
        prog="reefforge", description="Dados sintéticos de recifes de ostras e avaliação de detectores"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", parents=[common], help="Gera e renderiza cenas")
    gen.add_argument("--scenes", type=int, help="Número de cenas")
    _flag(gen, "--mask-vis", "mask_vis", "Grava também <cena>_maskvis.png")
    _flag(gen, "--ground", "include_ground", "Compõe o plano do chão na profundidade")
    gen.set_defaults(handler=_run_generate)

    syn = sub.add_parser("synth", parents=[common], help="Sintetiza imagens fotorrealistas + labels")
    syn.add_argument("--scenes-dir", dest="scenes_from", type=Path, help="Saída do generate (default: <out>/scenes)")
    syn.add_argument("--mock", action="store_true", help="Usa o backend determinístico em processo")
    syn.add_argument(
        "--mock-fault", choices=("wrong_size", "server_error", "unreachable"), help="Falha injetada no mock"
    )
    syn.add_argument("--real-pool", type=Path, help="Diretório de imagens reais de referência")
    syn.add_argument("--fail-fast", action="store_true", help="Aborta na primeira falha de síntese")
    syn.add_argument("--force", action="store_true", help="Ressintetiza cenas já presentes no diretório de saída")
    syn.add_argument("--backend-url", dest="backend_url", help="URL do backend (default: REEFFORGE_BACKEND_URL)")
    syn.add_argument("--concurrency", type=int, help="Requisições em voo (default: 2)")
    syn.add_argument("--denoise-strength", dest="denoise_strength", type=float)
    syn.add_argument("--min-pixels", dest="min_pixels", type=int, help="Área mínima de instância para gerar caixa")
    _flag(syn, "--preview", "include_preview", "Envia também a prévia sombreada ao backend")
    syn.set_defaults(handler=_run_synth)

    mix = sub.add_parser("mix", parents=[common], help="Monta o split real/sintético e a config de treino")
    mix.add_argument("--real-dir", type=Path, help="Imagens reais rotuladas (labels em ../labels ou ao lado)")
    mix.add_argument("--synth-dir", dest="synth_from", type=Path, help="Saída do synth (default: <out>/synth)")
    mix.add_argument("--real-train-frac", dest="real_train_frac", type=float, help="Fração das reais em treino")
    mix.add_argument("--model", dest="model", help="Pesos iniciais do treinador")
    mix.set_defaults(handler=_run_mix)

    ev = sub.add_parser("eval", parents=[common], help="Calcula mAP50 e mAP50-95")
    ev.add_argument("--predictions", type=Path, required=True, help="JSON de predições ou diretório YOLO")
    ev.add_argument("--gt", type=Path, required=True, help="JSON de ground truth ou diretório YOLO")
    ev.add_argument("--sizes", type=Path, help="Tamanhos das imagens: JSON, manifest de dataset ou diretório")
    ev.add_argument("--max-det", dest="max_det", type=int, help="Detecções por imagem (default: 300)")
    ev.set_defaults(handler=_run_eval)

    be = sub.add_parser("bench", parents=[common], help="Mede latência de inferência e frequência do pipeline")
    be.add_argument("--runner", default="sleep:100", help="'sleep:<ms>' ou 'modulo:atributo'")
    be.add_argument("--frames", type=Path, help="Diretório de quadros (default: quadros pretos)")
    be.add_argument("--count", type=int, default=20, help="Quadros sintéticos quando --frames é omitido")
    be.add_argument("--warmup", type=int, default=2, help="Quadros de aquecimento descartados")
    be.add_argument("--name", dest="model_name", help="Nome do modelo nos relatórios")
    be.add_argument("--eval-report", type=Path, help="eval_report.json para gerar a linha de resumo")
    be.set_defaults(handler=_run_bench)

    rep = sub.add_parser("report", parents=[common], help="Renderiza as tabelas de comparação e ablação")
    rep.add_argument("--table1", type=Path, required=True, help="JSON com as linhas por modelo")
    rep.add_argument("--ablation", type=Path, help="JSON com pares com (S) / sem (R) sintético")
    rep.add_argument("--xlsx", type=Path, help="Grava também uma planilha formatada")
    rep.set_defaults(handler=_run_report)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {name: getattr(args, name) for name in PipelineConfig.model_fields if hasattr(args, name)}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Executa um subcomando e devolve o código de saída.

    Returns:
        0 sucesso, 1 validação, 2 I/O, 3 backend/transporte.
    """
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_level(args.log_level)
    if args.log_file:
        logger.info(f"Log da execução em {start_run_log(args.command)}")
    init_sentry()
    set_tags(command=args.command)
    handler: Callable[[PipelineConfig, argparse.Namespace], None] = args.handler

    try:
        config = load_pipeline_config(args.config, _overrides(args))
        logger.info(f"reefforge {__version__}: {args.command} (seed {config.seed}, saída {config.out})")
        handler(config, args)
        logger.info(f"{args.command} concluído")
    except ReefError as e:
        logger.error(f"{args.command} falhou: {e}")
        return e.exit_code
    except ValidationError as e:
        logger.error(f"{args.command}: dados fora do schema: {e}")
        return EXIT_VALIDATION
    except OSError as e:
        logger.error(f"{args.command}: erro de I/O: {e}")
        capture_exception(e, command=args.command)
        return EXIT_IO
    except Exception as e:
        logger.critical(f"{args.command}: erro inesperado: {e}", exc_info=True)
        capture_exception(e, command=args.command)
        raise
    finally:
        stop_run_log()

    return EXIT_OK


def run() -> None:
    sys.exit(main())
