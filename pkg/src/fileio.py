"""
Escrita atômica de artefatos e manifest.json por diretório de saída.

Todo arquivo é gravado em temporário no mesmo diretório e renomeado, de
modo que leitores nunca vêem arquivos parciais. Manifests não levam
timestamp: reexecuções com a mesma configuração geram bytes idênticos.
"""

import hashlib
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from src import __version__
from src.errors import ReefIOError, ReefValidationError
from src.logging_config import get_logger
from src.rng import prng_info

logger = get_logger(__name__)

MANIFEST_FILENAME = "manifest.json"
MANIFEST_SCHEMA_VERSION = 1


def atomic_write_bytes(path: Path | str, data: bytes) -> None:
    """
    Grava bytes via arquivo temporário + os.replace.

    Raises:
        ReefIOError: diretório não criável ou sem permissão de escrita.
    """
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
            os.replace(tmp_name, target)
        except BaseException:
            Path(tmp_name).unlink(missing_ok=True)
            raise
    except OSError as e:
        raise ReefIOError(f"Falha ao gravar {target}: {e}") from e


def atomic_write_text(path: Path | str, text: str) -> None:
    """Texto UTF-8 com finais de linha LF."""
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: Path | str, payload: Any) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def read_json(path: Path | str) -> Any:
    """
    Raises:
        ReefIOError: arquivo ausente ou ilegível.
        ReefValidationError: JSON inválido.
    """
    source = Path(path)
    try:
        raw = source.read_text(encoding="utf-8")
    except OSError as e:
        raise ReefIOError(f"Arquivo não encontrado ou ilegível: {source}") from e
    try:
        return json.loads(raw)
    except json.JSONDecodeError as e:
        raise ReefValidationError(f"{source}:{e.lineno}: JSON inválido ({e.msg})") from e


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class ManifestArtifact:
    path: str
    sha256: str
    bytes: int


@dataclass(frozen=True)
class StageManifest:
    """Registro suficiente para regenerar um diretório de saída."""

    stage: str
    seed: int
    config: dict[str, Any]
    artifacts: tuple[ManifestArtifact, ...] = ()
    extra: dict[str, Any] = field(default_factory=dict)
    tool_version: str = __version__
    prng: dict[str, str] = field(default_factory=prng_info)
    schema_version: int = MANIFEST_SCHEMA_VERSION


class ArtifactWriter:
    """Grava artefatos de um estágio e acumula suas entradas de manifest."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self._artifacts: dict[str, ManifestArtifact] = {}

    def write_bytes(self, relative: str, data: bytes) -> Path:
        target = self.root / relative
        atomic_write_bytes(target, data)
        self._artifacts[relative] = ManifestArtifact(relative, sha256_bytes(data), len(data))
        return target

    def write_text(self, relative: str, text: str) -> Path:
        return self.write_bytes(relative, text.encode("utf-8"))

    def write_json(self, relative: str, payload: Any) -> Path:
        return self.write_text(relative, json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n")

    def record(self, relative: str) -> ManifestArtifact:
        """Registra um arquivo já gravado por outra rotina dentro de root."""
        try:
            data = (self.root / relative).read_bytes()
        except OSError as e:
            raise ReefIOError(f"Artefato não encontrado: {self.root / relative}") from e
        artifact = ManifestArtifact(relative, sha256_bytes(data), len(data))
        self._artifacts[relative] = artifact
        return artifact

    @property
    def artifacts(self) -> tuple[ManifestArtifact, ...]:
        return tuple(self._artifacts[k] for k in sorted(self._artifacts))

    def finish(self, stage: str, seed: int, config: dict[str, Any], **extra: Any) -> StageManifest:
        """Grava manifest.json com todos os artefatos registrados."""
        manifest = StageManifest(stage=stage, seed=seed, config=config, artifacts=self.artifacts, extra=extra)
        write_stage_manifest(self.root, manifest)
        logger.info(f"{stage}: {len(manifest.artifacts)} artefatos em {self.root}")
        return manifest


def write_stage_manifest(directory: Path | str, manifest: StageManifest) -> Path:
    path = Path(directory) / MANIFEST_FILENAME
    write_json(path, asdict(manifest))
    return path


def read_stage_manifest(directory: Path | str) -> StageManifest:
    """
    Lê e valida o manifest.json de um diretório de saída.

    Raises:
        ReefIOError: manifest ausente.
        ReefValidationError: schema inválido.
    """
    path = Path(directory) / MANIFEST_FILENAME
    data = read_json(path)
    if not isinstance(data, dict):
        raise ReefValidationError(f"Manifest deve ser um objeto JSON: {path}")
    if data.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise ReefValidationError(f"schema_version não suportado em {path}: {data.get('schema_version')}")
    for key in ("stage", "seed", "config", "artifacts"):
        if key not in data:
            raise ReefValidationError(f"Manifest sem a chave '{key}': {path}")
    artifacts = tuple(ManifestArtifact(a["path"], a["sha256"], a["bytes"]) for a in data["artifacts"])
    return StageManifest(
        stage=data["stage"],
        seed=data["seed"],
        config=data["config"],
        artifacts=artifacts,
        extra=data.get("extra", {}),
        tool_version=data.get("tool_version", ""),
        prng=data.get("prng", {}),
    )
