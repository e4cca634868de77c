"""
Configuração centralizada de logging para o projeto.

Uso:
    from src.logging_config import get_logger
    logger = get_logger(__name__)
    logger.info(f"{scene_id}: 12 ostras posicionadas")

Todos os loggers do projeto ficam sob o logger "src", que tem o único
handler de console (stderr: stdout fica livre para a saída de dados da CLI).
O arquivo de log de uma execução é anexado ao mesmo logger, então recebe as
mensagens de todos os módulos.
"""

import logging
import os
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
PROJECT_LOGGER = "src"
DEFAULT_LOG_DIR = Path("logs")

_run_handler: Optional[logging.FileHandler] = None


def _resolve(level: str) -> int:
    return getattr(logging, level.upper(), logging.INFO)


def _project_logger() -> logging.Logger:
    root = logging.getLogger(PROJECT_LOGGER)
    if not root.handlers:
        console = logging.StreamHandler(sys.stderr)
        console.setFormatter(logging.Formatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT))
        root.addHandler(console)
        root.setLevel(_resolve(os.getenv("LOG_LEVEL") or "INFO"))
        root.propagate = False
    return root


def get_logger(name: str) -> logging.Logger:
    """
    Retorna o logger de um módulo, filho do logger do projeto.

    Args:
        name: Nome do logger (geralmente __name__). Nomes fora de "src."
            (scripts, __main__) são pendurados sob "src".
    """
    _project_logger()
    if name != PROJECT_LOGGER and not name.startswith(f"{PROJECT_LOGGER}."):
        name = f"{PROJECT_LOGGER}.{name}"
    return logging.getLogger(name)


def set_level(level: str) -> None:
    """Ajusta o nível de todo o projeto (flag --log-level)."""
    _project_logger().setLevel(_resolve(level))


def start_run_log(run_name: str, directory: Path | str = DEFAULT_LOG_DIR) -> Path:
    """
    Passa a gravar também em {directory}/{run_name}_{data}.log.

    Substitui o arquivo de uma execução anterior no mesmo processo.

    Returns:
        Caminho do arquivo de log.
    """
    global _run_handler
    stop_run_log()
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    path = Path(directory) / f"{run_name}_{timestamp}.log"
    path.parent.mkdir(parents=True, exist_ok=True)
    _run_handler = logging.FileHandler(path, encoding="utf-8")
    _run_handler.setFormatter(logging.Formatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT))
    _project_logger().addHandler(_run_handler)
    return path


def stop_run_log() -> None:
    global _run_handler
    if _run_handler is not None:
        _project_logger().removeHandler(_run_handler)
        _run_handler.close()
        _run_handler = None
