"""
Configurações centralizadas do projeto.

Carrega variáveis de ambiente e fornece settings tipados.
Para customizar, crie um arquivo .env na raiz do projeto.
"""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

# Carrega variáveis de ambiente do .env
load_dotenv()

CONFIG_DIR = Path(__file__).parent
PROMPTS_DIR = CONFIG_DIR / "prompts"


@dataclass
class BackendSettings:
    """Configurações do backend de síntese (ControlNet)."""

    url: Optional[str] = field(default_factory=lambda: os.getenv("REEFFORGE_BACKEND_URL"))
    timeout: float = field(default_factory=lambda: float(os.getenv("REEFFORGE_BACKEND_TIMEOUT", "120")))
    concurrency: int = field(default_factory=lambda: int(os.getenv("REEFFORGE_SYNTH_CONCURRENCY", "2")))
    max_retries: int = field(default_factory=lambda: int(os.getenv("REEFFORGE_BACKEND_RETRIES", "3")))


@dataclass
class ObservabilitySettings:
    """Configurações de rastreamento de erros (Sentry)."""

    sentry_dsn: Optional[str] = field(default_factory=lambda: os.getenv("SENTRY_DSN"))
    sentry_environment: str = field(default_factory=lambda: os.getenv("SENTRY_ENVIRONMENT", "development"))


@dataclass
class Settings:
    """Configurações globais do projeto."""

    backend: BackendSettings = field(default_factory=BackendSettings)
    observability: ObservabilitySettings = field(default_factory=ObservabilitySettings)

    # Configurações gerais
    log_level: str = field(default_factory=lambda: os.getenv("LOG_LEVEL", "INFO"))
    environment: str = field(default_factory=lambda: os.getenv("ENVIRONMENT", "development"))
    prompts_dir: Path = PROMPTS_DIR


# Singleton para uso em todo o projeto
settings = Settings()
