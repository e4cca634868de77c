"""
Hierarquia de exceções do reefforge.

Cada categoria carrega o código de saída usado pela CLI:
1 = validação, 2 = I/O, 3 = backend/transporte.
"""

from pathlib import Path
from typing import Optional

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_BACKEND = 3


class ReefError(Exception):
    """Base de todos os erros do projeto."""

    exit_code: int = EXIT_VALIDATION


# --- Validação (exit 1) ---


class ReefValidationError(ReefError, ValueError):
    """Entrada inválida (ranges malformados, parâmetros fora das invariantes)."""


class ContractError(ReefError, IndexError):
    """Violação de pré-condição (índice fora do intervalo, etc.)."""


class DomainError(ReefValidationError):
    """Parâmetro fora do domínio válido (ex.: t fora do vetor de nós)."""


class GeometryError(ReefValidationError):
    """Geometria inválida: polígono auto-intersectante, triângulo degenerado."""


class CapacityError(ReefError):
    """Limite excedido: amostragem por rejeição esgotada, id > 65535."""


class UndefinedMetricError(ReefError):
    """Métrica indefinida (ex.: AP sem nenhum ground truth)."""


class ParseError(ReefValidationError):
    """Erro de parsing com caminho e linha."""

    def __init__(self, message: str, path: Optional[Path | str] = None, line: Optional[int] = None):
        self.path = str(path) if path is not None else None
        self.line = line
        location = ""
        if self.path is not None:
            location = self.path
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")


class BenchRunnerError(ReefError):
    """Falha do runner durante o benchmark, com o índice do frame."""

    def __init__(self, frame_index: int, cause: BaseException):
        self.frame_index = frame_index
        super().__init__(f"Runner falhou no frame {frame_index}: {cause}")


# --- I/O (exit 2) ---


class ReefIOError(ReefError, OSError):
    """Falha de leitura/escrita de arquivos."""

    exit_code = EXIT_IO


# --- Backend / transporte (exit 3) ---


class SynthesisError(ReefError):
    """Base dos erros do backend de síntese."""

    exit_code = EXIT_BACKEND


class TransportError(SynthesisError):
    """Backend inacessível ou timeout."""


class ProtocolError(SynthesisError):
    """Resposta fora do contrato (dimensões erradas, corpo não-PNG)."""


class BackendError(SynthesisError):
    """Resposta não-sucesso do backend, com a mensagem do servidor."""

    def __init__(self, status_code: int, message: str):
        self.status_code = status_code
        self.server_message = message
        super().__init__(f"Backend retornou {status_code}: {message}")

    @property
    def transient(self) -> bool:
        """Erros 5xx são considerados transitórios."""
        return self.status_code >= 500
