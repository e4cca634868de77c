"""
Gerador pseudoaleatório nomeado e versionado.

Todo sorteio do pipeline passa por aqui: PCG64 do numpy, semeado via
SeedSequence. Nome e versão vão para todo manifest, garantindo datasets
reproduzíveis entre máquinas.
"""

import numpy as np

from src.errors import ReefValidationError

PRNG_NAME = "numpy.random.PCG64"
PRNG_VERSION = np.__version__

# Streams independentes a partir da mesma seed
STREAM_OYSTER = 1
STREAM_PLACEMENT = 2
STREAM_CAMERA = 3
STREAM_ROUGHNESS = 4
STREAM_REFERENCES = 5
STREAM_SPLIT = 6
STREAM_MOCK_NOISE = 7
STREAM_SCENE_SIZE = 8


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Cria um Generator PCG64 para (seed, stream...)."""
    if seed < 0:
        raise ReefValidationError(f"Seed deve ser não-negativa, recebida {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *stream])))


def derive_seed(base_seed: int, index: int) -> int:
    """Seed filha determinística (63 bits) para o item `index` de uma execução."""
    state = np.random.SeedSequence([base_seed, index]).generate_state(1, dtype=np.uint64)
    return int(state[0] >> np.uint64(1))


def prng_info() -> dict[str, str]:
    """Identificação do PRNG gravada nos manifests."""
    return {"name": PRNG_NAME, "version": PRNG_VERSION}
