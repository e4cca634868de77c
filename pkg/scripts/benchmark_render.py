"""
Benchmark: Tempo de renderização por cena para diferentes resoluções e threads.
"""

import sys
import time
from pathlib import Path

# Adicionar diretorio raiz ao path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.rasterizer import render
from src.rng import derive_seed
from src.scenegen import CameraConfig, Region, place_oysters, sample_camera

SCENES = 5


def benchmark(width: int, height: int, threads: int, oysters: int = 6):
    """Mede o tempo médio de render() sobre cenas fixas."""
    print(f"\n{'=' * 60}")
    print(f"Benchmark: {width}x{height} | Threads: {threads} | Ostras: {oysters}")
    print("=" * 60)

    config = CameraConfig(width=width, height=height, height_m=(0.5, 0.8))
    region = Region.centered(0.6, 0.6)
    start = time.perf_counter()
    try:
        for index in range(SCENES):
            seed = derive_seed(42, index)
            scene = place_oysters(oysters, region, seed, min_spacing=0.05)
            render(scene, sample_camera(seed, config), threads=threads)
        elapsed = (time.perf_counter() - start) / SCENES
        print(f"\n[OK] {elapsed * 1000:.1f} ms por cena")
        print(f"     Taxa: {1 / elapsed:.2f} cenas/segundo")
        return elapsed
    except Exception as e:
        print(f"\n[ERROR] Falha: {e}")
        return None


if __name__ == "__main__":
    print("\n" + "=" * 60)
    print("BENCHMARK RASTERIZER - REEFFORGE")
    print("=" * 60)

    results = {}
    results["320x240_t1"] = benchmark(320, 240, threads=1)
    results["640x480_t1"] = benchmark(640, 480, threads=1)
    results["640x480_t4"] = benchmark(640, 480, threads=4)

    # Resumo
    print("\n" + "=" * 60)
    print("RESUMO")
    print("=" * 60)
    for key, value in results.items():
        status = f"{value * 1000:.1f} ms" if value else "FALHOU"
        print(f"  {key}: {status}")
