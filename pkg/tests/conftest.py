"""Shared fixtures for the reefforge test suite."""

import json
from pathlib import Path

import numpy as np
import pytest

from src.oystermesh import OysterDistribution, TriangleMesh
from src.scenegen import CameraConfig, CameraModel, Region

FIXTURES_DIR = Path(__file__).parent / "fixtures"


def quad_mesh(z: float, half: float, instance_id: int, center: tuple[float, float] = (0.0, 0.0)) -> TriangleMesh:
    """Square of side 2·half, perpendicular to +z at depth z (world = camera frame)."""
    cx, cy = center
    vertices = np.array(
        [
            (cx - half, cy - half, z),
            (cx + half, cy - half, z),
            (cx + half, cy + half, z),
            (cx - half, cy + half, z),
        ]
    )
    return TriangleMesh(vertices, np.array([[0, 1, 2], [0, 2, 3]]), instance_id)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES_DIR


@pytest.fixture
def load_fixture():
    """Loads a committed JSON fixture by file name."""

    def _load(name: str):
        return json.loads((FIXTURES_DIR / name).read_text(encoding="utf-8"))

    return _load


@pytest.fixture
def identity_camera() -> CameraModel:
    """640x480 camera at the origin looking down +z (60° horizontal FOV)."""
    config = CameraConfig()
    return CameraModel(fx=config.focal_px, fy=config.focal_px, cx=320.0, cy=240.0)


@pytest.fixture
def small_camera_config() -> CameraConfig:
    """64x64 camera close to the ground, for brute-force oracles."""
    return CameraConfig(width=64, height=64, height_m=(0.25, 0.35), tilt_deg=(0.0, 20.0))


@pytest.fixture
def small_distribution() -> OysterDistribution:
    """Coarse oysters (few triangles) for fast scene tests."""
    return OysterDistribution(num_layers=(4, 4), samples_per_perimeter=(8, 8))


@pytest.fixture
def small_region() -> Region:
    return Region.centered(0.2, 0.2)
