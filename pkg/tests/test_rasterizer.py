"""Tests for rasterizer - z-buffer rendering and PNG codecs."""

import io

import numpy as np
import pytest
from PIL import Image

from src.errors import CapacityError, ReefValidationError
from src.oystermesh import TriangleMesh
from src.rasterizer import (
    DepthMap,
    InstanceMask,
    RenderOutput,
    ScreenTriangles,
    decode_depth_png,
    decode_mask_png,
    encode_depth_png,
    encode_mask_png,
    encode_preview_png,
    instance_color,
    palette_colors,
    project_scene,
    render,
    render_meshes,
)
from src.scenegen import CameraModel, Region, place_oysters, sample_camera, world_meshes
from tests.conftest import quad_mesh


def brute_force(tris: ScreenTriangles, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-triangle exhaustive coverage test over every pixel center."""
    depth = np.full((height, width), np.inf)
    ids = np.zeros((height, width), dtype=np.uint32)
    pcx, pcy = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    for t in range(len(tris)):
        (x0, y0), (x1, y1), (x2, y2) = tris.xy[t]
        z0, z1, z2 = tris.z[t]
        a = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        e0 = (x2 - x1) * (pcy - y1) - (y2 - y1) * (pcx - x1)
        e1 = (x0 - x2) * (pcy - y2) - (y0 - y2) * (pcx - x2)
        e2 = (x1 - x0) * (pcy - y0) - (y1 - y0) * (pcx - x0)
        if a > 0:
            inside = (e0 >= 0) & (e1 >= 0) & (e2 >= 0)
        else:
            inside = (e0 <= 0) & (e1 <= 0) & (e2 <= 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = 1.0 / ((e0 / a) / z0 + (e1 / a) / z1 + (e2 / a) / z2)
        closer = inside & (z < depth)
        depth[closer] = z[closer]
        ids[closer] = tris.ids[t]
    return depth, ids


def _small_scene(seed, small_region, small_distribution, small_camera_config, max_oysters=5):
    n = int(np.random.default_rng(seed).integers(1, max_oysters + 1))
    scene = place_oysters(n, small_region, seed=seed, distribution=small_distribution)
    return scene, sample_camera(seed, small_camera_config)


class TestRender:
    """Tests for the z-buffer renderer."""

    def test_empty_scene(self):
        """Test an empty scene renders all background."""
        scene = place_oysters(0, Region.centered(), seed=1)
        out = render(scene, sample_camera(1))
        assert np.all(np.isinf(out.depth.data))
        assert not out.mask.data.any()
        assert (out.depth.width, out.depth.height) == (640, 480)

    def test_quad_center_depth(self, identity_camera):
        """Test a 1 m quad at 2 m gives center depth 2.0."""
        out = render_meshes([quad_mesh(2.0, 0.5, 1)], identity_camera)
        assert out.depth.data[240, 320] == pytest.approx(2.0, abs=1e-4)
        assert out.mask.data[240, 320] == 1

    def test_overlapping_quads(self, identity_camera):
        """Test the nearer quad wins the overlap."""
        near_quad = quad_mesh(1.0, 0.2, 1)
        far_quad = quad_mesh(2.0, 1.0, 2)
        out = render_meshes([far_quad, near_quad], identity_camera)
        assert out.mask.data[240, 320] == 1
        assert out.depth.data[240, 320] == pytest.approx(1.0, abs=1e-9)
        # Outside the near quad only the far one covers
        assert out.mask.data[240, 150] == 2
        assert out.depth.data[240, 150] == pytest.approx(2.0, abs=1e-9)

    def test_equal_depth_tie_first_wins(self, identity_camera):
        """Test exact depth ties keep the earlier instance."""
        out = render_meshes([quad_mesh(1.5, 0.3, 1), quad_mesh(1.5, 0.3, 2)], identity_camera)
        assert out.mask.data[240, 320] == 1

    def test_camera_facing_away(self, identity_camera):
        """Test geometry behind the camera gives an empty output, not an error."""
        out = render_meshes([quad_mesh(-2.0, 0.5, 1)], identity_camera)
        assert not out.mask.data.any()

    def test_near_plane_clipping(self, identity_camera):
        """Test a triangle straddling the near plane is clipped, not discarded."""
        vertices = np.array([(-0.05, -0.05, 0.01), (0.05, -0.05, 0.5), (0.0, 0.05, 0.5)])
        mesh = TriangleMesh(vertices, np.array([[0, 1, 2]]), 1)
        tris = project_scene([mesh], identity_camera, near=0.05)
        assert len(tris) == 2
        assert tris.z.min() == pytest.approx(0.05)
        out = render_meshes([mesh], identity_camera)
        finite = out.depth.data[np.isfinite(out.depth.data)]
        assert finite.size > 0
        assert finite.min() >= 0.05 - 1e-9

    def test_fully_behind_near_plane_dropped(self, identity_camera):
        """Test triangles entirely in front of the near plane are dropped."""
        vertices = np.array([(-0.01, -0.01, 0.02), (0.01, -0.01, 0.02), (0.0, 0.01, 0.03)])
        mesh = TriangleMesh(vertices, np.array([[0, 1, 2]]), 1)
        assert len(project_scene([mesh], identity_camera)) == 0

    def test_pixel_alignment_random_scenes(self, small_region, small_distribution, small_camera_config):
        """Test mask nonzero iff depth finite on 100 random scenes."""
        for seed in range(100):
            scene, camera = _small_scene(seed, small_region, small_distribution, small_camera_config)
            out = render(scene, camera, preview=False)
            assert np.array_equal(out.mask.data != 0, np.isfinite(out.depth.data))
            assert set(out.mask.ids()) <= {inst.instance_id for inst in scene.instances}

    def test_brute_force_oracle(self, small_region, small_distribution, small_camera_config):
        """Test the z-buffer agrees with per-pixel exhaustive triangle tests on 20 scenes."""
        for seed in range(20):
            scene, camera = _small_scene(seed, small_region, small_distribution, small_camera_config)
            out = render(scene, camera, preview=False)
            tris = project_scene(world_meshes(scene), camera)
            depth, ids = brute_force(tris, camera.width, camera.height)
            assert np.array_equal(out.mask.data, ids)
            finite = np.isfinite(depth)
            assert np.array_equal(finite, np.isfinite(out.depth.data))
            np.testing.assert_allclose(out.depth.data[finite], depth[finite], atol=1e-6)

    def test_sees_oysters(self, small_region, small_distribution, small_camera_config):
        """Test small scenes are not trivially empty."""
        covered = 0
        for seed in range(10):
            scene, camera = _small_scene(seed, small_region, small_distribution, small_camera_config)
            covered += int((render(scene, camera, preview=False).mask.data != 0).sum())
        assert covered > 0

    def test_threads_byte_identical(self, small_region, small_distribution):
        """Test 1 and 8 threads give byte-identical encodings."""
        scene = place_oysters(5, small_region, seed=31, distribution=small_distribution)
        camera = sample_camera(31)
        a = render(scene, camera, threads=1)
        b = render(scene, camera, threads=8)
        assert encode_depth_png(a.depth, 2.0) == encode_depth_png(b.depth, 2.0)
        assert encode_mask_png(a.mask) == encode_mask_png(b.mask)
        assert np.array_equal(a.preview, b.preview)

    def test_deterministic(self, small_region, small_distribution):
        """Test render is a pure function."""
        scene = place_oysters(3, small_region, seed=8, distribution=small_distribution)
        camera = sample_camera(8)
        a, b = render(scene, camera), render(scene, camera)
        assert np.array_equal(a.depth.data, b.depth.data)
        assert np.array_equal(a.mask.data, b.mask.data)

    def test_preview_black_background(self, identity_camera):
        """Test preview is black where nothing is rendered and colored on the quad."""
        out = render_meshes([quad_mesh(2.0, 0.2, 1)], identity_camera)
        assert tuple(out.preview[0, 0]) == (0, 0, 0)
        assert tuple(out.preview[240, 320]) == instance_color(1)

    def test_ground_layer(self):
        """Test the ground layer is finite below the horizon and separate from the mask."""
        camera = sample_camera(4)
        out = render(place_oysters(0, Region.centered(), seed=4), camera, include_ground=True)
        assert out.ground is not None
        assert np.isfinite(out.ground.data[240, 320])
        assert not out.mask.data.any()
        encoded = decode_depth_png(encode_depth_png(out.depth, 2.0, ground=out.ground))
        assert encoded[240, 320] > 0


class TestRenderOutput:
    """Tests for render output invariants."""

    def test_misaligned_rejected(self):
        """Test depth and mask must agree on coverage."""
        depth = DepthMap(2, 1, np.array([[1.0, np.inf]]))
        mask = InstanceMask(2, 1, np.array([[0, 1]]))
        with pytest.raises(ReefValidationError):
            RenderOutput(depth=depth, mask=mask)

    def test_non_positive_depth(self):
        """Test finite depths must be positive."""
        with pytest.raises(ReefValidationError):
            DepthMap(1, 1, np.array([[0.0]]))

    def test_camera_validation(self):
        """Test a camera with non-positive focal length is rejected."""
        with pytest.raises(ReefValidationError):
            CameraModel(fx=0.0, fy=1.0, cx=1.0, cy=1.0)


class TestDepthCodec:
    """Tests for 16-bit depth encoding."""

    def _encode(self, values, max_depth=2.0, **kwargs):
        data = np.array([values], dtype=np.float64)
        return decode_depth_png(encode_depth_png(DepthMap(len(values), 1, data), max_depth, **kwargs))[0]

    def test_endpoints(self):
        """Test d = max maps to 0 and d -> 0+ maps to 65535."""
        assert list(self._encode([2.0, 1e-12])) == [0, 65535]

    def test_half_depth(self):
        """Test d = max/2 maps to 32768."""
        assert self._encode([1.0])[0] == 32768

    def test_beyond_max_clamped(self):
        """Test depths past max clamp to 0."""
        assert self._encode([5.0])[0] == 0

    def test_background_zero(self):
        """Test an all-background map encodes to zeros."""
        assert not self._encode([np.inf, np.inf]).any()

    def test_far_bright_polarity(self):
        """Test the polarity flag inverts the mapping."""
        assert list(self._encode([2.0, 1.0], near_bright=False)) == [65535, 32768]

    def test_png_is_16_bit_grayscale(self):
        """Test the PNG holds one 16-bit channel."""
        png = encode_depth_png(DepthMap(4, 3, np.full((3, 4), 1.0)), 2.0)
        with Image.open(io.BytesIO(png)) as img:
            assert img.mode in ("I;16", "I")
            assert img.size == (4, 3)

    def test_invalid_max_depth(self):
        """Test max_depth_m must be positive."""
        with pytest.raises(ReefValidationError):
            encode_depth_png(DepthMap.empty(2, 2), 0.0)


class TestMaskCodec:
    """Tests for mask encodings and the palette."""

    def test_round_trip(self):
        """Test raw mask encode/decode is lossless."""
        data = np.array([[0, 1, 2], [65535, 7, 0]], dtype=np.uint32)
        raw, _ = encode_mask_png(InstanceMask(3, 2, data))
        assert np.array_equal(decode_mask_png(raw).data, data)

    def test_background_black(self):
        """Test background-only masks visualize as all black."""
        _, vis = encode_mask_png(InstanceMask(5, 4, np.zeros((4, 5))))
        with Image.open(io.BytesIO(vis)) as img:
            assert img.mode == "RGB"
            assert not np.asarray(img).any()

    def test_two_ids_three_colors(self):
        """Test ids {1, 2} give exactly 3 distinct colors including black."""
        data = np.array([[0, 1], [2, 2]], dtype=np.uint32)
        _, vis = encode_mask_png(InstanceMask(2, 2, data))
        with Image.open(io.BytesIO(vis)) as img:
            colors = {tuple(c) for c in np.asarray(img).reshape(-1, 3)}
        assert len(colors) == 3
        assert (0, 0, 0) in colors

    def test_id_overflow(self):
        """Test ids above 65535 are a capacity error."""
        with pytest.raises(CapacityError):
            encode_mask_png(InstanceMask(1, 1, np.array([[70000]])))

    def test_palette_vectorized_matches_scalar(self):
        """Test vectorized palette equals the scalar definition."""
        ids = np.arange(0, 300, dtype=np.uint32)
        colors = palette_colors(ids)
        for i in ids:
            assert tuple(int(c) for c in colors[i]) == instance_color(int(i))

    def test_palette_channels_bright(self):
        """Test instance colors stay in [64, 255]."""
        colors = palette_colors(np.arange(1, 1000, dtype=np.uint32))
        assert colors.min() >= 64

    def test_preview_png(self):
        """Test the preview encodes as RGB."""
        png = encode_preview_png(np.zeros((3, 4, 3), dtype=np.uint8))
        with Image.open(io.BytesIO(png)) as img:
            assert img.mode == "RGB"
