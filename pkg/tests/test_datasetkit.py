"""Tests for datasetkit - mask annotations, YOLO labels, split protocol and trainer config."""

import numpy as np
import pytest
from pydantic import ValidationError

from src.datasetkit import (
    TRAINING_DEFAULTS,
    emit_training_config,
    format_yolo_line,
    mask_to_boxes,
    masks_to_boxes,
    mix_split,
    parse_yolo_text,
    read_manifest,
    read_training_config,
    read_yolo_labels,
    train_count,
    write_manifest,
    write_yolo_labels,
)
from src.errors import ParseError, ReefIOError, ReefValidationError
from src.models import BoundingBox, DatasetManifest, LabeledImage
from src.rasterizer import InstanceMask, render
from src.scenegen import Region, place_oysters, sample_camera


def _mask(data) -> InstanceMask:
    array = np.asarray(data, dtype=np.uint32)
    return InstanceMask(array.shape[1], array.shape[0], array)


def _entries(n: int, source: str, prefix: str) -> list[LabeledImage]:
    return [
        LabeledImage(
            image_path=f"{prefix}/{i:05d}.png",
            width=640,
            height=480,
            source=source,
            scene_ref=f"scene_{i:05d}" if source == "synthetic" else None,
        )
        for i in range(n)
    ]


class TestMaskToBoxes:
    """Tests for mask-derived annotations."""

    def test_known_box(self):
        """Test rows 30..40 and cols 10..20 give the pixel-edge normalized box."""
        data = np.zeros((100, 100))
        data[30:41, 10:21] = 7
        (box,) = mask_to_boxes(_mask(data))
        assert box.class_id == 0
        assert box.cx == pytest.approx(0.155, abs=1e-12)
        assert box.cy == pytest.approx(0.355, abs=1e-12)
        assert box.w == pytest.approx(0.11, abs=1e-12)
        assert box.h == pytest.approx(0.11, abs=1e-12)

    def test_empty_mask(self):
        """Test an empty mask yields no boxes."""
        assert mask_to_boxes(_mask(np.zeros((10, 10)))) == []

    def test_min_pixels(self):
        """Test an instance with 10 pixels is dropped at min_pixels=25."""
        data = np.zeros((20, 20))
        data[0, :10] = 3
        data[5:15, 5:15] = 4
        boxes = mask_to_boxes(_mask(data), min_pixels=25)
        assert len(boxes) == 1
        assert boxes[0].w == pytest.approx(0.5)

    def test_full_frame_box(self):
        """Test an instance covering the image gives the unit box."""
        (box,) = mask_to_boxes(_mask(np.ones((8, 12))), min_pixels=1)
        assert (box.cx, box.cy, box.w, box.h) == (0.5, 0.5, 1.0, 1.0)

    def test_rendered_masks_rescan(self, small_camera_config, small_distribution, small_region):
        """Test boxes exactly bound the nonzero pixels of rendered masks."""
        for seed in range(10):
            scene = place_oysters(3, small_region, seed=seed, distribution=small_distribution)
            mask = render(scene, sample_camera(seed, small_camera_config), preview=False).mask
            boxes = mask_to_boxes(mask, min_pixels=1)
            ids = mask.ids()
            assert len(boxes) == len(ids)
            for instance_id, box in zip(ids, boxes):
                ys, xs = np.nonzero(mask.data == instance_id)
                x0, y0, x1, y1 = box.to_pixels(mask.width, mask.height)
                assert x0 == pytest.approx(xs.min(), abs=1e-9)
                assert x1 == pytest.approx(xs.max() + 1, abs=1e-9)
                assert y0 == pytest.approx(ys.min(), abs=1e-9)
                assert y1 == pytest.approx(ys.max() + 1, abs=1e-9)

    def test_parallel_matches_serial(self):
        """Test threaded label derivation keeps input order and values."""
        rng = np.random.default_rng(0)
        masks = [_mask(rng.integers(0, 4, (16, 16))) for _ in range(6)]
        assert masks_to_boxes(masks, min_pixels=1, threads=4) == masks_to_boxes(masks, min_pixels=1)


class TestYoloLabels:
    """Tests for the YOLO text format."""

    def test_line_format(self):
        """Test the stated 6-decimal format."""
        box = BoundingBox(cx=0.5, cy=0.5, w=0.25, h=0.1)
        assert format_yolo_line(box) == "0 0.500000 0.500000 0.250000 0.100000\n"

    def test_write_read(self, tmp_path):
        """Test written labels read back within 1e-6."""
        boxes = (BoundingBox(cx=0.123456789, cy=0.4, w=0.2, h=0.3), BoundingBox(cx=0.9, cy=0.9, w=0.1, h=0.1))
        entry = LabeledImage(image_path="img/a.png", width=640, height=480, boxes=boxes, source="real")
        path = write_yolo_labels(entry, tmp_path)
        assert path.name == "a.txt"
        assert b"\r\n" not in path.read_bytes()
        for original, loaded in zip(boxes, read_yolo_labels(path)):
            for field in ("cx", "cy", "w", "h"):
                assert getattr(loaded, field) == pytest.approx(getattr(original, field), abs=1e-6)

    def test_empty_label_file(self, tmp_path):
        """Test images without oysters get an empty label file."""
        entry = LabeledImage(image_path="b.png", width=10, height=10, source="real")
        assert read_yolo_labels(write_yolo_labels(entry, tmp_path)) == []

    def test_out_of_range(self, tmp_path):
        """Test cx out of range is a parse error with the line number."""
        path = tmp_path / "bad.txt"
        path.write_text("0 0.5 0.5 0.1 0.1\n0 1.5 0.5 0.1 0.1\n")
        with pytest.raises(ParseError) as excinfo:
            read_yolo_labels(path)
        assert excinfo.value.line == 2
        assert "bad.txt:2" in str(excinfo.value)

    @pytest.mark.parametrize(
        "line", ["0 0.5 0.5 0.1", "0 0.5 0.5 0.1 0.1 0.9", "x 0.5 0.5 0.1 0.1", "0 0.95 0.5 0.2 0.1"]
    )
    def test_malformed_lines(self, line):
        """Test field count, numbers and containment are checked."""
        with pytest.raises(ParseError):
            parse_yolo_text(line + "\n")

    def test_confidence_column(self):
        """Test the optional confidence column when allowed."""
        ((box, confidence),) = parse_yolo_text("0 0.5 0.5 0.2 0.2 0.75\n", allow_confidence=True)
        assert confidence == 0.75
        assert box.w == 0.2

    def test_missing_file(self, tmp_path):
        """Test unreadable label files are I/O errors."""
        with pytest.raises(ReefIOError):
            read_yolo_labels(tmp_path / "none.txt")


class TestMixSplit:
    """Tests for the real/synthetic split protocol."""

    def test_train_count_floor(self):
        """Test the floor rule on the decimal fraction."""
        assert train_count(2025, 0.30) == 607
        assert train_count(10, 0.3) == 3
        assert train_count(7, 1.0) == 7
        assert train_count(7, 0.0) == 0

    def test_protocol_counts(self):
        """Test 2025 real at 0.30 plus 4000 synthetic gives 4607 train and 1418 test."""
        manifest = mix_split(_entries(2025, "real", "real"), _entries(4000, "synthetic", "synth"), 0.30, seed=11)
        train, test = manifest.subset("train"), manifest.subset("test")
        assert len(train) == 4607
        assert len(test) == 1418
        assert sum(e.source == "real" for e in train) == 607
        assert all(e.source == "real" for e in test)

    def test_partition(self):
        """Test train and test are disjoint and cover every entry."""
        manifest = mix_split(_entries(50, "real", "r"), _entries(20, "synthetic", "s"), 0.5, seed=2)
        train = {e.image_path for e in manifest.subset("train")}
        test = {e.image_path for e in manifest.subset("test")}
        assert train.isdisjoint(test)
        assert train | test == {e.image_path for e in manifest.entries}

    def test_test_purity_random(self):
        """Test no synthetic entry lands in test across random inputs."""
        rng = np.random.default_rng(3)
        for trial in range(30):
            real = _entries(int(rng.integers(0, 40)), "real", f"r{trial}")
            synth = _entries(int(rng.integers(0, 40)), "synthetic", f"s{trial}")
            manifest = mix_split(real, synth, float(rng.uniform(0, 1)), seed=trial)
            assert all(e.source == "real" for e in manifest.subset("test"))

    def test_deterministic(self):
        """Test entries, fraction and seed fully determine the split."""
        real = _entries(100, "real", "r")
        assert mix_split(real, [], 0.3, seed=5).split == mix_split(real, [], 0.3, seed=5).split
        assert mix_split(real, [], 0.3, seed=5).split != mix_split(real, [], 0.3, seed=6).split

    def test_invalid_fraction(self):
        """Test fractions outside [0, 1] are rejected."""
        with pytest.raises(ReefValidationError):
            mix_split([], [], 1.5)

    def test_swapped_sources(self):
        """Test synthetic entries passed as real are rejected."""
        with pytest.raises(ReefValidationError):
            mix_split(_entries(2, "synthetic", "s"), [])

    def test_manifest_rejects_synthetic_test(self):
        """Test the manifest invariant itself rejects synthetic test entries."""
        synth = _entries(1, "synthetic", "s")
        with pytest.raises(ValidationError):
            DatasetManifest(entries=tuple(synth), split={synth[0].image_path: "test"}, seed=0, real_train_frac=0.3)

    def test_manifest_round_trip(self, tmp_path):
        """Test manifest JSON write and read."""
        manifest = mix_split(_entries(10, "real", "r"), _entries(3, "synthetic", "s"), 0.3, seed=1)
        assert read_manifest(write_manifest(manifest, tmp_path / "dataset.json")) == manifest


class TestTrainingConfig:
    """Tests for the emitted trainer configuration."""

    @pytest.fixture
    def manifest(self):
        return mix_split(_entries(10, "real", "r"), _entries(4, "synthetic", "s"), 0.3, seed=0)

    def test_hyperparameters_in_file(self, manifest, tmp_path):
        """Test the file carries the training hyperparameters."""
        text = emit_training_config(manifest, tmp_path / "train.yaml").read_text()
        for line in ("epochs: 300", "lr0: 0.01", "max_det: 300", "val_iou: 0.7", "batch: 16", "imgsz: 640"):
            assert line in text.splitlines()
        assert "names: [oyster]" in text

    def test_round_trip(self, manifest, tmp_path):
        """Test emit then parse reproduces every value."""
        config = read_training_config(emit_training_config(manifest, tmp_path / "train.yaml"))
        for key, value in TRAINING_DEFAULTS.items():
            assert config[key] == value
        assert config["nc"] == 1
        assert config["model"] == "yolov10l.pt"

    def test_split_lists(self, manifest, tmp_path):
        """Test train/test list files match the split."""
        emit_training_config(manifest, tmp_path / "train.yaml")
        train = (tmp_path / "train.txt").read_text().splitlines()
        test = (tmp_path / "test.txt").read_text().splitlines()
        assert len(train) == 3 + 4
        assert len(test) == 7
        assert all(path.startswith("r/") for path in test)

    def test_unwritable(self, manifest, tmp_path):
        """Test an unwritable destination is an I/O error."""
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        with pytest.raises(ReefIOError):
            emit_training_config(manifest, blocker / "train.yaml")
