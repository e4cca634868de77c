"""
Testes para o módulo ingestion.py.

Foca no carregamento de pares imagem/label e de predições em JSON.
"""

import json

import pytest
from PIL import Image

from src.errors import ParseError, ReefIOError, ReefValidationError
from src.ingestion import (
    default_labels_dir,
    image_size_index,
    load_detections_json,
    load_ground_truth_json,
    load_labeled_dir,
    load_yolo_dir_as_detections,
)


def _image(path, size=(40, 20)):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.new("RGB", size).save(path)


class TestLoadLabeledDir:
    """Testes para load_labeled_dir."""

    def test_pairs_loaded(self, tmp_path):
        """Testa pares imagem + label na convenção images/labels."""
        _image(tmp_path / "images" / "a.png")
        _image(tmp_path / "images" / "b.jpg", size=(64, 48))
        (tmp_path / "labels").mkdir()
        (tmp_path / "labels" / "a.txt").write_text("0 0.5 0.5 0.2 0.2\n")

        result = load_labeled_dir(tmp_path / "images")

        assert result.success_count == 2
        assert not result.has_errors
        a, b = result.entries
        assert (a.width, a.height) == (40, 20)
        assert len(a.boxes) == 1
        assert b.boxes == ()
        assert (b.width, b.height) == (64, 48)
        assert a.source == "real"

    def test_malformed_label_counted(self, tmp_path):
        """Testa que label malformado vira erro contado, sem abortar."""
        _image(tmp_path / "x.png")
        _image(tmp_path / "y.png")
        (tmp_path / "x.txt").write_text("0 2.0 0.5 0.1 0.1\n")

        result = load_labeled_dir(tmp_path)

        assert result.total_rows == 2
        assert result.error_count == 1
        assert result.success_rate == 0.5
        assert "x.png" in result.error_samples[0]

    def test_synthetic_scene_ref(self, tmp_path):
        """Testa que entradas sintéticas recebem scene_ref do nome do arquivo."""
        _image(tmp_path / "scene_00003.png")
        result = load_labeled_dir(tmp_path, source="synthetic")
        assert result.entries[0].scene_ref == "scene_00003"

    def test_missing_dir(self, tmp_path):
        """Testa diretório inexistente."""
        with pytest.raises(ReefIOError):
            load_labeled_dir(tmp_path / "nope")

    def test_default_labels_dir(self, tmp_path):
        """Testa a convenção de diretórios YOLO."""
        assert default_labels_dir(tmp_path / "images") == tmp_path / "labels"
        assert default_labels_dir(tmp_path / "frames") == tmp_path / "frames"

    def test_empty_result_rate(self, tmp_path):
        """Testa taxa de sucesso sem linhas."""
        assert load_labeled_dir(tmp_path).success_rate == 1.0


class TestDetectionsJson:
    """Testes para predições e ground truth em JSON."""

    def test_load(self, tmp_path):
        """Testa carregamento do schema de predições."""
        path = tmp_path / "preds.json"
        first = {"image_id": "a", "x_min": 0, "y_min": 0, "x_max": 10, "y_max": 10, "confidence": 0.9}
        second = {"image_id": 7, "x_min": 1, "y_min": 2, "x_max": 3, "y_max": 4, "confidence": 0.1, "class_id": 0}
        path.write_text(json.dumps([first, second]))
        detections = load_detections_json(path)
        assert [d.image_id for d in detections] == ["a", "7"]
        assert detections[0].box == (0.0, 0.0, 10.0, 10.0)

    def test_error_line_number(self, tmp_path):
        """Testa que item fora do schema informa caminho e linha."""
        path = tmp_path / "preds.json"
        path.write_text(
            "[\n"
            '  {"image_id": "a", "x_min": 0, "y_min": 0, "x_max": 10, "y_max": 10, "confidence": 0.5},\n'
            '  {"image_id": "a", "x_min": 0, "y_min": 0, "x_max": 10, "y_max": 10, "confidence": 1.5}\n'
            "]\n"
        )
        with pytest.raises(ParseError) as excinfo:
            load_detections_json(path)
        assert excinfo.value.line == 3
        assert excinfo.value.path == str(path)

    def test_degenerate_box(self, tmp_path):
        """Testa retângulo degenerado como erro de parsing."""
        path = tmp_path / "gt.json"
        path.write_text('[{"image_id": "a", "x_min": 5, "y_min": 0, "x_max": 5, "y_max": 10}]')
        with pytest.raises(ParseError):
            load_ground_truth_json(path)

    def test_invalid_json(self, tmp_path):
        """Testa JSON sintaticamente inválido."""
        path = tmp_path / "bad.json"
        path.write_text('[\n{"image_id": "a",\n')
        with pytest.raises(ParseError):
            load_detections_json(path)

    def test_not_an_array(self, tmp_path):
        """Testa documento que não é array."""
        path = tmp_path / "obj.json"
        path.write_text('{"image_id": "a"}')
        with pytest.raises(ParseError):
            load_detections_json(path)

    def test_empty_array(self, tmp_path):
        """Testa array vazio."""
        path = tmp_path / "empty.json"
        path.write_text("[ ]\n")
        assert load_detections_json(path) == []

    def test_ground_truth_ignores_confidence(self, tmp_path):
        """Testa ground truth sem confiança."""
        path = tmp_path / "gt.json"
        path.write_text('[{"image_id": "a", "x_min": 0, "y_min": 0, "x_max": 4, "y_max": 4}]')
        (gt,) = load_ground_truth_json(path)
        assert gt.box == (0.0, 0.0, 4.0, 4.0)


class TestYoloAsDetections:
    """Testes para conversão de labels YOLO em retângulos de pixel."""

    def test_pixel_boxes(self, tmp_path):
        """Testa conversão com e sem coluna de confiança."""
        (tmp_path / "a.txt").write_text("0 0.5 0.5 0.5 0.5\n0 0.25 0.25 0.1 0.1 0.3\n")
        detections = load_yolo_dir_as_detections(tmp_path, {"a": (100, 200)})
        assert detections[0].box == pytest.approx((25.0, 50.0, 75.0, 150.0))
        assert detections[0].confidence == 1.0
        assert detections[1].confidence == 0.3

    def test_ground_truth_kind(self, tmp_path):
        """Testa saída como ground truth."""
        (tmp_path / "a.txt").write_text("0 0.5 0.5 0.5 0.5\n")
        (gt,) = load_yolo_dir_as_detections(tmp_path, {"a": (10, 10)}, kind="ground_truth")
        assert not hasattr(gt, "confidence")

    def test_unknown_size(self, tmp_path):
        """Testa label sem tamanho de imagem conhecido."""
        (tmp_path / "z.txt").write_text("")
        with pytest.raises(ReefValidationError, match="z"):
            load_yolo_dir_as_detections(tmp_path, {})


class TestImageSizeIndex:
    """Testes para o índice de tamanhos."""

    def test_from_directory(self, tmp_path):
        """Testa leitura de tamanhos com Pillow."""
        _image(tmp_path / "a.png", size=(30, 10))
        assert image_size_index(tmp_path) == {"a": (30, 10)}

    def test_from_mapping(self, tmp_path):
        """Testa objeto JSON image_id -> [w, h]."""
        path = tmp_path / "sizes.json"
        path.write_text('{"a": [640, 480]}')
        assert image_size_index(path) == {"a": (640, 480)}

    def test_from_manifest(self, tmp_path):
        """Testa manifest de dataset."""
        path = tmp_path / "dataset.json"
        path.write_text(json.dumps({"entries": [{"image_path": "x/b.png", "width": 8, "height": 6}]}))
        assert image_size_index(path) == {"b": (8, 6)}

    def test_malformed_mapping(self, tmp_path):
        """Testa tamanho malformado."""
        path = tmp_path / "sizes.json"
        path.write_text('{"a": 640}')
        with pytest.raises(ReefValidationError):
            image_size_index(path)
