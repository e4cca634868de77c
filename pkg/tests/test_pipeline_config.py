"""
Testes para o módulo pipeline_config.py.
"""

import pytest

from config.settings import settings
from src.errors import ReefIOError, ReefValidationError
from src.pipeline_config import PipelineConfig, load_pipeline_config, read_config_file


class TestReadConfigFile:
    """Testes para o arquivo chave: valor."""

    def test_flat_file(self, tmp_path):
        """Testa escalares e intervalos em lista."""
        path = tmp_path / "p.yaml"
        path.write_text("scenes: 5\ncamera_tilt_deg: [10, 20]\n# comentário\n")
        assert read_config_file(path) == {"scenes": 5, "camera_tilt_deg": [10, 20]}

    def test_empty_file(self, tmp_path):
        """Testa arquivo vazio."""
        path = tmp_path / "p.yaml"
        path.write_text("")
        assert read_config_file(path) == {}

    def test_nested_rejected(self, tmp_path):
        """Testa que mapeamentos aninhados são recusados."""
        path = tmp_path / "p.yaml"
        path.write_text("camera:\n  tilt: 10\n")
        with pytest.raises(ReefValidationError, match="camera"):
            read_config_file(path)

    def test_not_a_mapping(self, tmp_path):
        """Testa documento que não é mapeamento."""
        path = tmp_path / "p.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ReefValidationError):
            read_config_file(path)

    def test_invalid_yaml_line(self, tmp_path):
        """Testa YAML inválido com número da linha."""
        path = tmp_path / "p.yaml"
        path.write_text("scenes: 5\nseed: [1, 2\n")
        with pytest.raises(ReefValidationError, match="p.yaml:"):
            read_config_file(path)

    def test_missing_file(self, tmp_path):
        """Testa arquivo ausente."""
        with pytest.raises(ReefIOError):
            read_config_file(tmp_path / "nope.yaml")


class TestLoadPipelineConfig:
    """Testes para load_pipeline_config."""

    def test_defaults(self):
        """Testa defaults sem arquivo nem flags."""
        config = load_pipeline_config()
        assert config.scenes == 10
        assert config.real_train_frac == 0.30
        assert config.camera_config().width == 640

    def test_default_min_spacing_allows_overlap(self):
        """Testa que o espaçamento mínimo padrão é 0 (sobreposição livre)."""
        assert PipelineConfig().min_spacing_m == 0.0
        assert load_pipeline_config().min_spacing_m == 0.0

    def test_flags_win(self, tmp_path):
        """Testa que flags sobrepõem o arquivo e None é ignorado."""
        path = tmp_path / "p.yaml"
        path.write_text("scenes: 5\nseed: 3\n")
        config = load_pipeline_config(path, {"scenes": 2, "seed": None})
        assert config.scenes == 2
        assert config.seed == 3

    def test_shipped_example(self):
        """Testa o arquivo de exemplo distribuído."""
        config = load_pipeline_config(settings.prompts_dir.parent / "pipeline.example.yaml")
        assert config.scenes == 50
        assert config.camera_tilt_deg == (10.0, 25.0)

    @pytest.mark.parametrize(
        "overrides",
        [
            {"scenes": -1},
            {"real_train_frac": 1.5},
            {"camera_tilt_deg": [30, 10]},
            {"oysters_per_scene": [5, 2]},
            {"oyster_length_cm": [0, 3]},
            {"region_m": [0, 1]},
            {"threads": 0},
            {"unknown_key": 1},
        ],
    )
    def test_invalid(self, overrides):
        """Testa valores fora das invariantes."""
        with pytest.raises(ReefValidationError):
            load_pipeline_config(None, overrides)


class TestPipelineConfig:
    """Testes para os modelos derivados."""

    def test_echo_excludes_runtime_fields(self):
        """Testa que threads e diretório de saída não entram no eco."""
        a = PipelineConfig(threads=1, out="a").echo()
        b = PipelineConfig(threads=8, out="b").echo()
        assert a == b
        assert "threads" not in a

    def test_derived_models(self):
        """Testa câmera, distribuição e região."""
        config = PipelineConfig(region_m=(0.5, 0.3), oyster_layers=(4, 6), knot_style="uniform")
        assert config.region().x_max == pytest.approx(0.25)
        assert config.camera_config().look_at == (0.0, 0.0)
        distribution = config.oyster_distribution()
        assert distribution.num_layers == (4, 6)
        assert distribution.knot_style == "uniform"

    def test_backend_url_fallback(self, monkeypatch):
        """Testa URL do ambiente quando a configuração não define uma."""
        monkeypatch.setattr(settings.backend, "url", "http://gpu:7860")
        assert PipelineConfig().resolved_backend_url() == "http://gpu:7860"
        assert PipelineConfig(backend_url="http://x").resolved_backend_url() == "http://x"

    def test_worker_threads(self):
        """Testa o default de threads."""
        assert PipelineConfig(threads=3).worker_threads == 3
        assert PipelineConfig().worker_threads >= 1
