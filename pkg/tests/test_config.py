"""Tests for the INI configuration layer."""

import pytest

from melvc.config import (
    EvalSettings,
    ModelShape,
    PipelineConfig,
    default_config,
    load_config,
    save_config,
    write_default_config,
)
from melvc.corpus import LANG_A, LANG_B
from melvc.dsp import FrameConfig
from melvc.errors import ConfigError


class TestDefaults:
    def test_published_values_prefilled(self):
        cfg = default_config()
        assert cfg.frame.sample_rate == 22050
        assert cfg.frame.mel_dim == 80
        assert cfg.shape.d_latent == 64
        assert cfg.shape.decoder_widths == (256,) * 8
        assert cfg.shape.bias_sites == (5, 6, 7, 8)
        assert cfg.train.beta == 0.25

    def test_corpus_inherits_signal_settings(self):
        frame = FrameConfig(sample_rate=16000, fmax=8000.0)
        cfg = PipelineConfig(frame=frame)
        assert cfg.corpus.frame_config == frame

    def test_model_config_plugs_in_data_dims(self):
        cfg = default_config()
        model = cfg.model_config(11)
        assert model.d_linguistic == 11
        assert model.d_mel == cfg.frame.mel_dim
        assert model.d_latent == 64

    def test_shape_build_tuplifies(self):
        shape = ModelShape(decoder_widths=[32, 32, 32, 32], bias_sites=[2, 3])
        model = shape.build(5, 20)
        assert model.decoder_widths == (32, 32, 32, 32)
        assert model.bias_sites == (2, 3)


class TestLoadConfig:
    def test_template_round_trips_to_defaults(self, tmp_path):
        path = tmp_path / "default.ini"
        write_default_config(path)
        assert load_config(path) == default_config()

    def test_save_load_round_trip(self, tmp_path):
        cfg = default_config()
        cfg.train.beta = 0.5
        cfg.shape.d_latent = 32
        cfg.eval = EvalSettings(scenarios=("AA-A", "AB-B"), seed=4, include_probes=False)
        path = tmp_path / "custom.ini"
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_partial_override_keeps_other_defaults(self, tmp_path):
        path = tmp_path / "partial.ini"
        path.write_text("[train]\nbeta = 0.75\nmax_steps = 10\n")
        cfg = load_config(path)
        assert cfg.train.beta == 0.75
        assert cfg.train.max_steps == 10
        assert cfg.train.learning_rate == default_config().train.learning_rate
        assert cfg.shape == default_config().shape

    def test_tuple_values_parsed(self, tmp_path):
        path = tmp_path / "tuples.ini"
        path.write_text(
            "[model]\ndecoder_widths = 32, 32, 32, 32\nbias_sites = 2,3\n"
            "[corpus]\ntranscribed_languages = A, B\n"
        )
        cfg = load_config(path)
        assert cfg.shape.decoder_widths == (32, 32, 32, 32)
        assert cfg.shape.bias_sites == (2, 3)
        assert cfg.corpus.transcribed_languages == (LANG_A, LANG_B)

    def test_inline_comments_ignored(self, tmp_path):
        path = tmp_path / "comments.ini"
        path.write_text("[train]\nbeta = 0.3  # tie weight\n")
        assert load_config(path).train.beta == 0.3

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.ini")

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[optimizer]\nlearning_rate = 1\n")
        with pytest.raises(ConfigError, match="unknown section"):
            load_config(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[train]\nlearning_rte = 1e-3\n")
        with pytest.raises(ConfigError, match="unknown key"):
            load_config(path)

    def test_bad_value_rejected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[train]\nmax_steps = soon\n")
        with pytest.raises(ConfigError, match="bad value"):
            load_config(path)

    def test_bad_language_rejected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[corpus]\ntranscribed_languages = A, Q\n")
        with pytest.raises(ConfigError, match="unknown language"):
            load_config(path)

    def test_bad_scenario_rejected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[eval]\nscenarios = AA-A, XX-X\n")
        with pytest.raises(ConfigError, match="unknown scenario"):
            load_config(path)

    def test_bad_kl_direction_rejected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[train]\nkl_direction = sideways\n")
        with pytest.raises(ConfigError, match="kl_direction"):
            load_config(path)

    def test_invalid_combination_rejected(self, tmp_path):
        # hop larger than window violates the framing invariant
        path = tmp_path / "bad.ini"
        path.write_text("[signal]\nhop_size = 4096\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_malformed_ini_rejected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("beta = 0.5\n")  # key before any section header
        with pytest.raises(ConfigError, match="cannot parse"):
            load_config(path)
