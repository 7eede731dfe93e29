"""Plain-text configuration files for the whole pipeline.

One INI file carries every tunable in six sections - ``[signal]``,
``[corpus]``, ``[model]``, ``[train]``, ``[adapt]``, ``[eval]`` - each
pre-filled with the published defaults (22050 Hz, 80 mel bins, 64
latent dimensions, beta = 0.25 and so on).  Any subset of keys may be
overridden; everything else keeps its default.  ``write_default_config``
emits a fully commented template.

Two model dimensions are data-dependent and therefore absent from the
file: the linguistic feature width comes from the corpus inventory and
the mel width from ``[signal]``; ``PipelineConfig.model_config`` plugs
them in.
"""

import configparser
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .adapt import AdaptConfig
from .corpus import LANGUAGES, CorpusConfig
from .dsp import FrameConfig
from .errors import ConfigError
from .evaluate import SCENARIO_IDS
from .losses import KL_ACOUSTIC_TO_LINGUISTIC, KL_LINGUISTIC_TO_ACOUSTIC
from .model import ModelConfig
from .train import TrainConfig


@dataclass
class ModelShape:
    """Model hyperparameters that do not depend on the data dimensions."""

    d_latent: int = 64
    linguistic_widths: tuple = (256, 256, 256, 256)
    acoustic_widths: tuple = (256, 256, 256, 256)
    decoder_widths: tuple = (256,) * 8
    bias_sites: tuple = (5, 6, 7, 8)
    logvar_min: float = -10.0
    logvar_max: float = 2.0

    def build(self, d_linguistic: int, d_mel: int) -> ModelConfig:
        return ModelConfig(
            d_linguistic=d_linguistic,
            d_mel=d_mel,
            d_latent=self.d_latent,
            linguistic_widths=tuple(self.linguistic_widths),
            acoustic_widths=tuple(self.acoustic_widths),
            decoder_widths=tuple(self.decoder_widths),
            bias_sites=tuple(self.bias_sites),
            logvar_min=self.logvar_min,
            logvar_max=self.logvar_max,
        )


@dataclass
class EvalSettings:
    scenarios: tuple = SCENARIO_IDS
    seed: int = 0
    include_probes: bool = True


@dataclass
class PipelineConfig:
    frame: FrameConfig = field(default_factory=FrameConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    shape: ModelShape = field(default_factory=ModelShape)
    train: TrainConfig = field(default_factory=TrainConfig)
    adapt: AdaptConfig = field(default_factory=AdaptConfig)
    eval: EvalSettings = field(default_factory=EvalSettings)

    def __post_init__(self):
        # the corpus must render with the signal settings it is framed by
        self.corpus = replace(self.corpus, frame_config=self.frame)

    def model_config(self, d_linguistic: int) -> ModelConfig:
        return self.shape.build(d_linguistic, self.frame.mel_dim)


def default_config() -> PipelineConfig:
    return PipelineConfig()


def _parse_int_tuple(raw: str) -> tuple:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    return tuple(int(p) for p in parts)


def _parse_str_tuple(raw: str) -> tuple:
    return tuple(p.strip() for p in raw.split(",") if p.strip())


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


# section -> key -> (parser, target object name, attribute)
_SCHEMA = {
    "signal": {
        "sample_rate": int,
        "fft_size": int,
        "window_size": int,
        "hop_size": int,
        "mel_dim": int,
        "fmin": float,
        "fmax": float,
        "log_floor": float,
    },
    "corpus": {
        "train_speakers_a": int,
        "train_speakers_b": int,
        "targets_per_language": int,
        "sources_per_language": int,
        "utterances_per_speaker": int,
        "adapt_utterances_per_target": int,
        "val_utterances_per_target": int,
        "eval_utterances_per_source": int,
        "min_phonemes": int,
        "max_phonemes": int,
        "min_duration": int,
        "max_duration": int,
        "transcribed_languages": _parse_str_tuple,
    },
    "model": {
        "d_latent": int,
        "linguistic_widths": _parse_int_tuple,
        "acoustic_widths": _parse_int_tuple,
        "decoder_widths": _parse_int_tuple,
        "bias_sites": _parse_int_tuple,
        "logvar_min": float,
        "logvar_max": float,
    },
    "train": {
        "beta": float,
        "learning_rate": float,
        "batch_size": int,
        "max_steps": int,
        "validation_fraction": float,
        "seed": int,
        "log_every": int,
        "kl_direction": str,
        "adam_beta1": float,
        "adam_beta2": float,
        "adam_epsilon": float,
    },
    "adapt": {
        "learning_rate": float,
        "max_steps": int,
        "seed": int,
        "update_acoustic_encoder": _parse_bool,
        "batch_size": int,
        "log_every": int,
        "adam_beta1": float,
        "adam_beta2": float,
        "adam_epsilon": float,
    },
    "eval": {
        "scenarios": _parse_str_tuple,
        "seed": int,
        "include_probes": _parse_bool,
    },
}

_SECTION_ATTR = {
    "signal": "frame",
    "corpus": "corpus",
    "model": "shape",
    "train": "train",
    "adapt": "adapt",
    "eval": "eval",
}


def load_config(path) -> PipelineConfig:
    """Parse an INI file into a PipelineConfig, defaults filling the gaps.

    Unknown sections or keys are rejected so that typos fail loudly
    instead of silently running with defaults.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    overrides = {attr: {} for attr in _SECTION_ATTR.values()}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(
                f"{path}: unknown section [{section}]; expected one of {sorted(_SCHEMA)}"
            )
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"{path}: unknown key {key!r} in [{section}]; "
                    f"expected one of {sorted(_SCHEMA[section])}"
                )
            try:
                overrides[_SECTION_ATTR[section]][key] = _SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"{path}: bad value for {section}.{key}: {exc}") from exc

    base = default_config()
    try:
        cfg = PipelineConfig(
            frame=replace(base.frame, **overrides["frame"]),
            corpus=replace(base.corpus, **overrides["corpus"]),
            shape=replace(base.shape, **overrides["shape"]),
            train=replace(base.train, **overrides["train"]),
            adapt=replace(base.adapt, **overrides["adapt"]),
            eval=replace(base.eval, **overrides["eval"]),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    _validate(cfg, path)
    return cfg


def _validate(cfg: PipelineConfig, path):
    for lang in cfg.corpus.transcribed_languages:
        if lang not in LANGUAGES:
            raise ConfigError(f"{path}: unknown language {lang!r} in corpus.transcribed_languages")
    for sid in cfg.eval.scenarios:
        if sid not in SCENARIO_IDS:
            raise ConfigError(
                f"{path}: unknown scenario {sid!r} in eval.scenarios; valid: {SCENARIO_IDS}"
            )
    if cfg.train.kl_direction not in (KL_ACOUSTIC_TO_LINGUISTIC, KL_LINGUISTIC_TO_ACOUSTIC):
        raise ConfigError(f"{path}: bad train.kl_direction {cfg.train.kl_direction!r}")


def _format_value(value) -> str:
    if isinstance(value, (tuple, list)):
        return ", ".join(str(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def save_config(cfg: PipelineConfig, path):
    """Write every setting of ``cfg`` as a plain INI file."""
    sources = {
        "signal": asdict(cfg.frame),
        "corpus": {k: v for k, v in asdict(cfg.corpus).items() if k != "frame_config"},
        "model": asdict(cfg.shape),
        "train": asdict(cfg.train),
        "adapt": asdict(cfg.adapt),
        "eval": asdict(cfg.eval),
    }
    lines = []
    for section in _SCHEMA:
        lines.append(f"[{section}]")
        for key in _SCHEMA[section]:
            lines.append(f"{key} = {_format_value(sources[section][key])}")
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


_TEMPLATE_HEADER = """\
# Voice-conversion pipeline configuration.
#
# Every key is optional; anything omitted keeps the default shown
# here.  Lists are comma-separated.  The linguistic feature width and
# the mel width are derived from the corpus and [signal] respectively,
# so they do not appear here.
"""

_SECTION_COMMENTS = {
    "signal": "# Analysis framing and the mel filterbank.",
    "corpus": "# Synthetic two-language corpus layout (speakers x utterances).",
    "model": "# Encoder/decoder shapes; bias_sites are 1-based decoder layers\n"
    "# that receive an additive per-speaker bias before the activation.",
    "train": "# Joint training of both encoders and the decoder.",
    "adapt": "# Unsupervised adaptation of the decoder to one target speaker.",
    "eval": "# Scenario matrix: <base><adaptation>-<conversion> language codes.",
}


def write_default_config(path):
    """Emit a commented template holding exactly the defaults."""
    cfg = default_config()
    sources = {
        "signal": asdict(cfg.frame),
        "corpus": {k: v for k, v in asdict(cfg.corpus).items() if k != "frame_config"},
        "model": asdict(cfg.shape),
        "train": asdict(cfg.train),
        "adapt": asdict(cfg.adapt),
        "eval": asdict(cfg.eval),
    }
    lines = [_TEMPLATE_HEADER]
    for section in _SCHEMA:
        lines.append(_SECTION_COMMENTS[section])
        lines.append(f"[{section}]")
        for key in _SCHEMA[section]:
            lines.append(f"{key} = {_format_value(sources[section][key])}")
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")
