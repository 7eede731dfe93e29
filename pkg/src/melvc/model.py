"""Frame-wise latent model: two Gaussian encoders and a speaker-biased decoder.

The linguistic encoder maps frame-aligned text-derived features to a
diagonal-Gaussian latent per frame; the acoustic encoder maps log-mel
frames to the same latent space.  The decoder maps latents back to
log-mel frames and can add per-speaker bias vectors before the
activation at a configurable subset of its hidden layers - that is the
only speaker-dependent part of the whole model, so removing it leaves a
speaker-independent network that adaptation can fine-tune.

Everything is plain float64 numpy with hand-written backward passes;
layers act row-by-row, so sequences of any length flow through and
frame t of any output depends only on frame t of the input.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, UnknownSpeaker


@dataclass(frozen=True)
class ModelConfig:
    d_linguistic: int
    d_mel: int = 80
    d_latent: int = 64
    linguistic_widths: tuple[int, ...] = (256, 256, 256, 256)
    acoustic_widths: tuple[int, ...] = (256, 256, 256, 256)
    decoder_widths: tuple[int, ...] = (256,) * 8
    bias_sites: tuple[int, ...] = (5, 6, 7, 8)  # 1-based hidden-layer indices
    logvar_min: float = -10.0
    logvar_max: float = 2.0

    def __post_init__(self):
        for name in ("d_linguistic", "d_mel", "d_latent"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("linguistic_widths", "acoustic_widths", "decoder_widths"):
            widths = getattr(self, name)
            if not widths or any(w <= 0 for w in widths):
                raise ValueError(f"{name} must be non-empty positive ints")
        sites = self.bias_sites
        if len(set(sites)) != len(sites) or list(sites) != sorted(sites):
            raise ValueError("bias_sites must be strictly increasing")
        if sites and (sites[0] < 1 or sites[-1] > len(self.decoder_widths)):
            raise ValueError("bias_sites outside the decoder depth")
        if self.logvar_min >= self.logvar_max:
            raise ValueError("logvar_min must be below logvar_max")


@dataclass
class LatentDistribution:
    """Per-frame diagonal Gaussian over the latent space (T x d arrays)."""

    mean: np.ndarray
    log_var: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.log_var = np.asarray(self.log_var, dtype=np.float64)
        if self.mean.ndim != 2 or self.mean.shape != self.log_var.shape:
            raise ShapeError(
                f"mean {self.mean.shape} and log_var {self.log_var.shape} "
                "must be matching 2-D arrays"
            )

    @property
    def n_frames(self) -> int:
        return self.mean.shape[0]


@dataclass
class ParameterPartition:
    """All model parameters, split by ownership.

    ``speaker_biases`` maps speaker_id to ``{"site5": vec, ...}`` bias
    vectors; everything else is speaker-independent.  The partition
    carries its own :class:`ModelConfig` so shapes never have to be
    re-derived from the arrays.
    """

    config: ModelConfig
    linguistic_encoder: dict
    acoustic_encoder: dict
    decoder_core: dict
    speaker_biases: dict

    _GROUPS = ("linguistic_encoder", "acoustic_encoder", "decoder_core")

    def named_arrays(self):
        """Deterministically ordered (path, array) pairs over every parameter."""
        for group_name in self._GROUPS:
            group = getattr(self, group_name)
            for key in sorted(group):
                yield f"{group_name}/{key}", group[key]
        for speaker_id in sorted(self.speaker_biases):
            biases = self.speaker_biases[speaker_id]
            for key in sorted(biases):
                yield f"speaker_biases/{speaker_id}/{key}", biases[key]

    def copy(self) -> "ParameterPartition":
        return ParameterPartition(
            self.config,
            {k: v.copy() for k, v in self.linguistic_encoder.items()},
            {k: v.copy() for k, v in self.acoustic_encoder.items()},
            {k: v.copy() for k, v in self.decoder_core.items()},
            {
                sid: {k: v.copy() for k, v in biases.items()}
                for sid, biases in self.speaker_biases.items()
            },
        )

    def speakers(self) -> tuple[str, ...]:
        return tuple(sorted(self.speaker_biases))

    def parameter_count(self) -> int:
        return int(sum(a.size for _, a in self.named_arrays()))


def init_parameters(config: ModelConfig, seed: int) -> ParameterPartition:
    """Fan-in-scaled uniform weights, zero biases.

    The log-variance head biases start at -2 so initial latent standard
    deviations are well below 1, which keeps early tie-loss gradients
    tame.  Speaker bias vectors are created lazily (zeros) via
    :func:`ensure_speaker`.
    """

    def init_mlp(rng, d_in, widths, heads):
        params = {}
        fan = d_in
        for i, width in enumerate(widths, start=1):
            # uniform with variance 1/fan keeps activation scale roughly
            # constant through the deep decoder stack
            params[f"h{i}/W"] = rng.uniform(-1.0, 1.0, (fan, width)) * np.sqrt(3.0 / fan)
            params[f"h{i}/b"] = np.zeros(width)
            fan = width
        for name, d_out in heads.items():
            params[f"{name}/W"] = rng.uniform(-1.0, 1.0, (fan, d_out)) * np.sqrt(3.0 / fan)
            params[f"{name}/b"] = np.zeros(d_out)
        return params

    heads = {"mu": config.d_latent, "lv": config.d_latent}
    linguistic = init_mlp(
        np.random.default_rng([seed, 0]), config.d_linguistic, config.linguistic_widths, heads
    )
    acoustic = init_mlp(
        np.random.default_rng([seed, 1]), config.d_mel, config.acoustic_widths, heads
    )
    decoder = init_mlp(
        np.random.default_rng([seed, 2]), config.d_latent, config.decoder_widths,
        {"out": config.d_mel},
    )
    linguistic["lv/b"][:] = -2.0
    acoustic["lv/b"][:] = -2.0
    return ParameterPartition(config, linguistic, acoustic, decoder, {})


def ensure_speaker(partition: ParameterPartition, speaker_id: str) -> None:
    """Create zero bias vectors for a speaker if it has none yet."""
    if speaker_id in partition.speaker_biases:
        return
    cfg = partition.config
    partition.speaker_biases[speaker_id] = {
        f"site{s}": np.zeros(cfg.decoder_widths[s - 1]) for s in cfg.bias_sites
    }


def strip_speaker_params(partition: ParameterPartition) -> ParameterPartition:
    """Drop every speaker bias; the speaker-independent parameters are
    copied bitwise unchanged.  Idempotent."""
    stripped = partition.copy()
    stripped.speaker_biases = {}
    return stripped


def _check_rows(array, expected_cols, what):
    array = np.asarray(array, dtype=np.float64)
    if array.ndim != 2 or array.shape[1] != expected_cols:
        raise ShapeError(
            f"{what} must be (frames, {expected_cols}), got {array.shape}"
        )
    return array


# --- forward / backward primitives ------------------------------------------
# Caches are the activation lists from the forward pass; tanh derivatives
# come straight from the stored outputs (1 - h^2).


def _mlp_forward(params, x, n_hidden, extra_bias=None):
    activations = [x]
    h = x
    for i in range(1, n_hidden + 1):
        a = h @ params[f"h{i}/W"] + params[f"h{i}/b"]
        if extra_bias is not None and i in extra_bias:
            a = a + extra_bias[i]
        h = np.tanh(a)
        activations.append(h)
    return h, activations


def _mlp_backward(params, activations, d_h, n_hidden, bias_sites=None):
    grads, site_grads = {}, {}
    for i in range(n_hidden, 0, -1):
        h = activations[i]
        d_a = d_h * (1.0 - h * h)
        if bias_sites is not None and i in bias_sites:
            site_grads[i] = d_a.sum(axis=0)
        grads[f"h{i}/W"] = activations[i - 1].T @ d_a
        grads[f"h{i}/b"] = d_a.sum(axis=0)
        d_h = d_a @ params[f"h{i}/W"].T
    return grads, d_h, site_grads


def encoder_forward(params, x, widths, config):
    """Returns (LatentDistribution, cache).  The log-variance head is
    hard-clipped to [logvar_min, logvar_max]."""
    h, activations = _mlp_forward(params, x, len(widths))
    mu = h @ params["mu/W"] + params["mu/b"]
    lv_raw = h @ params["lv/W"] + params["lv/b"]
    lv = np.clip(lv_raw, config.logvar_min, config.logvar_max)
    return LatentDistribution(mu, lv), (activations, lv_raw)


def encoder_backward(params, cache, d_mu, d_lv, widths, config):
    """Backprop through an encoder; the clip on the log-variance head
    passes zero gradient outside the open interval."""
    activations, lv_raw = cache
    inside = (lv_raw > config.logvar_min) & (lv_raw < config.logvar_max)
    d_lv_raw = d_lv * inside
    h_last = activations[-1]
    grads = {
        "mu/W": h_last.T @ d_mu,
        "mu/b": d_mu.sum(axis=0),
        "lv/W": h_last.T @ d_lv_raw,
        "lv/b": d_lv_raw.sum(axis=0),
    }
    d_h = d_mu @ params["mu/W"].T + d_lv_raw @ params["lv/W"].T
    hidden_grads, d_x, _ = _mlp_backward(params, activations, d_h, len(widths))
    grads.update(hidden_grads)
    return grads, d_x


def decoder_forward(partition: ParameterPartition, z, speaker_id):
    cfg = partition.config
    extra = None
    if speaker_id is not None:
        if speaker_id not in partition.speaker_biases:
            raise UnknownSpeaker(speaker_id)
        biases = partition.speaker_biases[speaker_id]
        extra = {s: biases[f"site{s}"] for s in cfg.bias_sites}
    core = partition.decoder_core
    h, activations = _mlp_forward(core, z, len(cfg.decoder_widths), extra)
    y = h @ core["out/W"] + core["out/b"]
    return y, activations


def decoder_backward(partition: ParameterPartition, activations, d_y, speaker_id):
    """Returns (core grads, speaker-bias grads, grad wrt the latent)."""
    cfg = partition.config
    core = partition.decoder_core
    h_last = activations[-1]
    grads = {"out/W": h_last.T @ d_y, "out/b": d_y.sum(axis=0)}
    d_h = d_y @ core["out/W"].T
    sites = set(cfg.bias_sites) if speaker_id is not None else None
    hidden_grads, d_z, site_grads = _mlp_backward(
        core, activations, d_h, len(cfg.decoder_widths), sites
    )
    grads.update(hidden_grads)
    bias_grads = {f"site{s}": g for s, g in site_grads.items()}
    return grads, bias_grads, d_z


# --- public model surface ----------------------------------------------------


def linguistic_encode(partition: ParameterPartition, features) -> LatentDistribution:
    cfg = partition.config
    x = _check_rows(features, cfg.d_linguistic, "linguistic features")
    dist, _ = encoder_forward(partition.linguistic_encoder, x, cfg.linguistic_widths, cfg)
    return dist


def acoustic_encode(partition: ParameterPartition, mel_frames) -> LatentDistribution:
    cfg = partition.config
    y = _check_rows(mel_frames, cfg.d_mel, "mel frames")
    dist, _ = encoder_forward(partition.acoustic_encoder, y, cfg.acoustic_widths, cfg)
    return dist


def decode(partition: ParameterPartition, z, speaker_id: str | None = None) -> np.ndarray:
    """Latents to log-mel frames; ``speaker_id=None`` means no bias at all."""
    cfg = partition.config
    z = _check_rows(z, cfg.d_latent, "latent")
    y, _ = decoder_forward(partition, z, speaker_id)
    return y


def reparameterize(dist: LatentDistribution, eps) -> np.ndarray:
    """z = mean + exp(log_var / 2) * eps for externally supplied noise."""
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != dist.mean.shape:
        raise ShapeError(f"noise shape {eps.shape} != latent shape {dist.mean.shape}")
    return dist.mean + np.exp(0.5 * dist.log_var) * eps


def sample_latent(dist: LatentDistribution, seed: int) -> np.ndarray:
    eps = np.random.default_rng(seed).standard_normal(dist.mean.shape)
    return reparameterize(dist, eps)


def mean_latent(dist: LatentDistribution) -> np.ndarray:
    """Deterministic latent: the per-frame mean, no sampling."""
    return dist.mean.copy()
