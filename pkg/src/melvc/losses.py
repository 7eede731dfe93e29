"""Objectives for joint training and for target-speaker adaptation.

Joint training minimises

    total = loss_main + beta * loss_tie

where loss_main is the mean absolute error of the decoded
linguistic-path mel against the reference and loss_tie is the mean
Gaussian KL divergence that pulls the two encoders' per-frame latent
distributions together.  Adaptation keeps only the reconstruction term,
driven through the acoustic encoder's latent *means* (no sampling) and
a bias-free decoder.

Every objective comes in a forward-only and a ``*_and_grads`` form; the
gradient dictionaries are keyed by the same paths that
``ParameterPartition.named_arrays`` yields, which is what the optimizer
and the finite-difference checks both consume.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .model import (
    LatentDistribution,
    ParameterPartition,
    decoder_backward,
    decoder_forward,
    encoder_backward,
    encoder_forward,
    reparameterize,
)

# Which encoder plays q and which plays p in KL(q || p).
KL_ACOUSTIC_TO_LINGUISTIC = "acoustic_to_linguistic"
KL_LINGUISTIC_TO_ACOUSTIC = "linguistic_to_acoustic"
KL_DIRECTIONS = (KL_ACOUSTIC_TO_LINGUISTIC, KL_LINGUISTIC_TO_ACOUSTIC)


@dataclass(frozen=True)
class LossBreakdown:
    loss_main: float
    loss_tie: float
    beta: float
    total: float = None

    def __post_init__(self):
        if self.total is None:
            object.__setattr__(self, "total", self.loss_main + self.beta * self.loss_tie)


def mae(a, b) -> float:
    """Mean absolute error over all elements."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)))


def mae_gradient(a, b) -> np.ndarray:
    """d mae(a, b) / d a; the sign convention at exact ties is sign(0)=0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.sign(a - b) / a.size


def gaussian_kld(q: LatentDistribution, p: LatentDistribution) -> float:
    """Mean over frames and dimensions of KL(q || p) for diagonal Gaussians.

    Written in log-variance form so that KL(q, q) evaluates to exactly
    zero in floating point.
    """
    if q.mean.shape != p.mean.shape:
        raise ShapeError(f"shape mismatch {q.mean.shape} vs {p.mean.shape}")
    delta = q.mean - p.mean
    per_element = (
        0.5 * (p.log_var - q.log_var)
        + (np.exp(q.log_var) + delta**2) / (2.0 * np.exp(p.log_var))
        - 0.5
    )
    return float(np.mean(per_element))


def gaussian_kld_gradients(q: LatentDistribution, p: LatentDistribution):
    """Gradients of the mean KL w.r.t. (mu_q, lv_q, mu_p, lv_p)."""
    n = q.mean.size
    delta = q.mean - p.mean
    inv_var_p = np.exp(-p.log_var)
    d_mu_q = delta * inv_var_p / n
    d_mu_p = -d_mu_q
    d_lv_q = 0.5 * (np.exp(q.log_var - p.log_var) - 1.0) / n
    d_lv_p = (0.5 - (np.exp(q.log_var) + delta**2) * inv_var_p / 2.0) / n
    return d_mu_q, d_lv_q, d_mu_p, d_lv_p


def _check_pair(partition, features, mel):
    cfg = partition.config
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(mel, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cfg.d_linguistic:
        raise ShapeError(f"features must be (frames, {cfg.d_linguistic}), got {x.shape}")
    if y.ndim != 2 or y.shape[1] != cfg.d_mel:
        raise ShapeError(f"mel must be (frames, {cfg.d_mel}), got {y.shape}")
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"frame counts differ: {x.shape[0]} vs {y.shape[0]}")
    return x, y


def _forward(partition, x, y, speaker_id, beta, eps, kl_direction):
    cfg = partition.config
    ling_dist, ling_cache = encoder_forward(
        partition.linguistic_encoder, x, cfg.linguistic_widths, cfg
    )
    ac_dist, ac_cache = encoder_forward(
        partition.acoustic_encoder, y, cfg.acoustic_widths, cfg
    )
    if eps is None:
        eps = np.zeros_like(ling_dist.mean)
    z = reparameterize(ling_dist, eps)
    y_hat, dec_acts = decoder_forward(partition, z, speaker_id)

    if kl_direction not in KL_DIRECTIONS:
        raise ValueError(f"unknown kl_direction {kl_direction!r}")
    if kl_direction == KL_ACOUSTIC_TO_LINGUISTIC:
        q, p = ac_dist, ling_dist
    else:
        q, p = ling_dist, ac_dist
    breakdown = LossBreakdown(mae(y_hat, y), gaussian_kld(q, p), beta)
    state = (ling_dist, ling_cache, ac_dist, ac_cache, eps, y_hat, dec_acts, q, p)
    return breakdown, state


def training_loss(
    partition: ParameterPartition,
    features,
    mel,
    speaker_id,
    beta: float,
    eps=None,
    kl_direction: str = KL_ACOUSTIC_TO_LINGUISTIC,
) -> LossBreakdown:
    """Joint objective for one utterance.  ``eps`` is the reparameterization
    noise (frames x latent); ``None`` decodes the latent mean."""
    x, y = _check_pair(partition, features, mel)
    breakdown, _ = _forward(partition, x, y, speaker_id, beta, eps, kl_direction)
    return breakdown


def training_loss_and_grads(
    partition: ParameterPartition,
    features,
    mel,
    speaker_id,
    beta: float,
    eps=None,
    kl_direction: str = KL_ACOUSTIC_TO_LINGUISTIC,
):
    """Loss breakdown plus gradients for every parameter that the joint
    objective touches (both encoders, the decoder core, and the active
    speaker's biases)."""
    cfg = partition.config
    x, y = _check_pair(partition, features, mel)
    breakdown, state = _forward(partition, x, y, speaker_id, beta, eps, kl_direction)
    ling_dist, ling_cache, ac_dist, ac_cache, eps, y_hat, dec_acts, q, p = state

    d_y_hat = mae_gradient(y_hat, y)
    core_grads, bias_grads, d_z = decoder_backward(partition, dec_acts, d_y_hat, speaker_id)

    # reconstruction path: z = mu_L + exp(lv_L / 2) * eps
    d_mu_ling = d_z.copy()
    d_lv_ling = d_z * eps * 0.5 * np.exp(0.5 * ling_dist.log_var)
    d_mu_ac = np.zeros_like(ac_dist.mean)
    d_lv_ac = np.zeros_like(ac_dist.log_var)

    d_mu_q, d_lv_q, d_mu_p, d_lv_p = gaussian_kld_gradients(q, p)
    if kl_direction == KL_ACOUSTIC_TO_LINGUISTIC:
        d_mu_ac += breakdown.beta * d_mu_q
        d_lv_ac += breakdown.beta * d_lv_q
        d_mu_ling += breakdown.beta * d_mu_p
        d_lv_ling += breakdown.beta * d_lv_p
    else:
        d_mu_ling += breakdown.beta * d_mu_q
        d_lv_ling += breakdown.beta * d_lv_q
        d_mu_ac += breakdown.beta * d_mu_p
        d_lv_ac += breakdown.beta * d_lv_p

    ling_grads, _ = encoder_backward(
        partition.linguistic_encoder, ling_cache, d_mu_ling, d_lv_ling, cfg.linguistic_widths, cfg
    )
    ac_grads, _ = encoder_backward(
        partition.acoustic_encoder, ac_cache, d_mu_ac, d_lv_ac, cfg.acoustic_widths, cfg
    )

    grads = {}
    grads.update({f"linguistic_encoder/{k}": v for k, v in ling_grads.items()})
    grads.update({f"acoustic_encoder/{k}": v for k, v in ac_grads.items()})
    grads.update({f"decoder_core/{k}": v for k, v in core_grads.items()})
    if speaker_id is not None:
        grads.update(
            {f"speaker_biases/{speaker_id}/{k}": v for k, v in bias_grads.items()}
        )
    return breakdown, grads


def adaptation_loss(partition: ParameterPartition, mel) -> float:
    """Reconstruction error of mel through the acoustic encoder's latent
    mean and the bias-free decoder.  Deterministic: no sampling anywhere."""
    cfg = partition.config
    y = np.asarray(mel, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != cfg.d_mel:
        raise ShapeError(f"mel must be (frames, {cfg.d_mel}), got {y.shape}")
    ac_dist, _ = encoder_forward(partition.acoustic_encoder, y, cfg.acoustic_widths, cfg)
    y_hat, _ = decoder_forward(partition, ac_dist.mean, None)
    return mae(y_hat, y)


def adaptation_loss_and_grads(
    partition: ParameterPartition, mel, update_acoustic_encoder: bool = False
):
    """Adaptation loss plus gradients for the decoder core (always) and
    the acoustic encoder (only when unfrozen).  The linguistic encoder
    never appears here."""
    cfg = partition.config
    y = np.asarray(mel, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != cfg.d_mel:
        raise ShapeError(f"mel must be (frames, {cfg.d_mel}), got {y.shape}")
    ac_dist, ac_cache = encoder_forward(
        partition.acoustic_encoder, y, cfg.acoustic_widths, cfg
    )
    y_hat, dec_acts = decoder_forward(partition, ac_dist.mean, None)
    loss = mae(y_hat, y)

    d_y_hat = mae_gradient(y_hat, y)
    core_grads, _, d_z = decoder_backward(partition, dec_acts, d_y_hat, None)
    grads = {f"decoder_core/{k}": v for k, v in core_grads.items()}
    if update_acoustic_encoder:
        ac_grads, _ = encoder_backward(
            partition.acoustic_encoder,
            ac_cache,
            d_z,
            np.zeros_like(ac_dist.log_var),
            cfg.acoustic_widths,
            cfg,
        )
        grads.update({f"acoustic_encoder/{k}": v for k, v in ac_grads.items()})
    return loss, grads
