"""Objectives: MAE, Gaussian KL, the joint objective and its gradients."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from melvc.errors import ShapeError
from melvc.losses import (
    KL_ACOUSTIC_TO_LINGUISTIC,
    KL_LINGUISTIC_TO_ACOUSTIC,
    LossBreakdown,
    adaptation_loss,
    adaptation_loss_and_grads,
    gaussian_kld,
    gaussian_kld_gradients,
    mae,
    mae_gradient,
    training_loss,
    training_loss_and_grads,
)
from melvc.model import (
    LatentDistribution,
    ModelConfig,
    acoustic_encode,
    decode,
    ensure_speaker,
    init_parameters,
    mean_latent,
)

from helpers import finite_difference, gaussian_kl_quadrature, relative_error

TINY = ModelConfig(
    d_linguistic=5,
    d_mel=6,
    d_latent=3,
    linguistic_widths=(8, 8),
    acoustic_widths=(8, 8),
    decoder_widths=(8, 8, 8),
    bias_sites=(2, 3),
)


@pytest.fixture
def tiny():
    partition = init_parameters(TINY, seed=0)
    ensure_speaker(partition, "spk")
    return partition


@pytest.fixture
def batch():
    rng = np.random.default_rng(42)
    x = rng.standard_normal((7, 5))
    y = rng.standard_normal((7, 6))
    eps = rng.standard_normal((7, 3))
    return x, y, eps


class TestMae:
    def test_documented_example(self):
        assert mae([[0.0, 3.0]], [[1.0, 1.0]]) == 1.5

    def test_matches_elementwise_sum(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((5, 4))
        b = rng.standard_normal((5, 4))
        acc = 0.0
        for i in range(5):
            for j in range(4):
                acc += abs(a[i, j] - b[i, j])
        assert abs(mae(a, b) - acc / 20.0) < 1e-12

    def test_symmetry_and_zero(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((3, 3))
        b = rng.standard_normal((3, 3))
        assert mae(a, b) == mae(b, a)
        assert mae(a, a) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mae(np.zeros((2, 3)), np.zeros((3, 2)))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        b = rng.standard_normal((4, 5))
        # keep |a - b| well away from the kink at zero
        a = b + np.where(rng.standard_normal((4, 5)) > 0, 1.0, -1.0) * rng.uniform(
            0.5, 1.5, (4, 5)
        )
        grad = mae_gradient(a, b)
        fd = finite_difference(lambda: mae(a, b), [a], h=1e-6)[0]
        assert relative_error(grad, fd) < 1e-6

    @given(
        arrays(np.float64, (3, 4), elements=st.floats(-100, 100)),
        arrays(np.float64, (3, 4), elements=st.floats(-100, 100)),
    )
    @settings(max_examples=50, deadline=None)
    def test_nonnegative(self, a, b):
        assert mae(a, b) >= 0.0


class TestGaussianKld:
    def dist_pair(self, seed, shape=(2, 3)):
        rng = np.random.default_rng(seed)
        q = LatentDistribution(
            rng.uniform(-2, 2, shape), rng.uniform(-1.5, 1.5, shape)
        )
        p = LatentDistribution(
            rng.uniform(-2, 2, shape), rng.uniform(-1.5, 1.5, shape)
        )
        return q, p

    @pytest.mark.parametrize("seed", [10, 11, 12])
    def test_matches_numerical_integration(self, seed):
        # oracle: trapezoid-rule integral of q * log(q/p), element by element
        q, p = self.dist_pair(seed)
        acc = 0.0
        for i in range(q.mean.shape[0]):
            for j in range(q.mean.shape[1]):
                acc += gaussian_kl_quadrature(
                    q.mean[i, j], q.log_var[i, j], p.mean[i, j], p.log_var[i, j]
                )
        oracle = acc / q.mean.size
        assert abs(gaussian_kld(q, p) - oracle) < 1e-4

    def test_identical_distributions_give_exact_zero(self):
        rng = np.random.default_rng(13)
        mean = rng.uniform(-3, 3, (4, 5))
        log_var = rng.uniform(-4, 1.5, (4, 5))
        q = LatentDistribution(mean, log_var)
        p = LatentDistribution(mean.copy(), log_var.copy())
        assert gaussian_kld(q, p) == 0.0

    def test_half_sigma_mean_shift_closed_form(self):
        # unit variance, means differing by 0.5: KL = 0.5 * 0.5^2 = 0.125
        shape = (3, 4)
        q = LatentDistribution(np.full(shape, 0.5), np.zeros(shape))
        p = LatentDistribution(np.zeros(shape), np.zeros(shape))
        assert abs(gaussian_kld(q, p) - 0.125) < 1e-12

    def test_asymmetric(self):
        q = LatentDistribution(np.zeros((1, 1)), np.zeros((1, 1)))
        p = LatentDistribution(np.zeros((1, 1)), np.full((1, 1), 1.0))
        assert gaussian_kld(q, p) != gaussian_kld(p, q)

    @given(
        arrays(np.float64, (2, 3), elements=st.floats(-5, 5)),
        arrays(np.float64, (2, 3), elements=st.floats(-3, 2)),
        arrays(np.float64, (2, 3), elements=st.floats(-5, 5)),
        arrays(np.float64, (2, 3), elements=st.floats(-3, 2)),
    )
    @settings(max_examples=50, deadline=None)
    def test_nonnegative(self, mu_q, lv_q, mu_p, lv_p):
        value = gaussian_kld(
            LatentDistribution(mu_q, lv_q), LatentDistribution(mu_p, lv_p)
        )
        assert value >= -1e-9

    def test_gradients_match_finite_differences(self):
        q, p = self.dist_pair(14, shape=(3, 2))
        grads = gaussian_kld_gradients(q, p)
        arrays_ = [q.mean, q.log_var, p.mean, p.log_var]
        fd = finite_difference(lambda: gaussian_kld(q, p), arrays_, h=1e-6)
        for got, want in zip(grads, fd):
            assert relative_error(got, want) < 1e-6

    def test_shape_mismatch(self):
        q = LatentDistribution(np.zeros((2, 3)), np.zeros((2, 3)))
        p = LatentDistribution(np.zeros((3, 3)), np.zeros((3, 3)))
        with pytest.raises(ShapeError):
            gaussian_kld(q, p)


class TestLossBreakdown:
    def test_beta_weighting(self):
        assert LossBreakdown(1.0, 2.0, 0.25).total == 1.5

    def test_beta_zero_reduces_to_main(self):
        assert LossBreakdown(0.7, 123.0, 0.0).total == 0.7


class TestTrainingLoss:
    def test_total_is_exact_weighted_sum(self, tiny, batch):
        x, y, eps = batch
        out = training_loss(tiny, x, y, "spk", 0.25, eps)
        assert abs(out.total - (out.loss_main + 0.25 * out.loss_tie)) < 1e-12
        assert out.beta == 0.25

    def test_deterministic(self, tiny, batch):
        x, y, eps = batch
        a = training_loss(tiny, x, y, "spk", 0.25, eps)
        b = training_loss(tiny, x, y, "spk", 0.25, eps)
        assert (a.loss_main, a.loss_tie, a.total) == (b.loss_main, b.loss_tie, b.total)

    def test_none_eps_means_mean_decode(self, tiny, batch):
        x, y, _ = batch
        a = training_loss(tiny, x, y, "spk", 0.25, None)
        b = training_loss(tiny, x, y, "spk", 0.25, np.zeros((7, 3)))
        assert a.total == b.total

    def test_direction_flip_changes_tie_only(self, tiny, batch):
        x, y, eps = batch
        fwd = training_loss(tiny, x, y, "spk", 0.25, eps, KL_ACOUSTIC_TO_LINGUISTIC)
        rev = training_loss(tiny, x, y, "spk", 0.25, eps, KL_LINGUISTIC_TO_ACOUSTIC)
        assert fwd.loss_main == rev.loss_main
        assert fwd.loss_tie != rev.loss_tie

    def test_unknown_direction_rejected(self, tiny, batch):
        x, y, eps = batch
        with pytest.raises(ValueError):
            training_loss(tiny, x, y, "spk", 0.25, eps, "sideways")

    def test_frame_count_mismatch_rejected(self, tiny):
        with pytest.raises(ShapeError):
            training_loss(tiny, np.zeros((4, 5)), np.zeros((5, 6)), "spk", 0.25)

    def test_grads_cover_exactly_the_touched_parameters(self, tiny, batch):
        x, y, eps = batch
        _, grads = training_loss_and_grads(tiny, x, y, "spk", 0.25, eps)
        assert set(grads) == {name for name, _ in tiny.named_arrays()}
        _, grads_free = training_loss_and_grads(tiny, x, y, None, 0.25, eps)
        assert not any(k.startswith("speaker_biases") for k in grads_free)

    def test_breakdown_agrees_with_forward_only(self, tiny, batch):
        x, y, eps = batch
        fwd = training_loss(tiny, x, y, "spk", 0.25, eps)
        got, _ = training_loss_and_grads(tiny, x, y, "spk", 0.25, eps)
        assert fwd.total == got.total

    @pytest.mark.parametrize("direction", [KL_ACOUSTIC_TO_LINGUISTIC, KL_LINGUISTIC_TO_ACOUSTIC])
    def test_all_gradients_match_finite_differences(self, tiny, batch, direction):
        x, y, eps = batch
        tiny.speaker_biases["spk"]["site2"][:] = 0.05  # exercise a nonzero bias
        _, grads = training_loss_and_grads(tiny, x, y, "spk", 0.25, eps, direction)

        def total():
            return training_loss(tiny, x, y, "spk", 0.25, eps, direction).total

        names, arrays_ = zip(*tiny.named_arrays())
        fd = finite_difference(total, list(arrays_), h=1e-5)
        worst = 0.0
        for name, array, want in zip(names, arrays_, fd):
            err = relative_error(grads[name], want)
            worst = max(worst, err)
            assert err < 1e-4, f"{name}: relative error {err:.2e}"
        assert worst < 1e-4


class TestAdaptationLoss:
    def test_matches_public_composition(self, tiny, batch):
        _, y, _ = batch
        direct = adaptation_loss(tiny, y)
        recon = decode(tiny, mean_latent(acoustic_encode(tiny, y)), None)
        assert direct == mae(recon, y)

    def test_no_sampling_noise(self, tiny, batch):
        _, y, _ = batch
        assert adaptation_loss(tiny, y) == adaptation_loss(tiny, y)

    def test_frozen_encoder_grads_limited_to_decoder(self, tiny, batch):
        _, y, _ = batch
        _, grads = adaptation_loss_and_grads(tiny, y, update_acoustic_encoder=False)
        assert all(k.startswith("decoder_core/") for k in grads)
        _, grads_full = adaptation_loss_and_grads(tiny, y, update_acoustic_encoder=True)
        assert any(k.startswith("acoustic_encoder/") for k in grads_full)
        assert not any(k.startswith("linguistic_encoder") for k in grads_full)

    @pytest.mark.parametrize("unfreeze", [False, True])
    def test_gradients_match_finite_differences(self, tiny, batch, unfreeze):
        _, y, _ = batch
        _, grads = adaptation_loss_and_grads(tiny, y, update_acoustic_encoder=unfreeze)

        def loss():
            return adaptation_loss(tiny, y)

        arrays_ = [dict(tiny.named_arrays())[name] for name in sorted(grads)]
        fd = finite_difference(loss, arrays_, h=1e-5)
        for name, want in zip(sorted(grads), fd):
            assert relative_error(grads[name], want) < 1e-4, name
