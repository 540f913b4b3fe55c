"""Conditional prediction law tests.

The direct two-term quadrature of the conditional covariance acts as the
oracle for the reduced closed form; Monte Carlo residual moments act as
the oracle for both.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volmix.kernels import (
    BrownianIdentity,
    ExponentialOU,
    RiemannLiouville,
    TimeGrid,
    cell_average_matrix,
    covariance,
    covariance_matrix,
    cross_integral,
    psd_defect,
)
from volmix.predict import (
    conditional_covariance,
    conditional_covariance_closed,
    conditional_covariance_matrix,
    conditional_mean,
    conditional_mean_path,
    prediction_kernel,
    prediction_law,
    present_variance,
    rho_to_mix,
)
from volmix.simulate import MixParams, draw_noise, make_bundle, mix, noise_matrix

GRID = TimeGrid(horizon=1.0, cells=32)
ZOO = [
    BrownianIdentity(),
    RiemannLiouville(0.25),
    RiemannLiouville(0.5),
    RiemannLiouville(0.75),
    ExponentialOU(1.0, 1.0),
]


def _rel(x, y):
    scale = max(abs(x), abs(y))
    return 0.0 if scale == 0.0 else abs(x - y) / scale


class TestPredictionKernel:
    def test_noise_free_channel_leaves_kernel_alone(self):
        kernel = RiemannLiouville(0.75)
        params = MixParams(1.0, 0.0)
        assert prediction_kernel(kernel, params, 0.75, 0.25) == pytest.approx(
            kernel.eval(0.75, 0.25), rel=1e-15)

    def test_equal_mix_halves_brownian_kernel(self):
        value = prediction_kernel(BrownianIdentity(), MixParams(1.0, 1.0), 0.75, 0.25)
        assert value == 0.5

    def test_vanishes_at_and_beyond_t(self):
        for kernel in ZOO:
            assert prediction_kernel(kernel, MixParams(1.0, 2.0), 0.5, 0.5) == 0.0
            assert prediction_kernel(kernel, MixParams(1.0, 2.0), 0.5, 0.9) == 0.0


class TestConditionalMean:
    def test_noise_free_brownian_recovers_driver(self):
        noise = draw_noise(GRID, 42, 0)
        u = GRID.node(16)
        driver_at_u = float(np.sum(noise.driving[:16]))
        for t in (GRID.node(16), GRID.node(24), GRID.node(32)):
            value = conditional_mean(BrownianIdentity(), MixParams(1.0, 0.0),
                                     noise.driving, u, t, GRID)
            assert value == pytest.approx(driver_at_u, rel=1e-14)

    def test_equal_mix_halves_partial_sum(self):
        mixed = np.zeros(GRID.cells)
        mixed[:8] = 0.3 / 8
        value = conditional_mean(BrownianIdentity(), MixParams(1.0, 1.0),
                                 mixed, GRID.node(8), 1.0, GRID)
        assert value == pytest.approx(0.15, rel=1e-14)

    def test_a_scaling_invariance(self):
        # Scaling the noise-free channel rescales the observation and the
        # gain by inverse factors; the prediction cannot change.
        noise = draw_noise(GRID, 42, 1)
        u, t = GRID.node(16), GRID.node(24)
        kernel = RiemannLiouville(0.75)
        reference = conditional_mean(kernel, MixParams(1.0, 0.0),
                                     noise.driving, u, t, GRID)
        for a in (0.5, 3.0, -2.0):
            value = conditional_mean(kernel, MixParams(a, 0.0),
                                     a * noise.driving, u, t, GRID)
            assert value == pytest.approx(reference, rel=1e-12)

    def test_no_observation_no_mean(self):
        mixed = np.ones(GRID.cells)
        assert conditional_mean(BrownianIdentity(), MixParams(1.0, 1.0),
                                mixed, 0.0, 1.0, GRID) == 0.0

    def test_path_version_agrees_with_scalar(self):
        kernel = ExponentialOU(1.0, 1.0)
        params = MixParams(0.6, 0.8)
        noise = draw_noise(GRID, 42, 2)
        mixed = mix(noise, params)
        u = GRID.node(20)
        path = conditional_mean_path(kernel, params, mixed, u, GRID)
        for i in (0, 5, 20, 32):
            scalar = conditional_mean(kernel, params, mixed, u, GRID.node(i), GRID)
            assert path[i] == pytest.approx(scalar, rel=1e-13, abs=1e-16)


class TestConditionalCovariance:
    def test_noise_free_reduction(self):
        kernel = RiemannLiouville(0.75)
        t, s, u = GRID.node(24), GRID.node(32), GRID.node(12)
        for a in (0.5, 1.0, 3.0):
            value = conditional_covariance(kernel, MixParams(a, 0.0), u, t, s, GRID)
            expected = covariance(kernel, t, s, GRID) - cross_integral(kernel, t, s, u, GRID)
            assert value == pytest.approx(expected, rel=1e-12)

    def test_equal_mix_brownian_half(self):
        value = conditional_covariance(BrownianIdentity(), MixParams(1.0, 1.0),
                                       1.0, 1.0, 1.0, GRID)
        assert value == pytest.approx(0.5, rel=1e-14)

    def test_no_observation_returns_covariance(self):
        kernel = ExponentialOU(1.0, 1.0)
        t, s = GRID.node(10), GRID.node(25)
        value = conditional_covariance(kernel, MixParams(1.0, 2.0), 0.0, t, s, GRID)
        assert value == pytest.approx(covariance(kernel, t, s, GRID), rel=1e-14)

    def test_closed_form_matches_direct_on_random_tuples(self):
        rng = np.random.default_rng(123)
        worst = 0.0
        for i in range(100):
            kernel = ZOO[i % len(ZOO)]
            params = MixParams(float(rng.uniform(-2, 2)), float(rng.uniform(0.1, 2)))
            it, i_s, iu = (int(v) for v in rng.integers(0, GRID.cells + 1, size=3))
            t, s, u = GRID.node(it), GRID.node(i_s), GRID.node(iu)
            direct = conditional_covariance(kernel, params, u, t, s, GRID)
            closed = conditional_covariance_closed(kernel, params, u, t, s, GRID)
            worst = max(worst, _rel(direct, closed))
        assert worst <= 1e-12

    def test_monotone_in_observation_time(self):
        kernel = RiemannLiouville(0.25)
        params = MixParams(1.0, 0.5)
        t = GRID.node(24)
        values = [conditional_covariance_closed(kernel, params, GRID.node(i), t, t, GRID)
                  for i in range(0, GRID.cells + 1, 4)]
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_full_information_shrinks_by_signal_fraction(self):
        kernel = RiemannLiouville(0.75)
        params = MixParams(1.0, 1.0)
        for (i, j) in [(8, 16), (16, 16), (24, 32)]:
            t, s = GRID.node(i), GRID.node(j)
            value = conditional_covariance_closed(kernel, params, 1.0, t, s, GRID)
            expected = (1.0 - params.signal_fraction) * covariance(kernel, t, s, GRID)
            assert value == pytest.approx(expected, rel=1e-12)

    @given(iu=st.integers(0, 32), it=st.integers(0, 32), i_s=st.integers(0, 32))
    @settings(max_examples=60, deadline=None)
    def test_symmetric_in_t_and_s(self, iu, it, i_s):
        params = MixParams(0.6, 0.8)
        kernel = ExponentialOU(1.0, 1.0)
        t, s, u = GRID.node(it), GRID.node(i_s), GRID.node(iu)
        assert conditional_covariance_closed(kernel, params, u, t, s, GRID) == \
            conditional_covariance_closed(kernel, params, u, s, t, GRID)


class TestPresentVariance:
    def test_zero_without_noise(self):
        assert present_variance(BrownianIdentity(), MixParams(1.0, 0.0), 1.0, GRID) == 0.0

    def test_equal_mix_brownian(self):
        value = present_variance(BrownianIdentity(), MixParams(1.0, 1.0), 1.0, GRID)
        assert value == pytest.approx(0.5, rel=1e-14)

    def test_small_noise_rate(self):
        kernel = RiemannLiouville(0.75)
        base = covariance(kernel, 1.0, 1.0, GRID)
        for b in (1e-1, 1e-2, 1e-3):
            scaled = present_variance(kernel, MixParams(1.0, b), 1.0, GRID) / (b * b)
            assert _rel(scaled, base / (1.0 + b * b)) <= 1e-12

    def test_matches_conditional_covariance_at_u(self):
        kernel = ExponentialOU(1.0, 1.0)
        params = MixParams(0.6, 0.8)
        u = GRID.node(20)
        direct = conditional_covariance(kernel, params, u, u, u, GRID)
        assert present_variance(kernel, params, u, GRID) == pytest.approx(direct, rel=1e-12)


class TestRhoParametrization:
    def test_corner_cases(self):
        assert rho_to_mix(1.0) == MixParams(1.0, 0.0)
        params = rho_to_mix(0.6)
        assert params.a == pytest.approx(0.6, abs=1e-15)
        assert params.b == pytest.approx(0.8, abs=1e-15)
        zero = rho_to_mix(0.0)
        assert (zero.a, zero.b) == (0.0, 1.0)

    def test_unit_observation_variance(self):
        for rho in (-1.0, -0.3, 0.0, 0.7, 1.0):
            params = rho_to_mix(rho)
            assert params.a**2 + params.b**2 == pytest.approx(1.0, rel=1e-15)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="rho"):
            rho_to_mix(1.5)

    def test_zero_correlation_kills_the_mean(self):
        params = rho_to_mix(0.0)
        noise = draw_noise(GRID, 42, 0)
        mixed = mix(noise, params)
        path = conditional_mean_path(BrownianIdentity(), params, mixed, 1.0, GRID)
        assert np.all(path == 0.0)


class TestPredictionLaw:
    def test_no_observation_gives_prior(self):
        kernel = RiemannLiouville(0.75)
        params = MixParams(1.0, 1.0)
        noise = draw_noise(GRID, 42, 0)
        law = prediction_law(kernel, params, mix(noise, params), 0.0, GRID)
        assert np.all(law.mean == 0.0)
        assert np.allclose(law.cov, covariance_matrix(kernel, GRID), atol=1e-15)

    def test_noise_free_brownian_pins_past(self):
        params = MixParams(1.0, 0.0)
        noise = draw_noise(GRID, 42, 1)
        bundle = make_bundle(BrownianIdentity(), noise, params, GRID)
        u = GRID.node(16)
        law = prediction_law(BrownianIdentity(), params, bundle.mixed_increments, u, GRID)
        for i in range(17):
            assert law.mean[i] == pytest.approx(bundle.hidden[i], abs=1e-15)
            assert abs(law.cov[i, i]) <= 1e-15

    def test_equal_mix_average_of_copies(self):
        params = MixParams(1.0, 1.0)
        noise = draw_noise(GRID, 42, 2)
        bundle = make_bundle(BrownianIdentity(), noise, params, GRID)
        u = GRID.node(24)
        law = prediction_law(BrownianIdentity(), params, bundle.mixed_increments, u, GRID)
        i = 24
        expected = 0.5 * (bundle.hidden[i] + bundle.twin[i])
        assert law.mean[i] == pytest.approx(expected, rel=1e-12)

    def test_covariance_validated(self):
        kernel = ExponentialOU(1.0, 1.0)
        params = MixParams(0.6, 0.8)
        noise = draw_noise(GRID, 42, 3)
        law = prediction_law(kernel, params, mix(noise, params), GRID.node(16), GRID)
        assert np.array_equal(law.cov, law.cov.T)
        assert psd_defect(law.cov) <= 1e-10

    def test_matrix_matches_scalar_closed_form(self):
        kernel = RiemannLiouville(0.25)
        params = MixParams(1.0, 0.5)
        u = GRID.node(12)
        matrix = conditional_covariance_matrix(kernel, params, u, GRID)
        for i in (0, 7, 12, 32):
            for j in (3, 12, 25):
                scalar = conditional_covariance_closed(
                    kernel, params, u, GRID.node(i), GRID.node(j), GRID)
                assert matrix[i, j] == pytest.approx(scalar, rel=1e-12, abs=1e-16)


class TestResidualMonteCarlo:
    """Sampled residuals against the deterministic law (light desk check)."""

    N_PATHS = 20_000
    U_INDEX = 16

    def _residuals(self, kernel, params, t_indices, seed=42):
        kbar = cell_average_matrix(kernel, GRID)
        rows = kbar[t_indices]
        dw = noise_matrix(GRID, seed, range(self.N_PATHS), channel=0)
        dwt = noise_matrix(GRID, seed, range(self.N_PATHS), channel=1)
        mixed = params.a * dw + params.b * dwt
        hidden = dw @ rows.T
        predicted = params.gain * (mixed[:, :self.U_INDEX] @ rows[:, :self.U_INDEX].T)
        return hidden - predicted, mixed

    def test_residuals_orthogonal_to_observed_path(self):
        kernel = RiemannLiouville(0.75)
        params = MixParams(1.0, 1.0)
        eps, mixed = self._residuals(kernel, params, [8, 24, 32])
        w_path = np.cumsum(mixed[:, :self.U_INDEX], axis=1)
        for col in range(eps.shape[1]):
            for v in (3, 9, 15):
                sample_cov = np.cov(eps[:, col], w_path[:, v], ddof=1)[0, 1]
                band = 3.0 * eps[:, col].std(ddof=1) * w_path[:, v].std(ddof=1) \
                    / math.sqrt(self.N_PATHS)
                assert abs(sample_cov) <= band

    def test_residual_moments_match_law(self):
        kernel = BrownianIdentity()
        params = MixParams(0.6, 0.8)
        t_indices = [8, 16, 32]
        eps, _ = self._residuals(kernel, params, t_indices)
        sample = np.cov(eps.T, ddof=1)
        u = GRID.node(self.U_INDEX)
        for row, i in enumerate(t_indices):
            for col, j in enumerate(t_indices):
                expected = conditional_covariance(
                    kernel, params, u, GRID.node(i), GRID.node(j), GRID)
                var_i = conditional_covariance(kernel, params, u,
                                               GRID.node(i), GRID.node(i), GRID)
                var_j = conditional_covariance(kernel, params, u,
                                               GRID.node(j), GRID.node(j), GRID)
                spread = math.sqrt((var_i * var_j + expected**2) / self.N_PATHS)
                assert abs(sample[row, col] - expected) <= 3.0 * spread
