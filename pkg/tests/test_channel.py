import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wetbench.channel import (
    ArrayConfig,
    Custom,
    Exponential,
    PhaseShift,
    Uniform,
    apply_phase_rotation,
    build_correlation,
    correlation_factor,
    los_phases,
    mean_vectors,
    r_sum,
    r_sum_exponential,
    r_sum_uniform,
    sample_channel,
)
from wetbench.errors import FactorizationFailure, NotPositiveSemidefinite, OutOfRange
from wetbench.rng import stream


class TestLosPhases:
    def test_boresight_zero(self):
        cfg = ArrayConfig(M=4, kappa=1.0, phi=0.0)
        assert np.allclose(los_phases(cfg), [0, 0, 0, 0])

    def test_endfire(self):
        cfg = ArrayConfig(M=2, kappa=1.0, phi=math.pi / 2)
        assert np.allclose(los_phases(cfg), [0.0, -math.pi])

    def test_phi_pi_over_6(self):
        cfg = ArrayConfig(M=3, kappa=1.0, phi=math.pi / 6)
        assert np.allclose(los_phases(cfg), [0.0, -math.pi / 2, -math.pi])

    @given(
        m=st.integers(1, 64),
        phi=st.floats(0.0, 2 * math.pi, allow_nan=False),
    )
    @settings(max_examples=50, deadline=None)
    def test_bounds_and_linearity(self, m, phi):
        out = los_phases(ArrayConfig(M=m, kappa=0.0, phi=phi))
        assert np.all(np.abs(out) <= (m - 1) * math.pi + 1e-12)
        if m >= 3:
            steps = np.diff(out)
            assert np.allclose(steps, steps[0])


class TestBuildCorrelation:
    def test_exponential_zero_is_identity(self):
        assert np.array_equal(build_correlation(Exponential(0.0), 3), np.eye(3))

    def test_uniform(self):
        assert np.allclose(build_correlation(Uniform(0.5), 2), [[1, 0.5], [0.5, 1]])

    def test_exponential_tau_03(self):
        expected = [[1, 0.3, 0.09], [0.3, 1, 0.3], [0.09, 0.3, 1]]
        assert np.allclose(build_correlation(Exponential(0.3), 3), expected)

    def test_tau_out_of_range(self):
        with pytest.raises(OutOfRange):
            Exponential(1.0)
        with pytest.raises(OutOfRange):
            Exponential(-0.1)

    def test_uniform_below_psd_bound(self):
        with pytest.raises(OutOfRange):
            build_correlation(Uniform(-0.5), 4)  # bound is -1/3

    def test_custom_validation(self):
        with pytest.raises(NotPositiveSemidefinite):
            build_correlation(Custom(np.array([[1.0, 0.5], [0.2, 1.0]])), 2)
        with pytest.raises(NotPositiveSemidefinite):
            build_correlation(Custom(np.array([[2.0, 0.0], [0.0, 1.0]])), 2)
        bad = np.array([[1.0, 0.99, -0.99], [0.99, 1.0, 0.99], [-0.99, 0.99, 1.0]])
        with pytest.raises(NotPositiveSemidefinite):
            build_correlation(Custom(bad), 3)

    def test_custom_passthrough(self):
        R = build_correlation(Exponential(0.4), 5)
        assert np.array_equal(build_correlation(Custom(R), 5), R)


class TestRSum:
    def test_identity(self):
        assert r_sum(np.eye(8)) == 8.0

    def test_uniform_full_correlation(self):
        assert r_sum_uniform(1.0, 4) == 16.0

    def test_exponential_tau_03_m8(self):
        assert abs(r_sum_exponential(0.3, 8) - 13.6327) < 1e-4

    @pytest.mark.parametrize("m", [2, 5, 17, 64, 128])
    def test_closed_forms_match_brute_force(self, m):
        for tau in [0.0, 0.1, 0.5, 0.9, 0.999]:
            brute = r_sum(build_correlation(Exponential(tau), m))
            assert abs(r_sum_exponential(tau, m) - brute) <= 1e-9 * max(1.0, brute)
        for rho in [-1.0 / (m - 1), 0.0, 0.3, 1.0]:
            brute = r_sum(build_correlation(Uniform(rho), m))
            assert abs(r_sum_uniform(rho, m) - brute) <= 1e-12 * max(1.0, abs(brute))


class TestMeanVectors:
    def test_aligned_phases_all_ones(self):
        # phi = 0 makes Phi = 0; zero shift keeps Phi + psi = 0
        cfg = ArrayConfig(M=5, kappa=1.0, phi=0.0)
        ox, oy = mean_vectors(cfg, PhaseShift.zero(5))
        assert np.allclose(ox, 1.0)
        assert np.allclose(oy, 1.0)

    def test_quarter_turn(self):
        cfg = ArrayConfig(M=2, kappa=1.0, phi=0.0)
        ox, oy = mean_vectors(cfg, PhaseShift(np.array([0.0, math.pi / 2])))
        assert np.allclose(ox, [1.0, -1.0])
        assert np.allclose(oy, [1.0, 1.0])

    def test_half_turn(self):
        cfg = ArrayConfig(M=2, kappa=1.0, phi=0.0)
        ox, oy = mean_vectors(cfg, PhaseShift(np.array([0.0, math.pi])))
        assert np.allclose(ox, [1.0, -1.0])
        assert np.allclose(oy, [1.0, -1.0])

    def test_shift_length_mismatch(self):
        cfg = ArrayConfig(M=3, kappa=1.0, phi=0.0)
        with pytest.raises(OutOfRange):
            mean_vectors(cfg, PhaseShift.zero(2))


class TestPhaseShift:
    def test_reference_antenna_must_be_zero(self):
        with pytest.raises(OutOfRange):
            PhaseShift(np.array([0.1, 0.0]))

    def test_zero_constructor(self):
        s = PhaseShift.zero(4)
        assert s.m == 4 and np.all(s.psi == 0)


class TestCorrelationFactor:
    def test_factor_reconstructs(self):
        R = build_correlation(Exponential(0.6), 6)
        F = correlation_factor(R)
        assert np.allclose(F @ F.T, R, atol=1e-12)

    def test_singular_psd_supported(self):
        R = build_correlation(Uniform(1.0), 4)  # rank one
        F = correlation_factor(R)
        assert np.allclose(F @ F.T, R, atol=1e-10)

    def test_indefinite_rejected(self):
        R = np.array([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(FactorizationFailure):
            correlation_factor(R)


class TestSampleChannel:
    def test_los_only_limit(self):
        cfg = ArrayConfig(M=4, kappa=1e12, phi=1.1)
        shift = PhaseShift.zero(4)
        ox, oy = mean_vectors(cfg, shift)
        scale = math.sqrt(cfg.kappa / (2 * (cfg.kappa + 1)))
        s = sample_channel(cfg, shift, stream(3), n=1000)
        assert np.max(np.abs(s.hx - scale * ox)) < 1e-5
        assert np.max(np.abs(s.hy - scale * oy)) < 1e-5

    def test_rayleigh_identity_variance(self):
        cfg = ArrayConfig(M=3, kappa=0.0, phi=0.4)
        s = sample_channel(cfg, PhaseShift.zero(3), stream(5), n=1_000_000)
        var = np.var(s.hx, axis=0)
        assert np.all(np.abs(var - 0.5) < 0.005)

    def test_determinism(self):
        cfg = ArrayConfig(M=4, kappa=2.0, phi=0.9, correlation=Exponential(0.5))
        a = sample_channel(cfg, PhaseShift.zero(4), stream(7), n=10)
        b = sample_channel(cfg, PhaseShift.zero(4), stream(7), n=10)
        assert np.array_equal(a.hx, b.hx) and np.array_equal(a.hy, b.hy)

    def test_unit_average_gain(self):
        # E[||h||^2] = M for any kappa and unit-diagonal R
        cfg = ArrayConfig(M=5, kappa=3.0, phi=2.2, correlation=Exponential(0.7))
        s = sample_channel(cfg, PhaseShift.zero(5), stream(11), n=1_000_000)
        assert abs(s.gains().sum(axis=-1).mean() - 5.0) < 0.05

    def test_shift_preserves_scattering_covariance(self):
        cfg = ArrayConfig(M=3, kappa=0.0, phi=0.3, correlation=Exponential(0.5))
        R = build_correlation(cfg.correlation, 3)
        shift = PhaseShift(np.array([0.0, 1.3, 2.9]))
        s = sample_channel(cfg, shift, stream(13), n=500_000)
        emp = np.cov(s.hx.T)
        assert np.max(np.abs(emp - R / 2.0)) < 0.01


class TestApplyPhaseRotation:
    def test_matches_shifted_sampling_in_mean(self):
        cfg = ArrayConfig(M=4, kappa=1e12, phi=0.8)
        shift = PhaseShift(np.array([0.0, 0.5, 1.0, 1.5]))
        base = sample_channel(cfg, PhaseShift.zero(4), stream(17))
        hx, hy = apply_phase_rotation(base.hx, base.hy, shift.psi)
        direct = sample_channel(cfg, shift, stream(17))
        assert np.allclose(hx, direct.hx, atol=1e-5)
        assert np.allclose(hy, direct.hy, atol=1e-5)

    def test_preserves_gains(self):
        rng = stream(19)
        hx, hy = rng.standard_normal(6), rng.standard_normal(6)
        rx, ry = apply_phase_rotation(hx, hy, rng.uniform(0, 2 * math.pi, 6))
        assert np.allclose(rx**2 + ry**2, hx**2 + hy**2)


class TestArrayConfigValidation:
    def test_invalid_m(self):
        with pytest.raises(OutOfRange):
            ArrayConfig(M=0, kappa=1.0, phi=0.0)

    def test_negative_kappa(self):
        with pytest.raises(OutOfRange):
            ArrayConfig(M=2, kappa=-0.1, phi=0.0)

    def test_phi_out_of_range(self):
        with pytest.raises(OutOfRange):
            ArrayConfig(M=2, kappa=0.0, phi=7.0)
