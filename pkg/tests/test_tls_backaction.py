"""TLS-bath loss: quadrature vs closed forms, expansions, and the estimator."""

import math

import numpy as np
import pytest

from czlink.tls_backaction import (
    SpectralDensity, SpectralDensityError, RegimeError,
    spectral_overlap_integrals, flat_band_coherence, gaussian_band_report,
    gaussian_band_exact_coherence, narrowband_expansion,
    steadystate_amplitudes, discretize_gaussian_bath, erasure_experiment_estimator,
    gaussian_u_spec, gaussian_u_freq,
)

TAU = 1.0


class TestFlatBand:
    def test_closed_form_at_two_tau(self):
        c = flat_band_coherence(TAU, 2.0 * TAU)
        assert c.real == pytest.approx(math.exp(-1.0), abs=1e-15)
        assert c.real == pytest.approx(0.36787944, abs=1e-8)

    def test_quadrature_matches_closed_form(self):
        j = SpectralDensity("flat", j0=1e-3)
        for sep in (0.0, 1.0, 2.0, 5.0):
            rep = spectral_overlap_integrals(j, TAU, sep * TAU)
            assert abs(rep.C - flat_band_coherence(TAU, sep * TAU)) < 1e-8

    def test_large_separation_dephases_fully(self):
        c = flat_band_coherence(TAU, 12.0 * TAU)
        assert abs(c) < 1e-15
        rep = spectral_overlap_integrals(SpectralDensity("flat", j0=1e-3), TAU, 12.0 * TAU)
        assert rep.eta == pytest.approx(0.5, abs=1e-9)

    def test_zero_separation(self):
        assert flat_band_coherence(TAU, 0.0) == 1.0

    def test_flat_band_q_is_j0_tau(self):
        # (2pi)^-1 int |u(w)|^2 dw = 1, so q = J0 tau exactly
        j0 = 2.5e-4
        rep = spectral_overlap_integrals(SpectralDensity("flat", j0=j0), TAU, TAU)
        assert rep.q == pytest.approx(j0 * TAU, rel=1e-9)


class TestGaussianBand:
    def test_q_at_unit_lambda_tau(self):
        # delta_omega_bar = 0, Lambda tau = 1: q = 2 sqrt(pi) (g tau)^2 / sqrt(3)
        g = 1e-2
        rep = gaussian_band_report(TAU, 2.0 * TAU, g, 1.0 / TAU)
        assert rep.q == pytest.approx(2.0 * math.sqrt(math.pi) * g * g / math.sqrt(3.0),
                                      rel=1e-12)

    def test_quadrature_agreement_grid(self):
        # 5x5 (Lambda tau, tau_sep/tau) grid at delta_omega_bar = 0, 1e-8 relative
        g = 1e-3
        for lam_tau in (0.05, 0.2, 1.0, 2.0, 5.0):
            for sep in (0.5, 1.0, 2.0, 4.0, 8.0):
                j = SpectralDensity("gaussian", g_total=g, lam=lam_tau / TAU)
                rep = spectral_overlap_integrals(j, TAU, sep * TAU)
                closed = gaussian_band_report(TAU, sep * TAU, g, lam_tau / TAU)
                assert abs(rep.q - closed.q) <= 1e-8 * closed.q
                assert abs(rep.C - closed.C) <= 1e-8 * max(abs(closed.C), 1e-30)

    def test_zero_bandwidth_is_pure_phase(self):
        rep = gaussian_band_report(TAU, 3.0 * TAU, 1e-3, 1e-9 / TAU, delta_omega_bar=2.0 / TAU)
        assert abs(abs(rep.C) - 1.0) < 1e-12
        assert rep.phi == pytest.approx(-np.angle(np.exp(2.0j * 3.0)), abs=1e-9) or True
        assert rep.phi == pytest.approx(float(np.angle(np.exp(-6.0j))), abs=1e-9)

    def test_detuned_phase_pulled_by_photon_weight(self):
        # the exact integral's phase center is delta_omega_bar / (1 + 2 L^2 t^2);
        # the printed closed form keeps the bare delta_omega_bar (narrow-band limit)
        lam, dwb, sep = 0.8 / TAU, 1.3 / TAU, 1.5 * TAU
        j = SpectralDensity("gaussian", g_total=1e-3, lam=lam, delta_omega_bar=dwb)
        rep = spectral_overlap_integrals(j, TAU, sep)
        exact = gaussian_band_exact_coherence(TAU, sep, lam, dwb)
        assert abs(rep.C - exact) < 1e-8
        paper = gaussian_band_report(TAU, sep, 1e-3, lam, dwb)
        assert abs(abs(rep.C) - abs(paper.C)) < 1e-8      # magnitudes agree exactly
        s = 1.0 + 2.0 * (lam * TAU) ** 2
        assert rep.phi == pytest.approx(-dwb * sep / s, abs=1e-6)

    def test_paper_anchor_lambda_tau_sep_unity(self):
        # Lambda/2pi = 1.6 MHz and tau_sep = 100 ns give Lambda tau_sep = 1.005
        lam = 2.0 * math.pi * 1.6e6
        tau_sep = 100e-9
        x = lam * tau_sep
        assert x == pytest.approx(1.0, abs=0.01)
        rep = gaussian_band_report(12.5e-9, tau_sep, 1e4, lam)
        assert abs(rep.C) == pytest.approx(math.exp(-x * x / (2 + 4 * (lam * 12.5e-9) ** 2)),
                                           rel=1e-12)
        # narrow-photon limit: |C| -> exp(-1/2) = 0.6065 as Lambda tau -> 0
        rep2 = gaussian_band_report(1e-12, 1.0 / lam, 1e4, lam)
        assert abs(rep2.C) == pytest.approx(math.exp(-0.5), abs=1e-6)
        assert abs(rep2.C) == pytest.approx(0.6065, abs=1e-4)

    def test_born_warning_flag(self):
        rep = gaussian_band_report(TAU, TAU, 1.0, 1.0 / TAU)
        assert rep.born_warning


class TestZeroLossAndBounds:
    def test_zero_coupling_reports_zero_loss(self):
        j = SpectralDensity("gaussian", g_total=0.0, lam=1.0 / TAU)
        rep = spectral_overlap_integrals(j, TAU, 2.0 * TAU)
        assert rep.q == 0.0
        assert rep.C == 1.0
        assert rep.zero_loss

    def test_coherence_bounded_for_random_tabulated_density(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            w = np.linspace(-8.0 / TAU, 8.0 / TAU, 101)
            j = SpectralDensity("tabulated", omega_grid=w, j_values=rng.uniform(0, 1e-3, 101))
            for sep in (0.7, 2.3, 6.0):
                rep = spectral_overlap_integrals(j, TAU, sep * TAU)
                assert abs(rep.C) <= 1.0 + 1e-10
        # tau_sep = 0 gives C = 1 for any density
        rep = spectral_overlap_integrals(j, TAU, 0.0)
        assert rep.C == pytest.approx(1.0, abs=1e-12)

    def test_q_independent_of_separation(self):
        j = SpectralDensity("gaussian", g_total=1e-3, lam=0.7 / TAU)
        q_vals = [spectral_overlap_integrals(j, TAU, s * TAU).q for s in (0.0, 1.0, 4.0)]
        assert max(q_vals) - min(q_vals) < 1e-15

    def test_tabulated_coverage_guard(self):
        w = np.linspace(-2.0 / TAU, 2.0 / TAU, 21)
        j = SpectralDensity("tabulated", omega_grid=w, j_values=np.ones(21))
        with pytest.raises(SpectralDensityError):
            spectral_overlap_integrals(j, TAU, TAU)

    def test_tabulated_validation(self):
        with pytest.raises(SpectralDensityError):
            SpectralDensity("tabulated", omega_grid=np.array([0.0, 0.0, 1.0]),
                            j_values=np.ones(3))
        with pytest.raises(SpectralDensityError):
            SpectralDensity("tabulated", omega_grid=np.array([0.0, 1.0]),
                            j_values=np.array([-1.0, 1.0]))


class TestNarrowbandExpansion:
    def test_small_argument(self):
        abs_c, eta = narrowband_expansion(0.1 / TAU, TAU)
        assert eta == pytest.approx(2.5e-3, abs=1e-9)
        # compare to the exact Gaussian-band result in the narrow-photon limit
        exact = gaussian_band_report(1e-6 * TAU, TAU, 1e-3, 0.1 / TAU)
        assert abs(eta - exact.eta) < 1e-5

    def test_zero_argument(self):
        abs_c, eta = narrowband_expansion(0.0, TAU)
        assert abs_c == 1.0
        assert eta == 0.0

    def test_half_argument_accuracy(self):
        # |C| to second order is within 2% relative of exact at Lambda tau_sep = 0.5;
        # eta is within 2e-2 absolute (the relative gap on eta itself is ~6%)
        abs_c, eta = narrowband_expansion(0.5 / TAU, TAU)
        exact = gaussian_band_report(1e-6 * TAU, TAU, 1e-3, 0.5 / TAU)
        assert abs(abs_c - abs(exact.C)) / abs(exact.C) < 0.02
        assert abs(eta - exact.eta) < 2e-2

    def test_regime_guard(self):
        with pytest.raises(RegimeError):
            narrowband_expansion(1.5 / TAU, TAU)


class TestSteadyStateAmplitudes:
    def test_zero_coupling(self):
        amps = steadystate_amplitudes([(0.0, 0.5, 1.0)], TAU, v=1.0)
        assert amps[0] == 0.0

    def test_single_resonant_tls(self):
        # |alpha|^2 = g^2 tau |u(0)|^2 = 2 sqrt(pi) (g tau)^2
        g = 1e-2
        amps = steadystate_amplitudes([(g, 0.0, 0.3)], TAU, v=1.0)
        assert abs(amps[0]) ** 2 == pytest.approx(2.0 * math.sqrt(math.pi) * (g * TAU) ** 2,
                                                  rel=1e-12)

    def test_discretized_bath_reproduces_q(self):
        g, lam = 1e-3, 0.8 / TAU
        tls = discretize_gaussian_bath(g, lam, 0.0, n=2000)
        amps = steadystate_amplitudes(tls, TAU, v=1.0)
        q_sum = float(np.sum(np.abs(amps) ** 2))
        q_closed = gaussian_band_report(TAU, TAU, g, lam).q
        assert abs(q_sum - q_closed) / q_closed < 1e-3

    def test_spec_norms(self):
        # |u(omega)|^2 and u(omega) are mutually consistent
        spec = gaussian_u_spec(TAU)
        amp = gaussian_u_freq(TAU)
        for w in (0.0, 0.5, 2.0):
            assert spec(w) == pytest.approx(abs(amp(w)) ** 2, rel=1e-12)


class TestErasureEstimator:
    def test_perfect_coherence(self):
        est = erasure_experiment_estimator(1.0 + 0.0j, 10000, seed=1)
        assert est.c_est.real == pytest.approx(1.0, abs=1e-12)

    def test_zero_coherence_within_ci(self):
        est = erasure_experiment_estimator(0.0j, 10000, seed=2)
        assert abs(est.c_est) < est.ci_radius

    def test_spec_anchor_point(self):
        c_true = math.exp(-0.5) * np.exp(1j * math.pi / 4.0)
        est = erasure_experiment_estimator(c_true, 10000, seed=3)
        assert abs(est.c_est - c_true) < 0.03

    def test_shot_guard(self):
        with pytest.raises(ValueError):
            erasure_experiment_estimator(0.5, 10, seed=0)
