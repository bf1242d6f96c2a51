"""Waveform and envelope checks, with the single-emitter master equation as oracle."""

import numpy as np
import pytest

from czlink.pulse_shaping import (
    Waveform, GridError, RegimeError,
    gaussian_waveform, emission_envelope, absorption_envelope,
    emit_oracle, waveform_overlap, mode_match_overlap, clamp_onset,
)

TAU = 1.0
T_TOTAL = 16.0 * TAU


def make_bin(kappa_tau, dt_frac=200, tag="E"):
    u = gaussian_waveform(TAU, T_TOTAL / 4.0, 0.0, T_TOTAL / 2.0, TAU / dt_frac, tag=tag)
    return u, kappa_tau / TAU


class TestGaussianWaveform:
    def test_normalization(self):
        u, _ = make_bin(20)
        assert abs(u.norm_sq() - 1.0) < 1e-12

    def test_peak_value(self):
        # direct evaluation of the Gaussian: u(t_peak) = pi^-1/4 for tau = 1
        u, _ = make_bin(20)
        peak = np.max(np.abs(u.samples))
        assert abs(peak - np.pi ** -0.25) < 1e-6
        assert abs(peak - 0.7511255444649425) < 1e-6

    def test_grid_too_short_raises(self):
        with pytest.raises(GridError):
            gaussian_waveform(TAU, 1.0, 0.0, 3.0, TAU / 100)

    def test_early_late_overlap(self):
        # analytic Gaussian overlap exp(-tau_sep^2 / 4 tau^2) = exp(-16) at tau_sep = 8 tau
        dt = TAU / 200
        u_e = gaussian_waveform(TAU, T_TOTAL / 4, 0.0, T_TOTAL, dt, tag="E")
        u_l = gaussian_waveform(TAU, 3 * T_TOTAL / 4, 0.0, T_TOTAL, dt, tag="L")
        ov = waveform_overlap(u_e, u_l)
        assert abs(ov - np.exp(-16.0)) < 1e-9
        assert abs(ov - 1.1254e-7) < 1e-9

    def test_overlap_monotone_in_separation(self):
        dt = TAU / 200
        vals = []
        for sep in (0.0, 1.0, 2.0, 4.0):
            u1 = gaussian_waveform(TAU, 20.0, 0.0, 40.0, dt)
            u2 = gaussian_waveform(TAU, 20.0 + sep, 0.0, 40.0, dt)
            vals.append(abs(waveform_overlap(u1, u2)) ** 2)
        assert abs(vals[0] - 1.0) < 1e-10
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_grid_mismatch_rejected(self):
        u1 = gaussian_waveform(TAU, 8.0, 0.0, 16.0, TAU / 200)
        u2 = gaussian_waveform(TAU, 8.0, 0.0, 16.0, TAU / 100)
        with pytest.raises(GridError):
            waveform_overlap(u1, u2)


class TestEnvelopes:
    def test_emission_peak_value(self):
        # Omega_e(t_peak) = (sqrt(k)/2) pi^-1/4 / sqrt(1/2) = 0.5311 sqrt(k/tau)
        u, kappa = make_bin(20)
        env = emission_envelope(u, kappa)
        i_peak = np.argmin(np.abs(u.times - u.t_peak))
        expect = 0.5 * np.sqrt(kappa) * np.pi ** -0.25 / np.sqrt(0.5)
        assert abs(env.samples[i_peak].real - expect) < 2e-3 * expect
        assert abs(expect / np.sqrt(kappa / TAU) - 0.53112) < 1e-4

    def test_emission_vanishes_at_leading_tail(self):
        # at the left edge the denominator is ~1, so Omega_e ~ (sqrt(k)/2) u -> 0
        u, kappa = make_bin(20)
        env = emission_envelope(u, kappa)
        edge = abs(env.samples[0])
        assert edge < 1e-3 * np.max(np.abs(env.samples))
        assert edge == pytest.approx(0.5 * np.sqrt(kappa) * abs(u.samples[0]), rel=1e-6)

    def test_clamp_bound_everywhere(self):
        for kt in (5, 10, 20, 40):
            u, kappa = make_bin(kt)
            for env in (emission_envelope(u, kappa), absorption_envelope(u, kappa)):
                assert np.max(np.abs(env.samples)) <= kappa / 5.0 * (1 + 1e-12)

    def test_absorption_is_time_reverse_of_emission(self):
        u, kappa = make_bin(20)
        em = emission_envelope(u, kappa).samples
        ab = absorption_envelope(u, kappa).samples
        assert np.max(np.abs(ab - em[::-1])) < 1e-10 * np.max(np.abs(em))

    def test_absorption_equals_emission_at_peak(self):
        u, kappa = make_bin(20)
        i_peak = np.argmin(np.abs(u.times - u.t_peak))
        em = emission_envelope(u, kappa).samples[i_peak]
        ab = absorption_envelope(u, kappa).samples[i_peak]
        assert abs(em - ab) < 2e-3 * abs(em)

    def test_absorption_clamp_onset_offset(self):
        # clamp region ends c*tau before the peak; c grows with kappa*tau and
        # exceeds 3 at the top of the default sweep grid (kappa*tau = 48)
        u, kappa = make_bin(48)
        env = absorption_envelope(u, kappa)
        clamped = clamp_onset(env)
        assert clamped.size > 0
        c = (u.t_peak - clamped.max()) / TAU
        assert c >= 3.0
        assert c == pytest.approx(3.6, abs=0.3)

    def test_regime_guard(self):
        u = gaussian_waveform(TAU, 8.0, 0.0, 16.0, TAU / 200)
        with pytest.raises(RegimeError):
            emission_envelope(u, 0.5)

    def test_envelope_identity(self):
        # (4/k) int |Omega_e|^2 = -ln(1 - int |u|^2) on the unclamped region;
        # trapezoid error is O(dt^2), so a fine grid meets the 1e-6 band
        u, kappa = make_bin(20, dt_frac=800)
        env = emission_envelope(u, kappa)
        om2 = np.abs(env.samples) ** 2
        dt = u.dt
        lhs = (4.0 / kappa) * np.concatenate(
            [[0.0], np.cumsum(0.5 * (om2[1:] + om2[:-1]) * dt)])
        p = np.abs(u.samples) ** 2
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * dt)])
        rhs = -np.log(np.clip(1.0 - cum, 1e-300, None))
        unclamped = np.abs(env.samples) < (kappa / 5.0) * (1 - 1e-9)
        sel = unclamped & (cum < 0.999)
        assert np.max(np.abs(lhs[sel] - rhs[sel])) < 1e-6


class TestEmitOracle:
    def test_no_drive_no_emission(self):
        u, kappa = make_bin(20)
        env = emission_envelope(u, kappa)
        silent = type(env)(np.zeros_like(env.samples), env.t_start, env.dt,
                           "emission", env.omega_cap)
        out = emit_oracle(silent, kappa)
        assert np.max(np.abs(out.samples)) < 1e-14

    def test_round_trip_and_monotonicity(self):
        # the oracle validates the envelope design; overlap is mode-matched in
        # time (the emitted packet is retarded by ~2/kappa, a propagation
        # reference) with the raw overlap also characterized
        raw_expected = {5: 0.846, 10: 0.978, 20: 0.9964, 40: 0.9991}
        matched = {}
        for kt in (5, 10, 20, 40):
            u, kappa = make_bin(kt)
            out = emit_oracle(emission_envelope(u, kappa), kappa)
            raw = abs(waveform_overlap(u, out)) ** 2
            assert raw == pytest.approx(raw_expected[kt], abs=2e-3)
            matched[kt], _ = mode_match_overlap(u, out, kappa)
        assert matched[20] >= 0.999
        assert matched[10] >= 0.99
        infid = {k: 1.0 - v for k, v in matched.items()}
        assert infid[20] <= 1e-3
        assert infid[10] <= 1e-2
        assert infid[5] > infid[10] > infid[20] > infid[40]

    def test_emitted_probability(self):
        u, kappa = make_bin(20)
        out = emit_oracle(emission_envelope(u, kappa), kappa)
        emitted = out.norm_sq()
        assert 1.0 - emitted <= 1e-3
        assert emitted <= 1.0 + 1e-9

    def test_convergence_in_dt(self):
        u1, kappa = make_bin(20, dt_frac=200)
        u2, _ = make_bin(20, dt_frac=400)
        o1 = emit_oracle(emission_envelope(u1, kappa), kappa)
        o2 = emit_oracle(emission_envelope(u2, kappa), kappa)
        f1 = abs(waveform_overlap(u1, o1)) ** 2
        f2 = abs(waveform_overlap(u2, o2)) ** 2
        assert abs(f1 - f2) < 1e-5
