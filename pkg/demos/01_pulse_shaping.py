"""Shaping a single-photon wavepacket: envelopes, clamping, and the oracle.

Walks through the Raman drive design for emitting a Gaussian quasimode and
replays each envelope through the single-emitter master equation to see how
faithfully the designed mode comes out.  Writes emit_check.csv with the
target and emitted waveforms for plotting.
"""

import numpy as np

from czlink.pulse_shaping import (
    gaussian_waveform, emission_envelope, absorption_envelope,
    emit_oracle, waveform_overlap, mode_match_overlap, clamp_onset,
)

tau = 1.0
span = 16.0 * tau

print("=== emission/absorption envelope design ===")
print("Gaussian bin of width tau on the early half-window [0, 8 tau], peak at 4 tau.")
print()
print(" kt   max|Om|/kappa  clamp onset (tau past peak)   raw ov^2   matched ov^2   emitted")
for kt in (5, 10, 20, 40, 48):
    kappa = kt / tau
    u = gaussian_waveform(tau, span / 4, 0.0, span / 2, tau / 200, tag="E")
    env = emission_envelope(u, kappa)
    out = emit_oracle(env, kappa)
    raw = abs(waveform_overlap(u, out)) ** 2
    matched, delay = mode_match_overlap(u, out, kappa)
    clamped = clamp_onset(env)
    onset = (clamped.min() - u.t_peak) / tau if clamped.size else float("nan")
    print(f" {kt:3.0f}   {np.max(np.abs(env.samples)) / kappa:.3f}          "
          f"{onset:+.2f}                        {raw:.5f}    {matched:.6f}     {out.norm_sq():.6f}")

print()
print("The raw overlap is limited by the cavity group delay (~2/kappa); after")
print("aligning that propagation reference, the mode-matched overlap follows the")
print("(kappa tau)^-2 envelope-design error and passes 0.999 at kappa tau = 20.")

print()
print("=== absorption clamp onset (report of c where |Omega_a| leaves the cap) ===")
for kt in (8, 12, 16, 24, 32, 48):
    kappa = kt / tau
    u = gaussian_waveform(tau, span / 4, 0.0, span / 2, tau / 200, tag="E")
    env = absorption_envelope(u, kappa)
    clamped = clamp_onset(env)
    c = (u.t_peak - clamped.max()) / tau if clamped.size else float("nan")
    print(f"  kappa tau = {kt:3.0f}: clamp confined to t < t_peak - {c:.2f} tau")

u = gaussian_waveform(tau, span / 4, 0.0, span / 2, tau / 200, tag="E")
kappa = 20.0 / tau
env = emission_envelope(u, kappa)
out = emit_oracle(env, kappa)
rows = np.column_stack([u.times, u.samples.real, out.samples.real,
                        out.samples.imag, np.abs(env.samples)])
np.savetxt("emit_check.csv", rows, delimiter=",", comments="",
           header="t,re_u_target,re_u_out,im_u_out,abs_omega_e")
print("\nwrote emit_check.csv (kappa tau = 20)")
