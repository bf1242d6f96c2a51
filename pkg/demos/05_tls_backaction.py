"""Loss of a time-bin photon to a TLS bath: how much dephasing does it leave?

Scans the bath bandwidth Lambda and the time-bin separation, comparing
quadrature against the flat- and Gaussian-band closed forms, then simulates
the proposed coherence-factor measurement (X/Y readout after a heralded
loss).  Writes tls_scan.csv.
"""

import numpy as np

from czlink.tls_backaction import (
    SpectralDensity, spectral_overlap_integrals, flat_band_coherence,
    gaussian_band_report, narrowband_expansion, discretize_gaussian_bath,
    steadystate_amplitudes, erasure_experiment_estimator,
)

tau = 12.5e-9          # bin width (100 ns separation = 8 tau, gate geometry)
tau_sep = 8 * tau
g_total = 1e4

print("=== flat band: the Markovian worst case ===")
j_flat = SpectralDensity("flat", j0=1e3)
rep = spectral_overlap_integrals(j_flat, tau, tau_sep)
print(f"  quadrature |C| = {abs(rep.C):.3e}, closed form {flat_band_coherence(tau, tau_sep).real:.3e}")
print(f"  -> eta = {rep.eta:.3f}: a photon lost to a broadband bath dephases maximally")

print()
print("=== Gaussian band: backaction vs bath bandwidth ===")
print("  Lambda/2pi (MHz)   Lambda*tau_sep    |C|        eta        narrow-band eta")
rows = []
for lam_mhz in (0.2, 0.5, 1.0, 1.6, 3.2, 8.0):
    lam = 2 * np.pi * lam_mhz * 1e6
    rep = gaussian_band_report(tau, tau_sep, g_total, lam)
    x = lam * tau_sep
    nb = f"{narrowband_expansion(lam, tau_sep)[1]:.4f}" if x < 1 else "  (regime ends)"
    print(f"  {lam_mhz:8.1f}           {x:6.3f}        {abs(rep.C):.4f}    {rep.eta:.4f}    {nb}")
    rows.append((x, rep.q, abs(rep.C), rep.phi, rep.eta))
np.savetxt("tls_scan.csv", rows, delimiter=",", comments="",
           header="lambda_tau_sep,q,abs_C,phi,eta")
print("  wrote tls_scan.csv")
print("  The anchor: Lambda/2pi = 1.6 MHz gives Lambda*tau_sep = 1 at tau_sep = 100 ns.")

print()
print("=== microscopic cross-check: 2000 discrete TLSs ===")
lam = 2 * np.pi * 1.6e6
tls = discretize_gaussian_bath(g_total, lam, 0.0, n=2000)
amps = steadystate_amplitudes(tls, tau, v=1.0)
q_sum = float(np.sum(np.abs(amps) ** 2))
q_closed = gaussian_band_report(tau, tau_sep, g_total, lam).q
print(f"  sum |alpha_j|^2 = {q_sum:.6e} vs closed-form q = {q_closed:.6e} "
      f"({abs(q_sum / q_closed - 1):.2e} relative)")

print()
print("=== proposed C measurement: X/Y readout after heralded loss ===")
c_true = np.exp(-0.5) * np.exp(1j * np.pi / 4)
for shots in (1000, 10000, 100000):
    est = erasure_experiment_estimator(c_true, shots, seed=3)
    print(f"  {shots:6d} shots: C_est = {est.c_est:.4f}, |error| = "
          f"{abs(est.c_est - c_true):.4f}, 95% radius {est.ci_radius:.4f}")
print(f"  true C = {c_true:.4f}")
