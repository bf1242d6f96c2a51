"""One full cascaded-cavity master-equation run of the ancilla-assisted gate.

Evolves a uniform superposition through the two half-gates at kappa*tau = 20
with and without qubit decay, conditions on the ancilla measurement, and
prints the branch fidelities, herald probability, and a short trajectory
table (cavity populations on the way through the cascade).
"""

import numpy as np

from czlink.lindblad_engine import GateConfig, run_gate_evolution
from czlink.fidelity_metrics import condition_and_correct, assemble_channel, CZ_MATRIX

psi = np.array([0.5, 0.5, 0.5, 0.5], dtype=complex)
target = CZ_MATRIX @ psi

for label, gamma in (("no decoherence", 0.0), ("T1 = 2000/kappa", 5e-4)):
    cfg = GateConfig(kappa=1.0, tau=20.0, gamma=gamma)
    run = run_gate_evolution(psi, cfg, record_stride=160)
    out = condition_and_correct(run.rho_final)
    f_plus = np.vdot(target, out.rho_plus.matrix @ target).real
    f_minus = np.vdot(target, out.rho_minus.matrix @ target).real
    print(f"=== {label} (kappa*tau = {cfg.kappa_tau:.0f}) ===")
    print(f"  outcome probabilities: p+ = {out.p_plus:.4f}, p- = {out.p_minus:.4f}, "
          f"herald p_f = {out.p_f:.4f}")
    print(f"  corrected branch fidelities with CZ|psi>: {f_plus:.6f} (+), {f_minus:.6f} (-)")
    print(f"  branch trace distance: {out.branch_trace_distance():.2e}")
    m = assemble_channel(out)
    print(f"  post-selected channel output fidelity: "
          f"{np.vdot(target, m.matrix @ target).real:.6f}")
    print()

cfg = GateConfig(kappa=1.0, tau=20.0)
run = run_gate_evolution(psi, cfg, record_stride=320)
traj = run.trajectory
print("trajectory of the photon through the cascade (Gamma = 0):")
print("   t/tau    n_C1      n_C2      n_C3      P_f(t)")
for t, n1, n2, n3, pf in zip(traj["t"], traj["n_c1"], traj["n_c2"],
                             traj["n_c3"], traj["p_f"]):
    print(f"  {t / cfg.tau:6.2f}  {n1:.6f}  {n2:.6f}  {n3:.6f}  {pf:.6f}")
print()
print("The early bin transits C1 -> C2 -> C3 in the first half-window; the")
print("late bin repeats the trip with the dispersive shift active on C2.")
print("P_f(t) here is the instantaneous |f>_3 population: mid-gate it holds the")
print("absorbed bin, and only after the final pulse triple does it mark loss.")
