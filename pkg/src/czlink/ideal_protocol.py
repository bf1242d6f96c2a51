"""Exact pure-state bookkeeping for both photon-mediated CZ protocols.

The measurement-free protocol bounces a Fock-encoded photon off the remote
qubit and back; the ancilla-assisted protocol sends a time-bin qubit one way
and measures it through an ancilla qutrit.  Both are propagated step by step
on small state vectors, including the heralded photon-loss branches and the
dephasing channel that loss of a time-bin photon applies to the stationary
qubits.

Registers:
  measurement-free : Q1 (qutrit) x Q2 (qubit) x photon {vac, 1u, lost}
  ancilla-assisted : Q1 (qutrit) x Q2 (qubit) x photon {vac, E, L, xE, xL} x Q3 (qutrit)
with xE/xL the environment-tagged lost-photon slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor_core import G, E, F

PHOTON_FOCK = ("vac", "1u")
PHOTON_TIMEBIN = ("vac", "E", "L")


class RegisterKindError(ValueError):
    """Gate applied to the wrong photonic register kind."""


@dataclass(frozen=True)
class PhotonRegister:
    """Photonic register descriptor: Fock {vac, 1u} or time-bin {vac, E, L}."""

    kind: str  # "fock" | "timebin"

    @property
    def basis(self) -> tuple[str, ...]:
        return PHOTON_FOCK if self.kind == "fock" else PHOTON_TIMEBIN

    @property
    def dim(self) -> int:
        return len(self.basis)


@dataclass
class ProtocolTrace:
    """Ordered (step name, state vector) pairs plus heralding bookkeeping."""

    steps: list[tuple[str, np.ndarray]] = field(default_factory=list)
    herald: str = "success"            # "success" | "photon-lost"
    p_herald: float = 0.0              # probability of the loss herald
    p_outcome: float | None = None     # probability of the conditioned outcome (aa only)
    final_state: np.ndarray | None = None

    def record(self, name: str, state: np.ndarray):
        self.steps.append((name, state.copy()))

    def state_after(self, name: str) -> np.ndarray:
        for step, state in self.steps:
            if step == name:
                return state
        raise KeyError(f"no step named {name!r}")


# ---------------------------------------------------------------------------
# single-register CZ mechanisms (photon x target-qubit product space)

def _photon_qubit_diag(phases_by_label: dict[str, complex], reg: PhotonRegister) -> np.ndarray:
    """Diagonal gate on (photon x qubit); labels like 'L,g'. Unlisted entries are 1."""
    dim = 2 * reg.dim
    d = np.ones(dim, dtype=np.complex128)
    for label, phase in phases_by_label.items():
        pname, qname = label.split(",")
        p = reg.basis.index(pname)
        q = {"g": 0, "e": 1}[qname]
        d[2 * p + q] = phase
    return np.diag(d)


def fock_cz(state: np.ndarray, reg: PhotonRegister = PhotonRegister("fock")) -> np.ndarray:
    """exp(i pi |1u,g><1u,g|): negate the photon-present, qubit-g amplitude."""
    if reg.kind != "fock":
        raise RegisterKindError("fock_cz requires a Fock register")
    return _photon_qubit_diag({"1u,g": -1.0}, reg) @ state


def timebin_cz(state: np.ndarray, reg: PhotonRegister = PhotonRegister("timebin")) -> np.ndarray:
    """exp(i pi |L,g><L,g|): negate the late-bin, qubit-g amplitude."""
    if reg.kind != "timebin":
        raise RegisterKindError("timebin_cz requires a time-bin register")
    return _photon_qubit_diag({"L,g": -1.0}, reg) @ state


def timebin_s_gate(reg: PhotonRegister = PhotonRegister("timebin"), dagger: bool = False) -> np.ndarray:
    """S on the time-bin qubit: diag(1, i) over (E, L); vacuum untouched."""
    if reg.kind != "timebin":
        raise RegisterKindError("S gate requires a time-bin register")
    return _photon_qubit_diag({"L,g": -1j if dagger else 1j,
                               "L,e": -1j if dagger else 1j}, reg)


def dispersive_step_gate(state: np.ndarray, reg: PhotonRegister = PhotonRegister("timebin")) -> np.ndarray:
    """Step-chi mechanism on (time-bin photon x qubit).

    Implemented as the exact composition (global pi phase) * timebin_cz *
    (S^dagger on the time-bin qubit), restricted to the photon-present
    subspace: E picks up -1 regardless of the qubit, L picks up -+i for the
    qubit in g/e.  Note the sign: with the dispersive coupling
    chi (|e><e| - |g><g|) a'a and chi = +kappa/2, the late-bin reflection
    phase for the qubit in g is -pi/2 (the +pi/2 reading corresponds to the
    opposite sign of chi).  Vacuum components acquire no phase.
    """
    if reg.kind != "timebin":
        raise RegisterKindError("dispersive_step_gate requires a time-bin register")
    u = _photon_qubit_diag({"L,g": -1.0}, reg)
    s_dag = timebin_s_gate(reg, dagger=True)
    global_pi = _photon_qubit_diag({"E,g": -1.0, "E,e": -1.0, "L,g": -1.0, "L,e": -1.0}, reg)
    return (global_pi @ u @ s_dag) @ state


# ---------------------------------------------------------------------------
# full protocol runs

def _pi_pulse(levels: tuple[int, int], dim: int = 3) -> np.ndarray:
    """Ideal pi pulse: plain amplitude exchange between two levels."""
    a, b = levels
    m = np.eye(dim, dtype=np.complex128)
    m[a, a] = m[b, b] = 0.0
    m[a, b] = m[b, a] = 1.0
    return m


PI_EG = _pi_pulse((G, E))
PI_FE = _pi_pulse((E, F))


def _kron(*ops) -> np.ndarray:
    m = ops[0]
    for o in ops[1:]:
        m = np.kron(m, o)
    return m


def _normalize_input(alpha, beta, gamma, delta) -> np.ndarray:
    amps = np.array([alpha, beta, gamma, delta], dtype=np.complex128)
    nrm = np.linalg.norm(amps)
    if nrm == 0:
        raise ValueError("input amplitudes are all zero")
    return amps / nrm


def run_measurement_free(alpha, beta, gamma, delta, q: float = 0.0) -> ProtocolTrace:
    """Propagate the measurement-free CZ protocol exactly.

    Register order (Q1, Q2, photon) with photon basis (vac, 1u, lost); loss
    happens in transit with probability q.  Ends with the photon register in
    vacuum and Q1 in |f> on the lost branch (the heralding POVM is
    {|f><f|, 1 - |f><f|} on Q1).
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError("loss probability q must be in [0, 1]")
    amps = _normalize_input(alpha, beta, gamma, delta)
    dq1, dq2, dp = 3, 2, 3  # photon: vac, 1u, lost
    idx = lambda q1, q2, p: (q1 * dq2 + q2) * dp + p
    state = np.zeros(dq1 * dq2 * dp, dtype=np.complex128)
    for k, (q1, q2) in enumerate([(G, G), (G, E), (E, G), (E, E)]):
        state[idx(q1, q2, 0)] = amps[k]

    trace = ProtocolTrace()
    trace.record("input", state)
    i_p = np.eye(dp, dtype=np.complex128)
    i_q2 = np.eye(dq2, dtype=np.complex128)

    def on_q1(m):
        return _kron(m, i_q2, i_p)

    # pi_fe, pi_eg, pi_fe on Q1: net g->f, e->e
    for name, pulse in (("pi_fe", PI_FE), ("pi_eg", PI_EG), ("pi_fe", PI_FE)):
        state = on_q1(pulse) @ state
    trace.record("mapped_to_f", state)

    # conditional emission |f>|vac> -> |g>|1u>
    emit = np.eye(dq1 * dq2 * dp, dtype=np.complex128)
    for q2 in range(dq2):
        a, b = idx(F, q2, 0), idx(G, q2, 1)
        emit[a, a] = emit[b, b] = 0.0
        emit[b, a] = emit[a, b] = 1.0
    state = emit @ state
    trace.record("emitted", state)

    # loss in transit: |1u> -> sqrt(1-q)|1u> + sqrt(q)|lost>
    loss = np.eye(dp, dtype=np.complex128)
    loss[1, 1] = np.sqrt(1.0 - q)
    loss[2, 1] = np.sqrt(q)
    loss[2, 2] = 1.0
    state = _kron(np.eye(dq1), i_q2, loss) @ state
    trace.record("transit_loss", state)

    # CZ between photon and Q2: negate |1u>|g>_2
    cz = np.eye(dq1 * dq2 * dp, dtype=np.complex128)
    for q1 in range(dq1):
        k = idx(q1, G, 1)
        cz[k, k] = -1.0
    state = cz @ state
    trace.record("remote_cz", state)

    # reabsorption |g>|1u> -> |f>|vac| (trivial on the lost slot)
    absorb = np.eye(dq1 * dq2 * dp, dtype=np.complex128)
    for q2 in range(dq2):
        a, b = idx(G, q2, 1), idx(F, q2, 0)
        absorb[a, a] = absorb[b, b] = 0.0
        absorb[b, a] = absorb[a, b] = 1.0
    state = absorb @ state
    trace.record("reabsorbed", state)

    # pi_eg, pi_fe, pi_eg on Q1: net f->g, e->e, g->f (loss herald path)
    for name, pulse in (("pi_eg", PI_EG), ("pi_fe", PI_FE), ("pi_eg", PI_EG)):
        state = on_q1(pulse) @ state
    trace.record("final", state)

    # herald: projection of Q1 onto |f>
    proj_f = _kron(np.diag([0.0, 0.0, 1.0]).astype(np.complex128), i_q2, i_p)
    trace.p_herald = float(np.linalg.norm(proj_f @ state) ** 2)
    success = state - proj_f @ state
    p_succ = float(np.linalg.norm(success) ** 2)
    trace.herald = "photon-lost" if p_succ < 1e-12 else "success"
    trace.final_state = success / np.sqrt(p_succ) if p_succ > 1e-12 else success
    return trace


def mf_success_two_qubit(trace: ProtocolTrace) -> np.ndarray:
    """Extract the (Q1 qubit block x Q2) amplitudes of the heralded-success state."""
    state = trace.final_state.reshape(3, 2, 3)
    block = state[:2, :, 0].reshape(4)
    return block


def run_ancilla_assisted(
    alpha, beta, gamma, delta,
    outcome: str = "plus",
    q: float = 0.0,
    mechanism: str = "switch",
) -> ProtocolTrace:
    """Propagate the ancilla-assisted CZ protocol exactly.

    Register order (Q1, Q2, photon, Q3); photon basis (vac, E, L, xE, xL)
    where xE/xL tag the environment after in-transit loss from the early/late
    bin.  ``mechanism`` selects how the photon-Q2 entangler is realized:

    * ``"switch"``   -- clean U = exp(i pi |L,g><L,g|), no extra phases;
    * ``"dispersive"`` -- the step-chi phases (E -> -1, L -> -+i for Q2 in g/e)
      with the compensating phase correction diag(1, -i) applied to Q1 before
      the measurement, matching the cascaded-cavity engine.

    The trace's ``final_state`` is the conditioned, corrected two-qubit state
    extended by Q3 bookkeeping; ``p_outcome`` its probability.  A Z gate on Q1
    is applied for ``outcome="minus"``.
    """
    if outcome not in ("plus", "minus"):
        raise ValueError("outcome must be 'plus' or 'minus'")
    if mechanism not in ("switch", "dispersive"):
        raise ValueError("mechanism must be 'switch' or 'dispersive'")
    if not 0.0 <= q <= 1.0:
        raise ValueError("loss probability q must be in [0, 1]")
    amps = _normalize_input(alpha, beta, gamma, delta)
    dq1, dq2, dp, dq3 = 3, 2, 5, 3
    dim = dq1 * dq2 * dp * dq3
    idx = lambda q1, q2, p, q3: ((q1 * dq2 + q2) * dp + p) * dq3 + q3
    state = np.zeros(dim, dtype=np.complex128)
    for k, (q1, q2) in enumerate([(G, G), (G, E), (E, G), (E, E)]):
        state[idx(q1, q2, 0, G)] = amps[k]

    trace = ProtocolTrace()
    trace.record("input", state)
    i_q1, i_q2, i_p, i_q3 = (np.eye(d, dtype=np.complex128) for d in (dq1, dq2, dp, dq3))

    def apply(q1_op=None, q2_op=None, p_op=None, q3_op=None):
        nonlocal state
        m = _kron(q1_op if q1_op is not None else i_q1,
                  q2_op if q2_op is not None else i_q2,
                  p_op if p_op is not None else i_p,
                  q3_op if q3_op is not None else i_q3)
        state = m @ state

    def emit(bin_slot: int):
        """Conditional emission on Q1: |f>|vac> -> |g>|bin>."""
        nonlocal state
        m = np.eye(dim, dtype=np.complex128)
        for q2 in range(dq2):
            for q3 in range(dq3):
                a = idx(F, q2, 0, q3)
                b = idx(G, q2, bin_slot, q3)
                m[a, a] = m[b, b] = 0.0
                m[b, a] = m[a, b] = 1.0
        state = m @ state

    def catch(bin_slot: int):
        """Conditional absorption on Q3: |g>_3 |bin> -> |f>_3 |vac>."""
        nonlocal state
        m = np.eye(dim, dtype=np.complex128)
        for q1 in range(dq1):
            for q2 in range(dq2):
                a = idx(q1, q2, bin_slot, G)
                b = idx(q1, q2, 0, F)
                m[a, a] = m[b, b] = 0.0
                m[b, a] = m[a, b] = 1.0
        state = m @ state

    def lose(bin_slot: int, lost_slot: int):
        nonlocal state
        loss = np.eye(dp, dtype=np.complex128)
        loss[bin_slot, bin_slot] = np.sqrt(1.0 - q)
        loss[lost_slot, bin_slot] = np.sqrt(q)
        apply(p_op=loss)

    # prelude on Q1: pi_fe then pi_eg (g->e, e->f)
    apply(q1_op=PI_FE)
    apply(q1_op=PI_EG)
    trace.record("prelude", state)

    emit(1)            # early bin from the f branch
    lose(1, 3)
    trace.record("early_emitted", state)

    if mechanism == "dispersive":
        # early bin reflects off the resonant (chi=0) cavity: pi phase
        m = np.eye(dp, dtype=np.complex128)
        m[1, 1] = -1.0
        apply(p_op=m)

    catch(1)           # Q3 absorbs the early bin
    trace.record("early_caught", state)

    # mid-gate pulses: pi_fe,1 then pi_eg,1, with pi_fe,3
    apply(q1_op=PI_FE)
    apply(q1_op=PI_EG)
    apply(q3_op=PI_FE)
    trace.record("midpoint", state)

    emit(2)            # late bin
    lose(2, 4)
    trace.record("late_emitted", state)

    # photon-Q2 entangler on the late bin
    if mechanism == "switch":
        cz = np.eye(dim, dtype=np.complex128)
        for q1 in range(dq1):
            for q3 in range(dq3):
                k = idx(q1, G, 2, q3)
                cz[k, k] = -1.0
        state = cz @ state
    else:
        disp = np.eye(dim, dtype=np.complex128)
        for q1 in range(dq1):
            for q3 in range(dq3):
                disp[idx(q1, G, 2, q3), idx(q1, G, 2, q3)] = -1j
                disp[idx(q1, E, 2, q3), idx(q1, E, 2, q3)] = 1j
        state = disp @ state
    trace.record("remote_entangler", state)

    catch(2)           # Q3 absorbs the late bin
    trace.record("late_caught", state)

    # final triple on Q3: pi_eg, pi_fe, pi_eg (f->g, e->e, g->f)
    apply(q3_op=PI_EG)
    apply(q3_op=PI_FE)
    apply(q3_op=PI_EG)
    trace.record("final_pulses", state)

    if mechanism == "dispersive":
        # cancel the step-chi S^dagger imprint through Q1 (Appendix S gate)
        apply(q1_op=np.diag([1.0, -1j, 1.0]).astype(np.complex128))
        trace.record("phase_fix", state)

    # heralding and measurement of Q3 in (|e> +- |g>)/sqrt(2), |f> = loss
    tens = state.reshape(dq1, dq2, dp, dq3)
    trace.p_herald = float(np.sum(np.abs(tens[:, :, :, F]) ** 2))
    sgn = 1.0 if outcome == "plus" else -1.0
    proj = (tens[:, :, :, E] + sgn * tens[:, :, :, G]) / np.sqrt(2.0)
    p_out = float(np.sum(np.abs(proj) ** 2))
    trace.p_outcome = p_out
    trace.herald = "success" if p_out > 1e-12 else "photon-lost"
    if outcome == "minus":
        z1 = np.diag([1.0, -1.0, 1.0]).astype(np.complex128)
        proj = np.einsum("ab,bcp->acp", z1, proj)
    if p_out > 1e-12:
        proj = proj / np.sqrt(p_out)
    trace.final_state = proj  # shape (Q1, Q2, photon-slot)
    return trace


def aa_success_two_qubit(trace: ProtocolTrace) -> np.ndarray:
    """(Q1 qubit block x Q2) amplitudes of the conditioned, corrected state."""
    return trace.final_state[:2, :, 0].reshape(4)


def heralded_loss_branch(protocol: str, q: float, amplitudes=(0.5, 0.5, 0.5, 0.5)) -> dict:
    """Heralding statistics for either protocol at loss probability q.

    Returns p_herald (the probability of the loss flag: Q1 in |f> for the
    measurement-free protocol, Q3 in |f> for the ancilla-assisted one) and
    p_success.  For the measurement-free protocol only the branch that emits a
    photon can be lost; for the ancilla-assisted protocol every branch emits
    (early or late), so p_herald = q exactly.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError("loss probability q must be in [0, 1]")
    a, b, c, d = amplitudes
    if protocol == "mf":
        trace = run_measurement_free(a, b, c, d, q=q)
        return {"p_herald": trace.p_herald, "p_success": 1.0 - trace.p_herald,
                "herald_register": "Q1"}
    if protocol == "aa":
        tr_p = run_ancilla_assisted(a, b, c, d, outcome="plus", q=q)
        return {"p_herald": tr_p.p_herald, "p_success": 1.0 - tr_p.p_herald,
                "herald_register": "Q3"}
    raise ValueError("protocol must be 'mf' or 'aa'")


# ---------------------------------------------------------------------------
# loss-induced dephasing channel

def post_loss_state(alpha, beta, gamma, delta, C: complex) -> np.ndarray:
    """Two-qubit state conditioned on the loss herald, for coherence factor C.

    Built from the early/late branch states of the entangled input: with
    p_E = |gamma|^2 + |delta|^2 and p_L = |alpha|^2 + |beta|^2,
    rho = sum_l p_l |Psi_l><Psi_l| + sqrt(p_E p_L) (C |Psi_L><Psi_E| + h.c.).
    """
    if abs(C) > 1.0 + 1e-10:
        raise ValueError(f"|C| = {abs(C)} exceeds 1")
    amps = _normalize_input(alpha, beta, gamma, delta)
    psi_l = np.array([amps[0], amps[1], 0.0, 0.0], dtype=np.complex128)
    psi_e = np.array([0.0, 0.0, amps[2], amps[3]], dtype=np.complex128)
    p_l = float(np.vdot(psi_l, psi_l).real)
    p_e = float(np.vdot(psi_e, psi_e).real)
    rho = np.outer(psi_l, psi_l.conj()) + np.outer(psi_e, psi_e.conj())
    if p_e > 0 and p_l > 0:
        cross = np.outer(psi_l, psi_e.conj()) / np.sqrt(p_e * p_l)
        rho += np.sqrt(p_e * p_l) * (C * cross + np.conj(C) * cross.conj().T)
    return rho


def loss_dephasing_channel(rho_f: np.ndarray, C: complex) -> np.ndarray:
    """Rotate away the known phase of C; the result is a Z1 dephasing channel.

    Applies exp(-i phi Z1 / 2) with phi = arg C to the conditioned state; for
    rho_f built by ``post_loss_state`` the output equals
    (1 - eta)|Psi0><Psi0| + eta Z1 |Psi0><Psi0| Z1 with eta = (1 - |C|)/2.
    """
    if abs(C) > 1.0 + 1e-10:
        raise ValueError(f"|C| = {abs(C)} exceeds 1")
    phi = float(np.angle(C))
    # Z1 = diag(1, 1, -1, -1) in the (q1, q2) product basis g,e
    rot = np.diag(np.exp(-0.5j * phi * np.array([1.0, 1.0, -1.0, -1.0])))
    return rot @ np.asarray(rho_f, dtype=np.complex128) @ rot.conj().T


def dephasing_probability(C: complex) -> float:
    """eta = (1 - |C|)/2."""
    return 0.5 * (1.0 - abs(C))
