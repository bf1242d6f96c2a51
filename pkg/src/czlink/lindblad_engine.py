"""Time-dependent Lindblad integrator for the full cascaded three-cavity gate.

Model: qutrits Q1, Q3 and qubit Q2, each coupled to its own cavity; the three
cavities form a unidirectional cascade carrying the time-bin photon.  The
Hamiltonian combines the cascade bilinears (i/2) sqrt(k_i k_j)(a_i' a_j - h.c.)
for i<j, the f-conditioned Raman drives on Q1 (emission) and Q3 (absorption),
and a stepped dispersive shift chi(t) = (kappa/2) Theta(t - T/2) on Q2's
cavity.  Dissipation: the collective cascade channel L0 = sum sqrt(k_j) a_j
plus relaxation-limited qubit damping at rate Gamma = 1/T1.

The master equation is propagated with fixed-step RK4 on the vectorized
density matrix; the Liouvillian is held as a static sparse part plus two
sparse drive parts scaled by Omega_1(t), Omega_3(t), so a step costs a few
sparse mat-vecs.  For the gate's initial states the dynamics exactly conserve
"at most one photon across the cascade", and an optional reduction to that
sector (144 -> 72 dimensions) is used for parameter sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .tensor_core import (
    G, E, F,
    SubsystemLayout, Operator, DensityMatrix, PureState,
    embed, embed_product, ketbra, lowering, number_op,
)
from .pulse_shaping import (
    Waveform, gaussian_waveform, emission_envelope, absorption_envelope,
    IntegrationError,
)

QUBIT_LABELS = ("Q1", "Q2", "Q3")
CAVITY_LABELS = ("C1", "C2", "C3")


@dataclass(frozen=True)
class GateConfig:
    """All physical and numerical parameters of the gate simulation.

    kappa is the (common) cavity linewidth in angular frequency, tau the
    Gaussian bin width, T the gate window (16 tau unless overridden), gamma
    the common relaxation rate 1/T1.  dt defaults to tau/200 but is capped at
    1/(6 kappa) so the fixed-step RK4 stays comfortably inside its stability
    region at large kappa*tau.
    """

    kappa: float
    tau: float
    T: float | None = None
    gamma: float = 0.0
    n_max: int = 1
    dt: float | None = None
    omega_cap: float | None = None
    eps_floor: float = 1e-12

    def __post_init__(self):
        if self.kappa <= 0 or self.tau <= 0:
            raise ValueError("kappa and tau must be positive")
        if self.gamma < 0:
            raise ValueError("Gamma must be nonnegative")
        if self.T is None:
            object.__setattr__(self, "T", 16.0 * self.tau)
        if self.omega_cap is None:
            object.__setattr__(self, "omega_cap", self.kappa / 5.0)
        if self.dt is None:
            object.__setattr__(self, "dt", min(self.tau / 200.0, 1.0 / (6.0 * self.kappa)))
        if self.dt > self.tau / 100.0:
            raise ValueError(f"dt = {self.dt} exceeds tau/100")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")

    @property
    def kappa_tau(self) -> float:
        return self.kappa * self.tau

    def layout(self) -> SubsystemLayout:
        nc = self.n_max + 1
        return SubsystemLayout((3, nc, 2, nc, 3, nc),
                               ("Q1", "C1", "Q2", "C2", "Q3", "C3"))


@dataclass(frozen=True)
class CollapseSet:
    """Named collapse operators; the qubit channels scale with sqrt(Gamma)."""

    operators: tuple[Operator, ...]
    labels: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.operators)


@dataclass
class GeneratorSchedule:
    """Contiguous integration segments interleaved with instantaneous unitaries.

    segments: list of (t_start, t_end, hamiltonian builder, collapse set);
    instant_events: (time, unitary Operator) applied between segments.
    """

    segments: list
    instant_events: list

    def __post_init__(self):
        for (a, b, _, _), (c, d, _, _) in zip(self.segments, self.segments[1:]):
            if abs(b - c) > 1e-12 * max(abs(b), 1.0):
                raise ValueError("segments must be contiguous")
        bounds = {round(s[0], 15) for s in self.segments} | {round(s[1], 15) for s in self.segments}
        for t, _ in self.instant_events:
            if round(t, 15) not in bounds:
                raise ValueError("instantaneous events only at segment boundaries")


# ---------------------------------------------------------------------------
# operator assembly

def _drive_generator(cfg: GateConfig, which: str) -> Operator:
    """Hermitian drive generator W_j with H_j(t) = Omega_j(t) W_j.

    W_j = i(|g><f|_j a_j' - |f><g|_j a_j) couples |f,0> <-> |g,1| on the
    emitter (Q1) or absorber (Q3) and its own cavity.
    """
    lay = cfg.layout()
    cav = {"Q1": "C1", "Q3": "C3"}[which]
    nc = cfg.n_max + 1
    adag = lowering(nc).conj().T
    term = embed_product({which: ketbra(G, F, 3), cav: adag}, lay).matrix
    w = 1j * (term - term.conj().T)
    return Operator(w.tocsr(), lay, hermitian=True)


def _cascade_hamiltonian(cfg: GateConfig) -> Operator:
    """(i/2) sum_{i<j} sqrt(k_i k_j) (a_i' a_j - h.c.) over the ordered cascade."""
    lay = cfg.layout()
    nc = cfg.n_max + 1
    a = lowering(nc)
    h = sp.csr_matrix((lay.total_dim, lay.total_dim), dtype=np.complex128)
    for ci, cj in (("C1", "C2"), ("C1", "C3"), ("C2", "C3")):
        term = embed_product({ci: a.conj().T, cj: a}, lay).matrix
        h = h + 0.5j * cfg.kappa * (term - term.conj().T)
    return Operator(h.tocsr(), lay, hermitian=True)


def _dispersive_generator(cfg: GateConfig) -> Operator:
    """W_chi = (|e><e| - |g><g|)_2 a_2' a_2; H_2(t) = chi(t) W_chi."""
    lay = cfg.layout()
    nc = cfg.n_max + 1
    sz = ketbra(E, E, 2) - ketbra(G, G, 2)
    return Operator(embed_product({"Q2": sz, "C2": number_op(nc)}, lay).matrix,
                    lay, hermitian=True)


def chi_of_t(t: float, cfg: GateConfig) -> float:
    """Stepped dispersive shift chi(t) = (kappa/2) Theta(t - T/2)."""
    return 0.5 * cfg.kappa if t >= cfg.T / 2.0 else 0.0


def bin_waveforms(cfg: GateConfig, dt: float | None = None) -> tuple[Waveform, Waveform]:
    """Early/late Gaussian bins peaking at T/4 and 3T/4 on their drive windows."""
    if dt is None:
        dt = cfg.dt
    u_e = gaussian_waveform(cfg.tau, cfg.T / 4.0, 0.0, cfg.T / 2.0, dt, tag="E")
    u_l = gaussian_waveform(cfg.tau, 3.0 * cfg.T / 4.0, cfg.T / 2.0, cfg.T, dt, tag="L")
    return u_e, u_l


def drive_envelopes(cfg: GateConfig, dt: float | None = None):
    """((emission E, absorption E), (emission L, absorption L)) on the bin windows."""
    u_e, u_l = bin_waveforms(cfg, dt)
    env = lambda u: (emission_envelope(u, cfg.kappa, cfg.omega_cap, cfg.eps_floor),
                     absorption_envelope(u, cfg.kappa, cfg.omega_cap, cfg.eps_floor))
    return env(u_e), env(u_l)


def omega_drives(t: float, cfg: GateConfig) -> tuple[float, float]:
    """(Omega_1, Omega_3) at time t: emission on Q1, absorption on Q3, per bin window."""
    if t < 0 or t > cfg.T:
        raise ValueError(f"t = {t} outside the gate window [0, {cfg.T}]")
    (em_e, ab_e), (em_l, ab_l) = drive_envelopes(cfg)
    env1, env3 = (em_e, ab_e) if t < cfg.T / 2.0 else (em_l, ab_l)
    i = int(round((t - env1.t_start) / env1.dt))
    i = min(max(i, 0), env1.samples.size - 1)
    return float(env1.samples[i].real), float(env3.samples[i].real)


def build_hamiltonian(t: float, cfg: GateConfig) -> Operator:
    """Full H(t): cascade bilinears + conditioned drives + stepped dispersive shift."""
    om1, om3 = omega_drives(t, cfg)
    h = _cascade_hamiltonian(cfg).matrix \
        + om1 * _drive_generator(cfg, "Q1").matrix \
        + om3 * _drive_generator(cfg, "Q3").matrix \
        + chi_of_t(t, cfg) * _dispersive_generator(cfg).matrix
    return Operator(h.tocsr(), cfg.layout(), hermitian=True)


def build_collapse_ops(cfg: GateConfig) -> CollapseSet:
    """The 11 damping channels: 10 qubit channels plus the collective cascade L0.

    Qubit channels per emitter: sqrt(G)|g><e| and sqrt(G/2)(|e><e| - |g><g|)
    on Q1, Q2, Q3; additionally sqrt(G)|e><f| and sqrt(G/2)(|f><f| - |e><e|)
    on the qutrits Q1 and Q3.  Dephasing is relaxation-limited (factor 2).
    """
    lay = cfg.layout()
    gam = cfg.gamma
    ops, labels = [], []
    nc = cfg.n_max + 1
    a = lowering(nc)
    l0 = sp.csr_matrix((lay.total_dim, lay.total_dim), dtype=np.complex128)
    for c in CAVITY_LABELS:
        l0 = l0 + np.sqrt(cfg.kappa) * embed(a, c, lay).matrix
    ops.append(Operator(l0.tocsr(), lay))
    labels.append("L0")
    for q in QUBIT_LABELS:
        d = 2 if q == "Q2" else 3
        ops.append(embed(np.sqrt(gam) * ketbra(G, E, d), q, lay))
        labels.append(f"relax_eg_{q}")
        ops.append(embed(np.sqrt(gam / 2.0) * (ketbra(E, E, d) - ketbra(G, G, d)), q, lay))
        labels.append(f"dephase_eg_{q}")
        if q != "Q2":
            ops.append(embed(np.sqrt(gam) * ketbra(E, F, d), q, lay))
            labels.append(f"relax_fe_{q}")
            ops.append(embed(np.sqrt(gam / 2.0) * (ketbra(F, F, d) - ketbra(E, E, d)), q, lay))
            labels.append(f"dephase_fe_{q}")
    return CollapseSet(tuple(ops), tuple(labels))


def pi_pulse_unitary(name: str, cfg: GateConfig) -> Operator:
    """Ideal instantaneous pi pulse, e.g. "pi_fe_1"; Q2 has no f level."""
    return Operator(_pi_pulse_on_layout(name, cfg.layout()), cfg.layout())


def _pi_pulse_on_layout(name: str, lay: SubsystemLayout) -> sp.csr_matrix:
    try:
        _, levels, qubit = name.split("_")
        pair = {"eg": (G, E), "fe": (E, F)}[levels]
        lbl = {"1": "Q1", "2": "Q2", "3": "Q3"}[qubit]
    except (ValueError, KeyError):
        raise ValueError(f"unknown pulse name {name!r}; use pi_eg_1, pi_fe_3, ...") from None
    if lbl == "Q2":
        raise ValueError("Q2 is a two-level system; pi pulses act on Q1 and Q3 only")
    m = np.eye(lay.dim_of(lbl), dtype=np.complex128)
    a, b = pair
    m[a, a] = m[b, b] = 0.0
    m[a, b] = m[b, a] = 1.0
    return embed(m, lbl, lay).matrix


def apply_pi_pulses(rho: DensityMatrix, which: list[str]) -> DensityMatrix:
    """Apply named ideal pi pulses, in order, as exact unitaries."""
    m = rho.matrix
    for name in which:
        u = _pi_pulse_on_layout(name, rho.layout)
        m = u @ m @ u.conj().T
    return DensityMatrix(m, rho.layout, normalized=rho.normalized)


# ---------------------------------------------------------------------------
# vectorized Liouvillian propagation (row-major vec: map(A rho B) = kron(A, B^T))

def _spre_spost(a: sp.csr_matrix) -> sp.csr_matrix:
    """Vectorized map of rho -> A rho + rho A^dagger."""
    d = a.shape[0]
    eye = sp.identity(d, dtype=np.complex128, format="csr")
    return (sp.kron(a, eye, format="csr") + sp.kron(eye, a.conj(), format="csr")).tocsr()


def _jump_map(ls) -> sp.csr_matrix:
    """Vectorized map of rho -> sum_k L_k rho L_k^dagger."""
    d = ls[0].shape[0]
    out = sp.csr_matrix((d * d, d * d), dtype=np.complex128)
    for L in ls:
        out = out + sp.kron(L, L.conj(), format="csr")
    return out.tocsr()


class _VecGenerator:
    """Static + drive-scaled sparse Liouvillian pieces for one segment."""

    def __init__(self, h_static: sp.csr_matrix, drive_terms, collapse,
                 vec_sector: np.ndarray | None = None):
        # drive_terms: list of (W sparse Hermitian, envelope on the half-step grid)
        ksum = sp.csr_matrix(h_static.shape, dtype=np.complex128)
        for L in collapse:
            ksum = ksum + L.conj().T @ L
        a_static = (-1j * h_static - 0.5 * ksum).tocsr()
        lv = _spre_spost(a_static) + _jump_map(collapse)
        self.lv_static = _maybe_reduce(lv.tocsr(), vec_sector)
        self.drive_parts = []
        for w, env in drive_terms:
            piece = _spre_spost((-1j * w).tocsr())
            self.drive_parts.append((_maybe_reduce(piece, vec_sector), np.asarray(env, dtype=float)))

    def apply(self, x: np.ndarray, stage: int) -> np.ndarray:
        out = self.lv_static @ x
        for piece, env in self.drive_parts:
            om = env[stage]
            if om != 0.0:
                out += om * (piece @ x)
        return out


def _maybe_reduce(m: sp.csr_matrix, vec_sector: np.ndarray | None) -> sp.csr_matrix:
    if vec_sector is None:
        return m
    return m[np.ix_(vec_sector, vec_sector)].tocsr()


def single_photon_sector(layout: SubsystemLayout, max_total: int = 1) -> np.ndarray:
    """Basis indices with at most ``max_total`` photons across all cavities.

    max_total = 1 is exact for the gate: the f-conditioned drives pair |f,0>
    with |g,1> and no reachable component ever holds a second photon
    (validated against the full space in the test suite).  max_total = 2 keeps
    the two-photon block and is used by the truncation-convergence check.
    """
    cav_axes = [i for i, lbl in enumerate(layout.labels) if lbl.startswith("C")]
    grids = np.meshgrid(*[np.arange(d) for d in layout.dims], indexing="ij")
    total = sum(grids[i] for i in cav_axes)
    return np.flatnonzero((total <= max_total).ravel())


def _sector_vec_indices(sector: np.ndarray, d: int) -> np.ndarray:
    return (sector[:, None] * d + sector[None, :]).ravel()


def _rk4_vec(x: np.ndarray, gen: _VecGenerator, n_steps: int, dt: float,
             sym=None, record=None) -> np.ndarray:
    """Fixed-step RK4 on vectorized density matrices (columns of x).

    Drive envelopes are tabulated on the half-step grid: step i uses stages
    (2i, 2i+1, 2i+1, 2i+2).
    """
    for i in range(n_steps):
        s0 = 2 * i
        k1 = gen.apply(x, s0)
        k2 = gen.apply(x + (0.5 * dt) * k1, s0 + 1)
        k3 = gen.apply(x + (0.5 * dt) * k2, s0 + 1)
        k4 = gen.apply(x + dt * k3, s0 + 2)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if sym is not None:
            x = sym(x)
        if record is not None:
            record(i + 1, x)
    return x


def _hermitize_columns(dim: int, cols) -> "callable":
    """Column symmetrizer: rho <- (rho + rho^dagger)/2 for the named columns."""

    def sym(x: np.ndarray) -> np.ndarray:
        for k in cols:
            r = x[:, k].reshape(dim, dim)
            x[:, k] = (0.5 * (r + r.conj().T)).ravel()
        return x

    return sym


def _segment_generator(cfg: GateConfig, segment: str, n_steps: int,
                       sector: np.ndarray | None) -> _VecGenerator:
    """Vectorized generator for the E or L half-gate, envelopes on 2*n_steps+1 points."""
    lay = cfg.layout()
    dt_half = (cfg.T / 2.0) / (2 * n_steps)
    (em_e, ab_e), (em_l, ab_l) = drive_envelopes(cfg, dt_half)
    h_static = _cascade_hamiltonian(cfg).matrix
    if segment == "L":
        h_static = h_static + 0.5 * cfg.kappa * _dispersive_generator(cfg).matrix
        env1, env3 = em_l.samples.real, ab_l.samples.real
    else:
        env1, env3 = em_e.samples.real, ab_e.samples.real
    collapse = [op.matrix for op in build_collapse_ops(cfg).operators
                if op.matrix.nnz and abs(op.matrix).max() > 0]
    w1 = _drive_generator(cfg, "Q1").matrix
    w3 = _drive_generator(cfg, "Q3").matrix
    vec_sector = None if sector is None else _sector_vec_indices(sector, lay.total_dim)
    return _VecGenerator(h_static, [(w1, env1), (w3, env3)], collapse, vec_sector)


def _to_vec(rho: np.ndarray, sector: np.ndarray | None, d: int) -> np.ndarray:
    if sector is None:
        return rho.reshape(d * d, 1).copy()
    return rho[np.ix_(sector, sector)].reshape(-1, 1).copy()


def _from_vec(x: np.ndarray, sector: np.ndarray | None, d: int) -> np.ndarray:
    if sector is None:
        return x.reshape(d, d)
    ns = sector.size
    full = np.zeros((d, d), dtype=np.complex128)
    full[np.ix_(sector, sector)] = x.reshape(ns, ns)
    return full


def integrate_segment(rho: DensityMatrix, t0: float, t1: float, cfg: GateConfig,
                      max_halvings: int = 4) -> DensityMatrix:
    """Propagate rho through [t0, t1] of the gate window with fixed-step RK4.

    t0 and t1 must lie in the same drive window ([0, T/2] or [T/2, T]); split
    at the pulse boundary to cross it.  Trace drift beyond 1e-6 triggers dt
    halving (up to ``max_halvings``), then a hard IntegrationError.
    """
    if t1 <= t0:
        raise ValueError("t1 must exceed t0")
    half = cfg.T / 2.0
    if not (t1 <= half + 1e-12 or t0 >= half - 1e-12):
        raise ValueError("segment must not straddle T/2; split at the pulse boundary")
    segment = "E" if t1 <= half + 1e-12 else "L"
    dt = cfg.dt
    drift = np.inf
    for _ in range(max_halvings + 1):
        out = _integrate_span(rho.matrix, t0, t1, cfg, segment, dt)
        drift = abs(out.trace().real - rho.matrix.trace().real)
        if drift <= 1e-6:
            out = 0.5 * (out + out.conj().T)
            return DensityMatrix(out, rho.layout, normalized=rho.normalized, validate=False)
        dt /= 2.0
    raise IntegrationError(f"trace drift {drift:.2e} persists after {max_halvings} dt halvings")


def _integrate_span(mat: np.ndarray, t0: float, t1: float, cfg: GateConfig,
                    segment: str, dt: float) -> np.ndarray:
    lay = cfg.layout()
    d = lay.total_dim
    n_steps = max(1, int(round((t1 - t0) / dt)))
    dt_eff = (t1 - t0) / n_steps
    (em_e, ab_e), (em_l, ab_l) = drive_envelopes(cfg, cfg.dt)
    src1, src3 = (em_e, ab_e) if segment == "E" else (em_l, ab_l)
    ts = t0 + 0.5 * dt_eff * np.arange(2 * n_steps + 1)
    env1 = np.interp(ts, src1.times, src1.samples.real)
    env3 = np.interp(ts, src3.times, src3.samples.real)
    h_static = _cascade_hamiltonian(cfg).matrix
    if segment == "L":
        h_static = h_static + 0.5 * cfg.kappa * _dispersive_generator(cfg).matrix
    collapse = [op.matrix for op in build_collapse_ops(cfg).operators
                if op.matrix.nnz and abs(op.matrix).max() > 0]
    w1 = _drive_generator(cfg, "Q1").matrix
    w3 = _drive_generator(cfg, "Q3").matrix
    gen = _VecGenerator(h_static, [(w1, env1), (w3, env3)], collapse, None)
    x = mat.reshape(d * d, 1).copy()
    x = _rk4_vec(x, gen, n_steps, dt_eff, sym=_hermitize_columns(d, [0]))
    return x.reshape(d, d)


def propagate_lindblad(rho0: np.ndarray, hamiltonian, collapse_ops, t_total: float,
                       dt: float) -> np.ndarray:
    """Generic fixed-step RK4 Lindblad propagation with constant generators.

    Utility for small analytic checks (single-emitter decay, cavity cascades);
    the gate itself goes through run_gate_evolution.
    """
    h = sp.csr_matrix(np.asarray(hamiltonian, dtype=np.complex128)) \
        if not sp.issparse(hamiltonian) else hamiltonian.tocsr()
    ls = [sp.csr_matrix(np.asarray(L, dtype=np.complex128)) if not sp.issparse(L) else L.tocsr()
          for L in collapse_ops]
    if not ls:
        ls = [sp.csr_matrix(h.shape, dtype=np.complex128)]
    n_steps = max(1, int(round(t_total / dt)))
    gen = _VecGenerator(h, [(sp.csr_matrix(h.shape, dtype=np.complex128),
                             np.zeros(2 * n_steps + 1))], ls, None)
    d = h.shape[0]
    x = rho0.reshape(d * d, 1).astype(np.complex128).copy()
    x = _rk4_vec(x, gen, n_steps, t_total / n_steps, sym=_hermitize_columns(d, [0]))
    return x.reshape(d, d)


PRELUDE_PULSES = ("pi_fe_1", "pi_eg_1")
MIDGATE_PULSES = ("pi_fe_1", "pi_eg_1", "pi_fe_3")
FINAL_Q3_PULSES = ("pi_eg_3", "pi_fe_3", "pi_eg_3")


@dataclass
class GateRun:
    """Final state of one gate evolution plus optional midpoint and trajectory."""

    rho_final: DensityMatrix
    rho_midpoint: DensityMatrix | None = None
    trajectory: dict | None = None


def _initial_vec(psi2q: np.ndarray, cfg: GateConfig) -> np.ndarray:
    """pi-pulse prelude applied to |psi> x |g>_3 x vacuum, as a full-space ket."""
    lay = cfg.layout()
    nc = cfg.n_max + 1
    amps = np.asarray(psi2q, dtype=np.complex128).ravel()
    if amps.size != 4:
        raise ValueError("two-qubit input must have 4 amplitudes (gg, ge, eg, ee)")
    nrm = np.linalg.norm(amps)
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError("two-qubit input must be normalized")
    vac = np.zeros(nc, dtype=np.complex128)
    vac[0] = 1.0
    q3 = np.zeros(3, dtype=np.complex128)
    q3[G] = 1.0
    ket = np.zeros(lay.total_dim, dtype=np.complex128)
    for k, (l1, l2) in enumerate([(G, G), (G, E), (E, G), (E, E)]):
        v1 = np.zeros(3, dtype=np.complex128)
        v1[l1] = 1.0
        v2 = np.zeros(2, dtype=np.complex128)
        v2[l2] = 1.0
        comp = np.kron(np.kron(np.kron(np.kron(np.kron(v1, vac), v2), vac), q3), vac)
        ket += amps[k] * comp
    for name in PRELUDE_PULSES:
        ket = _pi_pulse_on_layout(name, lay) @ ket
    return ket


def run_gate_evolution(
    psi_in,
    cfg: GateConfig,
    sector_reduction: bool = True,
    sector_max_photons: int = 1,
    include_final_ancilla_pulses: bool = True,
    return_midpoint: bool = False,
    record_stride: int | None = None,
) -> GateRun:
    """Evolve a two-qubit input through the full ancilla-assisted gate.

    Sequence: pi-pulse prelude on Q1 (pi_fe then pi_eg), early-bin half-gate,
    midgate pulses (pi_fe,1, pi_eg,1, pi_fe,3), late-bin half-gate with the
    dispersive step on, and (by default) the final Q3 triple that routes the
    loss branch to |f>_3.  Returns the full-register density matrix at t = T.

    ``psi_in`` may be a 4-amplitude array (gg, ge, eg, ee) or a PureState on
    a (2, 2) layout.
    """
    if isinstance(psi_in, PureState):
        psi_in = psi_in.vector
    lay = cfg.layout()
    d = lay.total_dim
    ket = _initial_vec(psi_in, cfg)
    rho0 = np.outer(ket, ket.conj())

    sector = single_photon_sector(lay, sector_max_photons) if sector_reduction else None
    if sector is not None:
        mask = np.ones(d, dtype=bool)
        mask[sector] = False
        if np.abs(ket[mask]).max(initial=0.0) > 0:
            raise ValueError("initial state leaves the single-photon sector")
    dim_eff = d if sector is None else sector.size
    sym = _hermitize_columns(dim_eff, [0])

    traj = {"t": [], "trace": [], "p_f": [], "n_c1": [], "n_c2": [], "n_c3": [],
            "coh_q1_ge": []} if record_stride else None

    n_steps = int(round((cfg.T / 2.0) / cfg.dt))
    dt_step = (cfg.T / 2.0) / n_steps

    x = _to_vec(rho0, sector, d)
    gen_e = _segment_generator(cfg, "E", n_steps, sector)
    rec = _make_recorder(traj, cfg, sector, lay, 0.0, dt_step, record_stride)
    x = _rk4_vec(x, gen_e, n_steps, dt_step, sym=sym, record=rec)

    rho_half = _from_vec(x, sector, d)
    for name in MIDGATE_PULSES:
        u = _pi_pulse_on_layout(name, lay)
        rho_half = u @ rho_half @ u.conj().T
    rho_mid = DensityMatrix(rho_half, lay, validate=False) if return_midpoint else None

    x = _to_vec(rho_half, sector, d)
    gen_l = _segment_generator(cfg, "L", n_steps, sector)
    rec = _make_recorder(traj, cfg, sector, lay, cfg.T / 2.0, dt_step, record_stride)
    x = _rk4_vec(x, gen_l, n_steps, dt_step, sym=sym, record=rec)

    rho_t = _from_vec(x, sector, d)
    if include_final_ancilla_pulses:
        for name in FINAL_Q3_PULSES:
            u = _pi_pulse_on_layout(name, lay)
            rho_t = u @ rho_t @ u.conj().T
    rho_t = 0.5 * (rho_t + rho_t.conj().T)
    final = DensityMatrix(rho_t, lay, validate=False)
    drift = abs(final.trace - 1.0)
    if drift > 1e-6:
        raise IntegrationError(f"trace drift {drift:.2e} over the gate; reduce dt")
    return GateRun(final, rho_mid, traj)


def _make_recorder(traj, cfg: GateConfig, sector, lay: SubsystemLayout,
                   t_offset: float, dt_step: float, stride):
    if traj is None or not stride:
        return None
    d = lay.total_dim
    proj_f3 = embed(ketbra(F, F, 3), "Q3", lay).matrix
    nums = [embed(number_op(cfg.n_max + 1), c, lay).matrix for c in CAVITY_LABELS]
    coh = embed(ketbra(G, E, 3), "Q1", lay).matrix

    def record(step: int, x: np.ndarray):
        if step % stride:
            return
        rho = _from_vec(x[:, :1], sector, d)
        traj["t"].append(t_offset + step * dt_step)
        traj["trace"].append(float(rho.trace().real))
        traj["p_f"].append(float(proj_f3.multiply(rho.T).sum().real))
        for key, op in zip(("n_c1", "n_c2", "n_c3"), nums):
            traj[key].append(float(op.multiply(rho.T).sum().real))
        traj["coh_q1_ge"].append(complex(coh.multiply(rho.T).sum()))

    return record


# ---------------------------------------------------------------------------
# channel-basis evolution: the raw material for Haar-averaged fidelity

TWO_QUBIT_BASIS = [(G, G), (G, E), (E, G), (E, E)]


@dataclass
class ChannelBasis:
    """Final-time matrices for the 16 two-qubit basis inputs |i><j|.

    Any input |psi><psi| evolves to sum_ij c_i c_j* final[i][j] by linearity
    of the master equation; the post-selected channel is reconstructed per
    sample from these.
    """

    cfg: GateConfig
    final: list

    def compose(self, psi: np.ndarray) -> np.ndarray:
        c = np.asarray(psi, dtype=np.complex128).ravel()
        d = self.final[0][0].shape[0]
        out = np.zeros((d, d), dtype=np.complex128)
        for i in range(4):
            for j in range(4):
                w = c[i] * np.conj(c[j])
                if w != 0.0:
                    out += w * self.final[i][j]
        return out


def evolve_channel_basis(cfg: GateConfig, sector_reduction: bool = True,
                         sector_max_photons: int = 1,
                         include_final_ancilla_pulses: bool = True) -> ChannelBasis:
    """Evolve the 10 independent |i><j| (i <= j) initial matrices in one batch."""
    lay = cfg.layout()
    d = lay.total_dim
    kets = []
    for k in range(4):
        amps = np.zeros(4, dtype=np.complex128)
        amps[k] = 1.0
        kets.append(_initial_vec(amps, cfg))
    sector = single_photon_sector(lay, sector_max_photons) if sector_reduction else None
    dim_eff = d if sector is None else sector.size

    pairs = [(i, j) for i in range(4) for j in range(i, 4)]
    cols = [_to_vec(np.outer(kets[i], kets[j].conj()), sector, d) for (i, j) in pairs]
    x = np.hstack(cols)
    sym = _hermitize_columns(dim_eff, [k for k, (i, j) in enumerate(pairs) if i == j])

    n_steps = int(round((cfg.T / 2.0) / cfg.dt))
    dt_step = (cfg.T / 2.0) / n_steps

    gen_e = _segment_generator(cfg, "E", n_steps, sector)
    x = _rk4_vec(x, gen_e, n_steps, dt_step, sym=sym)
    x = _apply_unitary_columns(x, [_pi_pulse_on_layout(n, lay) for n in MIDGATE_PULSES],
                               sector, dim_eff)
    gen_l = _segment_generator(cfg, "L", n_steps, sector)
    x = _rk4_vec(x, gen_l, n_steps, dt_step, sym=sym)
    if include_final_ancilla_pulses:
        x = _apply_unitary_columns(x, [_pi_pulse_on_layout(n, lay) for n in FINAL_Q3_PULSES],
                                   sector, dim_eff)

    final = [[None] * 4 for _ in range(4)]
    for col, (i, j) in enumerate(pairs):
        mat = _from_vec(x[:, col:col + 1], sector, d)
        final[i][j] = mat
        if i != j:
            final[j][i] = mat.conj().T
    return ChannelBasis(cfg, final)


def _apply_unitary_columns(x: np.ndarray, unitaries, sector, dim_eff: int) -> np.ndarray:
    for u in unitaries:
        u_eff = u if sector is None else u[np.ix_(sector, sector)].tocsr()
        new = np.empty_like(x)
        for k in range(x.shape[1]):
            r = x[:, k].reshape(dim_eff, dim_eff)
            new[:, k] = (u_eff @ (u_eff @ r.conj().T).conj().T).ravel()
        x = new
    return x
