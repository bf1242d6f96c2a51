"""Quasimode waveforms and the Raman drive envelopes that emit or absorb them.

The emission envelope follows Omega_e(t) = (sqrt(kappa)/2) u(t) / sqrt(tail mass),
the absorption envelope the mirror image with the leading cumulative mass.  Both
diverge in a Gaussian tail, so the magnitude is clamped at ``omega_cap``
(default kappa/5) and the mass in the denominator floored at ``eps_floor``.

``emit_oracle`` integrates the three-state single-emitter master equation
(states g0, g1, f0 with cavity decay kappa) and reads the emitted waveform off
the g1,g0 coherence; it is the independent check that a designed envelope
actually produces its target mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORMALIZATION_ATOL = 1e-6
DEFAULT_POINTS_PER_TAU = 200


class GridError(ValueError):
    """Grid too short for the requested waveform, or mismatched grids."""


class RegimeError(ValueError):
    """Parameter combination outside the validity regime (e.g. kappa*tau < 1)."""


class IntegrationError(RuntimeError):
    """Master-equation integration went unstable."""


@dataclass(frozen=True)
class Waveform:
    """Sampled quasimode u(t) on a uniform grid (units time^-1/2)."""

    samples: np.ndarray
    t_start: float
    dt: float
    tag: str = "generic"          # "E" | "L" | "generic"
    tau: float | None = None
    t_peak: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.complex128))

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.samples.size)

    def norm_sq(self) -> float:
        return float(np.trapezoid(np.abs(self.samples) ** 2, dx=self.dt))

    def shifted(self, offset: float, tag: str | None = None) -> "Waveform":
        return Waveform(
            self.samples.copy(),
            self.t_start + offset,
            self.dt,
            tag if tag is not None else self.tag,
            self.tau,
            None if self.t_peak is None else self.t_peak + offset,
        )


@dataclass(frozen=True)
class DriveEnvelope:
    """Sampled drive Omega(t) on the same grid as its waveform."""

    samples: np.ndarray
    t_start: float
    dt: float
    kind: str                     # "emission" | "absorption"
    omega_cap: float

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.complex128))
        peak = float(np.max(np.abs(self.samples))) if self.samples.size else 0.0
        if peak > self.omega_cap * (1 + 1e-12):
            raise ValueError(f"envelope magnitude {peak} exceeds cap {self.omega_cap}")

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.samples.size)


@dataclass(frozen=True)
class TimeBinConfig:
    """Time-bin geometry: bin width tau, separation tau_sep, gate window T."""

    tau: float
    kappa: float
    T: float | None = None
    tau_sep: float | None = None

    def __post_init__(self):
        if self.T is None:
            object.__setattr__(self, "T", 16.0 * self.tau)
        if self.tau_sep is None:
            object.__setattr__(self, "tau_sep", self.T / 2.0)
        if self.kappa * self.tau < 1.0:
            raise RegimeError(
                f"kappa*tau = {self.kappa * self.tau:.3f} < 1: time-bin phase gate regime violated"
            )


def gaussian_waveform(
    tau: float,
    t_peak: float,
    t_start: float,
    t_end: float,
    dt: float | None = None,
    tag: str = "generic",
) -> Waveform:
    """Normalized Gaussian quasimode u(t) = exp(-(t-t_peak)^2/2 tau^2) / (pi^{1/4} sqrt(tau)).

    The analytic mass outside [t_start, t_end] must not exceed 1e-6; the
    sampled waveform is renormalized on the discrete grid.
    """
    if dt is None:
        dt = tau / DEFAULT_POINTS_PER_TAU
    from scipy.special import erfc

    deficit = 0.5 * erfc((t_peak - t_start) / tau) + 0.5 * erfc((t_end - t_peak) / tau)
    if deficit > NORMALIZATION_ATOL:
        raise GridError(
            f"grid [{t_start}, {t_end}] misses {deficit:.2e} of the waveform mass "
            f"(limit {NORMALIZATION_ATOL})"
        )
    n = int(round((t_end - t_start) / dt)) + 1
    t = t_start + dt * np.arange(n)
    u = np.exp(-((t - t_peak) ** 2) / (2.0 * tau * tau)) / (np.pi ** 0.25 * np.sqrt(tau))
    u = u / np.sqrt(np.trapezoid(np.abs(u) ** 2, dx=dt))
    return Waveform(u, t_start, dt, tag, tau, t_peak)


def _cumulative_mass(u: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoidal cumulative of |u|^2 from the grid start."""
    p = np.abs(u) ** 2
    seg = 0.5 * (p[1:] + p[:-1]) * dt
    return np.concatenate([[0.0], np.cumsum(seg)])


def emission_envelope(
    u: Waveform,
    kappa: float,
    omega_cap: float | None = None,
    eps_floor: float = 1e-12,
) -> DriveEnvelope:
    """Drive that emits a photon into quasimode u: (sqrt(k)/2) u / sqrt(remaining mass)."""
    _check_regime(u, kappa)
    if omega_cap is None:
        omega_cap = kappa / 5.0
    cum = _cumulative_mass(u.samples, u.dt)
    tail = np.clip(cum[-1] - cum, eps_floor, None)
    om = 0.5 * np.sqrt(kappa) * u.samples / np.sqrt(tail)
    om = _clamp(om, omega_cap)
    return DriveEnvelope(om, u.t_start, u.dt, "emission", omega_cap)


def absorption_envelope(
    u: Waveform,
    kappa: float,
    omega_cap: float | None = None,
    eps_floor: float = 1e-12,
) -> DriveEnvelope:
    """Drive that absorbs a photon in quasimode u: (sqrt(k)/2) u / sqrt(accumulated mass)."""
    _check_regime(u, kappa)
    if omega_cap is None:
        omega_cap = kappa / 5.0
    cum = _cumulative_mass(u.samples, u.dt)
    lead = np.clip(cum, eps_floor, None)
    om = 0.5 * np.sqrt(kappa) * u.samples / np.sqrt(lead)
    om = _clamp(om, omega_cap)
    return DriveEnvelope(om, u.t_start, u.dt, "absorption", omega_cap)


def _check_regime(u: Waveform, kappa: float):
    if u.tau is not None and kappa * u.tau < 1.0:
        raise RegimeError(f"kappa*tau = {kappa * u.tau:.3f} < 1: envelope formulas invalid")


def _clamp(om: np.ndarray, cap: float) -> np.ndarray:
    mag = np.abs(om)
    over = mag > cap
    if np.any(over):
        om = om.copy()
        om[over] *= cap / mag[over]
    return om


def clamp_onset(envelope: DriveEnvelope, rel: float = 1.0 - 1e-9) -> np.ndarray:
    """Times where the envelope sits at its cap (diagnostic for the clamp region)."""
    t = envelope.times
    return t[np.abs(envelope.samples) >= rel * envelope.omega_cap]


def emit_oracle(envelope: DriveEnvelope, kappa: float) -> Waveform:
    """Integrate the single-emitter master equation and return the emitted waveform.

    Basis (g0, g1, f0); H couples f0 <-> g1 with strength Omega(t), the cavity
    decays at rate kappa.  The output mode is u_out(t) = sqrt(kappa)
    rho_{g1,g0}(t) / rho_{f0,g0}(0), evaluated from an initial (|g0>+|f0>)/sqrt(2).
    """
    om = envelope.samples
    n = om.size
    dt = envelope.dt
    # midpoint drive values for the RK4 interior stages
    om_mid = 0.5 * (om[:-1] + om[1:])

    a = np.zeros((3, 3), dtype=np.complex128)
    a[0, 1] = 1.0
    L = np.sqrt(kappa) * a
    LdL = L.conj().T @ L
    k_g1f0 = np.zeros((3, 3), dtype=np.complex128)
    k_g1f0[1, 2] = 1.0

    def rhs(r: np.ndarray, drive: complex) -> np.ndarray:
        h = 1j * drive * k_g1f0 - 1j * np.conj(drive) * k_g1f0.conj().T
        out = -1j * (h @ r - r @ h)
        out += L @ r @ L.conj().T - 0.5 * (LdL @ r + r @ LdL)
        return out

    v = np.array([1.0, 0.0, 1.0], dtype=np.complex128) / np.sqrt(2.0)
    rho = np.outer(v, v.conj())
    coh0 = rho[2, 0]
    u_out = np.empty(n, dtype=np.complex128)
    for i in range(n - 1):
        u_out[i] = np.sqrt(kappa) * rho[1, 0] / coh0
        k1 = rhs(rho, om[i])
        k2 = rhs(rho + 0.5 * dt * k1, om_mid[i])
        k3 = rhs(rho + 0.5 * dt * k2, om_mid[i])
        k4 = rhs(rho + dt * k3, om[i + 1])
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
        tr = rho.trace().real
        if not np.isfinite(tr) or abs(tr - 1.0) > 1e-3:
            raise IntegrationError(f"trace drifted to {tr} at step {i}; reduce dt")
    u_out[-1] = np.sqrt(kappa) * rho[1, 0] / coh0
    return Waveform(u_out, envelope.t_start, dt, "generic", None, None)


def waveform_overlap(u1: Waveform, u2: Waveform) -> complex:
    """Trapezoidal integral of u1*(t) u2(t); grids must coincide."""
    if u1.samples.size != u2.samples.size or abs(u1.dt - u2.dt) > 1e-15 * max(u1.dt, u2.dt) \
            or abs(u1.t_start - u2.t_start) > 1e-9 * u1.dt:
        raise GridError("waveform grids do not match")
    return complex(np.trapezoid(np.conj(u1.samples) * u2.samples, dx=u1.dt))


def mode_match_overlap(target: Waveform, emitted: Waveform, kappa: float) -> tuple[float, float]:
    """Squared overlap of an emitted mode with its target, mode-matched in time.

    The emitted wavepacket is defined up to the propagation reference point
    along the line (the cavity response retards it by about 2/kappa), so the
    overlap is maximized over a single retardation of the target.  Returns
    (|overlap|^2 at the optimum, optimal delay).
    """
    if target.samples.size != emitted.samples.size:
        raise GridError("waveform grids do not match")
    t = target.times

    def neg_ov(s: float) -> float:
        shifted = np.interp(t - s, t, target.samples.real, left=0.0, right=0.0).astype(np.complex128)
        if np.iscomplexobj(target.samples) and np.any(target.samples.imag):
            shifted = shifted + 1j * np.interp(t - s, t, target.samples.imag, left=0.0, right=0.0)
        return -abs(np.trapezoid(np.conj(shifted) * emitted.samples, dx=target.dt)) ** 2

    from scipy.optimize import minimize_scalar

    res = minimize_scalar(neg_ov, bounds=(0.0, 8.0 / kappa), method="bounded",
                          options={"xatol": 1e-4 / kappa})
    return -float(res.fun), float(res.x)


def window_masses(u: Waveform) -> tuple[float, float]:
    """(mass on the grid, analytic mass missed outside it) for a Gaussian waveform."""
    if u.tau is None or u.t_peak is None:
        raise ValueError("window_masses requires a tagged Gaussian waveform")
    from scipy.special import erfc

    t_end = u.t_start + u.dt * (u.samples.size - 1)
    deficit = 0.5 * erfc((u.t_peak - u.t_start) / u.tau) + 0.5 * erfc((t_end - u.t_peak) / u.tau)
    return u.norm_sq(), float(deficit)
