"""Command-line front end: protocol-check, emit-check, simulate, sweep, tls.

Physical quantities take unit suffixes (ns, us, ms, s, Hz, kHz, MHz, GHz);
frequencies are ordinary frequencies and are converted to angular internally
(a flag ``--kappa 50MHz`` means kappa/2pi = 50 MHz).  A flat key = value
config file can seed any run, with flags overriding file values.  All CSV
output starts with a comment line recording the package version, a hash of
the effective config, and the seed, so identical inputs give byte-identical
files.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys

import numpy as np

from . import __version__
from .pulse_shaping import (
    gaussian_waveform, emission_envelope, emit_oracle, waveform_overlap,
    mode_match_overlap, IntegrationError,
)
from .ideal_protocol import run_measurement_free, run_ancilla_assisted, \
    mf_success_two_qubit, aa_success_two_qubit
from .lindblad_engine import GateConfig, run_gate_evolution
from .fidelity_metrics import (
    PostSelectedChannel, condition_and_correct, haar_states, CZ_MATRIX,
)
from .lindblad_engine import evolve_channel_basis
from .scaling_analysis import sweep_tau, fit_power_law, DEFAULT_KAPPA_TAU_GRID
from .tls_backaction import (
    SpectralDensity, spectral_overlap_integrals, gaussian_band_report,
    flat_band_coherence,
)

TWO_PI = 2.0 * math.pi

_TIME_UNITS = {"ns": 1e-9, "us": 1e-6, "ms": 1e-3, "s": 1.0}
_FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}


class ConfigError(ValueError):
    """Bad flag, config key, or unit."""


def parse_time(text: str) -> float:
    return _parse_quantity(text, _TIME_UNITS, kind="time")


def parse_frequency(text: str) -> float:
    """Ordinary frequency with suffix -> angular frequency (rad/s)."""
    return TWO_PI * _parse_quantity(text, _FREQ_UNITS, kind="frequency")


def _parse_quantity(text: str, units: dict, kind: str) -> float:
    s = str(text).strip()
    for suffix, scale in sorted(units.items(), key=lambda kv: -len(kv[0])):
        if s.lower().endswith(suffix):
            num = s[: -len(suffix)].strip()
            try:
                value = float(num) * scale
            except ValueError:
                raise ConfigError(f"cannot parse {kind} {text!r}") from None
            break
    else:
        try:
            value = float(s)
        except ValueError:
            raise ConfigError(f"cannot parse {kind} {text!r}") from None
    if value <= 0:
        raise ConfigError(f"{kind} must be positive, got {text!r}")
    return value


KNOWN_KEYS = {
    "kappa", "tau", "t1", "kappa_tau", "seed", "samples", "n_max",
    "spectral_density", "lambda", "gbar", "delta_omega_bar", "tau_sep",
    "j0", "out", "q", "loss_q", "spectral_file",
}


def read_config_file(path: str) -> dict:
    """Flat key = value text, one key per line, # comments; unknown keys rejected."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, val = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in KNOWN_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = val
    return out


_NON_CONFIG_KEYS = {"func", "out", "config", "command"}


def _config_hash(items: dict) -> str:
    kept = {k: v for k, v in items.items() if k not in _NON_CONFIG_KEYS}
    blob = "\n".join(f"{k}={kept[k]}" for k in sorted(kept)).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _csv_header(items: dict, seed) -> str:
    return f"# czlink v{__version__} config={_config_hash(items)} seed={seed}"


def _fmt(x) -> str:
    if isinstance(x, complex):
        return f"{x.real:.17g}{x.imag:+.17g}j"
    return f"{float(x):.17g}"


def _write_csv(path, comment: str, header: list[str], rows) -> None:
    lines = [comment, ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# subcommands

def _print_trace_steps(trace, label: str):
    print(f"per-step states, {label}, input (|gg>+|ge>+|eg>+|ee>)/2:")
    for name, state in trace.steps:
        nz = np.flatnonzero(np.abs(state) > 1e-12)
        amps = ", ".join(f"[{k}] {state[k]:.3f}" for k in nz[:6])
        more = " ..." if nz.size > 6 else ""
        print(f"  {name:18s} {amps}{more}")


def _cmd_protocol_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    singles = [np.array([1, 0]), np.array([0, 1]),
               np.array([1, 1]) / np.sqrt(2), np.array([1, 1j]) / np.sqrt(2)]
    inputs = [np.kron(a, b) for a in singles for b in singles]
    for _ in range(20):
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        inputs.append(v / np.linalg.norm(v))

    uniform = (0.5, 0.5, 0.5, 0.5)
    _print_trace_steps(run_measurement_free(*uniform), "measurement-free")
    _print_trace_steps(run_ancilla_assisted(*uniform), "ancilla-assisted (plus)")
    print()

    def check(label, runner) -> tuple[bool, float]:
        worst = 0.0
        ref_phase = None
        for psi in inputs:
            out = runner(psi)
            target = CZ_MATRIX @ psi
            ov = np.vdot(target, out)
            if abs(abs(ov) - 1.0) > 1e-12:
                worst = max(worst, abs(abs(ov) - 1.0))
            phase = ov / abs(ov)
            if ref_phase is None:
                ref_phase = phase
            worst = max(worst, float(np.max(np.abs(out - (target * ref_phase)))))
        return worst <= 1e-12, worst

    rows = []
    ok_mf, dev_mf = check("measurement-free", lambda p: mf_success_two_qubit(
        run_measurement_free(*p)))
    rows.append(("measurement-free", ok_mf, dev_mf))
    for outcome in ("plus", "minus"):
        ok, dev = check(f"aa-{outcome}", lambda p, o=outcome: aa_success_two_qubit(
            run_ancilla_assisted(*p, outcome=o)))
        rows.append((f"ancilla-assisted/{outcome}", ok, dev))
    for outcome in ("plus", "minus"):
        ok, dev = check(f"aa-disp-{outcome}", lambda p, o=outcome: aa_success_two_qubit(
            run_ancilla_assisted(*p, outcome=o, mechanism="dispersive")))
        rows.append((f"ancilla-assisted-dispersive/{outcome}", ok, dev))

    print(f"protocol-check on {len(inputs)} inputs (tolerance 1e-12, up to one global phase)")
    all_ok = True
    for name, ok, dev in rows:
        print(f"  {name:38s} {'PASS' if ok else 'FAIL'}   max deviation {dev:.2e}")
        all_ok &= ok
    if args.out:
        _write_csv(args.out, _csv_header(vars(args), args.seed),
                   ["protocol", "passed", "max_deviation"],
                   [(n, int(ok), d) for n, ok, d in rows])
    if args.trace_out:
        tr = run_ancilla_assisted(*uniform)
        trace_rows = []
        for name, state in tr.steps:
            for k in np.flatnonzero(np.abs(state) > 1e-12):
                trace_rows.append((name, int(k), state[k].real, state[k].imag))
        _write_csv(args.trace_out, _csv_header(vars(args), args.seed),
                   ["step", "basis_index", "re_amplitude", "im_amplitude"], trace_rows)
    return 0 if all_ok else 1


def _cmd_emit_check(args) -> int:
    kappa = parse_frequency(args.kappa)
    tau = parse_time(args.tau)
    t_total = 16.0 * tau
    u = gaussian_waveform(tau, t_total / 4.0, 0.0, t_total / 2.0, tau / 200.0, tag="E")
    env = emission_envelope(u, kappa)
    out = emit_oracle(env, kappa)
    raw = abs(waveform_overlap(u, out)) ** 2
    matched, delay = mode_match_overlap(u, out, kappa)
    emitted = out.norm_sq()
    print(f"kappa*tau = {kappa * tau:.2f}: raw overlap^2 = {raw:.6f}, "
          f"mode-matched = {matched:.6f} (delay {delay * kappa:.2f}/kappa), "
          f"emitted mass = {emitted:.6f}")
    rows = zip(u.times, u.samples.real, out.samples.real, out.samples.imag,
               np.abs(env.samples))
    _write_csv(args.out, _csv_header(vars(args), "-"),
               ["t", "re_u_target", "re_u_out", "im_u_out", "abs_omega_e"], rows)
    return 0


def _cmd_simulate(args) -> int:
    kappa = parse_frequency(args.kappa)
    tau = parse_time(args.tau)
    gamma = 0.0 if args.t1 is None else 1.0 / parse_time(args.t1)
    cfg = GateConfig(kappa=kappa, tau=tau, gamma=gamma, n_max=args.n_max)
    if args.fidelity:
        channel = PostSelectedChannel(evolve_channel_basis(cfg))
        states = haar_states(args.samples, args.seed)
        vals = [channel.fidelity_sample(p) for p in states]
        sw = [channel.success_weighted_fidelity_sample(p) for p in states]
        pfs = [channel.herald_probability(p) for p in states]
        n = len(vals)
        mean = math.fsum(vals) / n
        stderr = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (n - 1) / n)
        dists = [channel.conditioned(p).branch_trace_distance() for p in states[:16]]
        print(f"post-selected F = {mean:.8f} +- {stderr:.2e}  (n = {n})")
        print(f"success-weighted F = {math.fsum(sw) / n:.8f}")
        print(f"mean herald probability P_f = {math.fsum(pfs) / n:.6f}")
        print(f"branch trace distance (16-sample mean) = {math.fsum(dists) / len(dists):.3e}")
        if args.out:
            rows = [(f, s, p) for f, s, p in zip(vals, sw, pfs)]
            _write_csv(args.out, _csv_header(vars(args), args.seed),
                       ["fidelity_conditioned", "fidelity_success_weighted", "p_f"], rows)
        return 0
    psi = np.array([0.5, 0.5, 0.5, 0.5], dtype=complex)
    run = run_gate_evolution(psi, cfg, record_stride=args.stride)
    traj = run.trajectory
    rows = zip(traj["t"], traj["trace"], traj["p_f"], traj["n_c1"], traj["n_c2"],
               traj["n_c3"], [c.real for c in traj["coh_q1_ge"]],
               [c.imag for c in traj["coh_q1_ge"]])
    _write_csv(args.out, _csv_header(vars(args), args.seed),
               ["t", "trace", "p_f", "n_c1", "n_c2", "n_c3",
                "re_coh_q1_ge", "im_coh_q1_ge"], rows)
    out = condition_and_correct(run.rho_final)
    print(f"p_plus = {out.p_plus:.6f}, p_minus = {out.p_minus:.6f}, p_f = {out.p_f:.6f}")
    return 0


def _cmd_sweep(args) -> int:
    kappa = parse_frequency(args.kappa)
    t1 = math.inf if args.t1 in (None, "inf") else parse_time(args.t1)
    grid = [float(x) for x in args.kappa_tau.split(",")]
    res = sweep_tau(t1, grid, kappa, n_samples=args.samples, seed=args.seed)
    rows = [(kt, (t1 * 1e6 if math.isfinite(t1) else math.inf), e, s, p, c)
            for kt, e, s, p, c in zip(res.kappa_tau, res.epsilon, res.stderr,
                                      res.p_f, res.epsilon_conditioned)]
    _write_csv(args.out, _csv_header(vars(args), args.seed),
               ["kappa_tau", "T1_us", "epsilon", "stderr", "P_f", "epsilon_conditioned"],
               rows)
    if len(res.kappa_tau) >= 4:
        fit = fit_power_law(res.kappa_tau, res.epsilon)
        print(f"power-law fit of epsilon vs kappa*tau: slope = {fit.slope:.4f} "
              f"+- {fit.slope_stderr:.4f}, prefactor = {fit.prefactor:.4g}, "
              f"r^2 = {fit.r_squared:.5f}")
    else:
        print("fewer than 4 grid points; skipping the power-law fit")
    return 0


def _cmd_tls(args) -> int:
    tau = parse_time(args.tau)
    tau_sep = parse_time(args.tau_sep)
    if args.spectral_density == "flat":
        j = SpectralDensity("flat", j0=float(args.j0))
        rep = spectral_overlap_integrals(j, tau, tau_sep)
        closed = flat_band_coherence(tau, tau_sep)
        print(f"flat band: quadrature C = {rep.C:.9f}, closed form = {closed:.9f}")
        lam_tau_sep = 0.0
    elif args.spectral_density == "gaussian":
        lam = parse_frequency(args.lam)
        gbar = float(args.gbar)
        dwb = 0.0 if args.delta_omega_bar is None else parse_frequency(args.delta_omega_bar)
        rep = gaussian_band_report(tau, tau_sep, gbar, lam, dwb)
        lam_tau_sep = lam * tau_sep
    else:
        data = np.loadtxt(args.spectral_file)
        j = SpectralDensity("tabulated", omega_grid=data[:, 0], j_values=data[:, 1])
        rep = spectral_overlap_integrals(j, tau, tau_sep)
        lam_tau_sep = math.nan
    row = [(lam_tau_sep, rep.q, abs(rep.C), rep.phi, rep.eta)]
    _write_csv(args.out, _csv_header(vars(args), "-"),
               ["lambda_tau_sep", "q", "abs_C", "phi", "eta"], row)
    if rep.born_warning:
        print(f"warning: q = {rep.q:.3g} > 0.1, outside the single-absorption regime",
              file=sys.stderr)
    print(f"Lambda*tau_sep = {lam_tau_sep:.4f}  q = {rep.q:.6g}  |C| = {abs(rep.C):.6f}  "
          f"phi = {rep.phi:.6f}  eta = {rep.eta:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="czlink",
                                description="photon-mediated CZ gate simulator")
    p.add_argument("--config", help="flat key = value config file; flags override")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("protocol-check", help="verify both protocols equal CZ exactly")
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--out", help="optional CSV of per-protocol results")
    s.add_argument("--trace-out", dest="trace_out",
                   help="optional CSV of per-step state amplitudes")
    s.set_defaults(func=_cmd_protocol_check)

    s = sub.add_parser("emit-check", help="emission-envelope round trip via the oracle")
    s.add_argument("--kappa", default="50MHz")
    s.add_argument("--tau", default="64ns")
    s.add_argument("--out", default="-")
    s.set_defaults(func=_cmd_emit_check)

    s = sub.add_parser("simulate", help="full cascaded master-equation gate run")
    s.add_argument("--kappa", default="50MHz")
    s.add_argument("--tau", default="64ns")
    s.add_argument("--t1", default=None, help="qubit T1 (e.g. 100us); omit for no decoherence")
    s.add_argument("--n-max", type=int, default=1, dest="n_max")
    s.add_argument("--fidelity", action="store_true",
                   help="Haar-average post-selected fidelity instead of a trajectory")
    s.add_argument("--samples", type=int, default=512)
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--stride", type=int, default=20, help="trajectory sampling stride")
    s.add_argument("--out", default="-")
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("sweep", help="infidelity across a kappa*tau grid at fixed T1")
    s.add_argument("--kappa", default="50MHz")
    s.add_argument("--t1", default=None, help="e.g. 100us; omit or 'inf' for none")
    s.add_argument("--kappa-tau", default=",".join(str(k) for k in DEFAULT_KAPPA_TAU_GRID),
                   dest="kappa_tau")
    s.add_argument("--samples", type=int, default=256)
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--out", default="-")
    s.set_defaults(func=_cmd_sweep)

    s = sub.add_parser("tls", help="TLS-bath loss probability and coherence factor")
    s.add_argument("--spectral-density", choices=("flat", "gaussian", "file"),
                   default="gaussian", dest="spectral_density")
    s.add_argument("--tau", default="12.5ns")
    s.add_argument("--tau-sep", default="100ns", dest="tau_sep")
    s.add_argument("--lambda", default="1.6MHz", dest="lam")
    s.add_argument("--gbar", default="1e4", help="sqrt(sum g_j^2) in rad/s")
    s.add_argument("--delta-omega-bar", default=None, dest="delta_omega_bar")
    s.add_argument("--j0", default="1e3", help="flat J0 in rad/s")
    s.add_argument("--spectral-file", dest="spectral_file",
                   help="two-column text: omega (rad/s), J (rad/s)")
    s.add_argument("--out", default="-")
    s.set_defaults(func=_cmd_tls)
    return p


_INT_KEYS = {"seed", "samples", "n_max"}


def dispatch(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    # pre-scan for --config: file values become defaults, so flags override them
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config:
            mapped = {}
            for key, val in read_config_file(known.config).items():
                attr = {"lambda": "lam", "loss_q": "q"}.get(key, key)
                mapped[attr] = int(val) if attr in _INT_KEYS else val
            parser.set_defaults(**mapped)
        args = parser.parse_args(argv)
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (IntegrationError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())
