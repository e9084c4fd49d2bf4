"""Dispatch a RunConfig to the physics modules and collect a ResultTable."""

from __future__ import annotations

import itertools
import multiprocessing as mp
import signal
import warnings
from contextlib import contextmanager

import numpy as np
from threadpoolctl import threadpool_limits

from .. import __version__
from ..donors import (MechanicalMode, gradient_coupling, interp, load_profile, load_species,
                      lowest_field_transition, transition_gradient)
from ..errors import SpinBusError
from ..gates import optimal_gate_search
from ..models import SystemSpec, TwoQubitSpec, dispersive_gate_time
from ..spectra import analytic_shift, eigen_shift, mechanical_peak, threshold_search
from .config import RunConfig
from .table import ResultTable

SCHEMAS = {
    "eigen-map": [("Omega_R", "Hz"), ("delta_nu", "Hz"), ("shift_Hz", "Hz"), ("status", "")],
    "shift-sweep": [("lam", "Hz"), ("shift_Hz", "Hz"), ("eigen_shift_Hz", "Hz"), ("analytic_Hz", "Hz"),
                    ("width_Hz", "Hz"), ("status", "")],
    "threshold-map": [("delta_R", "Hz"), ("delta_nu", "Hz"), ("lam_min", "Hz"), ("shift_at_min", "Hz"),
                      ("evaluations", ""), ("status", "")],
    "gate-sweep": [("lam", "Hz"), ("delta_R", "Hz"), ("detuning_ratio", ""), ("fidelity", ""),
                   ("fidelity_uncompensated", ""), ("t_opt", "s"), ("t_star", "s"), ("status", "")],
    "gamma-sweep": [("gamma_pct", "%"), ("fidelity", ""), ("fidelity_uncompensated", ""), ("t_opt", "s"),
                    ("t_star", "s"), ("status", "")],
    "donor-coupling": [("distance", "m"), ("gradient", "T/m"), ("df_dB", "Hz/T"), ("B_bias", "T"),
                       ("lam", "Hz"), ("status", "")],
    "spectrum": [("freq", "Hz"), ("S_bar", "1/Hz"), ("status", "")],
}

NAN = float("nan")


class PointTimeout(Exception):
    pass


@contextmanager
def _alarm(seconds):
    """SIGALRM-based timeout; a no-op where alarms are unavailable."""
    if not hasattr(signal, "SIGALRM"):
        yield
        return

    def handler(signum, frame):
        raise PointTimeout()

    try:
        old = signal.signal(signal.SIGALRM, handler)
    except ValueError:  # not in the main thread
        yield
        return
    signal.setitimer(signal.ITIMER_REAL, seconds)
    try:
        yield
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)
        signal.signal(signal.SIGALRM, old)


def _n_fock(value):
    return None if not value else int(value)


def _qm_spec(s, lam, delta_R, delta_nu=0.0):
    return SystemSpec.with_reference_rates(s["omega_m"], s["omega_m"] + delta_R, lam, delta_nu=delta_nu,
                                           n_fock=int(s["n_fock"]), n_th=s.get("n_th", 0.0),
                                           rate_scale=s.get("rate_scale", 1.0))


def _gate_search(spec, srch, gamma_pct):
    t_star = dispersive_gate_time(spec)
    grid = np.linspace(0.0, srch["t_span"] * t_star, int(srch["n_times"]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return optimal_gate_search(spec, grid, compensate=srch["compensate"], refine=srch["refine"],
                                   gamma_pct=gamma_pct)


def points(cfg: RunConfig) -> list:
    g = cfg.grid
    if cfg.kind == "eigen-map":
        return [dict(Omega_R=a, delta_nu=b) for a, b in itertools.product(g["Omega_R"], g["delta_nu"])]
    if cfg.kind == "shift-sweep":
        return [dict(lam=v) for v in g["lam"]]
    if cfg.kind == "threshold-map":
        return [dict(delta_R=a, delta_nu=b) for a, b in itertools.product(g["delta_R"], g["delta_nu"])]
    if cfg.kind == "gate-sweep":
        if "delta_R" in g:
            return [dict(lam=l, delta_R=d) for l, d in itertools.product(g["lam"], g["delta_R"])]
        return [dict(lam=l, delta_R=r * l) for l, r in itertools.product(g["lam"], g["detuning_ratio"])]
    if cfg.kind == "gamma-sweep":
        return [dict(gamma_pct=v) for v in g["gamma_pct"]]
    if cfg.kind == "donor-coupling":
        return [dict(distance=v) for v in g["distance"]]
    if cfg.kind == "spectrum":
        return [dict()]
    raise ValueError(cfg.kind)


def evaluate(kind: str, s: dict, srch: dict, p: dict) -> list:
    """Rows (lists ordered as ``SCHEMAS[kind]`` minus status) for one sweep point."""
    if kind == "eigen-map":
        spec = SystemSpec(omega_m=s["omega_m"], Omega_R=p["Omega_R"], lam=s["lam"], delta_nu=p["delta_nu"],
                          n_fock=int(s["n_fock"]))
        return [[p["Omega_R"], p["delta_nu"], eigen_shift(spec)]]
    if kind == "shift-sweep":
        spec = _qm_spec(s, p["lam"], s["delta_R"], s["delta_nu"])
        kappa = spec.kappa_down - spec.kappa_up
        fit, _ = mechanical_peak(spec, s["qubit_state"], resolution=s["resolution_fraction"] * kappa)
        try:
            a = analytic_shift(spec.lam, spec.Omega_R, spec.omega_m)
        except SpinBusError:
            a = NAN
        try:
            e = eigen_shift(spec)
        except SpinBusError:
            e = NAN
        return [[p["lam"], fit.center - spec.omega_m, e, a, fit.width]]
    if kind == "threshold-map":
        tpl = _qm_spec(s, 1.0, 0.0)
        pt = threshold_search(tpl, p["delta_R"], p["delta_nu"], srch["target"],
                              lam_bounds=(srch["lam_lo"], srch["lam_hi"]), rel_tol=srch["rel_tol"])
        if pt.status != "ok":
            raise _PointFailure(pt.status, [p["delta_R"], p["delta_nu"], NAN, NAN, pt.evaluations])
        return [[p["delta_R"], p["delta_nu"], pt.lam_min, pt.shift_at_min, pt.evaluations]]
    if kind == "gate-sweep":
        spec = TwoQubitSpec.symmetric(s["omega_m"], p["delta_R"], p["lam"], n_fock=_n_fock(s["n_fock"]),
                                      n_th=s["n_th"], gamma_pct=s["gamma_pct"], delta_nu=s["delta_nu"])
        r = _gate_search(spec, srch, s["gamma_pct"])
        ratio = p["delta_R"] / p["lam"] if p["lam"] else NAN
        row = [p["lam"], p["delta_R"], ratio, r.fidelity, r.fidelity_uncompensated, r.optimal_time, r.t_star]
        if r.boundary:
            raise _PointFailure("boundary", row)
        return [row]
    if kind == "gamma-sweep":
        spec = TwoQubitSpec.symmetric(s["omega_m"], s["delta_R"], s["lam"], n_fock=_n_fock(s["n_fock"]),
                                      n_th=s["n_th"], gamma_pct=p["gamma_pct"], delta_nu=s["delta_nu"])
        r = _gate_search(spec, srch, p["gamma_pct"])
        return [[p["gamma_pct"], r.fidelity, r.fidelity_uncompensated, r.optimal_time, r.t_star]]
    if kind == "donor-coupling":
        species = load_species(s["species"])
        profile = load_profile(s["profile"], "gradient")
        if s["B_bias"] > 0:
            B, tr = s["B_bias"], None
        else:
            B, tr = lowest_field_transition(species, s["frequency"])
        grad = interp(profile, p["distance"])
        dfdB = transition_gradient(species, B, tr)
        lam = gradient_coupling(species, MechanicalMode(s["x_zpf"]), grad, B, tr)
        return [[p["distance"], grad, dfdB, B, lam]]
    if kind == "spectrum":
        spec = _qm_spec(s, s["lam"], s["delta_R"], s["delta_nu"])
        kappa = spec.kappa_down - spec.kappa_up
        span = s["span"] or None
        _, S = mechanical_peak(spec, s["qubit_state"], span=span, resolution=s["resolution_fraction"] * kappa)
        return [[f, v] for f, v in zip(S.freqs.tolist(), S.values.tolist())]
    raise ValueError(kind)


class _PointFailure(Exception):
    def __init__(self, status, row):
        super().__init__(status)
        self.status, self.row = status, row


def _width(kind):
    return len(SCHEMAS[kind]) - 1


def _run_point(args):
    idx, kind, s, srch, p, timeout = args
    try:
        with threadpool_limits(1), _alarm(timeout):
            rows = evaluate(kind, s, srch, p)
        return idx, [r + ["ok"] for r in rows]
    except PointTimeout:
        status = "timeout"
        row = list(p.values())
    except _PointFailure as exc:
        return idx, [exc.row + [NAN] * (_width(kind) - len(exc.row)) + [exc.status]]
    except (SpinBusError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        status = f"error: {type(exc).__name__}"
        row = list(p.values())
    row = [float(v) for v in row][:_width(kind)]
    return idx, [row + [NAN] * (_width(kind) - len(row)) + [status]]


def run(cfg: RunConfig, workers: int | None = None) -> ResultTable:
    """Evaluate every sweep point; failures become status entries, not exceptions.

    Points are distributed over ``workers`` processes and reassembled in grid
    order, so the table does not depend on the worker count.
    """
    workers = cfg.workers if workers is None else workers
    pts = points(cfg)
    jobs = [(i, cfg.kind, cfg.system, cfg.search, p, cfg.timeout_s) for i, p in enumerate(pts)]
    if workers > 1 and len(jobs) > 1:
        ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
        with ctx.Pool(min(workers, len(jobs))) as pool:
            results = list(pool.imap_unordered(_run_point, jobs))
    else:
        results = [_run_point(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    rows = [row for _, rs in results for row in rs]
    cols, units = zip(*SCHEMAS[cfg.kind])
    return ResultTable(cfg.kind, list(cols), list(units), rows, cfg.fingerprint, __version__)
