"""Numerical integrity checks for a run configuration.

For a representative point of the config the checks are: trace and
positivity along an evolved trajectory, agreement of observables when the
output step is halved, and stability of the headline number when the Fock
truncation is doubled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..donors import load_species, lowest_field_transition, transition_frequency
from ..dynamics import evolve, qm_model, qmq_model
from ..errors import SpinBusError
from ..gates import QuantumChannel, choi_series, compensated_fidelity, sqrt_iswap
from ..hilbert import State, embed, fock_destroy, pauli, product_state, thermal_state
from ..models import SystemSpec, TwoQubitSpec, dispersive_gate_time, two_qubit_ops
from ..spectra import eigen_shift, shift_initial_state, simulated_shift
from .config import RunConfig

TRACE_TOL = 1e-9
POSITIVITY_TOL = -1e-7
STEP_TOL = 1e-6
FOCK_TOL = 0.01


@dataclass
class Check:
    name: str
    value: float
    limit: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark} {self.name}: {self.value:.3e} (limit {self.limit:.0e}) {self.detail}".rstrip()


def _rel(a, b) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _trajectory_checks(model, rho0, t_final, observables, n_steps=100):
    coarse = evolve(model, rho0, t_final, n_steps, observables=observables)
    fine = evolve(model, rho0, t_final, 2 * n_steps, observables=observables)
    trace = max(coarse.trace_error(), fine.trace_error())
    pos = min(coarse.min_eigenvalue(), fine.min_eigenvalue())
    step = 0.0
    for name in observables:
        a, b = coarse.observables[name], fine.observables[name][::2]
        step = max(step, float(np.abs(a - b).max() / max(np.abs(a).max(), 1e-300)))
    return [Check("trace preservation", trace, TRACE_TOL, trace <= TRACE_TOL),
            Check("positivity", pos, POSITIVITY_TOL, pos >= POSITIVITY_TOL),
            Check("step halving", step, STEP_TOL, step <= STEP_TOL)]


def _qm_point(cfg: RunConfig):
    s, g = cfg.system, cfg.grid
    if cfg.kind == "eigen-map":
        # first grid point (from the middle outwards) whose levels can be labeled
        cand = sorted(((a, b) for a in g["Omega_R"] for b in g["delta_nu"]),
                      key=lambda p: abs(p[0] - np.median(g["Omega_R"])) + abs(p[1] - np.median(g["delta_nu"])))
        for a, b in cand:
            spec = SystemSpec.with_reference_rates(s["omega_m"], a, s["lam"], delta_nu=b, n_fock=int(s["n_fock"]))
            try:
                eigen_shift(spec)
                return spec
            except SpinBusError:
                continue
        raise SpinBusError("no labelable point in the eigen-map grid")
    if cfg.kind == "shift-sweep":
        lam, dR, dn = max(g["lam"]), s["delta_R"], s["delta_nu"]
    elif cfg.kind == "spectrum":
        lam, dR, dn = s["lam"], s["delta_R"], s["delta_nu"]
    else:  # threshold-map
        lam = math.sqrt(cfg.search["lam_lo"] * cfg.search["lam_hi"])
        dR, dn = g["delta_R"][len(g["delta_R"]) // 2], g["delta_nu"][0]
    return SystemSpec.with_reference_rates(s["omega_m"], s["omega_m"] + dR, lam, delta_nu=dn,
                                           n_fock=int(s["n_fock"]), n_th=s.get("n_th", 0.0),
                                           rate_scale=s.get("rate_scale", 1.0))


def _qq_point(cfg: RunConfig):
    s, g = cfg.system, cfg.grid
    nf = int(s["n_fock"]) or None
    if cfg.kind == "gate-sweep":
        lam = g["lam"][len(g["lam"]) // 2]
        dR = g["delta_R"][len(g["delta_R"]) // 2] if "delta_R" in g else \
            g["detuning_ratio"][len(g["detuning_ratio"]) // 2] * lam
        return TwoQubitSpec.symmetric(s["omega_m"], dR, lam, n_fock=nf, n_th=s["n_th"],
                                      gamma_pct=s["gamma_pct"], delta_nu=s["delta_nu"])
    return TwoQubitSpec.symmetric(s["omega_m"], s["delta_R"], s["lam"], n_fock=nf, n_th=s["n_th"],
                                  gamma_pct=g["gamma_pct"][-1], delta_nu=s["delta_nu"])


def _gate_fidelity(spec, t):
    J = choi_series(spec, [0.0, t])[-1]
    return compensated_fidelity(QuantumChannel(J).validate(), sqrt_iswap())[0]


def integrity_checks(cfg: RunConfig) -> list[Check]:
    if cfg.kind in ("eigen-map", "shift-sweep", "spectrum", "threshold-map"):
        spec = _qm_point(cfg)
        model = qm_model(spec)
        nf = spec.n_fock
        a = embed(fock_destroy(nf), 1, (2, nf))
        sz = embed(pauli("z"), 0, (2, nf))
        kappa = max(spec.kappa_down - spec.kappa_up, 1.0)
        checks = _trajectory_checks(model, shift_initial_state(spec), 2.0 / kappa,
                                    {"n": a.dag() @ a, "sz": sz})
        f = eigen_shift if cfg.kind == "eigen-map" else simulated_shift
        base, doubled = f(spec), f(spec.replace(n_fock=2 * nf))
        checks.append(Check("Fock doubling", _rel(base, doubled), FOCK_TOL, _rel(base, doubled) < FOCK_TOL,
                            f"n_fock {nf} -> {2 * nf}: {base:.6g} vs {doubled:.6g} Hz"))
        return checks
    if cfg.kind in ("gate-sweep", "gamma-sweep"):
        spec = _qq_point(cfg)
        model = qmq_model(spec)
        ops, a = two_qubit_ops(spec.n_fock)
        t_star = dispersive_gate_time(spec)
        ud = np.zeros(4)
        ud[1] = 1.0
        rho0 = product_state([State.from_ket(ud, (2, 2)), thermal_state(spec.n_fock, spec.n_th)])
        checks = _trajectory_checks(model, rho0, 2.5 * t_star,
                                    {"n": a.dag() @ a, "sz1": ops[0]["z"], "sz2": ops[1]["z"]})
        base = _gate_fidelity(spec, t_star)
        doubled = _gate_fidelity(spec.replace(n_fock=2 * spec.n_fock), t_star)
        checks.append(Check("Fock doubling", _rel(base, doubled), FOCK_TOL, _rel(base, doubled) < FOCK_TOL,
                            f"n_fock {spec.n_fock} -> {2 * spec.n_fock}: F = {base:.6f} vs {doubled:.6f}"))
        return checks
    if cfg.kind == "donor-coupling":
        species = load_species(cfg.system["species"])
        B, tr = lowest_field_transition(species, cfg.system["frequency"])
        h = max(1e-6, 1e-6 * B)
        f = lambda b: transition_frequency(species, b, tr)
        d = [(f(B + k) - f(B - k)) / (2 * k) for k in (h, h / 2, h / 4)]
        r1, r2 = (4 * d[1] - d[0]) / 3, (4 * d[2] - d[1]) / 3
        step = _rel(r1, r2)
        return [Check("trace preservation", 0.0, TRACE_TOL, True, "no dynamics in this experiment"),
                Check("positivity", 0.0, POSITIVITY_TOL, True, "no dynamics in this experiment"),
                Check("step halving", step, STEP_TOL, step <= STEP_TOL, "gradient stencil"),
                Check("Fock doubling", 0.0, FOCK_TOL, True, "no oscillator in this experiment")]
    raise ValueError(cfg.kind)
