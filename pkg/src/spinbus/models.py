"""Hamiltonian builders for the qubit-mechanics system.

Unit convention: every frequency-like parameter is a cyclic frequency in Hz
and enters the matrices with exactly the coefficient printed in the model
equations (h = 1, no 2*pi inside the matrices). Time evolution therefore
multiplies generators by 2*pi (see ``dynamics.LindbladModel.omega_unit``), so
times are in seconds and spectra come out on a Hz axis.

Subsystem order is ``[qubit, oscillator]`` for one qubit and
``[qubit 1, qubit 2, oscillator]`` for two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DivergenceError, InvalidParameterError, InvalidTruncationError, PreconditionError
from .hilbert import Operator, embed, fock_destroy, identity, pauli, tensor

# Reference operating point: linewidths the decay channels are calibrated to.
MECH_LINEWIDTH = 200.0
QUBIT_T1_RATE = 10.0
QUBIT_T2_RATE = 100.0


def decay_rates(n_th=0.0, mech_linewidth=MECH_LINEWIDTH, t1_rate=QUBIT_T1_RATE,
                t2_rate=QUBIT_T2_RATE, scale=1.0) -> dict:
    """Split measured linewidths into the five jump-operator rates.

    The oscillator bath is thermal at ``n_th``: ``kappa_down = k (n_th + 1)``,
    ``kappa_up = k n_th`` so the free linewidth is ``k`` and the stationary
    occupation is ``n_th``. Qubit relaxation ``1/T1 = gamma_down + gamma_up``
    is split evenly; the sigma_z dephasing rate is fixed by
    ``1/T2 = 1/(2 T1) + 2 gamma_phi``. ``scale`` multiplies every rate.
    """
    if t2_rate < 0.5 * t1_rate:
        raise InvalidParameterError("1/T2 must be at least 1/(2 T1)")
    rates = dict(
        kappa_down=mech_linewidth * (n_th + 1.0),
        kappa_up=mech_linewidth * n_th,
        gamma_down=0.5 * t1_rate,
        gamma_up=0.5 * t1_rate,
        gamma_phi=0.5 * (t2_rate - 0.5 * t1_rate),
    )
    return {k: scale * v for k, v in rates.items()}


def _check_fock(n_fock):
    if int(n_fock) != n_fock or n_fock < 2:
        raise InvalidTruncationError(f"n_fock must be an integer >= 2, got {n_fock}")


@dataclass(frozen=True)
class SystemSpec:
    """Scalar parameters of one dressed qubit coupled to the resonator [Hz]."""

    omega_m: float
    Omega_R: float
    lam: float
    delta_nu: float = 0.0
    n_fock: int = 8
    n_th: float = 0.0
    kappa_down: float = 0.0
    kappa_up: float = 0.0
    gamma_down: float = 0.0
    gamma_up: float = 0.0
    gamma_phi: float = 0.0
    gamma_e_B0: float = 0.0
    gamma_e_B1: float | None = None

    def __post_init__(self):
        problems = []
        for name in ("omega_m", "Omega_R", "lam", "n_th", "kappa_down", "kappa_up",
                     "gamma_down", "gamma_up", "gamma_phi", "gamma_e_B0"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                problems.append(f"{name} must be finite and >= 0 (got {v})")
        if not np.isfinite(self.delta_nu):
            problems.append("delta_nu must be finite")
        if self.gamma_e_B1 is not None:
            if self.gamma_e_B1 < 0:
                problems.append("gamma_e_B1 must be >= 0")
            elif not math.isclose(self.Omega_R, 0.5 * self.gamma_e_B1, rel_tol=1e-9, abs_tol=1e-12):
                problems.append("Omega_R must equal gamma_e_B1 / 2")
        if int(self.n_fock) != self.n_fock or self.n_fock < 2:
            problems.append(f"n_fock must be an integer >= 2 (got {self.n_fock})")
        if problems:
            raise InvalidParameterError("; ".join(problems))

    @classmethod
    def with_reference_rates(cls, omega_m, Omega_R, lam, delta_nu=0.0, n_fock=8, n_th=0.0,
                             rate_scale=1.0, **kw) -> "SystemSpec":
        return cls(omega_m=omega_m, Omega_R=Omega_R, lam=lam, delta_nu=delta_nu,
                   n_fock=n_fock, n_th=n_th, **decay_rates(n_th, scale=rate_scale), **kw)

    @property
    def rabi_detuning(self) -> float:
        """Signed ``Omega_R - omega_m``."""
        return self.Omega_R - self.omega_m

    def replace(self, **changes) -> "SystemSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class QubitParams:
    Omega_R: float
    lam: float
    delta_nu: float = 0.0
    gamma_down: float = 0.0
    gamma_up: float = 0.0
    gamma_phi: float = 0.0

    def __post_init__(self):
        for name in ("Omega_R", "lam", "gamma_down", "gamma_up", "gamma_phi"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise InvalidParameterError(f"{name} must be finite and >= 0 (got {v})")


@dataclass(frozen=True)
class TwoQubitSpec:
    """Two dressed qubits sharing one mechanical mode; no direct qubit-qubit term."""

    q1: QubitParams
    q2: QubitParams
    omega_m: float
    n_fock: int = 6
    n_th: float = 0.0
    kappa_down: float = 0.0
    kappa_up: float = 0.0

    def __post_init__(self):
        _check_fock(self.n_fock)
        for name in ("omega_m", "n_th", "kappa_down", "kappa_up"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise InvalidParameterError(f"{name} must be finite and >= 0 (got {v})")

    @classmethod
    def symmetric(cls, omega_m, rabi_detuning, lam, n_fock=None, n_th=0.0,
                  gamma_pct=100.0, delta_nu=0.0) -> "TwoQubitSpec":
        """Equal couplings and Rabi frequencies ``Omega_R = omega_m + rabi_detuning``.

        Rates are the reference linewidths multiplied by ``gamma_pct / 100``;
        ``n_fock`` defaults to ``4 n_th + 6``.
        """
        r = decay_rates(n_th, scale=gamma_pct / 100.0)
        q = QubitParams(Omega_R=omega_m + rabi_detuning, lam=lam, delta_nu=delta_nu,
                        gamma_down=r["gamma_down"], gamma_up=r["gamma_up"], gamma_phi=r["gamma_phi"])
        if n_fock is None:
            n_fock = int(math.ceil(4 * n_th + 6))
        return cls(q, q, omega_m=omega_m, n_fock=n_fock, n_th=n_th,
                   kappa_down=r["kappa_down"], kappa_up=r["kappa_up"])

    @property
    def qubits(self):
        return (self.q1, self.q2)

    def replace(self, **changes) -> "TwoQubitSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class OptomechSpec:
    omega_m: float
    Delta_CL: float
    g0: float
    n_cav: float

    def __post_init__(self):
        if self.n_cav < 0:
            raise InvalidParameterError(f"n_cav must be >= 0 (got {self.n_cav})")


def qubit_oscillator_ops(n_fock):
    """``(sx, sy, sz, sp, sm, a)`` embedded in ``[2, n_fock]``."""
    dims = (2, int(n_fock))
    a = embed(fock_destroy(n_fock), 1, dims)
    return tuple(embed(pauli(k), 0, dims) for k in ("x", "y", "z", "plus", "minus")) + (a,)


def build_qm_bare(spec: SystemSpec) -> Operator:
    _, _, sz, _, _, a = qubit_oscillator_ops(spec.n_fock)
    X = a + a.dag()
    return 0.5 * (spec.gamma_e_B0 * sz + 2 * spec.omega_m * (a.dag() @ a) + spec.lam * (sz @ X))


def build_qm_driven(spec: SystemSpec, t: float) -> Operator:
    """Lab-frame Hamiltonian with the classical MW drive at time ``t`` [s].

    The drive frequency is ``nu_MW = gamma_e_B0 + delta_nu``.
    """
    sx, _, _, _, _, _ = qubit_oscillator_ops(spec.n_fock)
    B1 = 2 * spec.Omega_R if spec.gamma_e_B1 is None else spec.gamma_e_B1
    nu_mw = spec.gamma_e_B0 + spec.delta_nu
    drive = 0.5 * B1 * math.cos(2 * math.pi * nu_mw * t) * sx
    return build_qm_bare(spec) + drive


def build_qm_dressed(spec: SystemSpec) -> Operator:
    sx, _, sz, _, _, a = qubit_oscillator_ops(spec.n_fock)
    X = a + a.dag()
    return 0.5 * (spec.Omega_R * sz + spec.delta_nu * sx + 2 * spec.omega_m * (a.dag() @ a)
                  - spec.lam * (sx @ X))


def build_qm_rwa(spec: SystemSpec) -> Operator:
    if spec.delta_nu != 0:
        raise PreconditionError("the Jaynes-Cummings form requires delta_nu = 0")
    _, _, sz, sp, sm, a = qubit_oscillator_ops(spec.n_fock)
    return 0.5 * (spec.Omega_R * sz + 2 * spec.omega_m * (a.dag() @ a)
                  - spec.lam * (sm @ a.dag() + sp @ a))


def excitation_number(n_fock) -> Operator:
    _, _, _, sp, sm, a = qubit_oscillator_ops(n_fock)
    return sp @ sm + a.dag() @ a


def build_qm_dispersive(spec: SystemSpec) -> Operator:
    delta = spec.rabi_detuning
    if delta == 0:
        raise DivergenceError("dispersive Hamiltonian diverges at Omega_R = omega_m")
    _, _, sz, _, _, a = qubit_oscillator_ops(spec.n_fock)
    n = a.dag() @ a
    chi = spec.lam ** 2 / (4 * delta)
    return spec.omega_m * n + chi * (sz @ n) + 0.5 * spec.Omega_R * sz + 0.5 * chi * sz


def two_qubit_ops(n_fock):
    """Per-qubit Pauli dictionaries and ``a`` on ``[2, 2, n_fock]``."""
    dims = (2, 2, int(n_fock))
    qubits = [{k: embed(pauli(k), q, dims) for k in ("x", "y", "z", "plus", "minus")} for q in (0, 1)]
    return qubits, embed(fock_destroy(n_fock), 2, dims)


def build_qmq_dressed(spec: TwoQubitSpec) -> Operator:
    ops, a = two_qubit_ops(spec.n_fock)
    X = a + a.dag()
    H = spec.omega_m * (a.dag() @ a)
    for q, s in zip(spec.qubits, ops):
        H = H + 0.5 * (q.Omega_R * s["z"] + q.delta_nu * s["x"] - q.lam * (s["x"] @ X))
    return H


def exchange_coupling(spec: TwoQubitSpec) -> float:
    """Strength of the phonon-mediated flip-flop term of the dispersive model."""
    d1, d2 = (q.Omega_R - spec.omega_m for q in spec.qubits)
    if d1 == 0 or d2 == 0:
        raise DivergenceError("dispersive exchange diverges at Omega_R = omega_m")
    return spec.q1.lam * spec.q2.lam * (d1 + d2) / (8 * d1 * d2)


def dispersive_gate_time(spec: TwoQubitSpec) -> float:
    """Interaction time for sqrt(iSWAP) in the noiseless dispersive limit [s]."""
    d1, d2 = (q.Omega_R - spec.omega_m for q in spec.qubits)
    if d1 == 0 or d2 == 0 or d1 + d2 == 0:
        raise DivergenceError("gate time undefined for these detunings")
    return abs(d1 * d2 / (spec.q1.lam * spec.q2.lam * (d1 + d2)))


def build_qmq_dispersive(spec: TwoQubitSpec) -> Operator:
    ops, a = two_qubit_ops(spec.n_fock)
    n = a.dag() @ a
    J = exchange_coupling(spec)
    H = spec.omega_m * n
    for q, s in zip(spec.qubits, ops):
        chi = q.lam ** 2 / (4 * (q.Omega_R - spec.omega_m))
        H = H + chi * (s["z"] @ n) + 0.5 * ((q.Omega_R + chi) * s["z"] + q.delta_nu * s["x"])
    s1, s2 = ops
    return H + J * (s1["plus"] @ s2["minus"] + s1["minus"] @ s2["plus"])


def build_om_linearized(spec: OptomechSpec, n_fock: int, n_fock_opt: int) -> Operator:
    """Linearized optomechanics on ``[mechanics, optical fluctuation]``.

    Construction only; nothing in the package evolves this Hamiltonian.
    """
    _check_fock(n_fock)
    _check_fock(n_fock_opt)
    a = tensor([fock_destroy(n_fock), identity(n_fock_opt)])
    b = tensor([identity(n_fock), fock_destroy(n_fock_opt)])
    g = spec.g0 * math.sqrt(spec.n_cav)
    return (spec.omega_m * (a.dag() @ a) - spec.Delta_CL * (b.dag() @ b)
            - g * ((a + a.dag()) @ (b + b.dag())))
