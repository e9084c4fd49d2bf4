"""GKSL master-equation dynamics, steady states and two-time correlations.

Superoperators act on row-major vectorized density matrices,
``vec(A rho B) = kron(A, B.T) @ vec(rho)``.

Two propagation backends are used. Up to ``DENSE_MAX_DIM`` Hilbert dimensions
the Liouvillian is stored densely and time steps apply ``expm(L dt)``
(scaling and squaring), which is exact on any uniform grid. Above that the
Liouvillian is kept sparse and vectors are advanced with the truncated-Taylor
action of the exponential (``scipy.sparse.linalg.expm_multiply``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .errors import DegeneracyError, DimensionError, InvalidParameterError, SolverError
from .hilbert import HilbertSpace, Operator, State, embed, fock_destroy, pauli
from .models import SystemSpec, TwoQubitSpec, build_qm_dressed, build_qmq_dressed, two_qubit_ops

DENSE_MAX_DIM = 48
TRACE_TOL = 1e-9
HERM_TOL = 1e-9
TWO_PI = 2 * math.pi


@dataclass(frozen=True, eq=False)
class LindbladModel:
    """Hamiltonian plus ``(jump operator, rate)`` channels.

    ``omega_unit`` converts the numbers stored in ``H`` and the rates into
    angular units per second: 1 when they are already angular, ``2 pi`` when
    they are cyclic frequencies in Hz (the convention of ``models``).
    """

    H: Operator
    channels: tuple = ()
    omega_unit: float = 1.0

    def __post_init__(self):
        channels = tuple((A, float(k)) for A, k in self.channels)
        for A, k in channels:
            if A.space != self.H.space:
                raise DimensionError(f"jump operator on {A.dims} does not match Hamiltonian on {self.H.dims}")
            if not np.isfinite(k) or k < 0:
                raise InvalidParameterError(f"decay rates must be finite and >= 0, got {k}")
        object.__setattr__(self, "channels", channels)
        if not self.H.is_hermitian():
            raise InvalidParameterError("Hamiltonian is not Hermitian")

    @property
    def space(self) -> HilbertSpace:
        return self.H.space

    @property
    def dim(self) -> int:
        return self.H.space.size

    def scaled_rates(self, factor: float) -> "LindbladModel":
        return LindbladModel(self.H, tuple((A, k * factor) for A, k in self.channels), self.omega_unit)

    @cached_property
    def liouvillian(self) -> np.ndarray:
        return self.omega_unit * _liouvillian(self.H.matrix, self.channels, np)

    @cached_property
    def sparse_liouvillian(self) -> sp.csr_matrix:
        return (self.omega_unit * _liouvillian(self.H.matrix, self.channels, sp)).tocsr()

    def use_dense(self, method="auto") -> bool:
        if method not in ("auto", "dense", "krylov"):
            raise InvalidParameterError(f"unknown propagation method {method!r}")
        return method == "dense" or (method == "auto" and self.dim <= DENSE_MAX_DIM)


def _liouvillian(H, channels, lib):
    d = H.shape[0]
    if lib is np:
        eye, kron = np.eye(d), np.kron
        conv = np.asarray
    else:
        eye = sp.identity(d, dtype=complex, format="csr")
        kron = lambda a, b: sp.kron(a, b, format="csr")
        conv = sp.csr_matrix
    H = conv(H)
    L = -1j * (kron(H, eye) - kron(eye, H.T))
    for A, k in channels:
        if k == 0:
            continue
        Am = np.asarray(A.matrix)
        AdA = conv(Am.conj().T @ Am)
        A = conv(Am)
        L = L + k * (kron(A, A.conj()) - 0.5 * kron(AdA, eye) - 0.5 * kron(eye, AdA.T))
    return L


def qm_model(spec: SystemSpec, hamiltonian: Operator | None = None) -> LindbladModel:
    """Dressed qubit-oscillator model with the five decay channels.

    Channels: ``a`` (kappa_down), ``a^dag`` (kappa_up), ``sigma_-``
    (gamma_down), ``sigma_+`` (gamma_up), ``sigma_z`` (gamma_phi).
    Zero-rate channels are dropped.
    """
    H = build_qm_dressed(spec) if hamiltonian is None else hamiltonian
    dims = (2, spec.n_fock)
    a = embed(fock_destroy(spec.n_fock), 1, dims)
    chans = [
        (a, spec.kappa_down),
        (a.dag(), spec.kappa_up),
        (embed(pauli("minus"), 0, dims), spec.gamma_down),
        (embed(pauli("plus"), 0, dims), spec.gamma_up),
        (embed(pauli("z"), 0, dims), spec.gamma_phi),
    ]
    return LindbladModel(H, tuple((A, k) for A, k in chans if k > 0), omega_unit=TWO_PI)


def qmq_model(spec: TwoQubitSpec, hamiltonian: Operator | None = None) -> LindbladModel:
    H = build_qmq_dressed(spec) if hamiltonian is None else hamiltonian
    ops, a = two_qubit_ops(spec.n_fock)
    chans = [(a, spec.kappa_down), (a.dag(), spec.kappa_up)]
    for q, s in zip(spec.qubits, ops):
        chans += [(s["minus"], q.gamma_down), (s["plus"], q.gamma_up), (s["z"], q.gamma_phi)]
    return LindbladModel(H, tuple((A, k) for A, k in chans if k > 0), omega_unit=TWO_PI)


def lindblad_rhs(model: LindbladModel, state: State | np.ndarray) -> np.ndarray:
    """``d rho / dt = i [rho, H] + sum_k kappa_k D[A_k] rho`` (times ``omega_unit``)."""
    rho = state.rho if isinstance(state, State) else np.asarray(state, dtype=complex)
    if rho.shape != (model.dim, model.dim):
        raise DimensionError(f"state of shape {rho.shape} does not match model dimension {model.dim}")
    H = model.H.matrix
    out = 1j * (rho @ H - H @ rho)
    for A, k in model.channels:
        A = A.matrix
        AdA = A.conj().T @ A
        out += k * (A @ rho @ A.conj().T - 0.5 * (AdA @ rho + rho @ AdA))
    return model.omega_unit * out


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    space: HilbertSpace
    observables: dict = field(default_factory=dict)

    def state(self, i) -> State:
        return State(self.space, self.states[i], check=False)

    def trace_error(self) -> float:
        return float(np.abs(np.trace(self.states, axis1=1, axis2=2) - 1).max())

    def hermiticity_error(self) -> float:
        return float(np.abs(self.states - self.states.conj().transpose(0, 2, 1)).max())

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.states + self.states.conj().transpose(0, 2, 1))
        return float(min(np.linalg.eigvalsh(r).min() for r in herm))


def _is_uniform(t: np.ndarray) -> bool:
    if len(t) < 3:
        return True
    d = np.diff(t)
    return bool(np.allclose(d, d[0], rtol=1e-9, atol=0))


def _propagate_vectors(model: LindbladModel, v0: np.ndarray, times: np.ndarray, method="auto",
                       chunk=512, project: np.ndarray | None = None) -> np.ndarray:
    """``exp(L t_k) v0`` for every ``t_k`` of an increasing grid starting at >= 0.

    ``v0`` may be a single vector or a ``(D, k)`` block of column vectors.
    With ``project`` only ``project @ v(t_k)`` is kept, so long grids do not
    hold every propagated vector in memory.
    """
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0) or times[0] < 0:
        raise InvalidParameterError("time grid must be increasing and start at t >= 0")
    if project is not None:
        return _propagate_projected(model, v0, times, method, chunk, project)
    out = np.empty((len(times),) + v0.shape, dtype=complex)
    if model.use_dense(method):
        L = model.liouvillian
        v = v0 if times[0] == 0 else sla.expm(L * times[0]) @ v0
        out[0] = v
        cache = {}
        for i in range(1, len(times)):
            dt = times[i] - times[i - 1]
            key = round(dt / times[-1], 12)
            if key not in cache:
                cache[key] = sla.expm(L * dt)
            v = cache[key] @ v
            out[i] = v
        return out
    L = model.sparse_liouvillian
    v = v0 if times[0] == 0 else expm_multiply(L * times[0], v0)
    out[0] = v
    if _is_uniform(times) and len(times) > 2:
        dt = times[1] - times[0]
        i = 0
        while i < len(times) - 1:
            k = min(chunk, len(times) - 1 - i)
            block = expm_multiply(L, out[i], start=0.0, stop=k * dt, num=k + 1, endpoint=True)
            out[i + 1:i + k + 1] = block[1:]
            i += k
        return out
    for i in range(1, len(times)):
        out[i] = expm_multiply(L * (times[i] - times[i - 1]), out[i - 1])
    return out


def _propagate_projected(model, v0, times, method, chunk, w):
    out = np.empty(len(times), dtype=complex)
    if model.use_dense(method) or not _is_uniform(times) or len(times) <= 2:
        # slices restart from the last state, so memory stays at chunk vectors
        first = _propagate_vectors(model, v0, times[:chunk], method)
        out[:len(first)] = first @ w
        v, k = first[-1], len(first)
        while k < len(times):
            seg = times[k - 1:k + chunk] - times[k - 1]
            block = _propagate_vectors(model, v, seg, method)[1:]
            out[k:k + len(block)] = block @ w
            v, k = block[-1], k + len(block)
        return out
    L = model.sparse_liouvillian
    dt = times[1] - times[0]
    v = v0 if times[0] == 0 else expm_multiply(L * times[0], v0)
    out[0] = v @ w
    i = 0
    while i < len(times) - 1:
        k = min(chunk, len(times) - 1 - i)
        block = expm_multiply(L, v, start=0.0, stop=k * dt, num=k + 1, endpoint=True)
        out[i + 1:i + k + 1] = block[1:] @ w
        v = block[-1]
        i += k
    return out


def evolve(model: LindbladModel, rho0: State, t_final: float, n_steps: int = 200, *,
           times: Sequence[float] | None = None, observables: Mapping[str, Operator] | None = None,
           method: str = "auto") -> Trajectory:
    """Evolve ``rho0`` and record states and expectation values on a grid.

    The default grid is ``n_steps + 1`` uniform points on ``[0, t_final]``.
    Raises ``SolverError`` if trace or Hermiticity drift beyond 1e-9.
    """
    if rho0.space != model.space:
        raise DimensionError(f"initial state on {rho0.dims} does not match model on {model.space.dims}")
    if times is None:
        if not t_final > 0:
            raise InvalidParameterError("t_final must be > 0")
        times = np.linspace(0.0, t_final, int(n_steps) + 1)
    times = np.asarray(times, dtype=float)
    d = model.dim
    vecs = _propagate_vectors(model, rho0.rho.reshape(-1), times, method)
    states = vecs.reshape(len(times), d, d)
    traj = Trajectory(times, states, model.space)
    diag = dict(trace_error=traj.trace_error(), hermiticity_error=traj.hermiticity_error())
    if diag["trace_error"] > TRACE_TOL or diag["hermiticity_error"] > HERM_TOL:
        raise SolverError("propagation lost trace or Hermiticity", diag)
    for name, op in (observables or {}).items():
        if op.space != model.space:
            raise DimensionError(f"observable {name!r} acts on {op.dims}")
        traj.observables[name] = np.einsum("ij,tji->t", op.matrix, states)
    return traj


def steady_state(model: LindbladModel, tol: float = 1e-9) -> State:
    """Unique stationary state of the Liouvillian.

    Raises ``DegeneracyError`` when the null space is not one-dimensional.
    """
    d = model.dim
    L = model.liouvillian
    s_max = np.linalg.norm(L, 2)
    _, s, vh = np.linalg.svd(L)
    rel = s / s_max
    if rel[-1] > tol:
        raise DegeneracyError(f"no stationary state (smallest singular value {rel[-1]:.3e} of norm)")
    if rel[-2] <= tol:
        raise DegeneracyError("stationary state is not unique (degenerate null space)")
    rho = vh[-1].conj().reshape(d, d)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    resid = np.linalg.norm(lindblad_rhs(model, rho))
    if resid > 1e-10 * max(1.0, s_max):
        raise SolverError("stationary state residual too large", dict(residual=resid))
    return State(model.space, rho, check=False)


def correlation(model: LindbladModel, rho0: State, A: Operator, B: Operator,
                tau_grid: Sequence[float], method: str = "auto") -> np.ndarray:
    """Two-time average ``<A(tau) B(0)>`` by the quantum regression recipe.

    ``B rho0`` is propagated with the same Liouvillian and traced against
    ``A``. On uniform dense grids the exponentials are split into baby and
    giant steps so only ``O(sqrt(N))`` matrix-vector products are needed.
    """
    for op in (A, B):
        if op.space != model.space:
            raise DimensionError(f"operator on {op.dims} does not match model on {model.space.dims}")
    if rho0.space != model.space:
        raise DimensionError("initial state does not match model")
    tau = np.asarray(tau_grid, dtype=float)
    b = (B.matrix @ rho0.rho).reshape(-1)
    w = A.matrix.T.reshape(-1)
    if len(tau) > 16 and tau[0] == 0 and _is_uniform(tau) and model.use_dense(method):
        return _correlation_bsgs(model.liouvillian, w, b, tau[1] - tau[0], len(tau))
    return _propagate_vectors(model, b, tau, method, project=w)


def _correlation_bsgs(L, w, b, dt, n):
    m = int(math.ceil(math.sqrt(n)))
    P = sla.expm(L * dt)
    Q = np.linalg.matrix_power(P, m)
    Y = np.empty((b.size, m), dtype=complex)
    v = b
    for i in range(m):
        Y[:, i] = v
        v = P @ v
    g = int(math.ceil(n / m))
    U = np.empty((g, b.size), dtype=complex)
    u = w
    for j in range(g):
        U[j] = u
        u = u @ Q
    return (U @ Y).reshape(-1)[:n]
