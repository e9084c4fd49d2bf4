"""Displacement spectra, mechanical frequency shifts and readout thresholds.

Frequencies are cyclic [Hz] throughout. The mechanical shift reported by
``simulated_shift`` and ``eigen_shift`` is the pull on the oscillator when the
qubit sits in the upper dressed state; the lower state pulls the opposite
way, so the up/down splitting is twice the reported value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit
from scipy.signal import CZT, argrelmax

from .dynamics import LindbladModel, correlation, qm_model
from .errors import (AmbiguousPeakError, DivergenceError, InvalidParameterError, LabelingError,
                     PreconditionError, SpinBusError, WindowTooShortError)
from .hilbert import Operator, State, embed, fock_destroy, pauli, product_state, thermal_state
from .models import SystemSpec, build_qm_dressed

SAMPLES_PER_PERIOD = 8
TAIL_FRACTION = 1e-3
APODIZATION_FRACTION = 1 / 20
DEFAULT_TARGET_SHIFT = 200.0
# minimum lead of the best eigenstate overlap over the runner-up
AMBIGUITY_GAP = 1e-3


@dataclass
class Spectrum:
    freqs: np.ndarray
    values: np.ndarray
    total_time: float
    apodization: float
    dt: float = 0.0

    @property
    def resolution(self) -> float:
        return float(self.freqs[1] - self.freqs[0]) if len(self.freqs) > 1 else 0.0


@dataclass
class PeakFit:
    center: float
    width: float
    amplitude: float
    offset: float = 0.0
    residual: float = 0.0
    raw_width: float = 0.0


def lorentzian(f, center, width, amplitude, offset=0.0):
    """Peak of height ``amplitude`` and full width ``width`` at half maximum."""
    hw2 = (0.5 * width) ** 2
    return amplitude * hw2 / ((f - center) ** 2 + hw2) + offset


def _lorentzian_jac(f, center, width, amplitude, offset=0.0):
    # analytic; finite differences stall when the center guess is near zero
    x = f - center
    hw2 = (0.5 * width) ** 2
    den = x ** 2 + hw2
    shape = hw2 / den
    d_center = amplitude * 2 * x * hw2 / den ** 2
    d_width = amplitude * 0.5 * width * x ** 2 / den ** 2
    return np.column_stack([d_center, d_width, shape, np.ones_like(f)])


def oscillator_quadrature(model: LindbladModel) -> Operator:
    """``a + a^dag`` on the last subsystem of the model's space."""
    dims = model.space.dims
    a = embed(fock_destroy(dims[-1]), len(dims) - 1, dims)
    return a + a.dag()


def oscillator_linewidth(model: LindbladModel) -> float:
    """``kappa_down - kappa_up`` read off the oscillator ladder channels."""
    dims = model.space.dims
    a = embed(fock_destroy(dims[-1]), len(dims) - 1, dims).matrix
    down = sum(k for A, k in model.channels if np.array_equal(A.matrix, a))
    up = sum(k for A, k in model.channels if np.array_equal(A.matrix, a.conj().T))
    return down - up


def _max_transition(model: LindbladModel, X: Operator) -> float:
    E, V = np.linalg.eigh(model.H.matrix)
    Xe = np.abs(V.conj().T @ X.matrix @ V)
    mask = Xe > 1e-8 * Xe.max()
    return float(np.abs(E[:, None] - E[None, :])[mask].max())


def _transform(C, weights, dt, freqs, omega_unit):
    """``2 Re sum_k w_k C_k exp(i omega_unit f tau_k)`` on a uniform frequency grid."""
    x = C * weights
    f0, df = freqs[0], (freqs[-1] - freqs[0]) / max(len(freqs) - 1, 1)
    a = np.exp(-1j * omega_unit * f0 * dt)
    w = np.exp(1j * omega_unit * df * dt)
    return 2 * np.real(CZT(len(x), len(freqs), w=w, a=a)(x))


def spectral_density(model: LindbladModel, rho0: State, freqs, *, X: Operator | None = None,
                     linewidth: float | None = None, apodization: float | None = None,
                     max_window_doublings: int = 3) -> Spectrum:
    """Symmetrized displacement spectrum ``(S(f) + S(-f)) / 2``.

    ``S(f)`` is the one-sided transform of ``<X(tau) X(0)>`` started from
    ``rho0``, apodized by ``exp(-omega_unit * apodization * tau)``. The window
    covers at least ten linewidths and is lengthened a few times if the
    correlation tail is still above 1e-3 of its start.
    """
    freqs = np.asarray(freqs, dtype=float)
    if freqs.ndim != 1 or len(freqs) < 3:
        raise InvalidParameterError("frequency grid needs at least three points")
    df = np.diff(freqs)
    if np.any(df <= 0) or not np.allclose(df, df[0], rtol=1e-9):
        raise InvalidParameterError("frequency grid must be uniform and increasing")
    X = oscillator_quadrature(model) if X is None else X
    kappa = oscillator_linewidth(model) if linewidth is None else float(linewidth)
    if apodization is None:
        apodization = APODIZATION_FRACTION * kappa
    if kappa + 2 * apodization <= 0:
        raise PreconditionError("a positive linewidth or apodization rate is needed to bound the window")
    if kappa > 0 and df[0] > kappa / 10 * (1 + 1e-9):
        raise PreconditionError(f"grid spacing {df[0]:g} Hz exceeds linewidth/10 = {kappa / 10:g} Hz")
    u = model.omega_unit
    decay = u * (0.5 * kappa + apodization)
    T = max(10 / (u * kappa) if kappa > 0 else 0.0, math.log(1e4) / decay)
    fmax = max(_max_transition(model, X), np.abs(freqs).max())
    dt = 1.0 / (SAMPLES_PER_PERIOD * fmax)
    for _ in range(max_window_doublings + 1):
        n = int(math.ceil(T / dt)) + 1
        tau = np.arange(n) * dt
        C = correlation(model, rho0, X, X, tau) * np.exp(-u * apodization * tau)
        tail = np.abs(C[int(0.95 * n):]).max()
        if tail <= TAIL_FRACTION * np.abs(C).max():
            break
        T *= 2
    else:
        raise WindowTooShortError(f"correlation tail {tail:.3e} not decayed after window {tau[-1]:.4g} s")
    weights = np.full(n, dt)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    pos = _transform(C, weights, dt, freqs, u)
    neg = _transform(C.conj(), weights, dt, freqs, u)
    return Spectrum(freqs, 0.5 * (pos + neg), total_time=float(tau[-1]), apodization=float(apodization), dt=dt)


def _local_maxima(values, floor_fraction=0.05):
    v = np.asarray(values)
    floor = np.median(v)
    idx = argrelmax(v, mode="clip")[0]
    return [i for i in idx if v[i] - floor > floor_fraction * (v.max() - floor)]


def fit_peak(spectrum: Spectrum, search_window=None) -> PeakFit:
    """Least-squares Lorentzian fit of the single peak inside ``search_window``.

    The returned ``width`` has the apodization broadening (``2 a``) removed;
    ``raw_width`` is the fitted value.
    """
    f, v = spectrum.freqs, spectrum.values
    if search_window is not None:
        lo, hi = search_window
        sel = (f >= lo) & (f <= hi)
        f, v = f[sel], v[sel]
    if len(f) < 5:
        raise AmbiguousPeakError("search window holds fewer than five samples")
    peaks = _local_maxima(v)
    if len(peaks) != 1:
        raise AmbiguousPeakError(f"expected one peak in window, found {len(peaks)}")
    i = peaks[0]
    half = v[i] / 2
    above = np.nonzero(v >= half)[0]
    w0 = max(f[above[-1]] - f[above[0]], 2 * (f[1] - f[0]))
    p0 = [f[i], w0, v[i] - v.min(), v.min()]
    try:
        popt, _ = curve_fit(lorentzian, f, v, p0=p0, jac=_lorentzian_jac, maxfev=20000)
    except RuntimeError as exc:
        raise AmbiguousPeakError(f"Lorentzian fit did not converge: {exc}") from None
    center, width, amp, off = popt
    width = abs(width)
    resid = float(np.linalg.norm(lorentzian(f, *popt) - v) / max(np.linalg.norm(v), 1e-300))
    return PeakFit(center=float(center), width=float(width - 2 * spectrum.apodization),
                   amplitude=float(amp), offset=float(off), residual=resid, raw_width=float(width))


def dressed_qubit_state(spec: SystemSpec, which: str) -> np.ndarray:
    """Eigenvectors of ``(Omega_R sz + delta_nu sx) / 2``; ``up`` is the higher one."""
    if which not in ("up", "down"):
        raise InvalidParameterError(f"qubit state must be 'up' or 'down', got {which!r}")
    h = 0.5 * (spec.Omega_R * pauli("z").matrix + spec.delta_nu * pauli("x").matrix)
    _, vecs = np.linalg.eigh(h)
    return vecs[:, 1] if which == "up" else vecs[:, 0]


def shift_initial_state(spec: SystemSpec, qubit_state="up") -> State:
    q = State.from_ket(dressed_qubit_state(spec, qubit_state))
    return product_state([q, thermal_state(spec.n_fock, spec.n_th)])


def mechanical_peak(spec: SystemSpec, qubit_state="up", *, span=None, resolution=None,
                    apodization=None):
    """Fit of the spectral peak nearest ``omega_m``; returns ``(PeakFit, Spectrum)``."""
    model = qm_model(spec)
    kappa = oscillator_linewidth(model)
    if kappa <= 0:
        raise PreconditionError("simulated shifts need a damped oscillator (kappa_down > kappa_up)")
    delta = abs(spec.rabi_detuning)
    pull = spec.lam ** 2 / (4 * delta) if delta > spec.lam else spec.lam
    if span is None:
        span = 2 * pull + 10 * kappa
    res = kappa / 20 if resolution is None else resolution
    n = int(math.ceil(2 * span / res)) + 1
    freqs = spec.omega_m + np.linspace(-span, span, n)
    spectrum = spectral_density(model, shift_initial_state(spec, qubit_state), freqs,
                                linewidth=kappa, apodization=apodization)
    maxima = _local_maxima(spectrum.values)
    if not maxima:
        raise AmbiguousPeakError("no spectral peak found near omega_m")
    f = spectrum.freqs
    k = min(range(len(maxima)), key=lambda j: abs(f[maxima[j]] - spec.omega_m))
    c = f[maxima[k]]
    lo = 0.5 * (f[maxima[k - 1]] + c) if k > 0 else f[0]
    hi = 0.5 * (f[maxima[k + 1]] + c) if k + 1 < len(maxima) else f[-1]
    lo, hi = max(lo, c - 5 * kappa), min(hi, c + 5 * kappa)
    return fit_peak(spectrum, (lo, hi)), spectrum


def simulated_shift(spec: SystemSpec, qubit_state="up", **kw) -> float:
    """Mechanical frequency pull from the full master-equation spectrum [Hz]."""
    fit, _ = mechanical_peak(spec, qubit_state, **kw)
    return fit.center - spec.omega_m


def analytic_shift(lam, Omega_R, omega_m) -> float:
    """Second-order closed form ``lam^2 Omega_R / (2 (omega_m^2 - Omega_R^2))``.

    Positive below resonance; it is the size of the pull, equal to minus the
    upper-state ``eigen_shift`` in the dispersive regime.
    """
    den = 2 * (omega_m ** 2 - Omega_R ** 2)
    if den == 0:
        raise DivergenceError("analytic shift diverges at Omega_R = omega_m")
    return lam ** 2 * Omega_R / den


def uncoupled_basis(spec: SystemSpec) -> np.ndarray:
    """Columns are ``|q> (x) |n>`` with ``q`` ordered (down, up)."""
    q = np.column_stack([dressed_qubit_state(spec, "down"), dressed_qubit_state(spec, "up")])
    return np.kron(q, np.eye(spec.n_fock))


def labeled_levels(spec: SystemSpec, labels, min_overlap=0.5):
    """Energies of the eigenstates that best overlap ``(branch, n)`` product states.

    Raises ``LabelingError`` when the best overlap is below ``min_overlap`` or
    when two eigenstates share the product state almost equally (resonance).
    """
    E, V = np.linalg.eigh(build_qm_dressed(spec).matrix)
    overlap = np.abs(uncoupled_basis(spec).conj().T @ V) ** 2
    out = []
    for branch, n in labels:
        row = (1 if branch == "up" else 0) * spec.n_fock + n
        j = int(np.argmax(overlap[row]))
        if overlap[row, j] < min_overlap:
            raise LabelingError(f"state ({branch}, {n}) has maximal overlap {overlap[row, j]:.3f} < {min_overlap}")
        second = np.partition(overlap[row], -2)[-2]
        if overlap[row, j] - second < AMBIGUITY_GAP:
            raise LabelingError(f"state ({branch}, {n}) is split evenly between two eigenstates")
        out.append(E[j])
    return out


def eigen_shift(spec: SystemSpec) -> float:
    """``E(up, 1) - E(up, 0) - omega_m`` from exact diagonalization [Hz]."""
    e0, e1 = labeled_levels(spec, [("up", 0), ("up", 1)])
    return float(e1 - e0 - spec.omega_m)


@dataclass
class ThresholdPoint:
    delta_R: float
    delta_nu: float
    lam_min: float = float("nan")
    shift_at_min: float = float("nan")
    evaluations: int = 0
    status: str = "ok"
    history: list = field(default_factory=list)


def threshold_search(template: SystemSpec, delta_R, delta_nu=0.0, target=DEFAULT_TARGET_SHIFT, *,
                     lam_bounds=(100.0, 20e3), rel_tol=0.02, shift_fn=None) -> ThresholdPoint:
    """Smallest coupling whose |shift| reaches ``target`` for one detuning pair.

    ``delta_R`` is the signed Rabi detuning ``Omega_R - omega_m``. The shift
    must grow over ``lam_hi/4, lam_hi/2, lam_hi`` before bisection (in log
    coupling) is attempted; otherwise the point is reported as failed.
    """
    if not target > 0:
        raise InvalidParameterError("target shift must be > 0")
    shift_fn = shift_fn or simulated_shift
    pt = ThresholdPoint(delta_R, delta_nu)

    def f(lam):
        spec = template.replace(lam=lam, Omega_R=template.omega_m + delta_R, delta_nu=delta_nu)
        s = abs(shift_fn(spec))
        pt.evaluations += 1
        pt.history.append((lam, s))
        return s

    lo, hi = lam_bounds
    try:
        probe = [f(hi / 4), f(hi / 2), f(hi)]
        if not (probe[0] < probe[1] < probe[2]):
            pt.status = "non-monotonic"
            return pt
        if probe[2] < target:
            pt.status = "not-reached"
            return pt
        s_lo = f(lo)
        if s_lo >= target:
            pt.lam_min, pt.shift_at_min, pt.status = lo, s_lo, "below-bracket"
            return pt
        s_hi = probe[2]
        while hi / lo > 1 + rel_tol:
            mid = math.sqrt(lo * hi)
            s = f(mid)
            if s >= target:
                hi, s_hi = mid, s
            else:
                lo = mid
        pt.lam_min, pt.shift_at_min = hi, s_hi
    except SpinBusError as exc:
        pt.status = f"error: {type(exc).__name__}"
    return pt


def threshold_sweep(detunings, target=DEFAULT_TARGET_SHIFT, template: SystemSpec | None = None,
                    **kw) -> list[ThresholdPoint]:
    """``threshold_search`` over ``(delta_R, delta_nu)`` pairs; failures do not stop the sweep."""
    if template is None:
        raise InvalidParameterError("threshold_sweep needs a SystemSpec template")
    return [threshold_search(template, dR, dn, target, **kw) for dR, dn in detunings]
