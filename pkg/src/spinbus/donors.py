"""Donor spin levels, transition gradients and spin-mechanics coupling estimates.

Spin Hamiltonian in Hz: ``A S.I + gamma_e B S_z - gamma_n B I_z`` on
``[electron (2), nucleus (2I+1)]``. Levels are labeled by the high-field
quantum numbers ``(m_S, m_I)``; since ``m_S + m_I`` is conserved the labels
follow each level adiabatically down to zero field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.constants import hbar

from .errors import (InvalidParameterError, ProfileParseError, ProfileRangeError, StencilError)
from .hilbert import HilbertSpace, Operator


@dataclass(frozen=True)
class DonorSpecies:
    name: str
    gamma_e: float
    gamma_n: float
    I: float
    A_hf: float
    strain_coeff: float
    source: str = ""

    def __post_init__(self):
        if not self.gamma_e > 0:
            raise InvalidParameterError(f"gamma_e must be > 0 (got {self.gamma_e})")
        if self.I < 0 or not float(2 * self.I).is_integer():
            raise InvalidParameterError(f"nuclear spin must be a non-negative half-integer (got {self.I})")
        for k in ("gamma_n", "A_hf", "strain_coeff"):
            if not np.isfinite(getattr(self, k)):
                raise InvalidParameterError(f"{k} must be finite")

    @property
    def n_nuclear(self) -> int:
        return int(round(2 * self.I)) + 1

    @property
    def n_levels(self) -> int:
        return 2 * self.n_nuclear


_SPECIES_KEYS = {"name": str, "gamma_e": float, "gamma_n": float, "I": lambda s: float(Fraction(s)),
                 "A_hf": float, "strain_coeff": float}


def load_species(path_or_name) -> DonorSpecies:
    """Read a ``key = value`` species file, or a bundled species by name."""
    path = Path(path_or_name)
    if not path.exists():
        ref = resources.files("spinbus") / "data" / "species" / f"{path_or_name}.txt"
        if not ref.is_file():
            raise FileNotFoundError(f"no species file or bundled species named {path_or_name!r}")
        text, path = ref.read_text(encoding="utf-8"), Path(str(ref))
    else:
        text = path.read_text(encoding="utf-8")
    values, notes = {}, []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            if line:
                notes.append(line.lstrip("# "))
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or key not in _SPECIES_KEYS:
            raise ProfileParseError(f"{path}:{lineno}: expected one of {sorted(_SPECIES_KEYS)} as key=value")
        try:
            values[key] = _SPECIES_KEYS[key](val)
        except (ValueError, ZeroDivisionError):
            raise ProfileParseError(f"{path}:{lineno}: cannot parse value {val!r} for {key}") from None
    missing = set(_SPECIES_KEYS) - set(values)
    if missing:
        raise ProfileParseError(f"{path}: missing keys {sorted(missing)}")
    return DonorSpecies(source=" ".join(notes), **values)


def spin_matrices(j: float):
    """``(Jx, Jy, Jz)`` in the ``|j, m>`` basis ordered m = j, j-1, ..., -j."""
    m = np.arange(j, -j - 1, -1)
    jp = np.diag(np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1)), 1)
    return 0.5 * (jp + jp.T), (jp - jp.T) / 2j, np.diag(m).astype(complex)


def spin_hamiltonian(species: DonorSpecies, B: float) -> Operator:
    if B < 0:
        raise InvalidParameterError(f"field must be >= 0 (got {B})")
    S = spin_matrices(0.5)
    In = spin_matrices(species.I)
    eS, eI = np.eye(2), np.eye(species.n_nuclear)
    H = sum(species.A_hf * np.kron(s, i) for s, i in zip(S, In))
    H = H + species.gamma_e * B * np.kron(S[2], eI) - species.gamma_n * B * np.kron(eS, In[2])
    return Operator(HilbertSpace((2, species.n_nuclear)), H)


def labeled_levels(species: DonorSpecies, B: float) -> dict:
    """Energies [Hz] keyed by ``(m_S, m_I)``.

    Each fixed ``m_F = m_S + m_I`` block is at most 2x2; its upper level is
    the ``m_S = +1/2`` member.
    """
    H = spin_hamiltonian(species, B).matrix.real
    I = species.I
    m_I = [float(m) for m in np.arange(I, -I - 1, -1)]
    index = {(ms, mi): k * species.n_nuclear + j for k, ms in enumerate((0.5, -0.5)) for j, mi in enumerate(m_I)}
    levels = {}
    for mF in np.arange(I + 0.5, -I - 1.5, -1):
        members = [(ms, mF - ms) for ms in (0.5, -0.5) if (ms, mF - ms) in index]
        idx = [index[m] for m in members]
        e = np.linalg.eigvalsh(H[np.ix_(idx, idx)])
        if len(members) == 1:
            levels[members[0]] = e[0]
        else:
            levels[(0.5, mF - 0.5)], levels[(-0.5, mF + 0.5)] = e[1], e[0]
    return levels


def esr_transitions(species: DonorSpecies):
    """Electron-spin-flip pairs ``((-1/2, m_I), (+1/2, m_I))``."""
    I = species.I
    return [((-0.5, float(mi)), (0.5, float(mi))) for mi in np.arange(I, -I - 1, -1)]


def transition_frequency(species: DonorSpecies, B: float, transition) -> float:
    lv = labeled_levels(species, B)
    try:
        return float(abs(lv[tuple(transition[1])] - lv[tuple(transition[0])]))
    except KeyError:
        raise InvalidParameterError(f"unknown level pair {transition!r}") from None


def resonance_fields(species: DonorSpecies, freq: float, B_max=2.0, n_scan=2000):
    """Every ``(B, transition)`` with an ESR transition at ``freq``, sorted by field."""
    grid = np.linspace(1e-6, B_max, n_scan)
    out = []
    for tr in esr_transitions(species):
        g = np.array([transition_frequency(species, b, tr) for b in grid]) - freq
        for k in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]:
            B = brentq(lambda b: transition_frequency(species, b, tr) - freq, grid[k], grid[k + 1], xtol=1e-14)
            out.append((B, tr))
    return sorted(out)


def lowest_field_transition(species: DonorSpecies, freq: float):
    found = resonance_fields(species, freq)
    if not found:
        raise InvalidParameterError(f"no ESR transition reaches {freq:g} Hz below the scan limit")
    return found[0]


def _ranks(species, B, transition):
    lv = labeled_levels(species, B)
    order = sorted(lv, key=lv.get)
    return tuple(order.index(tuple(t)) for t in transition)


def transition_gradient(species: DonorSpecies, B: float, transition=None) -> float:
    """``d f / d B`` [Hz/T] by a Richardson-refined centered difference.

    ``transition`` defaults to the first ESR pair; for a spin without nucleus
    the gap is exactly ``gamma_e B``.
    """
    if not B > 0:
        raise InvalidParameterError(f"field must be > 0 (got {B})")
    if transition is None:
        transition = esr_transitions(species)[0]
    if species.I == 0:
        return float(species.gamma_e)
    h = max(1e-6, 1e-6 * B)
    if B - h <= 0:
        raise StencilError("stencil reaches zero field")
    if len({_ranks(species, b, transition) for b in (B - h, B, B + h)}) != 1:
        raise StencilError(f"level crossing within [{B - h:g}, {B + h:g}] T")
    f = lambda b: transition_frequency(species, b, transition)
    d1 = (f(B + h) - f(B - h)) / (2 * h)
    d2 = (f(B + h / 2) - f(B - h / 2)) / h
    return float((4 * d2 - d1) / 3)


@dataclass(frozen=True)
class MechanicalMode:
    """Zero-point displacement [m]; ``omega_m`` is a cyclic frequency [Hz]."""

    x_zpf: float
    omega_m: float | None = None
    m_eff: float | None = None

    def __post_init__(self):
        if not self.x_zpf > 0:
            raise InvalidParameterError(f"x_zpf must be > 0 (got {self.x_zpf})")
        if self.omega_m is not None and self.m_eff is not None:
            expected = zero_point_displacement(self.m_eff, self.omega_m)
            if abs(self.x_zpf - expected) > 0.05 * expected:
                raise InvalidParameterError(
                    f"x_zpf = {self.x_zpf:.3e} m inconsistent with m_eff and omega_m ({expected:.3e} m)")


def zero_point_displacement(m_eff: float, omega_m: float) -> float:
    return math.sqrt(hbar / (2 * m_eff * 2 * math.pi * omega_m))


def gradient_coupling(species: DonorSpecies, mode: MechanicalMode, gradB: float, B_bias: float,
                      transition=None) -> float:
    """Coupling [Hz] from a field gradient [T/m] acting over the zero-point motion."""
    return transition_gradient(species, B_bias, transition) * gradB * mode.x_zpf


def strain_coupling(species: DonorSpecies, strain_per_zpf: float) -> float:
    if not np.isfinite(strain_per_zpf):
        raise InvalidParameterError("strain must be finite")
    return species.strain_coeff * strain_per_zpf


def ensemble_coupling(lambda_1: float, n: int) -> float:
    if int(n) != n or n < 1:
        raise InvalidParameterError(f"ensemble size must be an integer >= 1 (got {n})")
    return math.sqrt(int(n)) * lambda_1


@dataclass(frozen=True, eq=False)
class FieldProfile:
    distance: np.ndarray
    values: np.ndarray
    kind: str
    note: str = ""

    def __post_init__(self):
        d, v = np.asarray(self.distance, float), np.asarray(self.values, float)
        if d.ndim != 1 or d.shape != v.shape or len(d) < 2:
            raise ProfileParseError("profile needs at least two samples of equal length")
        if np.any(np.diff(d) <= 0):
            raise ProfileParseError("profile distances must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ProfileParseError("profile values must be finite")
        object.__setattr__(self, "distance", d)
        object.__setattr__(self, "values", v)


PROFILE_KINDS = ("gradient", "strain")


def load_profile(path, kind: str) -> FieldProfile:
    """Read a two-column ``distance_m value`` text profile.

    A bare name such as ``"magnet_310nm"`` selects a bundled profile.
    """
    if kind not in PROFILE_KINDS:
        raise InvalidParameterError(f"profile kind must be one of {PROFILE_KINDS}")
    p = Path(path)
    if not p.exists():
        ref = resources.files("spinbus") / "data" / "profiles" / f"{path}.txt"
        if not ref.is_file():
            raise FileNotFoundError(f"no profile file or bundled profile named {path!r}")
        text = ref.read_text(encoding="utf-8")
    else:
        text = p.read_text(encoding="utf-8")
    xs, ys, notes = [], [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            notes.append(s.lstrip("# "))
            continue
        parts = s.split()
        if len(parts) != 2:
            raise ProfileParseError(f"line {lineno}: expected two columns, got {len(parts)}")
        try:
            x, y = float(parts[0]), float(parts[1])
        except ValueError:
            raise ProfileParseError(f"line {lineno}: non-numeric value in {s!r}") from None
        if not (np.isfinite(x) and np.isfinite(y)):
            raise ProfileParseError(f"line {lineno}: non-finite value")
        if xs and x <= xs[-1]:
            raise ProfileParseError(f"line {lineno}: distance {x} not greater than previous {xs[-1]}")
        xs.append(x)
        ys.append(y)
    if len(xs) < 2:
        raise ProfileParseError(f"{path}: fewer than two samples")
    return FieldProfile(np.array(xs), np.array(ys), kind, "\n".join(notes))


def interp(profile: FieldProfile, x):
    """Monotone cubic (PCHIP) interpolation; raises outside the sampled range."""
    xq = np.asarray(x, dtype=float)
    d = profile.distance
    if np.any(xq < d[0]) or np.any(xq > d[-1]):
        raise ProfileRangeError(f"query outside sampled range [{d[0]:g}, {d[-1]:g}] m")
    out = np.asarray(PchipInterpolator(d, profile.values)(xq), dtype=float)
    # exact sample values at the knots
    k = np.clip(np.searchsorted(d, xq), 0, len(d) - 1)
    hit = d[k] == xq
    out = np.where(hit, profile.values[k], out)
    return float(out) if out.ndim == 0 else out
