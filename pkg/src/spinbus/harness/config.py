"""Run configuration: TOML files, defaults, validation and fingerprints.

A config file has top-level ``kind``/``seed``/``workers``/``timeout_s`` keys
and the sections ``[system]``, ``[grid]`` and (for searches) ``[search]``.
Grid axes are either explicit lists or ``{start, stop, num}`` tables, with
optional ``scale = "log"``. Every default is written into the materialized
config, and the fingerprint hashes everything except the worker count and the
output directory, which do not change results.
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

KINDS = ("eigen-map", "shift-sweep", "threshold-map", "gate-sweep", "gamma-sweep", "donor-coupling", "spectrum")

_RATES = dict(rate_scale=1.0)

DEFAULTS = {
    "eigen-map": dict(
        system=dict(omega_m=1e6, lam=1e3, n_fock=8),
        grid=dict(Omega_R=None, delta_nu=[0.0]),
    ),
    "shift-sweep": dict(
        system=dict(omega_m=1e5, delta_R=-2e4, delta_nu=0.0, n_fock=8, n_th=0.0, qubit_state="up",
                    resolution_fraction=0.05, **_RATES),
        grid=dict(lam=None),
    ),
    "threshold-map": dict(
        system=dict(omega_m=1e5, n_fock=16, n_th=3.0, **_RATES),
        grid=dict(delta_R=None, delta_nu=[0.0]),
        search=dict(target=200.0, lam_lo=100.0, lam_hi=2e4, rel_tol=0.02),
    ),
    "gate-sweep": dict(
        system=dict(omega_m=1e6, n_th=0.0, gamma_pct=100.0, n_fock=0, delta_nu=0.0),
        grid=dict(lam=None, detuning_ratio=None),
        search=dict(compensate=True, n_times=201, t_span=2.5, refine=True),
    ),
    "gamma-sweep": dict(
        system=dict(omega_m=1e6, lam=2e4, delta_R=-1e5, n_th=0.0, n_fock=0, delta_nu=0.0),
        grid=dict(gamma_pct=None),
        search=dict(compensate=True, n_times=201, t_span=2.5, refine=True),
    ),
    "donor-coupling": dict(
        system=dict(species="bismuth", profile="magnet_310nm", x_zpf=1e-13, frequency=9.7e9, B_bias=0.0),
        grid=dict(distance=None),
    ),
    "spectrum": dict(
        system=dict(omega_m=1e5, delta_R=-2e4, lam=1e3, delta_nu=0.0, n_fock=8, n_th=0.0, qubit_state="up",
                    span=0.0, resolution_fraction=0.05, **_RATES),
        grid=dict(),
    ),
}

_POSITIVE = {"omega_m", "lam", "x_zpf", "frequency", "target", "lam_lo", "lam_hi", "rel_tol", "t_span",
             "resolution_fraction"}
_NONNEG = {"n_th", "gamma_pct", "rate_scale", "B_bias", "span"}
_INTEGER = {"n_fock", "n_times"}
_STRING = {"qubit_state", "species", "profile"}
_BOOL = {"compensate", "refine"}


@dataclass
class RunConfig:
    kind: str
    system: dict
    grid: dict
    search: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    timeout_s: float = 600.0
    out: str = "results"

    def materialized(self) -> dict:
        return dict(kind=self.kind, seed=self.seed, timeout_s=self.timeout_s, system=self.system,
                    grid=self.grid, search=self.search)

    @property
    def fingerprint(self) -> str:
        text = json.dumps(self.materialized(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def expand_axis(spec):
    """Grid axis from a list or a ``{start, stop, num, scale}`` table."""
    if isinstance(spec, dict):
        start, stop, num = float(spec["start"]), float(spec["stop"]), int(spec["num"])
        if spec.get("scale", "linear") == "log":
            return [float(v) for v in np.geomspace(start, stop, num)]
        return [float(v) for v in np.linspace(start, stop, num)]
    return [float(v) for v in spec]


def _check_value(section, key, value, problems):
    where = f"{section}.{key}"
    if key in _STRING:
        if not isinstance(value, str):
            problems.append(f"{where} must be a string")
        elif key == "qubit_state" and value not in ("up", "down"):
            problems.append(f"{where} must be 'up' or 'down'")
        return
    if key in _BOOL:
        if not isinstance(value, bool):
            problems.append(f"{where} must be true or false")
        return
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append(f"{where} must be a number")
        return
    if not np.isfinite(value):
        problems.append(f"{where} must be finite")
    elif key in _INTEGER and (int(value) != value or value < 0):
        problems.append(f"{where} must be a non-negative integer")
    elif key == "n_fock" and 0 < value < 2:
        problems.append(f"{where} must be >= 2 (or 0 for automatic)")
    elif key in _POSITIVE and value <= 0:
        problems.append(f"{where} must be > 0")
    elif key in _NONNEG and value < 0:
        problems.append(f"{where} must be >= 0")


def from_dict(raw: dict, *, kind=None, out=None, workers=None) -> RunConfig:
    """Merge ``raw`` over the defaults for its kind; raise ``ConfigError`` listing every problem."""
    raw = copy.deepcopy(raw)
    problems = []
    k = raw.pop("kind", None) or kind
    if kind is not None and k != kind:
        problems.append(f"config kind {k!r} does not match requested experiment {kind!r}")
    if k not in KINDS:
        raise ConfigError(problems + [f"kind must be one of {', '.join(KINDS)} (got {k!r})"])
    defaults = DEFAULTS[k]
    sections = {}
    for sec in ("system", "grid", "search"):
        base = copy.deepcopy(defaults.get(sec, {}))
        given = raw.pop(sec, {}) or {}
        if not isinstance(given, dict):
            problems.append(f"[{sec}] must be a table")
            given = {}
        for key, val in given.items():
            if key not in base and not (k == "gate-sweep" and sec == "grid" and key == "delta_R"):
                problems.append(f"unknown key {sec}.{key} for {k}")
                continue
            base[key] = val
        sections[sec] = base
    seed = raw.pop("seed", 0)
    w = raw.pop("workers", 1)
    timeout = raw.pop("timeout_s", 600.0)
    o = raw.pop("out", "results")
    for key in raw:
        problems.append(f"unknown top-level key {key!r}")
    for key, val in list(sections["system"].items()) + list(sections["search"].items()):
        _check_value("system" if key in sections["system"] else "search", key, val, problems)
    grid = sections["grid"]
    if k == "gate-sweep" and "delta_R" in grid:
        if grid.get("detuning_ratio") is not None:
            problems.append("give either grid.delta_R or grid.detuning_ratio, not both")
        grid.pop("detuning_ratio", None)
    for key, val in list(grid.items()):
        if val is None:
            problems.append(f"grid.{key} is required for {k}")
            continue
        try:
            axis = expand_axis(val)
        except (KeyError, TypeError, ValueError):
            problems.append(f"grid.{key} must be a list of numbers or a {{start, stop, num}} table")
            continue
        if not axis:
            problems.append(f"grid.{key} must not be empty")
        elif not all(np.isfinite(axis)):
            problems.append(f"grid.{key} must be finite")
        grid[key] = axis
    for key in ("lam", "Omega_R", "gamma_pct", "distance"):
        if isinstance(grid.get(key), list) and any(v < 0 for v in grid[key]):
            problems.append(f"grid.{key} values must be >= 0")
    if k == "threshold-map" and sections["search"].get("lam_lo", 0) >= sections["search"].get("lam_hi", 0):
        problems.append("search.lam_lo must be below search.lam_hi")
    if not isinstance(seed, int) or isinstance(seed, bool):
        problems.append("seed must be an integer")
    if workers is not None:
        w = workers
    if not isinstance(w, int) or isinstance(w, bool) or w < 1:
        problems.append("workers must be an integer >= 1")
    if isinstance(timeout, bool) or not isinstance(timeout, (int, float)) or not timeout > 0:
        problems.append("timeout_s must be > 0")
    if problems:
        raise ConfigError(problems)
    return RunConfig(kind=k, system=sections["system"], grid=grid, search=sections["search"], seed=seed,
                     workers=w, timeout_s=float(timeout), out=str(out or o))


def load_config(path, **kw) -> RunConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: {exc}"]) from None
    return from_dict(raw, **kw)
