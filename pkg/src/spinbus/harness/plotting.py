"""Vector-graphic figures for result tables."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
# fixed salt so element ids, and hence the SVG bytes, are reproducible
matplotlib.rcParams["svg.hashsalt"] = "spinbus"
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..errors import PreconditionError  # noqa: E402
from .table import ResultTable  # noqa: E402

# (x column, y column, value column) for heatmaps; (x, [y columns]) for line charts
HEATMAPS = {
    "eigen-map": ("Omega_R", "delta_nu", "shift_Hz"),
    "threshold-map": ("delta_R", "delta_nu", "lam_min"),
    "gate-sweep": ("detuning_ratio", "lam", "fidelity"),
}
LINES = {
    "shift-sweep": ("lam", ["shift_Hz", "eigen_shift_Hz"]),
    "gamma-sweep": ("gamma_pct", ["fidelity", "fidelity_uncompensated"]),
    "donor-coupling": ("distance", ["lam"]),
    "spectrum": ("freq", ["S_bar"]),
    "threshold-map": ("delta_R", ["lam_min"]),
    "gate-sweep": ("detuning_ratio", ["fidelity", "fidelity_uncompensated"]),
}

SVG_METADATA = {"Date": None, "Creator": None}


def axis_label(table: ResultTable, column: str) -> str:
    unit = table.units[table.columns.index(column)]
    return f"{column} [{unit}]" if unit else column


def _numeric(table, col):
    return np.array([v if isinstance(v, (int, float)) else math.nan for v in table.column(col)], dtype=float)


def plot(table: ResultTable, kind: str | None, path) -> Path:
    """Heatmap when both grid axes vary, otherwise a line chart; written as SVG."""
    if not table.rows:
        raise PreconditionError("cannot plot an empty table")
    kind = kind or table.kind
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    try:
        heat = HEATMAPS.get(kind)
        if heat and all(len(set(table.column(c))) > 1 for c in heat[:2]):
            xc, yc, zc = heat
            xs, ys = sorted(set(_numeric(table, xc))), sorted(set(_numeric(table, yc)))
            Z = np.full((len(ys), len(xs)), np.nan)
            for x, y, z in zip(_numeric(table, xc), _numeric(table, yc), _numeric(table, zc)):
                Z[ys.index(y), xs.index(x)] = z
            mesh = ax.pcolormesh(xs, ys, Z, shading="nearest")
            fig.colorbar(mesh, ax=ax, label=axis_label(table, zc))
            ax.set_xlabel(axis_label(table, xc))
            ax.set_ylabel(axis_label(table, yc))
        else:
            xc, ycols = LINES[kind]
            x = _numeric(table, xc)
            order = np.argsort(x)
            for yc in ycols:
                ax.plot(x[order], _numeric(table, yc)[order], marker="o" if len(x) < 50 else None,
                        label=axis_label(table, yc))
            ax.set_xlabel(axis_label(table, xc))
            ax.set_ylabel(axis_label(table, ycols[0]))
            if len(ycols) > 1:
                ax.legend()
        ax.set_title(kind)
        fig.tight_layout()
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata=SVG_METADATA)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path
