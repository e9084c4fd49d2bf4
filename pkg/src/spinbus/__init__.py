"""Simulation toolkit for driven spin qubits coupled through a mechanical resonator."""

__version__ = "0.1.0"

from .dynamics import LindbladModel, Trajectory, correlation, evolve, lindblad_rhs, steady_state  # noqa: E402
from .hilbert import HilbertSpace, Operator, State  # noqa: E402
from .models import SystemSpec, TwoQubitSpec  # noqa: E402

__all__ = ["HilbertSpace", "LindbladModel", "Operator", "State", "SystemSpec", "Trajectory", "TwoQubitSpec",
           "correlation", "evolve", "lindblad_rhs", "steady_state"]
