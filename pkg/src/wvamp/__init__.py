"""Post-selected pointer shifts in weak-value amplification.

Numerical tools for the shift of a probe's position mean after a
post-selected von Neumann interaction with a two-valued observable, for
arbitrary probe wave functions in rescaled momentum ``k = g*p``.
"""

from .model import WeakValue, SpinScenario, weak_value_spin
from .quadrature import Interval, QuadratureConfig, ShiftReport, pointer_shift
from .probes import (
    ArbitraryShiftProbe,
    GaussianProbe,
    SSHOptimalProbe,
    TabulatedProbe,
    VariationalProbe,
    variational_probe,
)

__all__ = [
    "WeakValue", "SpinScenario", "weak_value_spin",
    "Interval", "QuadratureConfig", "ShiftReport", "pointer_shift",
    "ArbitraryShiftProbe", "GaussianProbe", "SSHOptimalProbe", "TabulatedProbe",
    "VariationalProbe", "variational_probe",
]
