"""Weak value, measurement kernel and the closed-form pointer shifts.

Everything is expressed in rescaled units ``x = q/g`` and ``k = g p``, so the
coupling strength never appears.  For an observable with ``A**2 = 1`` the
post-selected interaction multiplies the momentum-space probe by

    B(k) = cos k - i A_w sin k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateWeakValue, OrthogonalPostSelection


@dataclass(frozen=True)
class WeakValue:
    """Complex weak value ``A_w`` with nonzero real part.

    ``sigma`` is the sign of ``Re(A_w)`` and ``z = (1 - sigma A_w)/(1 + sigma A_w)``.
    """

    value: complex
    sigma: int = field(init=False)
    z: complex = field(init=False)

    def __post_init__(self):
        value = complex(self.value)
        if not (math.isfinite(value.real) and math.isfinite(value.imag)):
            raise DegenerateWeakValue(f"weak value must be finite, got {value!r}")
        if value.real == 0.0:
            raise DegenerateWeakValue(
                f"Re(A_w) = 0 leaves sigma and z undefined (A_w = {value!r})"
            )
        sigma = 1 if value.real > 0 else -1
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "z", (1 - sigma * value) / (1 + sigma * value))

    @property
    def re(self) -> float:
        return self.value.real

    @property
    def im(self) -> float:
        return self.value.imag

    @property
    def abs_sq(self) -> float:
        return abs(self.value) ** 2

    def kernel_coefficients(self) -> tuple[float, float, float]:
        """``(a, b, c)`` with ``|B(k)|**2 = a + b cos 2k + c sin 2k``."""
        return (1 + self.abs_sq) / 2, (1 - self.abs_sq) / 2, self.im

    def kernel_range(self) -> tuple[float, float]:
        """Minimum and maximum of ``|B(k)|**2`` over a period."""
        a, b, c = self.kernel_coefficients()
        r = math.hypot(b, c)
        return a - r, a + r


def as_weak_value(aw) -> WeakValue:
    return aw if isinstance(aw, WeakValue) else WeakValue(aw)


@dataclass(frozen=True)
class SpinScenario:
    """Spin 1/2 prepared along +Z, measured along X, post-selected in the XZ
    plane at angle ``theta`` from Z."""

    theta: float

    def __post_init__(self):
        theta = float(self.theta)
        if not math.isfinite(theta) or theta < 0 or theta > math.pi:
            raise OrthogonalPostSelection(f"theta must lie in [0, pi), got {theta!r}")
        if theta == math.pi:
            raise OrthogonalPostSelection("theta = pi makes <f|i> = 0")
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class KernelValue:
    b: np.ndarray
    b_abs_sq: np.ndarray
    b_star_bprime: np.ndarray


def weak_value_spin(scenario: SpinScenario | float) -> WeakValue:
    """``A_w = sin(theta)/(1 + cos(theta)) = tan(theta/2)``."""
    if not isinstance(scenario, SpinScenario):
        scenario = SpinScenario(scenario)
    theta = scenario.theta
    if theta == 0.0:
        raise DegenerateWeakValue("theta = 0 gives Re(A_w) = 0")
    return WeakValue(complex(math.sin(theta) / (1 + math.cos(theta)), 0.0))


def kernel_b(aw: WeakValue, k):
    k = np.asarray(k, dtype=float)
    return np.cos(k) - 1j * aw.value * np.sin(k)


def kernel_bprime(aw: WeakValue, k):
    k = np.asarray(k, dtype=float)
    return -np.sin(k) - 1j * aw.value * np.cos(k)


def kernel_abs_sq(aw: WeakValue, k):
    """Closed trigonometric form of ``|B(k)|**2``."""
    a, b, c = aw.kernel_coefficients()
    k2 = 2 * np.asarray(k, dtype=float)
    return a + b * np.cos(k2) + c * np.sin(k2)


def kernel_star_bprime(aw: WeakValue, k):
    """Closed trigonometric form of ``conj(B) B'``; its imaginary part is ``-Re(A_w)``."""
    _, b, c = aw.kernel_coefficients()
    k2 = 2 * np.asarray(k, dtype=float)
    return -b * np.sin(k2) + c * np.cos(k2) - 1j * aw.re


def kernel(aw: WeakValue, k) -> KernelValue:
    b = kernel_b(aw, k)
    return KernelValue(b=b, b_abs_sq=kernel_abs_sq(aw, k), b_star_bprime=kernel_star_bprime(aw, k))


def shift_weak(aw: WeakValue) -> float:
    """Pointer shift of an ideally weak measurement, ``Re(A_w)``."""
    return as_weak_value(aw).re


def shift_strong(aw: WeakValue) -> float:
    """Pointer shift of an ideally strong measurement, ``2 Re(A_w)/(1 + |A_w|**2)``."""
    aw = as_weak_value(aw)
    return 2 * aw.re / (1 + aw.abs_sq)


def shift_ssh_claimed(aw: WeakValue) -> float:
    """Shift ``(1 + |A_w|**2)/(2 Re A_w)`` claimed to be the maximum."""
    aw = as_weak_value(aw)
    return (1 + aw.abs_sq) / (2 * aw.re)


def self_test(n_points: int = 64, seed: int = 0) -> None:
    """Check the trigonometric expansions of ``|B|**2`` and ``B* B'`` against
    direct complex arithmetic.  Raises ``RuntimeError`` on mismatch."""
    rng = np.random.default_rng(seed)
    re = rng.uniform(0.05, 4.0, n_points) * rng.choice([-1, 1], n_points)
    im = rng.uniform(-4.0, 4.0, n_points)
    ks = rng.uniform(-2 * np.pi, 2 * np.pi, n_points)
    for r, i, k in zip(re, im, ks):
        aw = WeakValue(complex(r, i))
        b = kernel_b(aw, k)
        direct_sq = abs(b) ** 2
        direct_prod = np.conj(b) * kernel_bprime(aw, k)
        scale = 1 + aw.abs_sq
        if abs(direct_sq - kernel_abs_sq(aw, k)) > 1e-12 * scale:
            raise RuntimeError(f"|B|^2 expansion mismatch at A_w={aw.value}, k={k}")
        if abs(direct_prod - kernel_star_bprime(aw, k)) > 1e-12 * scale:
            raise RuntimeError(f"B*B' expansion mismatch at A_w={aw.value}, k={k}")
