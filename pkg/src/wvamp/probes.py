"""Probe wave functions in the momentum representation.

Families:

* :class:`GaussianProbe` -- the usual pointer state, weak or strong.
* :class:`SSHOptimalProbe` -- the probe claimed optimal for a fixed weak
  value, ``sqrt(|Re A_w|/pi) exp(-i x_f k) / B(k)`` on ``[-pi/2, pi/2]``.
* :class:`ArbitraryShiftProbe` -- ``exp(-i alpha G(k)) / B(k)`` on
  ``[-n pi/2, n pi/2]``, whose shift is affine in ``alpha``.
* :class:`VariationalProbe` -- the stationary point of the shift functional,
  ``exp(-i x_f k - i kappa H(k)) / sqrt(|D(k)|)`` with ``D = |B|**2 - m``.
* :class:`TabulatedProbe` -- cubic interpolation of sampled amplitudes.

Every probe exposes ``evaluate(k) -> (value, derivative)`` and
``density_current(k) -> (|xi|**2, conj(xi) xi')``; the latter is what the
pointer moments consume.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    DegenerateWeakValue,
    EvaluationAtSingularity,
    MeanKernelNormOutOfRange,
    NoSingularPointInInterval,
    OutOfSupport,
    ScenarioError,
    TrivialWeakValue,
)
from .model import (
    WeakValue,
    as_weak_value,
    kernel_abs_sq,
    kernel_b,
    kernel_bprime,
    kernel_star_bprime,
    shift_ssh_claimed,
)
from .quadrature import DEFAULT_CONFIG, Interval, QuadratureConfig, integrate, pointer_shift

HALF_PI = 0.5 * math.pi
STRONG_SUPPORT_CAP = 64.0


# ---------------------------------------------------------------------------
# primitives


def primitive_g(aw: WeakValue, k):
    """Continuous primitive of ``1/|B(k)|**2`` with ``G(0) = 0``.

    With ``t = tan k`` the antiderivative is
    ``arctan((|A_w|**2 t + Im A_w)/|Re A_w|)/|Re A_w|``; each branch of
    ``tan`` crossed adds ``pi/|Re A_w|``.
    """
    aw = as_weak_value(aw)
    k = np.asarray(k, dtype=float)
    ar = abs(aw.re)
    j = np.round(k / math.pi)
    r = k - j * math.pi
    angle = np.arctan2(aw.abs_sq * np.sin(r) + aw.im * np.cos(r), ar * np.cos(r))
    return (angle + j * math.pi - math.atan2(aw.im, ar)) / ar


class PrimitiveG:
    """Callable wrapper around :func:`primitive_g` for one weak value."""

    def __init__(self, aw):
        self.aw = as_weak_value(aw)
        self.period_increment = math.pi / abs(self.aw.re)

    def __call__(self, k):
        return primitive_g(self.aw, k)

    def derivative(self, k):
        return 1.0 / kernel_abs_sq(self.aw, k)


def zeros_of_d(aw: WeakValue, m: float, iv: Interval) -> tuple[float, ...]:
    """Zeros of ``D(k) = |B(k)|**2 - m`` inside ``iv``, sorted."""
    aw = as_weak_value(aw)
    a, b, c = aw.kernel_coefficients()
    r = math.hypot(b, c)
    if r == 0:
        return ()
    gamma = (m - a) / r
    if abs(gamma) > 1:
        return ()
    phi = math.atan2(c, b)
    base = math.acos(gamma)
    found = []
    j_lo = math.floor(iv.k_minus / math.pi) - 2
    j_hi = math.ceil(iv.k_plus / math.pi) + 2
    for j in range(j_lo, j_hi + 1):
        for sign in (1, -1):
            k0 = 0.5 * (phi + sign * base) + j * math.pi
            if iv.k_minus <= k0 <= iv.k_plus:
                found.append(k0)
    out = []
    for k0 in sorted(found):
        if not out or abs(k0 - out[-1]) > 1e-14:
            out.append(k0)
    return tuple(out)


def _near_any(k, points, rtol: float = 1e-12) -> bool:
    """True if some ``k`` lies within rounding distance of one of ``points``."""
    if not len(points):
        return False
    pts = np.asarray(points, dtype=float)
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return bool(np.any(np.abs(k[:, None] - pts[None, :]) <= rtol * (1 + np.abs(pts))))


class PrimitiveH:
    """Primitive of ``1/D(k)`` on each sub-interval between zeros of ``D``.

    ``D`` changes sign at its zeros and ``1/D`` is not integrable there, so
    the primitive is defined piecewise, anchored to zero at the midpoint of
    each piece.  Values are computed by adaptive quadrature.
    """

    def __init__(self, aw, m: float, iv: Interval, cfg: QuadratureConfig | None = None):
        self.aw = as_weak_value(aw)
        self.m = float(m)
        self.iv = iv
        self.singular_points = zeros_of_d(self.aw, self.m, iv)
        self.cfg = cfg or QuadratureConfig(rel_tol=1e-13, abs_tol=1e-14, max_subdivisions=8192)
        edges = [iv.k_minus, *self.singular_points, iv.k_plus]
        self._pieces = [(lo, hi) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]
        self._anchors = np.array([0.5 * (lo + hi) for lo, hi in self._pieces])
        self._edges = np.array(edges)

    def d(self, k):
        return kernel_abs_sq(self.aw, k) - self.m

    def __call__(self, k):
        k = np.atleast_1d(np.asarray(k, dtype=float))
        if _near_any(k, self.singular_points):
            raise EvaluationAtSingularity("H is undefined at the zeros of D")
        piece = np.clip(np.searchsorted(self._edges, k, side="right") - 1, 0, len(self._pieces) - 1)
        anchor = self._anchors[piece]
        span = k - anchor

        def integrand(t):
            pts = anchor[None, :] + t[:, None] * span[None, :]
            return span[None, :] / self.d(pts)

        value, _ = integrate(integrand, (0.0, 1.0), self.cfg)
        return np.asarray(value, dtype=float)


# ---------------------------------------------------------------------------
# probe families


@dataclass(frozen=True)
class ProbeSpec:
    """Base class; subclasses fill ``support`` and implement ``evaluate``."""

    family = "abstract"

    @property
    def singular_points(self) -> tuple[float, ...]:
        return ()

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return ()

    def _check(self, k):
        k = np.asarray(k, dtype=float)
        if not np.all(self.support.contains(k)):
            raise OutOfSupport(
                f"k outside support [{self.support.k_minus}, {self.support.k_plus}]"
            )
        return k

    def evaluate(self, k):
        raise NotImplementedError

    def density_current(self, k):
        v, d = self.evaluate(k)
        return np.abs(v) ** 2, np.conj(v) * d

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class GaussianProbe(ProbeSpec):
    """``|xi(k)|**2`` normal with standard deviation ``width``; the phase
    ``exp(-i center k)`` places the position mean at ``center``.

    Support is ``[-8 W, 8 W]``.  Wide probes are capped at the largest
    multiple of ``pi/2`` inside ``[-64, 64]`` so that the support spans whole
    periods of ``|B|**2``.
    """

    width: float
    center: float = 0.0
    support: Interval = field(init=False)
    family = "gaussian"

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"Gaussian width must be positive, got {self.width!r}")
        half = 8.0 * self.width
        if half > STRONG_SUPPORT_CAP:
            half = HALF_PI * math.floor(STRONG_SUPPORT_CAP / HALF_PI)
        object.__setattr__(self, "support", Interval(-half, half))

    def evaluate(self, k):
        k = self._check(k)
        w = self.width
        amp = (2 * math.pi * w * w) ** -0.25 * np.exp(-k * k / (4 * w * w) - 1j * self.center * k)
        return amp, amp * (-k / (2 * w * w) - 1j * self.center)

    def to_dict(self):
        return {"family": self.family, "width": self.width, "center": self.center}


@dataclass(frozen=True)
class SSHOptimalProbe(ProbeSpec):
    """``sqrt(|Re A_w|/pi) exp(-i x_f k) / B(k)`` on ``[-pi/2, pi/2]`` with
    ``x_f = (1 + |A_w|**2)/(2 Re A_w)``; normalized.

    ``centered=True`` drops the phase, giving the probe whose position
    representation is the Lerch-transcendent closed form.
    """

    aw: WeakValue
    centered: bool = False
    support: Interval = field(init=False)
    family = "ssh_optimal"

    def __post_init__(self):
        object.__setattr__(self, "aw", as_weak_value(self.aw))
        object.__setattr__(self, "support", Interval(-HALF_PI, HALF_PI))

    @property
    def phase_center(self) -> float:
        return 0.0 if self.centered else shift_ssh_claimed(self.aw)

    def evaluate(self, k):
        k = self._check(k)
        x_f = self.phase_center
        b = kernel_b(self.aw, k)
        value = math.sqrt(abs(self.aw.re) / math.pi) * np.exp(-1j * x_f * k) / b
        return value, value * (-1j * x_f - kernel_bprime(self.aw, k) / b)

    def to_dict(self):
        return {"family": self.family, "centered": self.centered, "aw": _complex_dict(self.aw.value)}


@dataclass(frozen=True)
class ArbitraryShiftProbe(ProbeSpec):
    """``exp(-i alpha G(k)) / B(k)`` on ``[-n pi/2, n pi/2]`` (not normalized)."""

    aw: WeakValue
    alpha: float
    n: int = 1
    support: Interval = field(init=False)
    family = "arbitrary_shift"

    def __post_init__(self):
        object.__setattr__(self, "aw", as_weak_value(self.aw))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "support", Interval(-self.n * HALF_PI, self.n * HALF_PI))

    def evaluate(self, k):
        k = self._check(k)
        b = kernel_b(self.aw, k)
        value = np.exp(-1j * self.alpha * primitive_g(self.aw, k)) / b
        deriv = value * (-1j * self.alpha / kernel_abs_sq(self.aw, k) - kernel_bprime(self.aw, k) / b)
        return value, deriv

    def density_current(self, k):
        k = self._check(k)
        b2 = kernel_abs_sq(self.aw, k)
        return 1.0 / b2, (-1j * self.alpha - kernel_star_bprime(self.aw, k)) / (b2 * b2)

    def to_dict(self):
        return {"family": self.family, "alpha": self.alpha, "n": self.n, "aw": _complex_dict(self.aw.value)}


@dataclass(frozen=True)
class VariationalProbe(ProbeSpec):
    """Stationary probe of the shift functional for prescribed shift and
    mean kernel norm ``m``:
    ``exp(-i x_f k - i (shift m - Re A_w) H(k)) / sqrt(|D(k)|)``.

    ``final_mean`` is the ``x_f`` entering the stationarity equation, which
    then holds with ``x_i = x_f - shift``.  The probe is not normalizable;
    for self-consistent ``m`` and symmetric exclusion of the zeros of ``D``
    its measured initial mean is ``final_mean`` and its measured final mean
    ``final_mean + shift``, so only the shift itself is gauge-meaningful.

    Build with :func:`variational_probe`, which validates ``m``.
    """

    aw: WeakValue
    mean_kernel_norm: float
    target_shift: float
    support: Interval
    final_mean: float = 0.0
    zeros: tuple[float, ...] = ()
    family = "variational"

    @property
    def singular_points(self):
        return self.zeros

    @property
    def phase_rate(self) -> float:
        """``shift m - Re A_w``, the coefficient of ``H`` in the phase."""
        return self.target_shift * self.mean_kernel_norm - self.aw.re

    @property
    def stationarity_initial_mean(self) -> float:
        """``x_i`` of the stationarity equation, ``final_mean - target_shift``."""
        return self.final_mean - self.target_shift

    @functools.cached_property
    def primitive_h(self) -> PrimitiveH:
        return PrimitiveH(self.aw, self.mean_kernel_norm, self.support)

    def d(self, k):
        return kernel_abs_sq(self.aw, k) - self.mean_kernel_norm

    def _log_derivative(self, k):
        d = self.d(k)
        dprime = 2 * kernel_star_bprime(self.aw, k).real
        return -dprime / (2 * d) - 1j * self.final_mean - 1j * self.phase_rate / d

    def _check_regular(self, k):
        k = self._check(k)
        if np.any(self.d(k) == 0) or _near_any(k, self.zeros):
            raise EvaluationAtSingularity("variational probe is singular at the zeros of D")
        return k

    def evaluate(self, k):
        k = self._check_regular(k)
        scalar = np.ndim(k) == 0
        kk = np.atleast_1d(k)
        h = self.primitive_h(kk)
        value = np.exp(-1j * self.final_mean * kk - 1j * self.phase_rate * h) / np.sqrt(np.abs(self.d(kk)))
        deriv = value * self._log_derivative(kk)
        if scalar:
            return value[0], deriv[0]
        return value, deriv

    def density_current(self, k):
        k = self._check(k)
        rho = 1.0 / np.abs(self.d(k))
        return rho, rho * self._log_derivative(k)

    def to_dict(self):
        return {
            "family": self.family,
            "aw": _complex_dict(self.aw.value),
            "mean_kernel_norm": self.mean_kernel_norm,
            "target_shift": self.target_shift,
            "final_mean": self.final_mean,
            "support": [self.support.k_minus, self.support.k_plus],
        }


@dataclass(frozen=True, eq=False)
class TabulatedProbe(ProbeSpec):
    """Natural cubic spline through sampled amplitudes.

    The derivative comes from the spline itself; ``finite_difference=True``
    switches to centred differences with step ``1e-6`` times the support
    width (flagged in shift reports).
    """

    grid: np.ndarray
    amplitudes: np.ndarray
    finite_difference: bool = False
    support: Interval = field(init=False)
    family = "tabulated"

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        amps = np.asarray(self.amplitudes, dtype=complex)
        if grid.ndim != 1 or grid.shape != amps.shape or len(grid) < 2:
            raise ValueError("grid and amplitudes must be 1-D arrays of the same length >= 2")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "support", Interval(grid[0], grid[-1]))
        object.__setattr__(self, "_spline_re", CubicSpline(grid, amps.real))
        object.__setattr__(self, "_spline_im", CubicSpline(grid, amps.imag))

    @property
    def breakpoints(self):
        return tuple(self.grid[1:-1])

    def _value(self, k):
        return self._spline_re(k) + 1j * self._spline_im(k)

    def evaluate(self, k):
        k = self._check(k)
        value = self._value(k)
        if self.finite_difference:
            h = 1e-6 * self.support.width
            deriv = (self._value(k + h) - self._value(k - h)) / (2 * h)
        else:
            deriv = self._spline_re(k, 1) + 1j * self._spline_im(k, 1)
        return value, deriv

    @classmethod
    def from_csv(cls, path, finite_difference: bool = False) -> "TabulatedProbe":
        """Load ``k, re, im`` rows; a non-numeric first row is taken as a header."""
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append([float(v) for v in row[:3]])
                except ValueError:
                    if rows:
                        raise
        data = np.array(rows)
        if data.ndim != 2 or data.shape[1] != 3:
            raise ValueError(f"{path}: expected three columns k, re, im")
        return cls(data[:, 0], data[:, 1] + 1j * data[:, 2], finite_difference=finite_difference)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["k", "re", "im"])
            for k, a in zip(self.grid, self.amplitudes):
                writer.writerow([f"{k:.17g}", f"{a.real:.17g}", f"{a.imag:.17g}"])

    def to_dict(self):
        return {"family": self.family, "points": len(self.grid),
                "support": [self.support.k_minus, self.support.k_plus]}


def random_tabulated_probe(rng: np.random.Generator, points: int = 512,
                           support: tuple[float, float] = (-HALF_PI, HALF_PI)) -> TabulatedProbe:
    """Seeded random complex amplitudes, smoothed by 3-point averaging."""
    raw = rng.normal(size=points + 2) + 1j * rng.normal(size=points + 2)
    smooth = (raw[:-2] + raw[1:-1] + raw[2:]) / 3
    return TabulatedProbe(np.linspace(*support, points), smooth)


def variational_probe(aw, m: float, target_shift: float, iv: Interval,
                      final_mean: float = 0.0) -> VariationalProbe:
    """Variational probe with ``|xi|**2 = 1/|D|``.

    Raises ``MeanKernelNormOutOfRange`` unless ``m`` lies strictly inside the
    range of ``|B|**2`` and ``NoSingularPointInInterval`` when ``iv`` holds no
    zero of ``D`` (the self-consistency condition needs at least one).
    """
    aw = as_weak_value(aw)
    lo, hi = aw.kernel_range()
    if not lo < m < hi:
        raise MeanKernelNormOutOfRange(
            f"m = {m!r} must lie strictly inside ({lo!r}, {hi!r}), the range of |B|^2"
        )
    if not isinstance(iv, Interval):
        iv = Interval(*iv)
    zeros = zeros_of_d(aw, m, iv)
    if not zeros:
        raise NoSingularPointInInterval(f"D has no zero in [{iv.k_minus}, {iv.k_plus}]")
    return VariationalProbe(aw=aw, mean_kernel_norm=float(m), target_shift=float(target_shift),
                            support=iv, final_mean=float(final_mean), zeros=zeros)


# ---------------------------------------------------------------------------
# arbitrary-shift family: affine law


@functools.lru_cache(maxsize=256)
def _fitted_slope_sign(value: complex) -> int:
    aw = WeakValue(value)
    s0 = pointer_shift(ArbitraryShiftProbe(aw, 0.0, 1), aw, DEFAULT_CONFIG).shift
    s1 = pointer_shift(ArbitraryShiftProbe(aw, 1.0, 1), aw, DEFAULT_CONFIG).shift
    return 1 if s1 >= s0 else -1


def predicted_shift_arbitrary(aw, alpha: float = 0.0):
    """Affine law ``shift(alpha) = intercept + slope_sign * slope_magnitude * alpha``.

    Returns ``(intercept, slope_magnitude, slope_sign)``.  The magnitude is
    ``((1 - |Re A_w|)**2 + (Im A_w)**2) / (2 (Re A_w)**2)``; the sign is
    measured once per weak value from a two-point pointer-shift fit.  When the
    magnitude vanishes (``A_w = +-1``) the sign is reported as +1.
    """
    aw = as_weak_value(aw)
    intercept = (1 + aw.abs_sq) / (2 * aw.re)
    magnitude = ((1 - abs(aw.re)) ** 2 + aw.im ** 2) / (2 * aw.re ** 2)
    sign = 1 if magnitude == 0 else _fitted_slope_sign(aw.value)
    return intercept, magnitude, sign


def solve_alpha_for_shift(aw, target: float) -> float:
    aw = as_weak_value(aw)
    intercept, magnitude, sign = predicted_shift_arbitrary(aw)
    if magnitude <= 1e-14 * (1 + abs(intercept)):
        raise TrivialWeakValue(f"A_w = {aw.value}: every alpha gives shift {intercept:+g}")
    return (target - intercept) / (sign * magnitude)


# ---------------------------------------------------------------------------
# construction from plain dictionaries (scenario files)


def _complex_dict(z: complex) -> dict:
    return {"re": z.real, "im": z.imag}


def probe_from_params(family: str, params: dict, aw: WeakValue | None) -> ProbeSpec:
    """Build a probe from a family name and a parameter mapping.

    Missing required parameters and unrecognised keys raise ``ScenarioError``.
    """
    params = dict(params)
    try:
        probe = _build_probe(family, params, aw)
    except KeyError as exc:
        raise ScenarioError(f"probe family {family!r} needs parameter {exc.args[0]!r}") from None
    if params:
        raise ScenarioError(f"unknown parameters for probe family {family!r}: {sorted(params)}")
    return probe


def _build_probe(family: str, params: dict, aw: WeakValue | None) -> ProbeSpec:
    if family == "gaussian":
        return GaussianProbe(float(params.pop("width")), float(params.pop("center", 0.0)))
    if aw is None:
        raise DegenerateWeakValue(f"probe family {family!r} needs a weak value")
    if family == "ssh_optimal":
        return SSHOptimalProbe(aw, bool(params.pop("centered", False)))
    if family == "arbitrary_shift":
        return ArbitraryShiftProbe(aw, float(params.pop("alpha", 0.0)), int(params.pop("n", 1)))
    if family == "variational":
        support = params.pop("support", [-HALF_PI, HALF_PI])
        return variational_probe(aw, float(params.pop("mean_kernel_norm")),
                                 float(params.pop("target_shift")), Interval(*support),
                                 float(params.pop("final_mean", 0.0)))
    if family == "tabulated":
        if "path" in params:
            return TabulatedProbe.from_csv(Path(params.pop("path")),
                                           bool(params.pop("finite_difference", False)))
        rng = np.random.default_rng(int(params.pop("seed", 0)))
        return random_tabulated_probe(rng, int(params.pop("points", 512)))
    raise ScenarioError(f"unknown probe family {family!r}")
