"""Momentum-to-position transforms on finite support, position moments and
the even-sample sums of the claimed-optimal probe.

Convention: ``xi~(x) = (2 pi)**-0.5 * integral xi(k) exp(i k x) dk`` over the
support, so that ``exp(-i x0 k)`` translates the position amplitude by ``x0``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import zeta

from .errors import SingularProbe, WrongRepresentation
from .lerch import xi0_lerch
from .model import as_weak_value, kernel_b
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, integrate

MOMENTUM = "k"
POSITION = "x"
UNITS = {
    MOMENTUM: "rescaled momentum k = g*p",
    POSITION: "rescaled position x = q/g",
}
DEFAULT_WINDOW = 200.0
_CHUNK = 256


@dataclass
class WaveFunctionTable:
    representation: str
    grid: np.ndarray
    amplitudes: np.ndarray
    norm_estimate: float = math.nan
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.representation not in UNITS:
            raise ValueError(f"representation must be 'k' or 'x', got {self.representation!r}")
        self.grid = np.asarray(self.grid, dtype=float)
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.grid.ndim != 1 or self.grid.shape != self.amplitudes.shape or len(self.grid) < 2:
            raise ValueError("grid and amplitudes must be 1-D and of equal length >= 2")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if math.isnan(self.norm_estimate):
            self.norm_estimate = float(np.trapezoid(self.density, self.grid))

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def header(self) -> list[str]:
        return [f"{self.representation} [{UNITS[self.representation]}]", "re", "im", "abs2"]

    def to_csv(self, path_or_file) -> None:
        close = False
        if not hasattr(path_or_file, "write"):
            path_or_file = open(path_or_file, "w", newline="")
            close = True
        try:
            writer = csv.writer(path_or_file, lineterminator="\n")
            writer.writerow(self.header())
            for x, a, d in zip(self.grid, self.amplitudes, self.density):
                writer.writerow([f"{x:.17g}", f"{a.real:.17g}", f"{a.imag:.17g}", f"{d:.17g}"])
        finally:
            if close:
                path_or_file.close()

    def to_json(self) -> str:
        return json.dumps({
            "representation": self.representation,
            "units": UNITS[self.representation],
            "grid": self.grid.tolist(),
            "re": self.amplitudes.real.tolist(),
            "im": self.amplitudes.imag.tolist(),
            "norm_estimate": self.norm_estimate,
            "metadata": self.metadata,
        })

    @classmethod
    def from_csv(cls, path, representation: str) -> "WaveFunctionTable":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(representation, data[:, 0], data[:, 1] + 1j * data[:, 2])


def momentum_table(probe, k_grid, aw=None) -> WaveFunctionTable:
    """Sample a probe (or its final state ``B xi`` if ``aw`` is given) on a k grid."""
    k = np.asarray(k_grid, dtype=float)
    values, _ = probe.evaluate(k)
    if aw is not None:
        values = kernel_b(as_weak_value(aw), k) * values
    return WaveFunctionTable(MOMENTUM, k, values)


def transform_to_position(probe, x_grid, cfg: QuadratureConfig = DEFAULT_CONFIG,
                          aw=None) -> WaveFunctionTable:
    """Normalized position amplitude of ``probe`` on ``x_grid``.

    With ``aw`` the final state ``B xi`` is transformed instead.  Each grid
    point is its own integral; they share the adaptive subdivision.
    """
    singular = tuple(probe.singular_points)
    if singular and cfg.singularity_epsilon == 0:
        raise SingularProbe("transform of a singular probe needs singularity_epsilon > 0")
    x = np.asarray(x_grid, dtype=float)
    weak = as_weak_value(aw) if aw is not None else None

    def amplitude(k):
        v, _ = probe.evaluate(k)
        return v * kernel_b(weak, k) if weak is not None else v

    norm, _ = integrate(lambda k: np.abs(amplitude(k)) ** 2, probe.support, cfg,
                        singular, probe.breakpoints)
    out = np.empty(x.shape, dtype=complex)
    worst = 0.0
    for start in range(0, len(x), _CHUNK):
        xs = x[start:start + _CHUNK]

        def integrand(k, xs=xs):
            return amplitude(k)[:, None] * np.exp(1j * k[:, None] * xs[None, :])

        val, err = integrate(integrand, probe.support, cfg, singular, probe.breakpoints)
        out[start:start + _CHUNK] = val
        worst = max(worst, err)
    scale = 1.0 / math.sqrt(2 * math.pi * norm)
    out *= scale
    table = WaveFunctionTable(POSITION, x, out)
    table.metadata.update({
        "momentum_norm": float(norm),
        "parseval_window_integral": table.norm_estimate,
        "max_error_estimate": worst * scale,
        "state": "final" if weak is not None else "initial",
    })
    return table


def position_mean(table: WaveFunctionTable, center: float,
                  half_width: float = DEFAULT_WINDOW) -> float:
    """``sum x |xi~|**2 dx / sum |xi~|**2 dx`` over ``[center - w, center + w]``.

    Finite-support probes have ``1/x**2`` tails, so only a window symmetric
    about the expected centre gives a convergent estimate of the mean.
    """
    if table.representation != POSITION:
        raise WrongRepresentation("position_mean needs a position-representation table")
    mask = np.abs(table.grid - center) <= half_width * (1 + 1e-12)
    if mask.sum() < 2:
        raise ValueError("window contains fewer than two grid points")
    x = table.grid[mask]
    rho = table.density[mask]
    return float(np.trapezoid(x * rho, x) / np.trapezoid(rho, x))


# ---------------------------------------------------------------------------
# even samples of the claimed-optimal probe


@dataclass(frozen=True)
class EvenSampleSum:
    """``partial_sum`` over ``|n| <= n_max`` of ``|xi~_0(2n)|**2`` and an
    asymptotic estimate of the remaining tail."""

    partial_sum: float
    tail_estimate: float
    n_max: int

    @property
    def total(self) -> float:
        return self.partial_sum + self.tail_estimate


def _moment_sums(z: complex, orders: int) -> np.ndarray:
    """``sum_{k>=0} k**j z**k`` for ``j < orders`` (``0**0 = 1``)."""
    abs_z = abs(z)
    if abs_z == 0:
        out = np.zeros(orders, dtype=complex)
        out[0] = 1.0
        return out
    n = int(math.ceil((math.log(1e-18) - orders * math.log(1e4)) / math.log(abs_z))) + 50
    n = max(n, 200)
    k = np.arange(n, dtype=float)
    zk = z ** k
    return np.array([np.sum(k ** j * zk) for j in range(orders)])


def even_sum_tail(aw, n_max: int, orders: int = 7) -> float:
    """Tail ``sum_{|n| > n_max} |xi~_0(2n)|**2`` from the large-argument
    expansion ``Phi(z, 1, a) ~ sum_j (-1)**j Li_{-j}(z) / a**(j+1)``.

    Samples at ``x = 2n`` have ``a = sigma n + 1/2``, so the tail runs over
    ``a = n_max + 3/2, n_max + 5/2, ...`` and ``a = -(n_max + 1/2), ...``.
    Hurwitz zeta values resum the powers of ``1/a``.
    """
    aw = as_weak_value(aw)
    c = _moment_sums(aw.z, orders) * (-1.0) ** np.arange(orders)
    pref = abs(math.sqrt(2 * abs(aw.re)) / (math.pi * (1 + aw.sigma * aw.value))) ** 2
    total = 0.0
    for p in range(orders):
        for q in range(orders):
            m = p + q + 2
            s = zeta(m, n_max + 1.5) + (-1) ** m * zeta(m, n_max + 0.5)
            total += (c[p] * np.conj(c[q])).real * s
    return pref * total


def default_n_max(aw, tol: float = 1e-12) -> int:
    aw = as_weak_value(aw)
    abs_z = abs(aw.z)
    if abs_z == 0:
        return 60
    return max(60, int(math.ceil(math.log(tol) / math.log(abs_z))),
               int(math.ceil(30 / abs(1 - aw.z))))


def discrete_even_sum(aw, n_max: int | None = None) -> EvenSampleSum:
    """``sum_{|n| <= n_max} |xi~_0(2n)|**2`` with its tail estimate."""
    aw = as_weak_value(aw)
    if n_max is None:
        n_max = default_n_max(aw)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    n = np.arange(-n_max, n_max + 1)
    values = xi0_lerch(aw, 2.0 * n)
    partial = float(np.sum(np.abs(values) ** 2))
    return EvenSampleSum(partial, float(even_sum_tail(aw, n_max)), int(n_max))


@dataclass(frozen=True)
class ParsevalCheck:
    window_integral: float
    tail_estimate: float
    half_width: float


def parseval_position_norm(aw, half_width: float = 2000.0, step: float = 0.5) -> ParsevalCheck:
    """Trapezoid integral of ``|xi~_0(x)|**2`` over ``[-w, w]`` from the closed form.

    ``|xi~_0|**2`` is band-limited (frequencies within ``[-pi, pi]``), so any
    ``step < 2`` leaves only the truncation error, estimated from the
    leading ``|Re A_w| / (pi |A_w| x)**2`` tail average.
    """
    aw = as_weak_value(aw)
    x = np.arange(-half_width, half_width + 0.5 * step, step)
    rho = np.abs(xi0_lerch(aw, x)) ** 2
    tail = 2 * abs(aw.re) / (math.pi ** 2 * aw.abs_sq * half_width)
    return ParsevalCheck(float(np.trapezoid(rho, x)), tail, half_width)
