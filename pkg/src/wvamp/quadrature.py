"""Adaptive quadrature for complex integrands on finite intervals, and the
pointer-moment functionals built on it.

The integrator is a 15-point Gauss-Kronrod rule with the embedded 7-point
Gauss rule as error estimate.  Refinement is global: at every pass the
subintervals carrying the largest share of the error are bisected.  Nodes
are strictly interior, so endpoints and declared singular points are never
evaluated.

Integrands are vectorized ``f(k) -> array`` with ``f(k).shape`` equal to
``k.shape`` or ``k.shape + (m,)``; the vector form lets a whole family of
integrals (e.g. a Fourier transform on a grid of ``x``) share one adaptive
subdivision.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    MaxSubdivisionsExceeded,
    NonFiniteEvaluation,
    RoundoffLimited,
    SingularProbe,
    ZeroNorm,
)
from .model import WeakValue, as_weak_value, kernel_abs_sq, kernel_star_bprime

# Kronrod abscissae on [0, 1); odd indices are the Gauss-Legendre 7-point nodes.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]
GAUSS_WEIGHTS[[9, 11, 13]] = _WG[2::-1]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Interval:
    k_minus: float
    k_plus: float

    def __post_init__(self):
        lo, hi = float(self.k_minus), float(self.k_plus)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("interval endpoints must be finite")
        if not lo < hi:
            raise ValueError(f"need k_minus < k_plus, got [{lo}, {hi}]")
        object.__setattr__(self, "k_minus", lo)
        object.__setattr__(self, "k_plus", hi)

    @property
    def width(self) -> float:
        return self.k_plus - self.k_minus

    def contains(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        return (k >= self.k_minus) & (k <= self.k_plus)


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_subdivisions: int = 4096
    singularity_epsilon: float = 0.0

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("rel_tol and abs_tol must be positive")
        if int(self.max_subdivisions) < 1:
            raise ValueError("max_subdivisions must be a positive integer")
        if not self.singularity_epsilon >= 0:
            raise ValueError("singularity_epsilon must be >= 0")


DEFAULT_CONFIG = QuadratureConfig()


def _segments(a, b, singular_points, epsilon, breakpoints=()):
    """Split ``[a, b]`` at singular points (removing their epsilon
    neighbourhoods) and at plain breakpoints."""
    if epsilon >= (b - a) / 4:
        raise ValueError("singularity_epsilon must be smaller than a quarter of the interval")
    pieces = [(a, b)]
    for s in sorted(float(s) for s in singular_points):
        lo_cut, hi_cut = s - epsilon, s + epsilon
        updated = []
        for lo, hi in pieces:
            if hi_cut <= lo or lo_cut >= hi:
                updated.append((lo, hi))
                continue
            if lo_cut > lo:
                updated.append((lo, lo_cut))
            if hi_cut < hi:
                updated.append((hi_cut, hi))
        pieces = updated
    cuts = sorted(float(p) for p in breakpoints)
    out = []
    for lo, hi in pieces:
        edges = [lo] + [c for c in cuts if lo < c < hi] + [hi]
        out.extend(zip(edges[:-1], edges[1:]))
    return [(lo, hi) for lo, hi in out if hi > lo]


def _apply_rule(f, lo, hi):
    centre = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    k = centre[:, None] + half[:, None] * NODES[None, :]
    vals = np.asarray(f(k.ravel()))
    vals = vals.reshape(k.shape + vals.shape[1:])
    if not np.all(np.isfinite(vals)):
        bad = k[np.nonzero(~np.isfinite(vals))[:2]][:1]
        raise NonFiniteEvaluation(f"integrand is not finite at k = {bad.tolist()}")
    kron = np.einsum("j,ij...->i...", KRONROD_WEIGHTS, vals)
    gauss = np.einsum("j,ij...->i...", GAUSS_WEIGHTS, vals)
    hshape = (-1,) + (1,) * (vals.ndim - 2)
    kron = kron * half.reshape(hshape)
    gauss = gauss * half.reshape(hshape)
    mag = np.einsum("j,ij...->i...", KRONROD_WEIGHTS, np.abs(vals)) * np.abs(half).reshape(hshape)
    err = np.abs(kron - gauss) + 50 * _EPS * mag
    if err.ndim > 1:
        err = err.reshape(err.shape[0], -1).max(axis=1)
    return kron, err


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    iv: Interval | tuple[float, float],
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    singular_points: Sequence[float] = (),
    breakpoints: Sequence[float] = (),
):
    """Integrate ``f`` over ``iv``.

    Returns ``(value, error_estimate)``.  For a vector-valued integrand the
    value is an array and the error estimate bounds every component.

    Raises ``MaxSubdivisionsExceeded`` when the subdivision budget runs out
    and ``NonFiniteEvaluation`` when ``f`` returns NaN or infinity.
    """
    if not isinstance(iv, Interval):
        iv = Interval(*iv)
    segs = _segments(iv.k_minus, iv.k_plus, singular_points, cfg.singularity_epsilon, breakpoints)
    if len(segs) > cfg.max_subdivisions:
        raise MaxSubdivisionsExceeded(
            f"{len(segs)} initial segments exceed max_subdivisions={cfg.max_subdivisions}"
        )
    lo = np.array([s[0] for s in segs])
    hi = np.array([s[1] for s in segs])
    vals, errs = _apply_rule(f, lo, hi)
    while True:
        total = vals.sum(axis=0)
        total_err = float(errs.sum())
        tol = max(cfg.abs_tol, cfg.rel_tol * float(np.max(np.abs(total))))
        if total_err <= tol:
            return total, total_err
        order = np.argsort(-errs, kind="stable")
        excess = np.cumsum(errs[order])
        n_split = int(np.searchsorted(excess, 0.5 * (total_err - tol))) + 1
        n_split = min(n_split, cfg.max_subdivisions - len(lo))
        if n_split <= 0:
            raise MaxSubdivisionsExceeded(
                f"error {total_err:.3e} above tolerance {tol:.3e} after "
                f"{len(lo)} subintervals"
            )
        pick = order[:n_split]
        mid = 0.5 * (lo[pick] + hi[pick])
        splittable = (mid > lo[pick]) & (mid < hi[pick])
        if not np.any(splittable):
            raise RoundoffLimited(
                f"error {total_err:.3e} above tolerance {tol:.3e}; intervals cannot be refined"
            )
        pick, mid = pick[splittable], mid[splittable]
        new_lo = np.concatenate([lo[pick], mid])
        new_hi = np.concatenate([mid, hi[pick]])
        new_vals, new_errs = _apply_rule(f, new_lo, new_hi)
        keep = np.ones(len(lo), dtype=bool)
        keep[pick] = False
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        vals = np.concatenate([vals[keep], new_vals])
        errs = np.concatenate([errs[keep], new_errs])


# ---------------------------------------------------------------------------
# pointer moments


@dataclass(frozen=True)
class MeanResult:
    mean: float
    boundary_term: float
    norm: float
    error_estimate: float
    boundary_identity_residual: float


@dataclass(frozen=True)
class ShiftReport:
    mean_initial: float
    mean_final: float
    shift: float
    n_initial: float
    n_final: float
    mean_kernel_norm: float
    error_estimate: float
    boundary_term_initial: float
    boundary_term_final: float
    finite_difference_derivative: bool = False

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


def _edge_density(rho_func, edges):
    """``|xi|**2`` summed with alternating signs over segment edges; NaN if
    any edge value is not finite."""
    total = 0.0
    for lo, hi in edges:
        values = np.asarray(rho_func(np.array([lo, hi])), dtype=float)
        if not np.all(np.isfinite(values)):
            return math.nan
        total += values[1] - values[0]
    return 0.5 * total


def _moments(density_current, iv, cfg, singular_points=(), breakpoints=()):
    """``(N, integral of conj(xi) xi', error)`` from a function returning
    ``(|xi|**2, conj(xi) xi')``."""

    def integrand(k):
        rho, cur = density_current(k)
        return np.stack([rho.astype(complex), cur], axis=-1)

    value, err = integrate(integrand, iv, cfg, singular_points, breakpoints)
    return float(value[0].real), complex(value[1]), err


def _finalize(norm, current, err, boundary_half_jump):
    if not norm > 0:
        raise ZeroNorm(f"wave function norm is {norm!r}")
    mean = -current.imag / norm
    residual = current.real - boundary_half_jump
    scale = abs(current) + abs(boundary_half_jump) + 1.0
    if math.isfinite(residual) and abs(residual) > 1e-6 * scale:
        warnings.warn(
            f"boundary identity violated by {residual:.3e}; derivative inconsistent with values",
            RuntimeWarning,
            stacklevel=3,
        )
    return MeanResult(
        mean=mean,
        boundary_term=boundary_half_jump / norm,
        norm=norm,
        error_estimate=(err + abs(mean) * err) / norm,
        boundary_identity_residual=residual,
    )


def mean_position(
    xi: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    iv: Interval | tuple[float, float],
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    singular_points: Sequence[float] = (),
) -> MeanResult:
    """Position mean ``-Im(integral conj(xi) xi') / N`` of a momentum-space
    wave function given as ``xi(k) -> (value, derivative)``.

    The reported ``boundary_term`` is ``(|xi(k+)|**2 - |xi(k-)|**2)/(2N)``,
    which equals ``Re(integral conj(xi) xi')/N``.
    """
    if not isinstance(iv, Interval):
        iv = Interval(*iv)

    def density_current(k):
        v, d = xi(k)
        return np.abs(v) ** 2, np.conj(v) * d

    norm, current, err = _moments(density_current, iv, cfg, singular_points)
    edges = _segments(iv.k_minus, iv.k_plus, singular_points, cfg.singularity_epsilon)
    half_jump = _edge_density(lambda k: np.abs(xi(k)[0]) ** 2, edges)
    return _finalize(norm, current, err, half_jump)


def pointer_shift(probe, aw: WeakValue | complex, cfg: QuadratureConfig = DEFAULT_CONFIG) -> ShiftReport:
    """Shift ``<f|x|f> - <i|x|i>`` of the pointer for initial probe ``xi_i`` and
    final state ``B xi_i``, each normalized on its own.

    ``probe`` is any object with ``support``, ``singular_points``,
    ``breakpoints`` and ``density_current(k)``; see :mod:`wvamp.probes`.
    """
    aw = as_weak_value(aw)
    singular = tuple(probe.singular_points)
    if singular and cfg.singularity_epsilon == 0:
        raise SingularProbe(
            f"{type(probe).__name__} has non-integrable singularities at {list(singular)}; "
            "set singularity_epsilon > 0"
        )
    iv = probe.support

    def density_current(k):
        rho, cur = probe.density_current(k)
        b2 = kernel_abs_sq(aw, k)
        rho_f = b2 * rho
        cur_f = b2 * cur + kernel_star_bprime(aw, k) * rho
        return np.stack([rho, rho_f]), np.stack([cur, cur_f])

    def integrand(k):
        rho, cur = density_current(k)
        return np.concatenate([rho.astype(complex), cur], axis=0).T

    value, err = integrate(integrand, iv, cfg, singular, probe.breakpoints)
    n_i, n_f = float(value[0].real), float(value[1].real)
    edges = _segments(iv.k_minus, iv.k_plus, singular, cfg.singularity_epsilon)
    half_i = _edge_density(lambda k: probe.density_current(k)[0], edges)
    half_f = _edge_density(lambda k: kernel_abs_sq(aw, k) * probe.density_current(k)[0], edges)
    initial = _finalize(n_i, complex(value[2]), err, half_i)
    final = _finalize(n_f, complex(value[3]), err, half_f)
    return ShiftReport(
        mean_initial=initial.mean,
        mean_final=final.mean,
        shift=final.mean - initial.mean,
        n_initial=n_i,
        n_final=n_f,
        mean_kernel_norm=n_f / n_i,
        error_estimate=initial.error_estimate + final.error_estimate,
        boundary_term_initial=initial.boundary_term,
        boundary_term_final=final.boundary_term,
        finite_difference_derivative=bool(getattr(probe, "finite_difference", False)),
    )
