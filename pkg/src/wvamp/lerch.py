"""Lerch transcendent at ``s = 1`` and the position-space closed forms of the
claimed-optimal probe.

``Phi(z, 1, x) = sum_{k>=0} z**k / (x + k)`` is summed directly for
``|z| < 1``.  After ``K`` terms the remainder is bounded by
``|z|**K / ((Re x + K)(1 - |z|))`` once ``Re x + K > 0``, and in general by
``|z|**K / (delta (1 - |z|))`` with ``delta`` the distance from ``x`` to the
nearest pole, so negative ``x`` costs no extra terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PoleHit, SeriesDomain
from .model import WeakValue, as_weak_value

MAX_TERMS = 10_000_000
SLOW_CONVERGENCE_RADIUS = 0.98
POLE_WINDOW = 1e-4
_BLOCK = 512


@dataclass(frozen=True)
class LerchEvaluation:
    value: complex
    terms_used: int
    tail_bound: float
    slow_convergence: bool = False


def _pole_distance(x: np.ndarray, skip: np.ndarray | None = None) -> float:
    """Smallest ``|x + k|`` over ``k >= 0`` (excluding ``k == skip``)."""
    x = np.atleast_1d(x)
    centre = np.maximum(np.round(-x.real), 0)
    best = np.full(x.shape, np.inf)
    for shift in (-1, 0, 1):
        k = centre + shift
        ok = k >= 0
        if skip is not None:
            ok &= k != skip
        dist = np.where(ok, np.abs(x + k), np.inf)
        best = np.minimum(best, dist)
    best = np.minimum(best, np.abs(x + centre + 2))
    return float(best.min()) if best.size else 1.0


def _tail_bound(abs_z: float, x: np.ndarray, k: int, delta: float) -> float:
    """Bound on ``sum_{j>=k} |z|**j / |x + j|``."""
    if abs_z == 0.0:
        return 0.0
    geometric = abs_z ** k / (1 - abs_z)
    bound = geometric / delta if delta > 0 else math.inf
    re_min = float(np.min(np.real(x)))
    if re_min + k > 0:
        bound = min(bound, geometric / (re_min + k))
    return bound


def _terms_needed(abs_z: float, x: np.ndarray, tol: float, skip=None) -> tuple[int, float]:
    """Number of terms whose tail bound is below ``tol``, and that bound."""
    if abs_z == 0.0:
        return 1, 0.0
    delta = _pole_distance(x, skip)
    k = int(math.ceil(math.log(tol * delta * (1 - abs_z)) / math.log(abs_z)))
    k = min(max(k, 1), MAX_TERMS)
    return k, _tail_bound(abs_z, x, k, delta)


def _series(z: complex, x: np.ndarray, n_terms: int, skip: np.ndarray | None = None) -> np.ndarray:
    """Partial sum over ``k < n_terms``; terms with ``k == skip`` are left out."""
    total = np.zeros(x.shape, dtype=complex)
    for start in range(0, n_terms, _BLOCK):
        k = np.arange(start, min(start + _BLOCK, n_terms))
        denom = x[..., None] + k
        zk = z ** k.astype(float) if z != 0 else (k == 0).astype(complex)
        if skip is not None:
            mask = skip[..., None] == k
            denom = np.where(mask, 1.0, denom)
            zk = np.where(mask, 0.0, zk)
        total += np.sum(zk / denom, axis=-1)
    return total


def lerch_phi(z: complex, x: complex, tol: float = 1e-15) -> LerchEvaluation:
    """``Phi(z, 1, x)`` for ``|z| < 1`` to absolute accuracy ``tol``.

    Raises ``SeriesDomain`` for ``|z| >= 1`` and ``PoleHit`` when ``x`` is a
    non-positive integer.
    """
    z = complex(z)
    x = complex(x)
    abs_z = abs(z)
    if not abs_z < 1:
        raise SeriesDomain(f"series needs |z| < 1, got |z| = {abs_z}")
    if x.imag == 0 and x.real <= 0 and x.real == math.floor(x.real):
        raise PoleHit(f"x + k = 0 at k = {int(-x.real)}")
    xs = np.array([x])
    n, bound = _terms_needed(abs_z, xs, tol)
    value = complex(_series(z, xs, n)[0])
    return LerchEvaluation(value, n, bound, abs_z >= SLOW_CONVERGENCE_RADIUS)


def lerch_phi_array(z: complex, x, tol: float = 1e-15) -> np.ndarray:
    """Vectorized ``Phi(z, 1, x)`` over an array of ``x``; no pole checks."""
    z = complex(z)
    x = np.asarray(x, dtype=complex)
    if not abs(z) < 1:
        raise SeriesDomain(f"series needs |z| < 1, got |z| = {abs(z)}")
    if x.size == 0:
        return np.zeros(x.shape, dtype=complex)
    n, _ = _terms_needed(abs(z), x, tol)
    return _series(z, x, n)


def _prefactor(aw: WeakValue) -> complex:
    return math.sqrt(2 * abs(aw.re)) / (math.pi * (1 + aw.sigma * aw.value))


def xi0_lerch(aw, x, tol: float = 1e-15):
    """Position-space amplitude of the centred claimed-optimal probe,
    ``sqrt(2|Re A_w|)/(pi (1 + sigma A_w)) cos(pi x/2) Phi(z, 1, (1 + sigma x)/2)``.

    At the poles ``x = -sigma (2n + 1)`` the vanishing cosine cancels the pole;
    within ``1e-4`` of a pole the polar term is isolated and combined with the
    cosine analytically.
    """
    aw = as_weak_value(aw)
    x_arr = np.asarray(x, dtype=float)
    xs = np.atleast_1d(x_arr)
    a = (1 + aw.sigma * xs) / 2
    n0 = np.round(-a)
    u = a + n0
    near = (n0 >= 0) & (np.abs(u) < POLE_WINDOW)
    out = np.empty(xs.shape, dtype=complex)
    far = ~near
    if np.any(far):
        phi = lerch_phi_array(aw.z, a[far], tol)
        out[far] = np.cos(0.5 * math.pi * xs[far]) * phi
    if np.any(near):
        an, nn, un = a[near], n0[near].astype(int), u[near]
        sign = np.where(nn % 2 == 0, 1.0, -1.0)
        cosine = sign * np.sin(math.pi * un)
        n_terms = 1 + int(nn.max())
        for a_i, n_i in zip(an, nn):
            n_terms = max(n_terms, _terms_needed(abs(aw.z), np.array([a_i]), tol, skip=n_i)[0])
        rest = _series(aw.z, an.astype(complex), n_terms, skip=nn)
        polar = sign * aw.z ** nn * math.pi * np.sinc(un)
        out[near] = cosine * rest + polar
    out *= _prefactor(aw)
    return out[0] if x_arr.ndim == 0 else out


def xi0_odd_limit(aw, n: int) -> complex:
    """``(-z)**n sqrt(2|Re A_w|)/(1 + sigma A_w)``, the value at ``x = -sigma (2n + 1)``."""
    aw = as_weak_value(aw)
    return (-aw.z) ** n * math.sqrt(2 * abs(aw.re)) / (1 + aw.sigma * aw.value)


def _atanh_sqrt_ratio(z: complex) -> complex:
    """``atanh(sqrt z)/sqrt z``, an even function of ``sqrt z`` (branch-free)."""
    if abs(z) < 1e-4:
        return sum(z ** j / (2 * j + 1) for j in range(6))
    r = np.sqrt(complex(z))
    return complex(np.arctanh(r) / r)


def xi0_even(aw, n: int) -> complex:
    """Closed form of the centred amplitude at ``x = 2n``.

    The printed form reads
    ``sqrt(8|Re A_w|)/(pi (-z)**n (1 + sigma A_w)) [atanh(sqrt z)/sqrt z
    - sgn(n) sum_{k=min(0,n)}^{max(n-1,-1)} z**k/(2k+1)]``;
    it holds as written for ``Re A_w > 0``.  For ``Re A_w < 0`` the sample at
    ``x = 2n`` corresponds to index ``sigma n``, which is used here.
    """
    aw = as_weak_value(aw)
    n = int(n)
    m = aw.sigma * n
    z = aw.z
    bracket = _atanh_sqrt_ratio(z)
    if m != 0:
        ks = range(min(0, m), max(m - 1, -1) + 1)
        bracket -= (1 if m > 0 else -1) * sum(z ** k / (2 * k + 1) for k in ks)
    return math.sqrt(8 * abs(aw.re)) / (math.pi * (-z) ** m * (1 + aw.sigma * aw.value)) * bracket
