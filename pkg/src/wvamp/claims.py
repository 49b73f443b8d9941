"""Executable checks C1-C7 of the quantitative statements about optimal
probes, each returning a :class:`ClaimResult` with its evidence.

Reference values carry a ``source`` tag:

* ``published`` -- value or closed form stated in the published claim under test;
* ``derived`` -- computed here by an independent route (closed form,
  brute force, separate quadrature);
* ``exact`` -- holds by construction.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import brentq

from .fourier import UNITS, discrete_even_sum, parseval_position_norm
from .lerch import xi0_lerch, xi0_odd_limit
from .model import (
    WeakValue,
    as_weak_value,
    kernel_abs_sq,
    kernel_star_bprime,
    shift_ssh_claimed,
    shift_strong,
    shift_weak,
    weak_value_spin,
)
from .probes import (
    ArbitraryShiftProbe,
    GaussianProbe,
    SSHOptimalProbe,
    predicted_shift_arbitrary,
    random_tabulated_probe,
    solve_alpha_for_shift,
    variational_probe,
    zeros_of_d,
)
from .quadrature import DEFAULT_CONFIG, Interval, QuadratureConfig, integrate, pointer_shift

PASS, FAIL, INDETERMINATE = "pass", "fail", "indeterminate"
CLAIM_IDS = ("C1", "C2", "C3", "C4", "C5", "C6", "C7")
SOURCES = ("published", "derived", "exact")
SQRT3 = math.sqrt(3.0)


@dataclass
class Check:
    name: str
    computed: float
    reference: float
    source: str
    tolerance: float
    relative: bool = False
    kind: str = "abs_diff"

    @property
    def deviation(self) -> float:
        if self.kind == "greater":
            return 0.0 if self.computed > self.reference else abs(self.reference - self.computed)
        if self.kind == "less":
            return 0.0 if self.computed < self.reference else abs(self.computed - self.reference)
        diff = abs(self.computed - self.reference)
        return diff / abs(self.reference) if self.relative else diff

    @property
    def passed(self) -> bool:
        if self.kind in ("greater", "less"):
            return self.deviation == 0.0
        return bool(self.deviation <= self.tolerance)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "computed": _jsonable(self.computed),
            "reference": _jsonable(self.reference),
            "source": self.source,
            "tolerance": self.tolerance,
            "relative": self.relative,
            "kind": self.kind,
            "deviation": self.deviation,
            "passed": self.passed,
        }


@dataclass
class ClaimResult:
    id: str
    description: str
    tolerance: float
    checks: list[Check] = field(default_factory=list)
    evidence: dict = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)
    diagnostics: str = ""
    verdict: str = FAIL

    @property
    def computed(self) -> dict:
        return {c.name: c.computed for c in self.checks}

    @property
    def reference(self) -> dict:
        return {c.name: {"value": c.reference, "source": c.source} for c in self.checks}

    def check(self, name, computed, reference, source, tolerance=None, *, relative=False, kind="abs_diff"):
        if source not in SOURCES:
            raise ValueError(f"unknown reference source {source!r}")
        self.checks.append(Check(name, float(computed), float(reference), source,
                                 self.tolerance if tolerance is None else tolerance,
                                 relative, kind))

    def finish(self) -> "ClaimResult":
        if not self.checks:
            self.verdict = INDETERMINATE
        else:
            self.verdict = PASS if all(c.passed for c in self.checks) else FAIL
        return self

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "description": self.description,
            "verdict": self.verdict,
            "tolerance": self.tolerance,
            "computed": {k: _jsonable(v) for k, v in self.computed.items()},
            "reference": {k: {"value": _jsonable(v["value"]), "source": v["source"]}
                          for k, v in self.reference.items()},
            "checks": [c.as_dict() for c in self.checks],
            "evidence": _jsonable(self.evidence),
            "artifacts": self.artifacts,
            "diagnostics": self.diagnostics,
        }


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    return value


def _write_csv(out_dir, name, header, rows) -> str | None:
    if out_dir is None:
        return None
    path = Path(out_dir) / name
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    return path.name


# ---------------------------------------------------------------------------
# C1


def claim_c1(aw_set=None, cfg=DEFAULT_CONFIG, out_dir=None, seed=0) -> ClaimResult:
    aw_set = aw_set or [SQRT3, 0.3 + 0.4j, -0.7 + 0.2j, 2.5 - 1.5j, 1 - 1e-3]
    res = ClaimResult("C1", "even samples |xi~(2n)|^2 sum to 1/2 while the density integrates to 1",
                      tolerance=1e-6)
    rows = []
    odd = []
    for a in map(as_weak_value, aw_set):
        even = discrete_even_sum(a)
        parseval = parseval_position_norm(a)
        tag = f"{a.value.real:+.6g}{a.value.imag:+.6g}i"
        res.check(f"even_sum[{tag}]", even.total, 0.5, "published", 1e-6)
        res.check(f"parseval[{tag}]", parseval.window_integral, 1.0, "published", 1e-3)
        rows.append([a.re, a.im, even.n_max, even.partial_sum, even.tail_estimate, even.total,
                     parseval.window_integral, parseval.tail_estimate])
        # odd-point value at n = 0: printed formula vs numeric limit of the Lerch form
        x0 = -a.sigma * 1.0
        limit = 0.5 * (xi0_lerch(a, x0 + 1e-6) + xi0_lerch(a, x0 - 1e-6))
        odd.append({"aw": a.value, "formula_n0": xi0_odd_limit(a, 0), "numeric_limit": limit,
                    "deviation": abs(limit - xi0_odd_limit(a, 0))})
    res.evidence["odd_point_n0"] = odd
    res.evidence["odd_point_n0_holds"] = all(o["deviation"] < 1e-8 for o in odd)
    art = _write_csv(out_dir, "C1_even_sums.csv",
                     ["aw_re", "aw_im", "n_max", "partial_sum", "tail_estimate", "total",
                      "parseval_window_integral", "parseval_tail_estimate"], rows)
    if art:
        res.artifacts.append(art)
    return res.finish()


# ---------------------------------------------------------------------------
# C2


def weak_probe_width(aw: WeakValue, base: float = 0.01) -> float:
    """Width of the "weak" Gaussian; the weak limit needs ``W |A_w| << 1``."""
    return base * min(1.0, 1.0 / abs(aw.value))


def claim_c2(thetas=None, cfg=DEFAULT_CONFIG, out_dir=None, seed=0) -> ClaimResult:
    thetas = thetas or [1.6, 2.0, 2 * math.pi / 3, 2.8]
    res = ClaimResult("C2", "strong <= claimed-optimal <= weak shift for theta in (pi/2, pi)",
                      tolerance=1e-3)
    rows = []
    for theta in thetas:
        a = weak_value_spin(theta)
        w = weak_probe_width(a)
        weak = pointer_shift(GaussianProbe(w), a, cfg).shift
        strong = pointer_shift(GaussianProbe(100.0), a, cfg).shift
        optimal = pointer_shift(SSHOptimalProbe(a), a, cfg).shift
        t = f"{theta:.6g}"
        res.check(f"weak[{t}]", weak, shift_weak(a), "published")
        res.check(f"strong[{t}]", strong, shift_strong(a), "published")
        res.check(f"optimal[{t}]", optimal, shift_ssh_claimed(a), "published")
        res.check(f"strong_sin_theta[{t}]", shift_strong(a), math.sin(theta), "published", 1e-12)
        res.check(f"optimal_minus_strong[{t}]", optimal - strong, 0.0, "published", kind="greater")
        res.check(f"weak_minus_optimal[{t}]", weak - optimal, 0.0, "published", kind="greater")
        rows.append([theta, a.re, w, weak, optimal, strong])
    art = _write_csv(out_dir, "C2_ordering.csv",
                     ["theta [rad]", "aw", f"weak_width [{UNITS['k']}]", f"shift_weak [{UNITS['x']}]",
                      f"shift_optimal [{UNITS['x']}]", f"shift_strong [{UNITS['x']}]"], rows)
    if art:
        res.artifacts.append(art)
    return res.finish()


# ---------------------------------------------------------------------------
# C3


def alpha_scan(aw, alphas, n: int = 8, cfg=DEFAULT_CONFIG):
    aw = as_weak_value(aw)
    return [pointer_shift(ArbitraryShiftProbe(aw, float(al), n), aw, cfg) for al in alphas]


def claim_c3(aw_set=None, cfg=DEFAULT_CONFIG, out_dir=None, seed=0, n=8,
             alphas=None, targets=(-5.0, 3.0, 10.0), roundtrip_n=16) -> ClaimResult:
    aw_set = aw_set or [SQRT3, 2 + 1j]
    alphas = np.linspace(-2, 2, 9) if alphas is None else np.asarray(alphas, dtype=float)
    res = ClaimResult("C3", "arbitrary amplification: the shift is affine in alpha with nonzero slope",
                      tolerance=1e-6)
    rows = []
    signs = {}
    for a in map(as_weak_value, aw_set):
        tag = f"{a.re:+.6g}{a.im:+.6g}i"
        reports = alpha_scan(a, alphas, n, cfg)
        shifts = np.array([r.shift for r in reports])
        slope, intercept = np.polyfit(alphas, shifts, 1)
        resid = np.max(np.abs(shifts - (slope * alphas + intercept)) / (1 + np.abs(shifts)))
        pred_int, pred_mag, pred_sign = predicted_shift_arbitrary(a)
        res.check(f"linearity_residual[{tag}]", resid, 1e-6, "derived", kind="less")
        res.check(f"intercept[{tag}]", intercept, pred_int, "published", 1e-6, relative=True)
        res.check(f"slope_magnitude[{tag}]", abs(slope), pred_mag, "published", 1e-4, relative=True)
        initial_pred = (alphas - a.re) * (1 + a.abs_sq) / (2 * a.re ** 2)
        initial = np.array([r.mean_initial for r in reports])
        final = np.array([r.mean_final for r in reports])
        mask = np.abs(initial_pred) > 1e-12
        res.check(f"mean_initial_rel[{tag}]",
                  float(np.max(np.abs(initial[mask] - initial_pred[mask]) / np.abs(initial_pred[mask]))),
                  0.0, "published", 1e-6)
        nz = alphas != 0
        final_mag = np.abs(alphas[nz]) / abs(a.re)
        res.check(f"mean_final_magnitude_rel[{tag}]",
                  float(np.max(np.abs(np.abs(final[nz]) - final_mag) / final_mag)), 0.0, "published", 1e-6)
        final_sign = int(np.sign(np.median(final[nz] / alphas[nz])))
        signs[tag] = {
            "slope_sign_fitted": int(np.sign(slope)),
            "slope_sign_cached": pred_sign,
            "printed_slope_sign": 1,
            "mean_final_sign_per_alpha": final_sign,
            "printed_mean_final_sign_per_alpha": -1,
        }
        for al, r in zip(alphas, reports):
            rows.append([a.re, a.im, float(al), r.shift, r.mean_initial, r.mean_final, r.error_estimate])
        for target in targets:
            alpha = solve_alpha_for_shift(a, target)
            got = pointer_shift(ArbitraryShiftProbe(a, alpha, roundtrip_n), a, cfg).shift
            res.check(f"roundtrip[{tag}][{target:g}]", got, target, "exact", 1e-3)
    res.evidence["signs"] = signs
    res.evidence["note"] = ("slope signs are measured, not asserted; the printed formulas for the "
                            "final mean and for the shift disagree on the sign of the alpha term")
    art = _write_csv(out_dir, "C3_alpha_scan.csv",
                     ["aw_re", "aw_im", "alpha", f"shift [{UNITS['x']}]", "mean_initial", "mean_final", "error"], rows)
    if art:
        res.artifacts.append(art)
    return res.finish()


# ---------------------------------------------------------------------------
# C4


def euler_lagrange_residual(aw, probe, k, final_mean, initial_mean, mean_kernel_norm):
    """``(|B|**2 - m) xi' + (B* B' + i x_f |B|**2 - i x_i m) xi`` at ``k``."""
    aw = as_weak_value(aw)
    v, d = probe.evaluate(k)
    b2 = kernel_abs_sq(aw, k)
    coeff = kernel_star_bprime(aw, k) + 1j * final_mean * b2 - 1j * initial_mean * mean_kernel_norm
    return (b2 - mean_kernel_norm) * d + coeff * v


def _sample_away(rng, iv, zeros, eps, count):
    pts = []
    while len(pts) < count:
        k = rng.uniform(iv.k_minus, iv.k_plus, 4 * count)
        ok = np.all(np.abs(k[:, None] - np.asarray(zeros)[None, :]) > eps, axis=1)
        pts.extend(k[ok].tolist())
    return np.sort(np.array(pts[:count]))


def claim_c4(aw_set=None, cfg=DEFAULT_CONFIG, out_dir=None, seed=4, points=200, eps=1e-3,
             target_shift=5.0) -> ClaimResult:
    aw_set = aw_set or [SQRT3, 0.5 + 0.8j]
    res = ClaimResult("C4", "the variational probe solves the corrected Euler-Lagrange equation; "
                            "the claimed-optimal probe does not", tolerance=1e-8)
    rng = np.random.default_rng(seed)
    iv = Interval(-math.pi / 2, math.pi / 2)
    ssh_max = {}
    rows = []
    for a in map(as_weak_value, aw_set):
        tag = f"{a.re:+.6g}{a.im:+.6g}i"
        m = a.kernel_coefficients()[0]
        probe = variational_probe(a, m, target_shift, iv, final_mean=0.5)
        k = _sample_away(rng, iv, probe.zeros, eps, points)
        r = euler_lagrange_residual(a, probe, k, probe.final_mean, probe.stationarity_initial_mean, m)
        res.check(f"variational_residual[{tag}]", float(np.max(np.abs(r))), 0.0, "derived", 1e-8)
        ssh = SSHOptimalProbe(a)
        rep = pointer_shift(ssh, a, cfg)
        k_ssh = np.linspace(-math.pi / 2, math.pi / 2, points + 2)[1:-1]
        r_ssh = euler_lagrange_residual(a, ssh, k_ssh, rep.mean_final, rep.mean_initial,
                                        rep.mean_kernel_norm)
        ssh_max[tag] = float(np.max(np.abs(r_ssh)))
        rows.extend([[a.re, a.im, "variational", kk, abs(rr)] for kk, rr in zip(k, r)])
        rows.extend([[a.re, a.im, "ssh_optimal", kk, abs(rr)] for kk, rr in zip(k_ssh, r_ssh)])
    weak_values = [as_weak_value(a) for a in aw_set]
    complex_max = [ssh_max[t] for t, a in zip(ssh_max, weak_values) if a.im != 0]
    if complex_max:
        res.check("ssh_residual_max_complex", max(complex_max), 1e-2, "derived", kind="greater")
    res.evidence["ssh_optimal_max_residual"] = ssh_max
    res.evidence["ssh_residual_vanishes_for_real_aw"] = {
        t: ssh_max[t] < 1e-8 for t, a in zip(ssh_max, weak_values) if a.im == 0
    }
    art = _write_csv(out_dir, "C4_residuals.csv", ["aw_re", "aw_im", "probe", f"k [{UNITS['k']}]", "abs_residual"], rows)
    if art:
        res.artifacts.append(art)
    return res.finish()


# ---------------------------------------------------------------------------
# C5


def claim_c5(aw_set=None, cfg=DEFAULT_CONFIG, out_dir=None, seed=5, n_probes=10) -> ClaimResult:
    aw_set = aw_set or [1.0, -1.0]
    res = ClaimResult("C5", "A_w = +-1 shifts every probe by exactly +-1", tolerance=1e-8)
    rng = np.random.default_rng(seed)
    probes = [random_tabulated_probe(rng) for _ in range(n_probes)]
    rows = []
    for a in map(as_weak_value, aw_set):
        for i, p in enumerate(probes):
            rep = pointer_shift(p, a, cfg)
            res.check(f"shift[{a.re:+g}][{i}]", rep.shift, a.re, "published")
            rows.append([a.re, i, rep.shift, rep.mean_initial, rep.mean_final, rep.error_estimate])
    res.evidence["seed"] = seed
    art = _write_csv(out_dir, "C5_universality.csv",
                     ["aw", "probe", f"shift [{UNITS['x']}]", "mean_initial", "mean_final", "error"], rows)
    if art:
        res.artifacts.append(art)
    return res.finish()


# ---------------------------------------------------------------------------
# C6


def sign_integral(aw, m, iv: Interval, cfg=DEFAULT_CONFIG) -> float:
    """``integral of D/|D|`` over ``iv`` with ``D = |B|**2 - m``."""
    aw = as_weak_value(aw)
    zeros = zeros_of_d(aw, m, iv)
    value, _ = integrate(lambda k: np.sign(kernel_abs_sq(aw, k) - m), iv, cfg, breakpoints=zeros)
    return float(value)


def claim_c6(aw_set=None, cfg=DEFAULT_CONFIG, out_dir=None, seed=0, m=2.0,
             free_interval=(0.1, 0.6), straddling=(-math.pi / 2, math.pi / 2)) -> ClaimResult:
    aw_set = aw_set or [SQRT3]
    res = ClaimResult("C6", "self-consistency needs the support to contain zeros of D", tolerance=1e-9)
    rows = []
    for a in map(as_weak_value, aw_set):
        tag = f"{a.re:+.6g}{a.im:+.6g}i"
        free = Interval(*free_interval)
        wide = Interval(*straddling)
        lo, hi = a.kernel_range()
        res.evidence[f"zeros_free[{tag}]"] = list(zeros_of_d(a, m, free))
        res.evidence[f"zeros_straddling[{tag}]"] = list(zeros_of_d(a, m, wide))
        s_free = sign_integral(a, m, free, cfg)
        res.check(f"free_interval_abs_sign_integral[{tag}]", abs(s_free), 0.4, "derived", kind="greater")
        res.check(f"free_interval_no_zero[{tag}]", len(zeros_of_d(a, m, free)), 0, "exact", 0)
        delta = 1e-9 * (hi - lo)
        f_lo = sign_integral(a, lo + delta, wide, cfg)
        f_hi = sign_integral(a, hi - delta, wide, cfg)
        root = brentq(lambda mm: sign_integral(a, mm, wide, cfg), lo + delta, hi - delta, xtol=1e-12)
        res.check(f"straddling_sign_change[{tag}]", f_lo * f_hi, 0.0, "derived", kind="less")
        res.check(f"straddling_residual_at_root[{tag}]", sign_integral(a, root, wide, cfg), 0.0,
                  "derived", 1e-9)
        res.evidence[f"self_consistent_m[{tag}]"] = root
        res.evidence[f"sign_integral_at_m[{tag}]"] = sign_integral(a, m, wide, cfg)
        for mm in np.linspace(lo + delta, hi - delta, 41):
            rows.append([a.re, a.im, float(mm), sign_integral(a, mm, free, cfg),
                         sign_integral(a, mm, wide, cfg)])
    art = _write_csv(out_dir, "C6_sign_integrals.csv",
                     ["aw_re", "aw_im", "m", "sign_integral_free", "sign_integral_straddling"], rows)
    if art:
        res.artifacts.append(art)
    return res.finish()


# ---------------------------------------------------------------------------
# C7


def claim_c7(aw_set=None, cfg=DEFAULT_CONFIG, out_dir=None, seed=0, m=2.0, target_shift=5.0,
             epsilons=(1e-2, 1e-3, 1e-4)) -> ClaimResult:
    aw_set = aw_set or [SQRT3]
    res = ClaimResult("C7", "substituting the variational probe into the shift gives the prescribed shift",
                      tolerance=0.05)
    iv = Interval(-math.pi / 2, math.pi / 2)
    rows = []
    for a in map(as_weak_value, aw_set):
        tag = f"{a.re:+.6g}{a.im:+.6g}i"
        probe = variational_probe(a, m, target_shift, iv)
        devs, errs, initial_means = [], [], []
        for eps in epsilons:
            rep = pointer_shift(probe, a, QuadratureConfig(cfg.rel_tol, cfg.abs_tol,
                                                           cfg.max_subdivisions, eps))
            devs.append(abs(rep.shift - target_shift))
            errs.append(rep.error_estimate)
            initial_means.append(rep.mean_initial)
            rows.append([a.re, a.im, eps, rep.shift, rep.mean_initial, rep.mean_final,
                         rep.mean_kernel_norm, rep.error_estimate])
        res.check(f"relative_deviation_smallest_eps[{tag}]", devs[-1] / abs(target_shift), 0.0,
                  "published", 0.05)
        # monotone approach, up to the quadrature noise floor
        increase = max([0.0] + [devs[i + 1] - devs[i] - errs[i] - errs[i + 1] for i in range(len(devs) - 1)])
        res.check(f"monotone_excess[{tag}]", increase, 0.0, "derived", 0.0)
        res.evidence[f"deviations[{tag}]"] = dict(zip(map(str, epsilons), devs))
        # the phase coefficient labelled x_f shows up as the measured initial mean
        res.evidence[f"phase_parameter_x_f[{tag}]"] = probe.final_mean
        res.evidence[f"measured_initial_means[{tag}]"] = dict(zip(map(str, epsilons), initial_means))
    art = _write_csv(out_dir, "C7_regularized_identity.csv",
                     ["aw_re", "aw_im", f"epsilon [{UNITS['k']}]", f"shift [{UNITS['x']}]", "mean_initial", "mean_final",
                      "mean_kernel_norm", "error"], rows)
    if art:
        res.artifacts.append(art)
    return res.finish()


REGISTRY: dict[str, Callable[..., ClaimResult]] = {
    "C1": claim_c1, "C2": claim_c2, "C3": claim_c3, "C4": claim_c4,
    "C5": claim_c5, "C6": claim_c6, "C7": claim_c7,
}


def run_claim(claim_id: str, aw_set=None, cfg: QuadratureConfig = DEFAULT_CONFIG,
              out_dir=None, **kwargs) -> ClaimResult:
    """Run one claim; any exception yields ``verdict = fail`` with diagnostics.

    ``aw_set`` overrides the claim's default weak values (for C2: angles theta).
    """
    if claim_id not in REGISTRY:
        raise KeyError(f"unknown claim {claim_id!r}; choose from {', '.join(CLAIM_IDS)}")
    try:
        return REGISTRY[claim_id](aw_set, cfg, out_dir, **kwargs)
    except Exception as exc:  # noqa: BLE001 - reported, not swallowed
        return ClaimResult(claim_id, "error while running claim", math.nan,
                           diagnostics=f"{type(exc).__name__}: {exc}", verdict=FAIL)


def run_claims(ids: Iterable[str] = CLAIM_IDS, cfg: QuadratureConfig = DEFAULT_CONFIG,
               out_dir=None, seed: int | None = None) -> list[ClaimResult]:
    """Run the selected claims in order; with ``out_dir`` also write ``report.json``.

    ``seed`` replaces each claim's own default seed when given.
    """
    ids = list(ids)
    unknown = [cid for cid in ids if cid not in REGISTRY]
    if unknown:
        raise KeyError(f"unknown claim(s) {unknown}; choose from {', '.join(CLAIM_IDS)}")
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    extra = {} if seed is None else {"seed": int(seed)}
    results = [run_claim(cid, None, cfg, out_dir, **extra) for cid in ids]
    if out_dir is not None:
        with open(Path(out_dir) / "report.json", "w") as fh:
            json.dump([r.as_dict() for r in results], fh, indent=2, sort_keys=True)
            fh.write("\n")
    return results
