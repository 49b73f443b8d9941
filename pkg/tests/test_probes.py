import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wvamp.errors import (
    DegenerateWeakValue,
    EvaluationAtSingularity,
    MeanKernelNormOutOfRange,
    NoSingularPointInInterval,
    OutOfSupport,
    ScenarioError,
    TrivialWeakValue,
)
from wvamp.model import WeakValue, kernel_abs_sq, kernel_b, shift_ssh_claimed
from wvamp.probes import (
    ArbitraryShiftProbe,
    GaussianProbe,
    PrimitiveG,
    PrimitiveH,
    SSHOptimalProbe,
    TabulatedProbe,
    predicted_shift_arbitrary,
    primitive_g,
    probe_from_params,
    random_tabulated_probe,
    solve_alpha_for_shift,
    variational_probe,
    zeros_of_d,
)
from wvamp.quadrature import Interval, QuadratureConfig, integrate, pointer_shift

from conftest import SQRT3, random_weak_values, weak_values

HALF_PI = math.pi / 2
FULL = Interval(-HALF_PI, HALF_PI)


# --- primitive G -------------------------------------------------------------

def test_primitive_g_unit_weak_value_is_identity():
    k = np.linspace(-7, 7, 29)
    assert np.allclose(primitive_g(WeakValue(1.0), k), k, atol=1e-14)


def test_primitive_g_period_integral():
    g = PrimitiveG(SQRT3)
    assert g(HALF_PI) - g(-HALF_PI) == pytest.approx(math.pi / SQRT3, rel=1e-14)
    assert g.period_increment == pytest.approx(math.pi / SQRT3)


@given(weak_values())
def test_primitive_g_vanishes_at_origin(aw):
    assert primitive_g(aw, 0.0) == pytest.approx(0.0, abs=1e-15)


@given(weak_values(min_abs_re=0.2), st.floats(-9, 9))
def test_primitive_g_derivative(aw, k):
    h = 1e-6
    fd = (primitive_g(aw, k + h) - primitive_g(aw, k - h)) / (2 * h)
    assert fd == pytest.approx(1 / kernel_abs_sq(aw, k), rel=1e-6)


@given(weak_values(min_abs_re=0.2), st.floats(-9, 9))
def test_primitive_g_is_continuous_with_period_increment(aw, k):
    g = PrimitiveG(aw)
    assert g(k + math.pi) - g(k) == pytest.approx(g.period_increment, rel=1e-12)


def test_primitive_g_continuous_across_branches():
    aw = WeakValue(0.4 - 1.3j)
    k = np.linspace(-10, 10, 200001)
    assert np.max(np.abs(np.diff(primitive_g(aw, k)))) < 1e-2


def test_primitive_g_degenerate():
    with pytest.raises(DegenerateWeakValue):
        primitive_g(2j, 0.1)


# --- analytic families ---------------------------------------------------------

def test_arbitrary_shift_value_at_origin():
    for aw in (WeakValue(SQRT3), WeakValue(0.3 - 2j)):
        value, _ = ArbitraryShiftProbe(aw, 0.0, 1).evaluate(0.0)
        assert value == pytest.approx(1 + 0j, abs=1e-15)


def test_ssh_probe_density():
    probe = SSHOptimalProbe(WeakValue(SQRT3))
    value, _ = probe.evaluate(0.0)
    assert abs(value) ** 2 == pytest.approx(SQRT3 / math.pi, rel=1e-14)
    assert abs(value) ** 2 == pytest.approx(0.5513289, abs=1e-7)
    k = np.linspace(-HALF_PI, HALF_PI, 11)
    v, _ = probe.evaluate(k)
    assert np.allclose(np.abs(v) ** 2, SQRT3 / math.pi / kernel_abs_sq(WeakValue(SQRT3), k), rtol=1e-13)


def test_ssh_probe_is_normalized_for_complex_weak_values():
    for aw in random_weak_values(np.random.default_rng(3), 5):
        probe = SSHOptimalProbe(aw)
        norm, _ = integrate(lambda k: np.abs(probe.evaluate(k)[0]) ** 2, probe.support)
        assert norm == pytest.approx(1.0, rel=1e-10)


def test_gaussian_support_and_norm():
    narrow = GaussianProbe(0.01)
    assert narrow.support.k_plus == pytest.approx(0.08)
    wide = GaussianProbe(100.0)
    assert wide.support.k_plus == pytest.approx(20 * math.pi)
    norm, _ = integrate(lambda k: np.abs(narrow.evaluate(k)[0]) ** 2, narrow.support)
    assert norm == pytest.approx(1.0, abs=1e-12)


@given(weak_values(min_abs_re=0.2, max_im=3), st.floats(0.01, 7.0), st.floats(-3, 3))
def test_gaussian_shift_closed_form(aw, width, center):
    # a real Gaussian has <x>_f = Re A_w / N_f with N_f = a + b exp(-2 W^2)
    a, b, _ = aw.kernel_coefficients()
    report = pointer_shift(GaussianProbe(width, center), aw)
    assert report.shift == pytest.approx(aw.re / (a + b * math.exp(-2 * width ** 2)), rel=1e-9)
    assert report.mean_initial == pytest.approx(center, abs=1e-9)


def test_gaussian_rejects_bad_width():
    with pytest.raises(ValueError):
        GaussianProbe(0.0)


def test_out_of_support():
    with pytest.raises(OutOfSupport):
        SSHOptimalProbe(WeakValue(2.0)).evaluate(np.array([0.0, 2.0]))


def _families(aw, rng):
    m = 0.5 * sum(aw.kernel_range())
    return [
        GaussianProbe(float(rng.uniform(0.2, 2)), float(rng.uniform(-3, 3))),
        SSHOptimalProbe(aw),
        ArbitraryShiftProbe(aw, float(rng.uniform(-3, 3)), int(rng.integers(1, 5))),
        variational_probe(aw, m, float(rng.uniform(-4, 4)), FULL, float(rng.uniform(-1, 1))),
    ]


@pytest.mark.parametrize("seed", range(4))
def test_derivatives_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    aw = random_weak_values(rng, 1, min_abs_re=0.3)[0]
    for probe in _families(aw, rng):
        iv = probe.support
        h = 1e-7
        k = rng.uniform(iv.k_minus + 10 * h, iv.k_plus - 10 * h, 100)
        for s in probe.singular_points:
            k = k[np.abs(k - s) > 1e-2]
        value, deriv = probe.evaluate(k)
        fd = (probe.evaluate(k + h)[0] - probe.evaluate(k - h)[0]) / (2 * h)
        scale = np.abs(deriv) + np.abs(value)
        assert np.all(np.abs(fd - deriv) <= 1e-6 * scale), probe.family


@given(weak_values(min_abs_re=0.2, max_im=3))
def test_ssh_shift_matches_claimed_formula(aw):
    report = pointer_shift(SSHOptimalProbe(aw), aw)
    assert report.shift == pytest.approx(shift_ssh_claimed(aw), rel=1e-8)
    assert report.mean_initial == pytest.approx(0.0, abs=1e-9 * (1 + abs(report.mean_final)))


# --- arbitrary-shift family ----------------------------------------------------

@pytest.mark.parametrize("value", [SQRT3, 2 + 1j, -0.7 + 0.2j, 0.4 - 1.5j])
def test_arbitrary_shift_is_independent_of_support_periods(value):
    aw = WeakValue(value)
    shifts = {n: pointer_shift(ArbitraryShiftProbe(aw, 1.3, n), aw).shift for n in (1, 2, 4, 8, 16)}
    for n in (1, 2, 4, 8):
        assert abs(shifts[n] - shifts[2 * n]) < 1e-9


@pytest.mark.parametrize("value", [SQRT3, 2 + 1j, -0.7 + 0.2j, 0.4 - 1.5j, -2.5 - 1j])
@pytest.mark.parametrize("alpha", [-2.0, 0.0, 1.5])
def test_arbitrary_shift_means(value, alpha):
    aw = WeakValue(value)
    report = pointer_shift(ArbitraryShiftProbe(aw, alpha, 8), aw)
    expected_initial = (alpha - aw.re) * (1 + aw.abs_sq) / (2 * aw.re ** 2)
    assert report.mean_initial == pytest.approx(expected_initial, rel=1e-6, abs=1e-12)
    assert abs(report.mean_final) == pytest.approx(abs(alpha) / abs(aw.re), rel=1e-6, abs=1e-12)


@pytest.mark.parametrize("value", [SQRT3, 2 + 1j, -0.7 + 0.2j])
def test_affine_law_matches_quadrature(value):
    aw = WeakValue(value)
    intercept, magnitude, sign = predicted_shift_arbitrary(aw)
    for alpha in (-2.0, 0.5, 3.0):
        report = pointer_shift(ArbitraryShiftProbe(aw, alpha, 4), aw)
        assert report.shift == pytest.approx(intercept + sign * magnitude * alpha, rel=1e-9)


def test_affine_law_examples():
    intercept, magnitude, sign = predicted_shift_arbitrary(SQRT3)
    assert intercept == pytest.approx(2 / SQRT3)
    assert magnitude == pytest.approx((1 - SQRT3) ** 2 / 6)
    assert sign == -1
    assert predicted_shift_arbitrary(2 + 1j)[1] == pytest.approx(0.25)
    for value in (1.0, -1.0):
        intercept, magnitude, _ = predicted_shift_arbitrary(value)
        assert magnitude == 0 and intercept == value


@pytest.mark.parametrize("alpha", [-3.0, 0.0, 4.0])
def test_unit_weak_value_arbitrary_shift(alpha):
    for value in (1.0, -1.0):
        report = pointer_shift(ArbitraryShiftProbe(WeakValue(value), alpha, 2), value)
        assert report.shift == pytest.approx(value, abs=1e-10)


def test_solve_alpha_for_shift():
    assert solve_alpha_for_shift(SQRT3, 2 / SQRT3) == pytest.approx(0.0, abs=1e-14)
    for target in (-5.0, 3.0, 10.0):
        alpha = solve_alpha_for_shift(SQRT3, target)
        report = pointer_shift(ArbitraryShiftProbe(WeakValue(SQRT3), alpha, 16), SQRT3)
        assert report.shift == pytest.approx(target, abs=1e-3)
    with pytest.raises(TrivialWeakValue):
        solve_alpha_for_shift(1.0, 5.0)


# --- variational family --------------------------------------------------------

def test_zeros_of_d_midline():
    assert zeros_of_d(WeakValue(SQRT3), 2.0, FULL) == pytest.approx((-math.pi / 4, math.pi / 4), abs=1e-14)


@given(weak_values(min_abs_re=0.2), st.floats(0.05, 0.95))
def test_zeros_of_d_are_zeros(aw, frac):
    lo, hi = aw.kernel_range()
    m = lo + frac * (hi - lo)
    zeros = zeros_of_d(aw, m, Interval(-math.pi, math.pi))
    assert len(zeros) == 4
    assert np.allclose(kernel_abs_sq(aw, np.array(zeros)) - m, 0, atol=1e-9 * hi)


def test_variational_rejects_out_of_range_norm():
    with pytest.raises(MeanKernelNormOutOfRange):
        variational_probe(1.0, 1.0, 2.0, FULL)
    with pytest.raises(MeanKernelNormOutOfRange):
        variational_probe(SQRT3, 5.0, 2.0, FULL)


def test_variational_needs_a_zero_in_support():
    with pytest.raises(NoSingularPointInInterval):
        variational_probe(SQRT3, 2.0, 2.0, Interval(0.1, 0.6))


@pytest.mark.parametrize("value", [SQRT3, 0.5 + 0.8j, -1.2 + 0.4j])
def test_variational_modulus(value):
    aw = WeakValue(value)
    m = 0.5 * sum(aw.kernel_range())
    probe = variational_probe(aw, m, 3.0, FULL, 0.2)
    rng = np.random.default_rng(1)
    k = rng.uniform(-HALF_PI, HALF_PI, 100)
    k = k[np.min(np.abs(k[:, None] - np.array(probe.zeros)[None, :]), axis=1) > 1e-6]
    value, _ = probe.evaluate(k)
    assert np.allclose(np.abs(value) ** 2 * np.abs(probe.d(k)), 1.0, atol=1e-12)


def test_variational_evaluation_at_zero():
    probe = variational_probe(SQRT3, 2.0, 5.0, FULL)
    with pytest.raises(EvaluationAtSingularity):
        probe.evaluate(probe.zeros[0])


def test_primitive_h():
    aw = WeakValue(SQRT3)
    h = PrimitiveH(aw, 2.0, FULL)
    assert h.singular_points == pytest.approx((-math.pi / 4, math.pi / 4))
    mids = np.array([-3 * math.pi / 8, 0.0, 3 * math.pi / 8])
    assert np.allclose(h(mids), 0.0, atol=1e-15)
    k = np.array([-1.2, -0.3, 0.2, 1.1])
    step = 1e-5
    fd = (h(k + step) - h(k - step)) / (2 * step)
    assert np.allclose(fd, 1 / h.d(k), rtol=1e-7)
    with pytest.raises(EvaluationAtSingularity):
        h(math.pi / 4)


@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
def test_self_consistent_variational_shift(eps):
    probe = variational_probe(SQRT3, 2.0, 5.0, FULL, 0.5)
    report = pointer_shift(probe, SQRT3, QuadratureConfig(singularity_epsilon=eps))
    assert report.shift == pytest.approx(5.0, rel=1e-8)
    # the stationarity equation reads x_i = 0.5 - 5, but the regularized
    # moments put the phase parameter at the initial mean
    assert report.mean_initial == pytest.approx(0.5, abs=1e-7)
    assert report.mean_final == pytest.approx(5.5, abs=1e-7)
    assert probe.stationarity_initial_mean == -4.5


# --- tabulated family --------------------------------------------------------

def test_tabulated_reproduces_smooth_function():
    k = np.linspace(-1, 1, 201)
    f = np.exp(-k ** 2 + 1j * k)
    probe = TabulatedProbe(k, f)
    kk = np.linspace(-0.9, 0.9, 37)
    value, deriv = probe.evaluate(kk)
    assert np.allclose(value, np.exp(-kk ** 2 + 1j * kk), atol=1e-8)
    assert np.allclose(deriv, (-2 * kk + 1j) * np.exp(-kk ** 2 + 1j * kk), atol=1e-5)


def test_tabulated_finite_difference_flag():
    probe = random_tabulated_probe(np.random.default_rng(0), points=32)
    fd = TabulatedProbe(probe.grid, probe.amplitudes, finite_difference=True)
    assert pointer_shift(fd, 2.0).finite_difference_derivative
    assert pointer_shift(fd, 2.0).shift == pytest.approx(pointer_shift(probe, 2.0).shift, rel=1e-6)


def test_tabulated_csv_round_trip(tmp_path):
    probe = random_tabulated_probe(np.random.default_rng(4), points=40)
    path = tmp_path / "probe.csv"
    probe.to_csv(path)
    loaded = TabulatedProbe.from_csv(path)
    assert np.array_equal(loaded.grid, probe.grid)
    assert np.array_equal(loaded.amplitudes, probe.amplitudes)


def test_tabulated_requires_increasing_grid():
    with pytest.raises(ValueError):
        TabulatedProbe(np.array([0.0, 1.0, 0.5]), np.ones(3))


def test_random_probe_is_seeded():
    a = random_tabulated_probe(np.random.default_rng(9))
    b = random_tabulated_probe(np.random.default_rng(9))
    assert np.array_equal(a.amplitudes, b.amplitudes)


# --- construction from parameters ------------------------------------------------

def test_probe_from_params():
    aw = WeakValue(SQRT3)
    assert isinstance(probe_from_params("gaussian", {"width": 0.5}, None), GaussianProbe)
    p = probe_from_params("arbitrary_shift", {"alpha": 1, "n": 3}, aw)
    assert p.n == 3 and p.alpha == 1.0
    v = probe_from_params("variational", {"mean_kernel_norm": 2, "target_shift": 5}, aw)
    assert v.zeros == pytest.approx((-math.pi / 4, math.pi / 4))
    with pytest.raises(ScenarioError):
        probe_from_params("gaussian", {"width": 0.5, "bogus": 1}, None)
    with pytest.raises(ScenarioError):
        probe_from_params("gaussian", {}, None)
    with pytest.raises(ScenarioError):
        probe_from_params("lorentzian", {}, aw)
