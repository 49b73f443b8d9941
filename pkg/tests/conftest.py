import math

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from wvamp.model import WeakValue

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

SQRT3 = math.sqrt(3.0)


@st.composite
def weak_values(draw, min_abs_re=0.05, max_re=4.0, max_im=4.0, sign=None):
    """Valid weak values with ``|Re A_w|`` bounded away from zero."""
    re = draw(st.floats(min_abs_re, max_re, allow_nan=False))
    if sign is None:
        s = draw(st.sampled_from((-1.0, 1.0)))
    else:
        s = float(sign)
    im = draw(st.floats(-max_im, max_im, allow_nan=False))
    return WeakValue(complex(s * re, im))


def random_weak_values(rng, count, min_abs_re=0.2, max_re=3.0, max_im=2.0):
    re = rng.uniform(min_abs_re, max_re, count) * rng.choice([-1.0, 1.0], count)
    im = rng.uniform(-max_im, max_im, count)
    return [WeakValue(complex(r, i)) for r, i in zip(re, im)]


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


# --- acceptance summary ------------------------------------------------------------

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[number] = ("PASS" if report.passed else "FAIL", title)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        verdict, title = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {title}")
