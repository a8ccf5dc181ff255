import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wpccrn.core_math import (BracketError, SolverTolerances, bisection_root, diminishing_step,
                              golden_section_max, lambert_w0, rate_kkt_root_closed_form,
                              rate_kkt_root_printed_form, solve_rate_kkt_root)

# bisection on the monotone stationarity function, frozen
NU1_ROOT = 5.30539527927


def lhs(x):
    return math.log1p(x) - x / (1 + x)


@pytest.mark.parametrize("x, w", [(0.0, 0.0), (math.e, 1.0), (-1 / math.e, -1.0)])
def test_lambert_fixed_points(x, w):
    assert lambert_w0(x) == pytest.approx(w, abs=1e-12)


def test_lambert_domain():
    with pytest.raises(ValueError):
        lambert_w0(-0.5)


@given(st.floats(-1 / math.e + 1e-9, 1e6))
def test_lambert_roundtrip(x):
    w = lambert_w0(x)
    assert w >= -1
    assert abs(w * math.exp(w) - x) <= 1e-9 * max(1.0, abs(x))


def test_rate_root_examples():
    assert solve_rate_kkt_root(0.0) == 0.0
    assert solve_rate_kkt_root(math.log(2) - 0.5) == pytest.approx(1.0, rel=1e-12)
    assert solve_rate_kkt_root(1.0) == pytest.approx(NU1_ROOT, abs=1e-9)


def test_rate_root_nu1_value_in_text_is_not_a_root():
    # 3.9216 leaves the stationarity function near 0.797, well short of 1
    assert lhs(3.9216) == pytest.approx(0.797, abs=1e-3)
    assert lhs(NU1_ROOT) == pytest.approx(1.0, abs=1e-12)


def test_printed_w_argument_is_wrong():
    # -1/(nu+1) is outside the real domain below nu = e - 1 and gives a non-root above it
    assert math.isnan(rate_kkt_root_printed_form(1.0))
    x = rate_kkt_root_printed_form(3.0)
    assert abs(lhs(x) - 3.0) > 0.1


@given(st.floats(1e-6, 5.0))
def test_rate_root_matches_closed_form(nu):
    x = solve_rate_kkt_root(nu)
    assert abs(rate_kkt_root_closed_form(nu) - x) <= 1e-8 * max(1.0, x)
    assert lhs(x) == pytest.approx(nu, rel=1e-10, abs=1e-12)


@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_rate_root_monotone(a, b):
    lo, hi = sorted((a, b))
    assert solve_rate_kkt_root(lo) <= solve_rate_kkt_root(hi)


def test_rate_root_rejects_negative():
    with pytest.raises(ValueError):
        solve_rate_kkt_root(-0.1)


@pytest.mark.parametrize("f, lo, hi, root", [
    (lambda x: x - 2, 0, 4, 2.0),
    (lambda x: x * x - 2, 0, 2, math.sqrt(2)),
    (lambda x: math.log1p(x) - 1, 0, 10, math.e - 1),
])
def test_bisection(f, lo, hi, root):
    assert bisection_root(f, lo, hi, tol=1e-9) == pytest.approx(root, abs=1e-9)


def test_bisection_bracket():
    with pytest.raises(BracketError):
        bisection_root(lambda x: x + 1, 0, 1)


@pytest.mark.parametrize("g, lo, hi, xstar", [
    (lambda x: -(x - 1) ** 2, 0, 3, 1.0),
    (lambda x: x * math.log1p(1 / x), 0.01, 100, 100.0),
    (lambda x: math.log1p(x) - x / 2, 0, 5, 1.0),
])
def test_golden(g, lo, hi, xstar):
    x, v = golden_section_max(g, lo, hi, tol=1e-10)
    assert x == pytest.approx(xstar, abs=1e-4)
    assert v == pytest.approx(g(xstar), abs=1e-8)


@given(st.floats(-10, 10), st.floats(0.1, 5))
def test_golden_quadratic(c, a):
    x, _ = golden_section_max(lambda x: -a * (x - c) ** 2, -20, 20, tol=1e-10)
    assert x == pytest.approx(c, abs=1e-6)


@pytest.mark.parametrize("a, l, s", [(0.1, 1, 0.1), (0.1, 4, 0.05), (1.0, 100, 0.1)])
def test_step(a, l, s):
    assert diminishing_step(a, l) == pytest.approx(s)


def test_step_rejects_zero():
    with pytest.raises(ValueError):
        diminishing_step(0.1, 0)


def test_tolerances_validated():
    SolverTolerances()
    for kw in ({"epsilon": 0}, {"max_iterations": 0}, {"initial_step": -1}):
        with pytest.raises(ValueError):
            SolverTolerances(**kw)


def test_lambert_vectorless_grid():
    xs = np.concatenate([np.linspace(-1 / math.e, 0, 200), np.logspace(-8, 8, 200)])
    err = max(abs(lambert_w0(x) * math.exp(lambert_w0(x)) - x) / max(1, abs(x)) for x in xs)
    assert err <= 1e-9


def test_lambert_matches_scipy():
    from scipy.special import lambertw
    for x in np.concatenate([np.linspace(-1 / math.e + 1e-12, 0, 50), np.logspace(-6, 6, 50)]):
        assert lambert_w0(x) == pytest.approx(lambertw(x).real, rel=1e-12, abs=1e-12)
