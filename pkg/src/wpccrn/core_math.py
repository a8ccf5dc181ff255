"""Scalar numerical primitives shared by the allocation solvers.

Lambert W on the principal branch, the rate stationarity root
ln(1+x) - x/(1+x) = nu, bisection, golden-section search and the
diminishing subgradient step.
"""

import math
from dataclasses import dataclass

from numba import njit

INV_E = math.exp(-1.0)
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1 / phi
INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0  # 1 / phi^2


class BracketError(ValueError):
    """Root is not bracketed by the supplied interval."""


@dataclass(frozen=True)
class SolverTolerances:
    """Convergence controls for the iterative solvers.

    epsilon is the relative change / residual threshold, max_iterations caps
    every iterative loop, initial_step is the subgradient step size alpha.
    """

    epsilon: float = 1e-5
    max_iterations: int = 5000
    initial_step: float = 0.1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")


@njit(cache=True)
def _lambert_w0(x):
    if x <= -INV_E:
        return -1.0
    if x == 0.0:
        return 0.0
    # starting point: branch-point series, small-argument, or log asymptote
    if x < -0.25:
        p = math.sqrt(2.0 * (math.e * x + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    elif x < 3.0:
        w = math.log1p(x) * (1.0 - 0.25 * math.log1p(x))
        if x < 0.0:
            w = x * (1.0 - x)
    else:
        lx = math.log(x)
        w = lx - math.log(lx)
    for _ in range(60):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        dw = f / denom
        w -= dw
        if abs(dw) <= 1e-16 * (1.0 + abs(w)):
            break
    if w < -1.0:
        w = -1.0
    return w


def lambert_w0(x):
    """Principal branch W0(x) for x >= -1/e via Halley iteration."""
    x = float(x)
    if x < -INV_E - 1e-12:
        raise ValueError(f"lambert_w0 domain error: x={x!r} < -1/e")
    return float(_lambert_w0(x))


@njit(cache=True)
def _rate_kkt_lhs(x):
    return math.log1p(x) - x / (1.0 + x)


def solve_rate_kkt_root(nu):
    """Unique x >= 0 with ln(1+x) - x/(1+x) = nu, by bracketing + bisection."""
    nu = float(nu)
    if nu < 0:
        raise ValueError("nu must be non-negative")
    if nu == 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while _rate_kkt_lhs(hi) < nu:
        lo, hi = hi, 2.0 * hi
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if _rate_kkt_lhs(mid) < nu:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def rate_kkt_root_closed_form(nu):
    """Same root through Lambert W: exp(W0(-exp(-(nu+1))) + nu + 1) - 1."""
    nu = float(nu)
    w = lambert_w0(-math.exp(-(nu + 1.0)))
    return math.exp(w + nu + 1.0) - 1.0


def rate_kkt_root_printed_form(nu):
    """The W form with argument -1/(nu+1); kept to document the mismatch.

    It does not solve ln(1+x) - x/(1+x) = nu, and for nu < e - 1 the
    argument falls outside the real domain of W0 (returns nan).
    """
    nu = float(nu)
    arg = -1.0 / (nu + 1.0)
    if arg < -INV_E:
        return math.nan
    w = lambert_w0(arg)
    return math.exp(w + nu + 1.0) - 1.0


def bisection_root(f, lo, hi, tol=1e-12, max_iter=500):
    """Root of a monotone f on [lo, hi]; raises BracketError on equal signs."""
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if flo * fhi > 0:
        raise BracketError(f"f({lo})={flo} and f({hi})={fhi} have the same sign")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def golden_section_max(g, lo, hi, tol=1e-9):
    """Maximize a unimodal g on [lo, hi]; returns (argmax, max)."""
    if hi <= lo:
        return lo, g(lo)
    a, b = lo, hi
    h = b - a
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    gc, gd = g(c), g(d)
    while h > tol:
        if gc >= gd:
            b, d, gd = d, c, gc
            h = INV_PHI * h
            c = a + INV_PHI2 * h
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            h = INV_PHI * h
            d = a + INV_PHI * h
            gd = g(d)
    # endpoints are admissible too (monotone case)
    best_x, best_g = (c, gc) if gc >= gd else (d, gd)
    for x in (lo, hi):
        gx = g(x)
        if gx > best_g:
            best_x, best_g = x, gx
    return best_x, best_g


def diminishing_step(initial, iteration):
    """alpha / sqrt(l)."""
    if iteration < 1:
        raise ValueError("iteration must be >= 1")
    return initial / math.sqrt(iteration)
