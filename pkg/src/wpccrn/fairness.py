"""Fairness-aware variants: equal time (ETA), max-min throughput (MTM) and
proportional time (PTA).

ETA and PTA reuse the (t_e, t_0) search of the sum-throughput solver with
their own inner allocation.  MTM is solved per decoding cutoff with the
log-barrier Newton method in ``_barrier``, then every SU's time is trimmed
so the rates are equal to machine precision (this only frees time).
"""

import math

import numpy as np

from . import _barrier as B
from . import _kernels as K
from .core_math import SolverTolerances, bisection_root, solve_rate_kkt_root
from .stora import Allocation, DualState, FixedSetProblem, SchemeResult, stora_cutoff_values

BARRIER_GAP = 1e-9
PRUNE_RTOL = 1e-9  # a cutoff whose bound is within this of the incumbent is skipped


def _cutoffs_by_bound(channels, config, bounds):
    """Cutoffs ordered by their upper bound, infeasible ones dropped."""
    if bounds is None:
        bounds = [v for v, _, _ in stora_cutoff_values(channels, config)]
    ks = [k for k in range(1, channels.n_su + 1) if bounds[k - 1] >= 0]
    return sorted(ks, key=lambda k: -bounds[k - 1]), bounds


# ---------------------------------------------------------------- ETA


def eta_allocation(p, te, t0):
    c = p.c
    ta = max(1.0 - te - 2.0 * t0, 0.0)
    teq = ta / p.n
    e_sp = np.zeros(p.n)
    need = p.need(te, t0)
    if teq > 0:
        K.eta_relay_split(need, te, teq, c.gamma_ip, c.gamma_ih, c.budget, p.relay, e_sp)
    e_sp = np.minimum(e_sp, c.budget * te)
    e_sh = c.budget * te - e_sp
    return Allocation(te, t0, np.full(p.n, teq), e_sh, e_sp)


def eta_nu(e_sh, gamma_ih, teq):
    """nu from the equal-time stationarity: sum_i [ln(1+x_i) - x_i/(1+x_i)] = N nu."""
    x = np.asarray(gamma_ih) * np.asarray(e_sh) / teq
    return float(np.mean(np.log1p(x) - x / (1 + x)))


def eta_teq_from_nu(e_sh, gamma_ih, nu, upper):
    """Exact t_eq solving the equal-time stationarity for a given nu (bisection)."""
    g = np.asarray(gamma_ih) * np.asarray(e_sh)

    def f(teq):
        x = g / teq
        return float(np.mean(np.log1p(x) - x / (1 + x))) - nu

    if f(upper) >= 0:
        return upper
    return bisection_root(f, 1e-12, upper, tol=1e-15)


def eta_teq_high_snr(e_sh, gamma_ih, nu):
    """exp(-nu) times the geometric mean of g_ih E_ih (valid when every g_ih E_ih/t_eq >> 1)."""
    g = np.asarray(gamma_ih, float) * np.asarray(e_sh, float)
    if np.any(g <= 0):
        return 0.0
    return float(math.exp(-nu + np.mean(np.log(g))))


def solve_eta(channels, config, tolerances=None, bounds=None):
    n = channels.n_su
    ks, bounds = _cutoffs_by_bound(channels, config, bounds)
    best = None
    for k in ks:
        if best is not None and bounds[k - 1] <= best.sum_throughput * (1 + PRUNE_RTOL):
            break
        p = FixedSetProblem(channels, config, k)
        val, te, t0 = p.search(K.ETA)
        if val < 0:
            continue
        alloc = eta_allocation(p, te, t0)
        teq = alloc.t[0]
        nu = eta_nu(alloc.e_sh, p.c.gamma_ih, teq) if teq > 0 else 0.0
        mu = p.c.gamma_ih / (1 + p.c.gamma_ih * alloc.e_sh / teq) if teq > 0 else np.zeros(n)
        r = p.result("ETA", alloc, DualState(nu=nu, mu=mu))
        if best is None or r.sum_throughput > best.sum_throughput:
            best = r
    return best if best is not None else SchemeResult.infeasible("ETA", n)


# ---------------------------------------------------------------- PTA


def pta_allocation(p, te, t0):
    """Shares pi_i of the access window; relay SNR-energy of SU i is pi_i S."""
    c = p.c
    ta = max(1.0 - te - 2.0 * t0, 0.0)
    need = K.pta_need(te, t0, c.gamma_p, c.q1, p.rbar, p.crate)
    pi = np.zeros(p.n)
    fill = K.pta_floor_shares if need <= K.PTA_FLOOR * p.crate * te else K.pta_shares
    fill(ta, need, te, c.gamma_ip, c.gamma_ih, c.budget, p.relay, pi)
    gip = np.where(p.relay, c.gamma_ip, 1.0)
    e_sp = np.where(p.relay, pi * need / gip, 0.0)
    e_sp = np.minimum(e_sp, c.budget * te)
    e_sh = c.budget * te - e_sp
    t = ta * pi
    zeta = ta / need if need > 0 else math.inf
    return Allocation(te, t0, t, e_sh, e_sp), zeta


def pta_ratio_spread(alloc, gamma_ip):
    """max relative spread of t_i / (g_ip E_ip) over SUs that relay."""
    u = np.asarray(gamma_ip) * alloc.e_sp
    on = u > 0
    if not np.any(on):
        return 0.0
    r = alloc.t[on] / u[on]
    return float((r.max() - r.min()) / r.max())


def solve_pta(channels, config, tolerances=None, bounds=None, nscan=0):
    n = channels.n_su
    ks, bounds = _cutoffs_by_bound(channels, config, bounds)
    best = None
    for k in ks:
        if best is not None and bounds[k - 1] <= best.sum_throughput * (1 + PRUNE_RTOL):
            break
        p = FixedSetProblem(channels, config, k)
        val, te, t0 = p.search(K.PTA, nscan)
        if val < 0:
            continue
        alloc, zeta = pta_allocation(p, te, t0)
        r = p.result("PTA", alloc, DualState(mu=np.zeros(n), zeta=zeta),
                     extra={"proportionality": pta_ratio_spread(alloc, p.c.gamma_ip)})
        if best is None or r.sum_throughput > best.sum_throughput:
            best = r
    return best if best is not None else SchemeResult.infeasible("PTA", n)


# ---------------------------------------------------------------- MTM


def mtm_access_time(e_ih, gamma_ih, nu, rho_i):
    """t_i = g_ih E_ih / x*(nu/rho_i), x* from the rate stationarity root."""
    if e_ih <= 0:
        return 0.0
    x = solve_rate_kkt_root(nu / rho_i)
    if x <= 0:
        return math.inf
    return gamma_ih * e_ih / x


def _time_for_rate(rate, e, g):
    """Smallest t with t ln(1 + g e / t) >= rate (the rate is increasing in t)."""
    cap = g * e  # limit as t -> inf
    if rate >= cap:
        return math.inf
    lo, hi = 0.0, 1.0
    while hi * math.log1p(g * e / hi) < rate:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * math.log1p(g * e / mid) >= rate:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-16 * hi:
            break
    return hi


def _equalize(p, alloc):
    """Trim each t_i so every SU sits exactly at the smallest rate."""
    rates = p.rates(alloc)
    rmin = float(rates.min())
    if rmin <= 0:
        return alloc
    t = np.array(alloc.t)
    for i in range(p.n):
        if rates[i] > rmin:
            ti = _time_for_rate(rmin, alloc.e_sh[i], p.c.gamma_ih[i])
            t[i] = min(t[i], ti)
    return Allocation(alloc.t_e, alloc.t_0, t, alloc.e_sh, alloc.e_sp)


def mtm_fixed_set(p, tolerances=None):
    """Max-min problem for one decoding cutoff; returns SchemeResult or None if infeasible."""
    tolerances = tolerances or SolverTolerances()
    ok, lo, hi = p.te_interval()
    if not ok or not hi > lo:
        return None
    c = p.c
    n = p.n
    rel = np.flatnonzero(p.relay).astype(np.int64)
    pmap = -np.ones(n, np.int64)
    pmap[rel] = np.arange(len(rel))
    status, x, s, steps = B.barrier_solve(1, 0.5 * (lo + hi), c.gamma_p, c.q1, c.q2, p.rbar,
                                          c.gamma_ip, c.gamma_ih, c.budget, rel, pmap, p.crate,
                                          BARRIER_GAP, tolerances.max_iterations)
    if status == B.NO_INTERIOR:
        return None
    e_sp = np.zeros(n)
    e_sp[rel] = x[2 + 2 * n: 2 + 2 * n + len(rel)]
    raw = Allocation(x[0], x[1], x[2:2 + n], x[2 + n:2 + 2 * n], e_sp)
    alloc = _equalize(p, raw)
    duals = _barrier_duals(p, raw, x[-1], s)
    return p.result("MTM", alloc, duals, converged=status == B.OK,
                    extra={"newton_steps": int(steps), "rate_spread": _spread(p.rates(alloc))})


def _spread(rates):
    top = float(np.max(rates))
    return float((top - np.min(rates)) / top) if top > 0 else 0.0


def _barrier_duals(p, a, rmin, s):
    """Central-path multipliers 1 / (s * slack)."""
    c = p.c
    if not s > 0:
        return DualState(mu=np.zeros(p.n))
    rates = p.rates(a)
    slack_e = np.maximum(a.energy_slack(c.budget), 1e-300)
    ts = max(a.time_slack(), 1e-300)
    prim = max(p.primary_rate(a) - p.rbar, 1e-300)
    dec = max(a.t_0 * c.q2 + a.t_e * c.q1 - p.rbar, 1e-300)
    rho = 1.0 / (s * np.maximum(rates - rmin, 1e-300))
    return DualState(lam=1 / (s * prim), kappa=1 / (s * dec), nu=1 / (s * ts),
                     mu=1 / (s * slack_e), rho=rho)


def solve_mtm(channels, config, tolerances=None, bounds=None):
    n = channels.n_su
    ks, bounds = _cutoffs_by_bound(channels, config, bounds)
    best = None
    failed = False
    for k in ks:
        # R_min <= sum / N for the same cutoff
        if best is not None and bounds[k - 1] / n <= best.min_throughput * (1 + PRUNE_RTOL):
            break
        r = mtm_fixed_set(FixedSetProblem(channels, config, k), tolerances)
        if r is None:
            continue
        if not r.converged:
            failed = True
        if best is None or r.min_throughput > best.min_throughput:
            best = r
    if best is None:
        return SchemeResult.infeasible("MTM", n, converged=not failed)
    if failed and best.converged:
        best = SchemeResult(**{**best.__dict__, "converged": False})
    return best
