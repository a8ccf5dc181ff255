"""Sum-throughput optimal allocation (STORA) and the shared solver types.

For a decoding set made of the k SUs with the largest h_pi, the problem is
solved exactly by a nested search over (t_e, t_0); the inner allocation is
the greedy relay fill in gamma_ih/gamma_ip order followed by a common access
SNR for every SU.  The decoding set is then chosen as the best of the N
prefixes.  Multipliers are recovered from the KKT system afterwards.

The two-level primal-dual loop (SP1 energy / SP2 time / projected t_e step)
is also available as ``solve_fixed_set(..., method="dual")``; it is slower
and only used as a reference.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .core_math import SolverTolerances, bisection_root, diminishing_step, solve_rate_kkt_root
from .scenario import derive_coefficients

TOL_TE = 1e-10
TOL_T0 = 1e-11
T0_BOUNDARY = 1e-9  # t_0 below this is treated as zero when reading off duals
ACTIVE_TOL = 1e-6  # relative, for "fractional" / "full" relay classification


class ConvergenceError(RuntimeError):
    """Iterative solver hit max_iterations."""


def _ro(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Allocation:
    """Time split and normalized energies (energies are divided by eta*h_hi)."""

    t_e: float
    t_0: float
    t: np.ndarray
    e_sh: np.ndarray
    e_sp: np.ndarray

    def __post_init__(self):
        for name in ("t", "e_sh", "e_sp"):
            object.__setattr__(self, name, _ro(getattr(self, name)))
        n = len(self.t)
        if len(self.e_sh) != n or len(self.e_sp) != n:
            raise ValueError("allocation vectors must share one length")

    @classmethod
    def zeros(cls, n):
        z = np.zeros(n)
        return cls(0.0, 0.0, z, z, z)

    @property
    def access_window(self):
        return float(np.sum(self.t))

    def time_slack(self):
        return 1.0 - self.t_e - 2.0 * self.t_0 - float(np.sum(self.t))

    def energy_slack(self, budget):
        return np.asarray(budget) * self.t_e - self.e_sh - self.e_sp

    def is_valid(self, budget, tol=1e-9):
        if min(self.t_e, self.t_0) < -tol:
            return False
        if np.any(self.t < -tol) or np.any(self.e_sh < -tol) or np.any(self.e_sp < -tol):
            return False
        scale = np.maximum(np.asarray(budget) * max(self.t_e, 1e-300), 1.0)
        return self.time_slack() >= -tol and bool(np.all(self.energy_slack(budget) >= -tol * scale))

    def powers(self, channels, config):
        """Physical transmit powers (P_ih, P_ip) in Watts."""
        g = config.eta * channels.h_hs
        with np.errstate(divide="ignore", invalid="ignore"):
            p_ih = np.where(self.t > 0, g * self.e_sh / np.where(self.t > 0, self.t, 1.0), 0.0)
        p_ip = g * self.e_sp / self.t_0 if self.t_0 > 0 else np.zeros_like(self.e_sp)
        return p_ih, p_ip


@dataclass(frozen=True)
class DualState:
    lam: float = 0.0
    kappa: float = 0.0
    nu: float = 0.0
    mu: np.ndarray = field(default_factory=lambda: np.zeros(0))
    rho: np.ndarray = None  # max-min rate multipliers
    zeta: float = None  # proportional-time constant

    def __post_init__(self):
        object.__setattr__(self, "mu", _ro(self.mu))
        if self.rho is not None:
            object.__setattr__(self, "rho", _ro(self.rho))


@dataclass(frozen=True)
class DecodingSet:
    """The `cutoff` SUs with the largest h_pi."""

    members: tuple
    cutoff: int

    @classmethod
    def top(cls, channels, cutoff):
        rank = np.argsort(-np.asarray(channels.h_ps), kind="stable")
        return cls(tuple(sorted(int(i) for i in rank[:cutoff])), int(cutoff))

    @classmethod
    def empty(cls):
        return cls((), 0)

    def __contains__(self, i):
        return i in self.members


@dataclass(frozen=True)
class SchemeResult:
    scheme: str
    feasible: bool
    allocation: Allocation
    decoding_set: DecodingSet
    su_throughputs: np.ndarray
    sum_throughput: float
    primary_rate: float
    duals: DualState = None
    converged: bool = True
    residuals: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "su_throughputs", _ro(self.su_throughputs))

    @classmethod
    def infeasible(cls, scheme, n, converged=True, **kw):
        return cls(scheme, False, Allocation.zeros(n), DecodingSet.empty(), np.zeros(n),
                   0.0, 0.0, DualState(mu=np.zeros(n)), converged, kw)

    @property
    def min_throughput(self):
        return float(np.min(self.su_throughputs))


@dataclass(frozen=True)
class GreedyInstance:
    """min sum w_i q_i  s.t.  sum q_i = s, 0 <= q_i <= r_i."""

    weights: np.ndarray
    capacities: np.ndarray
    demand: float

    def __post_init__(self):
        w, r = _ro(self.weights), _ro(self.capacities)
        if w.shape != r.shape:
            raise ValueError("weights and capacities differ in length")
        if np.any(w < 0) or np.any(r < 0) or self.demand < 0:
            raise ValueError("greedy instance entries must be >= 0")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "capacities", r)


def greedy_allocate(instance):
    """Fill q in increasing weight (lowest index on ties); p = r - q."""
    r = instance.capacities
    q = np.zeros_like(r)
    rem = float(instance.demand)
    for i in np.argsort(instance.weights, kind="stable"):
        if rem <= 0:
            break
        q[i] = min(r[i], rem)
        rem -= q[i]
    return r - q, q


def relay_priority_order(channels, config, members=None):
    """SU indices by ascending gamma_ih/gamma_ip = h_ih/h_ip (ties: lower index).

    SUs with gamma_ip = 0 cannot relay and are left out.
    """
    idx = range(channels.n_su) if members is None else members
    idx = [int(i) for i in idx if channels.h_sp[i] > 0]
    ratio = np.array([channels.h_sh[i] / channels.h_sp[i] for i in idx])
    return [idx[j] for j in np.argsort(ratio, kind="stable")]


def check_decoding(i, t_0, t_e, channels, config):
    c = derive_coefficients(channels, config)
    return bool(t_0 * c.q2_each[i] >= config.target_primary_rate - t_e * c.q1)


# ------------------------------------------------------------------ fixed set


class FixedSetProblem:
    """Problem data for one decoding cutoff and one relay subset."""

    def __init__(self, channels, config, cutoff, relays=None):
        n = channels.n_su
        self.n = n
        self.cutoff = int(cutoff)
        self.config = config
        self.c = derive_coefficients(channels, config, cutoff)
        self.rbar = float(config.target_primary_rate)
        self.decoding = DecodingSet.top(channels, cutoff)
        members = self.decoding.members if relays is None else tuple(sorted(relays))
        if not set(members) <= set(self.decoding.members):
            raise ValueError("relays must belong to the decoding set")
        self.relay = np.zeros(n, dtype=np.bool_)
        for i in members:
            if self.c.gamma_ip[i] > 0:
                self.relay[i] = True
        w = np.where(self.relay, self.c.gamma_ih / np.where(self.relay, self.c.gamma_ip, 1.0), np.inf)
        self.order = np.argsort(w, kind="stable")[: int(self.relay.sum())].astype(np.int64)
        self.crate = K.relay_capacity_rate(self.c.gamma_ip, self.c.budget, self.relay)

    def te_interval(self):
        c = self.c
        return K.te_interval(c.gamma_p, c.q1, c.q2, self.rbar, self.crate)

    @property
    def feasible(self):
        return bool(self.te_interval()[0])

    def search(self, scheme, nscan=0):
        c = self.c
        return K.search(scheme, c.gamma_p, c.q1, c.q2, self.rbar, c.gamma_ip, c.gamma_ih,
                        c.budget, self.relay, self.order, len(self.order), TOL_TE, TOL_T0, nscan)

    def need(self, te, t0):
        return K.relay_need(self.rbar - self.c.q1 * te, t0, self.c.gamma_p)

    def primary_rate(self, alloc):
        c = self.c
        u = float(np.dot(c.gamma_ip, alloc.e_sp))
        rate = alloc.t_e * c.q1
        if alloc.t_0 > 0:
            rate += alloc.t_0 * math.log1p(c.gamma_p + u / alloc.t_0)
        return rate

    def rates(self, alloc):
        g = self.c.gamma_ih
        out = np.zeros(self.n)
        for i in range(self.n):
            if alloc.t[i] > 0:
                out[i] = alloc.t[i] * math.log1p(g[i] * alloc.e_sh[i] / alloc.t[i])
        return out

    def residuals(self, alloc):
        """Relative slacks of the primary, decoding, energy and time constraints."""
        c = self.c
        scale = max(self.rbar, 1e-12)
        energy = alloc.energy_slack(c.budget) / np.maximum(c.budget * max(alloc.t_e, 1e-300), 1e-300)
        return {
            "primary": (self.primary_rate(alloc) - self.rbar) / scale,
            "decoding": (alloc.t_0 * c.q2 + alloc.t_e * c.q1 - self.rbar) / scale,
            "energy_max": float(np.max(np.abs(energy))),
            "time": alloc.time_slack(),
        }

    def result(self, scheme, alloc, duals=None, converged=True, extra=None):
        rates = self.rates(alloc)
        res = self.residuals(alloc)
        if extra:
            res.update(extra)
        return SchemeResult(scheme, True, alloc, self.decoding, rates, float(np.sum(rates)),
                            self.primary_rate(alloc), duals, converged, res)


def stora_allocation(p, te, t0):
    """Greedy relay fill, then one common access SNR for every SU."""
    c = p.c
    need = p.need(te, t0)
    e_sp = np.zeros(p.n)
    if need > 0:
        rem = need
        for i in p.order:
            if rem <= 0:
                break
            u = min(c.gamma_ip[i] * c.budget[i] * te, rem)
            e_sp[i] = u / c.gamma_ip[i]
            rem -= u
        if te > 0:
            # absorb round-off so the budget holds exactly
            e_sp = np.minimum(e_sp, c.budget * te)
    e_sh = np.maximum(c.budget * te - e_sp, 0.0)
    ta = max(1.0 - te - 2.0 * t0, 0.0)
    snr = c.gamma_ih * e_sh
    w = snr.sum()
    t = ta * snr / w if w > 0 else np.zeros(p.n)
    return Allocation(te, t0, t, e_sh, e_sp)


def stora_duals(p, alloc):
    """Multipliers from the stationarity conditions plus their residuals.

    nu and mu_i follow from the access block, lambda from the fractional relay
    SU when there is one, otherwise (lambda, kappa) solve the t_0 and t_e
    stationarity equations together.
    """
    c = p.c
    n = p.n
    ta = alloc.access_window
    if ta <= 0:
        return DualState(mu=np.zeros(n)), {}
    x = float(np.sum(c.gamma_ih * alloc.e_sh)) / ta
    nu = math.log1p(x) - x / (1.0 + x)
    mu = c.gamma_ih / (1.0 + x)
    cap = c.budget * alloc.t_e
    frac = [i for i in p.order if ACTIVE_TOL * cap[i] < alloc.e_sp[i] < (1 - ACTIVE_TOL) * cap[i]]
    full = [i for i in p.order if alloc.e_sp[i] >= (1 - ACTIVE_TOL) * cap[i] and cap[i] > 0]
    dec_slack = alloc.t_0 * c.q2 + alloc.t_e * c.q1 - p.rbar
    res = {}
    if alloc.t_0 > T0_BOUNDARY:
        u = float(np.dot(c.gamma_ip, alloc.e_sp))
        y = u / alloc.t_0
        d = 1.0 + c.gamma_p + y
        g0 = math.log(d) - y / d
        fullsum = sum(c.gamma_ip[i] * c.budget[i] for i in full) / d
        rest = sum(mu[i] * c.budget[i] for i in range(n) if i not in full)
        if frac:
            f = frac[0]
            lam = mu[f] * d / c.gamma_ip[f]
            kappa = (2 * nu - lam * g0) / c.q2 if dec_slack <= 1e-9 * max(p.rbar, 1) else 0.0
        elif dec_slack > 1e-9 * max(p.rbar, 1):
            kappa = 0.0
            lam = 2 * nu / g0
        else:
            # [Q1 + fullsum, Q1; g0, Q2] [lam, kappa] = [nu - rest, 2 nu]
            a = np.array([[c.q1 + fullsum, c.q1], [g0, c.q2]])
            lam, kappa = np.linalg.solve(a, [nu - rest, 2 * nu])
        for i in full:
            mu[i] = lam * c.gamma_ip[i] / d
        res["stationarity_t0"] = (lam * g0 + kappa * c.q2 - 2 * nu) / nu
        # relay SUs must not profit from changing their split
        price = lam * c.gamma_ip / d
        viol = 0.0
        for i in p.order:
            if alloc.e_sp[i] <= ACTIVE_TOL * cap[i]:
                viol = max(viol, (price[i] - mu[i]) / mu[i])
            elif i in full:
                viol = max(viol, (c.gamma_ih[i] / (1 + x) - mu[i]) / mu[i])
        res["split_optimality"] = viol
    else:
        # t_0 at its bound: both rate constraints reduce to t_e Q1 >= R, so only
        # lam + kappa is pinned; put it on the constraint with the flatter t_0 slope
        rest = float(np.dot(mu, c.budget))
        tot = max((nu - rest) / c.q1, 0.0) if alloc.t_e * c.q1 <= p.rbar * (1 + 1e-9) else 0.0
        lam, kappa = (0.0, tot) if c.q2 < c.q1 else (tot, 0.0)
        res["stationarity_t0"] = max(tot * min(c.q1, c.q2) - 2 * nu, 0.0) / nu  # t_0 = 0 needs <= 0
    g_te = (lam + kappa) * c.q1 + float(np.dot(mu, c.budget)) - nu
    res["stationarity_te"] = g_te / nu
    res["dual_sign"] = min(lam, kappa, float(np.min(mu)) if n else 0.0)
    return DualState(lam=float(lam), kappa=float(kappa), nu=nu, mu=mu), res


def solve_fixed_set(cutoff, channels, config, tolerances=None, method="structured", relays=None):
    """Sum-throughput optimum when the decoding set is the `cutoff` largest h_pi."""
    tolerances = tolerances or SolverTolerances()
    p = FixedSetProblem(channels, config, cutoff, relays)
    if method == "dual":
        return _solve_fixed_set_dual(p, tolerances)
    if method != "structured":
        raise ValueError(f"unknown method {method!r}")
    val, te, t0 = p.search(K.STORA)
    if val < 0:
        return SchemeResult.infeasible("STORA", p.n, limiting=_limiting(p))
    alloc = stora_allocation(p, te, t0)
    duals, kkt = stora_duals(p, alloc)
    return p.result("STORA", alloc, duals, extra=kkt)


def _limiting(p):
    """Name the constraint that blocks cooperation at the best t_e."""
    c = p.c
    if c.q1 >= p.rbar:
        return "none"
    ok, lo, hi = p.te_interval()
    te = lo
    t0 = 0.5 * (1 - te)
    prim = te * c.q1 + t0 * math.log1p(c.gamma_p + p.crate * te / max(t0, 1e-300))
    dec = te * c.q1 + t0 * c.q2
    return "decoding" if dec < prim else "primary"


def stora_cutoff_values(channels, config):
    """STORA objective for every cutoff k = 1..N (-1 when infeasible)."""
    out = []
    for k in range(1, channels.n_su + 1):
        out.append(FixedSetProblem(channels, config, k).search(K.STORA))
    return out


def solve_stora(channels, config, tolerances=None):
    """Best decoding prefix: max over k of the fixed-set optimum."""
    n = channels.n_su
    best = None
    widest = None
    for k in range(n, 0, -1):
        r = solve_fixed_set(k, channels, config, tolerances)
        widest = widest or r
        if r.feasible and (best is None or r.sum_throughput > best.sum_throughput):
            best = r
    return best if best is not None else widest


# ------------------------------------------------------ two-level dual method


def sp1_energy_allocation(t_e, t_0, t, lam, coeffs, relay, e_sp0=None, sweeps=50, eps=1e-10):
    """Energy split for fixed times: per-SU bisection on mu_i to spend B_i t_e.

    E_ih = t_i [1/mu - 1/g_ih]^+ and E_ip = t_0 [lam/mu - (1+g_p)/g_ip - U_-i/(t_0 g_ip)]^+,
    swept Gauss-Seidel over the relay SUs.  Returns (e_sh, e_sp, mu).
    """
    c = coeffs
    n = len(t)
    e_sp = np.zeros(n) if e_sp0 is None else np.array(e_sp0, float)
    e_sh = np.zeros(n)
    mu = np.zeros(n)
    budget = c.budget * t_e
    # Gauss-Seidel in relay priority order (ascending g_ih / g_ip)
    sweep_order = np.argsort(c.gamma_ih / np.maximum(c.gamma_ip, 1e-300), kind="stable")
    for _ in range(sweeps):
        change = 0.0
        for i in sweep_order:
            rel = bool(relay[i]) and t_0 > 0 and lam > 0
            u_other = float(np.dot(c.gamma_ip, e_sp)) - c.gamma_ip[i] * e_sp[i]

            def spend(m, i=i, rel=rel, u_other=u_other):
                eh = t[i] * max(1.0 / m - 1.0 / c.gamma_ih[i], 0.0)
                ep = 0.0
                if rel:
                    ep = t_0 * max(lam / m - (1 + c.gamma_p) / c.gamma_ip[i]
                                   - u_other / (t_0 * c.gamma_ip[i]), 0.0)
                return eh, ep

            def excess(logm):
                eh, ep = spend(math.exp(logm))
                return budget[i] - eh - ep

            lo, hi = math.log(1e-12), math.log(1e12)
            if excess(lo) >= 0:  # cannot spend the budget (no time, no relay)
                m = 1e-12
            else:
                m = math.exp(bisection_root(excess, lo, hi, tol=1e-13))
            eh, ep = spend(m)
            tot = eh + ep
            if tot > 0:  # exact budget after bisection round-off
                eh, ep = eh * budget[i] / tot, ep * budget[i] / tot
            change = max(change, abs(ep - e_sp[i]))
            e_sh[i], e_sp[i], mu[i] = eh, ep, m
        if change <= eps * max(1.0, float(np.max(budget))):
            break
    return e_sh, e_sp, mu


def _relay_root(lam, kappa, nu, coeffs):
    """y >= 0 with lam [ln(1+g_p+y) - y/(1+g_p+y)] = 2 nu - kappa Q2 (inf if none)."""
    c = coeffs
    rhs = 2 * nu - kappa * c.q2
    if lam <= 0 or rhs <= 0:
        return math.inf

    def h(y):
        d = 1 + c.gamma_p + y
        return lam * (math.log(d) - y / d) - rhs

    if h(0.0) >= 0:
        return 0.0
    hi = 1.0
    while h(hi) < 0:
        hi *= 2
        if hi > 1e300:
            return math.inf
    return bisection_root(h, 0.0, hi, tol=1e-14 * hi)


def sp2_time_allocation(e_sh, e_sp, lam, kappa, nu, coeffs):
    """t_i = g_ih E_ih / x(nu) and t_0 = sum g_ip E_ip / y; returns (t_0, t)."""
    c = coeffs
    x = solve_rate_kkt_root(nu) if nu > 0 else math.inf
    t = c.gamma_ih * np.asarray(e_sh) / x if x > 0 else np.full(len(e_sh), math.inf)
    t = np.where(np.asarray(e_sh) > 0, t, 0.0)
    u = float(np.dot(c.gamma_ip, e_sp))
    if u <= 0:
        return 0.0, t
    y = _relay_root(lam, kappa, nu, c)
    t0 = 0.0 if y == math.inf else (math.inf if y == 0 else u / y)
    return t0, t


def _solve_fixed_set_dual(p, tol):
    """Level 1: SP1/SP2 with (lambda, kappa) gradient steps and nu set by the time budget.
    Level 2: projected subgradient on t_e."""
    c = p.c
    n = p.n
    ok, lo, hi = p.te_interval()
    if not ok:
        return SchemeResult.infeasible("STORA", n, limiting=_limiting(p))
    te = min(max(0.4, lo), hi)
    lam, kappa = 1.0, 0.0
    t0 = 0.25 * (1 - te)
    t = np.full(n, 0.5 * (1 - te) / n)
    e_sp = None
    it_total = 0
    converged = False
    alpha_te = tol.initial_step
    prev = None
    for outer in range(1, tol.max_iterations + 1):
        for inner in range(1, 200):
            it_total += 1
            e_sh, e_sp, mu = sp1_energy_allocation(te, t0, t, lam, c, p.relay, e_sp)

            def slack(log_nu):
                t0_, t_ = sp2_time_allocation(e_sh, e_sp, lam, kappa, math.exp(log_nu), c)
                return 1 - te - 2 * t0_ - float(np.sum(t_))

            lo_nu, hi_nu = math.log(1e-12), math.log(1e3)
            if slack(lo_nu) >= 0:
                nu = 1e-12
            elif slack(hi_nu) <= 0:
                nu = 1e3
            else:
                nu = math.exp(bisection_root(slack, lo_nu, hi_nu, tol=1e-12))
            t0_new, t_new = sp2_time_allocation(e_sh, e_sp, lam, kappa, nu, c)
            step = diminishing_step(tol.initial_step, inner)
            a = Allocation(te, t0_new, t_new, e_sh, e_sp)
            g_lam = p.primary_rate(a) - p.rbar
            g_kap = t0_new * c.q2 + te * c.q1 - p.rbar
            lam = max(lam - step * g_lam, 0.0)
            kappa = max(kappa - step * g_kap, 0.0)
            d = max(abs(t0_new - t0), float(np.max(np.abs(t_new - t))) if n else 0.0)
            t0, t = t0_new, t_new
            if d <= tol.epsilon * 1e-2 and abs(min(g_lam, 0)) <= 1e-6 and abs(min(g_kap, 0)) <= 1e-6:
                break
        g_te = (lam + kappa) * c.q1 + float(np.dot(mu, c.budget)) - nu
        te_new = min(max(te + diminishing_step(alpha_te, outer) * g_te / max(nu, 1e-12), lo), hi)
        cur = (te_new, t0, *t)
        if prev is not None and max(abs(u - v) for u, v in zip(cur, prev)) < tol.epsilon:
            te = te_new
            converged = True
            break
        prev = cur
        te = te_new
    alloc = Allocation(te, t0, t, e_sh, e_sp)
    duals = DualState(lam=lam, kappa=kappa, nu=nu, mu=mu)
    return p.result("STORA", alloc, duals, converged, extra={"iterations": it_total})
