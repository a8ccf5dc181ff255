"""Brute-force reference optimizers for small networks (N <= 3).

The oracle knows nothing about greedy fills, decoding prefixes or KKT
conditions.  It grids the raw decision variables, checks the per-SU decoding
condition and the primary cooperative rate directly, and zooms in around the
best points.  The only structure it uses is that leftover time and energy are
never worth keeping (every objective is non-decreasing in t_i and E_ih).

Pattern search stalls on the curved primary-rate boundary, so the best grid
points are finally polished with a general-purpose SQP (scipy SLSQP) in the
same coordinates with the set of relaying SUs held fixed (the incumbent's set
for every start, and all 2^N sets for the best start).  A polished point is
kept only if the grid evaluator accepts it.

Coordinates, all in [0, 1]:
  t_e, v with t_0 = v (1 - t_e) / 2, access shares by stick-breaking, and
  per-SU relay fractions f_i of the budget (log-scaled for PTA).
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .scenario import ScenarioConfig, channels_from_coefficients, derive_coefficients, generate_realization

MAX_SU = 3
PTA_LOG_SPAN = 12.0  # PTA relay fractions span 1e-12 .. 1
FEAS_TOL = 1e-10  # relative slack on the primary and decoding checks


@dataclass(frozen=True)
class GridSpec:
    """resolution: coarse spacing; refine_rounds: zoom passes; dims: names of gridded coordinates
    (filled in by the oracle); local_points: per-axis points of a zoom box; shrink: box shrink per pass;
    keep: incumbents refined in parallel; max_points: cap on the coarse grid size."""

    resolution: float = 1.0 / 12.0
    refine_rounds: int = 30
    dims: tuple = ()
    local_points: int = 5
    shrink: float = 2.0
    keep: int = 6
    max_points: int = 1_500_000

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if self.refine_rounds < 0:
            raise ValueError("refine_rounds must be >= 0")
        if self.local_points < 3 or self.shrink <= 1 or self.keep < 1:
            raise ValueError("bad zoom settings")


class OracleSizeError(ValueError):
    pass


def _stick(x):
    """Map (m, N-1) coordinates in [0,1] to (m, N) shares on the simplex."""
    m, k = x.shape
    out = np.empty((m, k + 1))
    rest = np.ones(m)
    for j in range(k):
        out[:, j] = rest * x[:, j]
        rest = rest - out[:, j]
    out[:, k] = rest
    return out


class _Instance:
    def __init__(self, channels, config):
        if channels.n_su > MAX_SU:
            raise OracleSizeError(f"oracle limited to N <= {MAX_SU}, got {channels.n_su}")
        c = derive_coefficients(channels, config)
        self.n = channels.n_su
        self.gp = c.gamma_p
        self.q1 = c.q1
        self.q2 = np.asarray(c.q2_each)
        self.gip = np.asarray(c.gamma_ip)
        self.gih = np.asarray(c.gamma_ih)
        self.bud = np.asarray(c.budget)
        self.rbar = config.target_primary_rate

    def phases(self, x):
        te = x[:, 0]
        t0 = x[:, 1] * (1 - te) / 2
        return te, t0, 1 - te - 2 * t0

    def relay_energy(self, te, t0, frac):
        """E_ip only for SUs that decode; others keep all energy for access."""
        resid = self.rbar - te * self.q1
        dec = t0[:, None] * self.q2[None, :] >= resid[:, None] - FEAS_TOL * max(self.rbar, 1e-12)
        e_tot = self.bud[None, :] * te[:, None]
        e_ip = np.where(dec, frac * e_tot, 0.0)
        return e_ip, e_tot - e_ip

    def primary_ok(self, te, t0, e_ip):
        u = e_ip @ self.gip
        with np.errstate(divide="ignore", invalid="ignore"):
            relay = np.where(t0 > 0, t0 * np.log1p(self.gp + u / np.where(t0 > 0, t0, 1)), 0.0)
        return te * self.q1 + relay >= self.rbar * (1 - FEAS_TOL)

    def rates(self, t, e_ih):
        with np.errstate(divide="ignore", invalid="ignore"):
            r = t * np.log1p(self.gih[None, :] * e_ih / np.where(t > 0, t, 1))
        return np.where(t > 0, r, 0.0)


def _parts(inst, scheme, x, pattern=None):
    """Rates, primary rate and phases for a batch of coordinates.

    `pattern` (bool per SU) fixes which SUs may relay; by default an SU may
    relay whenever it decodes.
    """
    n = inst.n
    te, t0, ta = inst.phases(x)
    if scheme == "PTA":
        frac = np.where(x[:, 2:] > 0, 10.0 ** (-PTA_LOG_SPAN * (1 - x[:, 2:])), 0.0)
    else:
        frac = x[:, -n:]
    if pattern is None:
        e_ip, e_ih = inst.relay_energy(te, t0, frac)
    else:
        e_tot = inst.bud[None, :] * te[:, None]
        e_ip = np.where(pattern[None, :], frac * e_tot, 0.0)
        e_ih = e_tot - e_ip
    if scheme in ("STORA", "MTM"):
        t = _stick(x[:, 2:2 + n - 1]) * ta[:, None]
    elif scheme == "ETA":
        t = np.repeat(ta[:, None] / n, n, axis=1)
    else:
        u = e_ip * inst.gip[None, :]
        tot = u.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(tot[:, None] > 0, u * (ta / np.where(tot > 0, tot, 1))[:, None], 0.0)
    return inst.rates(t, e_ih), te, t0, ta, e_ip


def _objective(inst, scheme):
    def f(x):
        r, te, t0, ta, e_ip = _parts(inst, scheme, x)
        val = r.min(axis=1) if scheme == "MTM" else r.sum(axis=1)
        ok = inst.primary_ok(te, t0, e_ip) & (ta >= 0)
        return np.where(ok, val, -np.inf)

    return f


def _own_pattern(inst, scheme, x0):
    n = inst.n
    te, t0, _ = inst.phases(x0[None, :])
    frac = x0[None, -n:] if scheme != "PTA" else (x0[None, -n:] > 0).astype(float)
    e_ip, _ = inst.relay_energy(te, t0, frac)
    return e_ip[0] > 0


def _polish(inst, scheme, x0, pattern):
    """Local SQP from x0 with only `pattern` SUs relaying; returns a point or None."""
    n = inst.n
    mtm = scheme == "MTM"
    x0 = x0.copy()
    if scheme == "PTA":
        # log-scaled coordinate 0 means exactly zero; start new relays mid-range
        x0[-n:] = np.where(pattern & (x0[-n:] <= 0), 0.5, x0[-n:])

    def parts(z):
        return _parts(inst, scheme, z[None, : len(x0)], pattern)

    def obj(z):
        r = parts(z)[0][0]
        return -z[-1] if mtm else -float(r.sum())

    def cons(z):
        r, te, t0, ta, e_ip = parts(z)
        te, t0 = te[0], t0[0]
        u = float(e_ip[0] @ inst.gip)
        prim = te * inst.q1 + (t0 * np.log1p(inst.gp + u / t0) if t0 > 1e-300 else 0.0)
        out = [prim - inst.rbar]
        for i in np.flatnonzero(pattern):
            out.append(t0 * inst.q2[i] - (inst.rbar - te * inst.q1))
        if mtm:
            out.extend(r[0] - z[-1])
        return np.array(out)

    z0 = x0.copy()
    bounds = [(0.0, 1.0)] * len(x0)
    if mtm:
        z0 = np.append(z0, 0.0)
        bounds.append((0.0, None))
    try:
        with np.errstate(all="ignore"):
            res = minimize(obj, z0, method="SLSQP", bounds=bounds,
                           constraints=[{"type": "ineq", "fun": cons}],
                           options={"ftol": 1e-15, "maxiter": 500})
    except (ValueError, FloatingPointError):
        return None
    z = np.clip(res.x[: len(x0)], 0.0, 1.0)
    return z if np.all(np.isfinite(z)) else None


def _dims(scheme, n):
    base = ["t_e", "t0_frac"]
    shares = [f"share_{j}" for j in range(n - 1)] if scheme in ("STORA", "MTM") else []
    rel = [f"{'log_' if scheme == 'PTA' else ''}relay_frac_{i}" for i in range(n)]
    return tuple(base + shares + rel)


def zoom_maximize(f, d, grid):
    """Coarse grid, then boxes around the best points.

    A box keeps its size while it still finds better points and shrinks only
    after a pass without progress, so long narrow ridges can be followed.
    Returns (best_x, best_value, history of the incumbent after each pass).
    """
    per_axis = int(round(1.0 / grid.resolution)) + 1
    while per_axis ** d > grid.max_points and per_axis > 3:
        per_axis -= 1
    axis = np.linspace(0.0, 1.0, per_axis)
    x = np.array(list(itertools.product(axis, repeat=d)))
    v = np.concatenate([f(chunk) for chunk in np.array_split(x, max(1, len(x) // 200_000))])
    history = [float(np.max(v))]
    top = _top(x, v, grid.keep)
    width = 1.0 / (per_axis - 1)
    offs = np.array(list(itertools.product(np.linspace(-1, 1, grid.local_points), repeat=d)))
    shrinks = 0
    passes = 0
    while shrinks < grid.refine_rounds and passes < 40 * (grid.refine_rounds + 1):
        passes += 1
        cand = [top[0]]
        for x0, _ in top[1]:
            cand.append(np.clip(x0[None, :] + width * offs, 0.0, 1.0))
        xs = np.vstack(cand)
        vs = f(xs)
        before = top[2][0]
        top = _top(np.vstack([top[0], xs]), np.concatenate([top[2], vs]), grid.keep)
        history.append(float(top[2][0]))
        if not top[2][0] > before * (1 + 1e-12) + 1e-300:
            width /= grid.shrink
            shrinks += 1
    return top[0][0], float(top[2][0]), history, top[0]


def _top(x, v, keep):
    idx = np.argsort(-v, kind="stable")
    chosen = []
    for i in idx:
        if not np.isfinite(v[i]):
            break
        if all(np.max(np.abs(x[i] - x[j])) > 1e-12 for j in chosen):
            chosen.append(i)
        if len(chosen) == keep:
            break
    if not chosen:
        chosen = [int(idx[0])]
    xs = x[chosen]
    return xs, [(x[i], v[i]) for i in chosen], v[chosen]


def _run(scheme, channels, config, grid=None, full=False):
    grid = grid or GridSpec()
    inst = _Instance(channels, config)
    dims = _dims(scheme, inst.n)
    f = _objective(inst, scheme)
    x, val, hist, starts = zoom_maximize(f, len(dims), grid)
    if np.isfinite(val):
        jobs = [(x0, _own_pattern(inst, scheme, x0)) for x0 in starts]
        jobs += [(starts[0], np.array(m, bool)) for m in itertools.product((False, True), repeat=inst.n)]
        for x0, pattern in jobs:
            z = _polish(inst, scheme, x0, pattern)
            if z is not None:
                vz = float(f(z[None, :])[0])
                if vz > val:
                    x, val = z, vz
        hist.append(val)
    val = val if np.isfinite(val) else 0.0
    if full:
        return val, dict(zip(dims, x)), hist
    return val


def oracle_stora(channels, config, grid=None, full=False):
    return _run("STORA", channels, config, grid, full)


def oracle_eta(channels, config, grid=None, full=False):
    return _run("ETA", channels, config, grid, full)


def oracle_mtm(channels, config, grid=None, full=False):
    """Max-min objective: returns the best minimum SU rate."""
    return _run("MTM", channels, config, grid, full)


def oracle_pta(channels, config, grid=None, full=False):
    return _run("PTA", channels, config, grid, full)


ORACLES = {"STORA": oracle_stora, "ETA": oracle_eta, "MTM": oracle_mtm, "PTA": oracle_pta}


def regression_suite(seed=2024):
    """20 seeded N=2 instances: 10 from the reference geometry, 10 coefficient-level
    instances where relaying carries real weight."""
    rng = np.random.default_rng(seed)
    out = []
    for j in range(10):
        rbar = 1.5 if j % 2 == 0 else 3.0
        cfg = ScenarioConfig(n_su=2, target_primary_rate=rbar)
        out.append((f"geom-{j}", cfg, generate_realization(cfg, j, seed)))
    for j in range(10):
        cfg, ch = channels_from_coefficients(
            gamma_p=rng.uniform(0.2, 2.0), gamma_ip=rng.uniform(0.5, 5.0, 2),
            gamma_ih=rng.uniform(0.5, 5.0, 2), theta=rng.uniform(0.005, 0.02, 2),
            p_hap=0.1, target_primary_rate=rng.uniform(0.2, 0.7), q2=rng.uniform(0.5, 3.0, 2))
        out.append((f"coef-{j}", cfg, ch))
    return out


def relative_gap(solver_value, oracle_value):
    return abs(solver_value - oracle_value) / max(abs(oracle_value), 1e-9)
