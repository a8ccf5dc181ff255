"""Log-barrier Newton method for the fixed-decoding-set convex program.

Variables x = [t_e, t_0, t_1..t_N, E_1h..E_Nh, E_jp (relay SUs only), (R)].
mode 0 maximizes sum_i t_i ln(1 + g_ih E_ih / t_i)  (sum throughput);
mode 1 maximizes R subject to t_i ln(1 + g_ih E_ih / t_i) >= R (max-min).
"""

import math

import numpy as np
from numba import njit

OK = 0
NOT_CONVERGED = 1
NO_INTERIOR = 2


@njit(cache=True)
def _persp(t, e, gam):
    x = gam * e / t
    d = 1.0 + x
    p = t * math.log1p(x)
    pt = math.log1p(x) - x / d
    pe = gam / d
    k = 1.0 / (t * d * d)
    return p, pt, pe, -x * x * k, gam * x * k, -gam * gam * k


@njit(cache=True)
def _n_constraints(n, nr, mode):
    nv = 2 + 2 * n + nr + (1 if mode == 1 else 0)
    m = nv + n + 2 + 1  # bounds, energy, primary+decode, time
    if mode == 1:
        m += n
    return nv, m


@njit(cache=True)
def _eval(x, mode, s, gp, q1, q2, rbar, gip, gih, bud, rel, pmap, need_grad, grad, hess):
    """Barrier value s f(x) + sum log g(x); -inf outside the interior."""
    n = gih.shape[0]
    nr = rel.shape[0]
    nv = x.shape[0]
    iT = 2
    iE = 2 + n
    iP = 2 + 2 * n
    iR = iP + nr
    if need_grad:
        for a in range(nv):
            grad[a] = 0.0
            for b in range(nv):
                hess[a, b] = 0.0
    val = 0.0
    # positivity
    for a in range(nv):
        if x[a] <= 0.0:
            return -np.inf
        val += math.log(x[a])
        if need_grad:
            grad[a] += 1.0 / x[a]
            hess[a, a] -= 1.0 / (x[a] * x[a])
    te = x[0]
    t0 = x[1]
    # objective / rate constraints
    for i in range(n):
        ti = x[iT + i]
        ei = x[iE + i]
        p, pt, pe, htt, hte, hee = _persp(ti, ei, gih[i])
        if mode == 0:
            val += s * p
            if need_grad:
                grad[iT + i] += s * pt
                grad[iE + i] += s * pe
                hess[iT + i, iT + i] += s * htt
                hess[iT + i, iE + i] += s * hte
                hess[iE + i, iT + i] += s * hte
                hess[iE + i, iE + i] += s * hee
        else:
            g = p - x[iR]
            if g <= 0.0:
                return -np.inf
            val += math.log(g)
            if need_grad:
                ig = 1.0 / g
                ig2 = ig * ig
                grad[iT + i] += pt * ig
                grad[iE + i] += pe * ig
                grad[iR] -= ig
                hess[iT + i, iT + i] += htt * ig - pt * pt * ig2
                hess[iE + i, iE + i] += hee * ig - pe * pe * ig2
                hess[iR, iR] -= ig2
                v = hte * ig - pt * pe * ig2
                hess[iT + i, iE + i] += v
                hess[iE + i, iT + i] += v
                v = pt * ig2
                hess[iT + i, iR] += v
                hess[iR, iT + i] += v
                v = pe * ig2
                hess[iE + i, iR] += v
                hess[iR, iE + i] += v
    if mode == 1:
        val += s * x[iR]
        if need_grad:
            grad[iR] += s
    # energy neutrality
    for i in range(n):
        g = bud[i] * te - x[iE + i]
        j = pmap[i]
        if j >= 0:
            g -= x[iP + j]
        if g <= 0.0:
            return -np.inf
        val += math.log(g)
        if need_grad:
            ig = 1.0 / g
            ig2 = ig * ig
            idx0 = 0
            # gradient of g: d/dte = bud, d/de = -1, d/dp = -1
            grad[0] += bud[i] * ig
            grad[iE + i] -= ig
            hess[0, 0] -= bud[i] * bud[i] * ig2
            hess[0, iE + i] += bud[i] * ig2
            hess[iE + i, 0] += bud[i] * ig2
            hess[iE + i, iE + i] -= ig2
            if j >= 0:
                k = iP + j
                grad[k] -= ig
                hess[0, k] += bud[i] * ig2
                hess[k, 0] += bud[i] * ig2
                hess[k, k] -= ig2
                hess[k, iE + i] -= ig2
                hess[iE + i, k] -= ig2
    # time
    g = 1.0 - te - 2.0 * t0
    for i in range(n):
        g -= x[iT + i]
    if g <= 0.0:
        return -np.inf
    val += math.log(g)
    if need_grad:
        ig2 = 1.0 / (g * g)
        ig = 1.0 / g
        grad[0] -= ig
        grad[1] -= 2.0 * ig
        for i in range(n):
            grad[iT + i] -= ig
        # rank-one: c c^T with c = (-1, -2, -1...)
        for a in range(nv):
            ca = 0.0
            if a == 0:
                ca = -1.0
            elif a == 1:
                ca = -2.0
            elif a < iE:
                ca = -1.0
            if ca == 0.0:
                continue
            for b in range(nv):
                cb = 0.0
                if b == 0:
                    cb = -1.0
                elif b == 1:
                    cb = -2.0
                elif b < iE:
                    cb = -1.0
                if cb != 0.0:
                    hess[a, b] -= ca * cb * ig2
    # decoding (linear)
    g = q1 * te + q2 * t0 - rbar
    if g <= 0.0:
        return -np.inf
    val += math.log(g)
    if need_grad:
        ig = 1.0 / g
        ig2 = ig * ig
        grad[0] += q1 * ig
        grad[1] += q2 * ig
        hess[0, 0] -= q1 * q1 * ig2
        hess[0, 1] -= q1 * q2 * ig2
        hess[1, 0] -= q1 * q2 * ig2
        hess[1, 1] -= q2 * q2 * ig2
    # primary rate
    u = 0.0
    for j in range(nr):
        u += gip[rel[j]] * x[iP + j]
    y = u / t0
    den = 1.0 + gp + y
    q = t0 * math.log(den)
    g = q1 * te + q - rbar
    if g <= 0.0:
        return -np.inf
    val += math.log(g)
    if need_grad:
        ig = 1.0 / g
        ig2 = ig * ig
        qt = math.log(den) - y / den
        qu = 1.0 / den
        kk = 1.0 / (t0 * den * den)
        qtt = -y * y * kk
        qtu = y * kk
        quu = -kk
        # gradient components of g
        gvec = np.zeros(nv)
        gvec[0] = q1
        gvec[1] = qt
        for j in range(nr):
            gvec[iP + j] = qu * gip[rel[j]]
        for a in range(nv):
            grad[a] += gvec[a] * ig
        # second derivatives of g (t0 and relay block)
        hess[1, 1] += qtt * ig
        for j in range(nr):
            a = iP + j
            hess[1, a] += qtu * gip[rel[j]] * ig
            hess[a, 1] += qtu * gip[rel[j]] * ig
            for l in range(nr):
                hess[a, iP + l] += quu * gip[rel[j]] * gip[rel[l]] * ig
        nz = np.empty(nr + 2, np.int64)
        nz[0] = 0
        nz[1] = 1
        for j in range(nr):
            nz[2 + j] = iP + j
        for a in nz:
            for b in nz:
                hess[a, b] -= gvec[a] * gvec[b] * ig2
    return val


@njit(cache=True)
def _objective(x, mode, gih):
    n = gih.shape[0]
    if mode == 1:
        return x[x.shape[0] - 1]
    f = 0.0
    for i in range(n):
        t = x[2 + i]
        if t > 0.0:
            f += t * math.log1p(gih[i] * x[2 + n + i] / t)
    return f


@njit(cache=True)
def _margin(te, t0, gp, q1, q2, rbar, u):
    prim = q1 * te
    if t0 > 0.0:
        prim += t0 * math.log1p(gp + u / t0)
    dec = q1 * te + q2 * t0
    return min(prim, dec) - rbar


@njit(cache=True)
def _start(tstar, mode, gp, q1, q2, rbar, gip, gih, bud, rel, pmap, crate):
    n = gih.shape[0]
    nr = rel.shape[0]
    nv = 2 + 2 * n + nr + (1 if mode == 1 else 0)
    x = np.zeros(nv)
    te = tstar
    t0 = 0.5 * (1.0 - te)
    if t0 <= 1e-9:
        te = tstar
        t0 = 0.0
    full = _margin(te, t0, gp, q1, q2, rbar, crate * te)
    if not full > 0.0:
        return x, False
    sig = 0.5 * (1.0 + rbar / (full + rbar))
    te *= sig
    t0 *= sig
    if t0 <= 0.0:
        t0 = 0.25 * (1.0 - te)
    if _margin(te, t0, gp, q1, q2, rbar, crate * te) <= 0.0:
        return x, False
    slack = 1.0 - te - 2.0 * t0
    base = _margin(te, t0, gp, q1, q2, rbar, crate * te)
    eps = 0.5
    for _ in range(60):
        if _margin(te, t0, gp, q1, q2, rbar, (1.0 - eps) * crate * te) > 0.5 * base:
            break
        eps *= 0.5
    x[0] = te
    x[1] = t0
    for i in range(n):
        x[2 + i] = slack / (n + 1.0)
        j = pmap[i]
        if j >= 0:
            x[2 + 2 * n + j] = (1.0 - eps) * bud[i] * te
            x[2 + n + i] = 0.5 * eps * bud[i] * te
        else:
            x[2 + n + i] = 0.5 * bud[i] * te
    if mode == 1:
        rmin = np.inf
        for i in range(n):
            t = x[2 + i]
            r = t * math.log1p(gih[i] * x[2 + n + i] / t)
            if r < rmin:
                rmin = r
        x[nv - 1] = 0.5 * rmin
        if not x[nv - 1] > 0.0:
            return x, False
    return x, True


@njit(cache=True)
def barrier_solve(mode, tstar, gp, q1, q2, rbar, gip, gih, bud, rel, pmap, crate,
                  gap_tol, max_newton):
    """Returns (status, x, s_final, newton_steps)."""
    x, ok = _start(tstar, mode, gp, q1, q2, rbar, gip, gih, bud, rel, pmap, crate)
    if not ok:
        return NO_INTERIOR, x, 0.0, 0
    nv = x.shape[0]
    n = gih.shape[0]
    nv_, m = _n_constraints(n, rel.shape[0], mode)
    grad = np.zeros(nv)
    hess = np.zeros((nv, nv))
    f0 = _objective(x, mode, gih)
    s = m / max(abs(f0), 1e-12)
    steps = 0
    mu = 30.0
    while True:
        for it in range(80):
            val = _eval(x, mode, s, gp, q1, q2, rbar, gip, gih, bud, rel, pmap, True, grad, hess)
            # Jacobi-scaled Newton system (-H) d = g
            dsc = np.empty(nv)
            for a in range(nv):
                dsc[a] = 1.0 / math.sqrt(max(-hess[a, a], 1e-300))
            A = np.empty((nv, nv))
            rhs = np.empty(nv)
            for a in range(nv):
                rhs[a] = grad[a] * dsc[a]
                for b in range(nv):
                    A[a, b] = -hess[a, b] * dsc[a] * dsc[b]
            try:
                z = np.linalg.solve(A, rhs)
            except Exception:
                return NOT_CONVERGED, x, s, steps
            d = z * dsc
            dec2 = 0.0
            for a in range(nv):
                dec2 += grad[a] * d[a]
            steps += 1
            if steps > max_newton:
                return NOT_CONVERGED, x, s, steps
            if dec2 < 1e-10:
                break
            t = 1.0
            xn = np.empty(nv)
            accepted = False
            for ls in range(80):
                for a in range(nv):
                    xn[a] = x[a] + t * d[a]
                vn = _eval(xn, mode, s, gp, q1, q2, rbar, gip, gih, bud, rel, pmap, False, grad, hess)
                if vn > -np.inf and vn >= val + 0.25 * t * dec2:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                # stalled at floating-point resolution of this barrier level
                break
            for a in range(nv):
                x[a] = xn[a]
        f = _objective(x, mode, gih)
        if m / s <= gap_tol * max(abs(f), 1e-12):
            return OK, x, s, steps
        s *= mu
