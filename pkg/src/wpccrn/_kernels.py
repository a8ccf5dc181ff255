"""Compiled inner loops for the fixed-decoding-set problems.

Every scheme is reduced to a concave (or, for PTA, scanned) search over the
harvest time t_e and the relay phase t_0.  For a fixed (t_e, t_0):

  a = Rbar - Q1 t_e          residual primary data after phase one
  S = t_0 (e^{a/t_0} - 1 - gamma_p)^+   relay SNR-energy sum_i gamma_ip E_ip needed
  t_a = 1 - t_e - 2 t_0      access window

and the remaining allocation of (E_ip, E_ih, t_i) has a direct solution:
greedy fill by gamma_ih/gamma_ip for STORA, water-filling for ETA,
share water-filling for PTA.
"""

import math

import numpy as np
from numba import njit

STORA = 0
ETA = 1
PTA = 2

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0
PTA_FLOOR = 1e-9  # keep-alive relay share when no relaying is needed


@njit(cache=True)
def relay_need(a, t0, gp):
    if a <= 0.0:
        return 0.0
    if t0 <= 0.0:
        return np.inf
    y = a / t0
    if y > 700.0:
        return np.inf
    s = t0 * (math.expm1(y) - gp)
    return s if s > 0.0 else 0.0


@njit(cache=True)
def t0_for_need(a, cap, gp, q1):
    """Smallest t_0 with relay_need(a, t_0) <= cap (relay_need is decreasing)."""
    hi = a / q1  # need is zero from here on
    if cap <= 0.0:
        return hi
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if relay_need(a, mid, gp) <= cap:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-16 * hi:
            break
    return hi


@njit(cache=True)
def relay_capacity_rate(gip, bud, relay):
    c = 0.0
    for i in range(gip.shape[0]):
        if relay[i]:
            c += gip[i] * bud[i]
    return c


@njit(cache=True)
def feas_margin(te, gp, q1, q2, rbar, crate):
    """Best primary-rate slack at t_e with t_0 = (1-t_e)/2 and all energy relayed."""
    t0 = 0.5 * (1.0 - te)
    base = q1 * te
    if t0 <= 0.0:
        return base - rbar
    prim = base + t0 * math.log1p(gp + crate * te / t0)
    dec = base + q2 * t0
    return min(prim, dec) - rbar


@njit(cache=True)
def te_interval(gp, q1, q2, rbar, crate):
    """Feasible t_e interval (concave margin); ok=False if none."""
    a, b = 0.0, 1.0
    h = b - a
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    fc = feas_margin(c, gp, q1, q2, rbar, crate)
    fd = feas_margin(d, gp, q1, q2, rbar, crate)
    while h > 1e-13:
        if fc >= fd:
            b, d, fd = d, c, fc
            h *= INV_PHI
            c = a + INV_PHI2 * h
            fc = feas_margin(c, gp, q1, q2, rbar, crate)
        else:
            a, c, fc = c, d, fd
            h *= INV_PHI
            d = a + INV_PHI * h
            fd = feas_margin(d, gp, q1, q2, rbar, crate)
    tstar, fstar = (c, fc) if fc >= fd else (d, fd)
    f1 = feas_margin(1.0, gp, q1, q2, rbar, crate)
    if f1 >= fstar:
        tstar, fstar = 1.0, f1
    if fstar < 0.0:
        return False, tstar, tstar
    if feas_margin(0.0, gp, q1, q2, rbar, crate) >= 0.0:
        lo = 0.0
    else:
        x0, x1 = 0.0, tstar
        for _ in range(200):
            m = 0.5 * (x0 + x1)
            if feas_margin(m, gp, q1, q2, rbar, crate) >= 0.0:
                x1 = m
            else:
                x0 = m
            if x1 - x0 <= 1e-15:
                break
        lo = x1
    if f1 >= 0.0:
        hi = 1.0
    else:
        x0, x1 = tstar, 1.0
        for _ in range(200):
            m = 0.5 * (x0 + x1)
            if feas_margin(m, gp, q1, q2, rbar, crate) >= 0.0:
                x0 = m
            else:
                x1 = m
            if x1 - x0 <= 1e-15:
                break
        hi = x0
    return True, lo, hi


@njit(cache=True)
def t0_interval(te, gp, q1, q2, rbar, crate):
    """Admissible relay-phase interval at t_e (beyond a/Q1 only wastes time)."""
    a = rbar - q1 * te
    top = 0.5 * (1.0 - te)
    if a <= 0.0:
        return True, 0.0, 0.0
    lo = a / q2
    cap = crate * te
    if relay_need(a, lo, gp) > cap:
        lo = t0_for_need(a, cap, gp, q1)
    if lo > top * (1.0 + 1e-12):
        return False, lo, lo
    if lo > top:
        lo = top
    hi = a / q1
    if hi > top:
        hi = top
    if hi < lo:
        hi = lo
    return True, lo, hi


# ---------------------------------------------------------------- STORA

@njit(cache=True)
def greedy_loss(need, te, order, nrel, gip, gih, bud):
    """Access-SNR energy given up to deliver `need` relay SNR-energy (greedy)."""
    rem = need
    loss = 0.0
    for k in range(nrel):
        if rem <= 0.0:
            break
        i = order[k]
        capu = gip[i] * bud[i] * te
        u = capu if capu < rem else rem
        loss += u * gih[i] / gip[i]
        rem -= u
    if rem > 1e-12 * need:
        return -1.0
    return loss


@njit(cache=True)
def stora_value(te, t0, gp, q1, rbar, gip, gih, bud, order, nrel):
    ta = 1.0 - te - 2.0 * t0
    if ta <= 0.0:
        return 0.0
    need = relay_need(rbar - q1 * te, t0, gp)
    loss = 0.0
    if need > 0.0:
        loss = greedy_loss(need, te, order, nrel, gip, gih, bud)
        if loss < 0.0:
            return -1.0
    w = 0.0
    for i in range(gih.shape[0]):
        w += gih[i] * bud[i]
    w = w * te - loss
    if w <= 0.0:
        return 0.0
    return ta * math.log1p(w / ta)


# ---------------------------------------------------------------- ETA

@njit(cache=True)
def eta_relay_split(need, te, teq, gip, gih, bud, relay, e_sp):
    """Water-filling: E_ih = clip(t_eq (1/(tau g_ip) - 1/g_ih), 0, B t_e).

    Fills e_sp in place and returns tau (0 when nothing is relayed).
    """
    n = gip.shape[0]
    for i in range(n):
        e_sp[i] = 0.0
    if need <= 0.0:
        return 0.0
    # breakpoints in tau; u(tau) is non-decreasing
    bps = np.empty(2 * n)
    m = 0
    for i in range(n):
        if relay[i] and gip[i] > 0.0:
            w = gih[i] / gip[i]
            bps[m] = w / (1.0 + gih[i] * bud[i] * te / teq)
            bps[m + 1] = w
            m += 2
    if m == 0:
        return -1.0
    b = np.sort(bps[:m])
    # locate segment: u at each breakpoint
    prev = 0.0
    seg_lo = 0.0
    seg_hi = b[m - 1]
    found = False
    for k in range(m):
        tau = b[k]
        u = 0.0
        for i in range(n):
            if relay[i] and gip[i] > 0.0:
                eh = teq * (1.0 / (tau * gip[i]) - 1.0 / gih[i])
                cap = bud[i] * te
                if eh < 0.0:
                    eh = 0.0
                if eh > cap:
                    eh = cap
                u += gip[i] * (cap - eh)
        if u >= need:
            seg_hi = tau
            seg_lo = prev
            found = True
            break
        prev = tau
    if not found:
        return -1.0
    # inside (seg_lo, seg_hi): u = K - nmid * teq / tau
    mid_tau = 0.5 * (seg_lo + seg_hi) if seg_lo > 0.0 else 0.5 * seg_hi
    kconst = 0.0
    nmid = 0
    for i in range(n):
        if relay[i] and gip[i] > 0.0:
            w = gih[i] / gip[i]
            lo_i = w / (1.0 + gih[i] * bud[i] * te / teq)
            cap = bud[i] * te
            if mid_tau >= w:
                kconst += gip[i] * cap
            elif mid_tau > lo_i:
                kconst += gip[i] * cap + teq / w
                nmid += 1
    if nmid == 0 or kconst - need <= 0.0:
        tau = seg_hi
    else:
        tau = nmid * teq / (kconst - need)
        if tau > seg_hi:
            tau = seg_hi
        if tau < seg_lo:
            tau = seg_lo
    for i in range(n):
        if relay[i] and gip[i] > 0.0:
            eh = teq * (1.0 / (tau * gip[i]) - 1.0 / gih[i])
            cap = bud[i] * te
            if eh < 0.0:
                eh = 0.0
            if eh > cap:
                eh = cap
            e_sp[i] = cap - eh
    return tau


@njit(cache=True)
def eta_value(te, t0, gp, q1, rbar, gip, gih, bud, relay, work):
    n = gih.shape[0]
    ta = 1.0 - te - 2.0 * t0
    if ta <= 0.0:
        return 0.0
    teq = ta / n
    need = relay_need(rbar - q1 * te, t0, gp)
    tau = eta_relay_split(need, te, teq, gip, gih, bud, relay, work)
    if tau < 0.0:
        return -1.0
    val = 0.0
    for i in range(n):
        eh = bud[i] * te - work[i]
        if eh > 0.0:
            val += teq * math.log1p(gih[i] * eh / teq)
    return val


# ---------------------------------------------------------------- PTA

@njit(cache=True)
def pta_z(tau, ta, c):
    """z >= 0 solving ta (ln(1+z) - z/(1+z)) - c/(1+z) = tau (v = ln(1+z))."""
    if tau <= -c:
        return 0.0
    v = 1.0 + (tau + c) / ta
    if v < 1e-8:
        v = 1e-8
    lo, hi = 0.0, 2.0 + (tau + c) / ta
    for _ in range(100):
        ev = math.exp(-v)
        h = ta * (v - 1.0 + ev) - c * ev - tau
        if h > 0.0:
            hi = v
        else:
            lo = v
        dh = ta * (1.0 - ev) + c * ev
        step = h / dh
        vn = v - step
        if abs(step) <= 1e-15 * (1.0 + v):
            v = vn
            break
        if vn <= lo or vn >= hi:
            vn = 0.5 * (lo + hi)
        if abs(vn - v) <= 1e-15 * (1.0 + v):
            v = vn
            break
        v = vn
    return math.expm1(v)


@njit(cache=True)
def pta_shares(ta, need, te, gip, gih, bud, relay, pi):
    """Access shares pi_i (sum 1) over relaying SUs; returns value or -1."""
    n = gip.shape[0]
    nd = 0
    acc = 0.0
    capsum = 0.0
    cmax = 0.0
    for i in range(n):
        pi[i] = 0.0
        if relay[i] and gip[i] > 0.0:
            nd += 1
            acc += gih[i] * bud[i] * te
            capsum += gip[i] * bud[i] * te
            c = gih[i] / gip[i] * need
            if c > cmax:
                cmax = c
    if nd == 0 or capsum < need * (1.0 - 1e-12) or acc <= 0.0:
        return -1.0
    # sum of pi(tau) is decreasing in tau; bracket then safeguarded Newton
    zbig = acc / ta
    tau_hi = -np.inf
    for i in range(n):
        if relay[i] and gip[i] > 0.0:
            c = gih[i] / gip[i] * need
            t = ta * (math.log1p(zbig) - zbig / (1.0 + zbig)) - c / (1.0 + zbig)
            if t > tau_hi:
                tau_hi = t
    tau_lo = -cmax
    tau = 0.5 * (tau_lo + tau_hi)
    for it in range(200):
        ssum = 0.0
        dsum = 0.0
        for i in range(n):
            if relay[i] and gip[i] > 0.0:
                a_i = gih[i] * bud[i] * te
                c = gih[i] / gip[i] * need
                z = pta_z(tau, ta, c)
                den = ta * z + c
                p = a_i / den if den > 0.0 else 1.0
                ssum += p
                if tau > -c:
                    dh = (ta * z + c) / ((1.0 + z) * (1.0 + z))
                    dsum -= a_i * ta / (den * den) / dh
        g = ssum - 1.0
        if g > 0.0:
            tau_lo = tau
        else:
            tau_hi = tau
        if abs(g) <= 1e-14:
            break
        tn = tau - g / dsum if dsum < 0.0 else 0.5 * (tau_lo + tau_hi)
        if dsum < 0.0 and abs(g / dsum) <= 1e-15 * (abs(tau) + ta):
            break
        if not (tn > tau_lo and tn < tau_hi):
            tn = 0.5 * (tau_lo + tau_hi)
        if abs(tn - tau) <= 1e-16 * (abs(tau) + 1e-300) or tau_hi - tau_lo <= 1e-16 * abs(tau):
            tau = tn
            break
        tau = tn
    ssum = 0.0
    for i in range(n):
        if relay[i] and gip[i] > 0.0:
            a_i = gih[i] * bud[i] * te
            c = gih[i] / gip[i] * need
            z = pta_z(tau, ta, c)
            den = ta * z + c
            p = a_i / den if den > 0.0 else 1.0
            pi[i] = p
            ssum += p
    val = 0.0
    for i in range(n):
        if pi[i] > 0.0:
            p = pi[i] / ssum
            # respect the relay cap after normalisation
            pcap = gip[i] * bud[i] * te / need if need > 0.0 else np.inf
            if p > pcap:
                p = pcap
            pi[i] = p
            ti = ta * p
            eh_snr = gih[i] * bud[i] * te - gih[i] / gip[i] * need * p
            if eh_snr > 0.0:
                val += ti * math.log1p(eh_snr / ti)
    return val


@njit(cache=True)
def pta_floor_shares(ta, need, te, gip, gih, bud, relay, pi):
    """Keep-alive regime: the relay cost is negligible, so pi_i ~ g_ih B_i t_e."""
    n = gip.shape[0]
    acc = 0.0
    for i in range(n):
        pi[i] = 0.0
        if relay[i] and gip[i] > 0.0:
            pi[i] = gih[i] * bud[i] * te
            acc += pi[i]
    if acc <= 0.0:
        return -1.0
    val = 0.0
    for i in range(n):
        if pi[i] > 0.0:
            pi[i] /= acc
            ti = ta * pi[i]
            eh_snr = gih[i] * bud[i] * te - gih[i] / gip[i] * need * pi[i]
            if eh_snr > 0.0:
                val += ti * math.log1p(eh_snr / ti)
    return val


@njit(cache=True)
def pta_need(te, t0, gp, q1, rbar, crate):
    need = relay_need(rbar - q1 * te, t0, gp)
    floor = PTA_FLOOR * crate * te
    if need < floor:
        need = floor
    return need


@njit(cache=True)
def pta_value(te, t0, gp, q1, rbar, gip, gih, bud, relay, crate, work):
    ta = 1.0 - te - 2.0 * t0
    if ta <= 0.0:
        return 0.0
    need = pta_need(te, t0, gp, q1, rbar, crate)
    if not need < np.inf:
        return -1.0
    if need <= PTA_FLOOR * crate * te:
        return pta_floor_shares(ta, need, te, gip, gih, bud, relay, work)
    return pta_shares(ta, need, te, gip, gih, bud, relay, work)


# ---------------------------------------------------------------- search

@njit(cache=True)
def scheme_value(scheme, te, t0, gp, q1, rbar, gip, gih, bud, relay, order, nrel, crate, work):
    if scheme == STORA:
        return stora_value(te, t0, gp, q1, rbar, gip, gih, bud, order, nrel)
    if scheme == ETA:
        return eta_value(te, t0, gp, q1, rbar, gip, gih, bud, relay, work)
    return pta_value(te, t0, gp, q1, rbar, gip, gih, bud, relay, crate, work)


@njit(cache=True)
def best_t0(scheme, te, gp, q1, q2, rbar, gip, gih, bud, relay, order, nrel, crate, work,
            tol, nscan):
    ok, lo, hi = t0_interval(te, gp, q1, q2, rbar, crate)
    if not ok:
        return -1.0, lo
    if hi - lo <= tol:
        v = scheme_value(scheme, te, lo, gp, q1, rbar, gip, gih, bud, relay, order, nrel, crate, work)
        return v, lo
    a, b = lo, hi
    if nscan > 0:
        # coarse scan guards against non-concave profiles
        bx = lo
        bv = -np.inf
        step = (hi - lo) / nscan
        for k in range(nscan + 1):
            x = lo + k * step
            v = scheme_value(scheme, te, x, gp, q1, rbar, gip, gih, bud, relay, order, nrel, crate, work)
            if v > bv:
                bv = v
                bx = x
        a = max(lo, bx - step)
        b = min(hi, bx + step)
    h = b - a
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    fc = scheme_value(scheme, te, c, gp, q1, rbar, gip, gih, bud, relay, order, nrel, crate, work)
    fd = scheme_value(scheme, te, d, gp, q1, rbar, gip, gih, bud, relay, order, nrel, crate, work)
    while h > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            h *= INV_PHI
            c = a + INV_PHI2 * h
            fc = scheme_value(scheme, te, c, gp, q1, rbar, gip, gih, bud, relay, order, nrel, crate, work)
        else:
            a, c, fc = c, d, fd
            h *= INV_PHI
            d = a + INV_PHI * h
            fd = scheme_value(scheme, te, d, gp, q1, rbar, gip, gih, bud, relay, order, nrel, crate, work)
    bx, bv = (c, fc) if fc >= fd else (d, fd)
    for x in (lo, hi):
        v = scheme_value(scheme, te, x, gp, q1, rbar, gip, gih, bud, relay, order, nrel, crate, work)
        if v >= bv:
            bx, bv = x, v
    return bv, bx


@njit(cache=True)
def search(scheme, gp, q1, q2, rbar, gip, gih, bud, relay, order, nrel, tol_te, tol_t0, nscan):
    """Maximize over (t_e, t_0); returns (value, t_e, t_0) or value -1 if infeasible."""
    crate = relay_capacity_rate(gip, bud, relay)
    ok, lo, hi = te_interval(gp, q1, q2, rbar, crate)
    work = np.zeros(gih.shape[0])
    if not ok:
        return -1.0, lo, 0.0
    a, b = lo, hi
    if nscan > 0 and hi > lo:
        bx = lo
        bv = -np.inf
        step = (hi - lo) / nscan
        for k in range(nscan + 1):
            x = lo + k * step
            v, _ = best_t0(scheme, x, gp, q1, q2, rbar, gip, gih, bud, relay, order, nrel, crate,
                           work, tol_t0, nscan)
            if v > bv:
                bv = v
                bx = x
        a = max(lo, bx - step)
        b = min(hi, bx + step)
    h = b - a
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    fc, _ = best_t0(scheme, c, gp, q1, q2, rbar, gip, gih, bud, relay, order, nrel, crate, work, tol_t0, nscan)
    fd, _ = best_t0(scheme, d, gp, q1, q2, rbar, gip, gih, bud, relay, order, nrel, crate, work, tol_t0, nscan)
    while h > tol_te:
        if fc >= fd:
            b, d, fd = d, c, fc
            h *= INV_PHI
            c = a + INV_PHI2 * h
            fc, _ = best_t0(scheme, c, gp, q1, q2, rbar, gip, gih, bud, relay, order, nrel, crate, work, tol_t0, nscan)
        else:
            a, c, fc = c, d, fd
            h *= INV_PHI
            d = a + INV_PHI * h
            fd, _ = best_t0(scheme, d, gp, q1, q2, rbar, gip, gih, bud, relay, order, nrel, crate, work, tol_t0, nscan)
    bx, bv = (c, fc) if fc >= fd else (d, fd)
    for x in (lo, hi):
        v, _ = best_t0(scheme, x, gp, q1, q2, rbar, gip, gih, bud, relay, order, nrel, crate, work, tol_t0, nscan)
        if v >= bv:
            bx, bv = x, v
    v, t0 = best_t0(scheme, bx, gp, q1, q2, rbar, gip, gih, bud, relay, order, nrel, crate, work, tol_t0, nscan)
    return v, bx, t0
