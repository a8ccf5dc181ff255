"""Relay-selection baselines: best single SU (BSS), random single SU (RSS-S)
and random SUs added one at a time (RSS-M).

All three share the sum-throughput inner solver; only the set of SUs allowed
to relay changes.  Candidates are drawn from the largest decoding set that
can support the primary target.  For a candidate relay set C the decoding
cutoff is free: every prefix of the h_pi order is tried with relays C
restricted to that prefix, and the best feasible one is kept.
"""

import numpy as np

from . import _kernels as K
from .stora import FixedSetProblem, SchemeResult, stora_allocation, stora_cutoff_values


def candidate_pool(channels, config, values=None):
    """Members of the largest feasible decoding prefix ([] if none)."""
    values = values if values is not None else stora_cutoff_values(channels, config)
    feas = [k for k in range(1, channels.n_su + 1) if values[k - 1][0] >= 0]
    if not feas:
        return []
    rank = np.argsort(-np.asarray(channels.h_ps), kind="stable")
    return sorted(int(i) for i in rank[: max(feas)])


def _prefixes(channels, relays):
    rank = list(np.argsort(-np.asarray(channels.h_ps), kind="stable"))
    for k in range(1, channels.n_su + 1):
        sub = [i for i in relays if i in rank[:k]]
        if sub:
            yield k, sub


def relay_set_feasible(channels, config, relays):
    return any(FixedSetProblem(channels, config, k, sub).feasible
               for k, sub in _prefixes(channels, relays))


def solve_relay_set(channels, config, relays, scheme="STORA"):
    """Sum-throughput optimum with only `relays` allowed to forward."""
    best = None
    for k, sub in _prefixes(channels, relays):
        p = FixedSetProblem(channels, config, k, sub)
        val, te, t0 = p.search(K.STORA)
        if val < 0:
            continue
        if best is None or val > best[0]:
            best = (val, p, te, t0)
    if best is None:
        return SchemeResult.infeasible(scheme, channels.n_su)
    _, p, te, t0 = best
    return p.result(scheme, stora_allocation(p, te, t0), extra={"relays": tuple(sorted(relays))})


def solve_bss(channels, config, tolerances=None, values=None):
    best = None
    for i in candidate_pool(channels, config, values):
        r = solve_relay_set(channels, config, [i], "BSS")
        if r.feasible and (best is None or r.sum_throughput > best.sum_throughput):
            best = r
    return best if best is not None else SchemeResult.infeasible("BSS", channels.n_su)


def solve_rss_single(channels, config, rng, tolerances=None, values=None):
    pool = candidate_pool(channels, config, values)
    if not pool:
        return SchemeResult.infeasible("RSS-S", channels.n_su)
    i = pool[int(rng.integers(len(pool)))]
    return solve_relay_set(channels, config, [i], "RSS-S")


def solve_rss_multi(channels, config, rng, tolerances=None, values=None):
    pool = candidate_pool(channels, config, values)
    if not pool:
        return SchemeResult.infeasible("RSS-M", channels.n_su)
    chosen = []
    for i in rng.permutation(pool):
        chosen.append(int(i))
        if relay_set_feasible(channels, config, chosen):
            break
    return solve_relay_set(channels, config, chosen, "RSS-M")
