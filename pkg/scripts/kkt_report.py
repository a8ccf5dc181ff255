#!/usr/bin/env python3
"""KKT and structure residuals of the sum-throughput solver on realizations
where the primary link cannot reach the target alone.

Prints worst-case residuals over the sample; useful after touching the
solver kernels.
"""
import argparse

import numpy as np

from wpccrn.scenario import ScenarioConfig, derive_coefficients, generate_realization
from wpccrn.stora import relay_priority_order, solve_stora


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--seed", type=int, default=2)
    ap.add_argument("--rate", type=float, default=1.5)
    a = ap.parse_args()
    cfg = ScenarioConfig(target_primary_rate=a.rate)
    worst = {}
    found = idx = 0
    while found < a.count:
        ch = generate_realization(cfg, idx, a.seed)
        idx += 1
        if derive_coefficients(ch, cfg).q1 >= cfg.target_primary_rate:
            continue
        r = solve_stora(ch, cfg)
        if not r.feasible:
            continue
        found += 1
        al = r.allocation
        c = derive_coefficients(ch, cfg, r.decoding_set.cutoff)
        cap = c.budget * al.t_e
        order = relay_priority_order(ch, cfg, r.decoding_set.members)
        active = [i for i in order if al.e_sp[i] > 1e-9]
        vals = {k: abs(v) for k, v in r.residuals.items() if isinstance(v, (float, np.floating))}
        vals["fractional"] = int(np.sum((al.e_sp > 1e-6 * cap) & (al.e_sp < (1 - 1e-6) * cap)))
        vals["order_violation"] = int(active != order[: len(active)])
        for k, v in vals.items():
            worst[k] = max(worst.get(k, 0), v)
    print(f"{found} realizations from {idx} draws")
    for k, v in sorted(worst.items()):
        print(f"  {k:18s} {v:.3e}")


if __name__ == "__main__":
    main()
