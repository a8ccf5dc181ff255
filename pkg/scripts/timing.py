#!/usr/bin/env python3
"""Per-realization solve time of each scheme versus the number of SUs."""
import time

from wpccrn.harness import SCHEMES, run_schemes
from wpccrn.scenario import SELECTION_STREAM, ScenarioConfig, generate_realization, realization_rng

if __name__ == "__main__":
    for n in (2, 4, 6, 8):
        cfg = ScenarioConfig(n_su=n)
        chans = [generate_realization(cfg, k, 0) for k in range(50)]
        row = []
        for s in SCHEMES:
            t = time.perf_counter()
            for k, ch in enumerate(chans):
                run_schemes(ch, cfg, (s,), realization_rng(0, k, SELECTION_STREAM))
            row.append(f"{s} {1e3 * (time.perf_counter() - t) / len(chans):6.2f}")
        print(f"N={n}: " + "  ".join(row) + "  (ms)")
