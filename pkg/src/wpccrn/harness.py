"""Monte-Carlo sweeps: paired channel draws, per-scheme metrics, CSV/JSON output.

Realization k of a sweep uses the channel substream (seed, 0, k) and the
selection substream (seed, 1, k) at every swept value and for every scheme,
so schemes are compared on identical channels.  Workers only compute
per-realization records; all sums run in realization order, which keeps the
output byte-identical for any number of jobs.
"""

import csv
import json
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .baselines import solve_bss, solve_rss_multi, solve_rss_single
from .fairness import solve_eta, solve_mtm, solve_pta
from .scenario import SELECTION_STREAM, ConfigError, generate_realization, parse_assignment, realization_rng
from .stora import SchemeResult, solve_fixed_set, stora_cutoff_values

SCHEMES = ("STORA", "ETA", "MTM", "PTA", "BSS", "RSS-S", "RSS-M")
SWEEP_VARIABLES = ("target_primary_rate", "n_su", "p_hap", "p_hap_dbm", "su_radius")
CSV_COLUMNS = ("swept_value", "scheme", "mean_sum_throughput", "stderr", "jain_mean", "jain_stderr",
               "p_coop", "mean_t0", "mean_ta", "failures")
MAX_FAILURE_RATE = 0.005


def jain_index(throughputs):
    """(sum x)^2 / (N sum x^2)."""
    x = np.asarray(throughputs, dtype=float)
    if x.size == 0 or np.any(x < 0):
        raise ValueError("throughputs must be a non-empty non-negative vector")
    sq = float(np.dot(x, x))
    if sq == 0.0:
        raise ValueError("Jain index undefined when every throughput is zero")
    return float(x.sum() ** 2 / (x.size * sq))


def prob_cooperation(results):
    if not results:
        raise ValueError("need at least one result")
    return sum(1 for r in results if r.feasible) / len(results)


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    realizations: int = 2000
    schemes: tuple = SCHEMES
    seed: int = 0

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"cannot sweep {self.variable!r}; choose from {SWEEP_VARIABLES}")
        vals = tuple(self.values)
        if not vals:
            raise ConfigError("sweep needs at least one value")
        if list(vals) != sorted(vals):
            raise ConfigError("sweep values must be sorted ascending")
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ConfigError(f"unknown scheme(s): {bad}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "schemes", tuple(self.schemes))


@dataclass(frozen=True)
class Record:
    """One scheme on one realization."""

    feasible: bool
    failed: bool
    sum_throughput: float
    min_throughput: float
    jain: float  # nan when undefined
    t0: float
    ta: float


@dataclass
class SchemeStats:
    mean_sum_throughput: float
    stderr: float
    jain_mean: float
    jain_stderr: float
    p_coop: float
    mean_t0: float
    mean_ta: float
    failures: int
    count: int
    records: list = field(default=None, repr=False)


@dataclass
class SweepPoint:
    value: float
    stats: dict  # scheme -> SchemeStats


def apply_value(config, variable, value):
    name, val = parse_assignment(variable, value)
    return config.with_overrides(**{name: val})


def _record(res):
    if res.feasible and res.sum_throughput > 0:
        fi = jain_index(res.su_throughputs)
    else:
        fi = math.nan
    a = res.allocation
    return Record(bool(res.feasible), not res.converged, float(res.sum_throughput),
                  float(res.min_throughput) if res.feasible else 0.0, fi,
                  float(a.t_0), float(a.access_window))


_FAILED = Record(False, True, 0.0, 0.0, math.nan, 0.0, 0.0)


def run_schemes(channels, config, schemes, rng=None):
    """All requested schemes on one realization (sharing the cutoff bounds)."""
    values = stora_cutoff_values(channels, config)
    bounds = [v for v, _, _ in values]
    out = {}
    for s in schemes:
        try:
            if s == "STORA":
                out[s] = _best_stora(channels, config, values)
            elif s == "ETA":
                out[s] = solve_eta(channels, config, bounds=bounds)
            elif s == "MTM":
                out[s] = solve_mtm(channels, config, bounds=bounds)
            elif s == "PTA":
                out[s] = solve_pta(channels, config, bounds=bounds)
            elif s == "BSS":
                out[s] = solve_bss(channels, config, values=values)
            elif s == "RSS-S":
                out[s] = solve_rss_single(channels, config, rng, values=values)
            elif s == "RSS-M":
                out[s] = solve_rss_multi(channels, config, rng, values=values)
        except (ArithmeticError, ValueError, np.linalg.LinAlgError):
            out[s] = None
    return out


def _best_stora(channels, config, values):
    ks = [k for k in range(1, channels.n_su + 1) if values[k - 1][0] >= 0]
    if not ks:
        return SchemeResult.infeasible("STORA", channels.n_su)
    k = max(ks, key=lambda k: values[k - 1][0])
    return solve_fixed_set(k, channels, config)


def evaluate_realization(config, index, seed, schemes):
    channels = generate_realization(config, index, seed)
    rng = realization_rng(seed, index, SELECTION_STREAM)
    res = run_schemes(channels, config, schemes, rng)
    return {s: (_FAILED if res[s] is None else _record(res[s])) for s in schemes}


def _chunk_worker(args):
    config, seed, schemes, lo, hi = args
    return [evaluate_realization(config, i, seed, schemes) for i in range(lo, hi)]


def _evaluate_all(config, seed, schemes, n, jobs):
    if jobs <= 1:
        return _chunk_worker((config, seed, schemes, 0, n))
    size = max(1, math.ceil(n / (4 * jobs)))
    tasks = [(config, seed, schemes, lo, min(lo + size, n)) for lo in range(0, n, size)]
    out = []
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        for part in ex.map(_chunk_worker, tasks):
            out.extend(part)
    return out


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    m = float(np.sum(x) / x.size)
    if x.size < 2:
        return m, 0.0
    return m, float(math.sqrt(np.sum((x - m) ** 2) / (x.size - 1) / x.size))


def aggregate(records, keep_records=False):
    """Failed realizations are dropped and counted; infeasible ones count as zero
    throughput, are excluded from the Jain average and from the t_0 / t_a means."""
    ok = [r for r in records if not r.failed]
    fails = len(records) - len(ok)
    mean, se = _mean_se([r.sum_throughput for r in ok])
    jm, jse = _mean_se([r.jain for r in ok if not math.isnan(r.jain)])
    feas = [r for r in ok if r.feasible]
    p = len(feas) / len(ok) if ok else math.nan
    t0 = _mean_se([r.t0 for r in feas])[0]
    ta = _mean_se([r.ta for r in feas])[0]
    return SchemeStats(mean, se, jm, jse, p, t0, ta, fails, len(records),
                       records if keep_records else None)


def run_sweep(spec, config, jobs=1, keep_records=False, progress=None):
    points = []
    for value in spec.values:
        cfg = apply_value(config, spec.variable, value)
        recs = _evaluate_all(cfg, spec.seed, spec.schemes, spec.realizations, jobs)
        stats = {s: aggregate([r[s] for r in recs], keep_records) for s in spec.schemes}
        points.append(SweepPoint(value, stats))
        if progress:
            progress(value, stats)
    return points


def fmt(x):
    """17 significant digits; integers stay integers."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(points, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for pt in points:
            for s, st in pt.stats.items():
                w.writerow([fmt(pt.value), s, fmt(st.mean_sum_throughput), fmt(st.stderr),
                            fmt(st.jain_mean), fmt(st.jain_stderr), fmt(st.p_coop),
                            fmt(st.mean_t0), fmt(st.mean_ta), fmt(st.failures)])


def manifest(spec, config, extra=None):
    m = {
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "sweep": {**asdict(spec), "values": list(spec.values), "schemes": list(spec.schemes)},
        "config": config.to_dict(),
        "seed": spec.seed,
        "rng": "numpy Philox, SeedSequence(seed, spawn_key=(stream, realization)); "
               "stream 0 channels, stream 1 relay selection",
        "aggregation": {
            "infeasible": "zero throughput in the sum-throughput mean",
            "jain": "averaged over feasible realizations with positive sum throughput",
            "t0_ta": "averaged over feasible realizations",
            "failures": "non-converged realizations, excluded from every mean",
        },
    }
    if extra:
        m.update(extra)
    return m


def write_manifest(path, spec, config, extra=None):
    with open(path, "w") as fh:
        json.dump(manifest(spec, config, extra), fh, indent=2, sort_keys=True, default=fmt)
        fh.write("\n")


def failure_breaches(points, limit=MAX_FAILURE_RATE):
    out = []
    for pt in points:
        for s, st in pt.stats.items():
            if st.count and st.failures / st.count >= limit:
                out.append((pt.value, s, st.failures, st.count))
    return out
