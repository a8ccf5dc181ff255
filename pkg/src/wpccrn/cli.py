"""Command line: sweep, solve, verify, paper-figures.

Exit codes: 0 ok, 2 bad config or arguments, 3 solver failure rate at or above
0.5% in a sweep, 4 solver/oracle gap above --gap in verify.
"""

import argparse
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import harness as H
from .baselines import solve_bss, solve_rss_multi, solve_rss_single
from .fairness import solve_eta, solve_mtm, solve_pta
from .oracle import ORACLES, regression_suite, relative_gap
from .scenario import SELECTION_STREAM, ChannelState, ConfigError, generate_realization, load_config, realization_rng
from .stora import solve_stora

EXIT_CONFIG = 2
EXIT_FAILURES = 3
EXIT_GAP = 4

PAPER_SWEEPS = (
    ("primary_rate", "target_primary_rate", "0.5:3.5:0.5"),
    ("n_su", "n_su", "2:8:1"),
    ("hap_power", "p_hap_dbm", "10:30:5"),
    ("radius", "su_radius", "5:25:5"),
)
FAIRNESS_SCHEMES = ("STORA", "ETA", "MTM", "PTA")

_f = H.fmt


def parse_range(text):
    """`start:stop:step`, stop included when it lands on the grid; or a comma list."""
    text = text.strip()
    try:
        if ":" not in text:
            return tuple(float(v) for v in text.split(","))
        parts = [float(v) for v in text.split(":")]
    except ValueError as exc:
        raise ConfigError(f"bad --values {text!r}") from exc
    if len(parts) != 3:
        raise ConfigError(f"--values needs start:stop:step, got {text!r}")
    start, stop, step = parts
    if not step > 0 or stop < start:
        raise ConfigError(f"bad range {text!r}: need step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 12) for i in range(count))


def parse_schemes(text, allowed):
    if text is None or text.lower() == "all":
        return tuple(allowed)
    out = []
    for s in text.split(","):
        name = s.strip().upper()
        if name not in allowed:
            raise ConfigError(f"unknown scheme {s.strip()!r}; choose from {', '.join(allowed)} or all")
        out.append(name)
    return tuple(out)


def resolve_seed(args, config):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("WPCCRN_SEED")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"WPCCRN_SEED must be an integer, got {env!r}") from exc
    return config.rng_seed


def _sweep_files(outdir, stem, spec, config, points, elapsed):
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / f"{stem}.csv"
    H.write_csv(points, csv_path)
    H.write_manifest(outdir / f"{stem}.json", spec, config, {"csv": csv_path.name})
    print(f"wrote {csv_path} ({len(points)} points, {elapsed:.1f} s)")
    return csv_path


def _progress(value, stats):
    parts = [f"{s}={st.mean_sum_throughput:.4f}" for s, st in stats.items()]
    print(f"  {value:g}: " + " ".join(parts), file=sys.stderr, flush=True)


def _breach(points):
    bad = H.failure_breaches(points)
    for value, s, f, n in bad:
        print(f"failure rate breach: {s} at {value:g}: {f}/{n}", file=sys.stderr)
    return bad


def cmd_sweep(args):
    config = load_config(args.config, args.overrides)
    if args.var is None or args.values is None:
        raise ConfigError("sweep needs --var and --values")
    seed = resolve_seed(args, config)
    spec = H.SweepSpec(args.var, parse_range(args.values), args.realizations,
                       parse_schemes(args.scheme, H.SCHEMES), seed)
    t = time.time()
    points = H.run_sweep(spec, config, jobs=args.jobs, progress=None if args.quiet else _progress)
    _sweep_files(Path(args.output_dir), f"sweep_{args.var}", spec, config, points, time.time() - t)
    return EXIT_FAILURES if _breach(points) else 0


def cmd_paper_figures(args):
    config = load_config(args.config, args.overrides)
    seed = resolve_seed(args, config)
    schemes = parse_schemes(args.scheme, H.SCHEMES)
    status = 0
    for stem, var, rng in PAPER_SWEEPS:
        spec = H.SweepSpec(var, parse_range(rng), args.realizations, schemes, seed)
        print(f"{stem}: {var} over {rng}", flush=True)
        t = time.time()
        points = H.run_sweep(spec, config, jobs=args.jobs, progress=None if args.quiet else _progress)
        _sweep_files(Path(args.output_dir), f"fig_{stem}", spec, config, points, time.time() - t)
        if _breach(points):
            status = EXIT_FAILURES
    return status


def _gains(text, n):
    """`h_p=..;h_ps=a,b,..;h_sp=..;h_hs=..;h_sh=..` (linear power gains)."""
    vals = {}
    for item in text.split(";"):
        if not item.strip():
            continue
        if "=" not in item:
            raise ConfigError(f"bad --gains item {item!r}")
        k, v = item.split("=", 1)
        vals[k.strip()] = [float(x) for x in v.split(",")]
    need = ("h_p", "h_ps", "h_sp", "h_hs", "h_sh")
    missing = [k for k in need if k not in vals]
    if missing:
        raise ConfigError(f"--gains missing {', '.join(missing)}")
    extra = [k for k in vals if k not in need]
    if extra:
        raise ConfigError(f"unknown gain key: {extra[0]}")
    try:
        ch = ChannelState(vals["h_p"][0], *(np.array(vals[k]) for k in need[1:]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if ch.n_su != n:
        raise ConfigError(f"--gains has {ch.n_su} SUs but n_su = {n}")
    return ch


SOLVERS = {
    "STORA": lambda ch, cfg, rng: solve_stora(ch, cfg),
    "ETA": lambda ch, cfg, rng: solve_eta(ch, cfg),
    "MTM": lambda ch, cfg, rng: solve_mtm(ch, cfg),
    "PTA": lambda ch, cfg, rng: solve_pta(ch, cfg),
    "BSS": lambda ch, cfg, rng: solve_bss(ch, cfg),
    "RSS-S": lambda ch, cfg, rng: solve_rss_single(ch, cfg, rng),
    "RSS-M": lambda ch, cfg, rng: solve_rss_multi(ch, cfg, rng),
}


def _vec(a):
    return "[" + ", ".join(_f(x) for x in np.asarray(a, float)) + "]"


def format_result(res, channels):
    lines = [f"scheme: {res.scheme}", f"feasible: {str(bool(res.feasible)).lower()}",
             f"converged: {str(bool(res.converged)).lower()}"]
    lines.append("channels:")
    lines.append(f"  h_p: {_f(channels.h_p)}")
    for k in ("h_ps", "h_sp", "h_hs", "h_sh"):
        lines.append(f"  {k}: {_vec(getattr(channels, k))}")
    if not res.feasible:
        for k, v in res.residuals.items():
            lines.append(f"{k}: {v}")
        return "\n".join(lines)
    a = res.allocation
    lines += ["allocation:", f"  t_e: {_f(a.t_e)}", f"  t_0: {_f(a.t_0)}", f"  t: {_vec(a.t)}",
              f"  t_a: {_f(a.access_window)}", f"  e_sh: {_vec(a.e_sh)}", f"  e_sp: {_vec(a.e_sp)}"]
    lines.append(f"decoding_set: {list(res.decoding_set.members)} (cutoff {res.decoding_set.cutoff})")
    lines += ["throughput:", f"  per_su: {_vec(res.su_throughputs)}", f"  sum: {_f(res.sum_throughput)}",
              f"  min: {_f(res.min_throughput)}", f"  primary_rate: {_f(res.primary_rate)}"]
    d = res.duals
    if d is not None:
        lines += ["duals:", f"  lambda: {_f(d.lam)}", f"  kappa: {_f(d.kappa)}", f"  nu: {_f(d.nu)}",
                  f"  mu: {_vec(d.mu)}"]
        if d.rho is not None:
            lines.append(f"  rho: {_vec(d.rho)}")
        if d.zeta is not None:
            lines.append(f"  zeta: {_f(d.zeta)}")
    if res.residuals:
        lines.append("residuals:")
        for k, v in res.residuals.items():
            if isinstance(v, (float, int, np.floating)) and not isinstance(v, bool):
                lines.append(f"  {k}: {_f(v)}")
            elif isinstance(v, np.ndarray):
                lines.append(f"  {k}: {_vec(v)}")
            else:
                lines.append(f"  {k}: {v}")
    return "\n".join(lines)


def cmd_solve(args):
    config = load_config(args.config, args.overrides)
    seed = resolve_seed(args, config)
    schemes = parse_schemes(args.scheme or "STORA", H.SCHEMES)
    if args.gains:
        channels = _gains(args.gains, config.n_su)
    else:
        channels = generate_realization(config, args.index, seed)
    for i, s in enumerate(schemes):
        rng = realization_rng(seed, args.index, SELECTION_STREAM)
        if i:
            print()
        print(format_result(SOLVERS[s](channels, config, rng), channels))
    return 0


def cmd_verify(args):
    schemes = parse_schemes(args.scheme, FAIRNESS_SCHEMES)
    solvers = {"STORA": solve_stora, "ETA": solve_eta, "MTM": solve_mtm, "PTA": solve_pta}
    bad = []
    t = time.time()
    for name, cfg, ch in regression_suite(args.suite_seed):
        row = [name]
        for s in schemes:
            res = solvers[s](ch, cfg)
            # both sides report 0 for an infeasible instance
            val = 0.0 if not res.feasible else (res.min_throughput if s == "MTM" else res.sum_throughput)
            gap = relative_gap(val, ORACLES[s](ch, cfg))
            row.append(f"{s}={_f(gap)}")
            if not gap <= args.gap:
                bad.append((name, s, gap))
        print("  ".join(row), flush=True)
    print(f"{len(bad)} gap(s) above {args.gap:g} ({time.time() - t:.1f} s)")
    for name, s, gap in bad:
        print(f"  {name} {s}: {_f(gap)}", file=sys.stderr)
    return EXIT_GAP if bad else 0


def build_parser():
    p = argparse.ArgumentParser(prog="wpccrn", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, scheme_help):
        sp.add_argument("overrides", nargs="*", metavar="KEY=VALUE",
                        help="config overrides, e.g. n_su=3 p_hap_dbm=25")
        sp.add_argument("--config", help="flat key = value config file")
        sp.add_argument("--seed", type=int, help="master seed (falls back to WPCCRN_SEED, then rng_seed)")
        sp.add_argument("--scheme", help=scheme_help)

    def sweepish(sp):
        sp.add_argument("--realizations", type=int, default=2000)
        sp.add_argument("--output-dir", default="results")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")
        sp.add_argument("--quiet", action="store_true")

    sp = sub.add_parser("sweep", help="Monte-Carlo sweep of one parameter")
    common(sp, "comma list of schemes or 'all' (default)")
    sweepish(sp)
    sp.add_argument("--var", help=f"swept parameter: {', '.join(H.SWEEP_VARIABLES)}")
    sp.add_argument("--values", help="start:stop:step (stop included when on the grid) or a comma list")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("solve", help="solve one realization and print the full result")
    common(sp, "comma list of schemes or 'all' (default STORA)")
    sp.add_argument("--index", type=int, default=0, help="realization index under the seed")
    sp.add_argument("--gains", help="explicit gains: 'h_p=..;h_ps=a,b;h_sp=..;h_hs=..;h_sh=..'")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("verify", help="solvers against brute-force oracles on the N=2 regression suite")
    sp.add_argument("--scheme", help="comma list of STORA, ETA, MTM, PTA or 'all' (default)")
    sp.add_argument("--gap", type=float, default=1e-3, help="relative gap tolerance")
    sp.add_argument("--suite-seed", type=int, default=2024)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("paper-figures", help="the four reference sweeps, one CSV each")
    common(sp, "comma list of schemes or 'all' (default)")
    sweepish(sp)
    sp.set_defaults(func=cmd_paper_figures)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
