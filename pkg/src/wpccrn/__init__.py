"""Resource allocation for wireless-powered cooperative cognitive radio networks.

Four allocation schemes (STORA, ETA, MTM, PTA), three relay-selection
baselines, brute-force oracles for small instances and a Monte-Carlo harness.
"""

__version__ = "0.1.0"

from .core_math import SolverTolerances, lambert_w0, solve_rate_kkt_root  # noqa: E402
from .scenario import ChannelState, ScenarioConfig, derive_coefficients, generate_realization  # noqa: E402
from .stora import Allocation, DualState, SchemeResult, solve_fixed_set, solve_stora  # noqa: E402
from .fairness import solve_eta, solve_mtm, solve_pta  # noqa: E402
from .baselines import solve_bss, solve_rss_multi, solve_rss_single  # noqa: E402

__all__ = [
    "Allocation", "ChannelState", "DualState", "ScenarioConfig", "SchemeResult", "SolverTolerances",
    "derive_coefficients", "generate_realization", "lambert_w0", "solve_bss", "solve_eta",
    "solve_fixed_set", "solve_mtm", "solve_pta", "solve_rate_kkt_root", "solve_rss_multi",
    "solve_rss_single", "solve_stora",
]
