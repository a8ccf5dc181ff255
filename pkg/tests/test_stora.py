import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _helpers import coef_instances, spec_instance
from wpccrn.scenario import ChannelState, ScenarioConfig, channels_from_coefficients, derive_coefficients, generate_realization
from wpccrn.stora import (Allocation, FixedSetProblem, GreedyInstance, check_decoding, greedy_allocate,
                          relay_priority_order, solve_fixed_set, solve_stora, sp1_energy_allocation,
                          sp2_time_allocation, stora_cutoff_values)

# frozen oracle values (grid + zoom + polish oracle, see wpccrn.oracle)
SPEC_STORA = 0.13543297763375267
CRAFTED_N1 = 0.0557697415528  # dense (t_e, t_0) line search, 4001 x 4001, N = 1
HARVEST_N1 = 0.10140371521469  # dense 2e6-point t_e line search with R = 0


# ------------------------------------------------------------ greedy


@pytest.mark.parametrize("s, q, p", [(0.5, [0, 0, 0.5], [1, 1, 0.5]), (1.5, [0, 0.5, 1], [1, 0.5, 0]),
                                     (3.0, [1, 1, 1], [0, 0, 0]), (7.0, [1, 1, 1], [0, 0, 0])])
def test_greedy_examples(s, q, p):
    pp, qq = greedy_allocate(GreedyInstance(np.array([3.0, 2, 1]), np.ones(3), s))
    assert np.allclose(qq, q) and np.allclose(pp, p)


def test_greedy_validation():
    with pytest.raises(ValueError):
        GreedyInstance(np.ones(2), np.ones(3), 1.0)
    with pytest.raises(ValueError):
        GreedyInstance(np.ones(2), -np.ones(2), 1.0)


@given(st.lists(st.tuples(st.floats(0, 5), st.floats(0, 3)), min_size=1, max_size=5), st.floats(0, 1))
def test_greedy_is_optimal_lp(items, frac):
    w = np.array([a for a, _ in items])
    r = np.array([b for _, b in items])
    s = frac * r.sum()
    p, q = greedy_allocate(GreedyInstance(w, r, s))
    assert np.all(q >= -1e-12) and np.all(q <= r + 1e-12)
    assert q.sum() == pytest.approx(min(s, r.sum()), abs=1e-9)
    assert np.allclose(p + q, r)
    # no cheaper unit can replace a more expensive one
    for i, j in itertools.permutations(range(len(w)), 2):
        if w[i] < w[j] and q[j] > 1e-12:
            assert q[i] >= r[i] - 1e-12


# ------------------------------------------------------------ ordering and decoding


def _chan(h_sh, h_sp, n=None):
    n = len(h_sh)
    one = np.ones(n)
    return ChannelState(1e-6, one * 1e-5, np.array(h_sp, float), one * 1e-3, np.array(h_sh, float))


def test_priority_order_example():
    ch = _chan([2.0, 0.5, 1.0], [1.0, 1.0, 1.0])
    assert relay_priority_order(ch, ScenarioConfig(n_su=3)) == [1, 2, 0]


@given(st.lists(st.floats(0.1, 10), min_size=2, max_size=6), st.floats(0.01, 100))
def test_priority_order_scale_invariant(r, k):
    n = len(r)
    ch1 = _chan(r, np.ones(n))
    ch2 = _chan(np.array(r) * k, np.ones(n))
    cfg = ScenarioConfig(n_su=n)
    assert relay_priority_order(ch1, cfg) == relay_priority_order(ch2, cfg)


def test_check_decoding():
    cfg = ScenarioConfig(n_su=4, target_primary_rate=1.5)
    ch = generate_realization(cfg, 0, 0)
    c = derive_coefficients(ch, cfg)
    te = 1.5 / c.q1 + 1e-3
    assert all(check_decoding(i, 0.0, te, ch, cfg) for i in range(4))
    big = cfg.with_overrides(target_primary_rate=50.0)
    assert not check_decoding(0, 0.0, 0.1, ch, big)
    # boundary is admissible
    i = int(np.argmax(c.q2_each))
    t0 = (50.0 - 0.1 * c.q1) / c.q2_each[i]
    assert check_decoding(i, t0 * (1 + 1e-15), 0.1, ch, big)


# ------------------------------------------------------------ solver


def test_spec_instance_matches_oracle():
    cfg, ch = spec_instance()
    r = solve_stora(ch, cfg)
    assert r.feasible and r.converged
    assert abs(r.sum_throughput - SPEC_STORA) / SPEC_STORA <= 1e-3
    assert abs(r.sum_throughput - SPEC_STORA) <= 1e-9


def test_zero_target_is_harvest_then_transmit():
    cfg, ch = channels_from_coefficients(0.5, [2], [1.5], [0.01], 0.1, 0.0)
    r = solve_stora(ch, cfg)
    assert r.allocation.t_0 == 0 and np.all(r.allocation.e_sp == 0)
    assert r.sum_throughput == pytest.approx(HARVEST_N1, rel=1e-10)


@given(coef_instances(2, 4))
def test_zero_target_multi_su(inst):
    cfg, ch = inst
    cfg = cfg.with_overrides(target_primary_rate=0.0)
    r = solve_stora(ch, cfg)
    c = derive_coefficients(ch, cfg)
    g = float(np.dot(c.gamma_ih, c.budget))
    te = np.linspace(1e-6, 1 - 1e-6, 200001)
    ref = np.max((1 - te) * np.log1p(g * te / (1 - te)))
    assert r.allocation.t_0 == 0
    assert r.sum_throughput == pytest.approx(ref, rel=1e-7)


def test_single_su_line_search():
    cfg, ch = channels_from_coefficients(0.5, [2], [1.5], [0.01], 0.1, 0.4)
    r = solve_stora(ch, cfg)
    assert r.sum_throughput >= CRAFTED_N1
    assert r.sum_throughput == pytest.approx(CRAFTED_N1, rel=1e-6)


def test_strong_direct_link_needs_no_relay_slot():
    cfg = ScenarioConfig(n_su=2)
    ch = generate_realization(cfg, 0, 3)
    r = solve_stora(ch, cfg)
    assert derive_coefficients(ch, cfg).q1 > cfg.target_primary_rate
    assert r.allocation.t_0 == 0.0
    assert np.all(r.allocation.e_sp == 0)


def test_infeasible_reports_limiting_constraint():
    cfg, ch = spec_instance()
    r = solve_stora(ch, cfg.with_overrides(target_primary_rate=10.0))
    assert not r.feasible and r.sum_throughput == 0
    assert r.residuals["limiting"] in ("primary", "decoding")


def test_decoding_set_is_hpi_prefix():
    cfg = ScenarioConfig()
    for k in range(20):
        ch = generate_realization(cfg, k, 1)
        r = solve_stora(ch, cfg)
        if r.feasible:
            top = set(np.argsort(-ch.h_ps, kind="stable")[: r.decoding_set.cutoff].tolist())
            assert set(r.decoding_set.members) == top


def test_cutoff_values_dominate_selected():
    cfg, ch = spec_instance()
    vals = stora_cutoff_values(ch, cfg)
    r = solve_stora(ch, cfg)
    assert max(v for v, _, _ in vals) == pytest.approx(r.sum_throughput, rel=1e-12)


@given(coef_instances(1, 4))
def test_structure_at_optimum(inst):
    cfg, ch = inst
    r = solve_stora(ch, cfg)
    if not r.feasible:
        return
    a = r.allocation
    c = derive_coefficients(ch, cfg, r.decoding_set.cutoff)
    assert a.is_valid(c.budget)
    res = r.residuals
    assert abs(res["time"]) <= 1e-9 and res["energy_max"] <= 1e-9
    if c.q1 * a.t_e < cfg.target_primary_rate:
        assert abs(res["primary"]) <= 1e-5
    # one common access SNR
    on = a.t > 0
    snr = c.gamma_ih[on] * a.e_sh[on] / a.t[on]
    if snr.size:
        assert (snr.max() - snr.min()) <= 1e-4 * snr.max()
    cap = c.budget * a.t_e
    frac = (a.e_sp > 1e-6 * cap) & (a.e_sp < (1 - 1e-6) * cap)
    assert frac.sum() <= 1
    order = relay_priority_order(ch, cfg, r.decoding_set.members)
    active = [i for i in order if a.e_sp[i] > 1e-9 * max(cap[i], 1e-300)]
    assert active == order[: len(active)]
    assert np.all(a.e_sp[[i for i in range(ch.n_su) if i not in r.decoding_set.members]] == 0)


@given(coef_instances(1, 3))
def test_kkt_residuals_small(inst):
    cfg, ch = inst
    r = solve_stora(ch, cfg)
    if not r.feasible or r.allocation.access_window < 1e-6:
        return
    for key in ("stationarity_te", "stationarity_t0", "split_optimality"):
        if key in r.residuals:
            assert r.residuals[key] <= 1e-5 if key == "split_optimality" else abs(r.residuals[key]) <= 1e-5
    assert r.residuals["dual_sign"] >= -1e-9


def test_fixed_set_rejects_outside_relays():
    cfg, ch = spec_instance()
    top = FixedSetProblem(ch, cfg, 1).decoding.members
    other = [i for i in range(2) if i not in top]
    with pytest.raises(ValueError):
        FixedSetProblem(ch, cfg, 1, other)


# ------------------------------------------------------------ dual-method building blocks


def test_sp1_without_price_never_relays():
    cfg, ch = spec_instance()
    c = derive_coefficients(ch, cfg)
    e_sh, e_sp, mu = sp1_energy_allocation(0.4, 0.1, np.array([0.2, 0.2]), 1e-14, c, np.ones(2, bool))
    assert np.all(e_sp == 0)
    assert np.allclose(e_sh, c.budget * 0.4)


def test_sp1_spends_budget():
    cfg, ch = spec_instance()
    c = derive_coefficients(ch, cfg)
    e_sh, e_sp, _ = sp1_energy_allocation(0.4, 0.1, np.array([0.2, 0.2]), 5.0, c, np.ones(2, bool))
    assert np.allclose(e_sh + e_sp, c.budget * 0.4, rtol=1e-9)


def test_sp2_no_energy_no_time():
    cfg, ch = spec_instance()
    c = derive_coefficients(ch, cfg)
    t0, t = sp2_time_allocation(np.zeros(2), np.zeros(2), 1.0, 0.0, 0.5, c)
    assert t0 == 0 and np.all(t == 0)


def test_sp2_access_times_follow_root():
    cfg, ch = spec_instance()
    c = derive_coefficients(ch, cfg)
    nu = math.log(2) - 0.5  # root x = 1
    _, t = sp2_time_allocation(np.array([0.03, 0.02]), np.zeros(2), 1.0, 0.0, nu, c)
    assert np.allclose(t, c.gamma_ih * np.array([0.03, 0.02]), rtol=1e-10)


def test_dual_method_reaches_structured_optimum():
    # two-level dual ascent is slow but lands near the structured optimum
    cfg, ch = spec_instance()
    k = solve_stora(ch, cfg).decoding_set.cutoff
    ref = solve_fixed_set(k, ch, cfg)
    r = solve_fixed_set(k, ch, cfg, method="dual")
    assert r.feasible
    assert r.sum_throughput <= ref.sum_throughput * (1 + 1e-6)
    assert abs(r.sum_throughput - ref.sum_throughput) / ref.sum_throughput <= 1e-2


def test_allocation_checks():
    a = Allocation(0.2, 0.1, np.array([0.3, 0.3]), np.array([0.01, 0.01]), np.zeros(2))
    assert a.access_window == pytest.approx(0.6)
    assert a.time_slack() == pytest.approx(0.0, abs=1e-15)
    assert a.is_valid(np.array([0.05, 0.05]))
    assert not a.is_valid(np.array([0.01, 0.01]))
    with pytest.raises(ValueError):
        Allocation(0.2, 0.1, np.ones(2), np.ones(3), np.ones(2))
