import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wpccrn.scenario import (ConfigError, ScenarioConfig, channels_from_coefficients, db_to_linear,
                             dbm_to_watt, derive_coefficients, draw_channels, generate_realization,
                             harvested_energy, load_config, parse_config_text, place_users,
                             primary_coop_rate, realization_rng, su_rate, watt_to_dbm)
from wpccrn.scenario import ChannelState
from wpccrn.stora import Allocation


def test_units():
    assert dbm_to_watt(20) == pytest.approx(0.1)
    assert dbm_to_watt(-70) == pytest.approx(1e-10)
    assert watt_to_dbm(0.1) == pytest.approx(20)
    assert db_to_linear(8.8) == pytest.approx(10 ** 0.88)


def test_defaults():
    c = ScenarioConfig()
    assert (c.n_su, c.eta, c.pathloss_exp, c.d_pt_pr, c.su_radius, c.target_primary_rate) == (4, 0.5, 3.0, 50.0, 10.0, 1.5)
    assert c.gamma_noise == pytest.approx(10 ** 0.88 * 1e-10)


@pytest.mark.parametrize("kw", [{"n_su": 0}, {"eta": 1.5}, {"p_hap": -1}, {"snr_gap": 0.5},
                                {"target_primary_rate": -1}, {"n_su": 2.5}])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        ScenarioConfig(**kw)


def test_config_text():
    cfg = parse_config_text("n_su = 3\np_hap_dbm = 30  # comment\n\nsnr_gap_db = 0\n")
    assert cfg.n_su == 3 and cfg.p_hap == pytest.approx(1.0) and cfg.snr_gap == 1.0
    with pytest.raises(ConfigError, match="colour"):
        parse_config_text("colour = 3")
    with pytest.raises(ConfigError):
        parse_config_text("n_su 3")


def test_load_config(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text("n_su = 2\n")
    cfg = load_config(p, ["target_primary_rate=2.5"])
    assert cfg.n_su == 2 and cfg.target_primary_rate == 2.5
    with pytest.raises(ConfigError, match="nope"):
        load_config(p, ["nope=1"])


def test_rng_substreams_independent_of_order():
    a = realization_rng(5, 7).random(3)
    realization_rng(5, 6).random(10)
    assert np.array_equal(a, realization_rng(5, 7).random(3))
    assert not np.array_equal(a, realization_rng(5, 8).random(3))
    assert not np.array_equal(a, realization_rng(5, 7, stream=1).random(3))


def test_geometry_limit():
    cfg = ScenarioConfig(su_radius=1e-9, min_distance=1e-12)
    g = place_users(cfg, realization_rng(0, 0))
    assert np.all(g.d_hs < 1e-8)
    assert np.allclose(g.d_ps, 25.0) and np.allclose(g.d_sp, 25.0)


@given(st.integers(0, 10_000), st.floats(1.0, 30.0))
def test_placement_inside_disk(idx, radius):
    cfg = ScenarioConfig(su_radius=radius)
    g = place_users(cfg, realization_rng(1, idx))
    assert np.all(np.hypot(*g.su_xy.T) <= radius + 1e-12)
    assert np.all(g.d_hs >= cfg.min_distance)


def test_fading_unit_mean():
    # 10^6 unit-distance draws through draw_channels
    cfg = ScenarioConfig(n_su=1000, d_pt_pr=1.0, min_distance=1.0, su_radius=1e-6)
    rng = realization_rng(4, 0)
    g = place_users(cfg, rng)
    vals = np.concatenate([draw_channels(g, cfg, rng).h_hs for _ in range(1000)])
    assert abs(vals.mean() - 1.0) < 0.005


def test_realization_deterministic():
    cfg = ScenarioConfig()
    a, b = generate_realization(cfg, 3, 9), generate_realization(cfg, 3, 9)
    assert a.h_p == b.h_p and np.array_equal(a.h_sh, b.h_sh)


def test_coefficients():
    cfg = ScenarioConfig()
    ch = generate_realization(cfg, 0, 1)
    c = derive_coefficients(ch, cfg)
    gn = cfg.gamma_noise
    assert c.gamma_p == pytest.approx(ch.h_p * cfg.p_primary / gn)
    assert np.allclose(c.gamma_ip, cfg.eta * ch.h_hs * ch.h_sp / gn)
    assert np.allclose(c.theta, cfg.p_primary * ch.h_ps / ch.h_hs)
    assert c.q1 == pytest.approx(math.log1p(c.gamma_p))
    assert c.q2 == pytest.approx(c.q2_each.min())
    top = derive_coefficients(ch, cfg, 1)
    assert top.q2 == pytest.approx(c.q2_each.max())
    with pytest.raises(ValueError):
        derive_coefficients(ch, cfg, 5)


def test_harvest_example():
    cfg = ScenarioConfig(n_su=1, eta=0.5, p_hap=0.1, p_primary=0.1)
    ch = ChannelState(1.0, np.ones(1), np.ones(1), np.ones(1), np.ones(1))
    assert harvested_energy(0, 0.5, ch, cfg) == pytest.approx(0.05)
    assert harvested_energy(0, 0.0, ch, cfg) == 0.0


def test_primary_rate_example():
    # gamma_p = e - 1 with no relaying: 0.2 + 0.3 = 0.5
    cfg, ch = channels_from_coefficients(math.e - 1, [1], [1], [0.01], 0.1, 1)
    a = Allocation(0.2, 0.3, np.zeros(1), np.zeros(1), np.zeros(1))
    assert primary_coop_rate(a, ch, cfg) == pytest.approx(0.5)


def test_su_rate():
    assert su_rate(0.5, (math.e - 1) * 0.5, 1.0) == pytest.approx(0.5)
    assert su_rate(0.5, 0.0, 3.0) == 0.0
    assert su_rate(0.0, 1.0, 3.0) == 0.0


@given(st.floats(0.01, 5), st.lists(st.floats(0.1, 5), min_size=1, max_size=3),
       st.floats(0.001, 0.05), st.floats(0.01, 1.0))
def test_coefficient_roundtrip(gp, gip, theta, pe):
    n = len(gip)
    gih = [x * 0.7 for x in gip]
    cfg, ch = channels_from_coefficients(gp, gip, gih, [theta] * n, pe, 0.5)
    c = derive_coefficients(ch, cfg)
    assert c.gamma_p == pytest.approx(gp)
    assert np.allclose(c.gamma_ip, gip) and np.allclose(c.gamma_ih, gih)
    assert np.allclose(c.budget, pe + theta)
