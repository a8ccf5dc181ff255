import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wpccrn.harness import (CSV_COLUMNS, Record, SweepSpec, aggregate, evaluate_realization, failure_breaches,
                            jain_index, prob_cooperation, run_sweep, write_csv, write_manifest)
from wpccrn.scenario import ConfigError, ScenarioConfig
from wpccrn.stora import SchemeResult


def test_jain_examples():
    assert jain_index([3.0] * 4) == pytest.approx(1.0)
    assert jain_index([2.0, 0, 0, 0]) == pytest.approx(0.25)
    assert jain_index([1, 2, 3]) == pytest.approx(6 / 7)
    with pytest.raises(ValueError):
        jain_index([0, 0, 0])
    with pytest.raises(ValueError):
        jain_index([])


@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=10).filter(lambda x: sum(x) > 1e-100))
def test_jain_bounds(x):
    j = jain_index(x)
    assert 1 / len(x) - 1e-12 <= j <= 1 + 1e-12


def _res(feasible):
    return SchemeResult.infeasible("STORA", 2) if not feasible else \
        SchemeResult("STORA", True, None, None, np.ones(2), 2.0, 1.0)


def test_prob_cooperation():
    assert prob_cooperation([_res(True)] * 3) == 1
    assert prob_cooperation([_res(False)] * 3) == 0
    assert prob_cooperation([_res(True)] * 1500 + [_res(False)] * 500) == 0.75
    with pytest.raises(ValueError):
        prob_cooperation([])


def test_spec_validation():
    with pytest.raises(ConfigError):
        SweepSpec("eta", (1.0,))
    with pytest.raises(ConfigError):
        SweepSpec("n_su", (3, 2))
    with pytest.raises(ConfigError):
        SweepSpec("n_su", (2,), schemes=("FOO",))
    with pytest.raises(ConfigError):
        SweepSpec("n_su", ())


def test_aggregate_rules():
    ok = Record(True, False, 2.0, 1.0, 0.8, 0.1, 0.5)
    infeas = Record(False, False, 0.0, 0.0, math.nan, 0.0, 0.0)
    failed = Record(False, True, 0.0, 0.0, math.nan, 0.0, 0.0)
    st_ = aggregate([ok, infeas, failed])
    assert st_.failures == 1 and st_.count == 3
    assert st_.mean_sum_throughput == pytest.approx(1.0)  # infeasible counts as zero
    assert st_.jain_mean == pytest.approx(0.8)  # and is left out of fairness
    assert st_.p_coop == pytest.approx(0.5)
    assert st_.mean_t0 == pytest.approx(0.1)


def test_single_realization_deterministic():
    spec = SweepSpec("target_primary_rate", (1.5,), 1, seed=3)
    a = run_sweep(spec, ScenarioConfig())
    b = run_sweep(spec, ScenarioConfig())
    assert a[0].stats["STORA"].mean_sum_throughput == b[0].stats["STORA"].mean_sum_throughput
    assert a[0].stats["STORA"].stderr == 0.0


def test_paired_dominance_per_realization():
    cfg = ScenarioConfig(target_primary_rate=3.0)
    for k in range(15):
        rec = evaluate_realization(cfg, k, 5, ("STORA", "ETA", "MTM", "PTA", "BSS", "RSS-S", "RSS-M"))
        for s, r in rec.items():
            assert not r.failed
            assert r.sum_throughput <= rec["STORA"].sum_throughput + 1e-4
        assert rec["RSS-M"].feasible == rec["STORA"].feasible


def test_csv_and_manifest(tmp_path):
    spec = SweepSpec("n_su", (2, 3), 3, ("STORA", "MTM"), seed=1)
    pts = run_sweep(spec, ScenarioConfig())
    write_csv(pts, tmp_path / "a.csv")
    write_manifest(tmp_path / "a.json", spec, ScenarioConfig())
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0].split(",") == list(CSV_COLUMNS)
    assert len(lines) == 1 + 4
    m = json.loads((tmp_path / "a.json").read_text())
    assert m["seed"] == 1 and m["config"]["eta"] == 0.5 and m["sweep"]["values"] == [2, 3]
    assert "jain" in m["aggregation"]


def test_jobs_do_not_change_output(tmp_path):
    spec = SweepSpec("target_primary_rate", (1.0, 3.0), 12, ("STORA", "PTA", "RSS-S"), seed=4)
    write_csv(run_sweep(spec, ScenarioConfig()), tmp_path / "a.csv")
    write_csv(run_sweep(spec, ScenarioConfig(), jobs=3), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_failure_breach_detection():
    from wpccrn.harness import SchemeStats, SweepPoint
    pt = SweepPoint(1.0, {"MTM": SchemeStats(1, 0, 1, 0, 1, 0, 0, 1, 100)})
    assert failure_breaches([pt]) == [(1.0, "MTM", 1, 100)]
    pt.stats["MTM"].failures = 0
    assert failure_breaches([pt]) == []
