import dataclasses

import numpy as np
import pytest

from agvsched.control import AgvRecord, AgvStatus, Pose, TrackSpec
from agvsched.scheduler import PolicyKind
from agvsched.simulator import InitialPopulation, SimConfig, agv_streams, classify, run


def small(**kw):
    base = dict(total_ticks=1500, arrival_rate=6e-3, seed=3)
    base.update(kw)
    return SimConfig(**base)


def test_classify_boundaries():
    a = AgvRecord(0, 0, 100, TrackSpec(), Pose(0, 0, 0), error=0.02)
    assert classify(a, 0.02, 10) is AgvStatus.UNSTABLE
    a.error, a.delta = 0.0, 10
    assert classify(a, 0.02, 10) is AgvStatus.UNSTABLE
    a.delta = 9
    assert classify(a, 0.02, 10) is AgvStatus.ACTIVE
    assert classify(a, 0.02, 10, tick=100) is AgvStatus.SUCCESSFUL
    a.error = 0.0199
    assert classify(a, 0.02, 10, tick=99) is AgvStatus.ACTIVE


@pytest.mark.parametrize("policy", list(PolicyKind))
def test_conservation_and_ru_range(policy):
    s = run(small(policy=policy))
    assert s.arrived == s.successful + s.unstable + s.active_at_end
    assert s.unstable == s.unstable_by_error + s.unstable_by_losses
    assert len(s.outcomes) == s.successful + s.unstable
    assert np.all((0 <= s.ru_pct) & (s.ru_pct <= 100))


def test_deterministic():
    a = run(small(), trace=True)
    b = run(small(), trace=True)
    assert np.array_equal(a.ru_pct, b.ru_pct)
    assert a.trace == b.trace
    assert a.outcomes == b.outcomes


def test_seed_changes_run():
    assert not np.array_equal(run(small()).ru_pct, run(small(seed=4)).ru_pct)


def test_replicate_changes_run():
    assert not np.array_equal(run(small()).ru_pct, run(small(replicate=1)).ru_pct)


def test_common_random_numbers_across_policies():
    a = run(small(policy=PolicyKind.MAX_SNR))
    b = run(small(policy=PolicyKind.ERROR_FIRST))
    assert a.arrived == b.arrived


def test_agv_streams_independent():
    x = [g.random() for g in agv_streams(0, 0, 5)]
    y = [g.random() for g in agv_streams(0, 0, 6)]
    assert len(set(x + y)) == 6


@pytest.mark.parametrize("policy", list(PolicyKind))
def test_ideal_channel_has_no_unstable(policy):
    s = run(small(policy=policy, ideal_channel=True, arrival_rate=4e-3, total_ticks=3000))
    assert s.unstable == 0
    assert s.arrived > 0


def test_empty_start():
    s = run(small(initial_population=InitialPopulation.EMPTY, arrival_rate=0.0, total_ticks=50))
    assert s.arrived == 0
    assert s.mean_ru_pct == 0.0


def test_stationary_start_population():
    s = run(small(arrival_rate=8e-3, total_ticks=1), trace=True)
    assert s.trace[0][1] == s.arrived > 5


def test_trace_columns():
    s = run(small(total_ticks=20), trace=True)
    assert len(s.trace) == 20
    tick, n_active, n_sched, rb, ru, fb = s.trace[7]
    assert tick == 7
    assert n_sched <= n_active
    assert ru == pytest.approx(100.0 * rb / 60)
    assert s.ru_pct[7] == ru


def test_audit_clean():
    s = run(small(audit=True, total_ticks=800))
    assert s.audit_violations == []


def test_validate_reports_all_problems():
    cfg = dataclasses.replace(SimConfig(), arrival_rate=-1.0, n_rb=-1, eps_th=0.0)
    keys = {k for k, _ in cfg.validate()}
    assert {"arrival_rate", "n_rb", "eps_th"} <= keys
    with pytest.raises(ValueError, match="arrival_rate"):
        run(cfg)


def test_with_values_and_flat_items():
    cfg = SimConfig().with_values(n_rb=30)
    assert cfg.n_rb == 30
    items = dict(cfg.flat_items())
    assert items["n_rb"] == 30
    assert "radio.tx_power" in items
