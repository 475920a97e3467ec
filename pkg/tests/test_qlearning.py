import math
import random

import numpy as np
import pytest

from tschsim.agent import (LISTEN, SKIP, Agent, AgentConfig, AgentError, FrozenTableError,
                           QTable, Rewards, apply_penalties, expected_reward, q_update,
                           select_action)

R = Rewards()


def test_expected_reward_examples():
    assert expected_reward(SKIP, 0.2, R) == pytest.approx(0.2, abs=1e-15)
    assert expected_reward(LISTEN, 0.2, R) == pytest.approx(-0.2, abs=1e-15)
    assert expected_reward(LISTEN, 0.001, R) == pytest.approx(-0.4985, abs=1e-15)


def test_indifference_point():
    p = 1.0 / 3.0
    assert abs(expected_reward(SKIP, p, R) - expected_reward(LISTEN, p, R)) < 1e-9
    assert expected_reward(SKIP, 0.3, R) > expected_reward(LISTEN, 0.3, R)
    assert expected_reward(SKIP, 0.4, R) < expected_reward(LISTEN, 0.4, R)


def test_penalties():
    cfg = AgentConfig()
    assert apply_penalties(0.2, 0, 2, cfg) == pytest.approx(0.0)
    assert apply_penalties(0.2, 1, 0, cfg) == pytest.approx(-0.8)
    assert apply_penalties(0.2, 3, 1, cfg) == pytest.approx(-0.9)


def test_q_update_example():
    q = QTable.zeros(2)
    q.values[0, SKIP] = 1.0
    q.values[1] = [2.0, 0.0]
    new = q_update(q, 0, SKIP, 0.0, 1, alpha=0.15, gamma=0.9)
    assert new == pytest.approx(1.12, abs=1e-12)


def test_frozen_table_rejects_updates():
    q = QTable.zeros(4).freeze()
    with pytest.raises(FrozenTableError):
        q_update(q, 0, SKIP, 1.0, 0, 0.15, 0.9)


def test_greedy_ties_go_to_listen():
    q = QTable.zeros(3)
    assert q.greedy(0) == LISTEN
    q.values[1] = [0.5, 0.1]
    assert q.greedy(1) == SKIP


def test_full_exploration_is_fair_coin():
    q = QTable.zeros(1)
    rng = random.Random(5)
    n = 10_000
    skips = sum(select_action(q, 0, 1.0, rng) == SKIP for _ in range(n))
    assert abs(skips - n / 2) <= 3 * math.sqrt(n * 0.25)


def test_values_stored_as_float32():
    q = QTable(np.array([[0.1, 0.2]]))
    assert q.values.dtype == np.float32
    with pytest.raises(ValueError):
        QTable(np.zeros((3, 3)))


# -- agent -----------------------------------------------------------------

def _warm_agent(cfg=AgentConfig(), period=100, q=None):
    ag = Agent(cfg, q, random.Random(3))
    for k in range(3):
        ag.observe(7, 1000 + k * period)
    return ag


def test_empty_neighborhood_listens_without_learning():
    ag = Agent(AgentConfig(), None, random.Random(0))
    assert ag.on_rx_slot(10, []) == LISTEN
    ag.report_outcome(10, False)
    assert not ag.q.values.any()


def test_skip_path_does_one_update_with_same_state():
    cfg = AgentConfig(eps0=1.0)
    ag = _warm_agent(cfg)
    rng = random.Random(0)
    ag.rng = rng
    asn = 1250
    for _ in range(50):
        before = ag.q.values.copy()
        a = ag.on_rx_slot(asn, [7])
        diff = np.argwhere(ag.q.values != before)
        if a == SKIP:
            assert len(diff) == 1 and diff[0][1] == SKIP
        else:
            assert len(diff) == 0   # deferred until the outcome is reported
            ag.report_outcome(asn, False)
        asn += 17


def test_listen_outcome_reward():
    cfg = AgentConfig(eps0=0.0, eps_min=0.0)
    ag = _warm_agent(cfg)
    assert ag.on_rx_slot(1300, [7]) == LISTEN     # tie -> listen
    assert not ag.q.values.any()
    ag.report_outcome(1300, True, 7)
    nz = ag.q.values[ag.q.values != 0]
    assert nz.tolist() == [pytest.approx(0.15 * R.r_succ)]


def test_report_without_decision_is_an_error():
    ag = _warm_agent(AgentConfig(eps0=0.0, eps_min=0.0))
    with pytest.raises(AgentError):
        ag.report_outcome(1300, True)
    assert ag.on_rx_slot(1300, [7]) == LISTEN
    ag.report_outcome(1300, False)
    with pytest.raises(AgentError):
        ag.report_outcome(1300, False)


def test_epsilon_decay_and_floor():
    cfg = AgentConfig(episode_len=1)
    ag = Agent(cfg, None, random.Random(0))
    assert ag.epsilon == 1.0
    ag.end_episode(True)
    assert ag.epsilon == pytest.approx(0.997)
    for k in range(2, 1000):
        ag.end_episode(True)
        if k == 997:
            assert ag.epsilon > 0.05
        if k == 998:
            assert ag.epsilon == 0.05   # the 998th decay lands on the floor
    # records carry the rate used during each episode
    assert ag.history[997].epsilon > 0.05 and ag.history[998].epsilon == 0.05


def test_terminal_bonus_in_recorded_return():
    ag = Agent(AgentConfig(), None, random.Random(0))
    ag.episode.ret = 10.0
    rec = ag.end_episode(True)
    assert rec.ret == 15.0
    ag.episode.ret = 10.0
    assert ag.end_episode(False).ret == 5.0


def test_rolling_window_mean():
    ag = Agent(AgentConfig(rolling_window=3), None, random.Random(0))
    for r in (1.0, 2.0, 3.0, 4.0):
        ag.episode.ret = r - 5.0
        rec = ag.end_episode(True)
    assert rec.rolling_mean == pytest.approx(3.0)


def test_frozen_agent_never_writes():
    q = QTable(np.random.default_rng(0).normal(size=(640, 2))).freeze()
    ag = _warm_agent(AgentConfig(), q=q)
    before = q.values.copy()
    asn = 1250
    for _ in range(200):
        if ag.on_rx_slot(asn, [7]) == LISTEN:
            ag.report_outcome(asn, False)
        asn += 17
    assert np.array_equal(before, q.values)
    assert ag.history == []
