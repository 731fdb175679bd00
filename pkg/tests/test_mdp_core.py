#!/usr/bin/env python3
"""
MDP、求解器与策略评估测试
"""

import os
import sys

import numpy as np
import pytest

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.domains.generators import door_module, two_room
from src.errors import CoverageGapError, MdpValidationError, PairingMismatchError
from src.mdp_core.mdp import GroundMdp, Policy, ValueFunction
from src.mdp_core.solvers import (
    greedy_policy,
    optimal_values,
    policy_evaluation,
    q_values,
    reachable_states,
    value_iteration,
)


def chain(discount=0.9):
    """0 -a0-> 1 -a0-> 2(终止)，第二步奖励1；状态0还有一个自环动作"""
    return GroundMdp.build(
        mdp_id="chain",
        state_count=3,
        discount=discount,
        transitions={(0, 0): {1: 1.0}, (0, 1): {0: 1.0}, (1, 0): {2: 1.0, 0: 0.0}},
        rewards={(0, 0): 0.0, (0, 1): 0.0, (1, 0): 1.0},
    )


def test_build_drops_zero_probability_and_derives_terminals():
    mdp = chain()
    assert mdp.successors(1, 0) == {2: 1.0}
    assert mdp.terminal_states == frozenset({2})
    assert mdp.actions(0) == (0, 1)
    assert mdp.is_terminal(2)


def test_probability_rows_must_sum_to_one():
    with pytest.raises(MdpValidationError):
        GroundMdp.build("bad", 2, 0.9, {(0, 0): {1: 0.9}}, {(0, 0): 0.0})


def test_terminal_state_with_actions_rejected():
    with pytest.raises(MdpValidationError):
        GroundMdp.build("bad", 2, 0.9, {(0, 0): {1: 1.0}}, {(0, 0): 0.0}, terminal_states=[0, 1])


def test_discount_must_be_below_one():
    with pytest.raises(MdpValidationError):
        GroundMdp.build("bad", 2, 1.0, {(0, 0): {1: 1.0}}, {(0, 0): 0.0})


def test_value_iteration_on_door_module():
    mdp = door_module(0.95)
    result = value_iteration(mdp, 1e-10)
    assert result.converged
    assert result.values[3] == 0.0
    assert result.values[2] == pytest.approx(1.0, abs=1e-9)
    assert result.values[1] == pytest.approx(0.95, abs=1e-9)
    assert result.values[0] == pytest.approx(0.9025, abs=1e-9)
    assert result.backups == result.sweeps_used * len(mdp.transitions)


def test_value_iteration_stops_within_tolerance_of_fixed_point():
    mdp = two_room(3, 0.95)
    result = value_iteration(mdp, 1e-8)
    exact = 0.95 ** 5
    assert abs(result.values[0] - exact) <= 1e-8
    assert result.residuals[-1] <= 1e-8 * 0.05 / 0.95


def test_warm_start_from_optimum_converges_in_two_sweeps():
    mdp = two_room(4)
    optimum = optimal_values(mdp).values
    warm = value_iteration(mdp, init=optimum)
    cold = value_iteration(mdp)
    assert warm.sweeps_used <= 2
    assert warm.backups < cold.backups


def test_warm_start_zeroes_terminal_states():
    mdp = chain()
    init = ValueFunction(np.array([0.0, 0.0, 50.0]), "something-else")
    result = value_iteration(mdp, init=init)
    assert result.values[2] == 0.0
    assert result.values[0] == pytest.approx(0.9, abs=1e-7)


def test_zero_discount_returns_immediate_rewards():
    mdp = chain(discount=0.0)
    result = value_iteration(mdp)
    assert result.values[1] == 1.0
    assert result.values[0] == 0.0


def test_greedy_policy_breaks_ties_with_smallest_action():
    mdp = GroundMdp.build("tie", 2, 0.9, {(0, 0): {1: 1.0}, (0, 1): {1: 1.0}},
                          {(0, 0): 1.0, (0, 1): 1.0})
    policy = greedy_policy(mdp, value_iteration(mdp).values)
    assert policy.action(0) == 0


def test_greedy_policy_requires_paired_values():
    mdp = chain()
    with pytest.raises(PairingMismatchError):
        greedy_policy(mdp, ValueFunction(np.zeros(3), "other"))


def test_q_values_cover_available_pairs_only():
    mdp = door_module()
    q = q_values(mdp, optimal_values(mdp).values)
    assert set(q) == set(mdp.transitions)
    assert q[(2, 2)] == pytest.approx(1.0)


def test_policy_evaluation_matches_closed_form():
    mdp = two_room(2, 0.9)
    policy = Policy.deterministic({s: 0 for s in range(4)})
    values = policy_evaluation(mdp, policy)
    for s in range(4):
        assert values[s] == pytest.approx(0.9 ** (3 - s))


def test_policy_evaluation_reports_reachable_gaps():
    mdp = chain()
    policy = Policy.deterministic({0: 0})
    with pytest.raises(CoverageGapError) as info:
        policy_evaluation(mdp, policy)
    assert info.value.states == (1,)


def test_unreached_states_do_not_need_a_policy():
    mdp = chain()
    policy = Policy.deterministic({1: 0})
    values = policy_evaluation(mdp, policy, starts=[1])
    assert values[1] == pytest.approx(1.0)
    assert values[0] == 0.0


def test_stochastic_policy_evaluation():
    mdp = chain(0.5)
    policy = Policy.stochastic({0: {0: 0.5, 1: 0.5}, 1: {0: 1.0}})
    values = policy_evaluation(mdp, policy)
    # V0 = 0.5 * 0.5 * V1 + 0.5 * 0.5 * V0，V1 = 1
    assert values[0] == pytest.approx(0.25 / 0.75)


def test_reachable_states_follow_policy():
    mdp = chain()
    reach, gaps = reachable_states(mdp, Policy.deterministic({0: 1}), [0])
    assert reach == [0]
    assert gaps == []


def test_optimal_values_policy_is_greedy_and_exact():
    mdp = door_module()
    solution = optimal_values(mdp)
    assert solution.policy.choice == {0: 0, 1: 1, 2: 2}
    assert solution.values[0] == pytest.approx(0.9025, abs=1e-12)


def test_value_function_equality_and_pairing():
    a = ValueFunction(np.array([1.0, 2.0]), "m")
    b = ValueFunction([1.0, 2.0], "m")
    assert a == b
    assert a != ValueFunction([1.0, 2.0], "n")
    with pytest.raises(ValueError):
        a.values[0] = 3.0
