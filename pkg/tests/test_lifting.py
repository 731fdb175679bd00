#!/usr/bin/env python3
"""
策略提升、热启动值与迁移评估测试
"""

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.domains.generators import (
    door_key_grid_with_map,
    door_module,
    email_password_with_map,
    planted_quotient,
    random_mdp,
)
from src.analogy.search import find_homomorphism
from src.errors import CoverageGapError, MissingAbstractChoiceError, PairingMismatchError
from src.homomorphism.checks import check_homomorphism, loss_bound
from src.homomorphism.maps import HomomorphismMap
from src.lifting.lifter import complete_policy, lift_policy, lift_values, transfer_report
from src.mdp_core.mdp import GroundMdp, Policy, ValueFunction
from src.mdp_core.solvers import optimal_values, value_iteration


def planted(seed):
    abstract = random_mdp(3 + seed % 6, 2, 2, 0.5, seed, mdp_id=f"abstract-{seed}")
    ground, hom_map = planted_quotient(abstract, 1 + seed % 3, 0.0, seed)
    return ground, abstract, hom_map


def two_choice(login_reward):
    """一步决策：动作0奖励 login_reward，动作1奖励0.5，都进入终止状态"""
    return GroundMdp.build(
        mdp_id=f"two-choice-{login_reward}", state_count=2, discount=0.9,
        transitions={(0, 0): {1: 1.0}, (0, 1): {1: 1.0}},
        rewards={(0, 0): login_reward, (0, 1): 0.5},
    )


def test_lifted_optimum_is_optimal_on_planted_instances():
    for seed in range(100):
        ground, abstract, hom_map = planted(seed)
        lifted = lift_policy(optimal_values(abstract).policy, hom_map, ground)
        assert not lifted.gaps
        report = transfer_report(ground, lifted)
        assert not report.warning
        assert report.optimality_gap <= 2e-8, seed


def test_lifting_a_found_strict_map_is_optimal():
    door = door_module()
    email, _ = email_password_with_map()
    instances = [(email, door)] + [planted(seed)[:2] for seed in range(30)]
    for ground, abstract in instances:
        result = find_homomorphism(ground, abstract)
        if not result.found:
            continue
        assert result.certificate.strict
        lifted = lift_policy(optimal_values(abstract).policy, result.best_map, ground)
        assert not lifted.gaps, ground.mdp_id
        report = transfer_report(ground, lifted)
        assert report.optimality_gap <= 2e-8, ground.mdp_id


def test_optimality_gap_grows_with_reward_deviation():
    abstract = two_choice(1.0)
    gaps = []
    for deviation in (0.0, 0.25, 0.5, 0.75, 1.0):
        ground = two_choice(1.0 - deviation)
        hom_map = HomomorphismMap.create(ground.mdp_id, abstract.mdp_id, {0: 0, 1: 1}, {(0, 0): 0, (0, 1): 1})
        cert = check_homomorphism(ground, abstract, hom_map)
        assert cert.max_reward_deviation == pytest.approx(deviation)
        lifted = lift_policy(optimal_values(abstract).policy, hom_map, ground)
        gap = transfer_report(ground, lifted).optimality_gap
        assert gap <= loss_bound(cert, abstract.discount, abstract.reward_range()) + 1e-9
        gaps.append(gap)
    assert gaps == sorted(gaps)
    assert gaps[0] <= 2e-8
    # 偏差超过两个动作的奖励差之后，提升的策略开始吃亏
    assert gaps[-1] == pytest.approx(0.5)


def test_door_policy_transfers_to_email_task():
    door = door_module()
    email, email_map = email_password_with_map()
    lifted = lift_policy(optimal_values(door).policy, email_map, email)
    assert lifted.base.choice == {0: 0, 1: 1, 2: 2}
    ground_return, gap = transfer_report(email, lifted)
    assert gap <= 2e-8
    assert ground_return[0] == pytest.approx(0.95 ** 2)


def test_door_policy_transfers_to_grid():
    door = door_module()
    grid, grid_map = door_key_grid_with_map(3, 3, (2, 0), (2, 2))
    lifted = lift_policy(optimal_values(door).policy, grid_map, grid)
    report = transfer_report(grid, lifted)
    # 抽象层面"拿钥匙"只在钥匙格可执行，其余 locked 状态没有对应动作
    assert report.warning
    assert 0 in report.excluded_states
    assert report.optimality_gap <= 2e-8


def test_missing_abstract_choice_is_reported():
    door = door_module()
    email, email_map = email_password_with_map()
    partial = Policy.deterministic({0: 0, 1: 1})
    with pytest.raises(MissingAbstractChoiceError):
        lift_policy(partial, email_map, email)


def test_lift_rejects_wrong_ground():
    door = door_module()
    email, email_map = email_password_with_map()
    with pytest.raises(PairingMismatchError):
        lift_policy(optimal_values(door).policy, email_map, door)


def test_gaps_are_excluded_or_raised():
    door = door_module()
    email, email_map = email_password_with_map(3)
    lifted = lift_policy(optimal_values(door).policy, email_map, email)
    assert lifted.gaps == frozenset({0, 1})
    report = transfer_report(email, lifted)
    assert report.excluded_states == (0, 1)
    assert report.warning
    with pytest.raises(CoverageGapError) as info:
        transfer_report(email, lifted, strict=True)
    assert info.value.states == (0, 1)


def test_complete_policy_plans_in_gap_states():
    door = door_module()
    email, email_map = email_password_with_map(3)
    lifted = lift_policy(optimal_values(door).policy, email_map, email)
    completed = complete_policy(email, lifted)
    assert completed.fallback_states == (0, 1)
    assert completed.policy.choice[0] == 0
    assert completed.backups > 0
    optimum = optimal_values(email)
    assert completed.policy.choice == optimum.policy.choice


def test_complete_policy_without_gaps_is_free():
    door = door_module()
    email, email_map = email_password_with_map()
    lifted = lift_policy(optimal_values(door).policy, email_map, email)
    completed = complete_policy(email, lifted)
    assert completed.backups == 0
    assert completed.fallback_states == ()


def test_lift_values_warm_starts_value_iteration():
    door = door_module()
    email, email_map = email_password_with_map()
    init = lift_values(optimal_values(door).values, email_map, email)
    assert init.paired_mdp == email.mdp_id
    assert init[0] == pytest.approx(0.95 ** 2)
    warm = value_iteration(email, init=init)
    cold = value_iteration(email)
    assert warm.sweeps_used <= 2
    assert warm.backups < cold.backups


def test_lift_values_checks_pairing():
    email, email_map = email_password_with_map()
    with pytest.raises(PairingMismatchError):
        lift_values(ValueFunction([0.0] * 4, "other"), email_map, email)
