#!/usr/bin/env python3
"""
类比搜索、提示、预算与检索测试
"""

import math
import os
import statistics
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.analogy.retrieval import rank_candidates, retrieve_candidates
from src.analogy.search import (
    MODE_PARTIAL,
    MODE_STRICT,
    HintSet,
    SearchBudget,
    find_homomorphism,
    occupancy_weights,
)
from src.analogy.signatures import jaccard, signature_set, state_signature
from src.domains.generators import (
    door_module,
    email_password_with_map,
    planted_quotient,
    random_mdp,
    room_module,
)
from src.errors import HintConflictError, InvalidBudgetError
from src.homomorphism.checks import check_homomorphism
from src.library.modules import Library, Module
from src.mdp_core.mdp import GroundMdp


def planted(seed, noise=0.0):
    """抽象 3 到 8 个状态，每个抽象状态放大 2 或 3 倍，具体状态不超过 24 个"""
    abstract = random_mdp(3 + seed % 6, 2, 2, 0.5, seed, mdp_id=f"abstract-{seed}")
    ground, hom_map = planted_quotient(abstract, 2 + (seed // 6) % 2, noise, seed)
    return ground, abstract, hom_map


def lopsided_pair():
    """抽象 x1 上有两个动作，具体 s1 只保留自环"""
    abstract = GroundMdp.build(
        mdp_id="lopsided-abstract", state_count=3, discount=0.9,
        transitions={(0, 0): {1: 1.0}, (0, 1): {2: 1.0}, (1, 0): {2: 1.0}, (1, 1): {1: 1.0}},
        rewards={(0, 0): 0.0, (0, 1): 0.5, (1, 0): 1.0, (1, 1): 0.0},
    )
    ground = GroundMdp.build(
        mdp_id="lopsided-ground", state_count=3, discount=0.9,
        transitions={(0, 0): {1: 1.0}, (0, 1): {2: 1.0}, (1, 1): {1: 1.0}},
        rewards={(0, 0): 0.0, (0, 1): 0.5, (1, 1): 0.0},
    )
    return ground, abstract


def email_with_weak_login():
    """登录奖励只有0.5的邮箱任务，不存在到门模块的严格映射"""
    email, _ = email_password_with_map()
    rewards = dict(email.rewards)
    rewards[(2, 2)] = 0.5
    return GroundMdp.build(
        "email-weak", email.state_count, email.discount, email.transitions, rewards,
        state_labels=email.state_labels, feature_tags=email.feature_tags, start_states=email.start_states,
    )


def test_signatures_are_invariant_under_strict_map():
    door = door_module()
    email, email_map = email_password_with_map()
    for s, x in email_map.f.items():
        assert state_signature(email, s) == state_signature(door, x)
    assert jaccard(signature_set(email), signature_set(door)) == 1.0


def test_strict_search_recovers_planted_quotients():
    recovered = 0
    for seed in range(100):
        ground, abstract, _ = planted(seed)
        assert abstract.state_count <= 8
        assert ground.state_count <= 30
        result = find_homomorphism(ground, abstract, budget=SearchBudget(max_node_expansions=100000))
        if not result.found:
            continue
        recovered += 1
        assert result.mode == MODE_STRICT
        assert result.certificate.strict, seed
        assert result.certificate.coverage_fraction == 1.0
        assert check_homomorphism(ground, abstract, result.best_map).strict, seed
        result.best_map.validate(ground, abstract, require_onto=True)
    assert recovered >= 95


def test_strict_search_never_certifies_uncovered_abstract_actions():
    ground, abstract = lopsided_pair()
    # s1 只有自环，映到 x1 时 x1 的第一个动作没有原像
    result = find_homomorphism(ground, abstract)
    assert not result.found
    assert result.exhausted

    partial = find_homomorphism(ground, abstract, budget=SearchBudget(mode=MODE_PARTIAL))
    assert partial.found
    assert partial.certificate.uncovered_actions == ()
    assert 1 not in partial.best_map.f
    assert partial.certificate.coverage_fraction == pytest.approx(1 / 3)


def test_strict_search_finds_email_to_door_map():
    door = door_module()
    email, _ = email_password_with_map()
    result = find_homomorphism(email, door)
    assert result.found
    assert result.certificate.coverage_fraction == 1.0
    assert result.best_map.f[3] == 3


def test_strict_search_reports_exhaustion_without_map():
    result = find_homomorphism(email_with_weak_login(), door_module())
    assert not result.found
    assert result.exhausted
    assert result.score == -math.inf


def test_budget_hit_is_not_exhaustion():
    ground, abstract, _ = planted(4)
    result = find_homomorphism(ground, abstract, budget=SearchBudget(max_node_expansions=1))
    assert not result.found
    assert not result.exhausted
    assert result.expansions_used <= 1


def test_hints_reduce_median_expansions():
    plain, hinted = [], []
    for seed in range(100):
        ground, abstract, hom_map = planted(seed)
        unhinted = find_homomorphism(ground, abstract)
        hints = HintSet.from_map(hom_map, fraction=0.5, seed=seed)
        result = find_homomorphism(ground, abstract, hints)
        if result.found:
            for s, x in hints.fixed_state_assignments.items():
                assert result.best_map.f[s] == x
        if not (unhinted.found and result.found):
            continue
        # 两次都在预算内解出时，提示不会增加展开次数
        assert result.expansions_used <= unhinted.expansions_used, seed
        plain.append(unhinted.expansions_used)
        hinted.append(result.expansions_used)
    assert len(plain) >= 95
    assert statistics.median(hinted) < statistics.median(plain)


def test_partial_search_is_anytime_and_deterministic():
    ground, abstract, _ = planted(3, noise=0.1)
    scores = []
    for limit in (50, 200, 1000, 5000):
        budget = SearchBudget(max_node_expansions=limit, mode=MODE_PARTIAL, strict_probe=0)
        first = find_homomorphism(ground, abstract, budget=budget)
        second = find_homomorphism(ground, abstract, budget=budget)
        assert first.expansions_used <= limit
        assert first.expansions_used == second.expansions_used
        assert first.score == second.score
        assert first.best_map == second.best_map
        scores.append(first.score)
    assert scores == sorted(scores)
    assert scores[-1] > -math.inf

    weak = email_with_weak_login()
    weak_scores = [find_homomorphism(weak, door_module(),
                                     budget=SearchBudget(max_node_expansions=limit, mode=MODE_PARTIAL,
                                                         strict_probe=0)).score
                   for limit in (5, 20, 100, 100000)]
    assert weak_scores == sorted(weak_scores)
    assert weak_scores[-1] == pytest.approx(8 / 9)


def test_conflicting_hints_are_rejected():
    with pytest.raises(HintConflictError):
        HintSet.from_pairs([(0, 1), (0, 2)])
    email, _ = email_password_with_map()
    # 非终止状态不能提示到终止状态
    with pytest.raises(HintConflictError):
        find_homomorphism(email, door_module(), HintSet.from_pairs([(0, 3)]))


def test_invalid_budgets_are_rejected():
    with pytest.raises(InvalidBudgetError):
        SearchBudget(max_node_expansions=0)
    with pytest.raises(InvalidBudgetError):
        SearchBudget(mode="fuzzy")
    with pytest.raises(InvalidBudgetError):
        SearchBudget(partial_penalty=-1.0)


def test_budget_scaling_doubles_expansions():
    assert SearchBudget(max_node_expansions=10).scaled(2).max_node_expansions == 20


def test_partial_search_leaves_mismatched_pair_out_of_scope():
    target = email_with_weak_login()
    budget = SearchBudget(mode=MODE_PARTIAL)
    result = find_homomorphism(target, door_module(), budget=budget)
    assert result.found
    assert result.mode == MODE_PARTIAL
    assert (2, 2) not in result.best_map.scope
    assert result.certificate.strict
    assert result.score == pytest.approx(8 / 9)


def test_partial_search_prefers_strict_first_pass():
    email, _ = email_password_with_map()
    result = find_homomorphism(email, door_module(), budget=SearchBudget(mode=MODE_PARTIAL))
    assert result.certificate.strict
    assert result.score == pytest.approx(1.0)


def test_occupancy_weights_favour_optimal_path():
    weights = occupancy_weights(door_module())
    assert max(weights.values()) == 1.0
    assert weights[(0, 0)] > weights[(0, 4)]


def test_csv_row_format():
    email, _ = email_password_with_map()
    result = find_homomorphism(email, door_module())
    row = result.csv_row("door")
    assert row[0] == "door"
    assert row[1] == MODE_STRICT
    assert row[4] == "true"


def test_retrieval_ranks_by_signature_overlap():
    library = Library()
    library.add(Module.from_fragment(room_module(3)))
    library.add(Module.from_fragment(door_module()))
    email, _ = email_password_with_map()
    ranked = rank_candidates(library, email, k=2)
    assert ranked.module_ids == ["door-module", "room-3"]
    assert ranked.comparisons == 2
    assert ranked.scores[0][1] == 1.0
    assert retrieve_candidates(library, email, k=1) == ["door-module"]


def test_retrieval_on_empty_library():
    email, _ = email_password_with_map()
    result = rank_candidates(Library(), email)
    assert result.module_ids == []
    assert result.comparisons == 0
