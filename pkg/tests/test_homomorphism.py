#!/usr/bin/env python3
"""
同态检查、商构造、损失界与映射复合测试
"""

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.domains.generators import (
    DOOR_AT_DOOR,
    GET_KEY,
    door_key_grid_with_map,
    door_module,
    email_password_with_map,
    planted_quotient,
    random_mdp,
)
from src.errors import (
    EmptyScopeError,
    EndpointMismatchError,
    InconsistentInterfaceError,
    MdpValidationError,
    UnmappedMassError,
)
from src.homomorphism.checks import (
    check_homomorphism,
    compose_maps,
    loss_bound,
    merge_certificates,
    pushforward,
    pushforward_partial,
    quotient,
    restrict_scope,
    tv_distance,
)
from src.homomorphism.map_format import format_certificate
from src.homomorphism.maps import ROLE_ANALOGY, HomomorphismMap
from src.mdp_core.mdp import GroundMdp
from src.mdp_core.solvers import optimal_values


def planted(seed, noise=0.0, abstract_states=None, blowup=None):
    abstract_states = abstract_states or 2 + seed % 7
    blowup = blowup or 1 + seed % 5
    abstract = random_mdp(abstract_states, 2, min(2, abstract_states), 0.5, seed, mdp_id=f"abstract-{seed}")
    ground, hom_map = planted_quotient(abstract, blowup, noise, seed)
    return ground, abstract, hom_map


def test_pushforward_sums_block_mass():
    assert pushforward({0: 0.25, 1: 0.25, 2: 0.5}, {0: 7, 1: 7, 2: 8}) == {7: 0.5, 8: 0.5}


def test_pushforward_rejects_unmapped_mass():
    with pytest.raises(UnmappedMassError) as info:
        pushforward({0: 0.5, 3: 0.5}, {0: 0})
    assert info.value.states == (3,)


def test_tv_distance_counts_unmapped_mass_as_extra_atom():
    pushed, unmapped = pushforward_partial({0: 0.5, 3: 0.5}, {0: 0})
    assert unmapped == 0.5
    assert tv_distance(pushed, {0: 1.0}, unmapped) == pytest.approx(0.5)
    assert tv_distance({0: 1.0}, {1: 1.0}) == 1.0


def test_identity_map_is_strict():
    mdp = door_module()
    cert = check_homomorphism(mdp, mdp, HomomorphismMap.identity(mdp))
    assert cert.strict
    assert cert.coverage_fraction == 1.0
    assert cert.total_deviation == 0.0


def test_email_map_strictly_onto_door_module():
    email, email_map = email_password_with_map(1)
    cert = check_homomorphism(email, door_module(), email_map)
    assert cert.strict and cert.commutes
    assert cert.uncovered_actions == ()
    assert cert.coverage_fraction == 1.0
    email_map.validate(email, door_module(), require_onto=True)


def test_grid_map_commutes_but_misses_abstract_actions():
    door = door_module()
    grid, grid_map = door_key_grid_with_map(2, 2, (1, 0), (1, 1))
    cert = check_homomorphism(grid, door, grid_map)
    assert cert.commutes
    assert cert.total_deviation == 0.0
    assert not cert.strict
    # 起点 (0,0) 不在钥匙格，没有动作映到 get-key
    assert (0, GET_KEY) in cert.uncovered_actions
    with pytest.raises(MdpValidationError):
        grid_map.validate(grid, door, require_onto=True)


def test_longer_recall_commutes_but_only_last_step_fetches_key():
    email, email_map = email_password_with_map(3)
    cert = check_homomorphism(email, door_module(), email_map)
    assert cert.commutes and not cert.strict
    assert cert.uncovered_actions == ((0, GET_KEY), (1, GET_KEY))
    fetches = [s for (s, a), abar in email_map.g.items() if abar == GET_KEY]
    assert fetches == [2]


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


def test_missing_abstract_action_blocks_strictness():
    ground, abstract = lopsided_pair()
    hom_map = HomomorphismMap.create(ground.mdp_id, abstract.mdp_id,
                                     {0: 0, 1: 1, 2: 2}, {(0, 0): 0, (0, 1): 1, (1, 1): 1})
    cert = check_homomorphism(ground, abstract, hom_map)
    assert cert.commutes
    assert not cert.strict
    assert cert.uncovered_actions == ((1, 0),)
    assert "uncovered 1 0" in format_certificate(cert).splitlines()
    hom_map.validate(ground, abstract)
    with pytest.raises(MdpValidationError):
        hom_map.validate(ground, abstract, require_onto=True)


def test_onto_validation_needs_reachable_abstract_states_in_image():
    door = door_module()
    email, email_map = email_password_with_map(1)
    # 去掉 typed 后，has-pwd 的 type-password 在抽象侧到达的 at-door 不在像里
    f = {s: x for s, x in email_map.f.items() if s != 2}
    g = {pair: x for pair, x in email_map.g.items() if pair[0] != 2}
    narrowed = HomomorphismMap.create(email.mdp_id, door.mdp_id, f, g)
    assert narrowed.unreached_states(door) == [DOOR_AT_DOOR]
    with pytest.raises(MdpValidationError):
        narrowed.validate(email, door, require_onto=True)


def test_planted_quotients_are_strict_and_commute():
    for seed in range(100):
        ground, abstract, hom_map = planted(seed)
        cert = check_homomorphism(ground, abstract, hom_map)
        assert cert.strict, seed
        for (s, a) in hom_map.scope:
            pushed = pushforward(ground.successors(s, a), hom_map.f)
            target = abstract.successors(hom_map.f[s], hom_map.g[(s, a)])
            for x in set(pushed) | set(target):
                assert abs(pushed.get(x, 0.0) - target.get(x, 0.0)) <= 1e-9


def test_loss_bound_holds_on_noisy_instances():
    violations = 0
    for seed in range(100):
        noise = (0.05, 0.1, 0.2)[seed % 3]
        ground, abstract, hom_map = planted(seed, noise)
        cert = check_homomorphism(ground, abstract, hom_map)
        bound = loss_bound(cert, ground.discount, ground.reward_range())
        v_ground = optimal_values(ground).values
        v_abstract = optimal_values(abstract).values
        for s in hom_map.scope_states:
            if abs(v_ground[s] - v_abstract[hom_map.f[s]]) > bound:
                violations += 1
    assert violations == 0


def test_loss_bound_is_zero_for_strict_map():
    ground, abstract, hom_map = planted(3)
    assert loss_bound(check_homomorphism(ground, abstract, hom_map), 0.9, 1.0) <= 1e-8


def test_restricting_scope_never_increases_deviation():
    ground, abstract, hom_map = planted(11, 0.1)
    full = check_homomorphism(ground, abstract, hom_map)
    half = sorted(hom_map.scope)[: len(hom_map.scope) // 2]
    smaller = check_homomorphism(ground, abstract, restrict_scope(hom_map, half))
    assert smaller.max_reward_deviation <= full.max_reward_deviation
    assert smaller.max_transition_deviation <= full.max_transition_deviation
    assert smaller.coverage_fraction < full.coverage_fraction


def test_empty_scope_is_rejected():
    mdp = door_module()
    empty = HomomorphismMap.create(mdp.mdp_id, mdp.mdp_id, {0: 0}, {(0, 0): 0}, [])
    with pytest.raises(EmptyScopeError):
        check_homomorphism(mdp, mdp, empty)


def test_endpoint_mismatch_is_rejected():
    grid, grid_map = door_key_grid_with_map(2, 1, (0, 0), (1, 0))
    email, _ = email_password_with_map()
    with pytest.raises(EndpointMismatchError):
        check_homomorphism(email, door_module(), grid_map)


def test_map_scope_must_lie_inside_g():
    with pytest.raises(MdpValidationError):
        HomomorphismMap.create("a", "b", {0: 0}, {(0, 0): 0}, [(0, 1)])


def test_quotient_of_planted_partition_is_strict():
    ground, abstract, hom_map = planted(5, blowup=3)
    blocks = {}
    for s, x in hom_map.f.items():
        blocks.setdefault(x, []).append(s)
    q_mdp, q_map, cert = quotient(ground, blocks.values(), hom_map.g)
    assert cert.strict
    assert q_mdp.state_count == abstract.state_count
    assert q_mdp.mdp_id == f"{ground.mdp_id}~q"


def test_quotient_of_singletons_is_isomorphic_copy():
    mdp = door_module()
    q_mdp, q_map, cert = quotient(mdp, [[s] for s in mdp.states])
    assert cert.strict
    assert q_mdp.transitions == mdp.transitions
    assert q_mdp.terminal_states == mdp.terminal_states


def test_quotient_rejects_inconsistent_action_sets():
    mdp = door_module()
    with pytest.raises(InconsistentInterfaceError) as info:
        quotient(mdp, [[0, 2], [1], [3]])
    assert info.value.block == (0, 2)


def test_quotient_requires_full_partition():
    with pytest.raises(MdpValidationError):
        quotient(door_module(), [[0], [1], [2]])


def test_quotient_averages_noisy_members():
    ground = GroundMdp.build(
        "pair", 3, 0.9,
        {(0, 0): {2: 1.0}, (1, 0): {2: 1.0}},
        {(0, 0): 1.0, (1, 0): 0.0},
    )
    q_mdp, _, cert = quotient(ground, [[0, 1], [2]])
    assert q_mdp.reward(0, 0) == pytest.approx(0.5)
    assert not cert.strict
    assert cert.max_reward_deviation == pytest.approx(0.5)


def test_compose_maps_chains_abstraction_with_analogy():
    email, email_map = email_password_with_map()
    door = door_module()
    grid, grid_map = door_key_grid_with_map(2, 1, (0, 0), (1, 0))
    # 门模块到门模块的恒等类比，复合后仍是严格映射
    analogy = HomomorphismMap.create(door.mdp_id, door.mdp_id, {s: s for s in door.states},
                                     {p: p[1] for p in door.available_pairs()}, None, ROLE_ANALOGY)
    composed = compose_maps(analogy, email_map)
    assert composed.source_ground == email.mdp_id
    assert check_homomorphism(email, door, composed).strict
    with pytest.raises(EndpointMismatchError):
        compose_maps(email_map, grid_map)


def test_merge_certificates_takes_union_and_max():
    ground, abstract, hom_map = planted(8, 0.1)
    pairs = sorted(hom_map.scope)
    first = check_homomorphism(ground, abstract, restrict_scope(hom_map, pairs[:3]))
    second = check_homomorphism(ground, abstract, restrict_scope(hom_map, pairs[3:]))
    merged = merge_certificates([first, second], len(ground.transitions))
    whole = check_homomorphism(ground, abstract, hom_map)
    assert merged.max_transition_deviation == pytest.approx(whole.max_transition_deviation)
    assert merged.coverage_fraction == pytest.approx(whole.coverage_fraction)
