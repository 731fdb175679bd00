#!/usr/bin/env python3
"""
构念组装、目标评估与构念文件测试
"""

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.composition.construal import CostLedger, FragmentInstance, compose, construal_instance
from src.composition.construal_format import read_construal, write_construal
from src.composition.objective import evaluate_objective
from src.domains.generators import room_module, two_room, two_room_bindings
from src.errors import CompositionConflictError, DanglingEndpointError, EndpointMismatchError
from src.homomorphism.checks import check_homomorphism
from src.homomorphism.maps import HomomorphismMap
from src.mdp_core.solvers import greedy_policy, value_iteration


def rooms(length=2):
    first = FragmentInstance.from_fragment(room_module(length, module_id="room"), "room-a")
    second = FragmentInstance.from_fragment(room_module(length, 1.0, module_id="goal-room"), "room-b")
    return first, second


def two_room_construal(length=2):
    first, second = rooms(length)
    task = two_room(length)
    construal = compose([first, second], [("room-a", length, "room-b", 0)],
                        two_room_bindings(length, task.mdp_id), construal_id="two-room-construal")
    return task, construal


def test_compose_glues_exit_to_entry():
    task, construal = two_room_construal()
    mdp = construal.abstract_mdp
    assert mdp.state_count == 5
    assert mdp.successors(1, 0) == {2: 1.0}
    assert construal.entries == (0, 2)
    assert construal.exits == (4,)
    assert construal.instance_states["room-a"] == {0: 0, 1: 1, 2: 2}
    assert construal.glue == [("room-a", 2, "room-b", 0)]
    assert construal.instance_modules == {"room-a": "room", "room-b": "goal-room"}


def test_composed_binding_is_strict():
    task, construal = two_room_construal(3)
    cert = check_homomorphism(task, construal.abstract_mdp, construal.binding)
    assert cert.strict
    assert cert.coverage_fraction == 1.0
    assert set(construal.instance_bindings) == {"room-a", "room-b"}


def test_solved_construal_lifts_to_optimal_policy():
    task, construal = two_room_construal(3)
    result = value_iteration(construal.abstract_mdp)
    policy = greedy_policy(construal.abstract_mdp, result.values)
    ledger = CostLedger(solve_cost=result.backups)
    report = evaluate_objective(task, construal, policy, ledger, construal_values=result.values)
    expected, within, gap = report
    assert gap <= 2e-8
    assert within
    assert expected == pytest.approx(0.95 ** 5)
    assert report.fallback_backups == 0
    assert report.ledger == ledger


def test_provenance_records_source_elements():
    _, construal = two_room_construal()
    assert ("s2", "goal-room", "room-b/s0") in construal.provenance
    assert ("s1.a0", "room", "room-a/s1.a0") in construal.provenance


def test_dangling_endpoints_are_rejected():
    first, second = rooms()
    with pytest.raises(DanglingEndpointError):
        compose([first, second], [("room-a", 1, "room-b", 0)])
    with pytest.raises(DanglingEndpointError):
        compose([first, second], [("room-a", 2, "room-c", 0)])
    with pytest.raises(DanglingEndpointError):
        compose([first, second], [("room-a", 2, "room-b", 1)])


def test_conflicting_dynamics_need_precedence():
    first = FragmentInstance.from_fragment(room_module(2, module_id="room"), "room-a", exits=[1])
    _, second = rooms()
    with pytest.raises(CompositionConflictError):
        compose([first, second], [("room-a", 1, "room-b", 0)])
    construal = compose([first, second], [("room-a", 1, "room-b", 0)], precedence=True)
    # room-a 列在前面，合并状态沿用它的动力学（可以后退）
    merged = construal.instance_states["room-b"][0]
    assert 1 in construal.abstract_mdp.actions(merged)


def test_duplicate_instances_and_overlapping_bindings_conflict():
    first, second = rooms()
    with pytest.raises(CompositionConflictError):
        compose([first, first])
    task = two_room(2)
    a_map, _ = two_room_bindings(2, task.mdp_id)
    with pytest.raises(CompositionConflictError):
        compose([first, second], [("room-a", 2, "room-b", 0)], [a_map, HomomorphismMap.create(task.mdp_id, "room-b", a_map.f, a_map.g)])


def test_bindings_from_different_tasks_are_rejected():
    first, second = rooms()
    a_map, _ = two_room_bindings(2, "task-one")
    _, b_map = two_room_bindings(2, "task-two")
    with pytest.raises(EndpointMismatchError):
        compose([first, second], [("room-a", 2, "room-b", 0)], [a_map, b_map])


def test_construal_can_be_reused_as_instance():
    _, construal = two_room_construal()
    inst = construal_instance(construal, "hall", "hall-module")
    assert inst.fragment.mdp_id == "hall-module"
    assert inst.entries == construal.entries
    assert inst.exits == construal.exits


def test_cost_ledger():
    ledger = CostLedger(10, 5, 20)
    assert ledger.total == 15
    assert ledger.within_budget
    assert not ledger.add(solve=6).within_budget
    assert ledger.add(construal=1).construal_cost == 6
    with pytest.raises(ValueError):
        CostLedger(-1, 0, 10)


def test_construal_files_round_trip(tmp_path):
    _, construal = two_room_construal()
    write_construal(construal, tmp_path / "c")
    loaded = read_construal(tmp_path / "c")
    assert loaded.abstract_mdp == construal.abstract_mdp
    assert loaded.binding == construal.binding
    assert loaded.glue == construal.glue
    assert loaded.entries == construal.entries
    assert loaded.exits == construal.exits
    assert loaded.instance_states == construal.instance_states
    assert loaded.instance_modules == construal.instance_modules
    assert sorted(os.listdir(tmp_path / "c")) == ["binding.map", "fragment.mdp", "glue.txt", "provenance.csv"]
