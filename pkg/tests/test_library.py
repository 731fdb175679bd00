#!/usr/bin/env python3
"""
模块库：构念、求解、可供性、库更新、存储与生命周期测试
"""

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.composition.construal import FragmentInstance, compose, construal_instance
from src.domains.generators import door_module, email_password_with_map, room_module, two_room
from src.errors import ParseError
from src.homomorphism.checks import check_homomorphism
from src.homomorphism.maps import HomomorphismMap
from src.mdp_core.mdp import GroundMdp
from src.library.inference import afford, construe, solve
from src.library.lifecycle import LifecycleConfig, bench_amortization, run_episode, run_lifecycle
from src.library.modules import EpisodeRecord, Library, Module, parse_element
from src.library.storage import load_library, save_library
from src.library.update import refine_module, strict_bihomomorphism, update_library
from src.mdp_core.solvers import value_iteration


def door_library():
    library = Library()
    library.add(Module.from_fragment(door_module()))
    return library


def record_for(task, library):
    record, _, _ = run_episode(task, library, LifecycleConfig())
    return record


# ==================== 推断 ====================
def test_construe_without_library_imports_task_verbatim():
    email, _ = email_password_with_map()
    construal, ledger = construe(Library(), email)
    assert construal.no_analogy
    assert construal.coverage == 0.0
    assert ledger.construal_cost == 0
    assert construal.abstract_mdp.state_count == email.state_count
    assert construal.abstract_mdp.mdp_id == "email-password~construal"


def test_construe_maps_email_onto_door_module():
    email, _ = email_password_with_map()
    construal, ledger = construe(door_library(), email)
    assert not construal.no_analogy
    assert construal.coverage == 1.0
    assert ledger.construal_cost > 0
    assert list(construal.instance_bindings) == ["i0-door-module"]
    assert construal.instance_bindings["i0-door-module"].target_abstract == "door-module"


def test_construe_skips_maps_whose_scope_is_not_closed():
    abstract = GroundMdp.build(
        mdp_id="lopsided-abstract", state_count=3, discount=0.9,
        transitions={(0, 0): {1: 1.0}, (0, 1): {2: 1.0}, (1, 0): {2: 1.0}, (1, 1): {1: 1.0}},
        rewards={(0, 0): 0.0, (0, 1): 0.5, (1, 0): 1.0, (1, 1): 0.0},
    )
    task = GroundMdp.build(
        mdp_id="lopsided-ground", state_count=3, discount=0.9,
        transitions={(0, 0): {1: 1.0}, (0, 1): {2: 1.0}, (1, 1): {1: 1.0}},
        rewards={(0, 0): 0.0, (0, 1): 0.5, (1, 1): 0.0},
    )
    library = Library()
    library.add(Module.from_fragment(abstract))
    # s1 映不到 x1（缺一个动作），s0 的第一个动作又通向 s1，没有闭合的部分可以提交
    construal, _ = construe(library, task)
    assert construal.no_analogy
    assert construal.coverage == 0.0
    assert construal.abstract_mdp.state_count == task.state_count


def test_construe_covers_exact_copy():
    task = two_room(2)
    library = Library()
    library.add(Module.from_fragment(task.with_id("corridor")))
    construal, _ = construe(library, task)
    assert construal.coverage == 1.0
    assert construal.module_instances == ["i0-corridor"]


def test_construe_rejects_bad_module_count():
    with pytest.raises(ValueError):
        construe(Library(), two_room(1), max_modules=0)


def test_solve_warm_starts_from_module_values():
    library = door_library()
    email, _ = email_password_with_map()
    construal, ledger = construe(library, email)
    outcome = solve(construal, library, ledger=ledger)
    cold = value_iteration(construal.abstract_mdp)
    assert outcome.warm_started
    assert outcome.result.sweeps_used <= 2
    assert outcome.ledger.solve_cost == outcome.result.backups < cold.backups
    policy, final = outcome
    assert final.construal_cost == ledger.construal_cost


def test_solve_without_modules_is_cold():
    email, _ = email_password_with_map()
    construal, ledger = construe(Library(), email)
    outcome = solve(construal, Library(), ledger=ledger)
    assert not outcome.warm_started


def test_afford_lists_module_actions():
    library = door_library()
    email, _ = email_password_with_map()
    construal, _ = construe(library, email)
    bindings = list(construal.instance_bindings.values())
    assert afford(email, 0, library, bindings) == [("door-module", (0, 4))]
    assert afford(email, 2, library, bindings) == [("door-module", (2, 3, 4))]
    assert afford(email, 0, library, []) == []
    with pytest.raises(ValueError):
        afford(email, 9, library, bindings)


def test_afford_orders_by_module_id():
    library = door_library()
    library.add(Module.from_fragment(door_module(module_id="a-door")))
    email, email_map = email_password_with_map()
    other = HomomorphismMap.create(email.mdp_id, "a-door", email_map.f, email_map.g)
    offered = afford(email, 1, library, [email_map, other])
    assert [module_id for module_id, _ in offered] == ["a-door", "door-module"]


# ==================== 库更新 ====================
def test_update_rejects_bad_parameters():
    with pytest.raises(ValueError):
        update_library(Library(), [], extraction_threshold=1)
    with pytest.raises(ValueError):
        update_library(Library(), [], discard_ratio=0.0)
    with pytest.raises(ValueError):
        update_library(Library(), [], discard_ratio=1.5)


def test_empty_history_leaves_library_equal():
    library = door_library()
    updated = update_library(library, [])
    assert updated == library
    assert updated is not library


def test_extraction_needs_repeated_fragment():
    library = Library()
    first, _ = email_password_with_map(mdp_id="email-a")
    second, _ = email_password_with_map(mdp_id="email-b")
    history = [record_for(first, library)]
    assert len(update_library(library, history)) == 0

    history.append(record_for(second, library))
    updated = update_library(library, history)
    assert list(updated.modules) == ["mod-001"]
    module = updated.modules["mod-001"]
    assert module.lineage == ["email-a", "email-b"]
    assert module.fragment.state_count == 4
    assert module.values is not None
    assert updated.seen_episodes == {"email-a", "email-b"}
    assert len(library) == 0

    # 同一历史再更新一次：不重复抽取，也不重复计数
    again = update_library(updated, history)
    assert list(again.modules) == ["mod-001"]
    assert again.modules["mod-001"].use_count == module.use_count


def test_usage_is_tallied_per_episode():
    library = door_library()
    email, _ = email_password_with_map(mdp_id="email-a")
    record = record_for(email, library)
    updated = update_library(library, [record])
    door = updated.modules["door-module"]
    assert door.use_count["s0"] == 1
    assert door.discard_count.get("s0", 0) == 0


def test_refinement_prunes_frequently_discarded_action():
    module = Module.from_fragment(door_module())
    for element in module.elements():
        module.use_count[element] = 3
    module.discard_count["s0.a4"] = 3
    library = Library()
    library.add(module)
    updated = update_library(library, [], discard_ratio=0.5, min_uses=3)
    assert list(updated.modules) == ["door-module", "door-module-r1"]
    refined = updated.modules["door-module-r1"]
    assert (0, 4) not in refined.fragment.transitions
    assert (0, 0) in refined.fragment.transitions
    assert refined.lineage == ["door-module"]
    assert refined.policy.choice[0] == 0

    # 已有子模块时不再精化
    assert list(update_library(updated, [], discard_ratio=0.5, min_uses=3).modules) == [
        "door-module", "door-module-r1"]


def test_refinement_respects_min_uses():
    module = Module.from_fragment(door_module())
    module.use_count["s0.a4"] = 2
    module.discard_count["s0.a4"] = 2
    library = Library()
    library.add(module)
    assert list(update_library(library, [], min_uses=3).modules) == ["door-module"]


def test_refine_module_drops_states_and_incoming_pairs():
    module = Module.from_fragment(door_module())
    refined = refine_module(module, {"s1"}, "door-r")
    # 去掉 has-key 后 locked 只剩 bang-on，at-door 失去 withdraw
    assert refined.fragment.state_count == 3
    assert refined.fragment.actions(0) == (4,)
    assert refined.fragment.actions(1) == (2, 4)
    assert refine_module(module, {"s0"}, "door-r") is None


def test_duplicate_modules_are_merged():
    first = Module.from_fragment(door_module(), "mod-a", lineage=["ep-1"])
    second = Module.from_fragment(door_module(), "mod-b", lineage=["ep-2"])
    second.use_count["s0"] = 2
    library = Library()
    library.add(first)
    library.add(second)
    updated = update_library(library, [])
    assert list(updated.modules) == ["mod-a"]
    merged = updated.modules["mod-a"]
    assert merged.use_count["s0"] == 2
    assert merged.lineage == ["ep-1", "ep-2", "mod-b"]


def test_strict_bihomomorphism_requires_matching_fragments():
    door = door_module()
    assert strict_bihomomorphism(door, door_module(module_id="copy")) is not None
    # 邮箱任务能严格映射到门模块，但动作对数不同，不算重复
    email, _ = email_password_with_map()
    assert strict_bihomomorphism(door, email) is None
    longer, _ = email_password_with_map(2)
    assert strict_bihomomorphism(door, longer) is None


def chain_modules():
    rooms = [FragmentInstance.from_fragment(room_module(2, exit_reward=r, module_id=m), i)
             for i, m, r in (("a", "room", 0.0), ("b", "room", 0.0), ("c", "goal-room", 1.0))]
    first, second, third = rooms
    ab = compose([first, second], [("a", 2, "b", 0)], construal_id="ab")
    left = compose([construal_instance(ab, "ab"), third], [("ab", 4, "c", 0)], construal_id="ab-c")
    bc = compose([second, third], [("b", 2, "c", 0)], construal_id="bc")
    right = compose([first, construal_instance(bc, "bc")], [("a", 2, "bc", 0)], construal_id="a-bc")
    return Module.from_construal(left, "left", solve=True), Module.from_construal(right, "right", solve=True)


def test_chained_composition_is_associative():
    left, right = chain_modules()
    assert left.fragment.state_count == right.fragment.state_count == 7
    assert left.lineage == ["ab-c"]
    assert strict_bihomomorphism(left.fragment, right.fragment) is not None
    assert left.values[0] == pytest.approx(right.values[0])


def test_parse_element():
    assert parse_element("s3") == (3, None)
    assert parse_element("s3.a1") == (3, 1)


def test_episode_record_checks_maps():
    library = door_library()
    email, email_map = email_password_with_map()
    record = record_for(email, library)
    with pytest.raises(ValueError):
        EpisodeRecord(record.task_id, record.task, record.construal, record.policy,
                      {"unknown": list(record.maps.values())[0]}, record.ledger)
    with pytest.raises(ValueError):
        EpisodeRecord(record.task_id, door_module(), record.construal, record.policy,
                      dict(record.maps), record.ledger)


# ==================== 存储 ====================
def test_library_round_trip(tmp_path):
    library = Library()
    first, _ = email_password_with_map(mdp_id="email-a")
    second, _ = email_password_with_map(mdp_id="email-b")
    history = [record_for(first, library), record_for(second, library)]
    updated = update_library(library, history)
    updated.add(Module.from_fragment(door_module()))
    save_library(updated, tmp_path / "lib")
    loaded = load_library(tmp_path / "lib")
    assert loaded == updated
    assert sorted(os.listdir(tmp_path / "lib")) == [
        "door-module.mdp", "door-module.stats", "index.txt", "mod-001.mdp", "mod-001.stats"]


def test_load_library_reports_bad_lines(tmp_path):
    save_library(door_library(), tmp_path / "lib")
    stats = tmp_path / "lib" / "door-module.stats"
    stats.write_text(stats.read_text(encoding="utf-8") + "usage s0 x\n", encoding="utf-8")
    with pytest.raises(ParseError) as info:
        load_library(tmp_path / "lib")
    assert info.value.line_no is not None


# ==================== 生命周期 ====================
def test_lifecycle_amortizes_construal():
    for seed in range(1, 6):
        result = run_lifecycle(LifecycleConfig(episodes=10), seed=seed)
        rows = result.rows
        assert [row.episode for row in rows] == list(range(1, 11))
        assert rows[0].no_analogy and rows[1].no_analogy
        assert rows[0].construal_cost == rows[1].construal_cost == 0
        assert rows[1].library_size >= 1
        for row in rows[2:]:
            assert not row.no_analogy, (seed, row.episode)
            assert row.construal_cost > 0
            assert row.coverage == 1.0
            assert row.solve_cost < rows[0].solve_cost
        # 库稳定之后每回合的构念成本不再上升
        costs = [row.construal_cost for row in rows[2:]]
        assert all(later <= earlier for earlier, later in zip(costs, costs[1:]))
        assert all(row.optimality_gap <= 1e-6 for row in rows)
        assert all(row.reconstrues == 0 for row in rows)
        assert not result.over_budget


def test_varied_curriculum_commits_only_exact_cores():
    config = LifecycleConfig(episodes=10, variant="varied")
    used_modules = 0
    for seed in range(1, 6):
        result = run_lifecycle(config, seed=seed)
        for row in result.rows:
            # 提交的映射都是作用域闭合、偏差为零且覆盖全部抽象动作的，构念与任务等价
            assert row.optimality_gap <= config.failure_gap, (seed, row.episode, row.coverage)
            assert row.reconstrues == 0, (seed, row.episode)
            used_modules += row.modules_used
        for record in result.history:
            for hom_map in record.maps.values():
                module = result.library.modules.get(hom_map.target_abstract)
                if module is None:
                    continue
                cert = check_homomorphism(record.task, module.fragment, hom_map)
                assert cert.uncovered_actions == ()
                assert cert.commutes
    assert used_modules > 0


def test_frozen_arm_never_builds_modules():
    result = run_lifecycle(LifecycleConfig(episodes=3), seed=1, update_enabled=False)
    assert all(row.arm == "no-update" and row.library_size == 0 for row in result.rows)
    assert len({row.solve_cost for row in result.rows}) == 1


def test_lifecycle_output_is_reproducible(tmp_path):
    config = LifecycleConfig(episodes=3)
    run_lifecycle(config, seed=2, out_dir=tmp_path / "a")
    run_lifecycle(config, seed=2, out_dir=tmp_path / "b")
    first = (tmp_path / "a" / "episodes.csv").read_bytes()
    assert first == (tmp_path / "b" / "episodes.csv").read_bytes()
    assert first.splitlines()[0].startswith(b"arm,seed,episode,task_id")
    assert (tmp_path / "a" / "library" / "ep03" / "index.txt").exists()


def test_bench_amortization_compares_arms():
    bench = bench_amortization(LifecycleConfig(episodes=10), seeds=[1, 2, 3, 4, 5])
    assert len(bench.rows) == 5 * 2 * 10
    assert list(bench.comparison["seed"]) == [1, 2, 3, 4, 5]
    assert bench.amortized
    assert all(bench.comparison["holds"])
    assert len(bench.long_table) == 5 * 2 * 10 * 5
    assert set(bench.long_table["metric"]) == {
        "solve_cost", "construal_cost", "total_cost", "coverage", "optimality_gap"}


def test_lifecycle_config_validation():
    with pytest.raises(ValueError):
        LifecycleConfig(extraction_threshold=1)
    with pytest.raises(ValueError):
        LifecycleConfig(unknown=True)
    config = LifecycleConfig.model_validate_json('{"episodes": 2, "variant": "varied"}')
    assert config.search_budget().mode == "partial"
