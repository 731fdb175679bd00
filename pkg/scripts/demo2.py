#!/usr/bin/env python3
"""
demo2 演示脚本：用两个房间片段组装双房间任务的构念
"""

import sys
from pathlib import Path

project_root = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(project_root))

from config import settings
from src.composition.construal import CostLedger, FragmentInstance, compose
from src.composition.construal_format import write_construal
from src.composition.objective import evaluate_objective
from src.domains.generators import room_module, two_room, two_room_bindings
from src.mdp_core.solvers import greedy_policy, value_iteration


def demo2(length: int = 3):
    """demo2演示"""
    print("=" * 60)
    print(f"demo2: 双房间构念（房间长度 {length}）")
    print("=" * 60)

    task = two_room(length)
    instances = [
        FragmentInstance.from_fragment(room_module(length, module_id="room"), "room-a"),
        FragmentInstance.from_fragment(room_module(length, 1.0, module_id="goal-room"), "room-b"),
    ]
    construal = compose(instances, [("room-a", length, "room-b", 0)],
                        two_room_bindings(length, task.mdp_id), construal_id="two-room-construal")
    print(construal.abstract_mdp.describe())
    print(f"粘合: {construal.glue}")
    print(f"入口: {construal.entries}  出口: {construal.exits}")

    result = value_iteration(construal.abstract_mdp)
    policy = greedy_policy(construal.abstract_mdp, result.values)
    report = evaluate_objective(task, construal, policy, CostLedger(solve_cost=result.backups),
                                construal_values=result.values)
    expected, within, gap = report
    print(f"\n期望回报: {expected:.6f}  最优性差距: {gap:.2e}  预算内: {within}")

    out_dir = settings.OUTPUT_DIR / "demo2"
    write_construal(construal, out_dir)
    print(f"构念文件已写出到 {out_dir}")


if __name__ == "__main__":
    demo2(int(sys.argv[1]) if len(sys.argv) > 1 else 3)
