#!/usr/bin/env python3
"""
demo1 演示脚本：门模块到邮箱登录任务的类比迁移
"""

import sys
from pathlib import Path

# 添加项目根目录到Python路径
project_root = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(project_root))

from src.analogy.search import find_homomorphism
from src.domains.generators import door_module, email_password_with_map
from src.homomorphism.checks import check_homomorphism, loss_bound
from src.lifting.lifter import complete_policy, lift_policy, transfer_report
from src.mdp_core.solvers import optimal_values


def demo1(recall_steps: int = 1):
    """demo1演示"""
    print("=" * 60)
    print("demo1: 门模块 -> 邮箱登录")
    print("=" * 60)

    door = door_module()
    email, planted = email_password_with_map(recall_steps)
    print(door.describe())
    print(email.describe())

    print("\n搜索类比映射...")
    result = find_homomorphism(email, door)
    if not result.found:
        print(f"未找到严格映射（展开 {result.expansions_used} 次）")
        hom_map = planted
    else:
        print(f"找到映射：展开 {result.expansions_used} 次，得分 {result.score:.3f}")
        hom_map = result.best_map
    for s, x in sorted(hom_map.f.items()):
        print(f"  {email.state_labels.get(s, s)} -> {door.state_labels.get(x, x)}")

    cert = check_homomorphism(email, door, hom_map)
    print(f"\n严格: {cert.strict}  覆盖率: {cert.coverage_fraction:.2f}  "
          f"损失上界: {loss_bound(cert, door.discount, door.reward_range()):.4f}")

    lifted = lift_policy(optimal_values(door).policy, hom_map, email)
    report = transfer_report(email, lifted)
    print(f"迁移策略的最优性差距: {report.optimality_gap:.2e}")
    if lifted.gaps:
        completed = complete_policy(email, lifted)
        print(f"空缺状态 {completed.fallback_states} 已用 {completed.backups} 次备份补全")

    print("\n" + "=" * 60)
    print("demo1 完成")


if __name__ == "__main__":
    demo1(int(sys.argv[1]) if len(sys.argv) > 1 else 1)
