#!/usr/bin/env python3
"""
demo3 演示脚本：门族课程上的模块库摊销
"""

import sys
from pathlib import Path

project_root = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(project_root))

from config import settings
from src.library.lifecycle import ARM_UPDATE, LifecycleConfig, bench_amortization, write_rows


def demo3(episodes: int = 6):
    """demo3演示"""
    print("=" * 60)
    print(f"demo3: 模块库摊销（{episodes} 个回合）")
    print("=" * 60)

    config = LifecycleConfig(episodes=episodes, seeds=[1, 2, 3])
    bench = bench_amortization(config)
    for row in bench.rows:
        if row.arm == ARM_UPDATE:
            print(f"  seed={row.seed} ep={row.episode:02d} C_s={row.solve_cost:4d} "
                  f"C_c={row.construal_cost:4d} 覆盖率={row.coverage:.2f} 库大小={row.library_size}")

    print("\n累计成本比较（第2回合起）:")
    print(bench.comparison.to_string(index=False))
    print(f"\n摊销成立: {bench.amortized}")

    out_dir = settings.OUTPUT_DIR / "demo3"
    settings.create_directories(out_dir)
    write_rows(bench.rows, out_dir / "bench.csv")
    print(f"明细已写出到 {out_dir / 'bench.csv'}")


if __name__ == "__main__":
    demo3(int(sys.argv[1]) if len(sys.argv) > 1 else 6)
