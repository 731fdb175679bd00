#!/usr/bin/env python3
"""
按需目标的评估
把构念上的策略提升到具体任务，评估回报、最优差距与预算约束
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

from config import settings
from src.composition.construal import Construal, CostLedger
from src.errors import CoverageGapError
from src.lifting.lifter import complete_policy, lift_policy, lift_values
from src.mdp_core.mdp import GroundMdp, Policy, ValueFunction
from src.mdp_core.solvers import optimal_values, policy_evaluation, reachable_states

logger = logging.getLogger(__name__)


@dataclass
class ObjectiveReport:
    """评估结果；可以按 (ground_expected_return, within_budget, optimality_gap) 解包"""
    ground_expected_return: float
    within_budget: bool
    optimality_gap: float
    optimal_return: float
    ledger: CostLedger
    lifting_gaps: Tuple[int, ...] = ()
    fallback_states: Tuple[int, ...] = ()
    fallback_backups: int = 0
    values: Optional[ValueFunction] = None

    def __iter__(self):
        return iter((self.ground_expected_return, self.within_budget, self.optimality_gap))


def evaluate_objective(task: GroundMdp,
                       construal: Construal,
                       policy: Policy,
                       ledger: CostLedger,
                       tolerance: float = settings.TOLERANCE,
                       strict: bool = False,
                       construal_values: Optional[ValueFunction] = None,
                       optimum: Optional[ValueFunction] = None) -> ObjectiveReport:
    """
    Args:
        task: 具体任务
        construal: 构念（必须带绑定）
        policy: 构念上的策略
        ledger: 已填好的成本账本
        strict: 起点可达的提升 gap 直接报错
        construal_values: 构念上的值，用于回退规划的热启动
        optimum: 预先算好的具体最优值

    Returns:
        ObjectiveReport；回退规划的备份计入账本的 C_s
    """
    if construal.binding is None:
        raise ValueError("构念没有到具体任务的绑定")
    lifted = lift_policy(policy, construal.binding, task)
    starts = task.start_distribution()
    _, reachable_gaps = reachable_states(task, lifted.base, starts)
    if reachable_gaps:
        if strict:
            raise CoverageGapError("提升策略在起点可达的状态上有 gap", reachable_gaps)
        logger.warning(f"{task.mdp_id}: {len(reachable_gaps)} 个起点可达状态需要回退到规划")

    init = None
    if construal_values is not None:
        init = lift_values(construal_values, construal.binding, task)
    completed = complete_policy(task, lifted, tolerance, init=init)
    values = policy_evaluation(task, completed.policy, tolerance)
    if optimum is None:
        optimum = optimal_values(task, tolerance).values

    expected = sum(w * values[s] for s, w in starts.items())
    best = sum(w * optimum[s] for s, w in starts.items())
    gap = max(0.0, max(optimum[s] - values[s] for s in task.states))
    final_ledger = ledger.add(solve=completed.backups)
    if not final_ledger.within_budget:
        logger.warning(f"{task.mdp_id}: 成本 {final_ledger.total} 超过预算 {final_ledger.budget}")
    return ObjectiveReport(
        ground_expected_return=float(expected),
        within_budget=final_ledger.within_budget,
        optimality_gap=float(gap),
        optimal_return=float(best),
        ledger=final_ledger,
        lifting_gaps=tuple(sorted(lifted.gaps)),
        fallback_states=completed.fallback_states,
        fallback_backups=completed.backups,
        values=values,
    )
