#!/usr/bin/env python3
"""
策略与值的提升
把抽象源上的解通过同态映射搬到具体任务上，并评估迁移效果
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Optional, Set, Tuple

import numpy as np

from config import settings
from src.errors import CoverageGapError, MissingAbstractChoiceError, PairingMismatchError
from src.homomorphism.maps import HomomorphismMap
from src.mdp_core.mdp import GroundMdp, Policy, ValueFunction
from src.mdp_core.solvers import (
    SolveResult,
    greedy_policy,
    optimal_values,
    policy_evaluation,
    value_iteration,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LiftedPolicy:
    """提升后的具体策略；gaps 是 f 定义域内找不到对应动作的状态"""
    base: Policy
    coverage: FrozenSet[int]
    gaps: FrozenSet[int]

    def __post_init__(self):
        if self.base.coverage != self.coverage:
            raise ValueError("LiftedPolicy 的 coverage 与策略定义域不一致")
        if self.gaps & self.coverage:
            raise ValueError("gaps 与 coverage 相交")


def _match(ground: GroundMdp, hom_map: HomomorphismMap, state: int, abstract_action: int) -> Optional[int]:
    for a in ground.actions(state):
        if hom_map.g.get((state, a)) == abstract_action:
            return a
    return None


def lift_policy(abstract_policy: Policy, hom_map: HomomorphismMap, ground: GroundMdp) -> LiftedPolicy:
    """
    在 f 定义域内的每个具体状态上，选 g(s,a) 等于抽象选择的最小编号动作

    Args:
        abstract_policy: 抽象MDP上的策略
        hom_map: 具体 -> 抽象 的映射
        ground: 具体MDP

    Returns:
        LiftedPolicy，找不到对应动作的状态记为 gap

    Raises:
        MissingAbstractChoiceError: 抽象策略在作用域涉及的抽象状态上未定义
    """
    if hom_map.source_ground != ground.mdp_id:
        raise PairingMismatchError(f"映射定义域 {hom_map.source_ground} 与 {ground.mdp_id} 不一致")
    required = hom_map.image(hom_map.scope_states)
    missing = sorted(x for x in required if x not in abstract_policy.choice)
    if missing:
        raise MissingAbstractChoiceError(f"抽象策略在抽象状态 {missing} 上未定义")

    choice = {}
    gaps = set()
    for s, x in sorted(hom_map.f.items()):
        if ground.is_terminal(s):
            continue
        if x not in abstract_policy.choice:
            gaps.add(s)
            continue
        if abstract_policy.kind == Policy.DETERMINISTIC:
            a = _match(ground, hom_map, s, abstract_policy.choice[x])
            if a is None:
                gaps.add(s)
            else:
                choice[s] = a
        else:
            dist = {}
            for abar, p in abstract_policy.action_distribution(x).items():
                a = _match(ground, hom_map, s, abar)
                if a is None:
                    dist = None
                    break
                dist[a] = dist.get(a, 0.0) + p
            if dist is None:
                gaps.add(s)
            else:
                choice[s] = dist

    if abstract_policy.kind == Policy.DETERMINISTIC:
        base = Policy.deterministic(choice)
    else:
        base = Policy.stochastic(choice)
    if gaps:
        logger.debug(f"提升到 {ground.mdp_id} 时有 {len(gaps)} 个 gap 状态")
    return LiftedPolicy(base=base, coverage=base.coverage, gaps=frozenset(gaps))


def lift_values(abstract_values: ValueFunction, hom_map: HomomorphismMap, ground: GroundMdp) -> ValueFunction:
    """V_init(s) = V̄(f(s))，f 定义域之外取 0，用作值迭代的热启动"""
    if abstract_values.paired_mdp != hom_map.target_abstract:
        raise PairingMismatchError(
            f"值函数属于 {abstract_values.paired_mdp}，映射的陪域是 {hom_map.target_abstract}")
    values = np.zeros(ground.state_count)
    for s, x in hom_map.f.items():
        values[s] = abstract_values[x]
    return ValueFunction(values, ground.mdp_id)


def unsafe_states(ground: GroundMdp, policy: Policy) -> Set[int]:
    """按策略执行时可能走到未定义状态的状态集合（含未定义状态本身）"""
    bad = {s for s in ground.states if not ground.is_terminal(s) and s not in policy.choice}
    changed = True
    while changed:
        changed = False
        for s in policy.choice:
            if s in bad:
                continue
            for a in policy.action_distribution(s):
                if any(t in bad for t, p in ground.successors(s, a).items() if p > 0):
                    bad.add(s)
                    changed = True
                    break
    return bad


@dataclass
class TransferReport:
    """迁移报告；可以按 (ground_return, optimality_gap) 解包"""
    ground_return: Dict[int, float]
    optimality_gap: float
    excluded_states: Tuple[int, ...] = ()
    warning: bool = False
    values: Optional[ValueFunction] = None
    optimum: Optional[ValueFunction] = None

    def __iter__(self):
        return iter((self.ground_return, self.optimality_gap))


def transfer_report(ground: GroundMdp,
                    lifted: LiftedPolicy,
                    tolerance: float = settings.TOLERANCE,
                    strict: bool = False,
                    optimum: Optional[ValueFunction] = None) -> TransferReport:
    """
    在具体MDP中评估提升后的策略，并报告与最优值的上确界差距

    会走到 gap 的状态被排除并置 warning；strict=True 时直接抛出 CoverageGapError。
    """
    policy = lifted.base
    bad = unsafe_states(ground, policy)
    if bad:
        uncovered = sorted(s for s in bad if s not in policy.choice)
        if strict:
            raise CoverageGapError("提升策略在可达状态上有 gap", uncovered)
        logger.warning(f"{ground.mdp_id}: 排除 {len(bad)} 个会走到 gap 的状态")

    good = [s for s in ground.states if s not in bad]
    values = policy_evaluation(ground, policy, tolerance, starts=good)
    if optimum is None:
        optimum = optimal_values(ground, tolerance).values
    ground_return = {s: values[s] for s in good}
    gap = max((optimum[s] - values[s] for s in good), default=0.0)
    return TransferReport(
        ground_return=ground_return,
        optimality_gap=max(0.0, float(gap)),
        excluded_states=tuple(sorted(bad)),
        warning=bool(bad),
        values=values,
        optimum=optimum,
    )


@dataclass
class CompletedPolicy:
    """gap 状态用规划补全后的策略"""
    policy: Policy
    fallback_states: Tuple[int, ...]
    backups: int
    solve: Optional[SolveResult] = None


def complete_policy(ground: GroundMdp,
                    lifted: LiftedPolicy,
                    tolerance: float = settings.TOLERANCE,
                    init: Optional[ValueFunction] = None) -> CompletedPolicy:
    """
    在提升策略未覆盖的非终止状态上回退到规划

    用（可选热启动的）值迭代求解具体MDP，取贪心动作填补空缺。
    """
    missing = tuple(s for s in ground.states if not ground.is_terminal(s) and s not in lifted.coverage)
    if not missing:
        return CompletedPolicy(lifted.base, (), 0, None)
    if lifted.base.kind != Policy.DETERMINISTIC:
        raise ValueError("只支持补全确定性策略")
    result = value_iteration(ground, tolerance, settings.MAX_SWEEPS, init=init)
    planned = greedy_policy(ground, result.values)
    choice = dict(planned.choice)
    choice.update(lifted.base.choice)
    logger.info(f"{ground.mdp_id}: {len(missing)} 个状态回退到规划，备份 {result.backups} 次")
    return CompletedPolicy(Policy.deterministic(choice), missing, result.backups, result)
