#!/usr/bin/env python3
"""
动态规划求解器
值迭代、贪心策略、精确策略评估与Q值，是其他所有模块的规划基础和暴力对照
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from config import settings
from src.errors import CoverageGapError, NumericFailureError, PairingMismatchError
from src.mdp_core.mdp import GroundMdp, Pair, Policy, ValueFunction

logger = logging.getLogger(__name__)

# 贪心选择时视为并列的Q值差
TIE_TOL = 1e-12


@dataclass
class SolveResult:
    """值迭代的结果；可以按 (values, sweeps_used, backups) 解包"""
    values: ValueFunction
    sweeps_used: int
    backups: int
    converged: bool
    residuals: List[float] = field(default_factory=list)

    def __iter__(self):
        return iter((self.values, self.sweeps_used, self.backups))


@dataclass
class OptimalSolution:
    """最优解对照：精确评估的贪心策略值"""
    values: ValueFunction
    policy: Policy
    solve: SolveResult


def _first_non_finite(arr: np.ndarray) -> int:
    return int(np.flatnonzero(~np.isfinite(arr))[0])


def _check_values(mdp: GroundMdp, values: ValueFunction, strict_id: bool = True):
    if strict_id:
        values.check_pairing(mdp)
    elif len(values) != mdp.state_count:
        raise PairingMismatchError(
            f"初始值长度 {len(values)} 与 {mdp.mdp_id} 的状态数 {mdp.state_count} 不一致")


def value_iteration(mdp: GroundMdp,
                    tolerance: float = settings.TOLERANCE,
                    max_sweeps: int = settings.MAX_SWEEPS,
                    init: Optional[ValueFunction] = None) -> SolveResult:
    """
    同步（Jacobi）值迭代

    相邻两次扫描的变化不超过 tolerance·(1-γ)/γ 时停止，
    此时返回值与不动点的距离不超过 tolerance。

    Args:
        mdp: 待求解的MDP
        tolerance: 精度，必须为正
        max_sweeps: 最大扫描次数
        init: 热启动初值（状态数相同即可）

    Returns:
        SolveResult，backups 按 (s, a) 期望计算次数累计
    """
    if tolerance <= 0:
        raise ValueError(f"tolerance 必须为正: {tolerance}")
    if max_sweeps < 1:
        raise ValueError(f"max_sweeps 必须为正: {max_sweeps}")

    kernel = mdp.kernel
    gamma = mdp.discount
    threshold = tolerance * (1.0 - gamma) / gamma if gamma > 0 else tolerance

    if init is not None:
        _check_values(mdp, init, strict_id=False)
        v = np.array(init.values, dtype=float)
        for s in mdp.terminal_states:
            v[s] = 0.0
        if not np.isfinite(v).all():
            raise NumericFailureError(f"初值在状态 {_first_non_finite(v)} 上不是有限值",
                                      state=_first_non_finite(v))
    else:
        v = np.zeros(mdp.state_count)

    residuals: List[float] = []
    backups = 0
    converged = False
    sweeps = 0

    if len(kernel.pairs) == 0:
        # 全是终止状态
        return SolveResult(ValueFunction(np.zeros(mdp.state_count), mdp.mdp_id), 0, 0, True, [])

    while sweeps < max_sweeps:
        q = kernel.rewards + gamma * (kernel.matrix @ v)
        backups += len(kernel.pairs)
        sweeps += 1

        new_v = np.zeros(mdp.state_count)
        new_v[kernel.nonterminal] = np.maximum.reduceat(q, kernel.starts)
        if not np.isfinite(new_v).all():
            bad = _first_non_finite(new_v)
            raise NumericFailureError(f"值迭代在状态 {bad} 上出现非有限值", state=bad)

        residual = float(np.max(np.abs(new_v - v)))
        residuals.append(residual)
        v = new_v
        if residual <= threshold:
            converged = True
            break

    if converged:
        logger.debug(f"{mdp.mdp_id}: 值迭代在 {sweeps} 次扫描后收敛，备份 {backups} 次")
    else:
        logger.warning(f"{mdp.mdp_id}: 值迭代达到最大扫描次数 {max_sweeps} 仍未收敛，残差 {residuals[-1]:.3e}")

    return SolveResult(ValueFunction(v, mdp.mdp_id), sweeps, backups, converged, residuals)


def q_values(mdp: GroundMdp, values: ValueFunction) -> Dict[Pair, float]:
    """Q(s,a) = R(s,a) + γ·Σ T(s,a,s')V(s')，只在可用的动作对上定义"""
    _check_values(mdp, values, strict_id=False)
    kernel = mdp.kernel
    if not kernel.pairs:
        return {}
    q = kernel.rewards + mdp.discount * (kernel.matrix @ values.values)
    return {pair: float(q[i]) for i, pair in enumerate(kernel.pairs)}


def greedy_policy(mdp: GroundMdp, values: ValueFunction) -> Policy:
    """
    对值函数取贪心的确定性策略，并列时取最小动作编号

    Args:
        mdp: MDP
        values: 与 mdp 配对的值函数

    Returns:
        在所有非终止状态上有定义的确定性策略
    """
    values.check_pairing(mdp)
    q = q_values(mdp, values)
    choice = {}
    for s in mdp.states:
        acts = mdp.actions(s)
        if not acts:
            continue
        best = max(q[(s, a)] for a in acts)
        choice[s] = min(a for a in acts if q[(s, a)] >= best - TIE_TOL)
    return Policy.deterministic(choice)


def reachable_states(mdp: GroundMdp, policy: Policy, starts: Iterable[int]) -> Tuple[List[int], List[int]]:
    """
    从起点出发按策略可达的状态

    Returns:
        (可达状态, 可达但策略未定义的非终止状态)，均升序
    """
    seen = set()
    gaps = set()
    queue = deque(sorted(set(starts)))
    seen.update(queue)
    while queue:
        s = queue.popleft()
        if mdp.is_terminal(s):
            continue
        if s not in policy.choice:
            gaps.add(s)
            continue
        for a, pa in policy.action_distribution(s).items():
            for t, p in mdp.successors(s, a).items():
                if p > 0 and t not in seen:
                    seen.add(t)
                    queue.append(t)
    return sorted(seen), sorted(gaps)


def policy_evaluation(mdp: GroundMdp,
                      policy: Policy,
                      tolerance: float = settings.TOLERANCE,
                      starts: Optional[Iterable[int]] = None) -> ValueFunction:
    """
    精确策略评估：在可达状态上解线性方程组 (I - γP_π)V = R_π

    Args:
        mdp: MDP
        policy: 确定性或随机策略，可以只覆盖部分状态
        tolerance: 允许的Bellman残差
        starts: 查询的起点，默认全部状态

    Returns:
        V^π；起点不可达的状态取 0

    Raises:
        CoverageGapError: 可达状态上策略未定义
    """
    policy.check_against(mdp)
    start_list = list(mdp.states) if starts is None else list(starts)
    reach, gaps = reachable_states(mdp, policy, start_list)
    if gaps:
        raise CoverageGapError("策略在可达状态上未定义", gaps)

    active = [s for s in reach if not mdp.is_terminal(s)]
    values = np.zeros(mdp.state_count)
    if active:
        index = {s: i for i, s in enumerate(active)}
        n = len(active)
        a_mat = np.eye(n)
        rhs = np.zeros(n)
        for s in active:
            i = index[s]
            for a, pa in policy.action_distribution(s).items():
                rhs[i] += pa * mdp.reward(s, a)
                for t, p in mdp.successors(s, a).items():
                    if t in index:
                        a_mat[i, index[t]] -= mdp.discount * pa * p
        try:
            solution = np.linalg.solve(a_mat, rhs)
        except np.linalg.LinAlgError as e:
            raise NumericFailureError(f"{mdp.mdp_id}: 策略评估线性方程组求解失败: {e}") from e
        if not np.isfinite(solution).all():
            bad = active[_first_non_finite(solution)]
            raise NumericFailureError(f"策略评估在状态 {bad} 上出现非有限值", state=bad)
        values[active] = solution

        residual = float(np.max(np.abs(a_mat @ solution - rhs)))
        if residual > tolerance:
            logger.warning(f"{mdp.mdp_id}: 策略评估残差 {residual:.3e} 超过容差 {tolerance:.1e}")

    return ValueFunction(values, mdp.mdp_id)


def optimal_values(mdp: GroundMdp,
                   tolerance: float = settings.TOLERANCE,
                   max_sweeps: int = settings.MAX_SWEEPS) -> OptimalSolution:
    """值迭代 + 贪心 + 精确评估，作为最优值的对照"""
    result = value_iteration(mdp, tolerance, max_sweeps)
    policy = greedy_policy(mdp, result.values)
    exact = policy_evaluation(mdp, policy, tolerance)
    return OptimalSolution(values=exact, policy=policy, solve=result)
