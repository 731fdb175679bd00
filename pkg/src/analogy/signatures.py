#!/usr/bin/env python3
"""
状态签名
用于类比搜索的候选排序和模块检索。签名在严格同态下不变：
同一状态多个具体动作映到同一抽象动作时只保留去重后的集合。
"""

import hashlib
from typing import FrozenSet, Iterable, List, Optional, Tuple

from src.mdp_core.mdp import GroundMdp


def _digest(payload: str) -> str:
    return hashlib.blake2b(payload.encode("utf-8"), digest_size=8).hexdigest()


def _reward_key(value: float) -> str:
    # -0.0 与 0.0 视为相同
    return repr(round(value, 9) + 0.0)


def signature_levels(mdp: GroundMdp, horizon: int = 1) -> List[Tuple[str, ...]]:
    """
    每个状态在 0..horizon 各层的签名

    第0层是 (是否终止, 排序后的标签)；第k层在第0层之上加入
    每个动作的 (奖励, 后继第k-1层签名的去重集合) 的去重集合。
    """
    if horizon < 1:
        raise ValueError(f"horizon 必须 ≥ 1: {horizon}")
    base = [_digest(repr((mdp.is_terminal(s), tuple(sorted(mdp.tags(s)))))) for s in mdp.states]
    levels = [base]
    for _ in range(horizon):
        prev = levels[-1]
        current = []
        for s in mdp.states:
            items = set()
            for a in mdp.actions(s):
                succ = tuple(sorted({prev[t] for t, p in mdp.successors(s, a).items() if p > 0}))
                items.add((_reward_key(mdp.reward(s, a)), succ))
            current.append(_digest(repr((base[s], tuple(sorted(items))))))
        levels.append(current)
    return [tuple(level[s] for level in levels) for s in mdp.states]


def state_signature(mdp: GroundMdp, state: int, horizon: int = 1) -> str:
    """状态在给定 horizon 上的签名（十六进制摘要）"""
    return signature_levels(mdp, horizon)[state][horizon]


def signature_set(mdp: GroundMdp, horizon: int = 1, states: Optional[Iterable[int]] = None) -> FrozenSet[str]:
    """给定状态（默认全部）的签名去重集合"""
    levels = signature_levels(mdp, horizon)
    chosen = mdp.states if states is None else states
    return frozenset(levels[s][horizon] for s in chosen)


def signature_distance(a: Tuple[str, ...], b: Tuple[str, ...]) -> int:
    """两组逐层签名中不相同的层数，越小越相似"""
    return sum(1 for x, y in zip(a, b) if x != y)


def jaccard(a: FrozenSet[str], b: FrozenSet[str]) -> float:
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)
