#!/usr/bin/env python3
"""
有限表格型MDP数据结构
包含 GroundMdp、Policy、ValueFunction 以及求解器使用的稠密转移核
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union
import logging

import numpy as np

from src.errors import MdpValidationError, PairingMismatchError

logger = logging.getLogger(__name__)

# 概率和的容差
PROB_TOL = 1e-9

Pair = Tuple[int, int]
Distribution = Dict[int, float]


@dataclass(frozen=True)
class TabularKernel:
    """按 (状态, 动作) 对展开的稠密转移核，行按状态再按动作排序"""
    pairs: Tuple[Pair, ...]
    pair_index: Dict[Pair, int]
    rewards: np.ndarray
    matrix: np.ndarray
    starts: np.ndarray
    nonterminal: np.ndarray


@dataclass(frozen=True)
class GroundMdp:
    """有限MDP（状态、每状态动作、随机转移、奖励、折扣）"""
    mdp_id: str
    state_count: int
    discount: float
    transitions: Dict[Pair, Distribution]
    rewards: Dict[Pair, float]
    terminal_states: FrozenSet[int] = frozenset()
    state_labels: Dict[int, str] = field(default_factory=dict)
    feature_tags: Dict[int, FrozenSet[str]] = field(default_factory=dict)
    action_labels: Dict[int, str] = field(default_factory=dict)
    start_states: Tuple[int, ...] = ()

    def __post_init__(self):
        self.validate()

    # ---------- 构造 ----------
    @classmethod
    def build(cls,
              mdp_id: str,
              state_count: int,
              discount: float,
              transitions: Mapping[Pair, Mapping[int, float]],
              rewards: Mapping[Pair, float],
              terminal_states: Optional[Iterable[int]] = None,
              state_labels: Optional[Mapping[int, str]] = None,
              feature_tags: Optional[Mapping[int, Iterable[str]]] = None,
              action_labels: Optional[Mapping[int, str]] = None,
              start_states: Iterable[int] = ()) -> "GroundMdp":
        """
        规范化输入并构造MDP

        Args:
            transitions: (s, a) -> {s': p}，零概率条目会被丢弃
            terminal_states: 省略时取所有没有动作的状态

        Returns:
            GroundMdp
        """
        clean = {}
        for (s, a), dist in sorted(transitions.items()):
            clean[(int(s), int(a))] = {int(t): float(p) for t, p in sorted(dist.items()) if p != 0.0}
        if terminal_states is None:
            with_actions = {s for s, _ in clean}
            terminal_states = [s for s in range(state_count) if s not in with_actions]
        return cls(
            mdp_id=mdp_id,
            state_count=int(state_count),
            discount=float(discount),
            transitions=clean,
            rewards={(int(s), int(a)): float(r) for (s, a), r in sorted(rewards.items())},
            terminal_states=frozenset(int(s) for s in terminal_states),
            state_labels={int(s): str(t) for s, t in sorted((state_labels or {}).items())},
            feature_tags={int(s): frozenset(tags) for s, tags in sorted((feature_tags or {}).items()) if tags},
            action_labels={int(a): str(t) for a, t in sorted((action_labels or {}).items())},
            start_states=tuple(sorted(set(int(s) for s in start_states))),
        )

    def with_id(self, mdp_id: str) -> "GroundMdp":
        """返回换了标识的副本"""
        return GroundMdp(mdp_id, self.state_count, self.discount, dict(self.transitions),
                         dict(self.rewards), self.terminal_states, dict(self.state_labels),
                         dict(self.feature_tags), dict(self.action_labels), self.start_states)

    # ---------- 校验 ----------
    def validate(self):
        """检查所有不变量，失败时抛出 MdpValidationError"""
        if self.state_count < 1:
            raise MdpValidationError(f"状态数必须为正: {self.state_count}")
        if not (0.0 <= self.discount < 1.0) or not math.isfinite(self.discount):
            raise MdpValidationError(f"折扣必须在[0, 1)内: {self.discount}")
        if set(self.transitions) != set(self.rewards):
            missing = sorted(set(self.transitions) ^ set(self.rewards))
            raise MdpValidationError(f"转移与奖励定义的动作对不一致: {missing[:5]}")

        n = self.state_count
        with_actions = set()
        for (s, a), dist in self.transitions.items():
            if not 0 <= s < n:
                raise MdpValidationError(f"状态越界: {s}")
            with_actions.add(s)
            if not dist:
                raise MdpValidationError(f"({s}, {a}) 的转移分布为空")
            total = 0.0
            for t, p in dist.items():
                if not 0 <= t < n:
                    raise MdpValidationError(f"({s}, {a}) 的后继状态越界: {t}")
                if p < 0 or not math.isfinite(p):
                    raise MdpValidationError(f"({s}, {a}) 含非法概率 {p}")
                total += p
            if abs(total - 1.0) > PROB_TOL:
                raise MdpValidationError(f"({s}, {a}) 的转移概率和为 {total!r}，不等于1")
            r = self.rewards[(s, a)]
            if not math.isfinite(r):
                raise MdpValidationError(f"({s}, {a}) 的奖励不是有限值")

        for s in self.terminal_states:
            if not 0 <= s < n:
                raise MdpValidationError(f"终止状态越界: {s}")
            if s in with_actions:
                raise MdpValidationError(f"终止状态 {s} 不能有可用动作")
        for s in range(n):
            if s not in with_actions and s not in self.terminal_states:
                raise MdpValidationError(f"非终止状态 {s} 没有可用动作")
        for s in self.start_states:
            if not 0 <= s < n:
                raise MdpValidationError(f"起始状态越界: {s}")

    # ---------- 查询 ----------
    @cached_property
    def _actions(self) -> Tuple[Tuple[int, ...], ...]:
        per_state: List[List[int]] = [[] for _ in range(self.state_count)]
        for s, a in sorted(self.transitions):
            per_state[s].append(a)
        return tuple(tuple(acts) for acts in per_state)

    def actions(self, state: int) -> Tuple[int, ...]:
        """状态上可用的动作（升序）"""
        return self._actions[state]

    def is_terminal(self, state: int) -> bool:
        return state in self.terminal_states

    @property
    def states(self) -> range:
        return range(self.state_count)

    def available_pairs(self) -> List[Pair]:
        """所有可用的 (状态, 动作) 对，按状态再按动作排序"""
        return sorted(self.transitions)

    def successors(self, state: int, action: int) -> Distribution:
        return self.transitions[(state, action)]

    def reward(self, state: int, action: int) -> float:
        return self.rewards[(state, action)]

    def reward_range(self) -> float:
        """max |R| over available pairs"""
        if not self.rewards:
            return 0.0
        return max(abs(r) for r in self.rewards.values())

    def tags(self, state: int) -> FrozenSet[str]:
        return self.feature_tags.get(state, frozenset())

    def label(self, state: int) -> str:
        return self.state_labels.get(state, str(state))

    def start_distribution(self) -> Dict[int, float]:
        """起始分布：声明了起始状态时在其上均匀，否则在全部状态上均匀"""
        starts = self.start_states or tuple(self.states)
        weight = 1.0 / len(starts)
        return {s: weight for s in starts}

    @cached_property
    def predecessors(self) -> Dict[int, Tuple[Pair, ...]]:
        """state -> pairs (p, a) with positive probability of reaching it"""
        preds: Dict[int, List[Pair]] = {}
        for pair, dist in sorted(self.transitions.items()):
            for t in dist:
                preds.setdefault(t, []).append(pair)
        return {t: tuple(pairs) for t, pairs in preds.items()}

    @cached_property
    def kernel(self) -> TabularKernel:
        """求解器使用的稠密转移核（惰性构造并缓存）"""
        pairs = tuple(self.available_pairs())
        matrix = np.zeros((len(pairs), self.state_count))
        rewards = np.zeros(len(pairs))
        for row, pair in enumerate(pairs):
            for t, p in self.transitions[pair].items():
                matrix[row, t] = p
            rewards[row] = self.rewards[pair]
        nonterminal = np.array([s for s in self.states if self._actions[s]], dtype=int)
        starts = []
        row = 0
        for s in self.states:
            if self._actions[s]:
                starts.append(row)
                row += len(self._actions[s])
        return TabularKernel(
            pairs=pairs,
            pair_index={pair: i for i, pair in enumerate(pairs)},
            rewards=rewards,
            matrix=matrix,
            starts=np.array(starts, dtype=int),
            nonterminal=nonterminal,
        )

    def describe(self) -> str:
        return (f"MDP[{self.mdp_id}] 状态数={self.state_count} "
                f"动作对={len(self.transitions)} 折扣={self.discount}")


@dataclass(frozen=True)
class Policy:
    """确定性或随机策略，可以只在部分状态上定义"""
    kind: str
    choice: Dict[int, Union[int, Dict[int, float]]]

    DETERMINISTIC = "deterministic"
    STOCHASTIC = "stochastic"

    def __post_init__(self):
        if self.kind not in (self.DETERMINISTIC, self.STOCHASTIC):
            raise ValueError(f"未知的策略类型: {self.kind}")
        if self.kind == self.STOCHASTIC:
            for s, dist in self.choice.items():
                total = sum(dist.values())
                if abs(total - 1.0) > PROB_TOL or any(p < 0 for p in dist.values()):
                    raise ValueError(f"状态 {s} 的随机选择概率和为 {total}")

    @classmethod
    def deterministic(cls, mapping: Mapping[int, int]) -> "Policy":
        return cls(cls.DETERMINISTIC, {int(s): int(a) for s, a in sorted(mapping.items())})

    @classmethod
    def stochastic(cls, mapping: Mapping[int, Mapping[int, float]]) -> "Policy":
        return cls(cls.STOCHASTIC, {int(s): {int(a): float(p) for a, p in sorted(d.items())}
                                    for s, d in sorted(mapping.items())})

    @classmethod
    def uniform(cls, mdp: GroundMdp) -> "Policy":
        """在所有非终止状态上均匀随机"""
        return cls.stochastic({s: {a: 1.0 / len(mdp.actions(s)) for a in mdp.actions(s)}
                               for s in mdp.states if mdp.actions(s)})

    @property
    def coverage(self) -> FrozenSet[int]:
        return frozenset(self.choice)

    def action_distribution(self, state: int) -> Dict[int, float]:
        chosen = self.choice[state]
        if self.kind == self.DETERMINISTIC:
            return {chosen: 1.0}
        return {a: p for a, p in chosen.items() if p > 0.0}

    def action(self, state: int) -> int:
        """确定性策略的动作；随机策略取概率最大者（并列取最小动作）"""
        chosen = self.choice[state]
        if self.kind == self.DETERMINISTIC:
            return chosen
        return min(chosen, key=lambda a: (-chosen[a], a))

    def check_against(self, mdp: GroundMdp):
        """检查每个选择的动作都在其状态上可用"""
        for s in self.choice:
            for a in self.action_distribution(s):
                if (s, a) not in mdp.transitions:
                    raise MdpValidationError(f"策略在状态 {s} 选择了不可用动作 {a}")

    def restricted(self, states: Iterable[int]) -> "Policy":
        keep = set(states)
        return Policy(self.kind, {s: c for s, c in self.choice.items() if s in keep})


@dataclass(frozen=True, eq=False)
class ValueFunction:
    """每个状态一个实数值，并记录它所属的MDP标识"""
    values: np.ndarray
    paired_mdp: str

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __eq__(self, other):
        if not isinstance(other, ValueFunction):
            return NotImplemented
        return self.paired_mdp == other.paired_mdp and np.array_equal(self.values, other.values)

    __hash__ = None

    def __getitem__(self, state: int) -> float:
        return float(self.values[state])

    def __len__(self):
        return len(self.values)

    @classmethod
    def zeros(cls, mdp: GroundMdp) -> "ValueFunction":
        return cls(np.zeros(mdp.state_count), mdp.mdp_id)

    def check_pairing(self, mdp: GroundMdp):
        if self.paired_mdp != mdp.mdp_id or len(self.values) != mdp.state_count:
            raise PairingMismatchError(
                f"值函数属于 {self.paired_mdp}（{len(self.values)}个状态），"
                f"与 {mdp.mdp_id}（{mdp.state_count}个状态）不配对")

    def as_dict(self) -> Dict[int, float]:
        return {s: float(v) for s, v in enumerate(self.values)}
