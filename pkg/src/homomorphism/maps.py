#!/usr/bin/env python3
"""
同态映射与证书
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

from src.errors import EndpointMismatchError, MdpValidationError
from src.mdp_core.mdp import GroundMdp, Pair

# 从具体MDP到抽象MDP
ROLE_ABSTRACTION = "abstraction"
# 抽象模块之间的类比
ROLE_ANALOGY = "analogy"
ROLES = (ROLE_ABSTRACTION, ROLE_ANALOGY)


@dataclass(frozen=True)
class HomomorphismMap:
    """部分状态映射 f、逐状态动作映射 g 以及显式作用域"""
    source_ground: str
    target_abstract: str
    f: Dict[int, int]
    g: Dict[Pair, int]
    scope: FrozenSet[Pair]
    role: str = ROLE_ABSTRACTION

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"未知的映射角色: {self.role}")
        for s, a in self.g:
            if s not in self.f:
                raise MdpValidationError(f"g 在 ({s}, {a}) 上有定义但 f 在 {s} 上没有定义")
        outside = sorted(set(self.scope) - set(self.g))
        if outside:
            raise MdpValidationError(f"作用域超出 g 的定义域: {outside[:5]}")

    @classmethod
    def create(cls,
               source_ground: str,
               target_abstract: str,
               f: Mapping[int, int],
               g: Mapping[Pair, int],
               scope: Optional[Iterable[Pair]] = None,
               role: str = ROLE_ABSTRACTION) -> "HomomorphismMap":
        """scope 省略时取 g 的整个定义域"""
        g_clean = {(int(s), int(a)): int(x) for (s, a), x in sorted(g.items())}
        return cls(
            source_ground=source_ground,
            target_abstract=target_abstract,
            f={int(s): int(x) for s, x in sorted(f.items())},
            g=g_clean,
            scope=frozenset(g_clean) if scope is None else frozenset((int(s), int(a)) for s, a in scope),
            role=role,
        )

    @classmethod
    def identity(cls, mdp: GroundMdp, target_id: Optional[str] = None) -> "HomomorphismMap":
        """MDP到自身（或其同构副本）的恒等映射，作用域为全部动作对"""
        pairs = mdp.available_pairs()
        return cls.create(mdp.mdp_id, target_id or mdp.mdp_id,
                          {s: s for s in mdp.states}, {p: p[1] for p in pairs})

    @property
    def domain(self) -> FrozenSet[int]:
        return frozenset(self.f)

    @property
    def scope_states(self) -> FrozenSet[int]:
        return frozenset(s for s, _ in self.scope)

    def image(self, states: Optional[Iterable[int]] = None) -> FrozenSet[int]:
        """f 在给定状态（默认整个定义域）上的像"""
        if states is None:
            return frozenset(self.f.values())
        return frozenset(self.f[s] for s in states if s in self.f)

    def with_scope(self, scope: Iterable[Pair]) -> "HomomorphismMap":
        return HomomorphismMap(self.source_ground, self.target_abstract, dict(self.f),
                               dict(self.g), frozenset(scope), self.role)

    def check_endpoints(self, ground: GroundMdp, abstract: GroundMdp):
        if self.source_ground != ground.mdp_id or self.target_abstract != abstract.mdp_id:
            raise EndpointMismatchError(
                f"映射端点 {self.source_ground} -> {self.target_abstract} "
                f"与给定的 {ground.mdp_id} -> {abstract.mdp_id} 不一致")

    def uncovered_actions(self, abstract: GroundMdp, states: Optional[Iterable[int]] = None) -> List[Pair]:
        """
        返回 (s, 抽象动作) 列表：抽象动作在 f(s) 上可用，但 g 在 s 上没有它的原像

        states 默认取作用域内的状态
        """
        states = self.scope_states if states is None else states
        preimages: Dict[int, Set[int]] = {}
        for (s, _), x in self.g.items():
            preimages.setdefault(s, set()).add(x)
        missing = []
        for s in sorted(set(states)):
            if s not in self.f:
                continue
            covered = preimages.get(s, set())
            missing.extend((s, x) for x in abstract.actions(self.f[s]) if x not in covered)
        return missing

    def unreached_states(self, abstract: GroundMdp) -> List[int]:
        """作用域内抽象动作能到达、却不在 f 的像中的抽象状态"""
        image = self.image()
        reached = set()
        for s, a in self.scope:
            reached.update(y for y, p in abstract.successors(self.f[s], self.g[(s, a)]).items() if p > 0.0)
        return sorted(reached - image)

    def validate(self, ground: GroundMdp, abstract: GroundMdp, require_onto: bool = False):
        """
        检查映射与两个MDP之间的不变量

        require_onto 为真时还要求：作用域内每个状态上 g 覆盖 f(s) 的全部抽象动作，
        且作用域内的抽象转移只落在 f 的像里
        """
        self.check_endpoints(ground, abstract)
        for s, x in self.f.items():
            if not 0 <= s < ground.state_count:
                raise MdpValidationError(f"f 的定义域含不存在的具体状态 {s}")
            if not 0 <= x < abstract.state_count:
                raise MdpValidationError(f"f({s}) = {x} 不是抽象状态")
        for (s, a), x in self.g.items():
            if (s, a) not in ground.transitions:
                raise MdpValidationError(f"g 定义在不可用的动作对 ({s}, {a}) 上")
            if (self.f[s], x) not in abstract.transitions:
                raise MdpValidationError(f"g({s}, {a}) = {x} 在抽象状态 {self.f[s]} 上不可用")
        if not require_onto:
            return
        uncovered = self.uncovered_actions(abstract)
        if uncovered:
            raise MdpValidationError(f"g 在以下 (状态, 抽象动作) 上没有原像: {uncovered[:5]}")
        unreached = self.unreached_states(abstract)
        if unreached:
            raise MdpValidationError(f"f 的像没有覆盖作用域可达的抽象状态: {unreached[:5]}")

    def describe(self) -> str:
        return (f"映射[{self.role}] {self.source_ground} -> {self.target_abstract}: "
                f"|f|={len(self.f)} |g|={len(self.g)} |scope|={len(self.scope)}")


@dataclass(frozen=True)
class HomCertificate:
    """作用域内每个动作对的奖励偏差与转移偏差（总变差）"""
    reward_deviation: Dict[Pair, float]
    transition_deviation: Dict[Pair, float]
    max_reward_deviation: float
    max_transition_deviation: float
    strict: bool
    coverage_fraction: float
    unmapped_mass: Dict[Pair, float] = field(default_factory=dict)
    # 作用域状态上没有 g 原像的抽象动作；非空时 strict 为假
    uncovered_actions: Tuple[Pair, ...] = ()
    # 只看偏差：作用域内奖励与转移都在容差内
    commutes: bool = False

    @property
    def total_deviation(self) -> float:
        return self.max_reward_deviation + self.max_transition_deviation

    def summary(self) -> Dict[str, object]:
        return {
            "strict": self.strict,
            "commutes": self.commutes,
            "uncovered_actions": len(self.uncovered_actions),
            "max_reward_deviation": self.max_reward_deviation,
            "max_transition_deviation": self.max_transition_deviation,
            "coverage_fraction": self.coverage_fraction,
            "pairs": len(self.reward_deviation),
        }
