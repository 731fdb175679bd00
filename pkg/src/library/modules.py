#!/usr/bin/env python3
"""
模块库的数据结构
Module（抽象片段 + 存储的解 + 使用统计）、Library 与 EpisodeRecord
"""

import copy
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from config import settings
from src.analogy.signatures import signature_set
from src.composition.construal import Construal, CostLedger, FragmentInstance
from src.errors import MdpValidationError
from src.homomorphism.maps import HomomorphismMap
from src.mdp_core.mdp import GroundMdp, Policy, ValueFunction
from src.mdp_core.solvers import optimal_values, policy_evaluation

logger = logging.getLogger(__name__)


def state_element(x: int) -> str:
    return f"s{x}"


def action_element(x: int, a: int) -> str:
    return f"s{x}.a{a}"


def parse_element(element: str) -> Tuple[int, Optional[int]]:
    """"s3" -> (3, None)；"s3.a1" -> (3, 1)"""
    if "." in element:
        state, action = element.split(".", 1)
        return int(state[1:]), int(action[1:])
    return int(element[1:]), None


@dataclass
class Module:
    """抽象MDP片段、接口状态、可选的存储解以及使用/丢弃统计"""
    module_id: str
    fragment: GroundMdp
    entries: Tuple[int, ...]
    exits: Tuple[int, ...]
    policy: Optional[Policy] = None
    values: Optional[ValueFunction] = None
    use_count: Dict[str, int] = field(default_factory=dict)
    discard_count: Dict[str, int] = field(default_factory=dict)
    lineage: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.fragment.mdp_id != self.module_id:
            self.fragment = self.fragment.with_id(self.module_id)
        self.entries = tuple(sorted(set(self.entries)))
        self.exits = tuple(sorted(set(self.exits)))
        for s in self.entries + self.exits:
            if not 0 <= s < self.fragment.state_count:
                raise MdpValidationError(f"模块 {self.module_id} 的接口状态 {s} 不存在")
        for s in self.exits:
            if not self.fragment.is_terminal(s):
                raise MdpValidationError(f"模块 {self.module_id} 的出口 {s} 不是终止状态")
        for element, n in self.discard_count.items():
            if n > self.use_count.get(element, 0):
                raise MdpValidationError(f"模块 {self.module_id} 的元素 {element} 丢弃次数超过使用次数")
        if self.values is not None and self.values.paired_mdp != self.module_id:
            self.values = ValueFunction(self.values.values, self.module_id)

    @classmethod
    def from_fragment(cls,
                      fragment: GroundMdp,
                      module_id: Optional[str] = None,
                      entries: Optional[Iterable[int]] = None,
                      exits: Optional[Iterable[int]] = None,
                      solve: bool = True,
                      lineage: Iterable[str] = ()) -> "Module":
        """由片段构造模块；solve=True 时存储最优策略与值"""
        module_id = module_id or fragment.mdp_id
        fragment = fragment.with_id(module_id)
        if entries is None:
            entries = fragment.start_states or (0,)
        if exits is None:
            exits = fragment.terminal_states
        policy = values = None
        if solve and fragment.transitions:
            solution = optimal_values(fragment)
            policy, values = solution.policy, solution.values
        return cls(module_id, fragment, tuple(entries), tuple(exits), policy, values, lineage=list(lineage))

    @classmethod
    def from_construal(cls,
                       construal: Construal,
                       module_id: str,
                       policy: Optional[Policy] = None,
                       solve: bool = False) -> "Module":
        """把组装好的构念变成模块（接口取构念的入口与未拼接的出口）"""
        fragment = construal.abstract_mdp.with_id(module_id)
        module = cls(module_id, fragment, construal.entries, construal.exits,
                     lineage=[construal.abstract_mdp.mdp_id])
        if policy is not None:
            module.policy = policy
            module.values = policy_evaluation(fragment, policy)
        elif solve:
            solution = optimal_values(fragment)
            module.policy, module.values = solution.policy, solution.values
        return module

    def elements(self) -> List[str]:
        """状态元素与动作元素的键"""
        keys = []
        for x in self.fragment.states:
            keys.append(state_element(x))
            keys.extend(action_element(x, a) for a in self.fragment.actions(x))
        return keys

    def instance(self, instance_id: str, extra_entries: Iterable[int] = ()) -> FragmentInstance:
        entries = tuple(sorted(set(self.entries) | set(extra_entries)))
        return FragmentInstance(instance_id, self.module_id, self.fragment, entries, self.exits)

    def discard_ratio(self, element: str) -> float:
        uses = self.use_count.get(element, 0)
        return self.discard_count.get(element, 0) / uses if uses else 0.0


@dataclass
class Library:
    """模块库；signature_index 在每次修改后重建"""
    modules: Dict[str, Module] = field(default_factory=dict)
    signature_index: Dict[str, FrozenSet[str]] = field(default_factory=dict)
    seen_episodes: Set[str] = field(default_factory=set)
    horizon: int = settings.SIGNATURE_HORIZON

    def __post_init__(self):
        self.reindex()

    def __len__(self):
        return len(self.modules)

    def __contains__(self, module_id: str) -> bool:
        return module_id in self.modules

    def reindex(self):
        self.modules = dict(sorted(self.modules.items()))
        self.signature_index = {mid: signature_set(m.fragment, self.horizon) for mid, m in self.modules.items()}

    def add(self, module: Module):
        self.modules[module.module_id] = module
        self.reindex()
        logger.info(f"模块库加入 {module.module_id}（{module.fragment.state_count} 个状态），共 {len(self.modules)} 个模块")

    def remove(self, module_id: str):
        self.modules.pop(module_id, None)
        self.reindex()

    def copy(self) -> "Library":
        return copy.deepcopy(self)

    def next_id(self, prefix: str = "mod") -> str:
        n = 1
        while f"{prefix}-{n:03d}" in self.modules:
            n += 1
        return f"{prefix}-{n:03d}"


@dataclass
class EpisodeRecord:
    """一个回合的任务、构念、策略、使用的映射与成本"""
    task_id: str
    task: GroundMdp
    construal: Construal
    policy: Policy
    maps: Dict[str, HomomorphismMap]
    ledger: CostLedger

    def __post_init__(self):
        for instance_id, hom_map in self.maps.items():
            if hom_map.source_ground != self.task.mdp_id:
                raise MdpValidationError(f"映射 {instance_id} 的定义域不是任务 {self.task.mdp_id}")
            if instance_id not in self.construal.instance_modules:
                raise MdpValidationError(f"映射 {instance_id} 不对应构念中的实例")
