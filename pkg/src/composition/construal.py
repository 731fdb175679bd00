#!/usr/bin/env python3
"""
构念组装
把多个模块片段按出口-入口端口拼接成一个抽象MDP，并合并到具体任务的绑定
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from config import settings
from src.errors import (
    CompositionConflictError,
    DanglingEndpointError,
    EndpointMismatchError,
    MdpValidationError,
)
from src.homomorphism.maps import ROLE_ABSTRACTION, HomomorphismMap
from src.mdp_core.mdp import GroundMdp, Pair

logger = logging.getLogger(__name__)

VERBATIM = "verbatim"

# (出口实例, 出口状态, 入口实例, 入口状态)
Gluing = Tuple[str, int, str, int]
Node = Tuple[str, int]


@dataclass(frozen=True)
class FragmentInstance:
    """构念中的一个模块实例"""
    instance_id: str
    module_id: str
    fragment: GroundMdp
    entries: Tuple[int, ...]
    exits: Tuple[int, ...]

    def __post_init__(self):
        for s in self.entries + self.exits:
            if not 0 <= s < self.fragment.state_count:
                raise MdpValidationError(f"实例 {self.instance_id} 的接口状态 {s} 不存在")

    @classmethod
    def from_fragment(cls,
                      fragment: GroundMdp,
                      instance_id: str,
                      module_id: Optional[str] = None,
                      entries: Optional[Iterable[int]] = None,
                      exits: Optional[Iterable[int]] = None) -> "FragmentInstance":
        """入口默认取片段的起始状态（没有时取0），出口默认取全部终止状态"""
        if entries is None:
            entries = fragment.start_states or (0,)
        if exits is None:
            exits = fragment.terminal_states
        return cls(instance_id, module_id or fragment.mdp_id, fragment,
                   tuple(sorted(set(entries))), tuple(sorted(set(exits))))


@dataclass(frozen=True)
class CostLedger:
    """求解成本 C_s、构念成本 C_c 与预算 C_max"""
    solve_cost: int = 0
    construal_cost: int = 0
    budget: int = settings.DEFAULT_BUDGET

    def __post_init__(self):
        if self.solve_cost < 0 or self.construal_cost < 0 or self.budget < 0:
            raise ValueError(f"成本与预算必须非负: {self}")

    @property
    def total(self) -> int:
        return self.solve_cost + self.construal_cost

    @property
    def within_budget(self) -> bool:
        return self.total <= self.budget

    def add(self, solve: int = 0, construal: int = 0) -> "CostLedger":
        return replace(self, solve_cost=self.solve_cost + solve, construal_cost=self.construal_cost + construal)


@dataclass
class Construal:
    """组装好的抽象MDP、到具体任务的绑定以及来源记录"""
    abstract_mdp: GroundMdp
    binding: Optional[HomomorphismMap]
    provenance: List[Tuple[str, str, str]]
    glue: List[Gluing]
    instance_states: Dict[str, Dict[int, int]]
    instance_modules: Dict[str, str]
    instance_bindings: Dict[str, HomomorphismMap] = field(default_factory=dict)
    entries: Tuple[int, ...] = ()
    exits: Tuple[int, ...] = ()
    no_analogy: bool = False
    coverage: float = 0.0

    @property
    def module_instances(self) -> List[str]:
        """非逐字导入的实例"""
        return [i for i, m in self.instance_modules.items() if m != VERBATIM]

    def embedding(self, instance_id: str) -> Dict[int, int]:
        """构念状态 -> 实例片段中的局部状态（只含未被删除的状态）"""
        owner = {}
        for local, glob in sorted(self.instance_states[instance_id].items()):
            owner.setdefault(glob, local)
        return owner


def _resolve(node: Node, redirect: Dict[Node, Node]) -> Node:
    seen = set()
    while node in redirect:
        if node in seen:
            raise CompositionConflictError(f"拼接形成环: {node}")
        seen.add(node)
        node = redirect[node]
    return node


def _match_binding(hom_map: HomomorphismMap, instances: Sequence[FragmentInstance]) -> FragmentInstance:
    for inst in instances:
        if hom_map.target_abstract == inst.instance_id:
            return inst
    matches = [inst for inst in instances if inst.fragment.mdp_id == hom_map.target_abstract]
    if len(matches) == 1:
        return matches[0]
    if not matches:
        raise EndpointMismatchError(f"绑定的陪域 {hom_map.target_abstract} 不对应任何实例")
    raise CompositionConflictError(f"绑定的陪域 {hom_map.target_abstract} 对应多个实例，请使用实例标识")


def compose(instances: Sequence[FragmentInstance],
            gluings: Sequence[Gluing] = (),
            bindings: Sequence[HomomorphismMap] = (),
            construal_id: str = "construal",
            precedence: bool = False) -> Construal:
    """
    组装构念

    片段取不相交并；每个被拼接的出口删除，指向它的转移重定向到配对的入口；
    各实例的绑定重新编号到并空间后合并。

    Args:
        instances: 模块实例（列在前面的优先级高）
        gluings: (出口实例, 出口状态, 入口实例, 入口状态)
        bindings: 具体任务到各实例的映射，按实例标识或片段标识匹配
        construal_id: 组装结果的MDP标识
        precedence: 两个片段在合并状态上都定义了动力学时，是否按列出顺序取前者

    Raises:
        DanglingEndpointError: 拼接端点不存在或不是接口状态
        CompositionConflictError: 合并状态的动力学冲突、绑定作用域相交等
    """
    if not instances:
        raise CompositionConflictError("至少需要一个实例")
    by_id: Dict[str, FragmentInstance] = {}
    for inst in instances:
        if inst.instance_id in by_id:
            raise CompositionConflictError(f"实例标识重复: {inst.instance_id}")
        by_id[inst.instance_id] = inst
    rank = {inst.instance_id: i for i, inst in enumerate(instances)}

    redirect: Dict[Node, Node] = {}
    dynamics_from: Dict[Node, Node] = {}
    glue: List[Gluing] = []
    for exit_inst, exit_state, entry_inst, entry_state in gluings:
        if exit_inst not in by_id or entry_inst not in by_id:
            raise DanglingEndpointError(f"拼接引用了不存在的实例: {exit_inst} / {entry_inst}")
        src, dst = by_id[exit_inst], by_id[entry_inst]
        if exit_state not in src.exits:
            raise DanglingEndpointError(f"{exit_inst} 的状态 {exit_state} 不是出口")
        if entry_state not in dst.entries:
            raise DanglingEndpointError(f"{entry_inst} 的状态 {entry_state} 不是入口")
        node = (exit_inst, int(exit_state))
        if node in redirect:
            raise CompositionConflictError(f"出口 {node} 被拼接了两次")
        target = (entry_inst, int(entry_state))
        redirect[node] = target

        exit_defines = bool(src.fragment.actions(exit_state))
        entry_defines = bool(dst.fragment.actions(entry_state))
        if exit_defines and entry_defines:
            if not precedence:
                raise CompositionConflictError(
                    f"{exit_inst}:{exit_state} 与 {entry_inst}:{entry_state} 都定义了动力学")
            if rank[exit_inst] < rank[entry_inst]:
                dynamics_from[target] = node
        elif exit_defines:
            dynamics_from[target] = node
        glue.append((exit_inst, int(exit_state), entry_inst, int(entry_state)))

    kept: List[Node] = [(inst.instance_id, s) for inst in instances for s in inst.fragment.states
                        if (inst.instance_id, s) not in redirect]
    index = {node: i for i, node in enumerate(kept)}

    def glob(node: Node) -> int:
        return index[_resolve(node, redirect)]

    transitions: Dict[Pair, Dict[int, float]] = {}
    rewards: Dict[Pair, float] = {}
    labels, tags, action_labels = {}, {}, {}
    provenance: List[Tuple[str, str, str]] = []
    for node in kept:
        g_state = index[node]
        inst = by_id[node[0]]
        if node[1] in inst.fragment.state_labels:
            labels[g_state] = f"{inst.instance_id}:{inst.fragment.state_labels[node[1]]}"
        if inst.fragment.tags(node[1]):
            tags[g_state] = inst.fragment.tags(node[1])
        provenance.append((f"s{g_state}", inst.module_id, f"{inst.instance_id}/s{node[1]}"))

        source = dynamics_from.get(node, node)
        src_inst = by_id[source[0]]
        for a in src_inst.fragment.actions(source[1]):
            dist: Dict[int, float] = {}
            for t, p in src_inst.fragment.successors(source[1], a).items():
                gt = glob((source[0], t))
                dist[gt] = dist.get(gt, 0.0) + p
            transitions[(g_state, a)] = dist
            rewards[(g_state, a)] = src_inst.fragment.reward(source[1], a)
            provenance.append((f"s{g_state}.a{a}", src_inst.module_id, f"{source[0]}/s{source[1]}.a{a}"))
            if a in src_inst.fragment.action_labels:
                action_labels.setdefault(a, src_inst.fragment.action_labels[a])

    instance_states = {inst.instance_id: {s: glob((inst.instance_id, s)) for s in inst.fragment.states}
                       for inst in instances}
    entries = sorted({instance_states[inst.instance_id][s] for inst in instances for s in inst.entries})
    exits = sorted({index[(inst.instance_id, s)] for inst in instances for s in inst.exits
                    if (inst.instance_id, s) not in redirect})

    abstract = GroundMdp.build(
        mdp_id=construal_id,
        state_count=len(kept),
        discount=instances[0].fragment.discount,
        transitions=transitions,
        rewards=rewards,
        state_labels=labels,
        feature_tags=tags,
        action_labels=action_labels,
        start_states=[instance_states[instances[0].instance_id][s] for s in instances[0].entries],
    )

    binding = None
    instance_bindings: Dict[str, HomomorphismMap] = {}
    if bindings:
        ground_ids = {b.source_ground for b in bindings}
        if len(ground_ids) != 1:
            raise EndpointMismatchError(f"绑定来自不同的具体任务: {sorted(ground_ids)}")
        f: Dict[int, int] = {}
        g: Dict[Pair, int] = {}
        scope: List[Pair] = []
        for hom_map in bindings:
            inst = _match_binding(hom_map, instances)
            if inst.instance_id in instance_bindings:
                raise CompositionConflictError(f"实例 {inst.instance_id} 有多个绑定")
            instance_bindings[inst.instance_id] = hom_map
            overlap = sorted(set(f) & set(hom_map.f))
            if overlap:
                raise CompositionConflictError(f"绑定的具体状态相交: {overlap[:5]}")
            for s, x in hom_map.f.items():
                f[s] = instance_states[inst.instance_id][x]
            g.update(hom_map.g)
            scope.extend(hom_map.scope)
        binding = HomomorphismMap.create(ground_ids.pop(), construal_id, f, g, scope, ROLE_ABSTRACTION)
        for (s, a), abar in binding.g.items():
            if (binding.f[s], abar) not in abstract.transitions:
                raise CompositionConflictError(f"合并后的绑定 g({s}, {a}) = {abar} 在构念状态 {binding.f[s]} 上不可用")

    logger.debug(f"组装构念 {construal_id}: {len(instances)} 个实例，{len(glue)} 处拼接，{abstract.state_count} 个状态")
    return Construal(
        abstract_mdp=abstract,
        binding=binding,
        provenance=provenance,
        glue=glue,
        instance_states=instance_states,
        instance_modules={inst.instance_id: inst.module_id for inst in instances},
        instance_bindings=instance_bindings,
        entries=tuple(entries),
        exits=tuple(exits),
    )


def construal_instance(construal: Construal, instance_id: str, module_id: Optional[str] = None) -> FragmentInstance:
    """把已组装的构念当作一个新的实例（用于链式组装）"""
    fragment = construal.abstract_mdp.with_id(module_id or construal.abstract_mdp.mdp_id)
    return FragmentInstance(instance_id, module_id or fragment.mdp_id, fragment, construal.entries, construal.exits)
