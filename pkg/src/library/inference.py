#!/usr/bin/env python3
"""
给定模块库时的推断
construe：按需组装构念；solve：用模块存储的解热启动求解；afford：列出可供性
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from config import settings
from src.analogy.retrieval import rank_candidates
from src.analogy.search import MODE_PARTIAL, SearchBudget, SearchResult, find_homomorphism
from src.composition.construal import VERBATIM, Construal, CostLedger, FragmentInstance, compose
from src.homomorphism.maps import ROLE_ABSTRACTION, HomomorphismMap
from src.library.modules import Library
from src.lifting.lifter import lift_values
from src.mdp_core.mdp import GroundMdp, Pair, Policy, ValueFunction
from src.mdp_core.solvers import SolveResult, greedy_policy, value_iteration

logger = logging.getLogger(__name__)


def _trim_map(task: GroundMdp, hom_map: HomomorphismMap) -> HomomorphismMap:
    """
    只保留作用域闭合的状态

    非终止状态的每个可用动作都要在作用域内，且全部后继仍在映射定义域里；
    删掉一个状态可能让前驱不再闭合，反复删到不动点。终止状态原样保留。
    """
    keep = {s for s in hom_map.f
            if task.is_terminal(s) or all((s, a) in hom_map.scope for a in task.actions(s))}
    changed = True
    while changed:
        changed = False
        for s in sorted(keep):
            if task.is_terminal(s):
                continue
            if any(t not in keep for a in task.actions(s) for t in task.successors(s, a)):
                keep.discard(s)
                changed = True
    if not any(not task.is_terminal(s) for s in keep):
        keep = set()
    f = {s: x for s, x in hom_map.f.items() if s in keep}
    g = {pair: abar for pair, abar in hom_map.g.items() if pair[0] in keep}
    scope = [pair for pair in hom_map.scope if pair[0] in keep]
    return HomomorphismMap.create(hom_map.source_ground, hom_map.target_abstract, f, g, scope, hom_map.role)


def _verbatim_instance(task: GroundMdp, remainder: Sequence[int],
                       owner: Dict[int, Tuple[str, int]]):
    """
    把未覆盖的具体状态原样导入为一个片段

    指向已覆盖状态的转移改指向占位出口，再拼接到拥有该状态的实例入口。

    Returns:
        (FragmentInstance, 拼接列表, 逐字绑定)
    """
    local = {s: i for i, s in enumerate(remainder)}
    placeholders: Dict[int, int] = {}

    def slot(t: int) -> int:
        if t in local:
            return local[t]
        if t not in placeholders:
            placeholders[t] = len(remainder) + len(placeholders)
        return placeholders[t]

    transitions: Dict[Pair, Dict[int, float]] = {}
    rewards: Dict[Pair, float] = {}
    for s in remainder:
        for a in task.actions(s):
            transitions[(local[s], a)] = {slot(t): p for t, p in task.successors(s, a).items()}
            rewards[(local[s], a)] = task.reward(s, a)
    labels = {local[s]: task.label(s) for s in remainder}
    labels.update({i: f"->{task.label(t)}" for t, i in placeholders.items()})
    tags = {local[s]: task.tags(s) for s in remainder if task.tags(s)}
    fragment = GroundMdp.build(
        mdp_id=f"{task.mdp_id}~{VERBATIM}",
        state_count=len(remainder) + len(placeholders),
        discount=task.discount,
        transitions=transitions,
        rewards=rewards,
        state_labels=labels,
        feature_tags=tags,
        action_labels=dict(task.action_labels),
        start_states=[local[s] for s in task.start_states if s in local],
    )
    exits = [i for i in fragment.terminal_states]
    instance = FragmentInstance(VERBATIM, VERBATIM, fragment, tuple(local.values()), tuple(exits))
    gluings = [(VERBATIM, i, owner[t][0], owner[t][1]) for t, i in sorted(placeholders.items())]
    f = {s: local[s] for s in remainder}
    g = {(s, a): a for s in remainder for a in task.actions(s)}
    binding = HomomorphismMap.create(task.mdp_id, VERBATIM, f, g, None, ROLE_ABSTRACTION)
    return instance, gluings, binding


def construe(library: Library,
             task: GroundMdp,
             budget: Optional[SearchBudget] = None,
             max_modules: int = 3,
             k: int = settings.RETRIEVAL_K,
             min_gain: float = settings.MIN_COVERAGE_GAIN,
             cost_budget: int = settings.DEFAULT_BUDGET) -> Tuple[Construal, CostLedger]:
    """
    贪心覆盖：检索候选模块，在未覆盖的状态上做部分搜索，提交得分为正且最高的映射
    （只保留其中作用域闭合的状态），
    直到覆盖增益低于 min_gain 或用满 max_modules；剩余状态原样导入。

    Returns:
        (Construal, CostLedger)；construal.instance_bindings 保存指向模块的映射
    """
    if max_modules < 1:
        raise ValueError(f"max_modules 必须 ≥ 1: {max_modules}")
    budget = replace(budget or SearchBudget(), mode=MODE_PARTIAL)
    total_pairs = len(task.transitions)
    remainder: Set[int] = set(task.states)
    owner: Dict[int, Tuple[str, int]] = {}
    instances: List[FragmentInstance] = []
    bindings: List[HomomorphismMap] = []
    module_maps: Dict[str, HomomorphismMap] = {}
    construal_cost = 0
    covered = 0

    while len(instances) < max_modules and any(not task.is_terminal(s) for s in remainder):
        retrieval = rank_candidates(library, task, k, states=sorted(remainder))
        construal_cost += retrieval.comparisons
        best: Optional[SearchResult] = None
        best_module = None
        hom_map = None
        for module_id in retrieval.module_ids:
            result = find_homomorphism(task, library.modules[module_id].fragment, None, budget,
                                       candidate_states=remainder)
            construal_cost += result.expansions_used
            # 得分不为正的映射偏差已经抵消了覆盖，不提交
            if not result.found or result.score <= 0.0:
                continue
            trimmed = _trim_map(task, result.best_map)
            if trimmed.scope and (best is None or result.score > best.score):
                best, best_module, hom_map = result, module_id, trimmed
        if best is None:
            break
        gain = len(hom_map.scope) / total_pairs if total_pairs else 0.0
        if gain < min_gain:
            logger.debug(f"{task.mdp_id}: 最佳候选 {best_module} 的覆盖增益 {gain:.2%} 低于 {min_gain:.0%}，停止")
            break

        instance_id = f"i{len(instances)}-{best_module}"
        module = library.modules[best_module]
        instances.append(module.instance(instance_id, extra_entries=hom_map.image()))
        bindings.append(replace(hom_map, target_abstract=instance_id))
        module_maps[instance_id] = hom_map
        for s, x in hom_map.f.items():
            owner[s] = (instance_id, x)
        remainder -= set(hom_map.f)
        covered += len(hom_map.scope)
        logger.info(f"{task.mdp_id}: 提交模块 {best_module}（得分 {best.score:.4f}，覆盖增益 {gain:.2%}）")

    gluings = []
    if remainder:
        instance, gluings, binding = _verbatim_instance(task, sorted(remainder), owner)
        instances.append(instance)
        bindings.append(binding)

    construal = compose(instances, gluings, bindings, construal_id=f"{task.mdp_id}~construal")
    construal.instance_bindings = module_maps
    construal.no_analogy = not module_maps
    construal.coverage = covered / total_pairs if total_pairs else 0.0
    ledger = CostLedger(0, construal_cost, cost_budget)
    if construal.no_analogy:
        logger.info(f"{task.mdp_id}: 没有可用的类比，整体原样导入（C_c={construal_cost}）")
    return construal, ledger


@dataclass
class SolveOutcome:
    """构念求解结果；可以按 (policy, ledger) 解包"""
    policy: Policy
    ledger: CostLedger
    values: ValueFunction
    result: SolveResult
    warm_started: bool = False

    def __iter__(self):
        return iter((self.policy, self.ledger))


def warm_start_values(construal: Construal, library: Library) -> Optional[ValueFunction]:
    """按实例顺序提升各模块存储的值；重叠处后写者生效"""
    n = construal.abstract_mdp.state_count
    init = np.zeros(n)
    used = False
    for instance_id, module_id in construal.instance_modules.items():
        module = library.modules.get(module_id)
        if module is None or module.values is None:
            continue
        embedding = construal.embedding(instance_id)
        placement = HomomorphismMap.create(construal.abstract_mdp.mdp_id, module_id, embedding, {}, [])
        lifted = lift_values(module.values, placement, construal.abstract_mdp)
        for s in embedding:
            init[s] = lifted[s]
        used = True
    if not used:
        return None
    return ValueFunction(init, construal.abstract_mdp.mdp_id)


def solve(construal: Construal,
          library: Library,
          tolerance: float = settings.TOLERANCE,
          ledger: Optional[CostLedger] = None,
          max_sweeps: int = settings.MAX_SWEEPS) -> SolveOutcome:
    """在构念上做值迭代；C_s 记为备份次数"""
    mdp = construal.abstract_mdp
    init = warm_start_values(construal, library)
    result = value_iteration(mdp, tolerance, max_sweeps, init=init)
    policy = greedy_policy(mdp, result.values)
    ledger = (ledger or CostLedger()).add(solve=result.backups)
    logger.info(f"{mdp.mdp_id}: {'热' if init is not None else '冷'}启动求解，"
                f"{result.sweeps_used} 次扫描，C_s={result.backups}")
    return SolveOutcome(policy, ledger, result.values, result, init is not None)


def afford(task: GroundMdp,
           state: int,
           library: Library,
           bindings: Sequence[HomomorphismMap]) -> List[Tuple[str, Tuple[int, ...]]]:
    """列出覆盖该状态的每个绑定在 f(state) 上可用的抽象动作，按模块标识排序"""
    if not 0 <= state < task.state_count:
        raise ValueError(f"状态 {state} 不在 {task.mdp_id} 中")
    offered = []
    for hom_map in bindings:
        if hom_map.source_ground != task.mdp_id or state not in hom_map.f:
            continue
        module = library.modules.get(hom_map.target_abstract)
        if module is None:
            continue
        offered.append((module.module_id, module.fragment.actions(hom_map.f[state])))
    return sorted(offered, key=lambda item: item[0])
