#!/usr/bin/env python3
"""
给定历史时的模块库更新

1. 统计：每次把模块当作类比源时，逐元素累计使用次数与未被映射（丢弃）次数
2. 抽取：在至少 m 个回合的构念中反复出现（严格双向同态）的子片段成为新模块
3. 精化：经常被丢弃的元素剪掉，得到更抽象的子模块（保留原模块）
4. 去重：严格双向同态的模块合并，统计相加
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

import networkx as nx

from config import settings
from src.analogy.search import MODE_STRICT, SearchBudget, find_homomorphism
from src.analogy.signatures import signature_set
from src.homomorphism.maps import HomomorphismMap
from src.library.modules import (
    EpisodeRecord,
    Library,
    Module,
    action_element,
    parse_element,
    state_element,
)
from src.mdp_core.mdp import GroundMdp, Pair, Policy
from src.mdp_core.solvers import policy_evaluation

logger = logging.getLogger(__name__)


@dataclass
class ExtractedFragment:
    """从构念中切出的子片段"""
    fragment: GroundMdp
    entries: Tuple[int, ...]
    exits: Tuple[int, ...]
    policy: Policy
    source_states: Tuple[int, ...]


@dataclass
class _Cluster:
    representative: ExtractedFragment
    signatures: FrozenSet[str]
    episodes: List[str] = field(default_factory=list)


def _strict_budget(expansions: int) -> SearchBudget:
    return SearchBudget(max_node_expansions=expansions, mode=MODE_STRICT)


def strict_bihomomorphism(a: GroundMdp, b: GroundMdp,
                          expansions: int = settings.SEARCH_EXPANSIONS,
                          horizon: int = settings.SIGNATURE_HORIZON
                          ) -> Optional[Tuple[HomomorphismMap, HomomorphismMap]]:
    """两个方向都存在全覆盖的严格同态时返回 (a->b, b->a)，否则 None

    只比较状态数与动作对数都相同的片段。
    """
    if a.state_count != b.state_count or len(a.transitions) != len(b.transitions):
        return None
    if signature_set(a, horizon) != signature_set(b, horizon):
        return None
    maps = []
    for target, source in ((a, b), (b, a)):
        result = find_homomorphism(target, source, None, _strict_budget(expansions))
        if not result.found or not result.certificate.strict or result.certificate.coverage_fraction < 1.0:
            return None
        maps.append(result.best_map)
    return maps[0], maps[1]


# ---------- 统计 ----------
def tally_usage(library: Library, record: EpisodeRecord):
    """按本回合使用的映射累计模块元素的使用与丢弃次数"""
    for hom_map in record.maps.values():
        module = library.modules.get(hom_map.target_abstract)
        if module is None:
            continue
        used_states = {hom_map.f[s] for s, _ in hom_map.scope} | {
            x for s, x in hom_map.f.items() if record.task.is_terminal(s)}
        used_actions = {(hom_map.f[s], hom_map.g[(s, a)]) for s, a in hom_map.scope}
        for x in module.fragment.states:
            elements = [(state_element(x), x in used_states)]
            elements += [(action_element(x, abar), (x, abar) in used_actions) for abar in module.fragment.actions(x)]
            for key, used in elements:
                module.use_count[key] = module.use_count.get(key, 0) + 1
                if not used:
                    module.discard_count[key] = module.discard_count.get(key, 0) + 1


# ---------- 抽取 ----------
def transition_graph(mdp: GroundMdp) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(mdp.states)
    for (s, _), dist in sorted(mdp.transitions.items()):
        for t, p in dist.items():
            if p > 0 and t != s:
                graph.add_edge(s, t)
    return graph


def _closures(mdp: GroundMdp, cap: int) -> List[Tuple[int, ...]]:
    """从每个非终止状态出发的广度优先闭包（截断到 cap 个状态），只保留极大者"""
    graph = transition_graph(mdp)
    found: Dict[FrozenSet[int], Tuple[int, ...]] = {}
    for s in mdp.states:
        if mdp.is_terminal(s):
            continue
        order = [s] + [v for _, v in nx.bfs_edges(graph, s, sort_neighbors=sorted)]
        members = tuple(order[:cap])
        found.setdefault(frozenset(members), members)
    sets = list(found)
    maximal = [found[c] for c in sets if not any(c < other for other in sets)]
    maximal.sort(key=lambda members: (-len(members), members[0]))
    return maximal


def _cut_fragment(mdp: GroundMdp, members: Sequence[int], policy: Policy, fragment_id: str) -> ExtractedFragment:
    """切出子片段：边界转移改指向出口占位状态，入口取闭包起点与有外部前驱的状态"""
    kept = sorted(members)
    local = {s: i for i, s in enumerate(kept)}
    boundary: Dict[int, int] = {}

    def slot(t: int) -> int:
        if t in local:
            return local[t]
        if t not in boundary:
            boundary[t] = len(kept) + len(boundary)
        return boundary[t]

    transitions: Dict[Pair, Dict[int, float]] = {}
    rewards: Dict[Pair, float] = {}
    for s in kept:
        for a in mdp.actions(s):
            transitions[(local[s], a)] = {slot(t): p for t, p in mdp.successors(s, a).items()}
            rewards[(local[s], a)] = mdp.reward(s, a)

    member_set = set(kept)
    entries = {local[members[0]]}
    for s in kept:
        if any(p not in member_set for p, _ in mdp.predecessors.get(s, ())):
            entries.add(local[s])
    fragment = GroundMdp.build(
        mdp_id=fragment_id,
        state_count=len(kept) + len(boundary),
        discount=mdp.discount,
        transitions=transitions,
        rewards=rewards,
        state_labels={local[s]: mdp.label(s) for s in kept},
        feature_tags={local[s]: mdp.tags(s) for s in kept if mdp.tags(s)},
        action_labels=dict(mdp.action_labels),
        start_states=sorted(entries),
    )
    choice = {local[s]: policy.action(s) for s in kept if s in policy.choice and not mdp.is_terminal(s)}
    return ExtractedFragment(fragment, tuple(sorted(entries)), fragment.terminal_states,
                             Policy.deterministic(choice), tuple(kept))


def extract_fragments(record: EpisodeRecord,
                      cap: int = settings.FRAGMENT_CAP,
                      max_fragments: int = settings.MAX_FRAGMENTS) -> List[ExtractedFragment]:
    """构念中极大的转移闭合子片段，大的在前，最多 max_fragments 个"""
    mdp = record.construal.abstract_mdp
    fragments = []
    for i, members in enumerate(_closures(mdp, cap)[:max_fragments]):
        fragments.append(_cut_fragment(mdp, members, record.policy, f"{record.task_id}#f{i}"))
    return fragments


def _extract(library: Library, history: Sequence[EpisodeRecord], threshold: int,
             cap: int, max_fragments: int, expansions: int) -> int:
    clusters: List[_Cluster] = []
    for record in history:
        for piece in extract_fragments(record, cap, max_fragments):
            if not piece.fragment.transitions:
                continue
            sigs = signature_set(piece.fragment, library.horizon)
            home = None
            for cluster in clusters:
                if cluster.signatures != sigs:
                    continue
                if strict_bihomomorphism(cluster.representative.fragment, piece.fragment, expansions,
                                         library.horizon) is not None:
                    home = cluster
                    break
            if home is None:
                home = _Cluster(piece, sigs)
                clusters.append(home)
            if record.task_id not in home.episodes:
                home.episodes.append(record.task_id)

    added = 0
    for cluster in clusters:
        if len(cluster.episodes) < threshold:
            continue
        piece = cluster.representative
        duplicate = any(
            library.signature_index[mid] == cluster.signatures and
            strict_bihomomorphism(module.fragment, piece.fragment, expansions, library.horizon) is not None
            for mid, module in library.modules.items())
        if duplicate:
            continue
        module_id = library.next_id()
        module = Module(module_id, piece.fragment, piece.entries, piece.exits, lineage=list(cluster.episodes))
        module.policy = piece.policy
        module.values = policy_evaluation(module.fragment, piece.policy)
        library.add(module)
        added += 1
        logger.info(f"抽取新模块 {module_id}：在 {len(cluster.episodes)} 个回合中出现")
    return added


# ---------- 精化 ----------
def refine_module(module: Module, pruned: Set[str], refined_id: str) -> Optional[Module]:
    """
    剪掉给定元素后的模块

    被剪状态连同指向它们的动作对一起删除；没有剩余动作的状态变为终止状态。
    结果没有动作对或没有入口时返回 None。
    """
    fragment = module.fragment
    drop_states = set()
    drop_pairs = set()
    for element in pruned:
        x, a = parse_element(element)
        if a is None:
            drop_states.add(x)
        else:
            drop_pairs.add((x, a))
    kept = [x for x in fragment.states if x not in drop_states]
    local = {x: i for i, x in enumerate(kept)}
    transitions: Dict[Pair, Dict[int, float]] = {}
    rewards: Dict[Pair, float] = {}
    for (x, a), dist in fragment.transitions.items():
        if x in drop_states or (x, a) in drop_pairs or any(t in drop_states for t in dist):
            continue
        transitions[(local[x], a)] = {local[t]: p for t, p in dist.items()}
        rewards[(local[x], a)] = fragment.reward(x, a)
    entries = [local[x] for x in module.entries if x in local]
    if not transitions or not entries:
        return None
    refined = GroundMdp.build(
        mdp_id=refined_id,
        state_count=len(kept),
        discount=fragment.discount,
        transitions=transitions,
        rewards=rewards,
        state_labels={local[x]: fragment.state_labels[x] for x in kept if x in fragment.state_labels},
        feature_tags={local[x]: fragment.tags(x) for x in kept if fragment.tags(x)},
        action_labels=dict(fragment.action_labels),
        start_states=entries,
    )
    exits = [local[x] for x in module.exits if x in local] + [
        local[x] for x in kept if refined.is_terminal(local[x]) and not fragment.is_terminal(x)]
    return Module.from_fragment(refined, refined_id, entries, exits, solve=True, lineage=[module.module_id])


def _refine(library: Library, discard_ratio: float, min_uses: int) -> int:
    added = 0
    for module_id, module in list(library.modules.items()):
        if any(mid.startswith(f"{module_id}-r") for mid in library.modules):
            continue
        pruned = {e for e in module.elements()
                  if module.use_count.get(e, 0) >= min_uses and module.discard_ratio(e) > discard_ratio}
        if not pruned:
            continue
        refined = refine_module(module, pruned, f"{module_id}-r1")
        if refined is None:
            logger.debug(f"模块 {module_id} 剪掉 {len(pruned)} 个元素后为空，跳过精化")
            continue
        library.add(refined)
        added += 1
        logger.info(f"精化模块 {module_id} -> {refined.module_id}：剪掉 {sorted(pruned)}")
    return added


# ---------- 去重 ----------
def _rekey(counts: Dict[str, int], hom_map: HomomorphismMap) -> Dict[str, int]:
    moved: Dict[str, int] = {}
    for element, n in counts.items():
        x, a = parse_element(element)
        if a is None:
            key = state_element(hom_map.f[x])
        elif (x, a) in hom_map.g:
            key = action_element(hom_map.f[x], hom_map.g[(x, a)])
        else:
            continue
        moved[key] = moved.get(key, 0) + n
    return moved


def _merge(keep: Module, drop: Module, drop_to_keep: HomomorphismMap):
    for name in ("use_count", "discard_count"):
        merged = dict(getattr(keep, name))
        for key, n in _rekey(getattr(drop, name), drop_to_keep).items():
            merged[key] = merged.get(key, 0) + n
        setattr(keep, name, dict(sorted(merged.items())))
    for key, n in keep.discard_count.items():
        keep.discard_count[key] = min(n, keep.use_count.get(key, 0))
    for origin in drop.lineage + [drop.module_id]:
        if origin not in keep.lineage:
            keep.lineage.append(origin)


def _deduplicate(library: Library, expansions: int) -> int:
    merged = 0
    ids = list(library.modules)
    removed: Set[str] = set()
    for i, first in enumerate(ids):
        if first in removed:
            continue
        for second in ids[i + 1:]:
            if second in removed or library.signature_index[first] != library.signature_index[second]:
                continue
            maps = strict_bihomomorphism(library.modules[first].fragment, library.modules[second].fragment,
                                         expansions, library.horizon)
            if maps is None:
                continue
            _merge(library.modules[first], library.modules[second], maps[1])
            removed.add(second)
            merged += 1
            logger.info(f"合并重复模块 {second} -> {first}")
    for module_id in removed:
        library.modules.pop(module_id)
    if removed:
        library.reindex()
    return merged


def update_library(library: Library,
                   history: Sequence[EpisodeRecord],
                   extraction_threshold: int = settings.EXTRACTION_THRESHOLD,
                   discard_ratio: float = settings.DISCARD_RATIO,
                   min_uses: int = settings.MIN_USES,
                   fragment_cap: int = settings.FRAGMENT_CAP,
                   max_fragments: int = settings.MAX_FRAGMENTS,
                   expansions: int = settings.SEARCH_EXPANSIONS) -> Library:
    """
    返回更新后的新模块库（不修改传入的库）

    Args:
        history: 到目前为止的全部回合记录；已经统计过的回合不会重复计数
        extraction_threshold: 子片段至少出现的回合数 m
        discard_ratio: 丢弃比例阈值 θ
        min_uses: 参与精化判断的最少使用次数
    """
    if extraction_threshold < 2:
        raise ValueError(f"extraction_threshold 必须 ≥ 2: {extraction_threshold}")
    if not 0 < discard_ratio <= 1:
        raise ValueError(f"discard_ratio 必须在 (0, 1] 内: {discard_ratio}")
    updated = library.copy()
    for record in history:
        if record.task_id in updated.seen_episodes:
            continue
        tally_usage(updated, record)
        updated.seen_episodes.add(record.task_id)

    extracted = _extract(updated, history, extraction_threshold, fragment_cap, max_fragments, expansions)
    refined = _refine(updated, discard_ratio, min_uses)
    merged = _deduplicate(updated, expansions)
    updated.reindex()
    if extracted or refined or merged:
        logger.info(f"模块库更新：抽取 {extracted}，精化 {refined}，合并 {merged}，共 {len(updated)} 个模块")
    return updated
