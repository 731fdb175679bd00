#!/usr/bin/env python3
"""
同态的验证与量化
推前分布、同态检查、商MDP构造、价值损失界、作用域限制与映射复合
"""

import logging
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from config import settings
from src.errors import (
    EmptyScopeError,
    EndpointMismatchError,
    InconsistentInterfaceError,
    MdpValidationError,
    UnmappedMassError,
)
from src.homomorphism.maps import ROLE_ABSTRACTION, HomCertificate, HomomorphismMap
from src.mdp_core.mdp import PROB_TOL, GroundMdp, Pair

logger = logging.getLogger(__name__)


def pushforward_partial(dist: Mapping[int, float], f: Mapping[int, int]) -> Tuple[Dict[int, float], float]:
    """推前分布，同时返回落在 f 定义域之外的概率质量"""
    out: Dict[int, float] = {}
    unmapped = 0.0
    for s, p in sorted(dist.items()):
        if p <= 0.0:
            continue
        x = f.get(s)
        if x is None:
            unmapped += p
        else:
            out[x] = out.get(x, 0.0) + p
    return dict(sorted(out.items())), unmapped


def pushforward(dist: Mapping[int, float], f: Mapping[int, int]) -> Dict[int, float]:
    """
    把具体状态上的分布推到抽象状态上

    Raises:
        UnmappedMassError: 有正概率落在 f 的定义域之外
    """
    missing = [s for s, p in dist.items() if p > 0.0 and s not in f]
    if missing:
        raise UnmappedMassError("分布在映射定义域之外有正概率", missing)
    out, _ = pushforward_partial(dist, f)
    return out


def tv_distance(pushed: Mapping[int, float], target: Mapping[int, float], unmapped: float = 0.0) -> float:
    """
    总变差距离；未映射的质量视为目标分布中概率为0的额外原子

    Returns:
        [0, 1] 内的实数
    """
    support = set(pushed) | set(target)
    l1 = sum(abs(pushed.get(x, 0.0) - target.get(x, 0.0)) for x in support) + unmapped
    return min(1.0, max(0.0, 0.5 * l1))


def check_homomorphism(ground: GroundMdp,
                       abstract: GroundMdp,
                       hom_map: HomomorphismMap,
                       strictness_tol: float = settings.STRICTNESS_TOL) -> HomCertificate:
    """
    在映射的作用域上逐对计算奖励偏差与转移偏差

    Args:
        ground: 具体MDP（映射的定义域一侧）
        abstract: 抽象MDP
        hom_map: 待检查的映射
        strictness_tol: 判定严格的容差

    Returns:
        HomCertificate
    """
    hom_map.check_endpoints(ground, abstract)
    if not hom_map.scope:
        raise EmptyScopeError(f"映射 {hom_map.source_ground} -> {hom_map.target_abstract} 的作用域为空")
    hom_map.validate(ground, abstract)

    reward_dev: Dict[Pair, float] = {}
    trans_dev: Dict[Pair, float] = {}
    unmapped_mass: Dict[Pair, float] = {}
    for s, a in sorted(hom_map.scope):
        x, abar = hom_map.f[s], hom_map.g[(s, a)]
        reward_dev[(s, a)] = abs(ground.reward(s, a) - abstract.reward(x, abar))
        pushed, unmapped = pushforward_partial(ground.successors(s, a), hom_map.f)
        trans_dev[(s, a)] = tv_distance(pushed, abstract.successors(x, abar), unmapped)
        if unmapped > 0.0:
            unmapped_mass[(s, a)] = unmapped

    max_r = max(reward_dev.values())
    max_t = max(trans_dev.values())
    total_pairs = len(ground.transitions)
    commutes = max_r <= strictness_tol and max_t <= strictness_tol
    # 严格还要求 g 在每个作用域状态上覆盖 f(s) 的全部抽象动作
    uncovered = tuple(hom_map.uncovered_actions(abstract))
    cert = HomCertificate(
        reward_deviation=reward_dev,
        transition_deviation=trans_dev,
        max_reward_deviation=max_r,
        max_transition_deviation=max_t,
        strict=commutes and not uncovered,
        coverage_fraction=len(hom_map.scope) / total_pairs if total_pairs else 0.0,
        unmapped_mass=unmapped_mass,
        uncovered_actions=uncovered,
        commutes=commutes,
    )
    logger.debug(f"同态检查 {hom_map.source_ground} -> {hom_map.target_abstract}: "
                 f"εR={max_r:.3e} εT={max_t:.3e} 未覆盖={len(uncovered)} strict={cert.strict}")
    return cert


def _canonical_blocks(ground: GroundMdp, partition: Iterable[Iterable[int]]) -> List[Tuple[int, ...]]:
    blocks = [tuple(sorted(set(int(s) for s in block))) for block in partition]
    blocks = [b for b in blocks if b]
    blocks.sort(key=lambda b: b[0])
    seen: Dict[int, int] = {}
    for i, block in enumerate(blocks):
        for s in block:
            if s in seen:
                raise MdpValidationError(f"状态 {s} 同时出现在两个块中")
            if not 0 <= s < ground.state_count:
                raise MdpValidationError(f"划分含不存在的状态 {s}")
            seen[s] = i
    missing = [s for s in ground.states if s not in seen]
    if missing:
        raise MdpValidationError(f"划分没有覆盖全部状态: {missing[:5]}")
    return blocks


def quotient(ground: GroundMdp,
             state_partition: Iterable[Iterable[int]],
             action_map: Optional[Mapping[Pair, int]] = None,
             abstract_id: Optional[str] = None,
             strictness_tol: float = settings.STRICTNESS_TOL) -> Tuple[GroundMdp, HomomorphismMap, HomCertificate]:
    """
    按块均匀平均构造商MDP

    块按最小成员排序，第 i 个块成为抽象状态 i。每个抽象动作的奖励和转移
    是块内各成员（在映到该抽象动作的具体动作上）推前结果的均匀平均。

    Args:
        ground: 具体MDP
        state_partition: 覆盖全部状态的划分
        action_map: (s, a) -> 抽象动作；省略时保持动作编号
        abstract_id: 抽象MDP的标识，默认 "<ground_id>~q"

    Returns:
        (抽象MDP, 规范映射, 证书)

    Raises:
        InconsistentInterfaceError: 同一块内成员映出的抽象动作集合不一致
    """
    blocks = _canonical_blocks(ground, state_partition)
    f = {s: i for i, block in enumerate(blocks) for s in block}
    pairs = ground.available_pairs()
    if action_map is None:
        g = {pair: pair[1] for pair in pairs}
    else:
        g = {}
        for pair in pairs:
            if pair not in action_map:
                raise MdpValidationError(f"动作映射缺少动作对 {pair}")
            g[pair] = int(action_map[pair])
        extra = sorted(set(action_map) - set(pairs))
        if extra:
            raise MdpValidationError(f"动作映射含不可用的动作对: {extra[:5]}")

    transitions: Dict[Pair, Dict[int, float]] = {}
    rewards: Dict[Pair, float] = {}
    for x, block in enumerate(blocks):
        label_sets = []
        for s in block:
            label_sets.append(frozenset(g[(s, a)] for a in ground.actions(s)))
        sizes = {len(ls) for ls in label_sets}
        if len(sizes) > 1 or len(set(label_sets)) > 1:
            raise InconsistentInterfaceError(
                f"块 {list(block)} 的成员映出的抽象动作集合不一致", block)
        for abar in sorted(label_sets[0]):
            acc: Dict[int, float] = {}
            reward = 0.0
            for s in block:
                members = [a for a in ground.actions(s) if g[(s, a)] == abar]
                weight = 1.0 / (len(block) * len(members))
                for a in members:
                    reward += weight * ground.reward(s, a)
                    for y, p in pushforward(ground.successors(s, a), f).items():
                        acc[y] = acc.get(y, 0.0) + weight * p
            total = sum(acc.values())
            transitions[(x, abar)] = {y: p / total for y, p in sorted(acc.items())}
            rewards[(x, abar)] = reward

    tags = {}
    labels = {}
    for x, block in enumerate(blocks):
        common = frozenset.intersection(*(ground.tags(s) for s in block))
        if common:
            tags[x] = common
        if block[0] in ground.state_labels:
            labels[x] = ground.state_labels[block[0]]

    abstract = GroundMdp.build(
        mdp_id=abstract_id or f"{ground.mdp_id}~q",
        state_count=len(blocks),
        discount=ground.discount,
        transitions=transitions,
        rewards=rewards,
        terminal_states=[x for x, block in enumerate(blocks) if all(ground.is_terminal(s) for s in block)],
        state_labels=labels,
        feature_tags=tags,
        action_labels=dict(ground.action_labels) if action_map is None else {},
        start_states=sorted({f[s] for s in ground.start_states}),
    )
    hom_map = HomomorphismMap.create(ground.mdp_id, abstract.mdp_id, f, g, pairs, ROLE_ABSTRACTION)
    cert = check_homomorphism(ground, abstract, hom_map, strictness_tol)
    logger.info(f"商MDP {abstract.mdp_id}: {ground.state_count} -> {abstract.state_count} 个状态，"
                f"strict={cert.strict}")
    return abstract, hom_map, cert


def loss_bound(cert: HomCertificate, discount: float, reward_range: float) -> float:
    """
    近似同态的价值损失上界

        B = 2·(εR + γ·εT·Rmax/(1-γ)) / (1-γ)
    """
    if not 0.0 <= discount < 1.0:
        raise ValueError(f"折扣必须在[0, 1)内: {discount}")
    inner = cert.max_reward_deviation + discount * cert.max_transition_deviation * reward_range / (1.0 - discount)
    return 2.0 * inner / (1.0 - discount)


def restrict_scope(hom_map: HomomorphismMap, pairs: Iterable[Pair]) -> HomomorphismMap:
    """把作用域限制到给定动作对上"""
    keep = set(pairs)
    return hom_map.with_scope(p for p in hom_map.scope if p in keep)


def compose_maps(outer: HomomorphismMap, inner: HomomorphismMap) -> HomomorphismMap:
    """
    复合 outer ∘ inner（先 inner 再 outer）

    例如 φ'_abs = φ_analogy ∘ φ_abs；作用域取 inner 作用域中像落在 outer 作用域内的部分。
    """
    if inner.target_abstract != outer.source_ground:
        raise EndpointMismatchError(
            f"无法复合: {inner.target_abstract} 与 {outer.source_ground} 不是同一个MDP")
    f = {s: outer.f[x] for s, x in inner.f.items() if x in outer.f}
    g = {}
    for (s, a), abar in inner.g.items():
        key = (inner.f[s], abar)
        if s in f and key in outer.g:
            g[(s, a)] = outer.g[key]
    scope = [(s, a) for (s, a) in inner.scope if (s, a) in g and (inner.f[s], inner.g[(s, a)]) in outer.scope]
    return HomomorphismMap.create(inner.source_ground, outer.target_abstract, f, g, scope, ROLE_ABSTRACTION)


def merge_certificates(certs: Sequence[HomCertificate], total_pairs: int,
                       strictness_tol: float = settings.STRICTNESS_TOL) -> HomCertificate:
    """合并不相交作用域上的证书：逐对取并集，最大值取最大"""
    reward_dev: Dict[Pair, float] = {}
    trans_dev: Dict[Pair, float] = {}
    unmapped: Dict[Pair, float] = {}
    uncovered: List[Pair] = []
    for cert in certs:
        reward_dev.update(cert.reward_deviation)
        trans_dev.update(cert.transition_deviation)
        unmapped.update(cert.unmapped_mass)
        uncovered.extend(cert.uncovered_actions)
    if not reward_dev:
        raise EmptyScopeError("没有可合并的证书")
    max_r = max(reward_dev.values())
    max_t = max(trans_dev.values())
    commutes = max_r <= strictness_tol and max_t <= strictness_tol
    return HomCertificate(reward_dev, trans_dev, max_r, max_t,
                          commutes and not uncovered,
                          len(reward_dev) / total_pairs if total_pairs else 0.0, unmapped,
                          uncovered_actions=tuple(sorted(set(uncovered))), commutes=commutes)
