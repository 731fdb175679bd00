#!/usr/bin/env python3
"""
类比搜索
在目标MDP与候选源模块之间回溯搜索（部分）同态：
最受约束的状态优先、按签名相似度排序候选、前向检查剪枝，
提示赋值预先固定且不回溯。展开次数计入构念成本 C_c。
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

import networkx as nx
import numpy as np

from config import settings
from src.errors import HintConflictError, InvalidBudgetError
from src.homomorphism.checks import check_homomorphism, pushforward_partial, tv_distance
from src.homomorphism.maps import ROLE_ABSTRACTION, HomCertificate, HomomorphismMap
from src.mdp_core.mdp import GroundMdp, Pair
from src.mdp_core.solvers import optimal_values
from src.analogy.signatures import signature_distance, signature_levels

logger = logging.getLogger(__name__)

MODE_STRICT = "strict"
MODE_PARTIAL = "partial"

# 判定偏差并列的精度
_TIE_DIGITS = 12


@dataclass(frozen=True)
class HintSet:
    """预先固定的状态与动作赋值"""
    fixed_state_assignments: Dict[int, int] = field(default_factory=dict)
    fixed_action_assignments: Dict[Pair, int] = field(default_factory=dict)

    @classmethod
    def from_pairs(cls,
                   states: Iterable[Tuple[int, int]] = (),
                   actions: Iterable[Tuple[Pair, int]] = ()) -> "HintSet":
        """从赋值列表构造；同一元素被赋两个不同的值时报错"""
        fixed_states: Dict[int, int] = {}
        for s, x in states:
            if s in fixed_states and fixed_states[s] != x:
                raise HintConflictError(f"状态 {s} 被提示为 {fixed_states[s]} 和 {x}")
            fixed_states[int(s)] = int(x)
        fixed_actions: Dict[Pair, int] = {}
        for (s, a), abar in actions:
            key = (int(s), int(a))
            if key in fixed_actions and fixed_actions[key] != abar:
                raise HintConflictError(f"动作对 {key} 被提示为 {fixed_actions[key]} 和 {abar}")
            fixed_actions[key] = int(abar)
        return cls(dict(sorted(fixed_states.items())), dict(sorted(fixed_actions.items())))

    @classmethod
    def from_map(cls, hom_map: HomomorphismMap, fraction: float = 1.0,
                 seed: Optional[int] = None, include_actions: bool = False) -> "HintSet":
        """
        从已知映射中抽取一部分状态作为提示

        Args:
            fraction: 提示覆盖的状态比例
            seed: 抽样种子；省略时取编号最小的那部分
        """
        domain = sorted(hom_map.f)
        k = int(round(fraction * len(domain)))
        if seed is None:
            chosen = domain[:k]
        else:
            rng = np.random.default_rng(seed)
            chosen = sorted(int(s) for s in rng.choice(domain, size=k, replace=False)) if k else []
        actions = []
        if include_actions:
            actions = [(pair, x) for pair, x in sorted(hom_map.g.items()) if pair[0] in set(chosen)]
        return cls.from_pairs([(s, hom_map.f[s]) for s in chosen], actions)

    @property
    def empty(self) -> bool:
        return not self.fixed_state_assignments and not self.fixed_action_assignments

    def validate(self, target: GroundMdp, source: GroundMdp):
        """检查提示与两个MDP的可用性一致"""
        for s, x in self.fixed_state_assignments.items():
            if not 0 <= s < target.state_count:
                raise HintConflictError(f"提示的目标状态 {s} 不存在")
            if not 0 <= x < source.state_count:
                raise HintConflictError(f"提示的源状态 {x} 不存在")
            if target.is_terminal(s) != source.is_terminal(x):
                raise HintConflictError(f"提示 {s} -> {x} 混合了终止与非终止状态")
        for (s, a), abar in self.fixed_action_assignments.items():
            if (s, a) not in target.transitions:
                raise HintConflictError(f"提示的动作对 ({s}, {a}) 在目标中不可用")
            x = self.fixed_state_assignments.get(s)
            if x is not None:
                if (x, abar) not in source.transitions:
                    raise HintConflictError(f"提示的抽象动作 {abar} 在源状态 {x} 上不可用")
            elif not any((y, abar) in source.transitions for y in source.states):
                raise HintConflictError(f"提示的抽象动作 {abar} 在源中不存在")


@dataclass(frozen=True)
class SearchBudget:
    """搜索预算与模式"""
    max_node_expansions: int = settings.SEARCH_EXPANSIONS
    mode: str = MODE_STRICT
    partial_penalty: float = settings.PARTIAL_PENALTY
    partial_tolerance: float = settings.PARTIAL_TOLERANCE
    strict_probe: int = settings.STRICT_PROBE
    occupancy_weighted: bool = False
    strictness_tol: float = settings.STRICTNESS_TOL
    horizon: int = settings.SIGNATURE_HORIZON

    def __post_init__(self):
        if self.max_node_expansions <= 0:
            raise InvalidBudgetError(f"max_node_expansions 必须为正: {self.max_node_expansions}")
        if self.mode not in (MODE_STRICT, MODE_PARTIAL):
            raise InvalidBudgetError(f"未知的搜索模式: {self.mode}")
        if self.partial_penalty < 0 or not math.isfinite(self.partial_penalty):
            raise InvalidBudgetError(f"partial_penalty 必须非负: {self.partial_penalty}")
        if self.partial_tolerance < 0:
            raise InvalidBudgetError(f"partial_tolerance 必须非负: {self.partial_tolerance}")
        if self.strict_probe < 0:
            raise InvalidBudgetError(f"strict_probe 必须非负: {self.strict_probe}")

    def scaled(self, factor: int) -> "SearchBudget":
        return replace(self, max_node_expansions=self.max_node_expansions * factor)


@dataclass
class SearchResult:
    """搜索结果；没有找到映射时 best_map 为 None、score 为 -inf"""
    best_map: Optional[HomomorphismMap]
    certificate: Optional[HomCertificate]
    score: float
    expansions_used: int
    exhausted: bool
    mode: str = MODE_STRICT

    @property
    def found(self) -> bool:
        return self.best_map is not None

    def csv_row(self, instance_id: str) -> List[str]:
        strict = self.certificate.strict if self.certificate is not None else False
        return [instance_id, self.mode, str(self.expansions_used), repr(self.score), str(strict).lower()]


class _BudgetHit(Exception):
    """展开次数达到上限，中止当前搜索"""


class _AssignmentSearch:
    """目标状态到源状态的赋值搜索（单次，固定阈值）"""

    def __init__(self,
                 target: GroundMdp,
                 source: GroundMdp,
                 hints: HintSet,
                 states: List[int],
                 threshold: float,
                 limit: int,
                 horizon: int):
        self.target = target
        self.source = source
        self.threshold = threshold
        self.limit = limit
        self.expansions = 0
        self.action_hints = hints.fixed_action_assignments
        self.assign: Dict[int, Optional[int]] = dict(hints.fixed_state_assignments)
        self.variables = [s for s in states if s not in self.assign]

        self.preds: Dict[int, List[int]] = {
            s: sorted({p for p, _ in target.predecessors.get(s, ()) if p != s}) for s in target.states
        }
        self.neighbours: Dict[int, Set[int]] = {}
        for s in target.states:
            near = set(self.preds[s])
            for a in target.actions(s):
                near.update(target.successors(s, a))
            for p, b in target.predecessors.get(s, ()):
                near.update(target.successors(p, b))
            near.discard(s)
            self.neighbours[s] = near

        t_sig = signature_levels(target, horizon)
        s_sig = signature_levels(source, horizon)
        self.domains: Dict[int, List[int]] = {}
        for s in self.variables:
            values = [x for x in source.states
                      if target.is_terminal(s) == source.is_terminal(x) and self._state_cost(s, x) <= threshold]
            values.sort(key=lambda x: (signature_distance(t_sig[s], s_sig[x]), x))
            self.domains[s] = values

    # ---------- 局部代价 ----------
    def _choices(self, s: int, a: int, x: int) -> Tuple[int, ...]:
        hint = self.action_hints.get((s, a))
        if hint is not None:
            return (hint,) if (x, hint) in self.source.transitions else ()
        return self.source.actions(x)

    def _pair_cost(self, s: int, a: int, x: int, abar: int) -> float:
        """|ΔR| 加上已赋值后继超出抽象转移的质量；赋值越多越大"""
        dev = abs(self.target.reward(s, a) - self.source.reward(x, abar))
        q = self.source.successors(x, abar)
        mass: Dict[int, float] = {}
        for t, p in self.target.successors(s, a).items():
            y = self.assign.get(t)
            if y is not None:
                mass[y] = mass.get(y, 0.0) + p
        excess = 0.0
        for y, m in mass.items():
            over = m - q.get(y, 0.0)
            if over > 0.0:
                excess += over
        return dev + excess

    def _state_cost(self, s: int, x: int) -> float:
        """
        两侧取最坏：每个具体动作的最佳抽象动作，以及每个抽象动作的最佳原像

        具体动作少于抽象动作时 g 不可能覆盖 x 上的全部抽象动作，代价为无穷
        """
        ground_actions = self.target.actions(s)
        abstract_actions = self.source.actions(x)
        if len(ground_actions) < len(abstract_actions):
            return math.inf
        best_for_abstract = {abar: math.inf for abar in abstract_actions}
        worst = 0.0
        for a in ground_actions:
            best = math.inf
            for abar in self._choices(s, a, x):
                cost = self._pair_cost(s, a, x, abar)
                best = min(best, cost)
                best_for_abstract[abar] = min(best_for_abstract[abar], cost)
            if best > worst:
                worst = best
                if worst > self.threshold:
                    return worst
        return max([worst, *best_for_abstract.values()])

    def _consistent(self, s: int, x: int) -> bool:
        previous = self.assign.get(s, None)
        had = s in self.assign
        self.assign[s] = x
        try:
            if self._state_cost(s, x) > self.threshold:
                return False
            for p in self.preds[s]:
                y = self.assign.get(p)
                if y is not None and self._state_cost(p, y) > self.threshold:
                    return False
            return True
        finally:
            if had:
                self.assign[s] = previous
            else:
                del self.assign[s]

    def _injective_first(self, values: List[int]) -> List[int]:
        """尚未被其他状态占用的源状态排在前面（稳定排序）"""
        taken = {x for x in self.assign.values() if x is not None}
        return sorted(values, key=lambda x: x in taken)

    def _tick(self):
        if self.expansions >= self.limit:
            raise _BudgetHit()
        self.expansions += 1

    # ---------- 严格搜索 ----------
    def run_strict(self) -> Tuple[Optional[Dict[int, int]], bool]:
        """
        Returns:
            (找到的完整赋值或 None, 是否穷尽了搜索空间)
        """
        domains = {}
        for s in self.variables:
            domains[s] = [x for x in self.domains[s] if self._consistent(s, x)]
            if not domains[s]:
                return None, True
        for s, x in list(self.assign.items()):
            if x is not None and not self._consistent(s, x):
                return None, True
        try:
            found = self._dfs_strict(domains)
        except _BudgetHit:
            return None, False
        if found:
            return {s: x for s, x in self.assign.items() if x is not None}, False
        return None, True

    def _dfs_strict(self, domains: Dict[int, List[int]]) -> bool:
        var = None
        for s in self.variables:
            if s in self.assign:
                continue
            if var is None or len(domains[s]) < len(domains[var]):
                var = s
        if var is None:
            return self._leaf_is_strict()

        for x in self._injective_first(domains[var]):
            self._tick()
            if not self._consistent(var, x):
                continue
            self.assign[var] = x
            narrowed = self._forward_check(var, domains)
            if narrowed is not None and self._dfs_strict(narrowed):
                return True
            del self.assign[var]
        return False

    def _forward_check(self, var: int, domains: Dict[int, List[int]]) -> Optional[Dict[int, List[int]]]:
        narrowed = dict(domains)
        for u in sorted(self.neighbours[var]):
            if u in self.assign or u not in domains:
                continue
            kept = [x for x in domains[u] if self._consistent(u, x)]
            if not kept:
                return None
            narrowed[u] = kept
        return narrowed

    def _leaf_is_strict(self) -> bool:
        f = {s: x for s, x in self.assign.items() if x is not None}
        g = greedy_action_map(self.target, self.source, f, self.action_hints)
        for (s, a), abar in g.items():
            if exact_deviation(self.target, self.source, f, s, a, abar) > self.threshold:
                return False
        return not onto_failures(self.source, f, g)

    # ---------- 部分搜索 ----------
    def run_partial(self, scorer: "_PartialScorer") -> bool:
        """
        按静态顺序深度优先，每个状态最后尝试"不映射"

        乐观上界（已映射与尚未决定的状态的动作对全部计入覆盖）不超过当前最优得分时剪枝，
        剪枝只依赖已经访问过的叶子，所以预算越大结果越好。

        Returns:
            是否穷尽了搜索空间
        """
        order = sorted(self.variables, key=lambda s: (len(self.domains[s]), s))
        suffix = [0] * (len(order) + 1)
        for i in range(len(order) - 1, -1, -1):
            suffix[i] = suffix[i + 1] + len(self.target.actions(order[i]))
        fixed = sum(len(self.target.actions(s)) for s, x in self.assign.items() if x is not None)
        try:
            self._dfs_partial(order, 0, scorer, suffix, fixed)
        except _BudgetHit:
            return False
        return not scorer.reached_bound

    def _dfs_partial(self, order: List[int], idx: int, scorer: "_PartialScorer",
                     suffix: List[int], kept: int) -> bool:
        if scorer.best is not None and scorer.total_pairs:
            if (kept + suffix[idx]) / scorer.total_pairs <= scorer.best_score + 1e-12:
                return False
        if idx == len(order):
            scorer.evaluate({s: x for s, x in self.assign.items() if x is not None})
            return scorer.reached_bound
        var = order[idx]
        pairs = len(self.target.actions(var))
        for x in self._injective_first(self.domains[var]) + [None]:
            self._tick()
            if x is not None and not self._consistent(var, x):
                continue
            self.assign[var] = x
            stop = self._dfs_partial(order, idx + 1, scorer, suffix, kept + (pairs if x is not None else 0))
            del self.assign[var]
            if stop:
                return True
        return False


def exact_deviation(target: GroundMdp, source: GroundMdp, f: Mapping[int, int],
                    s: int, a: int, abar: int) -> float:
    """εR + εT（未映射质量计入 εT）"""
    x = f[s]
    er = abs(target.reward(s, a) - source.reward(x, abar))
    pushed, unmapped = pushforward_partial(target.successors(s, a), f)
    return er + tv_distance(pushed, source.successors(x, abar), unmapped)


def _best_choices(target: GroundMdp, source: GroundMdp, f: Mapping[int, int], s: int,
                  action_hints: Mapping[Pair, int]) -> Dict[int, List[int]]:
    """每个具体动作偏差最小（并列全保留）的抽象动作"""
    x = f[s]
    out: Dict[int, List[int]] = {}
    for a in target.actions(s):
        hint = action_hints.get((s, a))
        if hint is not None:
            choices = (hint,) if (x, hint) in source.transitions else ()
        else:
            choices = source.actions(x)
        if not choices:
            continue
        devs = {abar: round(exact_deviation(target, source, f, s, a, abar), _TIE_DIGITS) for abar in choices}
        low = min(devs.values())
        out[a] = sorted(abar for abar, d in devs.items() if d == low)
    return out


def _cover_matching(best: Mapping[int, List[int]]) -> Dict[int, int]:
    """在最小偏差选择上求最大二分匹配，返回 具体动作 -> 抽象动作"""
    if not best:
        return {}
    graph = nx.Graph()
    # 抽象动作编码为负数，节点保持为整数
    graph.add_nodes_from(sorted(best))
    for a in sorted(best):
        graph.add_edges_from((a, -1 - abar) for abar in best[a])
    matching = nx.bipartite.hopcroft_karp_matching(graph, top_nodes=sorted(best))
    return {a: -1 - matching[a] for a in sorted(best) if a in matching}


def greedy_action_map(target: GroundMdp, source: GroundMdp, f: Mapping[int, int],
                      action_hints: Optional[Mapping[Pair, int]] = None) -> Dict[Pair, int]:
    """
    逐对选偏差最小的抽象动作

    先在最小偏差选择上做一次匹配，让 f(s) 的抽象动作尽量都有原像；
    未匹配的动作优先选本状态尚未使用的抽象动作，再取编号最小者。
    """
    action_hints = action_hints or {}
    g: Dict[Pair, int] = {}
    for s in sorted(f):
        best = _best_choices(target, source, f, s, action_hints)
        matched = _cover_matching(best)
        used: Set[int] = set(matched.values())
        for a in target.actions(s):
            if a not in best:
                continue
            if a in matched:
                g[(s, a)] = matched[a]
                continue
            choice = min(best[a], key=lambda abar: (abar in used, abar))
            g[(s, a)] = choice
            used.add(choice)
    return g


def onto_failures(source: GroundMdp, f: Mapping[int, int], g: Mapping[Pair, int]) -> List[int]:
    """g 没有覆盖 f(s) 全部抽象动作的状态 s"""
    images: Dict[int, Set[int]] = {s: set() for s in f}
    for (s, _), abar in g.items():
        images[s].add(abar)
    return [s for s in sorted(f) if not set(source.actions(f[s])) <= images[s]]


def occupancy_weights(source: GroundMdp) -> Dict[Pair, float]:
    """
    源模块最优策略下的折扣占用度量，作为动作对的相关性权重

    每个动作对另加一个下限权重，权重归一到最大值为 1。
    """
    solution = optimal_values(source)
    n = source.state_count
    transition = np.zeros((n, n))
    for s in solution.policy.choice:
        for t, p in source.successors(s, solution.policy.action(s)).items():
            transition[s, t] += p
    start = np.zeros(n)
    for s, w in source.start_distribution().items():
        start[s] = w
    occupancy = np.linalg.solve(np.eye(n) - source.discount * transition.T, start)
    floor = 1.0 / max(1, len(source.transitions))
    weights = {}
    for (x, abar) in source.available_pairs():
        on_policy = x in solution.policy.choice and solution.policy.action(x) == abar
        weights[(x, abar)] = (float(occupancy[x]) if on_policy else 0.0) + floor
    top = max(weights.values()) if weights else 1.0
    return {pair: w / top for pair, w in weights.items()}


class _PartialScorer:
    """评估部分赋值的叶子，按阈值扫描选作用域，记录最优映射"""

    def __init__(self, target: GroundMdp, source: GroundMdp, penalty: float,
                 action_hints: Mapping[Pair, int], bound: float,
                 weights: Optional[Dict[Pair, float]] = None):
        self.target = target
        self.source = source
        self.penalty = penalty
        self.action_hints = action_hints
        self.bound = bound
        self.weights = weights
        self.total_pairs = len(target.transitions)
        self.best_score = -math.inf
        self.best: Optional[Tuple[Dict[int, int], Dict[Pair, int], List[Pair]]] = None
        self.reached_bound = False

    def pair_weight(self, x: int, abar: int) -> float:
        if self.weights is None:
            return 1.0
        return self.weights[(x, abar)]

    def evaluate(self, f: Dict[int, int]):
        if not f or self.total_pairs == 0:
            return
        g = greedy_action_map(self.target, self.source, f, self.action_hints)
        # g 覆盖不了全部抽象动作的状态不进入映射
        dropped = set(onto_failures(self.source, f, g))
        if dropped:
            f = {s: x for s, x in f.items() if s not in dropped}
            g = {pair: abar for pair, abar in g.items() if pair[0] not in dropped}
            if not f:
                return
        scored = []
        for (s, a), abar in g.items():
            x = f[s]
            er = abs(self.target.reward(s, a) - self.source.reward(x, abar))
            pushed, unmapped = pushforward_partial(self.target.successors(s, a), f)
            et = tv_distance(pushed, self.source.successors(x, abar), unmapped)
            scored.append((er + et, (s, a), er, et, self.pair_weight(x, abar)))
        if not scored:
            return
        scored.sort(key=lambda item: (item[0], item[1]))

        best_len, best_score = 0, -math.inf
        max_r = max_t = covered = 0.0
        for i, (_, _, er, et, w) in enumerate(scored):
            max_r, max_t = max(max_r, er), max(max_t, et)
            covered += w
            if i + 1 < len(scored) and scored[i + 1][0] == scored[i][0]:
                continue
            score = covered / self.total_pairs - self.penalty * (max_r + max_t)
            if score > best_score:
                best_len, best_score = i + 1, score

        if best_score > self.best_score:
            self.best_score = best_score
            self.best = (dict(f), g, sorted(item[1] for item in scored[:best_len]))
            if best_score >= self.bound - 1e-12:
                self.reached_bound = True


def _score(cert: HomCertificate, hom_map: HomomorphismMap, penalty: float,
           total_pairs: int, weights: Optional[Dict[Pair, float]]) -> float:
    if weights is None:
        coverage = cert.coverage_fraction
    else:
        coverage = sum(weights[(hom_map.f[s], hom_map.g[(s, a)])] for s, a in hom_map.scope) / total_pairs
    return coverage - penalty * (cert.max_reward_deviation + cert.max_transition_deviation)


def find_homomorphism(target: GroundMdp,
                      source_abstract: GroundMdp,
                      hints: Optional[HintSet] = None,
                      budget: Optional[SearchBudget] = None,
                      candidate_states: Optional[Iterable[int]] = None,
                      role: str = ROLE_ABSTRACTION) -> SearchResult:
    """
    搜索从 target 到 source_abstract 的（部分）同态

    Args:
        target: 目标MDP（映射定义域）
        source_abstract: 源模块（映射陪域）
        hints: 预先固定的赋值
        budget: 预算与模式
        candidate_states: 只在这些目标状态上赋值（默认全部）
        role: 返回映射的角色

    Returns:
        SearchResult
    """
    budget = budget or SearchBudget()
    hints = hints or HintSet()
    hints.validate(target, source_abstract)
    states = sorted(target.states if candidate_states is None else set(candidate_states))

    def build(f: Dict[int, int], g: Dict[Pair, int], scope) -> Tuple[HomomorphismMap, HomCertificate]:
        hom_map = HomomorphismMap.create(target.mdp_id, source_abstract.mdp_id, f, g, scope, role)
        return hom_map, check_homomorphism(target, source_abstract, hom_map, budget.strictness_tol)

    def strict_pass(limit: int) -> Tuple[Optional[Tuple[HomomorphismMap, HomCertificate]], int, bool]:
        search = _AssignmentSearch(target, source_abstract, hints, states,
                                   budget.strictness_tol, limit, budget.horizon)
        f, exhausted = search.run_strict()
        if f is None:
            return None, search.expansions, exhausted
        g = greedy_action_map(target, source_abstract, f, hints.fixed_action_assignments)
        if not g:
            return None, search.expansions, exhausted
        return build(f, g, g.keys()), search.expansions, False

    total_pairs = len(target.transitions)
    if budget.mode == MODE_STRICT:
        found, used, exhausted = strict_pass(budget.max_node_expansions)
        if found is None:
            if not exhausted:
                logger.warning(f"严格搜索 {target.mdp_id} -> {source_abstract.mdp_id} 预算耗尽（{used} 次展开）")
            return SearchResult(None, None, -math.inf, used, exhausted, MODE_STRICT)
        hom_map, cert = found
        logger.info(f"严格搜索 {target.mdp_id} -> {source_abstract.mdp_id} 成功，展开 {used} 次")
        return SearchResult(hom_map, cert, cert.coverage_fraction, used, False, MODE_STRICT)

    weights = occupancy_weights(source_abstract) if budget.occupancy_weighted else None
    probe_limit = min(budget.strict_probe, budget.max_node_expansions)
    used = 0
    if probe_limit > 0:
        found, used, _ = strict_pass(probe_limit)
        if found is not None:
            hom_map, cert = found
            score = _score(cert, hom_map, budget.partial_penalty, total_pairs, weights)
            logger.info(f"部分搜索 {target.mdp_id} -> {source_abstract.mdp_id}: 严格预探成功，得分 {score:.4f}")
            return SearchResult(hom_map, cert, score, used, False, MODE_PARTIAL)

    remaining = budget.max_node_expansions - used
    scope_states = set(states) | set(hints.fixed_state_assignments)
    bound = sum(len(target.actions(s)) for s in scope_states) / total_pairs if total_pairs else 0.0
    scorer = _PartialScorer(target, source_abstract, budget.partial_penalty,
                            hints.fixed_action_assignments, bound, weights)
    exhausted = False
    if remaining > 0:
        search = _AssignmentSearch(target, source_abstract, hints, states,
                                   budget.partial_tolerance, remaining, budget.horizon)
        exhausted = search.run_partial(scorer)
        used += search.expansions

    if scorer.best is None:
        logger.info(f"部分搜索 {target.mdp_id} -> {source_abstract.mdp_id} 没有找到映射（{used} 次展开）")
        return SearchResult(None, None, -math.inf, used, exhausted, MODE_PARTIAL)
    f, g, scope = scorer.best
    hom_map, cert = build(f, g, scope)
    score = _score(cert, hom_map, budget.partial_penalty, total_pairs, weights)
    logger.info(f"部分搜索 {target.mdp_id} -> {source_abstract.mdp_id}: 得分 {score:.4f} "
                f"覆盖 {cert.coverage_fraction:.2%}，展开 {used} 次")
    return SearchResult(hom_map, cert, score, used, exhausted, MODE_PARTIAL)
