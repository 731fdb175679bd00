#!/usr/bin/env python3
"""
领域生成器
门-钥匙网格、邮箱-密码、双房间走廊、随机MDP与植入商实例，全部确定性（按种子）
"""

import logging
from collections import deque
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.errors import DomainParameterError
from src.homomorphism.maps import ROLE_ABSTRACTION, HomomorphismMap
from src.mdp_core.mdp import GroundMdp, Pair

logger = logging.getLogger(__name__)

Cell = Tuple[int, int]

DEFAULT_DISCOUNT = 0.95

# 门模块的动作
GET_KEY, INSERT_KEY, TURN_KEY, WITHDRAW_KEY, BANG_ON = 0, 1, 2, 3, 4
DOOR_LOCKED, DOOR_HAS_KEY, DOOR_AT_DOOR, DOOR_OPEN = 0, 1, 2, 3

# 网格动作
UP, DOWN, LEFT, RIGHT, PICK_UP, UNLOCK = 0, 1, 2, 3, 4, 5
_MOVES = {UP: (0, -1), DOWN: (0, 1), LEFT: (-1, 0), RIGHT: (1, 0)}

# 邮箱动作
RECALL, TYPE_PASSWORD, CLICK_LOGIN, SHARE, CLEAR_FIELD = 0, 1, 2, 3, 4

# 走廊动作
FORWARD, BACK = 0, 1


def _check_discount(discount: float):
    if not 0.0 <= discount < 1.0:
        raise DomainParameterError(f"折扣必须在[0, 1)内: {discount}")


# ==================== 门模块 ====================
def door_module(discount: float = DEFAULT_DISCOUNT, module_id: str = "door-module") -> GroundMdp:
    """
    共享的4状态抽象门模块

    locked --get-key--> has-key --insert-key--> at-door --turn-key(奖励1)--> open
    at-door --withdraw-key--> has-key；bang-on 在每个非终止状态上自环
    """
    _check_discount(discount)
    det = lambda t: {t: 1.0}
    transitions = {
        (DOOR_LOCKED, GET_KEY): det(DOOR_HAS_KEY),
        (DOOR_LOCKED, BANG_ON): det(DOOR_LOCKED),
        (DOOR_HAS_KEY, INSERT_KEY): det(DOOR_AT_DOOR),
        (DOOR_HAS_KEY, BANG_ON): det(DOOR_HAS_KEY),
        (DOOR_AT_DOOR, TURN_KEY): det(DOOR_OPEN),
        (DOOR_AT_DOOR, WITHDRAW_KEY): det(DOOR_HAS_KEY),
        (DOOR_AT_DOOR, BANG_ON): det(DOOR_AT_DOOR),
    }
    rewards = {pair: 0.0 for pair in transitions}
    rewards[(DOOR_AT_DOOR, TURN_KEY)] = 1.0
    return GroundMdp.build(
        mdp_id=module_id,
        state_count=4,
        discount=discount,
        transitions=transitions,
        rewards=rewards,
        state_labels={DOOR_LOCKED: "locked", DOOR_HAS_KEY: "has-key", DOOR_AT_DOOR: "at-door", DOOR_OPEN: "open"},
        feature_tags={DOOR_OPEN: {"goal"}},
        action_labels={GET_KEY: "get-key", INSERT_KEY: "insert-key", TURN_KEY: "turn-key",
                       WITHDRAW_KEY: "withdraw-key", BANG_ON: "bang-on"},
        start_states=[DOOR_LOCKED],
    )


# ==================== 门-钥匙网格 ====================
def _check_cell(name: str, cell: Cell, width: int, height: int) -> Cell:
    x, y = int(cell[0]), int(cell[1])
    if not (0 <= x < width and 0 <= y < height):
        raise DomainParameterError(f"{name} {cell} 超出 {width}x{height} 网格")
    return x, y


def door_key_grid_with_map(width: int,
                           height: int,
                           key_pos: Cell,
                           door_pos: Cell,
                           seed: int = 0,
                           start_pos: Optional[Cell] = (0, 0),
                           start_with_key: bool = False,
                           random_start: bool = False,
                           discount: float = DEFAULT_DISCOUNT,
                           mdp_id: Optional[str] = None) -> Tuple[GroundMdp, HomomorphismMap]:
    """
    门-钥匙网格及其到 door_module() 的映射
    偏差处处为零；但不在钥匙格或门旁的格子上 g 覆盖不了全部抽象动作，所以只交换、不严格

    状态 = (格子, 是否持钥匙)，加一个终止的开门目标状态；只构造从起点可达的状态。
    移动只在界内可用；pick-up 只在钥匙格且未持钥匙时可用；
    unlock 只在门格且持钥匙时可用，进入目标并获得奖励1。

    Args:
        width, height: 网格大小，各在1到10之间且至少2个格子
        key_pos, door_pos: 钥匙与门的位置，必须不同
        seed: 只在 random_start=True 时用于抽取起点
        start_with_key: 起始即持有钥匙（无钥匙变体）
    """
    if not (1 <= width <= 10 and 1 <= height <= 10) or width * height < 2:
        raise DomainParameterError(f"网格大小非法: {width}x{height}")
    _check_discount(discount)
    key = _check_cell("钥匙位置", key_pos, width, height)
    door = _check_cell("门位置", door_pos, width, height)
    if key == door:
        raise DomainParameterError("钥匙与门不能在同一格")
    if random_start:
        rng = np.random.default_rng(seed)
        start = (int(rng.integers(width)), int(rng.integers(height)))
    else:
        start = _check_cell("起点", start_pos or (0, 0), width, height)

    goal = ("goal",)
    index: Dict[tuple, int] = {}
    order: List[tuple] = []
    transitions: Dict[Pair, Dict[int, float]] = {}
    rewards: Dict[Pair, float] = {}
    edges: List[Tuple[tuple, int, tuple, float]] = []

    def visit(node):
        if node not in index:
            index[node] = len(order)
            order.append(node)
            queue.append(node)

    queue = deque()
    visit((start, bool(start_with_key)))
    while queue:
        node = queue.popleft()
        if node == goal:
            continue
        (x, y), has_key = node
        out = []
        for action, (dx, dy) in _MOVES.items():
            nx, ny = x + dx, y + dy
            if 0 <= nx < width and 0 <= ny < height:
                out.append((node, action, ((nx, ny), has_key), 0.0))
        if (x, y) == key and not has_key:
            out.append((node, PICK_UP, ((x, y), True), 0.0))
        if (x, y) == door and has_key:
            out.append((node, UNLOCK, goal, 1.0))
        edges.extend(out)
        for _, _, nxt, _ in out:
            visit(nxt)

    for node, action, nxt, reward in edges:
        pair = (index[node], action)
        transitions[pair] = {index[nxt]: 1.0}
        rewards[pair] = reward

    labels, tags = {}, {}
    f, g = {}, {}
    for node, s in index.items():
        if node == goal:
            labels[s] = "goal"
            tags[s] = {"goal"}
            f[s] = DOOR_OPEN
            continue
        (x, y), has_key = node
        labels[s] = f"({x},{y}){'+key' if has_key else ''}"
        cell_tags = set()
        if (x, y) == key:
            cell_tags.add("key-cell")
        if (x, y) == door:
            cell_tags.add("door-cell")
        if has_key:
            cell_tags.add("has-key")
        tags[s] = cell_tags
        if not has_key:
            f[s] = DOOR_LOCKED
        elif (x, y) == door:
            f[s] = DOOR_AT_DOOR
        else:
            f[s] = DOOR_HAS_KEY

    for node, action, nxt, _ in edges:
        s = index[node]
        if action == PICK_UP:
            g[(s, action)] = GET_KEY
        elif action == UNLOCK:
            g[(s, action)] = TURN_KEY
        elif f[s] == DOOR_LOCKED:
            g[(s, action)] = BANG_ON
        elif f[s] == DOOR_AT_DOOR:
            g[(s, action)] = WITHDRAW_KEY
        else:
            g[(s, action)] = INSERT_KEY if nxt[0] == door else BANG_ON

    grid_id = mdp_id or f"door-grid-{width}x{height}"
    mdp = GroundMdp.build(
        mdp_id=grid_id,
        state_count=len(order),
        discount=discount,
        transitions=transitions,
        rewards=rewards,
        state_labels=labels,
        feature_tags=tags,
        action_labels={UP: "up", DOWN: "down", LEFT: "left", RIGHT: "right", PICK_UP: "pick-up", UNLOCK: "unlock"},
        start_states=[0],
    )
    hom_map = HomomorphismMap.create(grid_id, "door-module", f, g, None, ROLE_ABSTRACTION)
    logger.debug(f"生成门-钥匙网格 {grid_id}: {mdp.state_count} 个状态")
    return mdp, hom_map


def door_key_grid(width: int, height: int, key_pos: Cell, door_pos: Cell, seed: int = 0, **kwargs) -> GroundMdp:
    """门-钥匙网格（参数见 door_key_grid_with_map）"""
    return door_key_grid_with_map(width, height, key_pos, door_pos, seed, **kwargs)[0]


# ==================== 邮箱-密码 ====================
def email_password_with_map(recall_steps: int = 1,
                            discount: float = DEFAULT_DISCOUNT,
                            mdp_id: str = "email-password") -> Tuple[GroundMdp, HomomorphismMap]:
    """
    邮箱登录任务及其到门模块的映射（回忆的中间状态都映到 locked）
    recall_steps 为 1 时严格；更长的回忆中间状态上没有 get-key 的原像，只交换不严格

    no-pwd --recall--> (recalling...) --> has-pwd --type-password--> typed --click-login(奖励1)--> logged-in
    没有密码时 click-login 自环、奖励0；share 在每个非终止状态上自环；
    typed 上 clear-field 回到 has-pwd。
    """
    if recall_steps < 1:
        raise DomainParameterError(f"recall_steps 必须 ≥ 1: {recall_steps}")
    _check_discount(discount)
    has_pwd = recall_steps
    typed = recall_steps + 1
    logged_in = recall_steps + 2

    transitions: Dict[Pair, Dict[int, float]] = {}
    rewards: Dict[Pair, float] = {}
    labels = {0: "no-pwd", has_pwd: "has-pwd", typed: "typed", logged_in: "logged-in"}
    f = {0: DOOR_LOCKED, has_pwd: DOOR_HAS_KEY, typed: DOOR_AT_DOOR, logged_in: DOOR_OPEN}
    g = {}

    def add(s, a, t, r=0.0, abar=None):
        transitions[(s, a)] = {t: 1.0}
        rewards[(s, a)] = r
        if abar is not None:
            g[(s, a)] = abar

    for s in range(recall_steps):
        if s > 0:
            labels[s] = f"recalling-{s}"
            f[s] = DOOR_LOCKED
        add(s, RECALL, s + 1, abar=GET_KEY if s + 1 == has_pwd else BANG_ON)
        add(s, CLICK_LOGIN, s, abar=BANG_ON)
        add(s, SHARE, s, abar=BANG_ON)
    add(has_pwd, TYPE_PASSWORD, typed, abar=INSERT_KEY)
    add(has_pwd, CLICK_LOGIN, has_pwd, abar=BANG_ON)
    add(has_pwd, SHARE, has_pwd, abar=BANG_ON)
    add(typed, CLICK_LOGIN, logged_in, 1.0, abar=TURN_KEY)
    add(typed, CLEAR_FIELD, has_pwd, abar=WITHDRAW_KEY)
    add(typed, SHARE, typed, abar=BANG_ON)

    mdp = GroundMdp.build(
        mdp_id=mdp_id,
        state_count=recall_steps + 3,
        discount=discount,
        transitions=transitions,
        rewards=rewards,
        state_labels=labels,
        feature_tags={logged_in: {"goal"}},
        action_labels={RECALL: "recall-password", TYPE_PASSWORD: "type-password", CLICK_LOGIN: "click-login",
                       SHARE: "share", CLEAR_FIELD: "clear-field"},
        start_states=[0],
    )
    return mdp, HomomorphismMap.create(mdp_id, "door-module", f, g, None, ROLE_ABSTRACTION)


def email_password(recall_steps: int = 1, discount: float = DEFAULT_DISCOUNT) -> GroundMdp:
    return email_password_with_map(recall_steps, discount)[0]


# ==================== 走廊房间 ====================
def room_module(length: int,
                exit_reward: float = 0.0,
                discount: float = DEFAULT_DISCOUNT,
                module_id: Optional[str] = None) -> GroundMdp:
    """
    单个走廊房间：格子 0..length-1，出口 length 为终止状态
    forward 前进一格；back 后退一格，在入口 0 不可用；从最后一格前进到出口时获得 exit_reward
    """
    if length < 1:
        raise DomainParameterError(f"房间长度必须 ≥ 1: {length}")
    _check_discount(discount)
    transitions, rewards = {}, {}
    for s in range(length):
        transitions[(s, FORWARD)] = {s + 1: 1.0}
        rewards[(s, FORWARD)] = exit_reward if s == length - 1 else 0.0
        if s > 0:
            transitions[(s, BACK)] = {s - 1: 1.0}
            rewards[(s, BACK)] = 0.0
    return GroundMdp.build(
        mdp_id=module_id or f"room-{length}",
        state_count=length + 1,
        discount=discount,
        transitions=transitions,
        rewards=rewards,
        state_labels={0: "entry", length: "exit"},
        feature_tags={length: {"exit"}},
        action_labels={FORWARD: "forward", BACK: "back"},
        start_states=[0],
    )


def two_room(room_length: int, discount: float = DEFAULT_DISCOUNT, mdp_id: Optional[str] = None) -> GroundMdp:
    """
    两个首尾相接的走廊房间：0..2L-1，目标 2L
    back 在入口 0 与门口 L 不可用；最后一步前进到目标时奖励1。
    起点的最优值为 γ^(2L-1)。
    """
    if room_length < 1:
        raise DomainParameterError(f"房间长度必须 ≥ 1: {room_length}")
    _check_discount(discount)
    total = 2 * room_length
    transitions, rewards = {}, {}
    for s in range(total):
        transitions[(s, FORWARD)] = {s + 1: 1.0}
        rewards[(s, FORWARD)] = 1.0 if s == total - 1 else 0.0
        if s not in (0, room_length):
            transitions[(s, BACK)] = {s - 1: 1.0}
            rewards[(s, BACK)] = 0.0
    return GroundMdp.build(
        mdp_id=mdp_id or f"two-room-{room_length}",
        state_count=total + 1,
        discount=discount,
        transitions=transitions,
        rewards=rewards,
        state_labels={0: "entry", room_length: "doorway", total: "goal"},
        feature_tags={total: {"exit"}},
        action_labels={FORWARD: "forward", BACK: "back"},
        start_states=[0],
    )


def two_room_bindings(room_length: int, ground_id: str,
                      first: str = "room-a", second: str = "room-b") -> List[HomomorphismMap]:
    """把 two_room 的两半分别绑定到两个房间实例（按实例标识匹配）"""
    total = 2 * room_length
    maps = []
    for offset, instance in ((0, first), (room_length, second)):
        f, g = {}, {}
        for local in range(room_length):
            s = offset + local
            f[s] = local
            g[(s, FORWARD)] = FORWARD
            if local > 0:
                g[(s, BACK)] = BACK
        if offset == room_length:
            f[total] = room_length
        maps.append(HomomorphismMap.create(ground_id, instance, f, g, None, ROLE_ABSTRACTION))
    return maps


# ==================== 随机MDP ====================
def random_mdp(n_states: int,
               n_actions: int,
               branching: int,
               reward_sparsity: float,
               seed: int,
               discount: float = 0.9,
               n_terminal: int = 0,
               mdp_id: Optional[str] = None) -> GroundMdp:
    """
    种子化的随机MDP

    每个非终止状态的每个动作随机选 branching 个后继，概率取自均匀 Dirichlet；
    奖励以 1 - reward_sparsity 的概率为1，否则为0。编号最大的 n_terminal 个状态为终止状态。
    """
    if n_states < 1 or n_actions < 1:
        raise DomainParameterError(f"状态数与动作数必须为正: {n_states}, {n_actions}")
    if not 1 <= branching <= n_states:
        raise DomainParameterError(f"branching 必须在1到{n_states}之间: {branching}")
    if not 0.0 <= reward_sparsity <= 1.0:
        raise DomainParameterError(f"reward_sparsity 必须在[0, 1]内: {reward_sparsity}")
    if not 0 <= n_terminal < n_states:
        raise DomainParameterError(f"n_terminal 必须在0到{n_states - 1}之间: {n_terminal}")
    _check_discount(discount)

    rng = np.random.default_rng(seed)
    transitions, rewards = {}, {}
    for s in range(n_states - n_terminal):
        for a in range(n_actions):
            succ = sorted(int(t) for t in rng.choice(n_states, size=branching, replace=False))
            probs = rng.dirichlet(np.ones(branching))
            probs = probs / probs.sum()
            transitions[(s, a)] = {t: float(p) for t, p in zip(succ, probs)}
            rewards[(s, a)] = 1.0 if rng.random() >= reward_sparsity else 0.0
    return GroundMdp.build(
        mdp_id=mdp_id or f"random-{seed}",
        state_count=n_states,
        discount=discount,
        transitions=transitions,
        rewards=rewards,
        terminal_states=range(n_states - n_terminal, n_states),
    )


# ==================== 植入商 ====================
def planted_quotient(abstract: GroundMdp,
                     blowup: int,
                     noise: float,
                     seed: int,
                     mdp_id: Optional[str] = None) -> Tuple[GroundMdp, HomomorphismMap]:
    """
    把每个抽象状态展开成 blowup 个具体状态

    每个成员的动作是抽象动作的一个随机置换；每个抽象后继的概率随机分给该块的1到2个成员，
    因此 noise=0 时推前结果与抽象转移完全一致。noise>0 时再向一个随机点质量混合，
    权重为 noise，每对的总变差偏差不超过 noise。

    Returns:
        (具体MDP, 植入的映射)
    """
    if blowup < 1:
        raise DomainParameterError(f"blowup 必须 ≥ 1: {blowup}")
    if not 0.0 <= noise <= 0.2:
        raise DomainParameterError(f"noise 必须在[0, 0.2]内: {noise}")

    rng = np.random.default_rng(seed)
    n = abstract.state_count * blowup
    perm = rng.permutation(n)
    members = {x: [int(perm[x * blowup + j]) for j in range(blowup)] for x in abstract.states}

    transitions: Dict[Pair, Dict[int, float]] = {}
    rewards: Dict[Pair, float] = {}
    f: Dict[int, int] = {}
    g: Dict[Pair, int] = {}
    labels, tags = {}, {}
    for x in abstract.states:
        actions = list(abstract.actions(x))
        for j, s in enumerate(members[x]):
            f[s] = x
            labels[s] = f"{abstract.label(x)}.{j}"
            if abstract.tags(x):
                tags[s] = abstract.tags(x)
            relabel = [int(a) for a in rng.permutation(actions)] if actions else []
            for abar, a in zip(actions, relabel):
                dist: Dict[int, float] = {}
                for y, q in sorted(abstract.successors(x, abar).items()):
                    k = 1 if blowup == 1 else int(rng.integers(1, 3))
                    chosen = [int(t) for t in rng.choice(members[y], size=k, replace=False)]
                    if k == 1:
                        dist[chosen[0]] = dist.get(chosen[0], 0.0) + q
                    else:
                        w = float(rng.uniform(0.2, 0.8))
                        dist[chosen[0]] = dist.get(chosen[0], 0.0) + q * w
                        dist[chosen[1]] = dist.get(chosen[1], 0.0) + q * (1.0 - w)
                if noise > 0.0:
                    z = int(rng.integers(n))
                    dist = {t: (1.0 - noise) * p for t, p in dist.items()}
                    dist[z] = dist.get(z, 0.0) + noise
                total = sum(dist.values())
                transitions[(s, a)] = {t: p / total for t, p in sorted(dist.items())}
                rewards[(s, a)] = abstract.reward(x, abar)
                g[(s, a)] = abar

    ground_id = mdp_id or f"{abstract.mdp_id}-planted-{seed}"
    ground = GroundMdp.build(
        mdp_id=ground_id,
        state_count=n,
        discount=abstract.discount,
        transitions=transitions,
        rewards=rewards,
        terminal_states=[s for x in abstract.terminal_states for s in members[x]],
        state_labels=labels,
        feature_tags=tags,
        start_states=[s for x in abstract.start_states for s in members[x]],
    )
    hom_map = HomomorphismMap.create(ground_id, abstract.mdp_id, f, g, None, ROLE_ABSTRACTION)
    return ground, hom_map
