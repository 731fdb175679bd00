#!/usr/bin/env python3
"""
MDP文本格式的读写

    mdp <state_count> <discount>
    name <id>
    label <s> <text>
    tag <s> <text>
    action <a> <text>
    start <s>
    t <s> <a> <s'> <prob>
    r <s> <a> <reward>
    terminal <s>

以 # 开头的行是注释。实数用 repr 写出，保证逐位往返。
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from src.errors import MdpValidationError, ParseError
from src.mdp_core.mdp import PROB_TOL, GroundMdp

logger = logging.getLogger(__name__)


def _parse_int(token: str, line_no: int, source: str, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"{what} 不是整数: {token!r}", line_no, source) from None


def _parse_float(token: str, line_no: int, source: str, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"{what} 不是实数: {token!r}", line_no, source) from None


def loads(text: str, source: str = "", default_id: str = "mdp") -> GroundMdp:
    """
    解析MDP文本

    Args:
        text: 文件内容
        source: 出错信息中使用的来源名
        default_id: 没有 name 行时使用的标识

    Returns:
        GroundMdp

    Raises:
        ParseError: 语法错误或分布不合法（带行号）
    """
    header: Optional[Tuple[int, float]] = None
    mdp_id = default_id
    labels: Dict[int, str] = {}
    tags: Dict[int, set] = {}
    action_labels: Dict[int, str] = {}
    starts: List[int] = []
    transitions: Dict[Tuple[int, int], Dict[int, float]] = {}
    pair_line: Dict[Tuple[int, int], int] = {}
    rewards: Dict[Tuple[int, int], float] = {}
    terminals: List[int] = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        key = parts[0]

        if key == "mdp":
            if header is not None:
                raise ParseError("重复的 mdp 头", line_no, source)
            if len(parts) != 3:
                raise ParseError("mdp 行格式应为: mdp <state_count> <discount>", line_no, source)
            header = (_parse_int(parts[1], line_no, source, "状态数"),
                      _parse_float(parts[2], line_no, source, "折扣"))
            continue
        if header is None:
            raise ParseError("文件必须以 mdp 头开始", line_no, source)
        n = header[0]

        def state(token: str) -> int:
            s = _parse_int(token, line_no, source, "状态")
            if not 0 <= s < n:
                raise ParseError(f"状态越界: {s}", line_no, source)
            return s

        if key == "name" and len(parts) == 2:
            mdp_id = parts[1]
        elif key == "label" and len(parts) >= 3:
            labels[state(parts[1])] = line.split(None, 2)[2]
        elif key == "tag" and len(parts) >= 3:
            tags.setdefault(state(parts[1]), set()).add(line.split(None, 2)[2])
        elif key == "action" and len(parts) >= 3:
            action_labels[_parse_int(parts[1], line_no, source, "动作")] = line.split(None, 2)[2]
        elif key == "start" and len(parts) == 2:
            starts.append(state(parts[1]))
        elif key == "t" and len(parts) == 5:
            s = state(parts[1])
            a = _parse_int(parts[2], line_no, source, "动作")
            t = state(parts[3])
            p = _parse_float(parts[4], line_no, source, "概率")
            if p < 0:
                raise ParseError(f"负概率: {p}", line_no, source)
            dist = transitions.setdefault((s, a), {})
            if t in dist:
                raise ParseError(f"重复的转移 ({s}, {a}) -> {t}", line_no, source)
            dist[t] = p
            pair_line[(s, a)] = line_no
        elif key == "r" and len(parts) == 4:
            s = state(parts[1])
            a = _parse_int(parts[2], line_no, source, "动作")
            if (s, a) in rewards:
                raise ParseError(f"重复的奖励 ({s}, {a})", line_no, source)
            rewards[(s, a)] = _parse_float(parts[3], line_no, source, "奖励")
        elif key == "terminal" and len(parts) == 2:
            terminals.append(state(parts[1]))
        else:
            raise ParseError(f"无法识别的行: {line!r}", line_no, source)

    if header is None:
        raise ParseError("缺少 mdp 头", None, source)

    for pair, dist in transitions.items():
        total = sum(dist.values())
        if abs(total - 1.0) > PROB_TOL:
            raise ParseError(f"({pair[0]}, {pair[1]}) 的转移概率和为 {total!r}，不等于1",
                             pair_line[pair], source)
        if pair not in rewards:
            raise ParseError(f"({pair[0]}, {pair[1]}) 缺少 r 行", pair_line[pair], source)
    extra = sorted(set(rewards) - set(transitions))
    if extra:
        raise ParseError(f"奖励所在的动作对没有转移: {extra[0]}", None, source)

    try:
        return GroundMdp.build(
            mdp_id=mdp_id,
            state_count=header[0],
            discount=header[1],
            transitions=transitions,
            rewards=rewards,
            terminal_states=terminals if terminals else None,
            state_labels=labels,
            feature_tags=tags,
            action_labels=action_labels,
            start_states=starts,
        )
    except MdpValidationError as e:
        raise ParseError(str(e), None, source) from e


def dumps(mdp: GroundMdp) -> str:
    """把MDP写成文本格式（确定性输出）"""
    lines = [f"mdp {mdp.state_count} {mdp.discount!r}", f"name {mdp.mdp_id}"]
    for s, text in sorted(mdp.state_labels.items()):
        lines.append(f"label {s} {text}")
    for s, tags in sorted(mdp.feature_tags.items()):
        for tag in sorted(tags):
            lines.append(f"tag {s} {tag}")
    for a, text in sorted(mdp.action_labels.items()):
        lines.append(f"action {a} {text}")
    for s in mdp.start_states:
        lines.append(f"start {s}")
    for s, a in mdp.available_pairs():
        for t, p in sorted(mdp.transitions[(s, a)].items()):
            lines.append(f"t {s} {a} {t} {p!r}")
        lines.append(f"r {s} {a} {mdp.rewards[(s, a)]!r}")
    for s in sorted(mdp.terminal_states):
        lines.append(f"terminal {s}")
    return "\n".join(lines) + "\n"


def read_mdp(path: Union[str, Path]) -> GroundMdp:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"无法读取文件: {e}", None, str(path)) from e
    return loads(text, source=str(path), default_id=path.stem)


def write_mdp(mdp: GroundMdp, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(mdp), encoding="utf-8")
    logger.debug(f"已写出MDP {mdp.mdp_id} -> {path}")
    return path
