#!/usr/bin/env python3
"""
同态映射文本格式

    map <ground_id> <abstract_id>
    role <abstraction|analogy>
    f <s> <x>
    g <s> <a> <ā>
    scope <s> <a>

提示文件使用同样的 f / g 行（不需要 map 头）。
"""

import logging
from pathlib import Path
from typing import Dict, Tuple, Union

from src.errors import MdpValidationError, ParseError
from src.homomorphism.maps import ROLE_ABSTRACTION, ROLES, HomCertificate, HomomorphismMap
from src.mdp_core.mdp import Pair

logger = logging.getLogger(__name__)


def _ints(parts, count: int, line_no: int, source: str):
    if len(parts) != count + 1:
        raise ParseError(f"{parts[0]} 行需要 {count} 个整数", line_no, source)
    try:
        return [int(p) for p in parts[1:]]
    except ValueError:
        raise ParseError(f"{parts[0]} 行含非整数字段", line_no, source) from None


def parse_assignments(text: str, source: str = "") -> Tuple[Dict[int, int], Dict[Pair, int], list, dict]:
    """
    解析 f / g / scope 行以及可选的 map / role 头

    Returns:
        (f, g, scope 列表, 头信息)
    """
    f: Dict[int, int] = {}
    g: Dict[Pair, int] = {}
    scope = []
    header: Dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        key = parts[0]
        if key == "map":
            if len(parts) != 3 or "ground" in header:
                raise ParseError("map 行格式应为: map <ground_id> <abstract_id>", line_no, source)
            header["ground"], header["abstract"] = parts[1], parts[2]
        elif key == "role":
            if len(parts) != 2 or parts[1] not in ROLES:
                raise ParseError(f"未知的映射角色: {line!r}", line_no, source)
            header["role"] = parts[1]
        elif key == "f":
            s, x = _ints(parts, 2, line_no, source)
            if s in f and f[s] != x:
                raise ParseError(f"状态 {s} 被赋值两次", line_no, source)
            f[s] = x
        elif key == "g":
            s, a, abar = _ints(parts, 3, line_no, source)
            if (s, a) in g and g[(s, a)] != abar:
                raise ParseError(f"动作对 ({s}, {a}) 被赋值两次", line_no, source)
            g[(s, a)] = abar
        elif key == "scope":
            s, a = _ints(parts, 2, line_no, source)
            scope.append((s, a))
        else:
            raise ParseError(f"无法识别的行: {line!r}", line_no, source)
    return f, g, scope, header


def loads_map(text: str, source: str = "") -> HomomorphismMap:
    f, g, scope, header = parse_assignments(text, source)
    if "ground" not in header:
        raise ParseError("缺少 map 头", None, source)
    try:
        return HomomorphismMap.create(header["ground"], header["abstract"], f, g, scope,
                                      header.get("role", ROLE_ABSTRACTION))
    except MdpValidationError as e:
        raise ParseError(str(e), None, source) from e


def dumps_map(hom_map: HomomorphismMap) -> str:
    lines = [f"map {hom_map.source_ground} {hom_map.target_abstract}", f"role {hom_map.role}"]
    lines.extend(f"f {s} {x}" for s, x in sorted(hom_map.f.items()))
    lines.extend(f"g {s} {a} {x}" for (s, a), x in sorted(hom_map.g.items()))
    lines.extend(f"scope {s} {a}" for s, a in sorted(hom_map.scope))
    return "\n".join(lines) + "\n"


def read_map(path: Union[str, Path]) -> HomomorphismMap:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"无法读取文件: {e}", None, str(path)) from e
    return loads_map(text, source=str(path))


def write_map(hom_map: HomomorphismMap, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_map(hom_map), encoding="utf-8")
    return path


def format_certificate(cert: HomCertificate) -> str:
    """证书的可读报告（CLI check-hom 输出）"""
    lines = [
        f"strict {str(cert.strict).lower()}",
        f"commutes {str(cert.commutes).lower()}",
        f"max_reward_deviation {cert.max_reward_deviation!r}",
        f"max_transition_deviation {cert.max_transition_deviation!r}",
        f"coverage_fraction {cert.coverage_fraction!r}",
    ]
    for pair in sorted(cert.reward_deviation):
        er, et = cert.reward_deviation[pair], cert.transition_deviation[pair]
        if er > 0.0 or et > 0.0:
            lines.append(f"pair {pair[0]} {pair[1]} {er!r} {et!r}")
    for s, x in cert.uncovered_actions:
        lines.append(f"uncovered {s} {x}")
    return "\n".join(lines) + "\n"
