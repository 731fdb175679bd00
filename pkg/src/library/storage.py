#!/usr/bin/env python3
"""
模块库的目录存储

    index.txt        horizon / module / episode 行
    <id>.mdp         模块片段（MDP文本格式）
    <id>.stats       entry / exit / use / discard / lineage / policy / value 行

实数用 repr 写出，读回后与原库逐位相等。
"""

import logging
from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from src.errors import ParseError
from src.library.modules import Library, Module
from src.mdp_core.mdp import Policy, ValueFunction
from src.mdp_core.mdp_format import dumps, loads

logger = logging.getLogger(__name__)

INDEX_FILE = "index.txt"


def dumps_stats(module: Module) -> str:
    lines: List[str] = []
    lines.extend(f"entry {s}" for s in module.entries)
    lines.extend(f"exit {s}" for s in module.exits)
    lines.extend(f"use {key} {n}" for key, n in sorted(module.use_count.items()))
    lines.extend(f"discard {key} {n}" for key, n in sorted(module.discard_count.items()))
    lines.extend(f"lineage {origin}" for origin in module.lineage)
    if module.policy is not None:
        lines.extend(f"policy {s} {a}" for s, a in sorted(module.policy.choice.items()))
    if module.values is not None:
        lines.extend(f"value {s} {float(v)!r}" for s, v in enumerate(module.values.values))
    return "\n".join(lines) + "\n"


def _parse_stats(text: str, source: str) -> Dict[str, object]:
    parsed = {"entry": [], "exit": [], "use": {}, "discard": {}, "lineage": [], "policy": {}, "value": {}}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        kind = parts[0]
        try:
            if kind in ("entry", "exit") and len(parts) == 2:
                parsed[kind].append(int(parts[1]))
            elif kind in ("use", "discard") and len(parts) == 3:
                parsed[kind][parts[1]] = int(parts[2])
            elif kind == "lineage" and len(parts) == 2:
                parsed["lineage"].append(parts[1])
            elif kind == "policy" and len(parts) == 3:
                parsed["policy"][int(parts[1])] = int(parts[2])
            elif kind == "value" and len(parts) == 3:
                parsed["value"][int(parts[1])] = float(parts[2])
            else:
                raise ParseError(f"无法识别的行: {raw.strip()!r}", line_no, source)
        except ValueError as e:
            if isinstance(e, ParseError):
                raise
            raise ParseError(f"字段格式错误: {raw.strip()!r}", line_no, source) from None
    return parsed


def save_library(library: Library, directory: Union[str, Path]) -> Path:
    """写出模块库；目录中已有的同名文件被覆盖"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = [f"horizon {library.horizon}"]
    index.extend(f"module {module_id}" for module_id in library.modules)
    index.extend(f"episode {task_id}" for task_id in sorted(library.seen_episodes))
    (directory / INDEX_FILE).write_text("\n".join(index) + "\n", encoding="utf-8")
    for module_id, module in library.modules.items():
        (directory / f"{module_id}.mdp").write_text(dumps(module.fragment), encoding="utf-8")
        (directory / f"{module_id}.stats").write_text(dumps_stats(module), encoding="utf-8")
    logger.info(f"模块库（{len(library)} 个模块）已写出到 {directory}")
    return directory


def load_library(directory: Union[str, Path]) -> Library:
    """读回模块库"""
    directory = Path(directory)
    index_path = directory / INDEX_FILE
    try:
        index_text = index_path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"无法读取模块库索引: {e}", None, str(index_path)) from e

    horizon = None
    module_ids: List[str] = []
    episodes = set()
    for line_no, raw in enumerate(index_text.splitlines(), start=1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "horizon" and len(parts) == 2 and parts[1].isdigit():
            horizon = int(parts[1])
        elif parts[0] == "module" and len(parts) == 2:
            module_ids.append(parts[1])
        elif parts[0] == "episode" and len(parts) == 2:
            episodes.add(parts[1])
        else:
            raise ParseError(f"无法识别的行: {raw.strip()!r}", line_no, str(index_path))
    if horizon is None:
        raise ParseError("缺少 horizon 行", None, str(index_path))

    modules: Dict[str, Module] = {}
    for module_id in module_ids:
        fragment_path = directory / f"{module_id}.mdp"
        stats_path = directory / f"{module_id}.stats"
        try:
            fragment = loads(fragment_path.read_text(encoding="utf-8"), source=str(fragment_path),
                             default_id=module_id)
            stats = _parse_stats(stats_path.read_text(encoding="utf-8"), str(stats_path))
        except OSError as e:
            raise ParseError(f"无法读取模块文件: {e}", None, str(directory)) from e
        policy = Policy.deterministic(stats["policy"]) if stats["policy"] else None
        values = None
        if stats["value"]:
            values = ValueFunction(np.array([stats["value"][s] for s in sorted(stats["value"])]), module_id)
        modules[module_id] = Module(module_id, fragment, tuple(stats["entry"]), tuple(stats["exit"]),
                                    policy, values, stats["use"], stats["discard"], stats["lineage"])
    library = Library(modules=modules, seen_episodes=episodes, horizon=horizon)
    logger.debug(f"从 {directory} 读入 {len(library)} 个模块")
    return library
