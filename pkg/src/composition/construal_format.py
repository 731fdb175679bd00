#!/usr/bin/env python3
"""
构念文件

    fragment.mdp      组装后的抽象MDP（MDP文本格式）
    binding.map       到具体任务的绑定（映射文本格式）
    provenance.csv    element,module_id,source_element
    glue.txt          glue / entry / exit / flag 行
"""

import csv
import io
import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union

from src.composition.construal import Construal
from src.errors import ParseError
from src.homomorphism.map_format import dumps_map, loads_map
from src.mdp_core.mdp_format import dumps, loads

logger = logging.getLogger(__name__)

FRAGMENT_FILE = "fragment.mdp"
BINDING_FILE = "binding.map"
PROVENANCE_FILE = "provenance.csv"
GLUE_FILE = "glue.txt"
PROVENANCE_HEADER = ["element", "module_id", "source_element"]


def dumps_provenance(construal: Construal) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(PROVENANCE_HEADER)
    writer.writerows(construal.provenance)
    return buffer.getvalue()


def dumps_glue(construal: Construal) -> str:
    lines = [f"glue {a} {b} {c} {d}" for a, b, c, d in construal.glue]
    lines.extend(f"entry {s}" for s in construal.entries)
    lines.extend(f"exit {s}" for s in construal.exits)
    lines.append(f"flag no_analogy {str(construal.no_analogy).lower()}")
    lines.append(f"coverage {construal.coverage!r}")
    return "\n".join(lines) + "\n"


def write_construal(construal: Construal, directory: Union[str, Path]) -> Path:
    """把构念写成四个文件"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / FRAGMENT_FILE).write_text(dumps(construal.abstract_mdp), encoding="utf-8")
    if construal.binding is not None:
        (directory / BINDING_FILE).write_text(dumps_map(construal.binding), encoding="utf-8")
    with open(directory / PROVENANCE_FILE, "w", encoding="utf-8", newline="") as fh:
        fh.write(dumps_provenance(construal))
    (directory / GLUE_FILE).write_text(dumps_glue(construal), encoding="utf-8")
    logger.info(f"构念已写出到 {directory}")
    return directory


def _parse_glue(text: str, source: str):
    glue: List[Tuple[str, int, str, int]] = []
    entries, exits = [], []
    no_analogy, coverage = False, 0.0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            if parts[0] == "glue" and len(parts) == 5:
                glue.append((parts[1], int(parts[2]), parts[3], int(parts[4])))
            elif parts[0] == "entry" and len(parts) == 2:
                entries.append(int(parts[1]))
            elif parts[0] == "exit" and len(parts) == 2:
                exits.append(int(parts[1]))
            elif parts[0] == "flag" and len(parts) == 3 and parts[1] == "no_analogy":
                no_analogy = parts[2] == "true"
            elif parts[0] == "coverage" and len(parts) == 2:
                coverage = float(parts[1])
            else:
                raise ParseError(f"无法识别的行: {raw.strip()!r}", line_no, source)
        except ValueError as e:
            if isinstance(e, ParseError):
                raise
            raise ParseError(f"字段格式错误: {raw.strip()!r}", line_no, source) from None
    return glue, tuple(entries), tuple(exits), no_analogy, coverage


def read_construal(directory: Union[str, Path]) -> Construal:
    """
    读回构念

    instance_states 与 instance_modules 由来源记录和拼接记录重建；
    各实例的原始绑定不写入文件，读回时为空。
    """
    directory = Path(directory)
    fragment_path = directory / FRAGMENT_FILE
    try:
        abstract = loads(fragment_path.read_text(encoding="utf-8"), source=str(fragment_path))
        binding_path = directory / BINDING_FILE
        binding = None
        if binding_path.exists():
            binding = loads_map(binding_path.read_text(encoding="utf-8"), source=str(binding_path))
        with open(directory / PROVENANCE_FILE, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        glue_path = directory / GLUE_FILE
        glue_text = glue_path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"无法读取构念文件: {e}", None, str(directory)) from e

    if not rows or rows[0] != PROVENANCE_HEADER:
        raise ParseError("provenance.csv 缺少表头", 1, str(directory / PROVENANCE_FILE))
    provenance = [tuple(row) for row in rows[1:]]
    for line_no, row in enumerate(provenance, start=2):
        if len(row) != 3:
            raise ParseError("provenance.csv 每行需要3列", line_no, str(directory / PROVENANCE_FILE))

    instance_states: Dict[str, Dict[int, int]] = {}
    instance_modules: Dict[str, str] = {}
    for element, module_id, source_element in provenance:
        if "." in element:
            continue
        inst, local = source_element.rsplit("/s", 1)
        instance_states.setdefault(inst, {})[int(local)] = int(element[1:])
        instance_modules.setdefault(inst, module_id)
    glue, entries, exits, no_analogy, coverage = _parse_glue(glue_text, str(glue_path))
    for exit_inst, exit_state, entry_inst, entry_state in glue:
        instance_states.setdefault(exit_inst, {})[exit_state] = instance_states[entry_inst][entry_state]
    instance_states = {inst: dict(sorted(states.items())) for inst, states in instance_states.items()}

    return Construal(
        abstract_mdp=abstract,
        binding=binding,
        provenance=provenance,
        glue=glue,
        instance_states=instance_states,
        instance_modules=instance_modules,
        entries=entries,
        exits=exits,
        no_analogy=no_analogy,
        coverage=coverage,
    )
