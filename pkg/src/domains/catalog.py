#!/usr/bin/env python3
"""
领域规格与课程
DomainSpec 用 pydantic 校验，generate() 按 kind 分派到各生成器
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.errors import DomainParameterError
from src.homomorphism.maps import HomomorphismMap
from src.mdp_core.mdp import GroundMdp
from src.domains.generators import (
    door_key_grid_with_map,
    door_module,
    email_password_with_map,
    planted_quotient,
    random_mdp,
    room_module,
    two_room,
)

logger = logging.getLogger(__name__)

DomainKind = Literal[
    "door-key-grid",
    "email-password",
    "two-room",
    "random",
    "planted-quotient",
    "door-module",
    "room-module",
]

# 课程中使用的小布局：(宽, 高, 钥匙, 门)，每个任务不超过12个状态
CURRICULUM_LAYOUTS = [
    (2, 2, (1, 0), (1, 1)),
    (3, 1, (1, 0), (2, 0)),
    (2, 2, (0, 1), (1, 0)),
    (2, 1, (0, 0), (1, 0)),
]


class DomainSpec(BaseModel):
    """生成器规格；同一规格总是生成逐位相同的MDP"""
    model_config = ConfigDict(extra="forbid")

    kind: DomainKind
    parameters: Dict[str, Any] = Field(default_factory=dict)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)


@dataclass
class GeneratedDomain:
    """生成结果；带植入映射或到门模块映射时一并返回"""
    mdp: GroundMdp
    hom_map: Optional[HomomorphismMap] = None
    abstract: Optional[GroundMdp] = None


def _param(params: Dict[str, Any], name: str, default: Any) -> Any:
    return params.get(name, default)


def generate(spec: DomainSpec) -> GeneratedDomain:
    """
    按规格生成领域实例

    Raises:
        DomainParameterError: 参数越界或未知参数
    """
    p = dict(spec.parameters)
    try:
        if spec.kind == "door-key-grid":
            mdp, hom_map = door_key_grid_with_map(
                int(_param(p, "width", 2)), int(_param(p, "height", 1)),
                tuple(_param(p, "key_pos", (0, 0))), tuple(_param(p, "door_pos", (1, 0))),
                seed=spec.seed,
                start_pos=tuple(_param(p, "start_pos", (0, 0))),
                start_with_key=bool(_param(p, "start_with_key", False)),
                random_start=bool(_param(p, "random_start", False)),
                discount=float(_param(p, "discount", 0.95)),
            )
            return GeneratedDomain(mdp, hom_map, door_module(float(_param(p, "discount", 0.95))))
        if spec.kind == "email-password":
            mdp, hom_map = email_password_with_map(int(_param(p, "recall_steps", 1)),
                                                   float(_param(p, "discount", 0.95)))
            return GeneratedDomain(mdp, hom_map, door_module(float(_param(p, "discount", 0.95))))
        if spec.kind == "door-module":
            return GeneratedDomain(door_module(float(_param(p, "discount", 0.95))))
        if spec.kind == "room-module":
            return GeneratedDomain(room_module(int(_param(p, "length", 3)),
                                               float(_param(p, "exit_reward", 0.0)),
                                               float(_param(p, "discount", 0.95))))
        if spec.kind == "two-room":
            return GeneratedDomain(two_room(int(_param(p, "room_length", 3)), float(_param(p, "discount", 0.95))))
        if spec.kind == "random":
            return GeneratedDomain(random_mdp(
                int(_param(p, "n_states", 6)), int(_param(p, "n_actions", 2)),
                int(_param(p, "branching", 2)), float(_param(p, "reward_sparsity", 0.5)),
                spec.seed, discount=float(_param(p, "discount", 0.9)),
                n_terminal=int(_param(p, "n_terminal", 0))))
        if spec.kind == "planted-quotient":
            abstract = random_mdp(
                int(_param(p, "abstract_states", 6)), int(_param(p, "n_actions", 2)),
                int(_param(p, "branching", 2)), float(_param(p, "reward_sparsity", 0.5)),
                spec.seed, discount=float(_param(p, "discount", 0.9)),
                mdp_id=f"abstract-{spec.seed}")
            ground, hom_map = planted_quotient(abstract, int(_param(p, "blowup", 5)),
                                               float(_param(p, "noise", 0.0)), spec.seed)
            return GeneratedDomain(ground, hom_map, abstract)
    except (TypeError, ValueError) as e:
        if isinstance(e, DomainParameterError):
            raise
        raise DomainParameterError(f"{spec.kind} 的参数非法: {e}") from e
    raise DomainParameterError(f"未知的领域类型: {spec.kind}")


def door_curriculum(episodes: int, seed: int, variant: str = "repeat",
                    discount: float = 0.95) -> List[GroundMdp]:
    """
    门族课程

    repeat: 按种子选一个布局，每个回合重复同一任务；
    varied: 每个回合按种子重新选布局。
    """
    if episodes < 1:
        raise DomainParameterError(f"episodes 必须 ≥ 1: {episodes}")
    if variant not in ("repeat", "varied"):
        raise DomainParameterError(f"未知的课程变体: {variant}")
    rng = np.random.default_rng(seed)
    fixed = int(rng.integers(len(CURRICULUM_LAYOUTS)))
    tasks = []
    for episode in range(1, episodes + 1):
        choice = fixed if variant == "repeat" else int(rng.integers(len(CURRICULUM_LAYOUTS)))
        width, height, key, door = CURRICULUM_LAYOUTS[choice]
        mdp, _ = door_key_grid_with_map(width, height, key, door, seed=seed, discount=discount,
                                        mdp_id=f"door-s{seed}-e{episode:02d}")
        tasks.append(mdp)
    logger.info(f"门族课程 seed={seed} variant={variant}: {episodes} 个回合")
    return tasks
