#!/usr/bin/env python3
"""
候选模块检索
按目标与模块签名集合的 Jaccard 重合度排序
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

from config import settings
from src.analogy.signatures import jaccard, signature_set
from src.mdp_core.mdp import GroundMdp

logger = logging.getLogger(__name__)


@dataclass
class RetrievalResult:
    """检索结果；comparisons 是比较过的模块数，计入 C_c"""
    module_ids: List[str]
    scores: List[Tuple[str, float]]
    comparisons: int


def rank_candidates(library,
                    target: GroundMdp,
                    k: int = settings.RETRIEVAL_K,
                    states: Optional[Iterable[int]] = None) -> RetrievalResult:
    """
    Args:
        library: 带 signature_index 与 horizon 的模块库
        target: 目标MDP
        k: 返回的模块数上限
        states: 只用这些目标状态的签名（默认全部）

    Returns:
        RetrievalResult，按得分降序、模块标识升序
    """
    if k < 1:
        raise ValueError(f"k 必须 ≥ 1: {k}")
    if not library.modules:
        return RetrievalResult([], [], 0)
    target_sigs = signature_set(target, library.horizon, states)
    scored = [(module_id, jaccard(target_sigs, sigs)) for module_id, sigs in sorted(library.signature_index.items())]
    scored.sort(key=lambda item: (-item[1], item[0]))
    top = scored[:k]
    logger.debug(f"检索 {target.mdp_id}: 比较 {len(scored)} 个模块，前 {len(top)} 个为 {[m for m, _ in top]}")
    return RetrievalResult([m for m, _ in top], top, len(scored))


def retrieve_candidates(library, target: GroundMdp, k: int = settings.RETRIEVAL_K) -> List[str]:
    """按签名重合度排序的模块标识列表；空库返回空列表"""
    return rank_candidates(library, target, k).module_ids
