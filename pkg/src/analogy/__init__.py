"""
类比搜索模块
"""
from .signatures import signature_levels, state_signature, signature_set, signature_distance, jaccard
from .search import (
    MODE_STRICT,
    MODE_PARTIAL,
    HintSet,
    SearchBudget,
    SearchResult,
    find_homomorphism,
    greedy_action_map,
    occupancy_weights,
)
from .retrieval import RetrievalResult, rank_candidates, retrieve_candidates
