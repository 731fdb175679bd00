"""
MDP核心模块
"""
from .mdp import GroundMdp, Policy, ValueFunction, TabularKernel, PROB_TOL
from .solvers import (
    SolveResult,
    OptimalSolution,
    value_iteration,
    greedy_policy,
    policy_evaluation,
    q_values,
    optimal_values,
    reachable_states,
)
from .mdp_format import loads, dumps, read_mdp, write_mdp

__all__ = [
    "GroundMdp",
    "Policy",
    "ValueFunction",
    "TabularKernel",
    "PROB_TOL",
    "SolveResult",
    "OptimalSolution",
    "value_iteration",
    "greedy_policy",
    "policy_evaluation",
    "q_values",
    "optimal_values",
    "reachable_states",
    "loads",
    "dumps",
    "read_mdp",
    "write_mdp",
]
