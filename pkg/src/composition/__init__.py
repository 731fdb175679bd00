"""
构念组装模块
"""
from .construal import (
    VERBATIM,
    FragmentInstance,
    CostLedger,
    Construal,
    compose,
    construal_instance,
)
from .objective import ObjectiveReport, evaluate_objective
from .construal_format import write_construal, read_construal
