"""
提升模块
"""
from .lifter import (
    LiftedPolicy,
    TransferReport,
    CompletedPolicy,
    lift_policy,
    lift_values,
    transfer_report,
    complete_policy,
    unsafe_states,
)
