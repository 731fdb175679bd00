"""
领域生成模块
"""
from .generators import (
    door_module,
    door_key_grid,
    door_key_grid_with_map,
    email_password,
    email_password_with_map,
    room_module,
    two_room,
    two_room_bindings,
    random_mdp,
    planted_quotient,
)
from .catalog import DomainSpec, GeneratedDomain, generate, door_curriculum, CURRICULUM_LAYOUTS
