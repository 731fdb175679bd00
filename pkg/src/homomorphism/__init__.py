"""
同态模块：映射、证书、检查与商构造
"""
from .maps import HomomorphismMap, HomCertificate, ROLE_ABSTRACTION, ROLE_ANALOGY
from .checks import (
    pushforward,
    pushforward_partial,
    tv_distance,
    check_homomorphism,
    quotient,
    loss_bound,
    restrict_scope,
    compose_maps,
    merge_certificates,
)
from .map_format import loads_map, dumps_map, read_map, write_map, parse_assignments, format_certificate
