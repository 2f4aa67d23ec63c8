"""HCGL Analyzer package - Landscape analysis, uniformized chains and identity audits"""

from .chain import build_chain, mean_hitting_time
from .detector import IdentityAuditor
from .landscape import build_set_S, communication_height, reference_path

__all__ = [
    'IdentityAuditor',
    'build_chain',
    'build_set_S',
    'communication_height',
    'mean_hitting_time',
    'reference_path',
]
