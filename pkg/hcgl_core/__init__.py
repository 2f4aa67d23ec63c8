"""
HCGL Core - Conflict graphs, state spaces, contours, schemas and report containers.
"""

__version__ = "0.3.1"

from hcgl_core.configuration import enumerate_states, stationary_law
from hcgl_core.schemas import ExperimentConfig, ReportBundle
from hcgl_core.serialize import get_canonical_hash
from hcgl_core.topology import build_torus

__all__ = [
    "ExperimentConfig",
    "ReportBundle",
    "build_torus",
    "enumerate_states",
    "get_canonical_hash",
    "stationary_law",
]
