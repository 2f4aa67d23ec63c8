"""
HCGL Recorder - Event simulation of random-access networks and run bookkeeping.
"""

from hcgl_recorder.experiments import (
    aggregate_replicas,
    renewal_statistics,
    run_delay_experiment,
    run_replicas,
    sample_transition_times,
)
from hcgl_recorder.simulator import (
    EventEngine,
    NetworkParams,
    SimState,
    stability_probe,
    step,
)

__all__ = [
    "EventEngine",
    "NetworkParams",
    "SimState",
    "aggregate_replicas",
    "renewal_statistics",
    "run_delay_experiment",
    "run_replicas",
    "sample_transition_times",
    "stability_probe",
    "step",
]
