"""
HCGL Core Schemas - Pydantic models for configs, reports and bundles.

Field names and the CSV column order below are frozen for schema version
``hcgl-report/1`` and documented in docs/HCGL-SCHEMA.md.
"""

import math
from datetime import datetime, timezone
from typing import Dict, List, Literal, Optional

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationInfo,
    field_validator,
    model_validator,
)

from hcgl_core.errors import ConfigError

SCHEMA_VERSION = "hcgl-report/1"

SWEEP_COLUMNS = [
    "axis",
    "sigma",
    "rho",
    "stability",
    "mean_transition_time",
    "log_mean_transition_time",
    "mean_delay",
    "theta",
    "dominant_mass",
    "conductance_bound",
    "delay_ratio_bound",
    "error",
]

CONSISTENCY_RTOL = 1e-12

# Bundles store floats with 12 significant digits
READBACK_RTOL = 1e-10


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class GraphDocument(BaseModel):
    """JSON form of a conflict graph: a torus side or explicit neighbor lists."""

    kind: Literal["torus", "general"] = Field(description="Graph kind")
    side: Optional[int] = Field(default=None, description="Torus side L (torus only)")
    adjacency: Optional[List[List[int]]] = Field(
        default=None,
        description="Neighbor lists indexed by vertex id (general only)"
    )

    @model_validator(mode="after")
    def _check_kind(self) -> "GraphDocument":
        if self.kind == "torus" and self.side is None:
            raise ConfigError("torus graph document needs 'side'")
        if self.kind == "general" and self.adjacency is None:
            raise ConfigError("general graph document needs 'adjacency'")
        return self


class StateSpaceDocument(BaseModel):
    """Test fixture listing of a state space."""

    n_vertices: int
    side: Optional[int] = None
    states: List[str] = Field(description="Hex bit vectors in state-id order")
    flip_edges: List[List[int]] = Field(description="Flip-graph edges as [i, j] with i < j")


class NodeOverrides(BaseModel):
    """
    Per-node rate overrides loaded from a JSON parameter file.

    Keys are vertex ids; nodes not listed keep the homogeneous value.
    """

    model_config = ConfigDict(populate_by_name=True)

    lam: Dict[int, float] = Field(default_factory=dict, alias="lambda")
    mu: Dict[int, float] = Field(default_factory=dict)
    nu: Dict[int, float] = Field(default_factory=dict)
    p: Dict[int, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_rates(self) -> "NodeOverrides":
        for name in ("lam", "mu", "nu"):
            for node, value in getattr(self, name).items():
                if not value > 0:
                    raise ConfigError(f"override {name}[{node}] must be positive, got {value}")
        for node, value in self.p.items():
            if not 0 < value <= 1:
                raise ConfigError(f"override p[{node}] must lie in (0, 1], got {value}")
        return self

    def nodes(self) -> List[int]:
        return sorted(set(self.lam) | set(self.mu) | set(self.nu) | set(self.p))


class ExperimentConfig(BaseModel):
    """
    Validated configuration of one CLI run.

    Missing members of (sigma, nu) and (lambda, rho) are resolved from the
    others; values given together must agree to 1e-12 relative.
    """

    model_config = ConfigDict(populate_by_name=True)

    mode: Literal["analyze", "simulate", "audit", "sweep"] = Field(
        default="analyze",
        description="Experiment to run"
    )
    side: int = Field(default=4, alias="L", description="Torus side L")
    sigma: Optional[float] = Field(default=None, description="Activity factor nu/(p mu)")
    nu: Optional[float] = Field(default=None, description="Activation rate")
    p: float = Field(default=1.0, description="Back-off probability after a completion")
    mu: float = Field(default=1.0, description="Transmission completion rate")
    lam: Optional[float] = Field(default=None, alias="lambda", description="Arrival rate per node")
    rho: Optional[float] = Field(default=None, description="Normalized load 2 lambda/mu")
    horizon: float = Field(default=20000.0, description="Simulated time per replica")
    warmup: Optional[float] = Field(default=None, description="Discarded initial time (default 10% of horizon)")
    replicas: int = Field(default=1, description="Independent simulation replicas")
    seed: int = Field(default=0, description="Root seed of all random streams")
    epsilon: float = Field(default=0.125, description="Total-variation level for t_mix")
    n_samples: int = Field(
        default=0,
        description="Independent transition-time samples per direction (0 skips sampling)"
    )
    max_events: int = Field(default=10**10, description="Censoring cap in events per transition sample")
    trace: bool = Field(default=False, description="Write a CSV event trace of replica 0")
    sigma_grid: Optional[List[float]] = Field(default=None, description="Sigma grid for analyze/sweep")
    rho_grid: Optional[List[float]] = Field(default=None, description="Rho grid for sweep")
    overrides: Optional[NodeOverrides] = Field(default=None, description="Per-node parameter overrides")
    out: Optional[str] = Field(default=None, exclude=True)
    params_file: Optional[str] = Field(default=None, exclude=True)
    jobs: int = Field(default=1, exclude=True)

    @field_validator("side")
    @classmethod
    def _check_side(cls, v: int) -> int:
        if v % 2 != 0 or v < 4:
            raise ConfigError(
                f"L={v} is not allowed: the torus side must be even and at least 4 (parity rule)"
            )
        return v

    @field_validator("p")
    @classmethod
    def _check_p(cls, v: float) -> float:
        if not 0 < v <= 1:
            raise ConfigError(f"p must lie in (0, 1], got {v}")
        return v

    @field_validator("mu", "horizon")
    @classmethod
    def _check_positive(cls, v: float) -> float:
        if not v > 0:
            raise ConfigError(f"expected a positive value, got {v}")
        return v

    @field_validator("n_samples")
    @classmethod
    def _check_samples(cls, v: int) -> int:
        if v < 0:
            raise ConfigError(f"n_samples must not be negative, got {v}")
        return v

    @field_validator("replicas", "max_events")
    @classmethod
    def _check_count(cls, v: int) -> int:
        if v < 1:
            raise ConfigError(f"expected a positive count, got {v}")
        return v

    @field_validator("jobs")
    @classmethod
    def _check_jobs(cls, v: int) -> int:
        # -1 lets joblib use every core
        if v < 1 and v != -1:
            raise ConfigError(f"jobs must be positive or -1, got {v}")
        return v

    @field_validator("epsilon")
    @classmethod
    def _check_epsilon(cls, v: float) -> float:
        if not 0 < v < 0.25:
            raise ConfigError(f"epsilon must lie in (0, 1/4), got {v}")
        return v

    @field_validator("sigma_grid", "rho_grid")
    @classmethod
    def _check_grid(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None:
            if not v:
                raise ConfigError("grids must not be empty")
            if any(not x > 0 for x in v):
                raise ConfigError(f"grid values must be positive: {v}")
        return v

    @model_validator(mode="after")
    def _resolve(self, info: ValidationInfo) -> "ExperimentConfig":
        rtol = READBACK_RTOL if (info.context or {}).get("readback") else CONSISTENCY_RTOL
        self._resolve_activity(rtol)
        self._resolve_load(rtol)
        if self.warmup is None:
            self.warmup = 0.1 * self.horizon
        if not 0 <= self.warmup < self.horizon:
            raise ConfigError(f"warmup {self.warmup} must lie in [0, horizon={self.horizon})")
        if self.mode in ("analyze", "audit"):
            # Imported here: configuration imports this module
            from hcgl_core.configuration import enumeration_cap, estimate_state_count
            from hcgl_core.errors import EnumerationCapError

            n = self.side * self.side
            if n > enumeration_cap():
                raise EnumerationCapError(n, enumeration_cap(), estimate_state_count(n))
        return self

    def _resolve_activity(self, rtol: float) -> None:
        pmu = self.p * self.mu
        if self.sigma is not None and not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if self.nu is not None and not self.nu > 0:
            raise ConfigError(f"nu must be positive, got {self.nu}")
        if self.sigma is None and self.nu is None:
            self.sigma = 10.0
        if self.sigma is None:
            self.sigma = self.nu / pmu
        elif self.nu is None:
            self.nu = self.sigma * pmu
        elif not math.isclose(self.sigma, self.nu / pmu, rel_tol=rtol):
            raise ConfigError(
                f"sigma={self.sigma} is inconsistent with nu/(p mu)={self.nu / pmu}"
            )

    def _resolve_load(self, rtol: float) -> None:
        if self.lam is not None and not self.lam > 0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        if self.rho is not None and not self.rho > 0:
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if self.lam is None and self.rho is None:
            if self.mode == "simulate":
                self.rho = 0.5
            else:
                return
        # a node is active at most half the time, so lambda < mu / 2 is the capacity
        if self.lam is None:
            self.lam = self.rho * self.mu / 2
        elif self.rho is None:
            self.rho = 2 * self.lam / self.mu
        elif not math.isclose(self.rho, 2 * self.lam / self.mu, rel_tol=rtol):
            raise ConfigError(
                f"rho={self.rho} is inconsistent with 2 lambda/mu={2 * self.lam / self.mu}"
            )


class RegionDump(BaseModel):
    parity: Literal["odd", "even"]
    vertices: List[int]
    n_even: int = Field(description="|R ∩ Even|")
    n_odd: int = Field(description="|R ∩ Odd|")
    cutset_size: int
    contour_length: int
    windings: List[List[int]] = Field(description="(w_x, w_y) of each contour curve")
    klass: Optional[Literal["cluster", "stripe", "cross"]] = Field(
        default=None,
        description="Region class (odd regions only)"
    )


class DecompositionDump(BaseModel):
    """Per-configuration record of the exhaustive audit."""

    state_id: int
    state_hex: str
    gap: int
    total_contour_length: int
    configuration_class: Literal["omega_cl", "omega_s", "omega_cr"]
    critical_cross: bool = False
    odd_regions: List[RegionDump]
    even_regions: List[RegionDump]


class AuditFinding(BaseModel):
    type: str = Field(description="Identity or bound that failed")
    severity: Literal["CRITICAL", "HIGH", "MEDIUM", "LOW"]
    state_hex: str = Field(description="Offending configuration")
    explanation: str
    fix: Optional[str] = None


class AuditReport(BaseModel):
    side: int
    n_states: int
    class_counts: Dict[str, int] = Field(
        description="Counts of omega_cl, omega_s, omega_cr and omega_cc"
    )
    checks_run: Dict[str, int] = Field(
        default_factory=dict,
        description="Number of evaluations per identity"
    )
    min_stripe_gap: Optional[int] = None
    min_critical_contour_length: Optional[int] = None
    violations: List[AuditFinding] = Field(default_factory=list)


class LandscapeReport(BaseModel):
    """Exact landscape quantities for one (L, sigma)."""

    side: int
    sigma: float
    n_states: int
    gamma: int = Field(description="Communication height phi(E, O)")
    set_S: List[int] = Field(description="State ids of S = {phi(E, I) <= L}")
    inner_boundary: List[int]
    outer_boundary: List[int]
    bottom_gap: int = Field(description="Efficiency gap of F(outer boundary)")
    depth: int = Field(description="D(S)")
    is_non_trivial_cycle: bool
    dominant_mass: float
    conductance: float = Field(description="Phi(S) with p = mu = 1")
    conductance_bound: Optional[float] = Field(default=None, description="Only for sigma > 1")
    epsilon: float
    tmix_lower: Optional[float] = Field(default=None, description="Mixing-time lower bound")
    tmix_true_lower: Optional[float] = None
    tmix_true_upper: Optional[float] = None
    q_max: float
    spectral_gap: float
    mean_hit_tau: float = Field(description="E tau from E to O, uniformized steps")
    mean_hit_EO: float = Field(description="E T from E to O, continuous time")
    mean_hit_OE: float


class AnalysisSummary(BaseModel):
    reference_path: List[str] = Field(description="Hex states of the E -> O reference path")
    reference_peak_gap: int
    reference_peak_state: str
    reference_peak_in_bottom: bool = Field(description="Peak state lies in F(outer boundary of S)")
    s_prime_size: int
    s_prime_disjoint: bool
    alpha: float
    hitting_time_slope: Optional[float] = None


class ConfidenceInterval(BaseModel):
    mean: float
    half_width: float
    level: float
    n: int

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width


class CycleRecord(BaseModel):
    """One even renewal period followed by one odd period."""

    start: float = Field(description="First entrance to E opening the cycle")
    even_duration: float = Field(description="T_k")
    odd_duration: float = Field(description="V_k")
    off_even_time: float = Field(description="U_k, time outside E during the even period")
    even_dwell: float = Field(description="S_E contribution T_k - U_k")


class RenewalSummary(BaseModel):
    n_cycles: int
    mean_even_duration: ConfidenceInterval
    mean_odd_duration: ConfidenceInterval
    mean_off_even: float
    mean_even_dwell: float
    off_even_ratio: float = Field(description="E U_E / E T_{E->O}")
    dwell_fraction: ConfidenceInterval = Field(description="S_E/(T + V) averaged over cycles")


class SimulationRecord(BaseModel):
    """Output of one delay-experiment replica."""

    replica: int
    seed_entropy: int
    spawn_key: List[int]
    horizon: float
    warmup: float
    events: int
    tagged_node: int
    discipline: Literal["FIFO"] = "FIFO"
    transition_e_to_o: List[float]
    transition_o_to_e: List[float]
    cycles: List[CycleRecord]
    delays: List[float] = Field(default_factory=list, exclude=True)
    n_departures: int
    mean_delay: Optional[float]
    queue_time_average: float
    queue_batch_means: List[float] = Field(description="Tagged-node queue average per time batch")
    delay_batch_means: List[float] = Field(description="Mean delay per time batch (NaN if empty)")
    z_time_average: float
    activity_fraction: List[float]
    unblocked_fraction: List[float]
    even_time_fraction: float
    odd_time_fraction: float


class SimulationAggregate(BaseModel):
    side: int
    sigma: float
    rho: float
    stability: str
    replicas: int
    mean_queue: ConfidenceInterval
    mean_delay: ConfidenceInterval
    mean_transition_e_to_o: Optional[ConfidenceInterval] = None
    mean_transition_o_to_e: Optional[ConfidenceInterval] = None
    delay_ratio: Optional[ConfidenceInterval] = None
    delay_ratio_bound: float = Field(description="1/(4 - 2 rho)")
    little_residual: float = Field(description="E L - lambda E W")
    little_half_width: float
    little_consistent: bool
    queue_lower_estimate: Optional[float] = Field(
        default=None,
        description="lambda/(4 - 2 rho) * E T_{E->O}"
    )
    z_time_average: ConfidenceInterval
    theta: List[float]
    theta_predicted: List[float] = Field(description="sigma * P(unblocked) per node")
    renewal: Optional[RenewalSummary] = None
    sampled_e_to_o: Optional[ConfidenceInterval] = None
    sampled_o_to_e: Optional[ConfidenceInterval] = None
    censored_samples: int = 0
    exact_e_to_o: Optional[float] = None


class SweepRow(BaseModel):
    axis: Literal["sigma", "rho"]
    sigma: float
    rho: Optional[float] = None
    stability: Optional[str] = None
    mean_transition_time: Optional[float] = None
    log_mean_transition_time: Optional[float] = None
    mean_delay: Optional[float] = None
    theta: Optional[float] = None
    dominant_mass: Optional[float] = None
    conductance_bound: Optional[float] = None
    delay_ratio_bound: Optional[float] = None
    error: Optional[str] = None


class ReportBundle(BaseModel):
    """
    Self-contained result of one CLI run.

    ``fingerprint`` is the canonical hash of the bundle without
    ``created_at``, ``environment``, ``file_manifest`` and itself; runs with
    identical config and seed produce identical fingerprints.
    """

    schema_version: str = Field(default=SCHEMA_VERSION, description="Report schema version")
    tool_version: str
    created_at: datetime = Field(default_factory=_utcnow)
    seed: int
    config: ExperimentConfig
    environment: Optional[Dict] = None
    landscape: Optional[List[LandscapeReport]] = None
    analysis: Optional[AnalysisSummary] = None
    audit: Optional[AuditReport] = None
    simulation: Optional[SimulationAggregate] = None
    replica_records: Optional[List[SimulationRecord]] = None
    sweep: Optional[List[SweepRow]] = None
    file_manifest: Dict[str, str] = Field(
        default_factory=dict,
        description="Side file names mapped to their SHA-256 hashes"
    )
    fingerprint: Optional[str] = None

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "schema_version": SCHEMA_VERSION,
                "tool_version": "0.3.1",
                "seed": 7,
                "config": {"mode": "analyze", "L": 4, "sigma": 10.0},
                "file_manifest": {"sweep.csv": "b4d6e..."},
            }
        }
    )
