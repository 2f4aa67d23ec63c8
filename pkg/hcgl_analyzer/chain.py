"""
HCGL Analyzer Chain - Uniformized activity chain and its exact functionals.

The activity process is uniformized at rate q_max = L^2 * max(p mu, nu):
activations carry nu / q_max, deactivations p mu / q_max, and the self-loop
absorbs the rest. Hitting times, conductance, mixing times and the spectral
gap are all computed on this kernel.
"""

import logging
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
from scipy.sparse.linalg import splu
from scipy.special import logsumexp

from hcgl_core.configuration import ActivityLaw, StateSpace, stationary_law
from hcgl_core.errors import (
    ConditioningError,
    ConditioningWarning,
    ConfigError,
    IdentityViolationError,
    PreconditionError,
)

from hcgl_analyzer.landscape import SetS

logger = logging.getLogger(__name__)

DEFAULT_PRECISION_SIGMA = 1e3
REVERSIBILITY_RTOL = 1e-10
REFINEMENT_STEPS = 3
RESIDUAL_RTOL = 1e-8
MAX_DOUBLINGS = 80


def precision_sigma() -> float:
    """Largest sigma accepted by hitting-time solves (``HCGL_PRECISION_SIGMA`` overrides)."""
    raw = os.environ.get("HCGL_PRECISION_SIGMA")
    if raw is None:
        return DEFAULT_PRECISION_SIGMA
    try:
        return float(raw)
    except ValueError as e:
        raise ConfigError(f"HCGL_PRECISION_SIGMA must be a number, got {raw!r}") from e


class HittingTime(NamedTuple):
    steps: float
    time: float


class Conductance(NamedTuple):
    value: float
    bound: float


@dataclass(frozen=True)
class UniformizedChain:
    """Discrete-time kernel of the activity process, uniformized at ``q_max``."""

    space: StateSpace = field(repr=False)
    nu: float
    p: float
    mu: float
    q_max: float
    transition: sparse.csr_matrix = field(repr=False)
    law: ActivityLaw = field(repr=False)

    @property
    def sigma(self) -> float:
        return self.nu / (self.p * self.mu)

    @property
    def hamiltonian(self) -> np.ndarray:
        """H(I) = -|I|."""
        return -self.space.sizes

    def connectivity(self, i: int, j: int) -> float:
        """c(I, J) = 1/L^2 on flip edges, 0 elsewhere."""
        if j in self.space.flip_neighbors(i):
            return 1.0 / self.space.graph.n_vertices
        return 0.0

    def generator(self) -> sparse.csr_matrix:
        """Q = q_max (P - I)."""
        n = len(self.space)
        return (self.q_max * (self.transition - sparse.identity(n, format="csr"))).tocsr()

    def reversibility_defect(self) -> float:
        """Largest relative violation of pi(i) p(i,j) = pi(j) p(j,i) over flip edges."""
        coo = sparse.triu(self.transition, k=1).tocoo()
        log_pi = self.law.log_probabilities
        forward = log_pi[coo.row] + np.log(coo.data)
        backward = log_pi[coo.col] + np.log(np.asarray(self.transition[coo.col, coo.row]).ravel())
        if forward.size == 0:
            return 0.0
        return float(np.max(np.abs(np.expm1(forward - backward))))

    def require_reversible(self) -> None:
        defect = self.reversibility_defect()
        if defect > REVERSIBILITY_RTOL:
            raise PreconditionError(f"chain is not reversible (defect {defect:.3g})")


def build_chain(
    space: StateSpace,
    nu: Optional[float] = None,
    p: float = 1.0,
    mu: float = 1.0,
    sigma: Optional[float] = None,
) -> UniformizedChain:
    """
    Uniformize the activity process of a torus state space.

    Args:
        space: Enumerated state space
        nu: Activation rate (or give ``sigma`` and get nu = sigma p mu)
        p: Back-off probability
        mu: Completion rate
        sigma: Activity factor

    Returns:
        UniformizedChain with row-stochastic CSR kernel

    Raises:
        ConfigError: On non-positive rates or missing nu/sigma
    """
    if nu is None:
        if sigma is None:
            raise ConfigError("build_chain needs nu or sigma")
        nu = sigma * p * mu
    if not (nu > 0 and mu > 0 and 0 < p <= 1):
        raise ConfigError(f"invalid rates nu={nu}, p={p}, mu={mu}")

    q_max = space.graph.n_vertices * max(p * mu, nu)
    up = nu / q_max
    down = p * mu / q_max
    sizes = space.sizes
    indptr, indices = space.flip_indptr, space.flip_indices
    rows = np.repeat(np.arange(len(space)), np.diff(indptr))
    data = np.where(sizes[indices] > sizes[rows], up, down)

    off = sparse.csr_matrix((data, indices, indptr), shape=(len(space), len(space)))
    diagonal = 1.0 - np.asarray(off.sum(axis=1)).ravel()
    transition = (off + sparse.diags(diagonal)).tocsr()
    law = stationary_law(space, sigma=nu / (p * mu))
    logger.debug("uniformized chain: %d states, q_max=%g", len(space), q_max)
    return UniformizedChain(
        space=space, nu=nu, p=p, mu=mu, q_max=q_max, transition=transition, law=law
    )


def _target_ids(space: StateSpace, target: Union[int, Iterable[int]]) -> np.ndarray:
    if isinstance(target, (int, np.integer)):
        ids = np.array([int(target)])
    else:
        ids = np.unique(np.fromiter((int(t) for t in target), dtype=np.int64))
    if ids.size == 0:
        raise PreconditionError("hitting-time target must not be empty")
    return ids


def hitting_times_to(chain: UniformizedChain, target: Union[int, Iterable[int]]) -> np.ndarray:
    """
    Expected uniformized steps to reach ``target`` from every state.

    Solves (I - P_NN) h = 1 on non-target states with a sparse LU
    factorization, then refines the solution against residuals accumulated
    in extended precision.

    Raises:
        ConditioningError: If sigma exceeds the precision threshold
    """
    threshold = precision_sigma()
    if chain.sigma > threshold:
        raise ConditioningError(
            f"sigma={chain.sigma:g} is above the precision threshold {threshold:g} "
            f"(set HCGL_PRECISION_SIGMA to override)"
        )

    n = len(chain.space)
    ids = _target_ids(chain.space, target)
    free = np.setdiff1d(np.arange(n), ids)
    h = np.zeros(n)
    if free.size == 0:
        return h

    p_free = chain.transition[free][:, free]
    a = (sparse.identity(free.size, format="csc") - p_free).tocsc()
    lu = splu(a)
    rhs = np.ones(free.size)
    x = lu.solve(rhs)

    a_csr = a.tocsr()
    data_long = a_csr.data.astype(np.longdouble)
    # normwise backward error: |r| / (|A| |x| + |b|), all in the infinity norm
    a_norm = float(abs(a_csr).sum(axis=1).max())
    backward_error = math.inf
    for step in range(REFINEMENT_STEPS):
        products = data_long * x.astype(np.longdouble)[a_csr.indices]
        residual = np.longdouble(1) - np.add.reduceat(products, a_csr.indptr[:-1])
        residual_norm = float(np.max(np.abs(residual)))
        backward_error = residual_norm / (a_norm * float(np.max(np.abs(x))) + 1.0)
        logger.debug(
            "refinement step %d: residual %.3g, backward error %.3g",
            step, residual_norm, backward_error,
        )
        if backward_error < 1e-16:
            break
        x = x + lu.solve(residual.astype(np.float64))

    if backward_error > RESIDUAL_RTOL:
        warnings.warn(
            f"hitting-time backward error {backward_error:.3g} at sigma={chain.sigma:g}",
            ConditioningWarning,
            stacklevel=2,
        )
    h[free] = x
    return h


def mean_hitting_time(
    chain: UniformizedChain, source: int, target: Union[int, Iterable[int]]
) -> HittingTime:
    """
    E tau from ``source`` to ``target`` in steps, and E T = E tau / q_max in time.
    """
    ids = _target_ids(chain.space, target)
    if source in ids:
        return HittingTime(0.0, 0.0)
    steps = float(hitting_times_to(chain, ids)[source])
    return HittingTime(steps, steps / chain.q_max)


def exact_conductance(space: StateSpace, s: SetS, sigma: float) -> float:
    """
    Phi(S) = sum over x in S, y outside S of pi(x) q(x, y) / pi(S).

    Rates are those of the activity process with p = mu = 1: sigma on
    activations, 1 on deactivations.
    """
    law = stationary_law(space, sigma=sigma)
    inside = np.zeros(len(space), dtype=bool)
    inside[s.members] = True

    log_terms = []
    for i in s.inner_boundary:
        for j in space.flip_neighbors(int(i)):
            if not inside[j]:
                rate = sigma if space.sizes[j] > space.sizes[i] else 1.0
                log_terms.append(law.log_weights[i] + math.log(rate))
    log_flow = logsumexp(log_terms) if log_terms else -math.inf
    return float(np.exp(log_flow - logsumexp(law.log_weights[s.members])))


def conductance_of_S(space: StateSpace, s: SetS, sigma: float) -> Conductance:
    """
    Exact Phi(S) with its bound |inner boundary| (L^2/2 - L) / sigma^L.

    Raises:
        PreconditionError: If sigma <= 1
        IdentityViolationError: If the exact value exceeds the bound
    """
    if not sigma > 1:
        raise PreconditionError(f"the conductance bound needs sigma > 1, got {sigma}")
    side = space.side
    value = exact_conductance(space, s, sigma)
    bound = s.inner_boundary.size * (side * side / 2 - side) / sigma ** side
    if value > bound * (1 + 1e-12):
        even_id, _ = space.dominant_ids()
        raise IdentityViolationError([{
            "type": "conductance_bound",
            "severity": "CRITICAL",
            "state_hex": space.hex(even_id),
            "explanation": f"Phi(S)={value:.6g} exceeds its bound {bound:.6g} at sigma={sigma:g}",
        }])
    return Conductance(value, bound)


def mixing_time_bound(space: StateSpace, s: SetS, sigma: float, epsilon: float) -> float:
    """
    (1/2 - 2 eps) sigma^L / (|inner boundary| (L^2/2 - L)).

    Raises:
        PreconditionError: If eps is outside (0, 1/4) or sigma <= 1
    """
    if not 0 < epsilon < 0.25:
        raise PreconditionError(f"epsilon must lie in (0, 1/4), got {epsilon}")
    if not sigma > 1:
        raise PreconditionError(f"the mixing bound needs sigma > 1, got {sigma}")
    side = space.side
    return (0.5 - 2 * epsilon) * sigma ** side / (s.inner_boundary.size * (side * side / 2 - side))


def certify_mixing_bound(
    space: StateSpace, bracket: Tuple[float, float], bound: float, sigma: float, epsilon: float
) -> None:
    """
    Check t_mix >= bound from a bracket (lo, hi) of the true mixing time.

    Only ``lo`` is known to be unmixed, so the bound holds only when
    lo >= bound.

    Raises:
        IdentityViolationError: If the bracket does not certify the bound
    """
    lo, hi = bracket
    if lo >= bound:
        return
    even_id, _ = space.dominant_ids()
    raise IdentityViolationError([{
        "type": "mixing_time_bound",
        "severity": "CRITICAL",
        "state_hex": space.hex(even_id),
        "explanation": (
            f"t_mix({epsilon:g}) in [{lo:.6g}, {hi:.6g}] is not certified above its lower "
            f"bound {bound:.6g} at sigma={sigma:g}"
        ),
    }])


def _distance(kernel: np.ndarray, pi: np.ndarray) -> float:
    return float(0.5 * np.max(np.abs(kernel - pi[None, :]).sum(axis=1)))


def true_mixing_time(
    chain: UniformizedChain, epsilon: float, rtol: float = 1e-3, start: float = 1.0
) -> Tuple[float, float]:
    """
    Bracket the continuous-time t_mix(eps) = inf{t : d(t) <= eps}.

    Doubles t by squaring exp(tQ) until d(t) <= eps, then bisects with
    fresh matrix exponentials. Returns (lower, upper) with d(lower) > eps and
    d(upper) <= eps, so lower is a certified lower value.
    """
    if not 0 < epsilon < 1:
        raise PreconditionError(f"epsilon must lie in (0, 1), got {epsilon}")
    q = chain.generator().toarray()
    pi = chain.law.probabilities

    t = start
    kernel = scipy.linalg.expm(t * q)
    if _distance(kernel, pi) <= epsilon:
        lo, hi = 0.0, t
    else:
        for _ in range(MAX_DOUBLINGS):
            kernel = kernel @ kernel
            t *= 2
            if _distance(kernel, pi) <= epsilon:
                break
        else:
            raise PreconditionError(f"d(t) stayed above {epsilon} up to t={t:g}")
        lo, hi = t / 2, t

    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _distance(scipy.linalg.expm(mid * q), pi) <= epsilon:
            hi = mid
        else:
            lo = mid
    logger.info("t_mix(%g) in [%g, %g]", epsilon, lo, hi)
    return lo, hi


def spectral_gap(chain: UniformizedChain) -> float:
    """
    1 - lambda_2 of the uniformized kernel, from its symmetrized form.

    Raises:
        PreconditionError: If the chain is not reversible
    """
    chain.require_reversible()
    log_pi = chain.law.log_probabilities
    coo = chain.transition.tocoo()
    scale = np.exp(0.5 * (log_pi[coo.row] - log_pi[coo.col]))
    sym = sparse.csr_matrix((coo.data * scale, (coo.row, coo.col)), shape=coo.shape).toarray()
    sym = 0.5 * (sym + sym.T)
    eigenvalues = np.sort(np.linalg.eigvalsh(sym))
    return float(1.0 - eigenvalues[-2])
