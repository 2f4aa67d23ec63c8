"""
Tests for hcgl_recorder.experiments - Delay runs, replicas, transition samples and renewal cycles
"""

import numpy as np
import pytest

from hcgl_analyzer.chain import mean_hitting_time
from hcgl_core.configuration import enumerate_states, stationary_law
from hcgl_core.errors import InstabilityError, PreconditionError
from hcgl_core.schemas import ConfidenceInterval, CycleRecord
from hcgl_core.topology import dominant_sets
from hcgl_recorder.experiments import (
    MIN_RENEWAL_CYCLES,
    TRACE_COLUMNS,
    aggregate_replicas,
    delay_ratio_bound,
    exact_off_even_ratio,
    little_law_check,
    occupancy_chi_square,
    renewal_statistics,
    run_delay_experiment,
    run_replicas,
    sample_transition_times,
)
from hcgl_recorder.simulator import NetworkParams
from hcgl_recorder.statistics import contains, t_interval


@pytest.fixture(scope="module")
def stable_params():
    """sigma = 2, rho = 0.3 on 16 nodes."""
    return NetworkParams.homogeneous(16, lam=0.15, mu=1.0, nu=2.0)


@pytest.fixture(scope="module")
def short_record(torus4, stable_params):
    rng = np.random.default_rng(1)
    return run_delay_experiment(stable_params, torus4, 300.0, 30.0, rng, check=True)


class TestDelayExperiment:
    """One replica of the delay run."""

    def test_record_shape(self, short_record, torus4):
        """The tagged node is odd and per-node fractions are probabilities."""
        _, odd = dominant_sets(torus4)
        assert short_record.tagged_node in odd
        assert short_record.events > 0
        assert short_record.n_departures == len(short_record.delays) > 0
        assert all(d >= 0 for d in short_record.delays)
        assert len(short_record.queue_batch_means) == 10
        assert len(short_record.activity_fraction) == 16
        assert all(0 <= f <= 1 for f in short_record.activity_fraction)
        assert 0 <= short_record.even_time_fraction + short_record.odd_time_fraction <= 1
        assert short_record.z_time_average >= 0

    def test_cycles_are_consistent(self, short_record):
        """Each cycle splits its even period into off-E time and dwell time."""
        for c in short_record.cycles:
            assert c.start >= 30.0
            assert c.even_duration > 0 and c.odd_duration > 0
            assert c.even_dwell == pytest.approx(c.even_duration - c.off_even_time)

    def test_warmup_must_fit(self, torus4, stable_params):
        """warmup outside [0, horizon) is refused."""
        with pytest.raises(PreconditionError):
            run_delay_experiment(stable_params, torus4, 10.0, 10.0, np.random.default_rng(0))

    def test_unstable_parameters_are_refused(self, torus4):
        """rho >= 1 raises with the Overloaded verdict."""
        params = NetworkParams.homogeneous(16, lam=0.6, nu=10.0)
        with pytest.raises(InstabilityError) as exc:
            run_replicas(params, torus4, 100.0, 10.0, replicas=1, seed=0)
        assert exc.value.verdict == "Overloaded"
        assert exc.value.diagnostics["rho"] == pytest.approx(1.2)

    def test_below_threshold_is_refused(self, torus4):
        """sigma at the threshold is not stable."""
        params = NetworkParams.homogeneous(16, lam=0.25, nu=0.5)
        with pytest.raises(InstabilityError) as exc:
            run_delay_experiment(params, torus4, 100.0, 10.0, np.random.default_rng(0))
        assert exc.value.verdict == "BelowSigmaThreshold"


class TestReplicas:
    """Seeded, independent replicas."""

    def test_same_seed_same_records(self, torus4, stable_params):
        """Replicas are reproducible from the root seed."""
        a, _ = run_replicas(stable_params, torus4, 100.0, 10.0, replicas=2, seed=4)
        b, _ = run_replicas(stable_params, torus4, 100.0, 10.0, replicas=2, seed=4)
        assert [r.model_dump() for r in a] == [r.model_dump() for r in b]
        assert [r.replica for r in a] == [0, 1]
        assert a[0].spawn_key == [0] and a[1].spawn_key == [1]
        assert a[0].events != a[1].events or a[0].delays != a[1].delays

    def test_parallel_matches_serial(self, torus4, stable_params):
        """Worker count does not change the records."""
        serial, _ = run_replicas(stable_params, torus4, 60.0, 6.0, replicas=2, seed=9)
        parallel, _ = run_replicas(stable_params, torus4, 60.0, 6.0, replicas=2, seed=9, jobs=2)
        assert [r.model_dump() for r in serial] == [r.model_dump() for r in parallel]

    def test_trace_of_first_replica(self, torus4, stable_params):
        """The trace is a CSV of replica 0 events."""
        records, trace = run_replicas(
            stable_params, torus4, 50.0, 5.0, replicas=2, seed=2, trace=True
        )
        lines = trace.strip().splitlines()
        assert lines[0] == ",".join(TRACE_COLUMNS)
        assert len(lines) == records[0].events + 1

    def test_aggregate(self, torus4, stable_params):
        """Aggregates carry the bound 1/(4 - 2 rho) and per-node activity."""
        records, _ = run_replicas(stable_params, torus4, 200.0, 20.0, replicas=2, seed=4)
        aggregate = aggregate_replicas(records, stable_params, 4)
        assert aggregate.replicas == 2
        assert aggregate.stability == "Stable"
        assert aggregate.delay_ratio_bound == pytest.approx(1 / 3.4)
        assert aggregate.mean_delay.n == 2
        assert len(aggregate.theta) == len(aggregate.theta_predicted) == 16
        assert aggregate.little_half_width >= 0

    def test_needs_a_replica(self, torus4, stable_params):
        with pytest.raises(PreconditionError):
            run_replicas(stable_params, torus4, 60.0, 6.0, replicas=0, seed=0)

    def test_aggregate_needs_records(self, stable_params):
        with pytest.raises(PreconditionError):
            aggregate_replicas([], stable_params, 4)


class TestTransitionSamples:
    """Independent first-passage samples between E and O."""

    def test_samples_are_positive(self, torus4, stable_params):
        samples = sample_transition_times(stable_params, torus4, 3, np.random.default_rng(8))
        assert len(samples.e_to_o) == len(samples.o_to_e) == 3
        assert all(t > 0 for t in samples.e_to_o + samples.o_to_e)
        assert samples.censored == 0

    def test_censoring(self, torus4, stable_params):
        """One event never reaches the other dominant state."""
        samples = sample_transition_times(
            stable_params, torus4, 4, np.random.default_rng(8), max_events=1
        )
        assert samples.censored == 8
        assert samples.e_to_o == [] and samples.o_to_e == []

    def test_general_graph_is_refused(self, path3):
        params = NetworkParams.homogeneous(3, lam=0.0, nu=2.0)
        with pytest.raises(PreconditionError):
            sample_transition_times(params, path3, 1, np.random.default_rng(0))


class TestRenewal:
    """Renewal-cycle statistics."""

    def test_too_few_cycles(self, short_record):
        with pytest.raises(PreconditionError):
            renewal_statistics(short_record.model_copy(update={"cycles": []}))

    def test_constant_cycles(self, short_record):
        """Identical cycles give exact means and zero-width intervals."""
        cycle = CycleRecord(
            start=50.0, even_duration=2.0, odd_duration=3.0, off_even_time=0.5, even_dwell=1.5
        )
        record = short_record.model_copy(update={"cycles": [cycle] * (MIN_RENEWAL_CYCLES + 10)})
        summary = renewal_statistics(record)
        assert summary.n_cycles == 40
        assert summary.mean_even_duration.mean == pytest.approx(2.0)
        assert summary.mean_even_duration.half_width == pytest.approx(0.0)
        assert summary.off_even_ratio == pytest.approx(0.25)
        assert summary.dwell_fraction.mean == pytest.approx(0.3)

    def test_exact_off_even_ratio_falls_with_sigma(self, space4):
        """1 - 2 pi(E) shrinks as the dominant states take over."""
        low = exact_off_even_ratio(stationary_law(space4, sigma=10.0))
        high = exact_off_even_ratio(stationary_law(space4, sigma=100.0))
        assert 0 < high < low < 1
        assert high <= 0.2

    def test_exact_off_even_ratio_needs_homogeneous_law(self, space4):
        law = stationary_law(space4, per_vertex_sigma=[2.0] * 16)
        with pytest.raises(PreconditionError):
            exact_off_even_ratio(law)


class TestChecks:
    """Occupancy, Little's law and the delay bound."""

    def test_occupancy_matches_product_form(self, path3):
        """The activity process on a path visits states with pi ~ sigma^|I|."""
        space = enumerate_states(path3)
        law = stationary_law(space, sigma=2.0)
        params = NetworkParams.homogeneous(3, lam=0.0, nu=2.0)
        result = occupancy_chi_square(
            space, law, params, np.random.default_rng(13), n_samples=3000, spacing=5.0
        )
        assert result.n_bins == 5
        assert result.design_effect >= 1.0
        assert result.p_value > 1e-3

    def test_correlated_readings_are_deflated(self, path3):
        """Readings far closer than the relaxation time get a design effect above one."""
        space = enumerate_states(path3)
        law = stationary_law(space, sigma=2.0)
        params = NetworkParams.homogeneous(3, lam=0.0, nu=2.0)
        result = occupancy_chi_square(
            space, law, params, np.random.default_rng(17),
            n_samples=20000, spacing=0.05, n_batches=50,
        )
        assert result.design_effect > 1.5
        assert result.statistic == pytest.approx(result.raw_statistic / result.design_effect)
        assert result.p_value > 1e-3

    def test_occupancy_needs_samples_per_batch(self, path3):
        space = enumerate_states(path3)
        law = stationary_law(space, sigma=2.0)
        params = NetworkParams.homogeneous(3, lam=0.0, nu=2.0)
        with pytest.raises(PreconditionError):
            occupancy_chi_square(
                space, law, params, np.random.default_rng(0), n_samples=30, spacing=1.0
            )

    def test_little_law(self):
        """E L = lambda E W within the joint half-width."""
        queue = ConfidenceInterval(mean=2.0, half_width=0.1, level=0.95, n=5)
        delay = ConfidenceInterval(mean=4.0, half_width=0.2, level=0.95, n=5)
        check = little_law_check(queue, delay, 0.5)
        assert check.residual == pytest.approx(0.0)
        assert check.half_width == pytest.approx(np.hypot(0.1, 0.1))
        assert check.consistent

        off = little_law_check(queue, delay, 1.0)
        assert not off.consistent

    def test_delay_ratio_bound(self):
        assert delay_ratio_bound(0.5) == pytest.approx(1 / 3)
        assert delay_ratio_bound(0.0) == pytest.approx(0.25)


@pytest.fixture(scope="module")
def renewal_run(torus4):
    """Eight replicas at sigma = 4, rho = 0.2: hundreds of E/O cycles each."""
    params = NetworkParams.homogeneous(16, lam=0.1, mu=1.0, nu=4.0)
    records, _ = run_replicas(params, torus4, 60000.0, 6000.0, replicas=8, seed=5, jobs=-1)
    return params, records


@pytest.mark.slow
class TestAcceptance:
    """Longer Monte Carlo checks on the 4x4 torus."""

    @pytest.mark.parametrize("sigma, spacing", [(1.0, 5.0), (2.0, 20.0), (5.0, 200.0)])
    def test_torus_occupancy(self, space4, sigma, spacing):
        """Sampled activity states on the 4x4 torus follow the product form."""
        law = stationary_law(space4, sigma=sigma)
        params = NetworkParams.homogeneous(16, lam=0.0, nu=sigma)
        result = occupancy_chi_square(
            space4, law, params, np.random.default_rng(21), n_samples=5000, spacing=spacing
        )
        assert result.p_value > 1e-3

    def test_sampled_transition_time_matches_chain(self, torus4, space4, chain4_sigma10):
        """The sampled mean of T_{E->O} at sigma = 10 covers the exact hitting time."""
        params = NetworkParams.homogeneous(16, lam=0.0, mu=1.0, nu=10.0)
        samples = sample_transition_times(params, torus4, 60, np.random.default_rng(31))
        assert samples.censored == 0
        even_id, odd_id = space4.dominant_ids()
        exact = mean_hitting_time(chain4_sigma10, even_id, odd_id).time
        interval = t_interval(samples.e_to_o, level=0.99)
        assert abs(interval.mean - exact) <= interval.half_width

    def test_dwell_fraction_is_dominant_mass(self, space4, renewal_run):
        """Time spent in E per cycle, over the cycle length, estimates pi(E)."""
        _, records = renewal_run
        law = stationary_law(space4, sigma=4.0)
        even_id, _ = space4.dominant_ids()
        summary = renewal_statistics(records, level=0.99)
        assert contains(summary.dwell_fraction, law.probability(even_id))

    def test_off_even_ratio_matches_law(self, space4, renewal_run):
        """E U_E / E T_{E->O} agrees with 1 - 2 pi(E)."""
        _, records = renewal_run
        summary = renewal_statistics(records)
        exact = exact_off_even_ratio(stationary_law(space4, sigma=4.0))
        assert summary.off_even_ratio == pytest.approx(exact, abs=0.03)

    def test_activity_balances_unblocked_time(self, space4, renewal_run):
        """Simulated theta matches sigma * P(unblocked) and the exact marginal."""
        params, records = renewal_run
        aggregate = aggregate_replicas(records, params, 4)
        exact = stationary_law(space4, sigma=4.0).node_activity()
        np.testing.assert_allclose(aggregate.theta, aggregate.theta_predicted, atol=0.01)
        np.testing.assert_allclose(aggregate.theta, exact, atol=0.01)

    def test_little_law_on_a_run(self, renewal_run):
        """Queue and delay estimates satisfy E L = lambda E W."""
        params, records = renewal_run
        aggregate = aggregate_replicas(records, params, 4)
        assert aggregate.little_consistent

    def test_delay_ratio_near_the_bound(self, torus4):
        """At sigma = 20, rho = 0.5 the delay ratio clears 1/(4 - 2 rho) up to 0.05."""
        params = NetworkParams.homogeneous(16, lam=0.25, mu=1.0, nu=20.0)
        records, _ = run_replicas(params, torus4, 1.2e6, 6.0e4, replicas=8, seed=0, jobs=-1)
        aggregate = aggregate_replicas(records, params, 4)
        assert aggregate.delay_ratio_bound == pytest.approx(1 / 3)
        assert aggregate.delay_ratio is not None
        ratio = aggregate.delay_ratio
        assert ratio.mean - ratio.half_width >= aggregate.delay_ratio_bound - 0.05
        assert aggregate.little_consistent


@pytest.mark.heavy
class TestFullScale:
    """The delay ratio at sigma = 50, where one E/O cycle takes about 10^6 time units."""

    def test_delay_ratio_at_sigma_50(self, torus4):
        """E W / E T_{E->O} is within 0.05 of 1/(4 - 2 rho) or above it."""
        params = NetworkParams.homogeneous(16, lam=0.25, mu=1.0, nu=50.0)
        records, _ = run_replicas(params, torus4, 4.0e7, 2.0e6, replicas=8, seed=0, jobs=-1)
        aggregate = aggregate_replicas(records, params, 4)
        assert aggregate.delay_ratio is not None
        ratio = aggregate.delay_ratio
        assert ratio.mean - ratio.half_width >= aggregate.delay_ratio_bound - 0.05
