"""
Tests for hcgl_analyzer.chain - Uniformized kernel, hitting times, conductance and mixing
"""

import warnings

import numpy as np
import pytest

from hcgl_analyzer.chain import (
    build_chain,
    certify_mixing_bound,
    conductance_of_S,
    exact_conductance,
    hitting_times_to,
    mean_hitting_time,
    mixing_time_bound,
    precision_sigma,
    spectral_gap,
    true_mixing_time,
)
from hcgl_analyzer.landscape import hitting_time_slope
from hcgl_core.configuration import enumerate_states
from hcgl_core.errors import (
    ConditioningError,
    ConditioningWarning,
    ConfigError,
    IdentityViolationError,
    PreconditionError,
)
from hcgl_core.topology import build_general


class TestKernel:
    """The uniformized transition matrix."""

    def test_rows_are_stochastic(self, chain4_sigma10):
        """Every row sums to one with non-negative entries."""
        p = chain4_sigma10.transition
        np.testing.assert_allclose(np.asarray(p.sum(axis=1)).ravel(), 1.0, atol=1e-14)
        assert p.data.min() >= 0

    def test_uniformization_rate(self, chain4_sigma10, chain4_sigma2):
        """q_max = L^2 max(p mu, nu)."""
        assert chain4_sigma10.q_max == pytest.approx(160.0)
        assert chain4_sigma2.q_max == pytest.approx(32.0)

    @pytest.mark.parametrize("sigma", [1.0, 10.0, 100.0])
    def test_kernel_is_reversible(self, space4, sigma):
        """Detailed balance holds against the product-form law."""
        chain = build_chain(space4, sigma=sigma)
        assert chain.reversibility_defect() < 1e-10
        chain.require_reversible()

    def test_connectivity(self, chain4_sigma10):
        """c(I, J) = 1/L^2 on flip edges."""
        j = int(chain4_sigma10.space.flip_neighbors(0)[0])
        assert chain4_sigma10.connectivity(0, j) == pytest.approx(1 / 16)
        assert chain4_sigma10.connectivity(0, 0) == 0.0

    def test_sigma_from_rates(self, space4):
        """sigma = nu / (p mu)."""
        chain = build_chain(space4, nu=3.0, p=0.5, mu=2.0)
        assert chain.sigma == pytest.approx(3.0)

    def test_rates_are_validated(self, space4):
        """Missing or non-positive rates are configuration errors."""
        with pytest.raises(ConfigError):
            build_chain(space4)
        with pytest.raises(ConfigError):
            build_chain(space4, nu=1.0, p=1.5)


class TestHittingTimes:
    """Exact mean hitting times."""

    def test_single_vertex_graph(self):
        """One vertex: E T(empty -> occupied) = 1/nu, back = 1/(p mu)."""
        space = enumerate_states(build_general([[]]))
        chain = build_chain(space, nu=3.0)
        up = mean_hitting_time(chain, 0, 1)
        down = mean_hitting_time(chain, 1, 0)
        assert up.steps == pytest.approx(1.0)
        assert up.time == pytest.approx(1 / 3)
        assert down.time == pytest.approx(1.0)

    def test_dominant_transitions_are_symmetric(self, space4, chain4_sigma10):
        """E T(E -> O) = E T(O -> E) by translation symmetry."""
        even_id, odd_id = space4.dominant_ids()
        forward = mean_hitting_time(chain4_sigma10, even_id, odd_id)
        backward = mean_hitting_time(chain4_sigma10, odd_id, even_id)
        assert forward.time == pytest.approx(backward.time, rel=1e-8)
        assert forward.time == pytest.approx(forward.steps / 160.0)

    def test_hitting_time_grows_with_sigma(self, space4, chain4_sigma2, chain4_sigma10):
        """Higher activity makes the dominant states stickier."""
        even_id, odd_id = space4.dominant_ids()
        slow = mean_hitting_time(chain4_sigma10, even_id, odd_id).time
        fast = mean_hitting_time(chain4_sigma2, even_id, odd_id).time
        assert slow > fast > 0

    def test_log_log_slope_at_high_sigma(self, space4):
        """The E -> O hitting time scales at least like sigma^3.5 between 20 and 50."""
        even_id, odd_id = space4.dominant_ids()
        times = {
            s: mean_hitting_time(build_chain(space4, sigma=s), even_id, odd_id).time
            for s in (20.0, 50.0)
        }
        assert hitting_time_slope(20.0, times[20.0], 50.0, times[50.0]) >= 3.5

    def test_hitting_time_from_target_is_zero(self, space4, chain4_sigma2):
        """h = 0 on the target set."""
        even_id, _ = space4.dominant_ids()
        h = hitting_times_to(chain4_sigma2, even_id)
        assert h[even_id] == 0.0
        assert np.all(h >= 0)
        assert mean_hitting_time(chain4_sigma2, even_id, even_id).time == 0.0

    def test_empty_target_is_refused(self, chain4_sigma2):
        """A hitting time needs a target."""
        with pytest.raises(PreconditionError):
            hitting_times_to(chain4_sigma2, [])

    def test_precision_threshold(self, monkeypatch, space4, chain4_sigma10):
        """Solves above HCGL_PRECISION_SIGMA are refused."""
        monkeypatch.setenv("HCGL_PRECISION_SIGMA", "5")
        assert precision_sigma() == 5.0
        with pytest.raises(ConditioningError):
            hitting_times_to(chain4_sigma10, 0)

    def test_bad_precision_variable(self, monkeypatch):
        """A non-numeric threshold is a configuration error."""
        monkeypatch.setenv("HCGL_PRECISION_SIGMA", "high")
        with pytest.raises(ConfigError):
            precision_sigma()


class TestConductance:
    """Phi(S) and its bound (p = mu = 1)."""

    @pytest.mark.parametrize("sigma", [5.0, 10.0])
    def test_exact_value_respects_bound(self, space4, set_s4, sigma):
        """Phi(S) <= |inner boundary| (L^2/2 - L) / sigma^L."""
        value, bound = conductance_of_S(space4, set_s4, sigma)
        assert 0 < value <= bound
        assert bound == pytest.approx(set_s4.inner_boundary.size * 4 / sigma ** 4)

    def test_bound_needs_sigma_above_one(self, space4, set_s4):
        """sigma <= 1 is outside the regime of the bound."""
        with pytest.raises(PreconditionError):
            conductance_of_S(space4, set_s4, 1.0)
        assert exact_conductance(space4, set_s4, 0.5) > 0

    def test_conductance_decreases_with_sigma(self, space4, set_s4):
        """S becomes harder to leave as sigma grows."""
        values = [exact_conductance(space4, set_s4, s) for s in (2.0, 5.0, 10.0)]
        assert values == sorted(values, reverse=True)


class TestMixing:
    """Mixing-time bound and the true t_mix."""

    def test_bound_formula(self, space4, set_s4):
        """(1/2 - 2 eps) sigma^L / (|inner| (L^2/2 - L))."""
        expected = 0.25 * 10.0 ** 4 / (set_s4.inner_boundary.size * 4)
        assert mixing_time_bound(space4, set_s4, 10.0, 0.125) == pytest.approx(expected)

    def test_bound_preconditions(self, space4, set_s4):
        """eps must lie in (0, 1/4) and sigma above one."""
        with pytest.raises(PreconditionError):
            mixing_time_bound(space4, set_s4, 10.0, 0.3)
        with pytest.raises(PreconditionError):
            mixing_time_bound(space4, set_s4, 0.9, 0.125)

    def test_true_mixing_time_exceeds_bound(self, space4, set_s4):
        """The whole t_mix(1/8) bracket at sigma = 5 lies above the lower bound."""
        chain = build_chain(space4, sigma=5.0)
        lo, hi = true_mixing_time(chain, 0.125)
        assert lo <= hi
        assert lo >= mixing_time_bound(space4, set_s4, 5.0, 0.125)

    def test_bracket_must_clear_the_bound(self, space4):
        """A bracket straddling the bound does not certify it."""
        certify_mixing_bound(space4, (7.0, 7.5), 6.0, 10.0, 0.125)
        with pytest.raises(IdentityViolationError) as exc:
            certify_mixing_bound(space4, (5.0, 7.5), 6.0, 10.0, 0.125)
        assert exc.value.violations[0]["type"] == "mixing_time_bound"

    def test_spectral_gap_in_unit_interval(self, chain4_sigma2, chain4_sigma10):
        """0 < gap <= 1, smaller for the slower chain."""
        fast = spectral_gap(chain4_sigma2)
        slow = spectral_gap(chain4_sigma10)
        assert 0 < slow < fast <= 1

    @pytest.mark.parametrize("sigma", [2.0, 5.0, 10.0])
    def test_cheeger_upper_bound(self, space4, set_s4, sigma):
        """gap <= 2 Phi(S), with Phi(S) rescaled to one uniformized step."""
        chain = build_chain(space4, sigma=sigma)
        phi_step = exact_conductance(space4, set_s4, sigma) / chain.q_max
        assert 0 < spectral_gap(chain) <= 2 * phi_step


class TestConditioning:
    """Refined solves at large sigma."""

    def test_large_hitting_times_do_not_warn(self, space4):
        """Hitting times of order 1e8 steps with a backward-stable solve do not warn."""
        chain = build_chain(space4, sigma=50.0)
        even_id, odd_id = space4.dominant_ids()
        with warnings.catch_warnings():
            warnings.simplefilter("error", ConditioningWarning)
            h = hitting_times_to(chain, odd_id)
        assert h[even_id] > 1e5
