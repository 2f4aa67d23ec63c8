"""
Tests for hcgl_core.configuration - State spaces and the stationary law
"""

import math

import numpy as np
import pytest

from hcgl_core.configuration import (
    Configuration,
    bottom,
    dominant_mass,
    efficiency_gap,
    enumerate_states,
    estimate_state_count,
    is_independent,
    state_space_to_document,
    stationary_law,
)
from hcgl_core.errors import ConfigError, EnumerationCapError
from hcgl_core.topology import VertexSet, build_torus, dominant_sets


def brute_force_count(g) -> int:
    return sum(
        1 for bits in range(1 << g.n_vertices)
        if is_independent(g, VertexSet(bits, g.n_vertices))
    )


class TestEnumeration:
    """Exhaustive enumeration of independent sets."""

    def test_path_graph_has_five_states(self, path3):
        """Independent sets of 0-1-2: {}, {0}, {1}, {2}, {0,2}."""
        space = enumerate_states(path3)
        assert space.masks == (0b000, 0b001, 0b010, 0b100, 0b101)
        assert space.cardinality == 5

    def test_torus_count_matches_brute_force(self, torus4, space4):
        """Depth-first enumeration finds every independent set of the 4x4 torus."""
        assert len(space4) == brute_force_count(torus4)

    def test_state_ids_are_sorted_masks(self, space4):
        """State 0 is the empty configuration and ids follow mask order."""
        assert space4.masks[0] == 0
        assert list(space4.masks) == sorted(space4.masks)

    def test_flip_graph_is_symmetric(self, space4):
        """j is a flip neighbor of i iff i is one of j."""
        edges = set(space4.flip_edges())
        assert all((j, i) in edges for i, j in edges)

    def test_flip_neighbors_differ_in_one_vertex(self, space4):
        """Every flip edge toggles exactly one vertex."""
        for i in range(0, len(space4), 37):
            for j in space4.flip_neighbors(i):
                assert (space4.masks[i] ^ space4.masks[int(j)]).bit_count() == 1

    def test_cap_refusal(self):
        """A graph above the cap is refused with an estimate of |Omega|."""
        with pytest.raises(EnumerationCapError) as info:
            enumerate_states(build_torus(8))
        assert info.value.n_vertices == 64
        assert info.value.cap == 36
        assert info.value.estimated_states == pytest.approx(estimate_state_count(64))

    def test_cap_from_environment(self, monkeypatch, path3):
        """HCGL_ENUM_CAP lowers the cap."""
        monkeypatch.setenv("HCGL_ENUM_CAP", "2")
        with pytest.raises(EnumerationCapError):
            enumerate_states(path3)

    def test_bad_cap_variable(self, monkeypatch, path3):
        """A non-integer HCGL_ENUM_CAP is a configuration error."""
        monkeypatch.setenv("HCGL_ENUM_CAP", "lots")
        with pytest.raises(ConfigError):
            enumerate_states(path3)

    def test_unknown_state_is_a_config_error(self, space4):
        """Looking up a dependent set fails cleanly."""
        with pytest.raises(ConfigError):
            space4.state_id(0b11)


class TestConfiguration:
    """Configurations and the efficiency gap."""

    def test_dependent_set_is_rejected(self, torus4):
        """Two adjacent occupied vertices do not form a configuration."""
        with pytest.raises(ConfigError):
            Configuration(torus4.vertex_set([0, 1]), torus4)

    def test_flip_toggles_one_vertex(self, torus4):
        """flip(v) adds or removes v."""
        c = Configuration(torus4.vertex_set([0]), torus4)
        assert list(c.flip(2).occupied) == [0, 2]
        assert len(c.flip(0)) == 0

    def test_gap_of_dominant_states_is_zero(self, torus4):
        """Delta(E) = Delta(O) = 0 and Delta(empty) = L^2/2."""
        even, odd = dominant_sets(torus4)
        assert efficiency_gap(even, 4) == 0
        assert efficiency_gap(odd, 4) == 0
        assert efficiency_gap(0, 4) == 8

    def test_dominant_ids(self, space4, torus4):
        """dominant_ids returns the state ids of E and O."""
        even, odd = dominant_sets(torus4)
        even_id, odd_id = space4.dominant_ids()
        assert space4.masks[even_id] == even.bits
        assert space4.masks[odd_id] == odd.bits
        assert space4.gaps[even_id] == 0

    def test_bottom_keeps_lowest_gap(self, space4):
        """F(A) is the set of minimum-gap members of A."""
        even_id, odd_id = space4.dominant_ids()
        assert bottom(space4, [0, even_id, odd_id]) == sorted([even_id, odd_id])
        assert bottom(space4, []) == []


class TestStationaryLaw:
    """pi(x) proportional to sigma^|x|."""

    def test_probabilities_sum_to_one(self, law4_sigma10):
        """The law is normalized."""
        assert law4_sigma10.probabilities.sum() == pytest.approx(1.0, rel=1e-12)

    def test_path_graph_law(self, path3):
        """Z = 1 + 3 sigma + sigma^2 on the path 0-1-2."""
        space = enumerate_states(path3)
        law = stationary_law(space, sigma=2.0)
        assert law.probability(0) == pytest.approx(1 / 11)
        assert law.probability(space.state_id(0b101)) == pytest.approx(4 / 11)

    def test_dominant_mass_grows_with_sigma(self, space4):
        """pi(E) + pi(O) increases with sigma and tends to one."""
        masses = [dominant_mass(stationary_law(space4, sigma=s)) for s in (2, 5, 10, 50, 200)]
        assert masses == sorted(masses)
        assert masses[-1] > 0.9

    def test_large_sigma_stays_finite(self, space4):
        """Log-space weights keep sigma = 1e8 finite."""
        law = stationary_law(space4, sigma=1e8)
        assert math.isfinite(law.log_z)
        assert dominant_mass(law) == pytest.approx(1.0, abs=1e-6)

    def test_per_vertex_law_matches_homogeneous(self, space4):
        """Equal per-vertex sigmas give the homogeneous law."""
        a = stationary_law(space4, sigma=3.0)
        b = stationary_law(space4, per_vertex_sigma=[3.0] * 16)
        np.testing.assert_allclose(a.probabilities, b.probabilities, rtol=1e-12)

    def test_node_activity_on_path(self, path3):
        """Ends are active with (sigma + sigma^2)/Z, the middle with sigma/Z."""
        law = stationary_law(enumerate_states(path3), sigma=2.0)
        np.testing.assert_allclose(law.node_activity(), [6 / 11, 2 / 11, 6 / 11])
        np.testing.assert_allclose(law.node_unblocked(), [3 / 11, 1 / 11, 3 / 11])

    @pytest.mark.parametrize("sigma", [1.0, 4.0, 10.0, 100.0])
    def test_activity_balances_unblocked_time(self, space4, sigma):
        """theta_v = sigma * P(v unblocked): activations balance backoffs."""
        law = stationary_law(space4, sigma=sigma)
        np.testing.assert_allclose(law.node_activity(), sigma * law.node_unblocked(), rtol=1e-10)

    def test_activity_tends_to_one_half(self, space4):
        """On the torus each node is active close to half the time at large sigma."""
        thetas = [float(stationary_law(space4, sigma=s).node_activity()[0]) for s in (5, 20, 100)]
        assert thetas == sorted(thetas)
        assert thetas[-1] <= 0.5
        assert thetas[-1] > 0.45

    def test_law_needs_exactly_one_form(self, space4):
        """Both or neither sigma form is a configuration error."""
        with pytest.raises(ConfigError):
            stationary_law(space4)
        with pytest.raises(ConfigError):
            stationary_law(space4, sigma=2.0, per_vertex_sigma=[2.0] * 16)
        with pytest.raises(ConfigError):
            stationary_law(space4, sigma=-1.0)


class TestStateSpaceDocument:
    """Fixture export of a state space."""

    def test_document_lists_every_state_and_edge_once(self, path3):
        """Edges are listed once with i < j."""
        doc = state_space_to_document(enumerate_states(path3))
        assert doc.states == ["0", "1", "2", "4", "5"]
        assert doc.flip_edges == [[0, 1], [0, 2], [0, 3], [1, 4], [3, 4]]
        assert all(i < j for i, j in doc.flip_edges)
