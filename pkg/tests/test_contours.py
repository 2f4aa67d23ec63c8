"""
Tests for hcgl_core.contours - Regions, contours and classification
"""

import pytest

from hcgl_core.contours import (
    ClassificationCache,
    ConfigurationClass,
    RegionClass,
    classify_configuration,
    critical_cross_witnesses,
    decompose,
    decomposition_to_document,
    total_contour_length,
)
from hcgl_core.errors import PreconditionError
from hcgl_core.topology import VertexSet, dominant_sets


@pytest.fixture
def stripe_state(torus4):
    """Odd vertices of column 0 plus even vertices of column 2 (Delta = 4)."""
    ids = [torus4.vertex_id(0, 1), torus4.vertex_id(0, 3),
           torus4.vertex_id(2, 0), torus4.vertex_id(2, 2)]
    return torus4.vertex_set(ids)


class TestDecompose:
    """Region decomposition of single configurations."""

    def test_even_state_has_no_odd_region(self, torus4):
        """E is one even region covering the torus, with no contour."""
        even, _ = dominant_sets(torus4)
        d = decompose(torus4, even)
        assert d.odd_regions == ()
        assert len(d.even_regions) == 1
        assert d.even_regions[0].cutset == ()
        assert d.total_contour_length == 0

    def test_missing_even_vertex_is_a_small_odd_region(self, torus4):
        """Removing one vertex from E opens a unit odd region with a contour of length 4."""
        even, _ = dominant_sets(torus4)
        d = decompose(torus4, even - torus4.vertex_set([0]))
        assert len(d.odd_regions) == 1
        region = d.odd_regions[0]
        assert list(region.vertices) == [0]
        assert (region.n_even, region.n_odd) == (1, 0)
        assert len(region.cutset) == 4
        assert region.contour_length == 4
        assert len(region.contour) == 1
        curve = region.contour[0]
        assert curve.is_closed and curve.is_contractible
        assert curve.n_horizontal == curve.n_vertical == 2
        assert region.klass is RegionClass.CLUSTER

    def test_contour_identity_on_empty_configuration(self, torus4):
        """l(empty) = 4 * L^2 / 2."""
        assert total_contour_length(torus4, VertexSet.empty(16)) == 32

    def test_stripe(self, torus4, stripe_state):
        """A region wrapping around the torus is a stripe with two winding curves."""
        d = decompose(torus4, stripe_state)
        stripes = [r for r in d.odd_regions if r.klass is RegionClass.STRIPE]
        assert len(stripes) == 1
        stripe = stripes[0]
        assert len(stripe.cutset) == 4 * (stripe.n_even - stripe.n_odd) == 16
        assert sum(1 for c in stripe.contour if not c.is_contractible) == 2
        assert d.total_contour_length == 16
        assert classify_configuration(torus4, stripe_state, d) is ConfigurationClass.OMEGA_S

    def test_general_graph_is_refused(self, path3):
        """Contours are only defined on the torus."""
        with pytest.raises(PreconditionError):
            decompose(path3, path3.vertex_set([0]))


class TestIdentitiesOverTheStateSpace:
    """Identities that must hold for every configuration of the 4x4 torus."""

    def test_contour_length_is_four_times_gap(self, space4):
        """l(I) = 4 Delta(I) for all I."""
        g = space4.graph
        for i in range(len(space4)):
            state = VertexSet(space4.masks[i], 16)
            assert total_contour_length(g, state) == 4 * int(space4.gaps[i])

    def test_odd_cutset_identity(self, space4):
        """|c_R| = 4 (|R^E| - |R^O|) for every odd region."""
        g = space4.graph
        for i in range(len(space4)):
            for region in decompose(g, VertexSet(space4.masks[i], 16)).odd_regions:
                assert len(region.cutset) == 4 * (region.n_even - region.n_odd)


class TestClassification:
    """Configuration classes and critical crosses."""

    def test_even_state_is_a_cluster(self, space4, cache4):
        """E is in Omega_cl."""
        even_id, _ = space4.dominant_ids()
        assert cache4.klass(even_id) is ConfigurationClass.OMEGA_CL

    def test_classes_partition_the_space(self, space4, cache4):
        """Every state gets exactly one of the three classes."""
        total = sum(len(cache4.members(k)) for k in ConfigurationClass)
        assert total == len(space4)
        assert len(cache4.members(ConfigurationClass.OMEGA_S)) > 0

    def test_stripes_have_gap_at_least_l(self, space4, cache4):
        """Delta(I) >= L on Omega_s."""
        stripes = cache4.members(ConfigurationClass.OMEGA_S)
        assert space4.gaps[stripes].min() >= 4

    def test_witnesses_require_a_cross(self, space4, cache4):
        """critical_cross_witnesses refuses a cluster state."""
        even_id, _ = space4.dominant_ids()
        with pytest.raises(PreconditionError):
            critical_cross_witnesses(space4, even_id, cache4)

    def test_cache_agrees_with_direct_classification(self, space4):
        """Cached and fresh classes match."""
        cache = ClassificationCache(space4)
        for i in range(0, len(space4), 53):
            state = VertexSet(space4.masks[i], 16)
            assert cache.klass(i) is classify_configuration(space4.graph, state)


class TestDecompositionDocument:
    """Audit dumps."""

    def test_dump_carries_regions(self, torus4, space4, stripe_state):
        """The dump records gap, contour length and region classes."""
        state_id = space4.state_id(stripe_state)
        d = decompose(torus4, stripe_state)
        dump = decomposition_to_document(space4, state_id, d, ConfigurationClass.OMEGA_S)
        assert dump.state_hex == stripe_state.to_hex()
        assert dump.gap == 4
        assert dump.total_contour_length == 16
        assert dump.configuration_class == "omega_s"
        assert "stripe" in {r.klass for r in dump.odd_regions}
