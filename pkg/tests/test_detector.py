"""
Tests for hcgl_analyzer.detector - Identity audit over the 4x4 torus
"""

import pytest

from hcgl_analyzer.detector import IdentityAuditor
from hcgl_core.errors import IdentityViolationError


@pytest.fixture(scope="module")
def full_audit(space4):
    auditor = IdentityAuditor(space4, keep_dumps=True)
    auditor.analyze()
    return auditor


class TestExhaustiveAudit:
    """Audit every state of the 4x4 torus."""

    def test_no_violations(self, full_audit):
        """All contour identities and class bounds hold."""
        assert full_audit.findings == []
        assert full_audit.exhaustive

    def test_class_counts_partition(self, full_audit, space4):
        """Cluster, stripe and cross counts cover the space."""
        report = full_audit.to_report()
        counts = report.class_counts
        assert counts["omega_cl"] + counts["omega_s"] + counts["omega_cr"] == len(space4)
        assert counts["omega_s"] > 0
        assert counts["omega_cc"] <= counts["omega_cr"]
        assert report.n_states == len(space4)

    def test_bounds(self, full_audit):
        """Stripes have Delta >= L; critical crosses have l >= 8L - 12."""
        report = full_audit.to_report()
        assert report.min_stripe_gap is not None and report.min_stripe_gap >= 4
        if report.min_critical_contour_length is not None:
            assert report.min_critical_contour_length >= 20

    def test_checks_were_run(self, full_audit):
        """Every identity family is evaluated."""
        checks = full_audit.checks_run
        for name in (
            "cutset_identity_odd",
            "cutset_identity_even",
            "contour_identity",
            "class_partition",
            "stripe_gap",
            "set_s_properties",
            "stripe_cross_outside_S",
        ):
            assert checks[name] > 0, name

    def test_dumps_cover_every_state(self, full_audit, space4):
        """One decomposition dump per audited state."""
        assert len(full_audit.dumps) == len(space4)

    def test_summary_ok(self, full_audit):
        """A clean audit reports [OK]."""
        assert full_audit.get_summary().startswith("[OK]")
        full_audit.raise_for_violations()


class TestSampledAudit:
    """Seeded sampling for large spaces."""

    def test_sample_is_seeded(self, space4):
        """The same seed audits the same states and skips the S checks."""
        a = IdentityAuditor(space4, sample=50, seed=3)
        b = IdentityAuditor(space4, sample=50, seed=3)
        assert list(a.state_ids) == list(b.state_ids)
        assert not a.exhaustive

        a.analyze()
        assert a.findings == []
        assert "set_s_properties" not in a.checks_run
        assert a.to_report().n_states == 50

    def test_oversized_sample_is_exhaustive(self, space4):
        """Asking for more states than exist walks them all."""
        auditor = IdentityAuditor(space4, sample=10 ** 6)
        assert auditor.exhaustive


class TestFindings:
    """Violation reporting."""

    def test_summary_lists_findings(self, space4):
        """Findings appear with severity markers and fixes."""
        auditor = IdentityAuditor(space4, sample=1)
        auditor._report("contour_identity", "CRITICAL", 0, "l(I)=3 but 4*Delta(I)=4", "Recheck")
        summary = auditor.get_summary()
        assert "1 violation(s)" in summary
        assert "[!!!] [CRITICAL] contour_identity at 0x0000" in summary
        assert "Fix: Recheck" in summary

        with pytest.raises(IdentityViolationError) as exc:
            auditor.raise_for_violations()
        assert exc.value.violations[0]["type"] == "contour_identity"
        assert auditor.to_report().violations[0].severity == "CRITICAL"
