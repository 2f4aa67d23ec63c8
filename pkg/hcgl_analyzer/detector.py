"""
HCGL Identity Auditor

Exhaustive (or sampled) audit of the contour geometry over a torus state space:
- Cutset identities for odd regions and, with parities swapped, even regions
- Contour identity l(I) = 4 * Delta(I) and closed, balanced contour curves
- Class partition and the stripe / critical-cross bounds
- Stripes and crosses staying outside S
"""

import logging
from collections import Counter
from typing import Dict, List, Optional

import numpy as np

from hcgl_core.configuration import StateSpace
from hcgl_core.contours import (
    CLASS_CODES,
    ClassificationCache,
    ConfigurationClass,
    Region,
    RegionClass,
    RegionDecomposition,
    classify_configuration,
    critical_cross_witnesses,
    decompose,
    decomposition_to_document,
)
from hcgl_core.errors import IdentityViolationError
from hcgl_core.schemas import AuditFinding, AuditReport, DecompositionDump
from hcgl_core.topology import VertexSet

from hcgl_analyzer.landscape import build_set_S

logger = logging.getLogger(__name__)

_SEVERITY_MARKERS = {
    "CRITICAL": "[!!!]",
    "HIGH": "[!!]",
    "MEDIUM": "[!]",
    "LOW": "[-]",
}


class IdentityAuditor:
    """
    Checks contour identities and classification bounds state by state.

    Findings are plain dicts with ``type``, ``severity``, ``state_hex``,
    ``explanation`` and ``fix`` keys, in the order they were found.
    """

    def __init__(
        self,
        space: StateSpace,
        sample: Optional[int] = None,
        seed: int = 0,
        keep_dumps: bool = False,
    ):
        """
        Args:
            space: Enumerated torus state space
            sample: Audit this many random states instead of all of them
            seed: Seed for the sample
            keep_dumps: Keep a decomposition dump of every audited state
        """
        self.space = space
        self.side = space.graph.require_torus()
        self.cache = ClassificationCache(space)
        self.exhaustive = sample is None or sample >= len(space)
        if self.exhaustive:
            self.state_ids = np.arange(len(space))
        else:
            rng = np.random.default_rng(seed)
            self.state_ids = np.sort(rng.choice(len(space), size=sample, replace=False))
        self.keep_dumps = keep_dumps

        self.findings: List[Dict] = []
        self.checks_run: Counter = Counter()
        self.class_counts: Counter = Counter()
        self.dumps: List[DecompositionDump] = []
        self.min_stripe_gap: Optional[int] = None
        self.min_critical_contour_length: Optional[int] = None

    def analyze(self) -> List[Dict]:
        """Run every check and return the findings."""
        logger.info(
            "auditing %d of %d states (L=%d)", len(self.state_ids), len(self.space), self.side
        )
        crosses = []
        for state_id in self.state_ids:
            state_id = int(state_id)
            mask = self._mask(state_id)
            decomposition = decompose(self.space.graph, mask)
            klass = classify_configuration(self.space.graph, mask, decomposition)
            self.cache.remember(state_id, klass)
            self.class_counts[klass.value] += 1

            self._check_regions(state_id, decomposition)
            self._check_contour_identity(state_id, decomposition)
            self._check_partition(state_id, decomposition)
            if klass is ConfigurationClass.OMEGA_S:
                self._check_stripe(state_id, decomposition)
            elif klass is ConfigurationClass.OMEGA_CR:
                crosses.append((state_id, decomposition))
            elif self.keep_dumps:
                self.dumps.append(
                    decomposition_to_document(self.space, state_id, decomposition, klass)
                )

        for state_id, decomposition in crosses:
            self._check_cross(state_id, decomposition)

        if self.exhaustive:
            self._check_set_S()

        logger.info("audit finished with %d finding(s)", len(self.findings))
        return self.findings

    def _mask(self, state_id: int) -> VertexSet:
        return VertexSet(int(self.space.masks[state_id]), self.space.graph.n_vertices)

    def _report(
        self, kind: str, severity: str, state_id: int, explanation: str, fix: Optional[str] = None
    ) -> None:
        finding = {
            "type": kind,
            "severity": severity,
            "state_hex": self.space.hex(state_id),
            "explanation": explanation,
        }
        if fix:
            finding["fix"] = fix
        self.findings.append(finding)

    def _check_regions(self, state_id: int, decomposition: RegionDecomposition) -> None:
        for region in decomposition.odd_regions:
            self._check_cutset(state_id, region, region.n_even - region.n_odd, "odd")
        for region in decomposition.even_regions:
            self._check_cutset(state_id, region, region.n_odd - region.n_even, "even")

    def _check_cutset(self, state_id: int, region: Region, excess: int, label: str) -> None:
        self.checks_run[f"cutset_identity_{label}"] += 1
        if len(region.cutset) != 4 * excess:
            self._report(
                f"cutset_identity_{label}",
                "CRITICAL",
                state_id,
                f"{label} region of {len(region.vertices)} vertices has |cutset|="
                f"{len(region.cutset)}, expected {4 * excess}",
                "Check region connectivity and the edge cut operator",
            )

        self.checks_run["contour_matches_cutset"] += 1
        if region.contour_length != len(region.cutset):
            self._report(
                "contour_matches_cutset",
                "CRITICAL",
                state_id,
                f"contour has {region.contour_length} dual edges for a cutset of "
                f"{len(region.cutset)}",
            )

        for curve in region.contour:
            self.checks_run["curve_closed_balanced"] += 1
            if not curve.is_closed or curve.n_horizontal != curve.n_vertical:
                self._report(
                    "curve_closed_balanced",
                    "CRITICAL",
                    state_id,
                    f"curve of length {len(curve)} has displacement {curve.displacement}, "
                    f"{curve.n_horizontal} horizontal and {curve.n_vertical} vertical edges",
                    "Check the left-turn rule of the contour walk",
                )

    def _check_contour_identity(self, state_id: int, decomposition: RegionDecomposition) -> None:
        self.checks_run["contour_identity"] += 1
        expected = 4 * int(self.space.gaps[state_id])
        if decomposition.total_contour_length != expected:
            self._report(
                "contour_identity",
                "CRITICAL",
                state_id,
                f"l(I)={decomposition.total_contour_length} but 4*Delta(I)={expected}",
            )

    def _check_partition(self, state_id: int, decomposition: RegionDecomposition) -> None:
        self.checks_run["class_partition"] += 1
        classes = {r.klass for r in decomposition.odd_regions}
        if RegionClass.STRIPE in classes and RegionClass.CROSS in classes:
            self._report(
                "class_partition",
                "CRITICAL",
                state_id,
                "configuration carries both a stripe and a cross region",
            )

    def _check_stripe(self, state_id: int, decomposition: RegionDecomposition) -> None:
        gap = int(self.space.gaps[state_id])
        self.min_stripe_gap = gap if self.min_stripe_gap is None else min(self.min_stripe_gap, gap)

        self.checks_run["stripe_gap"] += 1
        if gap < self.side:
            self._report(
                "stripe_gap",
                "HIGH",
                state_id,
                f"stripe configuration has Delta={gap} < L={self.side}",
            )
        for region in decomposition.odd_regions:
            if region.klass is not RegionClass.STRIPE:
                continue
            self.checks_run["stripe_contour_length"] += 1
            if region.contour_length < 4 * self.side:
                self._report(
                    "stripe_contour_length",
                    "HIGH",
                    state_id,
                    f"stripe contour has {region.contour_length} edges, below 4L={4 * self.side}",
                )
            winding = sum(1 for c in region.contour if not c.is_contractible)
            self.checks_run["stripe_winding_curves"] += 1
            if winding < 2:
                self._report(
                    "stripe_winding_curves",
                    "HIGH",
                    state_id,
                    f"stripe has {winding} non-contractible curve(s), expected at least 2",
                )
        if self.keep_dumps:
            self.dumps.append(
                decomposition_to_document(
                    self.space, state_id, decomposition, ConfigurationClass.OMEGA_S
                )
            )

    def _check_cross(self, state_id: int, decomposition: RegionDecomposition) -> None:
        witnesses = critical_cross_witnesses(self.space, state_id, self.cache)
        critical = bool(witnesses)
        if critical:
            self.class_counts["omega_cc"] += 1
            length = decomposition.total_contour_length
            current = self.min_critical_contour_length
            self.min_critical_contour_length = length if current is None else min(current, length)

            self.checks_run["critical_cross_length"] += 1
            bound = 8 * self.side - 12
            if length < bound:
                self._report(
                    "critical_cross_length",
                    "HIGH",
                    state_id,
                    f"critical cross has l(I)={length}, below 8L-12={bound}",
                )
            gap = int(self.space.gaps[state_id])
            for w in witnesses:
                self.checks_run["critical_cross_witness"] += 1
                if int(self.space.gaps[w]) != gap + 1:
                    self._report(
                        "critical_cross_witness",
                        "HIGH",
                        state_id,
                        f"cluster neighbor 0x{self.space.hex(w)} has Delta={self.space.gaps[w]}, "
                        f"expected {gap + 1}",
                    )
        if self.keep_dumps:
            self.dumps.append(
                decomposition_to_document(
                    self.space, state_id, decomposition, ConfigurationClass.OMEGA_CR, critical
                )
            )

    def _check_set_S(self) -> None:
        self.checks_run["set_s_properties"] += 1
        try:
            s = build_set_S(self.space, self.cache)
        except IdentityViolationError as e:
            for v in e.violations:
                self.findings.append(dict(v, fix="Check the bottleneck search"))
            return

        codes = self.cache.classify_all()
        cluster = CLASS_CODES[ConfigurationClass.OMEGA_CL]
        for state_id in np.flatnonzero(codes != cluster):
            self.checks_run["stripe_cross_outside_S"] += 1
            if int(state_id) in s:
                self._report(
                    "stripe_cross_outside_S",
                    "HIGH",
                    int(state_id),
                    f"{self.cache.klass(int(state_id)).value} configuration lies in S "
                    f"(phi(E, I)={s.heights[state_id]})",
                )

    def to_report(self) -> AuditReport:
        counts = {k.value: self.class_counts.get(k.value, 0) for k in ConfigurationClass}
        counts["omega_cc"] = self.class_counts.get("omega_cc", 0)
        return AuditReport(
            side=self.side,
            n_states=len(self.state_ids),
            class_counts=counts,
            checks_run=dict(self.checks_run),
            min_stripe_gap=self.min_stripe_gap,
            min_critical_contour_length=self.min_critical_contour_length,
            violations=[AuditFinding(**f) for f in self.findings],
        )

    def raise_for_violations(self) -> None:
        if self.findings:
            raise IdentityViolationError(self.findings)

    def get_summary(self) -> str:
        """Human-readable summary of the audit findings"""
        if not self.findings:
            checks = sum(self.checks_run.values())
            return f"[OK] {checks} identity checks passed over {len(self.state_ids)} states"

        by_severity = Counter(f.get("severity") for f in self.findings)
        lines = [
            f"[!] Found {len(self.findings)} violation(s):",
            f"   {by_severity['CRITICAL']} Critical, {by_severity['HIGH']} High severity",
            "",
        ]
        for i, f in enumerate(self.findings, 1):
            marker = _SEVERITY_MARKERS.get(f.get("severity"), "[?]")
            lines.append(
                f"{i}. {marker} [{f.get('severity')}] {f.get('type')} at 0x{f.get('state_hex')}"
            )
            lines.append(f"   -> {f.get('explanation')}")
            if "fix" in f:
                lines.append(f"   -> Fix: {f['fix']}")
            lines.append("")
        return "\n".join(lines)
