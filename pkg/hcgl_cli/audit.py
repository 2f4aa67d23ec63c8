"""
HCGL CLI Audit - Check the contour identities state by state.
"""

import json
import logging
from typing import Dict, Tuple

from rich.markup import escape
from rich.panel import Panel

from hcgl_core.configuration import enumerate_states
from hcgl_core.schemas import ExperimentConfig, ReportBundle
from hcgl_core.topology import build_torus

from hcgl_analyzer.detector import IdentityAuditor
from hcgl_cli.common import console, new_bundle

logger = logging.getLogger(__name__)

# Above this many states the audit samples instead of walking everything
EXHAUSTIVE_LIMIT = 200_000
SAMPLE_SIZE = 2000


def cmd_audit(config: ExperimentConfig) -> Tuple[ReportBundle, Dict[str, str], IdentityAuditor]:
    """
    Audit every configuration of the torus, or a seeded sample on large spaces.

    The caller decides what to do with violations; they are in the bundle
    and on the returned auditor.

    Returns:
        tuple: (bundle, side files, auditor)
    """
    g = build_torus(config.side)
    space = enumerate_states(g)
    sample = None if space.cardinality <= EXHAUSTIVE_LIMIT else SAMPLE_SIZE
    if sample is not None:
        logger.warning(
            "|Omega|=%d is large: auditing %d sampled states (the S checks are skipped)",
            space.cardinality, sample,
        )
    auditor = IdentityAuditor(space, sample=sample, seed=config.seed, keep_dumps=True)
    auditor.analyze()

    bundle = new_bundle(config, audit=auditor.to_report())
    dumps = [d.model_dump(mode="json") for d in auditor.dumps]
    side_files = {"decompositions.json": json.dumps(dumps, indent=1)}
    return bundle, side_files, auditor


def print_audit(auditor: IdentityAuditor) -> None:
    report = auditor.to_report()
    counts = ", ".join(f"{k}={v}" for k, v in report.class_counts.items())
    style = "green" if not report.violations else "red"
    lines = [
        f"[bold]L:[/bold] {report.side}",
        f"[bold]States audited:[/bold] {report.n_states}"
        + ("" if auditor.exhaustive else " (sampled)"),
        f"[bold]Classes:[/bold] {counts}",
        f"[bold]Min stripe gap:[/bold] {report.min_stripe_gap}",
        f"[bold]Min critical contour length:[/bold] {report.min_critical_contour_length}",
        "",
        escape(auditor.get_summary()),
    ]
    console.print(Panel("\n".join(lines), title="Identity audit", border_style=style))
