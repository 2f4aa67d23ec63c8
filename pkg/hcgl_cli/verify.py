"""
HCGL CLI Verify - Check a report directory against its own manifest.

Re-hashes every side file listed in bundle.json and recomputes the bundle
fingerprint. Any mismatch fails the command with exit code 1.
"""

import json
from pathlib import Path

import typer
from pydantic import ValidationError
from rich.panel import Panel

from hcgl_core.container import BUNDLE_NAME, ReportContainer
from hcgl_core.errors import HcglError
from hcgl_cli.common import EXIT_FAILURE, console


def verify(
    report_dir: Path = typer.Argument(..., help="Report directory (or its bundle.json)"),
    json_output: bool = typer.Option(False, "--json", help="Output as JSON"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Verbose output"),
):
    """
    Verify a report directory written with --out.
    """
    if not report_dir.exists():
        console.print(f"[red][FAIL] Error:[/red] Not found: {report_dir}")
        raise typer.Exit(EXIT_FAILURE)

    try:
        bundle = ReportContainer.read_bundle(report_dir)
        ok, mismatches = ReportContainer.verify_integrity(report_dir)
    except (FileNotFoundError, ValueError, ValidationError, HcglError) as e:
        if verbose:
            console.print_exception()
        else:
            console.print(f"[red][FAIL] Verification failed:[/red] {e}")
        raise typer.Exit(EXIT_FAILURE)

    if json_output:
        report = {
            "valid": ok,
            "fingerprint": bundle.fingerprint,
            "files_checked": len(bundle.file_manifest),
            "mismatches": mismatches,
        }
        typer.echo(json.dumps(report, indent=2))
    else:
        lines = [
            f"[bold]Report:[/bold] {report_dir}",
            f"[bold]Mode:[/bold] {bundle.config.mode}   [bold]Seed:[/bold] {bundle.seed}",
            f"[bold]Tool version:[/bold] {bundle.tool_version}",
            "",
        ]
        if ok:
            lines.append(
                f"[green][OK] Integrity:[/green] {len(bundle.file_manifest)} side file(s) "
                f"and {BUNDLE_NAME} verified"
            )
        else:
            lines.append(f"[red][FAIL] Integrity:[/red] {len(mismatches)} mismatch(es)")
            for name, reason in mismatches.items():
                lines.append(f"  [red]-[/red] {name}: {reason}")
        if verbose:
            lines.append("")
            lines.append(f"[dim]Fingerprint:[/dim] {bundle.fingerprint}")
            lines.append(f"[dim]Created:[/dim] {bundle.created_at}")
        console.print(Panel("\n".join(lines), title="Report verification",
                            border_style="green" if ok else "red"))

    if not ok:
        raise typer.Exit(EXIT_FAILURE)
