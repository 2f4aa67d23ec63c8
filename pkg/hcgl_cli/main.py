"""
HCGL CLI Main - Entry point for the hcgl command-line interface.
"""

import typer

from hcgl_cli.common import console

app = typer.Typer(
    name="hcgl",
    help="""HCGL - Exact landscapes and simulations of hard-core random-access networks on tori.

Commands:
  run --mode analyze    Communication height, set S, conductance, hitting times.
  run --mode audit      Check the contour identities over every configuration.
  run --mode simulate   Replicated delay runs with transition-time sampling.
  run --mode sweep      One table row per sigma or rho grid point.
  verify <report-dir>   Re-hash side files and the bundle fingerprint.
  version               Show version information.

Quickstart:
  hcgl run --mode analyze --L 4 --sigma 10 --out reports/l4
  hcgl verify reports/l4
""",
    add_completion=False,
    no_args_is_help=True,
    rich_markup_mode="rich",
)


@app.command()
def version():
    """Show HCGL version information."""
    from hcgl_core import __version__
    from hcgl_recorder.environment import get_environment_summary

    console.print(f"[bold]HCGL[/bold] version [cyan]{__version__}[/cyan]")
    console.print(f"[dim]{get_environment_summary()}[/dim]")


from hcgl_cli.run import run as run_command

app.command(name="run", help="Run an experiment and write a report bundle")(run_command)

from hcgl_cli.verify import verify as verify_command

app.command(name="verify", help="Verify a report directory")(verify_command)


def cli_main():
    """CLI entry point (called by the `hcgl` command)."""
    app()


if __name__ == "__main__":
    cli_main()
