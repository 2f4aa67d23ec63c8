"""
HCGL CLI Common - Shared console, config assembly, exit codes and bundle output.
"""

import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, List, Optional

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler

from hcgl_core import __version__
from hcgl_core.container import ReportContainer, compute_fingerprint
from hcgl_core.errors import (
    ConfigError,
    HcglError,
    IdentityViolationError,
    PreconditionError,
)
from hcgl_core.schemas import ExperimentConfig, NodeOverrides, ReportBundle
from hcgl_core.serialize import to_json
from hcgl_recorder.environment import capture_environment
from hcgl_recorder.simulator import stability_threshold

console = Console()
err_console = Console(stderr=True)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_IDENTITY = 4

SIGMA_GRID_FACTORS = (0.5, 2.0, 5.0, 10.0, 20.0)
SIGMA_GRID_FLOOR = 1.05
FALLBACK_SIGMA_GRID = [2.0, 5.0, 10.0, 20.0, 50.0]


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, (ConfigError, ValidationError)):
        return EXIT_CONFIG
    if isinstance(error, PreconditionError):
        return EXIT_PRECONDITION
    if isinstance(error, IdentityViolationError):
        return EXIT_IDENTITY
    return EXIT_FAILURE


def setup_logging(level: str) -> None:
    """Route library logs through one RichHandler on stderr (stdout carries --json)."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, RichHandler):
            root.removeHandler(handler)
    try:
        root.setLevel(level.upper())
    except ValueError as e:
        raise ConfigError(f"unknown log level {level!r}") from e
    root.addHandler(RichHandler(console=err_console, show_path=False, rich_tracebacks=True))


@contextmanager
def guarded(verbose: bool = False) -> Iterator[None]:
    """
    Map library errors to exit codes and print them as [FAIL] lines.

    ``--verbose`` prints the full traceback instead.
    """
    try:
        yield
    except typer.Exit:
        raise
    except (HcglError, ValidationError) as e:
        if verbose:
            console.print_exception()
        else:
            console.print(f"[red][FAIL][/red] {e}")
        if isinstance(e, IdentityViolationError):
            for v in e.violations[:5]:
                console.print(f"  [red]-[/red] {v.get('type')} at 0x{v.get('state_hex')}")
        raise typer.Exit(exit_code_for(e))
    except KeyboardInterrupt:
        console.print("\n[yellow]Interrupted[/yellow]")
        raise typer.Exit(130)


def parse_grid(text: Optional[str]) -> Optional[List[float]]:
    """Parse a comma list such as ``2,5,10``."""
    if text is None:
        return None
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise ConfigError(f"cannot parse grid {text!r}: {e}") from e


def load_overrides(path: Optional[Path]) -> Optional[NodeOverrides]:
    """
    Read a per-node parameter file ``{"lambda": {...}, "mu": {...}, ...}``.

    Raises:
        ConfigError: If the file is missing or malformed
    """
    if path is None:
        return None
    if not path.exists():
        raise ConfigError(f"parameter file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        return NodeOverrides.model_validate(data)
    except (json.JSONDecodeError, ValidationError) as e:
        raise ConfigError(f"invalid parameter file {path}: {e}") from e


def build_config(mode: str, **flags) -> ExperimentConfig:
    """
    Assemble an ExperimentConfig from CLI flags (unset flags are dropped).

    Raises:
        ConfigError: On invalid or inconsistent values
    """
    params_file = flags.pop("params_file", None)
    data = {k: v for k, v in flags.items() if v is not None}
    data["sigma_grid"] = parse_grid(data.pop("sigma_grid", None))
    data["rho_grid"] = parse_grid(data.pop("rho_grid", None))
    overrides = load_overrides(Path(params_file) if params_file else None)
    if overrides is not None:
        data["overrides"] = overrides
        data["params_file"] = str(params_file)
    return ExperimentConfig(mode=mode, **data)


def default_sigma_grid(rho: Optional[float]) -> List[float]:
    """Five sigma values straddling the stability threshold of ``rho``."""
    if rho is None or rho >= 1:
        return list(FALLBACK_SIGMA_GRID)
    threshold = stability_threshold(rho)
    grid = sorted({max(SIGMA_GRID_FLOOR, threshold * f) for f in SIGMA_GRID_FACTORS})
    return grid


def new_bundle(config: ExperimentConfig, **sections) -> ReportBundle:
    return ReportBundle(
        tool_version=__version__,
        seed=config.seed,
        config=config,
        environment=capture_environment(),
        **sections,
    )


def emit_bundle(
    config: ExperimentConfig,
    bundle: ReportBundle,
    side_files: Optional[Dict[str, str]] = None,
    json_output: bool = False,
) -> None:
    """Write the report directory (when ``--out`` is set) and/or print the bundle."""
    if config.out:
        path = ReportContainer.pack(Path(config.out), bundle, side_files)
        if not json_output:
            console.print(f"[green][OK][/green] Report written to [cyan]{path}[/cyan]")
            console.print(f"[dim]Fingerprint:[/dim] {bundle.fingerprint}")
    else:
        bundle.fingerprint = compute_fingerprint(bundle)
        if side_files and not json_output:
            console.print(
                f"[yellow][WARN][/yellow] {len(side_files)} side file(s) not written (no --out)"
            )
    if json_output:
        typer.echo(to_json(bundle))


def fmt(value: Optional[float]) -> str:
    """Format a number with 12 significant digits for tables."""
    if value is None:
        return "-"
    return f"{value:.12g}"
