"""Command-line entry point: `udn <command>`."""

import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, Iterator, Optional

import numpy as np
import pandas as pd
import typer
from rich.console import Console
from rich.table import Table

from udn import __version__
from udn.config import settings
from udn.core import apply_overrides, load_config, validate_config
from udn.exceptions import ConfigError, FieldError, UDNError
from udn.experiments import (
    delay_cdf_table,
    local_delay_table,
    stability_region_table,
)
from udn.log import configure_logging
from udn.schemas import SimConfig, SweepSpec
from udn.selfcheck import run_selfcheck
from udn.storage import frame_to_csv, save_frame

logger = logging.getLogger(__name__)

app = typer.Typer(
    name="udn",
    help="Interacting-queues laboratory for static ultradense networks.",
    add_completion=False,
    no_args_is_help=True,
)
console = Console(stderr=True)

DEFAULT_P_SWEEP = "access_prob=0.1:1.0:0.1"

ConfigOption = Annotated[
    Optional[Path],
    typer.Option(
        "--config", exists=True, dir_okay=False, help="key=value config file."
    ),
]
OutOption = Annotated[
    Optional[Path],
    typer.Option("--out", dir_okay=False, help="CSV destination (stdout)."),
]
SeedOption = Annotated[
    Optional[int], typer.Option("--seed", min=0, help="Overrides the seed.")
]
WorkersOption = Annotated[
    Optional[int],
    typer.Option(
        "--workers", envvar="UDN_WORKERS", min=1, help="Process pool size."
    ),
]
RealizationsOption = Annotated[
    Optional[int],
    typer.Option("--realizations", min=1, help="Ensemble size."),
]
HorizonOption = Annotated[
    Optional[int], typer.Option("--horizon", min=1, help="Slots per run.")
]
DumpOption = Annotated[
    Optional[Path],
    typer.Option(
        "--dump-realizations",
        file_okay=False,
        help="Directory for geometry and per-link statistics CSVs.",
    ),
]


def parse_grid(text: str, field: str = "sweep") -> list[float]:
    """
    Expands START:STOP:STEP into its values, STOP included.

    Raises:
        ConfigError: If the text is malformed or STEP is not positive.

    Examples:
        >>> parse_grid("0.1:0.5:0.1")
        [0.1, 0.2, 0.3, 0.4, 0.5]
        >>> parse_grid("1:0:1")
        []
    """
    try:
        start, stop, step = (float(part) for part in text.split(":"))
    except ValueError:
        raise ConfigError(
            [FieldError(field, f"expected START:STOP:STEP, got {text!r}")]
        ) from None
    if not step > 0:
        raise ConfigError([FieldError(field, "STEP must be positive")])
    if stop < start:
        return []
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 10) for k in range(count)]


def parse_sweep(text: str) -> SweepSpec:
    """
    Parses NAME=START:STOP:STEP.

    Raises:
        ConfigError: If the text is malformed or names no config field.
    """
    name, sep, grid = text.partition("=")
    if not sep:
        raise ConfigError(
            [FieldError("sweep", f"expected NAME=START:STOP:STEP: {text!r}")]
        )
    name = name.strip()
    if name not in SimConfig.model_fields:
        raise ConfigError(
            [FieldError("sweep", f"cannot sweep unknown field {name!r}")]
        )
    return SweepSpec(name=name, values=parse_grid(grid))


def resolve_config(
    path: Optional[Path],
    seed: Optional[int] = None,
    realizations: Optional[int] = None,
    horizon: Optional[int] = None,
) -> SimConfig:
    """Loads the config file (or defaults) and applies command-line flags."""
    config = load_config(path) if path else validate_config({})
    overrides = {
        "seed": seed,
        "realizations": realizations,
        "horizon": horizon,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return apply_overrides(config, **overrides) if overrides else config


def emit(frame: pd.DataFrame, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(frame_to_csv(frame))
    else:
        save_frame(frame, out)
        logger.info("wrote %d rows to %s", len(frame), out)


@contextmanager
def reporting_errors() -> Iterator[None]:
    """
    Turns package errors into exit codes.

    Configuration errors exit with 2 and list every field; other package
    errors exit with 1. `--out` is only ever replaced by a finished table,
    so a failed run leaves an existing file as it was.
    """
    try:
        yield
    except ConfigError as error:
        for field_error in error.errors:
            console.print(f"[red]config error[/red] {field_error}")
        raise typer.Exit(code=2) from error
    except UDNError as error:
        console.print(f"[red]error[/red] {error}")
        raise typer.Exit(code=1) from error


def version_callback(value: bool):
    if value:
        typer.echo(f"udn {__version__}")
        raise typer.Exit()


@app.callback()
def main(
    log_level: Annotated[
        str, typer.Option("--log-level", help="Logging level.")
    ] = settings.log_level,
    version: Annotated[
        Optional[bool],
        typer.Option(
            "--version", callback=version_callback, is_eager=True
        ),
    ] = None,
):
    configure_logging(log_level.upper())


@app.command("stability-region")
def stability_region(
    config: ConfigOption = None,
    out: OutOption = None,
    sweep: Annotated[
        str, typer.Option("--sweep", help="access_prob=START:STOP:STEP")
    ] = DEFAULT_P_SWEEP,
    seed: SeedOption = None,
    workers: WorkersOption = None,
    realizations: RealizationsOption = None,
    horizon: HorizonOption = None,
    dump_realizations: DumpOption = None,
):
    """Critical arrival rates of every condition kind along a p-grid."""
    with reporting_errors():
        spec = parse_sweep(sweep)
        if spec.name != "access_prob":
            message = "the stability region sweeps access_prob"
            raise ConfigError([FieldError("sweep", message)])
        if any(not 0 <= p <= 1 for p in spec.values):
            message = "access probabilities must lie in [0, 1]"
            raise ConfigError([FieldError("sweep", message)])
        base = resolve_config(config, seed, realizations, horizon)
        frame = stability_region_table(
            base, spec.values, workers=workers, dump_dir=dump_realizations
        )
        emit(frame, out)


@app.command("local-delay")
def local_delay(
    sweep: Annotated[
        str, typer.Option("--sweep", help="NAME=START:STOP:STEP")
    ],
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    workers: WorkersOption = None,
    realizations: RealizationsOption = None,
    horizon: HorizonOption = None,
    dump_realizations: DumpOption = None,
):
    """Local-delay statistics of Backlogged runs along a sweep."""
    with reporting_errors():
        spec = parse_sweep(sweep)
        base = resolve_config(config, seed, realizations, horizon)
        frame = local_delay_table(
            base, spec, workers=workers, dump_dir=dump_realizations
        )
        emit(frame, out)


@app.command("delay-cdf")
def delay_cdf(
    config: ConfigOption = None,
    out: OutOption = None,
    grid: Annotated[
        Optional[str],
        typer.Option("--grid", help="Evaluation grid START:STOP:STEP."),
    ] = None,
    seed: SeedOption = None,
    workers: WorkersOption = None,
    realizations: RealizationsOption = None,
    horizon: HorizonOption = None,
    dump_realizations: DumpOption = None,
):
    """Mean-delay cdf bounds, empirical cdf and fixed-point approximation."""
    with reporting_errors():
        points = parse_grid(grid, "grid") if grid else None
        base = resolve_config(config, seed, realizations, horizon)
        frame = delay_cdf_table(
            base, points, workers=workers, dump_dir=dump_realizations
        )
        emit(frame, out)


@app.command()
def selfcheck():
    """Runs the fast consistency checks."""
    results = run_selfcheck()
    table = Table(title="udn selfcheck")
    table.add_column("check")
    table.add_column("result")
    table.add_column("expected")
    table.add_column("observed")
    for result in results:
        table.add_row(
            result.name,
            "[green]pass[/green]" if result.passed else "[red]FAIL[/red]",
            result.expected,
            result.observed,
        )
    Console().print(table)
    if not all(result.passed for result in results):
        raise typer.Exit(code=1)


if __name__ == "__main__":
    app()
