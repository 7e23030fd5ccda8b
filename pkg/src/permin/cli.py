"""
permin CLI
==========
Command line front end.

Usage:
    permin beta --config sft.json
    permin construct --config circle.json --set construction.L_hat=1000
    permin pipeline --config circle.json --out results/ --seed 7

The JSON result goes to stdout, diagnostics and stage tables to stderr.
Exit codes: 0 ok, 1 internal error, 2 invalid input, 3 verification failed.
"""

import sys
from pathlib import Path
from typing import Any, Callable, Optional, Tuple

import click
from rich import box
from rich.console import Console
from rich.table import Table

from . import __version__
from .audit_logger import configure_logging
from .config import load_config
from .errors import PerminError
from .orchestrator import COMMANDS, EXIT_INTERNAL, CommandResult, run_command
from .serialization import dumps, to_plain

# Rows shown per table on the terminal; the CSV artifacts hold everything.
MAX_ROWS = 20

stderr = Console(stderr=True)


def _render_tables(result: CommandResult) -> None:
    for name, (columns, rows) in sorted(result.tables.items()):
        table = Table(title=f"{result.command}: {name}", box=box.ROUNDED)
        for column in columns:
            table.add_column(column)
        for row in rows[:MAX_ROWS]:
            table.add_row(*[str(to_plain(v)) for v in row])
        if len(rows) > MAX_ROWS:
            table.caption = f"{len(rows) - MAX_ROWS} more rows in the CSV artifact"
        stderr.print(table)


def _fail(exc: PerminError) -> None:
    click.echo(dumps({"error": exc.to_dict()}), err=True)
    sys.exit(exc.exit_code)


def _execute(command: str, config: Optional[Path], overrides: Tuple[str, ...], out: Optional[str],
             seed: Optional[int], quiet: bool) -> None:
    try:
        cfg = load_config(config, overrides, out, seed)
        result = run_command(cfg, command)
    except PerminError as exc:
        _fail(exc)
        return
    except Exception as exc:  # noqa: BLE001
        click.echo(dumps({"error": {"type": type(exc).__name__, "message": str(exc),
                                    "exit_code": EXIT_INTERNAL}}), err=True)
        sys.exit(EXIT_INTERNAL)
    click.echo(dumps(result.report))
    if not quiet:
        _render_tables(result)
    sys.exit(result.exit_code)


def _common(fn: Callable[..., Any]) -> Callable[..., Any]:
    options = [
        click.option("--config", "config", type=click.Path(path_type=Path), default=None,
                     help="JSON experiment configuration."),
        click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                     help="Override a config field (dotted keys, JSON values)."),
        click.option("--out", "out", type=str, default=None, help="Directory for JSON/CSV artifacts."),
        click.option("--seed", "seed", type=click.IntRange(0, 2 ** 64 - 1), default=None,
                     help="64-bit RNG seed."),
        click.option("--quiet", is_flag=True, help="Skip the stderr tables."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


@click.group(name="permin")
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR.")
@click.option("--log-format", type=click.Choice(["console", "json"]), default=None)
@click.version_option(version=__version__, prog_name="permin")
def main(log_level: Optional[str], log_format: Optional[str]) -> None:
    """Periodic minimizers of weighted ergodic averages."""
    configure_logging(log_level, log_format)


def _register(name: str, help_text: str) -> None:
    @main.command(name=name, help=help_text)
    @_common
    def command(config, overrides, out, seed, quiet):
        _execute(name, config, overrides, out, seed, quiet)


HELP = {
    "enumerate": "List every periodic orbit of period <= N with its statistics.",
    "beta": "Minimum ratio average beta(u; psi), exact on shifts.",
    "subaction": "Sub-action certificate, its verification and the reference set.",
    "shadow": "Shadow a periodic pseudo-orbit by a true periodic orbit.",
    "construct": "Orbit with gap-to-deviation ratio above L_hat.",
    "perturb": "Perturbation budget and the perturbed observable.",
    "verify": "Verify that the perturbed observable has a unique periodic minimizer.",
    "bq-scan": "Decay scan a_n = n^k min d_{alpha,Z}(O).",
    "pipeline": "Certificate, construction, budget and stability sweep end to end.",
}

for _name in COMMANDS:
    _register(_name, HELP[_name])


if __name__ == "__main__":
    main()
