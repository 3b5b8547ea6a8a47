"""Command-line plumbing shared by the application executables.

Flags are single-dash long options (``-data file -epoch 100 -nthread 4``).
Exit codes: 0 on success, 1 on a configuration or parse error, 2 on a
runtime failure.
"""

import argparse
import sys
from dataclasses import dataclass
from typing import Callable, Optional

from ..engine import Params, solve
from ..errors import CoordSplitError, ParameterError
from ..io import write_trace

__all__ = [
    "CliConfig",
    "Job",
    "UsageError",
    "build_parser",
    "execute",
    "parse_config",
    "report_lines",
    "run_cli",
    "to_params",
]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    """Bad command line; carries the usage text."""

    def __init__(self, message, usage=""):
        super().__init__(message)
        self.usage = usage


@dataclass
class CliConfig:
    """Options of one application run (see :func:`build_parser`)."""

    data: Optional[str] = None
    epoch: int = 100
    nthread: int = 1
    lam: float = 1.0
    eta: Optional[float] = None
    relax: Optional[float] = None
    kernel: str = "cyclic"
    mode: str = "async"
    seed: int = 0
    tol: float = 0.0
    out: Optional[str] = None
    dim: Optional[int] = None
    check: int = 1
    # portfolio
    n: int = 1000
    c: float = 0.5
    # nmf (shares ``n`` with portfolio as the column count)
    m: int = 100
    k: int = 5

    def __post_init__(self):
        if not self.lam >= 0:
            raise ParameterError(f"lambda must be nonnegative, got {self.lam}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self.format_usage())


def build_parser(prog, description, extras=()):
    """Parser with the common flags plus the named `extras` (``"n"``, ``"c"``, ``"m"``, ``"k"``)."""
    p = _Parser(prog=prog, description=description, allow_abbrev=False)
    p.add_argument("-data", help="LIBSVM training file")
    p.add_argument("-epoch", type=int, default=100, help="maximum number of epochs (default 100)")
    p.add_argument("-nthread", type=int, default=1, help="number of agents (default 1)")
    p.add_argument("-lambda", dest="lam", type=float, default=1.0, help="regularization weight (default 1)")
    p.add_argument("-eta", type=float, default=None, help="forward step size (default 0.9/L)")
    p.add_argument("-relax", type=float, default=None, help="relaxation in (0, 1] (default 1, async 0.5)")
    p.add_argument("-kernel", default="cyclic", choices=["cyclic", "random_block", "gauss_seidel"])
    p.add_argument("-mode", default="async", choices=["sync", "async"])
    p.add_argument("-seed", type=int, default=0)
    p.add_argument("-tol", type=float, default=0.0, help="stop below this fixed-point residual")
    p.add_argument("-out", default=None, help="write the CSV trace here")
    p.add_argument("-dim", type=int, default=None, help="minimum feature count of the data file")
    p.add_argument("-check", type=int, default=1, help="epochs between residual checks")
    if "n" in extras:
        p.add_argument("-n", type=int, default=1000 if "c" in extras else 100, help="problem size")
    if "c" in extras:
        p.add_argument("-c", type=float, default=0.5, help="required expected return")
    if "m" in extras:
        p.add_argument("-m", type=int, default=100, help="rows of the factored matrix")
    if "k" in extras:
        p.add_argument("-k", type=int, default=5, help="factorization rank")
    return p


def parse_config(parser, argv):
    ns = parser.parse_args(argv)
    return CliConfig(**vars(ns))


def to_params(config):
    return Params(
        eta_f=config.eta,
        eta_r=config.relax,
        max_epoch=config.epoch,
        n_threads=config.nthread,
        kernel=config.kernel,
        mode=config.mode,
        tol=config.tol,
        seed=config.seed,
        check_interval=config.check,
    )


def needs_data(config):
    if not config.data:
        raise UsageError("the -data flag is required")


def report_lines(report, extra=()):
    lines = [
        f"epochs: {report.epochs_completed:g}",
        f"objective: {report.final_objective:.10g}",
        f"residual: {report.final_residual:.6g}",
    ]
    lines.extend(extra)
    lines.append(f"Computing time  is: {report.wall_seconds:.2f}(s).")
    return lines


@dataclass
class Job:
    """A configured run: the scheme, its parameters and app-specific summary lines."""

    scheme: object
    params: Params
    config: CliConfig
    summary: Optional[Callable] = None


def execute(job, quiet=False):
    """Solve `job`, write its trace if requested and print the summary."""
    report = solve(job.scheme, job.params)
    if job.config.out:
        write_trace(job.config.out, report.trace)
    if not quiet:
        extra = job.summary(report) if job.summary else ()
        for line in report_lines(report, extra):
            print(line)
    return report


def run_cli(parser, setup, argv=None):
    """Parse `argv`, build the job with ``setup(config)`` and run it.

    Failures while parsing or setting up exit with 1; failures of the
    solve itself exit with 2.
    """
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        config = parse_config(parser, argv)
        job = setup(config)
    except UsageError as exc:
        sys.stderr.write(exc.usage or parser.format_usage())
        sys.stderr.write(f"{parser.prog}: error: {exc}\n")
        return EXIT_CONFIG
    except (CoordSplitError, OSError, ValueError) as exc:
        sys.stderr.write(f"{parser.prog}: error: {exc}\n")
        return EXIT_CONFIG
    try:
        execute(job)
    except Exception as exc:  # noqa: BLE001 - any solver failure is a runtime error
        sys.stderr.write(f"{parser.prog}: runtime error: {exc}\n")
        return EXIT_RUNTIME
    return EXIT_OK
