"""Speedup benchmark: time an application at several thread counts.

Output CSV columns are ``app,mode,threads,run,seconds,speedup`` with one row
per timed run followed by ``mean``, ``min`` and ``max`` summary rows for each
thread count. ``speedup`` is the mean single-thread time divided by the
run's time (for summary rows, the statistic of the per-run speedups).
"""

import argparse
import csv
import sys
import warnings
from dataclasses import replace

import numpy as np

from ..engine import solve
from ..engine.kernels import available_cores
from ..errors import CoordSplitError, ParameterError
from ..io import parse_libsvm
from ..operators import LogLossForward, ProxL1, ProxSumSquare, SquareLossForward
from ..schemes import ForwardBackward
from . import nmf, portfolio
from .cli import CliConfig, UsageError, to_params

__all__ = ["APPS", "bench_speedup", "write_bench", "main", "BENCH_HEADER"]

BENCH_HEADER = ("app", "mode", "threads", "run", "seconds", "speedup")

#: reference threshold checked on hosts with at least this many cores
SPEEDUP_THREADS = 4
SPEEDUP_TARGET = 2.5


def _portfolio_factory(config):
    Q, xi = portfolio.load_instance(config)
    return lambda: portfolio.build_scheme(Q, xi, config.c, config.eta)


def _nmf_factory(config):
    A = nmf.nmf_instance(config.m, config.n, config.k, config.seed)
    return lambda: nmf.build_scheme(A, config.k, config.seed, config.eta)


def _libsvm_factory(forward_cls, backward_cls, real=False):
    def factory(config):
        if not config.data:
            raise UsageError("this app needs -data")
        ds = parse_libsvm(config.data, dim_hint=config.dim, real_labels=real)
        A = ds.A.to_dense() if real else ds.A
        return lambda: ForwardBackward(forward_cls(A, ds.b, eta_f=config.eta), backward_cls(config.lam))

    return factory


APPS = {
    "portfolio": _portfolio_factory,
    "nmf": _nmf_factory,
    "l1-log": _libsvm_factory(LogLossForward, ProxL1),
    "l2-log": _libsvm_factory(LogLossForward, ProxSumSquare),
    "lasso": _libsvm_factory(SquareLossForward, ProxL1, real=True),
}


def bench_speedup(app, config, threads, repeats, out=None):
    """Run `app` `repeats` times at each thread count with a fixed epoch budget.

    Parameters
    ----------
    app : str
        One of :data:`APPS`.
    config : CliConfig
        Problem and solver options; ``tol`` is forced to 0 so every run does
        the same work.
    threads : sequence of int
        Thread counts; 1 is added in front if missing (it is the baseline).
    repeats : int
        Timed runs per thread count (after one untimed warm-up run).
    out : path, optional
        Write the CSV here.

    Returns
    -------
    list of dict
        The CSV rows.
    """
    if app not in APPS:
        raise ParameterError(f"unknown app {app!r}; choose from {', '.join(APPS)}")
    if repeats < 1:
        raise ParameterError("repeats must be positive")
    threads = [int(t) for t in threads]
    if any(t < 1 for t in threads):
        raise ParameterError("thread counts must be positive")
    if 1 not in threads:
        threads = [1] + threads
    config = replace(config, tol=0.0)
    make = APPS[app](config)

    def timed(p):
        params = to_params(replace(config, nthread=p))
        return solve(make(), params).wall_seconds

    timed(threads[0])  # compile and warm caches
    seconds = {p: [timed(p) for _ in range(repeats)] for p in threads}
    base = float(np.mean(seconds[1]))
    rows = []
    for p in threads:
        for r, s in enumerate(seconds[p]):
            rows.append(dict(app=app, mode=config.mode, threads=p, run=r, seconds=s, speedup=base / s))
    for p in threads:
        sp = np.array([base / s for s in seconds[p]])
        secs = np.array(seconds[p])
        # the p=1 mean row is exactly 1 by definition
        mean_sp = 1.0 if p == 1 else float(base / secs.mean())
        for stat, val, spv in (("mean", secs.mean(), mean_sp), ("min", secs.min(), sp.min()), ("max", secs.max(), sp.max())):
            rows.append(dict(app=app, mode=config.mode, threads=p, run=stat, seconds=float(val), speedup=float(spv)))
    if SPEEDUP_THREADS in seconds:
        cores = available_cores()
        mean4 = base / float(np.mean(seconds[SPEEDUP_THREADS]))
        if cores >= SPEEDUP_THREADS and mean4 < SPEEDUP_TARGET:
            warnings.warn(
                f"speedup at {SPEEDUP_THREADS} threads is {mean4:.2f}, below {SPEEDUP_TARGET} on a {cores}-core host",
                RuntimeWarning,
                stacklevel=2,
            )
    if out is not None:
        write_bench(out, rows)
    return rows


def write_bench(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BENCH_HEADER)
        for row in rows:
            w.writerow([row["app"], row["mode"], row["threads"], row["run"], repr(row["seconds"]), repr(row["speedup"])])


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self.format_usage())


def main(argv=None):
    p = _Parser(prog="coordsplit-bench", description="thread-scaling benchmark", allow_abbrev=False)
    p.add_argument("-app", default="portfolio", choices=sorted(APPS))
    p.add_argument("-threads", default="1,2,4", help="comma-separated thread counts")
    p.add_argument("-repeats", type=int, default=10)
    p.add_argument("-out", default="bench.csv")
    p.add_argument("-data")
    p.add_argument("-epoch", type=int, default=20)
    p.add_argument("-lambda", dest="lam", type=float, default=1.0)
    p.add_argument("-eta", type=float)
    p.add_argument("-relax", type=float)
    p.add_argument("-kernel", default="cyclic", choices=["cyclic", "random_block", "gauss_seidel"])
    p.add_argument("-mode", default="async", choices=["sync", "async"])
    p.add_argument("-seed", type=int, default=0)
    p.add_argument("-dim", type=int)
    p.add_argument("-n", type=int, default=1000)
    p.add_argument("-c", type=float, default=0.5)
    p.add_argument("-m", type=int, default=100)
    p.add_argument("-k", type=int, default=5)
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        ns = p.parse_args(argv)
        threads = [int(t) for t in ns.threads.split(",") if t.strip()]
        config = CliConfig(
            data=ns.data, epoch=ns.epoch, lam=ns.lam, eta=ns.eta, relax=ns.relax, kernel=ns.kernel,
            mode=ns.mode, seed=ns.seed, dim=ns.dim, n=ns.n, c=ns.c, m=ns.m, k=ns.k,
        )
    except UsageError as exc:
        sys.stderr.write(exc.usage or p.format_usage())
        sys.stderr.write(f"{p.prog}: error: {exc}\n")
        return 1
    except ValueError as exc:
        sys.stderr.write(f"{p.prog}: error: {exc}\n")
        return 1
    try:
        rows = bench_speedup(ns.app, config, threads, ns.repeats, ns.out)
    except (CoordSplitError, UsageError) as exc:
        sys.stderr.write(f"{p.prog}: error: {exc}\n")
        return 1
    except Exception as exc:  # noqa: BLE001
        sys.stderr.write(f"{p.prog}: runtime error: {exc}\n")
        return 2
    for row in rows:
        if row["run"] == "mean":
            print(f"threads {row['threads']}: mean {row['seconds']:.4f}s  speedup {row['speedup']:.2f}")
    print(f"wrote {ns.out}")
    return 0
