"""Drivers: launch agents, run the controller and collect a :class:`RunReport`.

``run_async``
    `p` agents apply coordinate updates in place with no waiting; the
    controller (the calling thread) snapshots the iterate periodically.
``run_sync``
    barriered rounds: every agent computes the targets of its block into a
    staging buffer, then all apply, then each rebuilds its rows of the cache.
    The controller is a dedicated thread that joins every barrier.
``run_serial``
    a plain Python loop over the scheme's coordinate path in cyclic order;
    the reference trajectory for one agent.
"""

import logging
import math
import threading
import time

import numpy as np

from .._partition import block_partition
from ..errors import ConfigurationError
from .kernels import KERNEL_CODES, agent_loop, agent_seed, should_yield
from .params import Params, RunReport, SolverState, TraceRecord

__all__ = ["run_async", "run_sync", "run_serial", "run_agent", "controller_residual", "solve"]

log = logging.getLogger(__name__)

#: seconds the async controller sleeps between counter polls
POLL_SECONDS = 5e-4


def controller_residual(state, scheme, params=None):
    """Residual ``||x_snap - S(x_snap)||`` of a point-in-time copy of the iterate.

    Sets the stop flag of `state` if the residual is below ``params.tol`` or
    the epoch budget is spent.
    """
    snap = np.array(state.x, copy=True)
    res = scheme.residual(snap)
    if params is not None:
        n = max(scheme.n, 1)
        if res < params.tol or state.updates >= params.max_epoch * n:
            state.request_stop()
    return res


class _Recorder:
    """Builds trace records with strictly increasing timestamps."""

    def __init__(self, scheme, state, t0):
        self.scheme = scheme
        self.state = state
        self.t0 = t0
        self.last = -math.inf

    def record(self, x, epoch, residual=None):
        t = time.perf_counter() - self.t0
        if t <= self.last:
            t = math.nextafter(self.last, math.inf)
        self.last = t
        if residual is None:
            residual = self.scheme.residual(x)
        rec = TraceRecord(float(epoch), float(t), float(self.scheme.objective(x)), float(residual))
        self.state.trace.append(rec)
        return rec


def _check_scheme(scheme, params):
    if not isinstance(params, Params):
        raise TypeError("params must be a Params instance")
    params.validate()
    if params.eta_f is not None:
        scheme.update_params(params)


def _finish(scheme, state, wall, params, write_log=None):
    x = np.array(scheme.x, copy=True)
    n = max(scheme.n, 1)
    updates = min(state.updates, params.max_epoch * scheme.n)
    return RunReport(
        wall_seconds=wall,
        epochs_completed=updates / n,
        final_objective=float(scheme.objective(x)),
        final_residual=float(scheme.residual(x)),
        trace=list(state.trace),
        x=scheme.solution(x),
        updates=int(updates),
        final_violation=float(scheme.violation(x)),
        write_log=write_log,
    )


def _agent_args(scheme, params, rank, state, max_updates, log_i, log_r, kernel=None):
    kind = KERNEL_CODES[kernel or params.kernel]
    return (
        scheme.state,
        params.relaxation(),
        scheme.n,
        params.n_threads,
        rank,
        kind,
        max_updates,
        state.counter,
        state.stop,
        agent_seed(params.seed, rank),
        scheme.has_refresh,
        np.zeros(scheme.n),
        log_i,
        log_r,
        should_yield(params.n_threads),
    )


_NO_LOG = np.zeros(0, dtype=np.int64)


def _warm_up(loop, scheme, params):
    # compile for these argument types outside the timed region
    tmp = SolverState(scheme.x)
    loop(*_agent_args(scheme, params, 0, tmp, 0, _NO_LOG, _NO_LOG))


def run_agent(state, scheme, params, rank, kernel=None, max_updates=None, log=None):
    """Run one agent loop in the calling thread; returns its update count."""
    if not getattr(scheme, "coordinate_friendly", False):
        raise ConfigurationError(f"{type(scheme).__name__} has no coordinate path")
    if not 0 <= rank < params.n_threads:
        raise ValueError(f"rank {rank} out of range for {params.n_threads} agents")
    loop = agent_loop(scheme.kernels.step, scheme.kernels.refresh)
    limit = params.max_epoch * scheme.n if max_updates is None else int(max_updates)
    log_i, log_r = (_NO_LOG, _NO_LOG) if log is None else log
    return int(loop(*_agent_args(scheme, params, rank, state, limit, log_i, log_r, kernel)))


def run_async(scheme, params, record_writes=False):
    """Asynchronous run: agents update the shared iterate without waiting.

    Parameters
    ----------
    scheme : Scheme
        A coordinate-friendly scheme; its iterate is updated in place.
    params : Params
    record_writes : bool
        Keep a ``(coordinate, rank)`` row for every update in the report.
    """
    _check_scheme(scheme, params)
    if not scheme.coordinate_friendly:
        raise ConfigurationError(f"{type(scheme).__name__} does not support asynchronous coordinate updates")
    p = params.n_threads
    n = scheme.n
    max_updates = params.max_epoch * n
    loop = agent_loop(scheme.kernels.step, scheme.kernels.refresh)
    scheme.prepare()
    _warm_up(loop, scheme, params)

    state = SolverState(scheme.x)
    if record_writes:
        log_i = np.full(max_updates, -1, dtype=np.int64)
        log_r = np.full(max_updates, -1, dtype=np.int64)
    else:
        log_i = log_r = _NO_LOG
    counts = [0] * p
    errors = []

    def work(rank, args):
        try:
            counts[rank] = int(loop(*args))
        except BaseException as exc:  # surfaced after join
            errors.append(exc)
            state.request_stop()

    t0 = time.perf_counter()
    rec = _Recorder(scheme, state, t0)
    first = rec.record(scheme.x.copy(), 0.0)
    if max_updates == 0 or first.residual < params.tol:
        state.request_stop()
    threads = [
        threading.Thread(target=work, args=(r, _agent_args(scheme, params, r, state, max_updates, log_i, log_r)))
        for r in range(p)
    ]
    start = time.perf_counter()
    if not state.stopped:
        for t in threads:
            t.start()
    every = params.check_interval * n
    next_check = every
    while any(t.is_alive() for t in threads):
        done = state.updates
        if done >= next_check and not state.stopped:
            snap = scheme.x.copy()
            r = rec.record(snap, min(done, max_updates) / n)
            if r.residual < params.tol:
                state.request_stop()
            next_check = (done // every + 1) * every
        time.sleep(POLL_SECONDS)
    for t in threads:
        if t.ident is not None:
            t.join()
    wall = time.perf_counter() - start
    if errors:
        raise errors[0]
    if not state.trace or state.updates > 0:
        rec.record(scheme.x.copy(), min(state.updates, max_updates) / max(n, 1))
    wlog = np.stack([log_i, log_r], axis=1) if record_writes else None
    return _finish(scheme, state, wall, params, wlog)


def _round_blocks(params, rnd):
    p = params.n_threads
    if params.kernel == "random_block":
        return np.random.default_rng([params.seed, rnd]).permutation(p)
    return np.arange(p)


def run_sync(scheme, params):
    """Synchronous run: Jacobi-style rounds separated by barriers.

    One round is one epoch. For schemes with several phases (factor blocks
    of NMF) each phase is a compute/apply/rebuild cycle of its own and
    later phases see the updated earlier blocks.
    """
    _check_scheme(scheme, params)
    if params.kernel == "gauss_seidel":
        raise ConfigurationError("the gauss_seidel kernel is only meaningful in async mode")
    p = params.n_threads
    n = scheme.n
    eta_r = params.relaxation()
    scheme.prepare()
    state = SolverState(scheme.x)
    coord = scheme.coordinate_friendly
    phases = scheme.phases() if coord else [(0, n)]
    stage = np.zeros(n)
    barrier = threading.Barrier(p + 1)
    errors = []
    ctl = {"stop": False, "round": 0, "blocks": np.arange(p), "prev": math.inf}

    def agent(rank):
        try:
            while True:
                barrier.wait()  # controller decided
                if ctl["stop"]:
                    return
                blk_id = int(ctl["blocks"][rank])
                for lo, hi in phases:
                    own = block_partition(hi - lo, p, blk_id)
                    a, b = lo + own.start, lo + own.stop
                    if coord and b > a:
                        scheme.compute_block(a, b, stage)
                    barrier.wait()
                    if coord and b > a:
                        scheme.apply_block(a, b, stage, eta_r)
                    barrier.wait()
                    if coord:
                        scheme.refresh_cache_block(rank, p)
                    barrier.wait()
                    barrier.wait()  # controller refresh
        except threading.BrokenBarrierError:
            return
        except BaseException as exc:
            errors.append(exc)
            barrier.abort()

    t0 = time.perf_counter()
    rec = _Recorder(scheme, state, t0)
    threads = [threading.Thread(target=agent, args=(r,)) for r in range(p)]
    start = time.perf_counter()
    for t in threads:
        t.start()
    try:
        rnd = 0
        while True:
            # controller check at the start of a round
            due = rnd % params.check_interval == 0 or rnd >= params.max_epoch
            stop = rnd >= params.max_epoch
            if due or params.tol > 0 or params.adapt_step:
                x = scheme.x.copy()
                full = scheme.full_map(x)
                res = float(np.linalg.norm(x - full))
                if due or stop or res < params.tol:
                    rec.record(x, rnd, res)
                if res < params.tol:
                    stop = True
                if params.adapt_step and res > ctl["prev"] and hasattr(scheme, "forward"):
                    scheme.update_params(eta_f=scheme.forward.step / 2.0)
                    log.info("round %d: residual grew, forward step halved", rnd)
                ctl["prev"] = res
            ctl["stop"] = stop
            ctl["blocks"] = _round_blocks(params, rnd)
            barrier.wait()
            if stop:
                break
            if coord:
                for _ in phases:
                    barrier.wait()  # targets computed
                    barrier.wait()  # applied
                    barrier.wait()  # cache rows rebuilt
                    if scheme.has_refresh:
                        scheme.refresh()
                    barrier.wait()
            else:
                x = scheme.x
                x[:] = x - eta_r * (x - scheme.full_map(x)) if eta_r != 1.0 else scheme.full_map(x)
                for _ in range(4):
                    barrier.wait()
            state.counter[0] += n
            rnd += 1
    except threading.BrokenBarrierError:
        pass
    finally:
        for t in threads:
            t.join()
    wall = time.perf_counter() - start
    if errors:
        raise errors[0]
    return _finish(scheme, state, wall, params)


def run_serial(scheme, params):
    """Reference run for one agent: Python loop of coordinate steps in cyclic order.

    Uses the same update counting and refresh rule as the async driver, so
    with one thread both produce the same iterates bit for bit.
    """
    _check_scheme(scheme, params)
    if not scheme.coordinate_friendly:
        raise ConfigurationError(f"{type(scheme).__name__} has no coordinate path")
    n = scheme.n
    eta_r = params.eta_r if params.eta_r is not None else 1.0
    scheme.prepare()
    state = SolverState(scheme.x)
    t0 = time.perf_counter()
    rec = _Recorder(scheme, state, t0)
    first = rec.record(scheme.x.copy(), 0)
    refresh = scheme.has_refresh
    for epoch in range(params.max_epoch):
        if first.residual < params.tol:
            break
        for i in range(n):
            scheme.step(i, eta_r)
            if refresh and i == n - 1:
                scheme.refresh()
        state.counter[0] += n
        if (epoch + 1) % params.check_interval == 0 or epoch + 1 == params.max_epoch:
            r = rec.record(scheme.x.copy(), epoch + 1)
            if r.residual < params.tol:
                break
    wall = time.perf_counter() - t0
    return _finish(scheme, state, wall, params)


def solve(scheme, params):
    """Run `scheme` with the driver selected by ``params.mode``."""
    if params.mode == "sync":
        return run_sync(scheme, params)
    return run_async(scheme, params)
