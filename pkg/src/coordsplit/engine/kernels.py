"""Coordinate-choice rules and the compiled agent loop.

An agent repeatedly picks a coordinate, claims one slot of the shared update
counter and runs the scheme's in-place step. It stops when the counter budget
is exhausted or the controller raises the stop flag.
"""

import ctypes
import ctypes.util
import os
from functools import lru_cache

import numpy as np
from numba import njit

from .._atomic import atomic_fetch_add, atomic_load, atomic_store
from .._partition import partition

__all__ = [
    "CYCLIC",
    "RANDOM_BLOCK",
    "GAUSS_SEIDEL",
    "KERNEL_CODES",
    "agent_loop",
    "agent_seed",
    "available_cores",
    "should_yield",
    "kernel_cyclic",
    "kernel_random_block",
    "kernel_gauss_seidel",
    "draw_blocks",
]

CYCLIC = 0
RANDOM_BLOCK = 1
GAUSS_SEIDEL = 2
KERNEL_CODES = {"cyclic": CYCLIC, "random_block": RANDOM_BLOCK, "gauss_seidel": GAUSS_SEIDEL}


def _load_yield():
    try:
        fn = ctypes.CDLL(ctypes.util.find_library("c") or None).sched_yield
    except (OSError, AttributeError):
        return None
    fn.restype = ctypes.c_int
    fn.argtypes = []
    return fn


_sched_yield = _load_yield()

if _sched_yield is not None:

    @njit(nogil=True)
    def _yield():
        _sched_yield()

else:  # pragma: no cover - platforms without sched_yield

    @njit(nogil=True)
    def _yield():
        pass


def available_cores():
    """CPUs this process may run on."""
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover
        return os.cpu_count() or 1


def should_yield(n_threads):
    """Agents yield after each sweep when they outnumber the cores."""
    return n_threads > available_cores()


def agent_seed(seed, rank):
    """Seed of agent `rank`'s stream; independent of the number of agents."""
    return int(np.random.SeedSequence([int(seed), int(rank)]).generate_state(1)[0])


@njit(cache=True, nogil=True)
def _draw_blocks(s, p, count, out):
    np.random.seed(s)
    for t in range(count):
        out[t] = np.random.randint(0, p)


def draw_blocks(seed, rank, p, count):
    """The first `count` blocks drawn by agent `rank` under ``random_block``."""
    out = np.empty(int(count), dtype=np.int64)
    _draw_blocks(agent_seed(seed, rank), int(p), int(count), out)
    return out


@lru_cache(maxsize=None)
def agent_loop(step, refresh):
    """Compile the agent loop around a scheme's ``step`` and ``refresh`` kernels.

    The returned function has signature ``(st, eta_r, n, p, rank, kind,
    max_updates, counter, stop, seed, needs_refresh, work, log_i, log_r,
    cooperative)`` and returns the number of updates it performed. With
    `cooperative` set the agent yields its CPU after every sweep, which keeps
    agents interleaved when they share cores. When ``needs_refresh``
    is set, the agent that completes update ``k`` with ``(k + 1) % n == 0``
    runs the refresh kernel (using its private `work` buffer). If `log_i` is
    at least `max_updates` long, ``log_i[k]`` and ``log_r[k]`` receive the
    coordinate and rank of update ``k``.
    """

    @njit(nogil=True)
    def run(st, eta_r, n, p, rank, kind, max_updates, counter, stop, seed, needs_refresh, work, log_i, log_r, cooperative):
        logging = log_i.shape[0] >= max_updates
        if kind == 1:
            np.random.seed(seed)
        done = 0
        if n == 0:
            return done
        lo, hi = partition(n, p, rank)
        if kind == 2:
            lo, hi = 0, n
        if hi <= lo and kind == 0:
            return done
        while True:
            if kind == 1:
                b = np.random.randint(0, p)
                lo, hi = partition(n, p, b)
            for i in range(lo, hi):
                if atomic_load(stop, 0) != 0:
                    return done
                k = atomic_fetch_add(counter, 0, 1)
                if k >= max_updates:
                    atomic_store(stop, 0, 1)
                    return done
                step(st, i, eta_r)
                done += 1
                if logging:
                    log_i[k] = i
                    log_r[k] = rank
                if needs_refresh and (k + 1) % n == 0:
                    refresh(st, work)
            if cooperative:
                _yield()

    return run


def _doc_kernel(name, text):
    def kernel(state, scheme, params, rank, **kw):
        from .driver import run_agent

        return run_agent(state, scheme, params, rank, kernel=name, **kw)

    kernel.__name__ = f"kernel_{name}"
    kernel.__doc__ = text
    return kernel


kernel_cyclic = _doc_kernel(
    "cyclic",
    "Sweep the agent's own block ``block_partition(n, p, rank)`` in ascending order until stopped.",
)
kernel_random_block = _doc_kernel(
    "random_block",
    "Draw a block uniformly from the `p` blocks with the agent's stream, sweep it once, repeat.",
)
kernel_gauss_seidel = _doc_kernel(
    "gauss_seidel",
    "Sweep all coordinates in ascending order repeatedly (agents overlap; async only).",
)
