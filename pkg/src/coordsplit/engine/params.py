"""Run configuration and results."""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..errors import ParameterError

__all__ = ["Params", "SolverState", "TraceRecord", "RunReport", "KERNELS", "MODES"]

KERNELS = ("cyclic", "random_block", "gauss_seidel")
MODES = ("sync", "async")

#: relaxation used by asynchronous runs with more than one agent
ASYNC_RELAX = 0.5


@dataclass
class Params:
    """Solver parameters.

    Attributes
    ----------
    eta_f : float or None
        Forward step; ``None`` keeps the operator's default.
    eta_r : float or None
        Relaxation in ``(0, 1]``; ``None`` resolves to 0.5 for async runs
        with several agents and 1.0 otherwise.
    max_epoch : int
        Epoch budget; one epoch is ``n`` coordinate updates.
    n_threads : int
        Number of agents.
    kernel : str
        ``"cyclic"``, ``"random_block"`` or ``"gauss_seidel"`` (async only).
    mode : str
        ``"sync"`` or ``"async"``.
    tol : float
        Stop once the fixed-point residual is below this (0 disables).
    seed : int
        Seed of the per-agent random streams.
    check_interval : int
        Epochs between controller checks.
    adapt_step : bool
        Sync only: halve the forward step whenever the residual grows.
    """

    eta_f: Optional[float] = None
    eta_r: Optional[float] = None
    max_epoch: int = 100
    n_threads: int = 1
    kernel: str = "cyclic"
    mode: str = "async"
    tol: float = 0.0
    seed: int = 0
    check_interval: int = 1
    adapt_step: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if int(self.n_threads) != self.n_threads or self.n_threads < 1:
            raise ParameterError(f"number of threads must be a positive integer, got {self.n_threads}")
        if int(self.max_epoch) != self.max_epoch or self.max_epoch < 0:
            raise ParameterError(f"epoch count must be a nonnegative integer, got {self.max_epoch}")
        if int(self.check_interval) != self.check_interval or self.check_interval < 1:
            raise ParameterError(f"check interval must be a positive integer, got {self.check_interval}")
        if self.eta_r is not None and not 0 < self.eta_r <= 1:
            raise ParameterError(f"relaxation must lie in (0, 1], got {self.eta_r}")
        if self.eta_f is not None and not self.eta_f > 0:
            raise ParameterError(f"forward step must be positive, got {self.eta_f}")
        if not self.tol >= 0:
            raise ParameterError(f"tolerance must be nonnegative, got {self.tol}")
        if self.kernel not in KERNELS:
            raise ParameterError(f"unknown kernel {self.kernel!r}; choose from {', '.join(KERNELS)}")
        if self.mode not in MODES:
            raise ParameterError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        self.n_threads = int(self.n_threads)
        self.max_epoch = int(self.max_epoch)
        self.check_interval = int(self.check_interval)
        self.seed = int(self.seed)

    def relaxation(self):
        if self.eta_r is not None:
            return float(self.eta_r)
        return ASYNC_RELAX if self.mode == "async" and self.n_threads > 1 else 1.0


class SolverState:
    """Shared run state: the iterate, update counter, stop flag and trace.

    `counter` and `stop` are one-element int64 arrays accessed atomically by
    the agents; the counter only grows and the stop flag is never cleared.
    """

    def __init__(self, x):
        self.x = x
        self.counter = np.zeros(1, dtype=np.int64)
        self.stop = np.zeros(1, dtype=np.int64)
        self.trace = []

    @property
    def updates(self):
        return int(self.counter[0])

    @property
    def stopped(self):
        return bool(self.stop[0])

    def request_stop(self):
        self.stop[0] = 1


@dataclass(frozen=True)
class TraceRecord:
    epoch: float
    seconds: float
    objective: float
    residual: float

    def __iter__(self):
        return iter((self.epoch, self.seconds, self.objective, self.residual))


@dataclass
class RunReport:
    """Outcome of a run.

    ``trace`` holds one record per controller check; ``x`` is the final
    reported solution and ``write_log`` the optional ``(coordinate, rank)``
    log of async updates in counter order.
    """

    wall_seconds: float
    epochs_completed: float
    final_objective: float
    final_residual: float
    trace: List[TraceRecord] = field(default_factory=list)
    x: Optional[np.ndarray] = None
    updates: int = 0
    final_violation: float = 0.0
    write_log: Optional[np.ndarray] = None
