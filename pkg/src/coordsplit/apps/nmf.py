"""Nonnegative matrix factorization ``min ||A - X^T Y||_F^2`` over ``X, Y >= 0``."""

import numpy as np

from ..errors import ParameterError
from ..operators import NmfForward, ProjNonneg
from ..schemes import ForwardBackward
from .cli import Job, build_parser, execute, run_cli, to_params

__all__ = ["NmfState", "nmf_coord_update", "nmf_instance", "initial_factors", "build_scheme", "setup", "app_nmf", "main"]


class NmfState:
    """Factors ``X`` (k x m), ``Y`` (k x n) and the residual cache ``R = A - X^T Y``.

    ``X``, ``Y`` and ``R`` are views of the flat iterate and the operator
    cache, so coordinate updates through :func:`nmf_coord_update` keep them
    in sync.
    """

    def __init__(self, A, X, Y):
        A = np.asarray(A, dtype=np.float64)
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
            raise ParameterError("X and Y must be matrices with the same number of rows")
        if np.any(X < 0) or np.any(Y < 0):
            raise ParameterError("factors must be nonnegative")
        self.op = NmfForward(A, X.shape[0])
        self.x = self.op.join(X, Y)
        self.op.rebuild_cache(self.x)
        self.op.refresh(self.x)

    @property
    def A(self):
        return self.op.A

    @property
    def X(self):
        return self.x[: self.op.km].reshape(self.op.k, self.op.m)

    @property
    def Y(self):
        return self.x[self.op.km:].reshape(self.op.k, self.op.cols)

    @property
    def R(self):
        return self.op.cache.reshape(self.op.m, self.op.cols)

    def objective(self):
        return float(np.sum(self.R * self.R))

    def relative_fit(self):
        nA = np.linalg.norm(self.A)
        return float(np.linalg.norm(self.R) / nA) if nA > 0 else float(np.linalg.norm(self.R))

    def index(self, which, r, j):
        """Flat coordinate of ``X[r, j]`` (``which="X"``) or ``Y[r, j]``."""
        k, m, n = self.op.k, self.op.m, self.op.cols
        if which == "X":
            if not (0 <= r < k and 0 <= j < m):
                raise IndexError(f"X index ({r}, {j}) out of range for shape ({k}, {m})")
            return r * m + j
        if which == "Y":
            if not (0 <= r < k and 0 <= j < n):
                raise IndexError(f"Y index ({r}, {j}) out of range for shape ({k}, {n})")
            return k * m + r * n + j
        raise ValueError(f"which must be 'X' or 'Y', got {which!r}")

    def gradient(self, which, r, j):
        """Partial derivative of the objective, read from the residual cache."""
        i = self.index(which, r, j)
        return float(self.op.kernels[0](self.op.data, self.x, i))


def nmf_coord_update(state, which, r, j, eta_f):
    """Projected-gradient step on one factor entry, then the residual row/column update.

    ``X[r, j] <- max(X[r, j] - eta_f * g, 0)`` with ``g = -2 Y[r, :] . R[j, :]``
    (symmetric for ``Y[r, j]`` with column ``j`` of `R`). Returns the new value.
    """
    if not eta_f >= 0:
        raise ParameterError(f"step must be nonnegative, got {eta_f}")
    i = state.index(which, r, j)
    g = float(state.op.kernels[0](state.op.data, state.x, i))
    old = float(state.x[i])
    new = max(old - eta_f * g, 0.0)
    state.x[i] = new
    state.op.update_cache_coordinate(old, new, i, point=state.x)
    return new


def nmf_instance(m, n, k, seed=0):
    """``A = Xh^T Yh`` with factor entries drawn from N(0, 1) and thresholded at 0."""
    if k <= 0:
        raise ParameterError(f"factorization rank must be positive, got {k}")
    if m <= 0 or n <= 0:
        raise ParameterError("matrix dimensions must be positive")
    rng = np.random.default_rng(seed)
    Xh = np.maximum(rng.standard_normal((k, m)), 0.0)
    Yh = np.maximum(rng.standard_normal((k, n)), 0.0)
    return Xh.T @ Yh


def initial_factors(A, k, seed=0):
    """Uniform random factors scaled so that ``||X^T Y|| = ||A||``."""
    m, n = A.shape
    rng = np.random.default_rng([seed, 1])
    X = rng.random((k, m))
    Y = rng.random((k, n))
    prod = np.linalg.norm(X.T @ Y)
    if prod > 0:
        s = np.sqrt(np.linalg.norm(A) / prod)
        X *= s
        Y *= s
    return X, Y


def build_scheme(A, k, seed=0, step_factor=None):
    X0, Y0 = initial_factors(A, k, seed)
    forward = NmfForward(A, k) if step_factor is None else NmfForward(A, k, step_factor)
    return ForwardBackward(forward, ProjNonneg(), x0=forward.join(X0, Y0))


def setup(config):
    params = to_params(config)
    A = nmf_instance(config.m, config.n, config.k, config.seed)
    scheme = build_scheme(A, config.k, config.seed, config.eta)
    nA = np.linalg.norm(A)

    def summary(report):
        fit = np.sqrt(max(report.final_objective, 0.0)) / nA if nA > 0 else 0.0
        return [f"matrix: {config.m} x {config.n}  rank: {config.k}  relative fit: {fit:.6g}"]

    return Job(scheme, params, config, summary)


def app_nmf(config, quiet=False):
    return execute(setup(config), quiet)


def main(argv=None):
    parser = build_parser("coordsplit-nmf", "nonnegative matrix factorization of a synthetic matrix", extras=("m", "n", "k"))
    return run_cli(parser, setup, argv)
