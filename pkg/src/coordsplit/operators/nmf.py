"""Forward operator of the factorization loss ``||A - X^T Y||_F^2``.

The variable is the flat vector ``concat(X.ravel(), Y.ravel())`` with ``X``
of shape ``(k, m)`` and ``Y`` of shape ``(k, n)``. The cache is the residual
``R = A - X^T Y`` (row-major, ``m * n``). One X entry touches one row of `R`
and one Y entry one column, so a coordinate costs O(n) or O(m).
"""

import numpy as np
from numba import njit

from .._atomic import atomic_add
from ..errors import DimensionError, ParameterError
from .forward import ForwardOperator

__all__ = ["NmfForward"]

#: step is this fraction of ``1 / L_blk`` with ``L_blk = 2 ||Y||_2^2`` (resp. X)
NMF_STEP_FACTOR = 0.45


# fd = (steps[2], R, A, dims[k, m, n], factor[1])


@njit(cache=True, nogil=True)
def _nmf_step(fd, i):
    dims = fd[3]
    return fd[0][0] if i < dims[0] * dims[1] else fd[0][1]


@njit(cache=True, nogil=True)
def _nmf_grad(fd, pt, i):
    R, dims = fd[1], fd[3]
    k, m, n = dims[0], dims[1], dims[2]
    km = k * m
    g = 0.0
    if i < km:
        r, j = i // m, i % m
        yoff = km + r * n
        roff = j * n
        for l in range(n):
            g += pt[yoff + l] * R[roff + l]
    else:
        t = i - km
        r, l = t // n, t % n
        xoff = r * m
        for j in range(m):
            g += pt[xoff + j] * R[j * n + l]
    return -2.0 * g


@njit(cache=True, nogil=True)
def _nmf_cache_add(fd, pt, i, delta):
    R, dims = fd[1], fd[3]
    k, m, n = dims[0], dims[1], dims[2]
    km = k * m
    if i < km:
        r, j = i // m, i % m
        yoff = km + r * n
        roff = j * n
        for l in range(n):
            atomic_add(R, roff + l, -delta * pt[yoff + l])
    else:
        t = i - km
        r, l = t // n, t % n
        xoff = r * m
        for j in range(m):
            atomic_add(R, j * n + l, -delta * pt[xoff + j])


@njit(cache=True, nogil=True)
def _nmf_cache_rows(fd, pt, lo, hi):
    R, A, dims = fd[1], fd[2], fd[3]
    k, m, n = dims[0], dims[1], dims[2]
    km = k * m
    for e in range(lo, hi):
        j, l = e // n, e % n
        s = A[e]
        for r in range(k):
            s -= pt[r * m + j] * pt[km + r * n + l]
        R[e] = s


@njit(cache=True, nogil=True)
def _nmf_refresh(fd, pt):
    steps, dims, factor = fd[0], fd[3], fd[4][0]
    k, m, n = dims[0], dims[1], dims[2]
    km = k * m
    X = pt[:km].reshape((k, m))
    Y = pt[km:].reshape((k, n))
    ny = np.linalg.norm(Y, 2)
    nx = np.linalg.norm(X, 2)
    # a zero block has no curvature; keep the previous step
    if ny > 0.0:
        steps[0] = factor / (2.0 * ny * ny)
    if nx > 0.0:
        steps[1] = factor / (2.0 * nx * nx)


class NmfForward(ForwardOperator):
    """Projected-gradient building block for nonnegative matrix factorization.

    Parameters
    ----------
    A : ndarray, shape (m, n)
        Matrix to factor as ``X^T Y``.
    k : int
        Inner dimension (> 0).
    step_factor : float
        Steps are ``step_factor / (2 ||Y||_2^2)`` for X entries and
        ``step_factor / (2 ||X||_2^2)`` for Y entries, recomputed by
        :meth:`refresh`.

    Notes
    -----
    ``update_step_size`` sets `step_factor`; the actual block steps follow the
    current factors.
    """

    has_refresh = True

    def __init__(self, A, k, step_factor=NMF_STEP_FACTOR):
        A = np.ascontiguousarray(A, dtype=np.float64)
        if A.ndim != 2:
            raise DimensionError(f"A must be a matrix, got {A.ndim} dimensions")
        k = int(k)
        if k <= 0:
            raise ParameterError(f"factorization rank must be positive, got {k}")
        if not step_factor > 0:
            raise ParameterError(f"step factor must be positive, got {step_factor}")
        m, n = A.shape
        self.A = A
        self.k, self.m, self.cols = k, m, n
        super().__init__(k * (m + n), m * n, None)
        self._step = np.ones(2)
        self._factor = np.array([float(step_factor)])
        self._dims = np.array([k, m, n], dtype=np.int64)
        self.data = (self._step, self.cache, A.reshape(-1), self._dims, self._factor)
        self.kernels = (_nmf_grad, _nmf_step, _nmf_cache_add, _nmf_cache_rows, _nmf_refresh)

    # -- layout ---------------------------------------------------------------
    @property
    def km(self):
        return self.k * self.m

    def split(self, x):
        """Views ``(X, Y)`` of the flat variable."""
        x = self._check_point(x)
        return x[: self.km].reshape(self.k, self.m), x[self.km:].reshape(self.k, self.cols)

    def join(self, X, Y):
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        if X.shape != (self.k, self.m) or Y.shape != (self.k, self.cols):
            raise DimensionError("factor shapes do not match (k, m) and (k, n)")
        return np.concatenate([X.ravel(), Y.ravel()])

    def phases(self):
        return [(0, self.km), (self.km, self.n)]

    # -- parameters -------------------------------------------------------------
    @property
    def step(self):
        return float(self._step[0])

    @property
    def steps(self):
        """Current ``(X step, Y step)``."""
        return float(self._step[0]), float(self._step[1])

    @property
    def step_factor(self):
        return float(self._factor[0])

    def _set_step(self, step_size):
        self._factor[0] = float(step_size)

    def default_step(self):
        return NMF_STEP_FACTOR

    def lipschitz(self):
        raise NotImplementedError("block steps follow the factors; see refresh()")

    def _steps_vector(self):
        v = np.empty(self.n)
        v[: self.km] = self._step[0]
        v[self.km:] = self._step[1]
        return v

    # -- evaluation -------------------------------------------------------------
    def residual_matrix(self, x):
        X, Y = self.split(x)
        return self.A - X.T @ Y

    def gradient(self, x):
        X, Y = self.split(x)
        R = self.A - X.T @ Y
        return np.concatenate([(-2.0 * (Y @ R.T)).ravel(), (-2.0 * (X @ R)).ravel()])

    def loss(self, x):
        R = self.residual_matrix(x)
        return float(np.sum(R * R))

    def fresh_cache(self, x):
        return self.residual_matrix(x).ravel()
