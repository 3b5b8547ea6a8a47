"""Forward operators ``x -> x - eta * grad f(x)`` with cached products.

Every forward operator keeps a cache vector (``A @ x`` for the losses,
``Q @ x`` for the quadratic) so that one gradient component costs the
nonzeros of a single column. The numba kernels share one calling
convention, ``kernel(fd, pt, i, ...)``, where `fd` is the operator's data
tuple (``fd[0]`` step sizes, ``fd[1]`` cache) and `pt` is the point the cache
tracks. Schemes compose these kernels into compiled coordinate updates.
"""

import numpy as np
from numba import njit

from .._atomic import atomic_add
from .._partition import block_partition
from ..errors import DimensionError, ParameterError
from ..linalg import SparseMatrix, as_matrix, as_vector, matvec, rmatvec, spectral_norm

__all__ = [
    "ForwardOperator",
    "LogLossForward",
    "SquareLossForward",
    "QuadraticForward",
    "ZeroForward",
    "sigmoid",
]

#: spectral-norm power-iteration count used for default step sizes
POWER_ITERS = 100
#: default forward step is this fraction of 1/L
STEP_FRACTION = 0.9


def sigmoid(t):
    """Overflow-free logistic function ``1 / (1 + exp(-t))``."""
    t = np.asarray(t, dtype=np.float64)
    e = np.exp(-np.abs(t))
    return np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


@njit(cache=True, nogil=True)
def _sigmoid(t):
    if t >= 0:
        return 1.0 / (1.0 + np.exp(-t))
    e = np.exp(t)
    return e / (1.0 + e)


# ---------------------------------------------------------------- shared kernels


@njit(cache=True, nogil=True)
def _scalar_step(fd, i):
    return fd[0][0]


@njit(cache=True, nogil=True)
def _no_refresh(fd, pt):
    pass


@njit(cache=True, nogil=True)
def _no_cache_add(fd, pt, i, delta):
    pass


@njit(cache=True, nogil=True)
def _no_cache_rows(fd, pt, lo, hi):
    pass


@njit(cache=True, nogil=True)
def _zero_grad(fd, pt, i):
    return 0.0


# sparse fd = (step, cache, b, indptr, indices, data, rowptr, colind, rvals)
# dense  fd = (step, cache, b, A)


@njit(cache=True, nogil=True)
def _log_grad_sparse(fd, pt, i):
    c, b, indptr, indices, data = fd[1], fd[2], fd[3], fd[4], fd[5]
    g = 0.0
    for k in range(indptr[i], indptr[i + 1]):
        r = indices[k]
        g -= data[k] * b[r] * _sigmoid(-b[r] * c[r])
    return g


@njit(cache=True, nogil=True)
def _log_grad_dense(fd, pt, i):
    c, b, A = fd[1], fd[2], fd[3]
    g = 0.0
    for r in range(A.shape[0]):
        a = A[r, i]
        if a != 0.0:
            g -= a * b[r] * _sigmoid(-b[r] * c[r])
    return g


@njit(cache=True, nogil=True)
def _sq_grad_sparse(fd, pt, i):
    c, b, indptr, indices, data = fd[1], fd[2], fd[3], fd[4], fd[5]
    g = 0.0
    for k in range(indptr[i], indptr[i + 1]):
        r = indices[k]
        g += data[k] * (c[r] - b[r])
    return g


@njit(cache=True, nogil=True)
def _sq_grad_dense(fd, pt, i):
    c, b, A = fd[1], fd[2], fd[3]
    g = 0.0
    for r in range(A.shape[0]):
        g += A[r, i] * (c[r] - b[r])
    return g


@njit(cache=True, nogil=True)
def _cache_add_sparse(fd, pt, i, delta):
    c, indptr, indices, data = fd[1], fd[3], fd[4], fd[5]
    for k in range(indptr[i], indptr[i + 1]):
        atomic_add(c, indices[k], delta * data[k])


@njit(cache=True, nogil=True)
def _cache_add_dense(fd, pt, i, delta):
    c, A = fd[1], fd[3]
    for r in range(A.shape[0]):
        atomic_add(c, r, delta * A[r, i])


@njit(cache=True, nogil=True)
def _cache_rows_sparse(fd, pt, lo, hi):
    c, rowptr, colind, rvals = fd[1], fd[6], fd[7], fd[8]
    for r in range(lo, hi):
        s = 0.0
        for k in range(rowptr[r], rowptr[r + 1]):
            s += rvals[k] * pt[colind[k]]
        c[r] = s


@njit(cache=True, nogil=True)
def _cache_rows_dense(fd, pt, lo, hi):
    c, A = fd[1], fd[3]
    n = A.shape[1]
    for r in range(lo, hi):
        s = 0.0
        for j in range(n):
            s += A[r, j] * pt[j]
        c[r] = s


# quadratic fd = (step, cache, Q)


@njit(cache=True, nogil=True)
def _quad_grad(fd, pt, i):
    return fd[1][i]


@njit(cache=True, nogil=True)
def _quad_cache_add(fd, pt, i, delta):
    c, Q = fd[1], fd[2]
    # row i equals column i by symmetry and is contiguous
    for r in range(Q.shape[0]):
        atomic_add(c, r, delta * Q[i, r])


@njit(cache=True, nogil=True)
def _quad_cache_rows(fd, pt, lo, hi):
    c, Q = fd[1], fd[2]
    n = Q.shape[1]
    for r in range(lo, hi):
        s = 0.0
        for j in range(n):
            s += Q[r, j] * pt[j]
        c[r] = s


class ForwardOperator:
    """Base class of gradient-step operators.

    Subclasses set ``n`` (dimension), ``cache`` (shared cache vector),
    ``data`` (kernel tuple with the step array first and the cache second)
    and ``kernels``, a tuple ``(grad, step, cache_add, cache_rows, refresh)``
    of numba functions.
    """

    #: refresh kernel must run periodically (e.g. step sizes that track the iterate)
    has_refresh = False

    def __init__(self, n, cache_size, step):
        self.n = int(n)
        self.cache = np.zeros(int(cache_size))
        self._step = np.array([0.0 if step is None else float(step)])
        if step is not None and step < 0:
            raise ParameterError(f"step size must be nonnegative, got {step}")

    # -- parameters ---------------------------------------------------------
    @property
    def step(self):
        return float(self._step[0])

    def update_step_size(self, step_size):
        """Set the forward step used by every later apply."""
        if not step_size > 0:
            raise ParameterError(f"step size must be positive, got {step_size}")
        self._set_step(step_size)

    def _set_step(self, step_size):
        self._step[:] = float(step_size)

    def lipschitz(self):
        raise NotImplementedError

    def default_step(self):
        L = self.lipschitz()
        return STEP_FRACTION / L if L > 0 else 1.0

    def phases(self):
        """Coordinate groups updated one after another in a sync round."""
        return [(0, self.n)]

    # -- evaluation ---------------------------------------------------------
    def _check_point(self, x):
        x = as_vector(x)
        if x.shape != (self.n,):
            raise DimensionError(f"point has length {x.size}, operator expects {self.n}")
        return x

    def _check_index(self, i):
        if not 0 <= i < self.n:
            raise IndexError(f"coordinate {i} out of range for dimension {self.n}")

    def _coord_step(self, i):
        return self.kernels[1](self.data, i)

    def coord(self, x, i):
        """Component `i` of the forward step, using the cache (must match `x`)."""
        x = self._check_point(x)
        self._check_index(i)
        return float(x[i] - self._coord_step(i) * self.kernels[0](self.data, x, i))

    def apply_scalar(self, val, i, point=None):
        """Forward step of component `i` taken from `val` with the cached gradient."""
        self._check_index(i)
        pt = self._kernel_point(point)
        return float(val - self._coord_step(i) * self.kernels[0](self.data, pt, i))

    def _kernel_point(self, point):
        return np.zeros(self.n) if point is None else self._check_point(point)

    def full(self, x, out=None):
        """``x - eta * grad f(x)`` computed from scratch (the cache is not read)."""
        x = self._check_point(x)
        res = x - self._steps_vector() * self.gradient(x)
        if out is None:
            return res
        out[:] = res
        return out

    def _steps_vector(self):
        return self.step

    def gradient(self, x):
        raise NotImplementedError

    def loss(self, x):
        raise NotImplementedError

    # -- cache maintenance --------------------------------------------------
    def update_cache_coordinate(self, old_xi, new_xi, i, point=None):
        """Fold the change of coordinate `i` from `old_xi` to `new_xi` into the cache."""
        self._check_index(i)
        delta = float(new_xi) - float(old_xi)
        if delta != 0.0:
            self.kernels[2](self.data, self._kernel_point(point), i, delta)

    def update_cache_block(self, x, rank, num_parts):
        """Recompute the cache entries in block `rank` of `num_parts` from `x`.

        The cache is partitioned by entries (rows), so concurrent callers with
        different ranks write disjoint memory; all ranks together rebuild the
        whole cache exactly.
        """
        x = self._check_point(x)
        blk = block_partition(self.cache.shape[0], num_parts, rank)
        if len(blk):
            self.kernels[3](self.data, x, blk.start, blk.stop)

    def rebuild_cache(self, x):
        x = self._check_point(x)
        self.kernels[3](self.data, x, 0, self.cache.shape[0])

    def refresh(self, x):
        self.kernels[4](self.data, self._check_point(x))

    def fresh_cache(self, x):
        """The cache value consistent with `x`, without touching the shared cache."""
        raise NotImplementedError


class ZeroForward(ForwardOperator):
    """The identity map (gradient step of ``f = 0``); has an empty cache."""

    def __init__(self, n):
        super().__init__(n, 0, 0.0)
        self.data = (self._step, self.cache)
        self.kernels = (_zero_grad, _scalar_step, _no_cache_add, _no_cache_rows, _no_refresh)

    def lipschitz(self):
        return 0.0

    def gradient(self, x):
        return np.zeros(self._check_point(x).shape)

    def loss(self, x):
        self._check_point(x)
        return 0.0

    def fresh_cache(self, x):
        return np.zeros(0)


class _LossForward(ForwardOperator):
    """Shared plumbing for losses of the form ``sum_r l(b_r, a_r^T x)``."""

    _kernels_sparse = None
    _kernels_dense = None

    def __init__(self, A, b, eta_f=None):
        A = as_matrix(A, "A")
        b = as_vector(b, "b")
        m, n = A.shape
        if b.shape != (m,):
            raise DimensionError(f"b has length {b.size}, A has {m} rows")
        super().__init__(n, m, eta_f)
        self.A = A
        self.b = b
        if isinstance(A, SparseMatrix):
            rowptr, colind, rvals = A.csr()
            self.data = (self._step, self.cache, b, A.indptr, A.indices, A.data, rowptr, colind, rvals)
            self.kernels = self._kernels_sparse
        else:
            self.data = (self._step, self.cache, b, A)
            self.kernels = self._kernels_dense
        if eta_f is None:
            self._set_step(self.default_step())

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def sample_products(self):
        """The cache ``A @ x`` (one inner product per sample)."""
        return self.cache

    def fresh_cache(self, x):
        return matvec(self.A, self._check_point(x))

    def _norm_sq(self):
        return spectral_norm(self.A, POWER_ITERS) ** 2


class LogLossForward(_LossForward):
    """Gradient step of ``f(x) = sum_r log(1 + exp(-b_r a_r^T x))``.

    Parameters
    ----------
    A : SparseMatrix or ndarray
        Samples as rows.
    b : ndarray
        Labels in ``{-1, +1}``.
    eta_f : float, optional
        Step size; defaults to ``0.9 / L`` with ``L = ||A||_2^2 / 4``.
    """

    _kernels_sparse = (_log_grad_sparse, _scalar_step, _cache_add_sparse, _cache_rows_sparse, _no_refresh)
    _kernels_dense = (_log_grad_dense, _scalar_step, _cache_add_dense, _cache_rows_dense, _no_refresh)

    def lipschitz(self):
        return self._norm_sq() / 4.0

    def gradient(self, x):
        x = self._check_point(x)
        t = self.b * matvec(self.A, x)
        return rmatvec(self.A, -self.b * sigmoid(-t))

    def loss(self, x):
        x = self._check_point(x)
        return float(np.sum(np.logaddexp(0.0, -self.b * matvec(self.A, x))))


class SquareLossForward(_LossForward):
    """Gradient step of ``f(x) = 0.5 * ||A x - b||^2``; default step ``0.9 / ||A||_2^2``."""

    _kernels_sparse = (_sq_grad_sparse, _scalar_step, _cache_add_sparse, _cache_rows_sparse, _no_refresh)
    _kernels_dense = (_sq_grad_dense, _scalar_step, _cache_add_dense, _cache_rows_dense, _no_refresh)

    def lipschitz(self):
        return self._norm_sq()

    def gradient(self, x):
        x = self._check_point(x)
        return rmatvec(self.A, matvec(self.A, x) - self.b)

    def loss(self, x):
        x = self._check_point(x)
        r = matvec(self.A, x) - self.b
        return 0.5 * float(r @ r)


class QuadraticForward(ForwardOperator):
    """Gradient step of ``f(x) = 0.5 * x^T Q x`` for symmetric positive definite `Q`.

    The cache holds ``Q @ x``, so a coordinate of the step costs O(1) and a
    cache update costs one row of `Q`.
    """

    kernels = (_quad_grad, _scalar_step, _quad_cache_add, _quad_cache_rows, _no_refresh)

    def __init__(self, Q, eta_f=None):
        Q = np.ascontiguousarray(Q, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionError(f"Q must be square, got shape {Q.shape}")
        scale = max(1.0, float(np.max(np.abs(Q)))) if Q.size else 1.0
        if Q.size and np.max(np.abs(Q - Q.T)) > 1e-12 * scale:
            raise ParameterError("Q must be symmetric")
        super().__init__(Q.shape[0], Q.shape[0], eta_f)
        self.Q = Q
        self.data = (self._step, self.cache, Q)
        if eta_f is None:
            self._set_step(self.default_step())

    def lipschitz(self):
        return spectral_norm(self.Q, POWER_ITERS)

    def gradient(self, x):
        return self.Q @ self._check_point(x)

    def loss(self, x):
        x = self._check_point(x)
        return 0.5 * float(x @ (self.Q @ x))

    def fresh_cache(self, x):
        return self.Q @ self._check_point(x)
