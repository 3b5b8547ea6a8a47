"""Backward operators: proximal maps and projections.

Separable operators act componentwise through a scalar kernel
``prox(bd, v, i)``; `bd` is the operator's data tuple whose first entry holds
the current threshold parameters, so step-size updates are seen by running
kernels without recompilation.
"""

import numpy as np
import scipy.linalg
from numba import njit

from ..errors import DimensionError, ParameterError
from ..linalg import as_matrix, as_vector, matvec, rmatvec

__all__ = [
    "prox_l1",
    "prox_sum_square",
    "proj_nonneg",
    "BackwardOperator",
    "Identity",
    "ProxL1",
    "ProxSumSquare",
    "ProjNonneg",
    "ProxLeastSquares",
]


def prox_l1(v, t):
    """Soft threshold ``sign(v) * max(|v| - t, 0)``; exactly 0 on ``|v| <= t``."""
    if not np.all(np.asarray(t) >= 0):
        raise ParameterError(f"threshold must be nonnegative, got {t}")
    a = np.asarray(v, dtype=np.float64)
    out = np.sign(a) * np.maximum(np.abs(a) - t, 0.0)
    return float(out) if out.ndim == 0 else out


def prox_sum_square(v, t, lam):
    """Prox of ``t * lam * ||.||_2^2``: ``v / (1 + 2 t lam)``."""
    if not (np.all(np.asarray(t) >= 0) and np.all(np.asarray(lam) >= 0)):
        raise ParameterError("t and lam must be nonnegative")
    out = np.asarray(v, dtype=np.float64) / (1.0 + 2.0 * t * lam)
    return float(out) if out.ndim == 0 else out


def proj_nonneg(v):
    """Projection onto the nonnegative orthant."""
    out = np.maximum(np.asarray(v, dtype=np.float64), 0.0)
    return float(out) if out.ndim == 0 else out


@njit(cache=True, nogil=True)
def _identity_prox(bd, v, i):
    return v


@njit(cache=True, nogil=True)
def _l1_prox(bd, v, i):
    t = bd[0][0]
    if v > t:
        return v - t
    if v < -t:
        return v + t
    return 0.0


@njit(cache=True, nogil=True)
def _sumsq_prox(bd, v, i):
    return v / (1.0 + 2.0 * bd[0][0])


@njit(cache=True, nogil=True)
def _nonneg_prox(bd, v, i):
    return v if v > 0.0 else 0.0


@njit(cache=True, nogil=True)
def _no_refresh(bd, v):
    pass


class BackwardOperator:
    """Base class of proximal/projection operators.

    ``kernels`` is ``(prox, refresh)``: the scalar kernel and a hook that
    recomputes any operator-internal state from a full input vector (only
    non-separable operators need it).
    """

    separable = True
    kernels = (_identity_prox, _no_refresh)

    def __init__(self, step=None):
        self._params = np.zeros(1)
        self._step_value = 0.0 if step is None else float(step)
        self.data = (self._params,)

    @property
    def step(self):
        return self._step_value

    def update_step_size(self, step_size):
        """Set the prox step (thresholds scale with it)."""
        if not step_size > 0:
            raise ParameterError(f"step size must be positive, got {step_size}")
        self._set_step(step_size)

    def _set_step(self, step_size):
        self._step_value = float(step_size)
        self._sync_params()

    def _sync_params(self):
        pass

    def coord(self, v, i):
        """Backward map applied to the scalar input `v` of coordinate `i`."""
        return float(self.kernels[0](self.data, float(v), int(i)))

    apply_scalar = coord

    def full(self, v, out=None):
        v = as_vector(v)
        res = self._full(v)
        if out is None:
            return res
        out[:] = res
        return out

    def _full(self, v):
        raise NotImplementedError

    def value(self, y):
        """The function whose prox this is, evaluated at `y` (indicators give 0)."""
        return 0.0

    def violation(self, y):
        """Largest constraint violation of `y` (0 for unconstrained operators)."""
        return 0.0

    # uniform operator interface; backward operators hold no cache
    def update_cache_coordinate(self, old_xi, new_xi, i, point=None):
        pass

    def update_cache_block(self, x, rank, num_parts):
        pass

    def refresh(self, v):
        pass


class Identity(BackwardOperator):
    """Prox of the zero function."""

    def _full(self, v):
        return v.copy()


class ProxL1(BackwardOperator):
    """Prox of ``step * lam * ||.||_1`` (soft threshold at ``step * lam``)."""

    kernels = (_l1_prox, _no_refresh)

    def __init__(self, lam, step=None):
        if not lam >= 0:
            raise ParameterError(f"lambda must be nonnegative, got {lam}")
        self.lam = float(lam)
        super().__init__(step)
        self._sync_params()

    @property
    def threshold(self):
        return float(self._params[0])

    def _sync_params(self):
        self._params[0] = self._step_value * self.lam

    def _full(self, v):
        return prox_l1(v, self.threshold)

    def value(self, y):
        return self.lam * float(np.sum(np.abs(y)))


class ProxSumSquare(BackwardOperator):
    """Prox of ``step * lam * ||.||_2^2``."""

    kernels = (_sumsq_prox, _no_refresh)

    def __init__(self, lam, step=None):
        if not lam >= 0:
            raise ParameterError(f"lambda must be nonnegative, got {lam}")
        self.lam = float(lam)
        super().__init__(step)
        self._sync_params()

    def _sync_params(self):
        self._params[0] = self._step_value * self.lam

    def _full(self, v):
        return prox_sum_square(v, self._step_value, self.lam)

    def value(self, y):
        return self.lam * float(np.dot(y, y))


class ProjNonneg(BackwardOperator):
    """Projection onto ``{y >= 0}``; independent of the step size."""

    kernels = (_nonneg_prox, _no_refresh)

    def _full(self, v):
        return np.maximum(v, 0.0)

    def violation(self, y):
        return float(max(0.0, -np.min(y))) if len(y) else 0.0


class ProxLeastSquares(BackwardOperator):
    """Prox of ``step * 0.5 * ||A y - b||^2`` (full-vector only).

    Solves ``(I + step A^T A) y = v + step A^T b`` with a Cholesky factor
    that is refactored whenever the step changes.
    """

    separable = False

    def __init__(self, A, b, step=1.0):
        A = as_matrix(A, "A")
        self.A = A.to_dense() if hasattr(A, "to_dense") else A
        self.b = as_vector(b, "b")
        if self.b.shape != (self.A.shape[0],):
            raise DimensionError("b length must equal the number of rows of A")
        self._gram = self.A.T @ self.A
        self._atb = self.A.T @ self.b
        self._factor = None
        super().__init__(step)
        self._sync_params()

    def coord(self, v, i):
        raise NotImplementedError("ProxLeastSquares is not coordinate-separable")

    apply_scalar = coord

    def _sync_params(self):
        t = self._step_value
        self._factor = scipy.linalg.cho_factor(np.eye(self._gram.shape[0]) + t * self._gram)

    def _full(self, v):
        if v.shape != (self.A.shape[1],):
            raise DimensionError("input length must equal the number of columns of A")
        return scipy.linalg.cho_solve(self._factor, v + self._step_value * self._atb)

    def value(self, y):
        r = matvec(self.A, y) - self.b
        return 0.5 * float(r @ r)

    def gradient(self, y):
        return rmatvec(self.A, matvec(self.A, y) - self.b)
