"""Splitting schemes: single-iteration update rules built from operators.

A coordinate-friendly scheme keeps its iterate and the operator caches in a
state tuple ``st`` and exposes compiled kernels (see :class:`SchemeKernels`)
that the engine drives from many threads:

``target(st, i)``
    ``S_i(x)``, no mutation.
``step(st, i, eta_r)``
    the async path: compute ``S_i``, relax ``x_i <- x_i - eta_r (x_i - S_i)``
    in place and fold the change into the caches. Returns ``S_i``.
``apply_value(st, i, s, eta_r)``
    relax coordinate `i` toward a stored target `s`, with cache update.
``compute_range(st, lo, hi, out)`` / ``apply_range(st, lo, hi, vals, eta_r)``
    the sync paths; ``apply_range`` writes the iterate only and caches are
    rebuilt afterwards with ``cache_rows``.
``cache_rows(st, lo, hi)``
    recompute cache entries ``lo:hi`` from the tracked point.
``refresh(st, work)``
    periodic maintenance (adaptive steps, cached multipliers).

Writes to the iterate use an atomic exchange and the cache delta is taken
against the value actually replaced, so the cache stays consistent with the
iterate even if two agents write the same coordinate.
"""

from collections import namedtuple
from functools import lru_cache

import numpy as np
from numba import njit

from ._atomic import atomic_exchange
from ._partition import block_partition
from .errors import ConfigurationError, DimensionError, ParameterError
from .linalg import as_vector
from .operators.backward import BackwardOperator, Identity
from .operators.forward import ForwardOperator, ZeroForward

__all__ = [
    "Scheme",
    "SchemeKernels",
    "ForwardBackward",
    "BackwardForward",
    "GradientDescent",
    "ProximalPoint",
    "DouglasRachford",
    "PeacemanRachford",
]

SchemeKernels = namedtuple(
    "SchemeKernels", "target step apply_value compute_range apply_range cache_rows refresh"
)


def _relax_value(old, s, eta_r):
    # eta_r == 1 must land on the target exactly
    return s if eta_r == 1.0 else old - eta_r * (old - s)


_relax = njit(cache=True, nogil=True, inline="always")(_relax_value)


@lru_cache(maxsize=None)
def _fbs_kernels(fk, bk, separable):
    grad, stepk, cache_add, cache_rows, frefresh = fk
    prox, brefresh = bk

    @njit(nogil=True)
    def target(st, i):
        x, fd, bd = st[0], st[1], st[2]
        return prox(bd, x[i] - stepk(fd, i) * grad(fd, x, i), i)

    @njit(nogil=True)
    def apply_value(st, i, s, eta_r):
        x, fd = st[0], st[1]
        old = x[i]
        new = _relax(old, s, eta_r)
        if new != old:
            prev = atomic_exchange(x, i, new)
            cache_add(fd, x, i, new - prev)

    @njit(nogil=True)
    def step(st, i, eta_r):
        s = target(st, i)
        apply_value(st, i, s, eta_r)
        return s

    @njit(nogil=True)
    def compute_range(st, lo, hi, out):
        for i in range(lo, hi):
            out[i] = target(st, i)

    @njit(nogil=True)
    def apply_range(st, lo, hi, vals, eta_r):
        x = st[0]
        for i in range(lo, hi):
            x[i] = _relax(x[i], vals[i], eta_r)

    @njit(nogil=True)
    def rows(st, lo, hi):
        cache_rows(st[1], st[0], lo, hi)

    @njit(nogil=True)
    def refresh(st, work):
        x, fd, bd = st[0], st[1], st[2]
        frefresh(fd, x)
        if not separable:
            for j in range(x.shape[0]):
                work[j] = x[j] - stepk(fd, j) * grad(fd, x, j)
            brefresh(bd, work)

    return SchemeKernels(target, step, apply_value, compute_range, apply_range, rows, refresh)


@lru_cache(maxsize=None)
def _bfs_kernels(fk, bk):
    grad, stepk, cache_add, cache_rows, frefresh = fk
    prox, brefresh = bk

    @njit(nogil=True)
    def target(st, i):
        y, fd = st[1], st[2]
        return y[i] - stepk(fd, i) * grad(fd, y, i)

    @njit(nogil=True)
    def apply_value(st, i, s, eta_r):
        x, y, fd, bd = st[0], st[1], st[2], st[3]
        old = x[i]
        new = _relax(old, s, eta_r)
        if new != old:
            atomic_exchange(x, i, new)
            ynew = prox(bd, new, i)
            yprev = atomic_exchange(y, i, ynew)
            if ynew != yprev:
                cache_add(fd, y, i, ynew - yprev)

    @njit(nogil=True)
    def step(st, i, eta_r):
        s = target(st, i)
        apply_value(st, i, s, eta_r)
        return s

    @njit(nogil=True)
    def compute_range(st, lo, hi, out):
        for i in range(lo, hi):
            out[i] = target(st, i)

    @njit(nogil=True)
    def apply_range(st, lo, hi, vals, eta_r):
        x, y, bd = st[0], st[1], st[3]
        for i in range(lo, hi):
            x[i] = _relax(x[i], vals[i], eta_r)
            y[i] = prox(bd, x[i], i)

    @njit(nogil=True)
    def rows(st, lo, hi):
        cache_rows(st[2], st[1], lo, hi)

    @njit(nogil=True)
    def refresh(st, work):
        frefresh(st[2], st[1])

    return SchemeKernels(target, step, apply_value, compute_range, apply_range, rows, refresh)


class Scheme:
    """Base class of splitting schemes.

    Attributes
    ----------
    n : int
        Dimension of the iterate.
    coordinate_friendly : bool
        Whether the compiled coordinate paths are available.
    """

    coordinate_friendly = True

    # -- to be provided by subclasses --------------------------------------------
    @property
    def x(self):
        """The iterate the fixed-point map acts on (shared, mutated in place)."""
        raise NotImplementedError

    def full_map(self, x=None):
        """``S(x)`` evaluated from scratch (``x`` defaults to the iterate)."""
        raise NotImplementedError

    def solution(self, x=None):
        """The point whose objective is reported for iterate `x`."""
        raise NotImplementedError

    def objective(self, x=None):
        raise NotImplementedError

    def update_params(self, params=None, *, eta_f=None):
        raise NotImplementedError

    # -- shared behaviour ------------------------------------------------------------
    def _point(self, x):
        if x is None:
            return self.x.copy()
        x = as_vector(x)
        if x.shape != (self.n,):
            raise DimensionError(f"point has length {x.size}, scheme expects {self.n}")
        return x

    def residual(self, x=None):
        """Fixed-point residual ``||x - S(x)||_2``."""
        x = self._point(x)
        return float(np.linalg.norm(x - self.full_map(x)))

    def violation(self, x=None):
        return 0.0

    def phases(self):
        return [(0, self.n)]

    @property
    def has_refresh(self):
        return False

    def set_point(self, x0):
        x0 = self._point(x0)
        self.x[:] = x0
        self.prepare()

    def prepare(self):
        """Make caches and refreshed quantities consistent with the iterate."""

    def refresh(self):
        pass

    def _extract_eta(self, params, eta_f):
        if params is not None and eta_f is None:
            eta_f = getattr(params, "eta_f", None)
        if eta_f is not None and not eta_f > 0:
            raise ParameterError(f"step size must be positive, got {eta_f}")
        return eta_f


class _CoordinateScheme(Scheme):
    """Schemes driven through compiled coordinate kernels."""

    def _init_common(self, forward, backward):
        if not isinstance(forward, ForwardOperator):
            raise TypeError("forward must be a ForwardOperator")
        if not isinstance(backward, BackwardOperator):
            raise TypeError("backward must be a BackwardOperator")
        self.forward = forward
        self.backward = backward
        self.n = forward.n
        self._work = np.zeros(self.n)
        self._stage = np.zeros(self.n)
        # thresholds of the backward map scale with the forward step
        backward._set_step(forward.step)

    @property
    def cache_len(self):
        return self.forward.cache.shape[0]

    @property
    def has_refresh(self):
        return bool(self.forward.has_refresh or getattr(self.backward, "has_refresh", False))

    def phases(self):
        return self.forward.phases()

    def _check_index(self, i):
        if not 0 <= i < self.n:
            raise IndexError(f"coordinate {i} out of range for dimension {self.n}")
        return int(i)

    @staticmethod
    def _check_relax(eta_r):
        if not 0 < eta_r <= 1:
            raise ParameterError(f"relaxation must lie in (0, 1], got {eta_r}")
        return float(eta_r)

    # -- coordinate paths (Python entry points to the compiled kernels) -----
    def target(self, i):
        """``S_i`` of the current iterate (no mutation)."""
        return float(self.kernels.target(self.state, self._check_index(i)))

    def step(self, i, eta_r=1.0):
        """Async path: relax coordinate `i` in place; returns ``S_i``."""
        return float(self.kernels.step(self.state, self._check_index(i), self._check_relax(eta_r)))

    def apply_value(self, i, s, eta_r=1.0):
        """Relax coordinate `i` toward the stored target `s`, with cache update."""
        self.kernels.apply_value(self.state, self._check_index(i), float(s), self._check_relax(eta_r))

    def compute_block(self, lo, hi, out=None):
        """Sync path: targets of coordinates ``lo:hi`` into ``out[lo:hi]``."""
        out = self._stage if out is None else out
        self.kernels.compute_range(self.state, int(lo), int(hi), out)
        return out

    def apply_block(self, lo, hi, vals, eta_r=1.0):
        """Sync path: relax ``lo:hi`` toward ``vals[lo:hi]``; caches are not touched."""
        self.kernels.apply_range(self.state, int(lo), int(hi), vals, self._check_relax(eta_r))

    def refresh_cache_block(self, rank, num_parts):
        """Rebuild the cache entries owned by `rank` (row partition of the cache)."""
        blk = block_partition(self.cache_len, num_parts, rank)
        if len(blk):
            self.kernels.cache_rows(self.state, blk.start, blk.stop)

    def rebuild_cache(self):
        if self.cache_len:
            self.kernels.cache_rows(self.state, 0, self.cache_len)

    def refresh(self):
        self.kernels.refresh(self.state, self._work)

    def prepare(self):
        self.rebuild_cache()
        self.refresh()

    def update_params(self, params=None, *, eta_f=None):
        """Propagate a new forward step (and the matching prox step)."""
        eta_f = self._extract_eta(params, eta_f)
        if eta_f is None:
            return
        self.forward.update_step_size(eta_f)
        self.backward._set_step(self.forward.step)
        if self.has_refresh:
            self.refresh()


class ForwardBackward(_CoordinateScheme):
    """``S(x) = backward(forward(x))``.

    Parameters
    ----------
    forward : ForwardOperator
    backward : BackwardOperator
        Separable, or non-separable with a cached-state refresh
        (:class:`ProjPortfolio`).
    x0 : ndarray, optional
        Starting point (zeros by default). Copied.
    """

    def __init__(self, forward, backward, x0=None):
        self._init_common(forward, backward)
        if not backward.separable and not getattr(backward, "has_refresh", False):
            raise ConfigurationError(f"{type(backward).__name__} has no coordinate form")
        self._x = np.zeros(self.n) if x0 is None else self._point(x0).copy()
        self.state = (self._x, forward.data, backward.data)
        self.kernels = _fbs_kernels(tuple(forward.kernels), tuple(backward.kernels), bool(backward.separable))
        self.prepare()

    @property
    def x(self):
        return self._x

    def full_map(self, x=None):
        x = self._point(x)
        return self.backward.full(self.forward.full(x))

    def solution(self, x=None):
        return self._point(x).copy()

    def objective(self, x=None):
        y = self.solution(x)
        return self.forward.loss(y) + self.backward.value(y)

    def violation(self, x=None):
        return self.backward.violation(self.solution(x))


class BackwardForward(_CoordinateScheme):
    """``S(x) = forward(backward(x))`` with ``y = backward(x)`` kept alongside `x`.

    The forward cache tracks `y`; the reported solution is `y`.
    """

    def __init__(self, forward, backward, x0=None):
        self._init_common(forward, backward)
        if not backward.separable:
            raise ConfigurationError("backward-forward splitting needs a separable backward operator")
        self._x = np.zeros(self.n) if x0 is None else self._point(x0).copy()
        self.y = np.zeros(self.n)
        self.state = (self._x, self.y, forward.data, backward.data)
        self.kernels = _bfs_kernels(tuple(forward.kernels), tuple(backward.kernels))
        self.prepare()

    @property
    def x(self):
        return self._x

    def prepare(self):
        if self.n:
            self.y[:] = self.backward.full(self._x)
        self.rebuild_cache()
        self.refresh()

    def full_map(self, x=None):
        x = self._point(x)
        return self.forward.full(self.backward.full(x))

    def solution(self, x=None):
        return self.backward.full(self._point(x))

    def objective(self, x=None):
        y = self.solution(x)
        return self.forward.loss(y) + self.backward.value(y)

    def violation(self, x=None):
        return self.backward.violation(self.solution(x))


class GradientDescent(ForwardBackward):
    """``S(x) = x - eta_f grad f(x)``."""

    def __init__(self, forward, x0=None):
        super().__init__(forward, Identity(), x0)


class ProximalPoint(ForwardBackward):
    """``S(x) = prox_{t g}(x)``; the prox step is set with `step`."""

    def __init__(self, backward, n, step=1.0, x0=None):
        if not step > 0:
            raise ParameterError(f"prox step must be positive, got {step}")
        fwd = ZeroForward(n)
        fwd._set_step(step)
        super().__init__(fwd, backward, x0)


class _FullVectorScheme(Scheme):
    """Two-prox schemes iterating an auxiliary `z`; synchronous full updates only."""

    coordinate_friendly = False

    def __init__(self, prox_f, prox_g, n, step=1.0, z0=None):
        for op in (prox_f, prox_g):
            if not isinstance(op, BackwardOperator):
                raise TypeError("prox_f and prox_g must be BackwardOperator instances")
        if not step > 0:
            raise ParameterError(f"prox step must be positive, got {step}")
        self.prox_f = prox_f
        self.prox_g = prox_g
        self.n = int(n)
        self._z = np.zeros(self.n) if z0 is None else self._point(z0).copy()
        self._set_steps(float(step))

    def _set_steps(self, step):
        self.step_size = step
        self.prox_f._set_step(step)
        self.prox_g._set_step(step)

    @property
    def x(self):
        return self._z

    z = x

    def solution(self, x=None):
        return self.prox_g.full(self._point(x))

    def objective(self, x=None):
        y = self.solution(x)
        return self.prox_f.value(y) + self.prox_g.value(y)

    def update_params(self, params=None, *, eta_f=None):
        eta_f = self._extract_eta(params, eta_f)
        if eta_f is not None:
            self._set_steps(float(eta_f))

    def _unsupported(self, *args, **kwargs):
        raise ConfigurationError(f"{type(self).__name__} is exposed as a full-vector scheme only")

    target = step = apply_value = compute_block = apply_block = refresh_cache_block = _unsupported


class DouglasRachford(_FullVectorScheme):
    """``z' = z + prox_f(2 prox_g(z) - z) - prox_g(z)``; solution ``prox_g(z)``."""

    def full_map(self, x=None):
        z = self._point(x)
        g = self.prox_g.full(z)
        return z + self.prox_f.full(2.0 * g - z) - g


class PeacemanRachford(_FullVectorScheme):
    """``z' = (2 prox_f - I)(2 prox_g - I) z``; solution ``prox_g(z)``."""

    def full_map(self, x=None):
        z = self._point(x)
        r = 2.0 * self.prox_g.full(z) - z
        return 2.0 * self.prox_f.full(r) - r
