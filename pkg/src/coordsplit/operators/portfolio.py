"""Euclidean projection onto ``{y >= 0, sum(y) <= 1, xi^T y >= c}``.

The projection has the form ``y = max(v - mu + nu * xi, 0)`` for multipliers
``mu, nu >= 0``. For fixed ``nu`` the point ``max(v + nu*xi - mu, 0)`` with the
smallest admissible ``mu`` is the projection of ``v + nu*xi`` onto the capped
simplex ``{y >= 0, sum(y) <= 1}``; its return ``h(nu) = xi^T y`` is
nondecreasing in ``nu`` (projections are monotone), so ``nu`` is the root of
``h(nu) = c`` or zero when the return constraint is slack.

Inside coordinate updates the multipliers are cached and refreshed from a
full input vector, which makes one coordinate of the projection O(1).
"""

import numpy as np
from numba import njit

from ..errors import DimensionError, InfeasibleError, ParameterError
from ..linalg import as_vector
from .backward import BackwardOperator

__all__ = ["ProjPortfolio", "proj_portfolio", "portfolio_multipliers", "portfolio_feasible"]

MAX_ITER = 200


@njit(cache=True, nogil=True)
def _cap_shift(v, xi, nu):
    """Smallest mu >= 0 with sum(max(v + nu*xi - mu, 0)) <= 1."""
    n = v.shape[0]
    s = 0.0
    for i in range(n):
        w = v[i] + nu * xi[i]
        if w > 0.0:
            s += w
    if s <= 1.0:
        return 0.0
    # Newton from the left on the convex decreasing piecewise-linear excess;
    # iterates never pass the root and each step drops at least one breakpoint
    mu = 0.0
    for _ in range(n + 2):
        s = 0.0
        k = 0
        for i in range(n):
            w = v[i] + nu * xi[i]
            if w > mu:
                s += w - mu
                k += 1
        if s <= 1.0 or k == 0:
            break
        nxt = mu + (s - 1.0) / k
        if nxt <= mu:
            break
        mu = nxt
    return mu


@njit(cache=True, nogil=True)
def _return_at(v, xi, nu):
    mu = _cap_shift(v, xi, nu)
    h = 0.0
    for i in range(v.shape[0]):
        y = v[i] + nu * xi[i] - mu
        if y > 0.0:
            h += xi[i] * y
    return h, mu


@njit(cache=True, nogil=True)
def _solve_multipliers(v, xi, c, tol, out):
    """Write (mu, nu) of the projection of `v` into `out`; False if no bracket."""
    h0, mu0 = _return_at(v, xi, 0.0)
    if h0 >= c:
        out[0] = mu0
        out[1] = 0.0
        return True
    atol = tol * max(1.0, abs(c))
    lo, flo = 0.0, h0 - c
    hi = 1.0
    h, mu_hi = _return_at(v, xi, hi)
    fhi = h - c
    k = 0
    while fhi < 0.0:
        lo, flo = hi, fhi
        hi *= 2.0
        h, mu_hi = _return_at(v, xi, hi)
        fhi = h - c
        k += 1
        if k > MAX_ITER:
            return False
    # Illinois regula falsi on the bracket [lo, hi]; h is piecewise linear so
    # the secant becomes exact once both ends share a piece
    glo, ghi = flo, fhi
    side = 0
    for _ in range(MAX_ITER):
        if fhi <= atol or hi - lo <= tol * (1.0 + hi):
            break
        nu = hi - ghi * (hi - lo) / (ghi - glo) if ghi != glo else 0.5 * (lo + hi)
        if not (lo < nu < hi):
            nu = 0.5 * (lo + hi)
        h, mu = _return_at(v, xi, nu)
        f = h - c
        if f >= 0.0:
            hi, fhi, ghi, mu_hi = nu, f, f, mu
            if side == 1:
                glo *= 0.5
            side = 1
        else:
            lo, flo, glo = nu, f, f
            if side == -1:
                ghi *= 0.5
            side = -1
    # the upper end always satisfies the return constraint
    out[0] = mu_hi
    out[1] = hi
    return True


@njit(cache=True, nogil=True)
def _portfolio_prox(bd, v, i):
    mult, xi = bd[0], bd[1]
    y = v - mult[0] + mult[1] * xi[i]
    return y if y > 0.0 else 0.0


@njit(cache=True, nogil=True)
def _portfolio_refresh(bd, v):
    mult, xi, params = bd[0], bd[1], bd[2]
    tmp = np.empty(2)
    if _solve_multipliers(v, xi, params[0], params[1], tmp):
        mult[0] = tmp[0]
        mult[1] = tmp[1]


def portfolio_feasible(xi, c):
    """True when some ``y >= 0, sum(y) <= 1`` reaches return `c`."""
    xi = as_vector(xi, "xi")
    best = max(0.0, float(np.max(xi))) if xi.size else 0.0
    return c <= best


def portfolio_multipliers(v, xi, c, tol=1e-10):
    """Multipliers ``(mu, nu)`` of the projection of `v`."""
    v = as_vector(v, "v")
    xi = as_vector(xi, "xi")
    if v.shape != xi.shape:
        raise DimensionError("v and xi must have the same length")
    if not portfolio_feasible(xi, c):
        raise InfeasibleError(f"no portfolio reaches return {c}; max rate is {xi.max() if xi.size else 0.0}")
    out = np.empty(2)
    if not _solve_multipliers(v, xi, float(c), float(tol), out):
        raise InfeasibleError("could not bracket the return multiplier")
    return float(out[0]), float(out[1])


def proj_portfolio(v, xi, c, tol=1e-10):
    """Project `v` onto ``{y >= 0, sum(y) <= 1, xi^T y >= c}``."""
    v = as_vector(v, "v")
    if v.size == 0:
        return v.copy()
    mu, nu = portfolio_multipliers(v, xi, c, tol)
    return np.maximum(v - mu + nu * np.asarray(xi, dtype=np.float64), 0.0)


class ProjPortfolio(BackwardOperator):
    """Projection onto the portfolio constraint set.

    Parameters
    ----------
    xi : ndarray
        Expected return rate of each asset.
    c : float
        Required expected return.
    tol : float
        Tolerance of the multiplier solve.

    Notes
    -----
    The set is not separable. :meth:`full` is exact; the scalar kernel uses
    multipliers cached by the last :meth:`refresh`, which schemes call with
    the full forward output once per epoch (async) or per round (sync).
    """

    separable = False
    has_refresh = True
    kernels = (_portfolio_prox, _portfolio_refresh)

    def __init__(self, xi, c, tol=1e-10):
        self.xi = as_vector(xi, "xi")
        self.c = float(c)
        if not tol > 0:
            raise ParameterError("tol must be positive")
        self.tol = float(tol)
        if not portfolio_feasible(self.xi, self.c):
            raise InfeasibleError(
                f"no portfolio reaches return {self.c}; best is {max(0.0, float(self.xi.max(initial=0.0)))}"
            )
        super().__init__(None)
        self.multipliers = np.zeros(2)
        self._params = np.array([self.c, self.tol])
        self.data = (self.multipliers, self.xi, self._params)

    def _full(self, v):
        if v.shape != self.xi.shape:
            raise DimensionError(f"input has length {v.size}, expected {self.xi.size}")
        return proj_portfolio(v, self.xi, self.c, self.tol)

    def refresh(self, v):
        v = as_vector(v)
        if v.shape != self.xi.shape:
            raise DimensionError(f"input has length {v.size}, expected {self.xi.size}")
        self.multipliers[:] = portfolio_multipliers(v, self.xi, self.c, self.tol)

    def violation(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.size == 0:
            return max(0.0, self.c)
        return float(max(0.0, -y.min(), y.sum() - 1.0, self.c - self.xi @ y))
