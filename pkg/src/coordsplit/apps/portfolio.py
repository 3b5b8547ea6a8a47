"""Minimum-risk portfolio ``min 0.5 x^T Q x`` s.t. ``x >= 0, sum(x) <= 1, xi^T x >= c``."""

import numpy as np

from ..errors import DimensionError, ParameterError
from ..operators import ProjPortfolio, QuadraticForward, proj_portfolio
from ..schemes import ForwardBackward
from .cli import Job, build_parser, execute, run_cli, to_params

__all__ = ["portfolio_instance", "load_instance", "build_scheme", "setup", "app_portfolio", "main"]

#: diagonal margin added on top of the most negative eigenvalue
SIGMA_MARGIN = 0.1


def portfolio_instance(n, seed=0):
    """Synthetic data: ``xi ~ N(0.01, 1)``, ``Q = (R + R^T)/2 + sigma I``, ``R_ij ~ N(0, 0.1)``.

    `sigma` lifts the smallest eigenvalue of the symmetric part to
    ``SIGMA_MARGIN``. Returns ``(Q, xi)``.
    """
    if n < 1:
        raise ParameterError(f"portfolio size must be positive, got {n}")
    rng = np.random.default_rng(seed)
    xi = rng.normal(0.01, 1.0, n)
    R = rng.normal(0.0, np.sqrt(0.1), (n, n))
    S = 0.5 * (R + R.T)
    sigma = abs(np.linalg.eigvalsh(S)[0]) + SIGMA_MARGIN
    Q = S + sigma * np.eye(n)
    return Q, xi


def load_instance(config):
    """``(Q, xi)`` from ``-data`` (an ``.npz`` with arrays ``Q`` and ``xi``) or synthetic."""
    if config.data:
        with np.load(config.data) as f:
            Q, xi = np.asarray(f["Q"], dtype=np.float64), np.asarray(f["xi"], dtype=np.float64)
        if Q.shape != (xi.size, xi.size):
            raise DimensionError("Q must be square with one row per entry of xi")
        return Q, xi
    return portfolio_instance(config.n, config.seed)


def build_scheme(Q, xi, c, eta_f=None):
    """FBS of the quadratic risk and the exact projection, started at ``P(0)``."""
    proj = ProjPortfolio(xi, c)
    forward = QuadraticForward(Q, eta_f=eta_f)
    return ForwardBackward(forward, proj, x0=proj_portfolio(np.zeros(xi.size), xi, c))


def setup(config):
    params = to_params(config)
    Q, xi = load_instance(config)
    scheme = build_scheme(Q, xi, config.c, config.eta)

    def summary(report):
        x = report.x
        return [
            f"assets: {xi.size}  return: {float(xi @ x):.6g} (required {config.c:g})  budget used: {float(x.sum()):.6g}",
            f"constraint violation: {report.final_violation:.3g}",
        ]

    return Job(scheme, params, config, summary)


def app_portfolio(config, quiet=False):
    return execute(setup(config), quiet)


def main(argv=None):
    parser = build_parser("coordsplit-portfolio", "minimum-risk portfolio with a return floor", extras=("n", "c"))
    return run_cli(parser, setup, argv)
