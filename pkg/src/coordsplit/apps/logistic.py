"""Regularized logistic regression: l1 (soft threshold) and l2 (Tikhonov)."""

import numpy as np

from ..io import parse_libsvm
from ..operators import LogLossForward, ProxL1, ProxSumSquare
from ..schemes import ForwardBackward
from .cli import Job, build_parser, execute, needs_data, run_cli, to_params

__all__ = ["setup_l1", "setup_l2", "app_fbs_l1_log", "app_fbs_l2_log", "main_l1", "main_l2"]


def _setup(config, backward):
    needs_data(config)
    params = to_params(config)
    ds = parse_libsvm(config.data, dim_hint=config.dim)
    forward = LogLossForward(ds.A, ds.b, eta_f=config.eta)
    scheme = ForwardBackward(forward, backward)

    def summary(report):
        return [f"samples: {ds.m}  features: {ds.n}  nonzeros in x: {int(np.count_nonzero(report.x))}"]

    return Job(scheme, params, config, summary)


def setup_l1(config):
    """FBS for ``min sum_r log(1 + exp(-b_r a_r^T x)) + lambda ||x||_1``."""
    return _setup(config, ProxL1(config.lam))


def setup_l2(config):
    """FBS for ``min sum_r log(1 + exp(-b_r a_r^T x)) + lambda ||x||_2^2``."""
    return _setup(config, ProxSumSquare(config.lam))


def app_fbs_l1_log(config, quiet=False):
    return execute(setup_l1(config), quiet)


def app_fbs_l2_log(config, quiet=False):
    return execute(setup_l2(config), quiet)


def main_l1(argv=None):
    parser = build_parser("coordsplit-fbs-l1-log", "l1-regularized logistic regression by forward-backward splitting")
    return run_cli(parser, setup_l1, argv)


def main_l2(argv=None):
    parser = build_parser("coordsplit-fbs-l2-log", "l2-regularized logistic regression by forward-backward splitting")
    return run_cli(parser, setup_l2, argv)
