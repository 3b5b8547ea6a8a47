"""Lasso ``min 0.5 ||A x - b||^2 + lambda ||x||_1`` with a dense design matrix."""

import numpy as np

from ..io import parse_libsvm
from ..operators import ProxL1, SquareLossForward
from ..schemes import ForwardBackward
from .cli import Job, build_parser, execute, needs_data, run_cli, to_params

__all__ = ["setup", "app_fbs_lasso", "main"]


def setup(config):
    needs_data(config)
    params = to_params(config)
    ds = parse_libsvm(config.data, dim_hint=config.dim, real_labels=True)
    forward = SquareLossForward(ds.A.to_dense(), ds.b, eta_f=config.eta)
    scheme = ForwardBackward(forward, ProxL1(config.lam))

    def summary(report):
        return [f"samples: {ds.m}  features: {ds.n}  nonzeros in x: {int(np.count_nonzero(report.x))}"]

    return Job(scheme, params, config, summary)


def app_fbs_lasso(config, quiet=False):
    return execute(setup(config), quiet)


def main(argv=None):
    parser = build_parser("coordsplit-fbs-lasso", "Lasso by forward-backward splitting (targets are real-valued)")
    return run_cli(parser, setup, argv)
