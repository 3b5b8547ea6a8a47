"""Application executables and the speedup benchmark."""

from importlib import resources

from .bench import bench_speedup
from .cli import CliConfig
from .lasso import app_fbs_lasso
from .logistic import app_fbs_l1_log, app_fbs_l2_log
from .nmf import NmfState, app_nmf, nmf_coord_update
from .portfolio import app_portfolio

__all__ = [
    "CliConfig",
    "NmfState",
    "app_fbs_l1_log",
    "app_fbs_l2_log",
    "app_fbs_lasso",
    "app_nmf",
    "app_portfolio",
    "bench_speedup",
    "bundled_dataset",
    "nmf_coord_update",
]


def bundled_dataset(name="tiny.svm"):
    """Path of a LIBSVM file shipped with the package."""
    return str(resources.files(__package__).joinpath("data", name))
