"""Coordinate-update operator splitting on shared memory.

Layers, bottom up: :mod:`coordsplit.linalg` (containers and kernels),
:mod:`coordsplit.operators` (forward and backward maps with caches),
:mod:`coordsplit.schemes` (splitting rules), :mod:`coordsplit.engine`
(agents, drivers, controller) and :mod:`coordsplit.apps` (command-line
programs).
"""

from . import engine, io, linalg, operators, schemes
from .engine import Params, RunReport, run_async, run_serial, run_sync, solve
from .errors import (
    ConfigurationError,
    CoordSplitError,
    DimensionError,
    InfeasibleError,
    ParameterError,
    ParseError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "CoordSplitError",
    "DimensionError",
    "InfeasibleError",
    "Params",
    "ParameterError",
    "ParseError",
    "RunReport",
    "engine",
    "io",
    "linalg",
    "operators",
    "run_async",
    "run_serial",
    "run_sync",
    "schemes",
    "solve",
]
