"""Kernels, drivers and the controller."""

from .._partition import block_partition
from .driver import controller_residual, run_agent, run_async, run_serial, run_sync, solve
from .kernels import agent_seed, draw_blocks, kernel_cyclic, kernel_gauss_seidel, kernel_random_block
from .params import KERNELS, MODES, Params, RunReport, SolverState, TraceRecord

__all__ = [
    "KERNELS",
    "MODES",
    "Params",
    "RunReport",
    "SolverState",
    "TraceRecord",
    "agent_seed",
    "block_partition",
    "controller_residual",
    "draw_blocks",
    "kernel_cyclic",
    "kernel_gauss_seidel",
    "kernel_random_block",
    "run_agent",
    "run_async",
    "run_serial",
    "run_sync",
    "solve",
]
