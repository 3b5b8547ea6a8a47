"""Atomic element operations on 1-D numpy arrays, usable inside numba code.

numba exposes no CPU atomics, so these intrinsics emit LLVM ``atomicrmw`` /
atomic load/store instructions directly. Ordering is ``monotonic`` (relaxed):
agents need indivisible updates, not cross-element ordering.
"""

from numba import types
from numba.core import cgutils
from numba.extending import intrinsic


def _element_pointer(context, builder, arrty, arr, idxty, idx):
    ary = context.make_array(arrty)(context, builder, arr)
    idx = context.cast(builder, idx, idxty, types.intp)
    return cgutils.get_item_pointer(context, builder, arrty, ary, [idx])


def _check(arr, dtype):
    if not isinstance(arr, types.Array) or arr.ndim != 1 or arr.dtype != dtype:
        raise TypeError(f"expected a 1-D {dtype} array, got {arr}")


@intrinsic
def atomic_add(typingctx, arr, idx, val):
    """``arr[idx] += val`` as one indivisible operation; returns the old value."""
    _check(arr, types.float64)

    def codegen(context, builder, sig, args):
        ptr = _element_pointer(context, builder, sig.args[0], args[0], sig.args[1], args[1])
        v = context.cast(builder, args[2], sig.args[2], types.float64)
        return builder.atomic_rmw("fadd", ptr, v, "monotonic")

    return types.float64(arr, idx, val), codegen


@intrinsic
def atomic_exchange(typingctx, arr, idx, val):
    """Store ``val`` into ``arr[idx]`` and return the value it replaced."""
    _check(arr, types.float64)

    def codegen(context, builder, sig, args):
        ptr = _element_pointer(context, builder, sig.args[0], args[0], sig.args[1], args[1])
        v = context.cast(builder, args[2], sig.args[2], types.float64)
        return builder.atomic_rmw("xchg", ptr, v, "monotonic")

    return types.float64(arr, idx, val), codegen


@intrinsic
def atomic_fetch_add(typingctx, arr, idx, val):
    """Integer ``arr[idx] += val``; returns the old value."""
    _check(arr, types.int64)

    def codegen(context, builder, sig, args):
        ptr = _element_pointer(context, builder, sig.args[0], args[0], sig.args[1], args[1])
        v = context.cast(builder, args[2], sig.args[2], types.int64)
        return builder.atomic_rmw("add", ptr, v, "monotonic")

    return types.int64(arr, idx, val), codegen


@intrinsic
def atomic_load(typingctx, arr, idx):
    _check(arr, types.int64)

    def codegen(context, builder, sig, args):
        ptr = _element_pointer(context, builder, sig.args[0], args[0], sig.args[1], args[1])
        return builder.load_atomic(ptr, "monotonic", 8)

    return types.int64(arr, idx), codegen


@intrinsic
def atomic_store(typingctx, arr, idx, val):
    _check(arr, types.int64)

    def codegen(context, builder, sig, args):
        ptr = _element_pointer(context, builder, sig.args[0], args[0], sig.args[1], args[1])
        v = context.cast(builder, args[2], sig.args[2], types.int64)
        builder.store_atomic(v, ptr, "monotonic", 8)
        return context.get_dummy_value()

    return types.void(arr, idx, val), codegen
