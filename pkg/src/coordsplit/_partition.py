from numba import njit


@njit(cache=True, nogil=True)
def partition(n, p, rank):
    """Half-open range ``(lo, hi)`` of coordinates owned by `rank` of `p`."""
    base = n // p
    extra = n % p
    lo = rank * base + min(rank, extra)
    size = base + (1 if rank < extra else 0)
    return lo, lo + size


def block_partition(n, p, rank):
    """Split ``range(n)`` into `p` contiguous blocks whose sizes differ by at most one.

    Returns the ``range`` owned by `rank`; the first ``n % p`` ranks get one
    extra coordinate.
    """
    if p < 1:
        raise ValueError(f"number of parts must be >= 1, got {p}")
    if not 0 <= rank < p:
        raise ValueError(f"rank {rank} out of range for {p} parts")
    if n < 0:
        raise ValueError("n must be nonnegative")
    lo, hi = partition(int(n), int(p), int(rank))
    return range(lo, hi)
