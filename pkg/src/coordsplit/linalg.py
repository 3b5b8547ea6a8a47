"""Dense and compressed-column containers with the kernels the operators need.

Dense vectors and matrices are plain C-ordered ``float64`` numpy arrays;
:class:`SparseMatrix` stores columns contiguously so that the cost of touching
one coordinate is proportional to the nonzeros of its column.
"""

import numpy as np
from numba import njit

from .errors import DimensionError

__all__ = [
    "SparseMatrix",
    "as_vector",
    "as_matrix",
    "dot",
    "axpy",
    "col_axpy",
    "matvec",
    "rmatvec",
    "spectral_norm",
]


def as_vector(v, name="vector"):
    """Return `v` as a contiguous 1-D float64 array (no copy when possible)."""
    arr = np.ascontiguousarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def as_matrix(A, name="matrix"):
    """Return a dense matrix operand, or `A` itself if it is sparse."""
    if isinstance(A, SparseMatrix):
        return A
    arr = np.ascontiguousarray(A, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


@njit(cache=True, nogil=True)
def _csc_matvec(m, indptr, indices, data, x, out):
    for r in range(m):
        out[r] = 0.0
    for j in range(indptr.shape[0] - 1):
        xj = x[j]
        if xj != 0.0:
            for k in range(indptr[j], indptr[j + 1]):
                out[indices[k]] += data[k] * xj


@njit(cache=True, nogil=True)
def _csc_rmatvec(indptr, indices, data, y, out):
    for j in range(indptr.shape[0] - 1):
        s = 0.0
        for k in range(indptr[j], indptr[j + 1]):
            s += data[k] * y[indices[k]]
        out[j] = s


@njit(cache=True, nogil=True)
def _csc_col_axpy(indptr, indices, data, j, alpha, c):
    for k in range(indptr[j], indptr[j + 1]):
        c[indices[k]] += alpha * data[k]


@njit(cache=True)
def _csc_transpose(m, indptr, indices, data):
    nnz = indices.shape[0]
    n = indptr.shape[0] - 1
    rowptr = np.zeros(m + 1, dtype=np.int64)
    for k in range(nnz):
        rowptr[indices[k] + 1] += 1
    for r in range(m):
        rowptr[r + 1] += rowptr[r]
    fill = rowptr[:-1].copy()
    colind = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    # ascending column sweep keeps column indices sorted within each row
    for j in range(n):
        for k in range(indptr[j], indptr[j + 1]):
            r = indices[k]
            dst = fill[r]
            colind[dst] = j
            vals[dst] = data[k]
            fill[r] = dst + 1
    return rowptr, colind, vals


class SparseMatrix:
    """Compressed sparse column matrix.

    Parameters
    ----------
    shape : (int, int)
        ``(rows, cols)``.
    indptr : array_like of int
        Column pointers, length ``cols + 1``.
    indices : array_like of int
        Row index of each stored entry; strictly increasing inside a column.
    data : array_like of float
        Stored values.
    check : bool
        Validate the structural invariants (default True).
    """

    def __init__(self, shape, indptr, indices, data, check=True):
        m, n = (int(s) for s in shape)
        self.shape = (m, n)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self._csr = None
        if check:
            self._validate()

    def _validate(self):
        m, n = self.shape
        if m < 0 or n < 0:
            raise DimensionError(f"negative shape {self.shape}")
        p, idx = self.indptr, self.indices
        if p.shape != (n + 1,) or p[0] != 0:
            raise DimensionError("indptr must have length cols+1 and start at 0")
        if np.any(np.diff(p) < 0):
            raise DimensionError("indptr must be nondecreasing")
        if p[-1] != idx.shape[0] or idx.shape != self.data.shape:
            raise DimensionError("indptr[-1], indices and data disagree on nnz")
        if idx.size and (idx.min() < 0 or idx.max() >= m):
            raise DimensionError("row index out of range")
        if idx.size > 1:
            # within a column rows must strictly increase; column starts reset the order
            rising = np.diff(idx) > 0
            starts = np.zeros(idx.size, dtype=bool)
            starts[p[1:-1][p[1:-1] < idx.size]] = True
            if not np.all(rising | starts[1:]):
                raise DimensionError("row indices must strictly increase within a column")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("sparse values must be finite")

    @classmethod
    def from_dense(cls, A):
        A = np.asarray(A, dtype=np.float64)
        if A.ndim != 2:
            raise DimensionError("from_dense expects a 2-D array")
        cols, rows = np.nonzero(A.T)
        return cls.from_triplets(rows, cols, A[rows, cols], A.shape)

    @classmethod
    def from_triplets(cls, rows, cols, vals, shape):
        """Build from COO triplets; duplicate positions are rejected."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        m, n = shape
        if rows.size and (cols.min() < 0 or cols.max() >= n):
            raise DimensionError("column index out of range")
        order = np.lexsort((rows, cols))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size > 1:
            dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if np.any(dup):
                raise ValueError("duplicate entries in triplets")
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, cols + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls((m, n), indptr, rows, vals)

    @classmethod
    def identity(cls, n):
        r = np.arange(n)
        return cls.from_triplets(r, r, np.ones(n), (n, n))

    @property
    def rows(self):
        return self.shape[0]

    @property
    def cols(self):
        return self.shape[1]

    @property
    def nnz(self):
        return int(self.indices.shape[0])

    def column(self, j):
        """Row indices and values of column `j`."""
        if not 0 <= j < self.shape[1]:
            raise IndexError(f"column {j} out of range for {self.shape}")
        s = slice(self.indptr[j], self.indptr[j + 1])
        return self.indices[s], self.data[s]

    def csr(self):
        """Row-compressed copy ``(rowptr, colind, values)``, built once and cached."""
        if self._csr is None:
            self._csr = _csc_transpose(self.shape[0], self.indptr, self.indices, self.data)
        return self._csr

    def row(self, i):
        if not 0 <= i < self.shape[0]:
            raise IndexError(f"row {i} out of range for {self.shape}")
        rowptr, colind, vals = self.csr()
        s = slice(rowptr[i], rowptr[i + 1])
        return colind[s], vals[s]

    def to_dense(self):
        out = np.zeros(self.shape)
        cols = np.repeat(np.arange(self.shape[1]), np.diff(self.indptr))
        out[self.indices, cols] = self.data
        return out

    def __repr__(self):
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


def _shape(A):
    return A.shape


def dot(v, w):
    """Inner product of two equal-length vectors."""
    v = as_vector(v)
    w = as_vector(w)
    if v.shape != w.shape:
        raise DimensionError(f"dot: lengths {v.size} and {w.size} differ")
    return float(np.dot(v, w))


def axpy(alpha, v, w):
    """In-place ``w += alpha * v``; returns `w`."""
    v = as_vector(v)
    if not isinstance(w, np.ndarray) or w.dtype != np.float64 or w.ndim != 1:
        raise TypeError("axpy updates w in place; w must be a 1-D float64 array")
    if v.shape != w.shape:
        raise DimensionError(f"axpy: lengths {v.size} and {w.size} differ")
    if alpha != 0.0:
        w += alpha * v
    return w


def col_axpy(A, j, alpha, c):
    """In-place ``c += alpha * A[:, j]`` touching only the stored column."""
    m, n = _shape(A)
    if not 0 <= j < n:
        raise IndexError(f"column {j} out of range for {n} columns")
    if c.shape != (m,):
        raise DimensionError(f"col_axpy: cache length {c.shape} does not match {m} rows")
    if alpha == 0.0:
        return c
    if isinstance(A, SparseMatrix):
        _csc_col_axpy(A.indptr, A.indices, A.data, j, float(alpha), c)
    else:
        c += alpha * A[:, j]
    return c


def matvec(A, x):
    """``A @ x`` for dense or sparse `A`."""
    x = as_vector(x)
    m, n = _shape(A)
    if x.shape != (n,):
        raise DimensionError(f"matvec: x has length {x.size}, matrix has {n} columns")
    if isinstance(A, SparseMatrix):
        out = np.empty(m)
        _csc_matvec(m, A.indptr, A.indices, A.data, x, out)
        return out
    return A @ x


def rmatvec(A, y):
    """``A.T @ y`` for dense or sparse `A`."""
    y = as_vector(y)
    m, n = _shape(A)
    if y.shape != (m,):
        raise DimensionError(f"rmatvec: y has length {y.size}, matrix has {m} rows")
    if isinstance(A, SparseMatrix):
        out = np.empty(n)
        _csc_rmatvec(A.indptr, A.indices, A.data, y, out)
        return out
    return A.T @ y


def spectral_norm(A, iters=100, seed=0):
    """Estimate ``||A||_2`` by power iteration on ``A.T A``."""
    m, n = _shape(A)
    if m == 0 or n == 0:
        return 0.0
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = rmatvec(A, matvec(A, v))
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return float(np.sqrt(lam))
