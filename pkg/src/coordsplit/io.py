"""LIBSVM / SVMLight dataset reader and CSV trace writer."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParseError
from .linalg import SparseMatrix

__all__ = ["LabeledDataset", "parse_libsvm", "write_libsvm", "write_trace", "TRACE_HEADER"]

TRACE_HEADER = ("epoch", "seconds", "objective", "residual")


@dataclass
class LabeledDataset:
    """Samples as rows of `A` with labels `b`."""

    A: SparseMatrix
    b: np.ndarray

    def __post_init__(self):
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("number of labels does not match number of rows")

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]


def _parse_label(tok, lineno, real_labels):
    try:
        y = float(tok)
    except ValueError:
        raise ParseError(f"label {tok!r} is not a number", lineno) from None
    if not math.isfinite(y):
        raise ParseError(f"label {tok!r} is not finite", lineno)
    if real_labels:
        return y
    if y == 1.0:
        return 1.0
    if y == -1.0 or y == 0.0:
        return -1.0
    raise ParseError(f"label {tok!r} is not one of -1, 0, +1", lineno)


def parse_libsvm(path, dim_hint=None, real_labels=False):
    """Read a LIBSVM text file.

    Each nonempty line is ``<label> <index>:<value> ...`` with 1-based,
    strictly increasing indices; text after ``#`` is ignored. Binary labels
    ``0`` are mapped to ``-1``.

    Parameters
    ----------
    path : str or path-like
    dim_hint : int, optional
        Lower bound on the feature count; the result has
        ``max(dim_hint, largest index)`` columns.
    real_labels : bool
        Keep labels as arbitrary reals (regression data) instead of
        enforcing ``{-1, +1}``.

    Returns
    -------
    LabeledDataset
    """
    rows, cols, vals, labels = [], [], [], []
    n = 0
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            labels.append(_parse_label(toks[0], lineno, real_labels))
            r = len(labels) - 1
            prev = 0
            for tok in toks[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise ParseError(f"malformed token {tok!r}", lineno)
                try:
                    idx = int(idx_s)
                except ValueError:
                    raise ParseError(f"index {idx_s!r} is not an integer", lineno) from None
                if idx <= 0:
                    raise ParseError(f"index {idx} must be positive (1-based)", lineno)
                if idx <= prev:
                    raise ParseError(f"index {idx} does not increase strictly", lineno)
                try:
                    val = float(val_s)
                except ValueError:
                    raise ParseError(f"value {val_s!r} is not a number", lineno) from None
                if not math.isfinite(val):
                    raise ParseError(f"value {val_s!r} is not finite", lineno)
                prev = idx
                rows.append(r)
                cols.append(idx - 1)
                vals.append(val)
            n = max(n, prev)
    if dim_hint is not None:
        if dim_hint < 0:
            raise ValueError("dim_hint must be nonnegative")
        n = max(n, int(dim_hint))
    A = SparseMatrix.from_triplets(rows, cols, vals, (len(labels), n))
    return LabeledDataset(A, np.asarray(labels, dtype=np.float64))


def write_libsvm(path, dataset):
    """Write `dataset` in LIBSVM format at full float precision."""
    A = dataset.A
    rowptr, colind, rvals = A.csr()
    with open(path, "w") as fh:
        for r, y in enumerate(dataset.b):
            lab = "+1" if y == 1.0 else ("-1" if y == -1.0 else repr(float(y)))
            feats = " ".join(
                f"{j + 1}:{float(v)!r}" for j, v in zip(colind[rowptr[r]:rowptr[r + 1]], rvals[rowptr[r]:rowptr[r + 1]])
            )
            fh.write(f"{lab} {feats}\n" if feats else f"{lab}\n")


def _fmt(v):
    return format(float(v), ".17g")


def write_trace(path, rows):
    """Write ``(epoch, seconds, objective, residual)`` records as CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for rec in rows:
            epoch, seconds, objective, residual = rec
            w.writerow([_fmt(epoch), _fmt(seconds), _fmt(objective), _fmt(residual)])
