"""Sparse storage formats and the conversions between them.

All index arrays are int64.  Matrices are plain frozen dataclasses over numpy
arrays and are treated as immutable once built; conversions always return
new objects (``reinterpret_transpose`` shares the arrays, by design).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MalformedInputError
from .semiring import PAIR_DTYPE, Semiring, segmented_fold

INDEX = np.int64


def _idx(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=INDEX)


@dataclass(frozen=True)
class CooMatrix:
    nrows: int
    ncols: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    @classmethod
    def from_tuples(cls, nrows, ncols, tuples, s: Semiring) -> "CooMatrix":
        tuples = list(tuples)
        rows = _idx([t[0] for t in tuples])
        cols = _idx([t[1] for t in tuples])
        values = s.asarray([t[2] for t in tuples])
        m = cls(int(nrows), int(ncols), rows, cols, values)
        m.check_bounds()
        return m

    @classmethod
    def empty(cls, nrows, ncols, s: Semiring) -> "CooMatrix":
        z = np.zeros(0, dtype=INDEX)
        return cls(int(nrows), int(ncols), z, z.copy(), np.zeros(0, dtype=s.dtype))

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    def check_bounds(self) -> None:
        if not (len(self.rows) == len(self.cols) == len(self.values)):
            raise MalformedInputError("row, col and value arrays differ in length")
        if self.nnz == 0:
            return
        if self.rows.min() < 0 or self.rows.max() >= self.nrows:
            raise MalformedInputError(f"row index out of bounds for {self.nrows} rows")
        if self.cols.min() < 0 or self.cols.max() >= self.ncols:
            raise MalformedInputError(f"column index out of bounds for {self.ncols} columns")

    def tuples(self, s: Semiring | None = None):
        vals = self.values
        conv = s.to_python if s is not None else (lambda v: v)
        return [(int(r), int(c), conv(v)) for r, c, v in zip(self.rows, self.cols, vals)]

    def normalize(self, s: Semiring) -> "CooMatrix":
        """Row-major sorted, duplicates folded in input order, zeros dropped."""
        return _fold_coo(self, s, row_major=True)


@dataclass(frozen=True)
class CscMatrix:
    nrows: int
    ncols: int
    colptr: np.ndarray
    rowids: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    def validate(self) -> None:
        _check_compressed(self.colptr, self.rowids, self.values, self.ncols, self.nrows, "column")


@dataclass(frozen=True)
class CsrMatrix:
    nrows: int
    ncols: int
    rowptr: np.ndarray
    colids: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    def validate(self) -> None:
        _check_compressed(self.rowptr, self.colids, self.values, self.nrows, self.ncols, "row")

    def row_ids(self) -> np.ndarray:
        """Expanded row index of every stored entry."""
        return np.repeat(np.arange(self.nrows, dtype=INDEX), np.diff(self.rowptr))


@dataclass(frozen=True)
class DcscMatrix:
    nrows: int
    ncols: int
    jc: np.ndarray
    cp: np.ndarray
    rowids: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    def validate(self) -> None:
        if len(self.cp) != len(self.jc) + 1:
            raise MalformedInputError("cp must have one more entry than jc")
        if len(self.jc) and (self.jc.min() < 0 or self.jc.max() >= self.ncols):
            raise MalformedInputError(f"jc entry outside [0, {self.ncols})")
        if np.any(np.diff(self.jc) <= 0):
            raise MalformedInputError("jc must be strictly increasing")
        if self.cp[0] != 0 or self.cp[-1] != self.nnz:
            raise MalformedInputError("cp must start at 0 and end at nnz")
        if np.any(np.diff(self.cp) <= 0):
            raise MalformedInputError("every column listed in jc must be nonempty")
        _check_minor(self.cp, self.rowids, self.nrows, "column")


def _check_compressed(ptr, idx, values, nmajor, nminor, what) -> None:
    if len(ptr) != nmajor + 1:
        raise MalformedInputError(f"pointer array must have {nmajor + 1} entries, has {len(ptr)}")
    if len(idx) != len(values):
        raise MalformedInputError("index and value arrays differ in length")
    if ptr[0] != 0 or ptr[-1] != len(values):
        raise MalformedInputError("pointer array must start at 0 and end at nnz")
    if np.any(np.diff(ptr) < 0):
        raise MalformedInputError("pointer array must be non-decreasing")
    _check_minor(ptr, idx, nminor, what)


def _check_minor(ptr, idx, nminor, what) -> None:
    if len(idx) == 0:
        return
    if idx.min() < 0 or idx.max() >= nminor:
        raise MalformedInputError(f"index out of bounds for {nminor}")
    # strictly increasing inside each segment
    steps = np.diff(idx)
    seg_start = np.zeros(len(idx), dtype=bool)
    seg_start[ptr[:-1][np.diff(ptr) > 0]] = True
    if np.any((steps <= 0) & ~seg_start[1:]):
        raise MalformedInputError(f"indices must be strictly increasing within each {what}")


def _fold_coo(m: CooMatrix, s: Semiring, row_major: bool) -> CooMatrix:
    s.check(m.values)
    m.check_bounds()
    if m.nnz == 0:
        return CooMatrix(m.nrows, m.ncols, m.rows.copy(), m.cols.copy(), m.values.copy())
    # single int64 key; stable so duplicates keep their input order
    if row_major:
        key = m.rows * m.ncols + m.cols
    else:
        key = m.cols * m.nrows + m.rows
    order = np.argsort(key, kind="stable")
    rows, cols, vals = m.rows[order], m.cols[order], m.values[order]
    new = np.ones(len(rows), dtype=bool)
    new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
    starts = np.flatnonzero(new)
    folded = segmented_fold(vals, starts, s)
    keep = ~s.vzero(folded)
    return CooMatrix(m.nrows, m.ncols, rows[starts][keep], cols[starts][keep], folded[keep])


def coo_to_csc(m: CooMatrix, s: Semiring) -> CscMatrix:
    """Column-major compression; duplicates are folded with ``s.add``."""
    f = _fold_coo(m, s, row_major=False)
    colptr = np.zeros(m.ncols + 1, dtype=INDEX)
    np.cumsum(np.bincount(f.cols, minlength=m.ncols), out=colptr[1:])
    return CscMatrix(m.nrows, m.ncols, colptr, _idx(f.rows), f.values)


def coo_to_csr(m: CooMatrix, s: Semiring) -> CsrMatrix:
    f = _fold_coo(m, s, row_major=True)
    rowptr = np.zeros(m.nrows + 1, dtype=INDEX)
    np.cumsum(np.bincount(f.rows, minlength=m.nrows), out=rowptr[1:])
    return CsrMatrix(m.nrows, m.ncols, rowptr, _idx(f.cols), f.values)


def csc_to_coo(m: CscMatrix) -> CooMatrix:
    cols = np.repeat(np.arange(m.ncols, dtype=INDEX), np.diff(m.colptr))
    return CooMatrix(m.nrows, m.ncols, m.rowids.copy(), cols, m.values.copy())


def csr_to_coo(m: CsrMatrix) -> CooMatrix:
    return CooMatrix(m.nrows, m.ncols, m.row_ids(), m.colids.copy(), m.values.copy())


def dcsc_to_coo(m: DcscMatrix) -> CooMatrix:
    return csc_to_coo(dcsc_decompress(m))


def csc_to_dcsc(m: CscMatrix) -> DcscMatrix:
    counts = np.diff(m.colptr)
    jc = _idx(np.flatnonzero(counts))
    cp = np.zeros(len(jc) + 1, dtype=INDEX)
    np.cumsum(counts[jc], out=cp[1:])
    return DcscMatrix(m.nrows, m.ncols, jc, cp, m.rowids.copy(), m.values.copy())


def dcsc_decompress(m: DcscMatrix) -> CscMatrix:
    """Rebuild a full column pointer array, inserting empty columns."""
    if len(m.jc) and (m.jc.min() < 0 or m.jc.max() >= m.ncols):
        raise MalformedInputError(f"jc entry outside [0, {m.ncols})")
    if len(m.cp) != len(m.jc) + 1:
        raise MalformedInputError("cp must have one more entry than jc")
    counts = np.zeros(m.ncols, dtype=INDEX)
    counts[m.jc] = np.diff(m.cp)
    colptr = np.zeros(m.ncols + 1, dtype=INDEX)
    np.cumsum(counts, out=colptr[1:])
    return CscMatrix(m.nrows, m.ncols, colptr, m.rowids.copy(), m.values.copy())


def reinterpret_transpose(m):
    """Read CSC arrays as CSR (or back), which yields the transpose.

    No entry is touched: the pointer, index and value arrays are shared.
    """
    if isinstance(m, CscMatrix):
        return CsrMatrix(m.ncols, m.nrows, m.colptr, m.rowids, m.values)
    if isinstance(m, CsrMatrix):
        return CscMatrix(m.ncols, m.nrows, m.rowptr, m.colids, m.values)
    raise TypeError(f"cannot reinterpret {type(m).__name__}")


def coo_transpose_swap(m: CooMatrix) -> CooMatrix:
    return CooMatrix(m.ncols, m.nrows, m.cols, m.rows, m.values)


def to_coo(m) -> CooMatrix:
    if isinstance(m, CooMatrix):
        return m
    if isinstance(m, CscMatrix):
        return csc_to_coo(m)
    if isinstance(m, CsrMatrix):
        return csr_to_coo(m)
    if isinstance(m, DcscMatrix):
        return dcsc_to_coo(m)
    raise TypeError(f"not a sparse matrix: {type(m).__name__}")


def to_dense(m, s: Semiring) -> np.ndarray:
    """Dense array with absent entries set to ``s.zero``."""
    c = to_coo(m)
    out = s.full((c.nrows, c.ncols))
    out[c.rows, c.cols] = c.values
    return out


def from_dense(d: np.ndarray, s: Semiring) -> CooMatrix:
    keep = ~s.vzero(d)
    r, c = np.nonzero(keep)
    return CooMatrix(d.shape[0], d.shape[1], _idx(r), _idx(c), d[r, c])


def canonical_value_bits(values: np.ndarray) -> np.ndarray:
    """Per-entry uint64 image of the value bytes (-0.0 folded onto 0.0)."""
    if values.dtype == PAIR_DTYPE:
        w = canonical_value_bits(values["w"])
        return w ^ _mix64(values["p"].view(np.uint64))
    if values.dtype.kind == "f":
        v = values.astype(np.float64) + 0.0
        return v.view(np.uint64)
    return values.astype(np.int64).view(np.uint64)


def _mix64(x: np.ndarray) -> np.ndarray:
    # splitmix64 finaliser
    with np.errstate(over="ignore"):
        z = x.astype(np.uint64) + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def content_checksum(m) -> int:
    """Order-independent 64-bit hash over (row, col, value bits)."""
    c = to_coo(m)
    h = _mix64(c.rows.view(np.uint64))
    with np.errstate(over="ignore"):
        h = _mix64(h ^ c.cols.view(np.uint64))
        h = _mix64(h ^ canonical_value_bits(c.values))
        total = np.sum(h, dtype=np.uint64) + np.uint64(c.nrows) * np.uint64(0x100000001B3)
        total = total ^ _mix64(np.array([c.ncols], dtype=np.uint64))[0]
    return int(total)
