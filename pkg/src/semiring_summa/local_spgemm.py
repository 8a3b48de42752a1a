"""Serial semiring SpGEMM: an expand-sort-compress kernel and a dense oracle."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError
from .formats import INDEX, CsrMatrix, coo_to_csr, from_dense, to_dense
from .semiring import Semiring, segmented_fold

DEFAULT_CHUNK = 4096


def _check_operands(a: CsrMatrix, b: CsrMatrix, s: Semiring) -> None:
    if a.ncols != b.nrows:
        raise ShapeError(f"cannot multiply {a.nrows}x{a.ncols} by {b.nrows}x{b.ncols}")
    s.check(a.values)
    s.check(b.values)


def _empty(nrows, ncols, s) -> CsrMatrix:
    z = np.zeros(0, dtype=INDEX)
    return CsrMatrix(nrows, ncols, np.zeros(nrows + 1, dtype=INDEX), z, np.zeros(0, dtype=s.dtype))


def _expand(a: CsrMatrix, b: CsrMatrix, lo: int, hi: int, a_rows: np.ndarray, s: Semiring):
    """Partial products of A's nonzeros lo..hi against the matching rows of B."""
    k = a.colids[lo:hi]
    counts = b.rowptr[k + 1] - b.rowptr[k]
    total = int(counts.sum())
    if total == 0:
        return None
    owner = np.repeat(np.arange(hi - lo), counts)
    # position of every expanded product inside B's arrays
    first = np.repeat(b.rowptr[k], counts)
    offset = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    bpos = first + offset
    rows = a_rows[lo:hi][owner]
    cols = b.colids[bpos]
    vals = s.vmul(a.values[lo:hi][owner], b.values[bpos])
    return rows, cols, vals


def esc_multiply(
    a: CsrMatrix,
    b: CsrMatrix,
    s: Semiring,
    chunk_size: int = DEFAULT_CHUNK,
    seed: CsrMatrix | None = None,
) -> CsrMatrix:
    """C = A*B over ``s`` with a chunked expand / sort / compress pipeline.

    A's nonzeros are cut into contiguous chunks of ``chunk_size``.  Each chunk
    expands its products, stable-sorts them by (row, col) and compresses rows
    that lie wholly inside the chunk.  Rows cut by a chunk boundary keep their
    raw products so that the final row merge folds them in one sequential
    pass.  Every output entry is therefore the left fold, in ascending inner
    index, of its partial products, independent of ``chunk_size``.

    With ``seed`` the result is ``seed + A*B`` where each entry's fold starts
    from the seed value, i.e. accumulation continues exactly where an earlier
    product over smaller inner indices stopped.
    """
    _check_operands(a, b, s)
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive")
    if seed is not None:
        if seed.shape != (a.nrows, b.ncols):
            raise ShapeError(f"seed of shape {seed.shape} does not match output {(a.nrows, b.ncols)}")
        s.check(seed.values)
    if a.nnz == 0 or b.nnz == 0:
        return seed if seed is not None else _empty(a.nrows, b.ncols, s)

    a_rows = a.row_ids()
    pieces = []
    # rows already holding seed values must fold raw products onto the seed
    seeded_rows = np.zeros(a.nrows, dtype=bool)
    if seed is not None and seed.nnz:
        pieces.append((seed.row_ids(), seed.colids, seed.values))
        seeded_rows[np.diff(seed.rowptr) > 0] = True
    for lo in range(0, a.nnz, chunk_size):
        hi = min(lo + chunk_size, a.nnz)
        expanded = _expand(a, b, lo, hi, a_rows, s)
        if expanded is None:
            continue
        rows, cols, vals = expanded
        order = np.argsort(rows * b.ncols + cols, kind="stable")
        rows, cols, vals = rows[order], cols[order], vals[order]

        # rows shared with a neighbouring chunk stay uncompressed
        shared = seeded_rows[rows]
        if lo > 0 and a_rows[lo - 1] == a_rows[lo]:
            shared |= rows == a_rows[lo]
        if hi < a.nnz and a_rows[hi] == a_rows[hi - 1]:
            shared |= rows == a_rows[hi - 1]

        inner = ~shared
        r, c, v = rows[inner], cols[inner], vals[inner]
        if len(r):
            new = np.ones(len(r), dtype=bool)
            new[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
            starts = np.flatnonzero(new)
            pieces.append((r[starts], c[starts], segmented_fold(v, starts, s)))
        if shared.any():
            pieces.append((rows[shared], cols[shared], vals[shared]))

    if not pieces:
        return _empty(a.nrows, b.ncols, s)

    # row-wise merge across chunks; chunk order is ascending inner index
    rows = np.concatenate([p[0] for p in pieces])
    cols = np.concatenate([p[1] for p in pieces])
    vals = np.concatenate([p[2] for p in pieces])
    order = np.argsort(rows * b.ncols + cols, kind="stable")
    rows, cols, vals = rows[order], cols[order], vals[order]
    new = np.ones(len(rows), dtype=bool)
    new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
    starts = np.flatnonzero(new)
    folded = segmented_fold(vals, starts, s)
    keep = ~s.vzero(folded)
    rows, cols, folded = rows[starts][keep], cols[starts][keep], folded[keep]

    rowptr = np.zeros(a.nrows + 1, dtype=INDEX)
    np.cumsum(np.bincount(rows, minlength=a.nrows), out=rowptr[1:])
    return CsrMatrix(a.nrows, b.ncols, rowptr, cols.astype(INDEX), folded)


def dense_multiply(da: np.ndarray, db: np.ndarray, s: Semiring) -> np.ndarray:
    """Dense product over ``s``; accumulates over the inner index in order."""
    if da.shape[1] != db.shape[0]:
        raise ShapeError(f"cannot multiply {da.shape} by {db.shape}")
    out = s.full((da.shape[0], db.shape[1]))
    for k in range(da.shape[1]):
        out = s.vadd(out, s.vmul(da[:, k : k + 1], db[k : k + 1, :]))
    return out


def naive_multiply(a: CsrMatrix, b: CsrMatrix, s: Semiring) -> CsrMatrix:
    """Reference product through dense arrays; for verification only."""
    _check_operands(a, b, s)
    dense = dense_multiply(to_dense(a, s), to_dense(b, s), s)
    return coo_to_csr(from_dense(dense, s), s)


def flops(a: CsrMatrix, b: CsrMatrix) -> int:
    """Number of partial products A*B expands to."""
    if a.nnz == 0:
        return 0
    return int((b.rowptr[a.colids + 1] - b.rowptr[a.colids]).sum())
