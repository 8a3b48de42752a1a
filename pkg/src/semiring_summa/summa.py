"""Distributed SpGEMM on a square process grid (2.5D Sparse SUMMA).

Each rank owns one block of A and one of B.  Before any communication the
blocks are *prepared*: decompressed from DCSC if needed and reinterpreted
as CSR of their transpose, then staged onto the device.  The local product
is computed as B^T A^T, which yields C^T; the merge swaps coordinates back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fabric
from .errors import GridError, InternalConsistencyError, ShapeError, UnsupportedSemiringError
from .fabric import Buffer, CommConfig, CostLedger, LatencyModel, MemorySpace, ProcessGrid, RankContext
from .formats import (
    INDEX,
    CooMatrix,
    CscMatrix,
    CsrMatrix,
    DcscMatrix,
    coo_to_csc,
    coo_transpose_swap,
    csc_to_dcsc,
    csr_to_coo,
    dcsc_decompress,
    reinterpret_transpose,
    to_coo,
)
from .local_spgemm import DEFAULT_CHUNK, esc_multiply, flops
from .semiring import Semiring


def split_extents(n: int, q: int) -> np.ndarray:
    """Offsets of ``q`` contiguous ranges covering ``n``; earlier ranges get the extra."""
    base, extra = divmod(n, q)
    sizes = [base + (1 if i < extra else 0) for i in range(q)]
    return np.concatenate([[0], np.cumsum(sizes)]).astype(INDEX)


def half_extent(n: int, r: int, rounds: int) -> tuple[int, int]:
    """Local index range of half ``r``; the first half takes ceil(n/2)."""
    if rounds == 1:
        return 0, n
    mid = (n + 1) // 2
    return (0, mid) if r == 0 else (mid, n)


def _dcsc_worthy(block: CscMatrix) -> bool:
    nonempty = int(np.count_nonzero(np.diff(block.colptr)))
    return nonempty < block.ncols / 2


@dataclass(frozen=True)
class DistMatrix:
    nrows: int
    ncols: int
    grid: ProcessGrid
    row_offsets: np.ndarray
    col_offsets: np.ndarray
    blocks: tuple  # per rank, CscMatrix or DcscMatrix

    def block_extent(self, rank: int) -> tuple[int, int, int, int]:
        i, j = self.grid.coords(rank)
        return (
            int(self.row_offsets[i]),
            int(self.row_offsets[i + 1]),
            int(self.col_offsets[j]),
            int(self.col_offsets[j + 1]),
        )

    @property
    def nnz(self) -> int:
        return sum(b.nnz for b in self.blocks)


def _store_block(block: CscMatrix):
    return csc_to_dcsc(block) if _dcsc_worthy(block) else block


def distribute(m: CooMatrix, grid: ProcessGrid, s: Semiring) -> DistMatrix:
    """Route every tuple to the block that owns it and compress per block."""
    q = grid.q
    ro = split_extents(m.nrows, q)
    co = split_extents(m.ncols, q)
    bi = np.searchsorted(ro, m.rows, side="right") - 1
    bj = np.searchsorted(co, m.cols, side="right") - 1
    owner = bi * q + bj
    blocks = []
    for rank in range(grid.p):
        i, j = grid.coords(rank)
        sel = owner == rank
        local = CooMatrix(
            int(ro[i + 1] - ro[i]),
            int(co[j + 1] - co[j]),
            m.rows[sel] - ro[i],
            m.cols[sel] - co[j],
            m.values[sel],
        )
        blocks.append(_store_block(coo_to_csc(local, s)))
    return DistMatrix(m.nrows, m.ncols, grid, ro, co, tuple(blocks))


def gather(m: DistMatrix) -> CooMatrix:
    """Concatenate blocks with global offsets, row-major ordered."""
    rows, cols, vals = [], [], []
    for rank, block in enumerate(m.blocks):
        r0, _, c0, _ = m.block_extent(rank)
        c = to_coo(block)
        rows.append(c.rows + r0)
        cols.append(c.cols + c0)
        vals.append(c.values)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    order = np.lexsort((cols, rows))
    return CooMatrix(m.nrows, m.ncols, rows[order], cols[order], vals[order])


@dataclass(frozen=True)
class PreparedBlock:
    """Device-resident CSR of a block's transpose."""

    csr: CsrMatrix
    nrows: int
    ncols: int
    space: MemorySpace = MemorySpace.DEVICE

    @property
    def nnz(self) -> int:
        return self.csr.nnz


def require_commutative(s: Semiring) -> None:
    if not s.is_commutative_mul:
        raise UnsupportedSemiringError(
            f"semiring {s.name!r} has non-commutative multiplication; the distributed "
            "path relies on AB = (B^T A^T)^T and is limited to commutative semirings"
        )


def payload_nbytes(nrows: int, nnz: int, s: Semiring) -> int:
    """Size of a CSR piece sent as one contiguous message."""
    return 8 * (nrows + 1) + 8 * nnz + s.itemsize * nnz


def prepare_block(block, s: Semiring, ctx: RankContext | None = None) -> PreparedBlock:
    """Decompress, transpose by reinterpretation, and stage onto the device."""
    require_commutative(s)
    if isinstance(block, DcscMatrix):
        csc = dcsc_decompress(block)
    elif isinstance(block, CscMatrix):
        csc = block
    else:
        raise TypeError(f"expected CSC or DCSC block, got {type(block).__name__}")
    csr = reinterpret_transpose(csc)
    if ctx is not None:
        ctx.charge("prepare", ctx.model.copy_h2d(payload_nbytes(csr.nrows, csr.nnz, s)))
    return PreparedBlock(csr, csc.nrows, csc.ncols)


def row_slice(m: CsrMatrix, lo: int, hi: int) -> CsrMatrix:
    a, b = int(m.rowptr[lo]), int(m.rowptr[hi])
    return CsrMatrix(hi - lo, m.ncols, m.rowptr[lo : hi + 1] - a, m.colids[a:b], m.values[a:b])


def col_slice(m: CsrMatrix, lo: int, hi: int) -> CsrMatrix:
    keep = (m.colids >= lo) & (m.colids < hi)
    counts = np.bincount(m.row_ids()[keep], minlength=m.nrows)
    rowptr = np.zeros(m.nrows + 1, dtype=INDEX)
    np.cumsum(counts, out=rowptr[1:])
    return CsrMatrix(m.nrows, hi - lo, rowptr, m.colids[keep] - lo, m.values[keep])


def _serialize(m: CsrMatrix) -> bytes:
    return m.rowptr.tobytes() + m.colids.tobytes() + m.values.tobytes()


def _deserialize(data: bytes, triple, s: Semiring) -> CsrMatrix:
    nrows, ncols, nnz = triple
    p_end = 8 * (nrows + 1)
    i_end = p_end + 8 * nnz
    rowptr = np.frombuffer(data, dtype=INDEX, count=nrows + 1, offset=0)
    colids = np.frombuffer(data, dtype=INDEX, count=nnz, offset=p_end)
    values = np.frombuffer(data, dtype=s.dtype, count=nnz, offset=i_end)
    return CsrMatrix(nrows, ncols, rowptr, colids, values)


def _empty_csr(nrows, ncols, s) -> CsrMatrix:
    return CsrMatrix(nrows, ncols, np.zeros(nrows + 1, INDEX), np.zeros(0, INDEX), np.zeros(0, s.dtype))


def _share(ctx: RankContext, root: int, piece: CsrMatrix | None, scope: str, s: Semiring):
    """Size exchange followed (if nonempty) by the payload broadcast."""
    triple = (piece.nrows, piece.ncols, piece.nnz) if ctx.rank == root else None
    triple = yield from fabric.exchange_sizes(ctx, root, triple, scope)
    nrows, ncols, nnz = triple
    if nnz == 0:
        return _empty_csr(nrows, ncols, s)
    buf = Buffer(MemorySpace.DEVICE, _serialize(piece)) if ctx.rank == root else None
    delivered = yield from fabric.bcast(ctx, root, buf, scope, payload_nbytes(nrows, nnz, s))
    return _deserialize(delivered.data, triple, s)


def merge_partials(parts, s: Semiring, nrows: int, ncols: int) -> CscMatrix:
    """Fold transposed partial products into the local ``nrows x ncols`` block.

    ``parts`` are CSR matrices of C^T, already in accumulation order.
    """
    rows, cols, vals = [], [], []
    for part in parts:
        if part.shape != (ncols, nrows):
            raise InternalConsistencyError(
                f"partial of shape {part.shape} does not match block {nrows}x{ncols} transposed"
            )
        c = coo_transpose_swap(csr_to_coo(part))
        rows.append(c.rows)
        cols.append(c.cols)
        vals.append(c.values)
    if not parts:
        return coo_to_csc(CooMatrix.empty(nrows, ncols, s), s)
    merged = CooMatrix(nrows, ncols, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))
    return coo_to_csc(merged, s)


ACCUMULATE_MODES = ("carry", "partials")


def summa25_multiply(
    a: DistMatrix,
    b: DistMatrix,
    s: Semiring,
    cfg: CommConfig | None = None,
    model: LatencyModel | None = None,
    rounds: int = 2,
    chunk_size: int = DEFAULT_CHUNK,
    accumulate: str = "carry",
):
    """C = A*B on the grid shared by ``a`` and ``b``.

    ``rounds=2`` halves every A block by columns and every B block by rows
    (2.5D); ``rounds=1`` is the plain single-round reference.  Stages run in
    ascending order with both halves of a stage back to back, so the inner
    index is visited in ascending order.

    ``accumulate="carry"`` feeds each local product the running C^T block as
    its seed, so every output entry is one left fold over the global inner
    index and floating point results match the serial kernel bit for bit
    for any grid or round count.  ``accumulate="partials"`` keeps every local
    product separate and folds them all in the final merge.

    Returns ``(C, ledger)``.
    """
    if a.ncols != b.nrows:
        raise ShapeError(f"cannot multiply {a.nrows}x{a.ncols} by {b.nrows}x{b.ncols}")
    if a.grid != b.grid:
        raise GridError("operands are distributed on different grids")
    if rounds not in (1, 2):
        raise ValueError("rounds must be 1 or 2")
    if accumulate not in ACCUMULATE_MODES:
        raise ValueError(f"accumulate must be one of {ACCUMULATE_MODES}")
    require_commutative(s)
    for blk in a.blocks + b.blocks:
        s.check(blk.values)
    grid = a.grid
    q = grid.q
    cfg = cfg or CommConfig()
    model = model or LatencyModel.default()
    carry = accumulate == "carry"

    def program(ctx: RankContext):
        i, j = ctx.row, ctx.col
        with ctx.timed("prepare"):
            own_a = prepare_block(a.blocks[ctx.rank], s, ctx)
            own_b = prepare_block(b.blocks[ctx.rank], s, ctx)
        partials = []
        acc = None
        for k in range(q):
            for r in range(rounds):
                a_root = grid.rank_of(i, k)
                b_root = grid.rank_of(k, j)
                a_piece = b_piece = None
                if ctx.rank == a_root:
                    lo, hi = half_extent(own_a.csr.nrows, r, rounds)
                    a_piece = row_slice(own_a.csr, lo, hi)
                if ctx.rank == b_root:
                    lo, hi = half_extent(own_b.csr.ncols, r, rounds)
                    b_piece = col_slice(own_b.csr, lo, hi)
                a_piece = yield from _share(ctx, a_root, a_piece, "row", s)
                b_piece = yield from _share(ctx, b_root, b_piece, "col", s)
                ctx.note_resident(
                    payload_nbytes(a_piece.nrows, a_piece.nnz, s)
                    + payload_nbytes(b_piece.nrows, b_piece.nnz, s)
                )
                if a_piece.nnz == 0 or b_piece.nnz == 0:
                    ctx.ledger.skipped_multiplies += 1
                    continue
                with ctx.timed("local_multiply"):
                    part = esc_multiply(b_piece, a_piece, s, chunk_size, seed=acc if carry else None)
                ctx.charge("local_multiply", model.multiply_cost(flops(b_piece, a_piece)))
                ctx.ledger.local_multiplies += 1
                if carry:
                    acc = part
                else:
                    ctx.charge("copy", model.copy_d2h(payload_nbytes(part.nrows, part.nnz, s)))
                    partials.append(part)
        if carry and acc is not None:
            ctx.charge("copy", model.copy_d2h(payload_nbytes(acc.nrows, acc.nnz, s)))
            partials = [acc]
        r0, r1, c0, c1 = a.row_offsets[i], a.row_offsets[i + 1], b.col_offsets[j], b.col_offsets[j + 1]
        with ctx.timed("merge"):
            block = merge_partials(partials, s, int(r1 - r0), int(c1 - c0))
        ctx.charge("merge", model.merge_cost(sum(p.nnz for p in partials)))
        return _store_block(block)

    blocks, ledger, _ = fabric.run_program(grid.p, program, cfg, model)
    c = DistMatrix(a.nrows, b.ncols, grid, a.row_offsets, b.col_offsets, tuple(blocks))
    return c, ledger


def square_repeatedly(a: DistMatrix, s: Semiring, times: int, cfg=None, model=None, rounds: int = 2):
    """A^(2^times) by repeated squaring; returns the matrix and every ledger."""
    ledgers: list[CostLedger] = []
    for _ in range(times):
        a, ledger = summa25_multiply(a, a, s, cfg, model, rounds)
        ledgers.append(ledger)
    return a, ledgers
