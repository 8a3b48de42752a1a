"""Matrix ingestion: Matrix Market coordinate files and R-MAT generation."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .errors import MalformedInputError, UnsupportedFormatError
from .formats import INDEX, CooMatrix
from .semiring import PAIR_DTYPE, Semiring, make_arithmetic

RMAT_PROBS = (0.57, 0.19, 0.19, 0.05)


def _values_for(raw: np.ndarray | None, cols: np.ndarray, s: Semiring) -> np.ndarray:
    """Map file values onto the semiring's scalar type.

    Pattern files (``raw is None``) carry ``s.one``.  Min-select stores the
    file value as weight and the column index as payload.
    """
    n = len(cols)
    if raw is None:
        return s.full(n, s.one)
    if s.dtype == PAIR_DTYPE:
        out = np.empty(n, dtype=PAIR_DTYPE)
        out["w"] = raw
        out["p"] = cols
        return out
    if s.dtype.kind == "b":
        return raw != 0
    if s.dtype.kind == "i":
        return raw.astype(np.int64)
    return raw.astype(np.float64)


def read_matrix_market(path, s: Semiring | None = None) -> CooMatrix:
    """Read a coordinate Matrix Market file into 0-based COO.

    ``symmetric`` (and ``skew-symmetric``) files are mirrored into both
    triangles; diagonal entries are not duplicated.
    """
    s = s or make_arithmetic()
    path = Path(path)
    with path.open("r") as fh:
        header = fh.readline()
        lineno = 1
        parts = header.lower().split()
        if len(parts) < 5 or parts[0] != "%%matrixmarket" or parts[1] != "matrix":
            raise UnsupportedFormatError(f"{path}: missing %%MatrixMarket matrix header")
        layout, field, symmetry = parts[2], parts[3], parts[4]
        if layout != "coordinate":
            raise UnsupportedFormatError(f"{path}: only coordinate layout is supported, got {layout}")
        if field not in ("real", "integer", "pattern", "double"):
            raise UnsupportedFormatError(f"{path}: unsupported field type {field}")
        if symmetry not in ("general", "symmetric", "skew-symmetric"):
            raise UnsupportedFormatError(f"{path}: unsupported symmetry {symmetry}")

        line = fh.readline()
        lineno += 1
        while line and (line.startswith("%") or not line.strip()):
            line = fh.readline()
            lineno += 1
        try:
            nrows, ncols, nnz = (int(x) for x in line.split())
        except ValueError:
            raise MalformedInputError(f"{path}:{lineno}: bad size line {line.strip()!r}") from None
        body_start = lineno
        body = fh.read()

    ncol_expected = 2 if field == "pattern" else 3
    data = _parse_body(body, ncol_expected, path, body_start)
    if len(data) != nnz:
        raise MalformedInputError(f"{path}: header announces {nnz} entries, found {len(data)}")

    rows = data[:, 0].astype(INDEX) - 1
    cols = data[:, 1].astype(INDEX) - 1
    raw = None if field == "pattern" else data[:, 2]
    bad = (rows < 0) | (rows >= nrows) | (cols < 0) | (cols >= ncols)
    if bad.any():
        first = int(np.flatnonzero(bad)[0])
        raise MalformedInputError(
            f"{path}:{_line_of_entry(body, first) + body_start}: index out of bounds"
        )
    if symmetry != "general":
        off = rows != cols
        mirror_raw = None
        if raw is not None:
            mirror_raw = -raw[off] if symmetry == "skew-symmetric" else raw[off]
        rows, cols = np.concatenate([rows, cols[off]]), np.concatenate([cols, rows[off]])
        if raw is not None:
            raw = np.concatenate([raw, mirror_raw])
    return CooMatrix(nrows, ncols, rows, cols, _values_for(raw, cols, s))


def _parse_body(body: str, ncols: int, path, first_line: int) -> np.ndarray:
    try:
        data = np.loadtxt(io.StringIO(body), comments="%", ndmin=2, dtype=np.float64)
    except ValueError:
        data = None
    if data is not None and (data.size == 0 or data.shape[1] == ncols):
        return data.reshape(-1, ncols)
    # slow path only to report the offending line
    for offset, line in enumerate(body.splitlines(), start=1):
        text = line.strip()
        if not text or text.startswith("%"):
            continue
        fields = text.split()
        try:
            [float(x) for x in fields]
        except ValueError:
            raise MalformedInputError(f"{path}:{first_line + offset}: cannot parse {text!r}") from None
        if len(fields) != ncols:
            raise MalformedInputError(
                f"{path}:{first_line + offset}: expected {ncols} fields, got {len(fields)}"
            )
    raise MalformedInputError(f"{path}: malformed body")


def _line_of_entry(body: str, entry: int) -> int:
    seen = -1
    for offset, line in enumerate(body.splitlines(), start=1):
        text = line.strip()
        if text and not text.startswith("%"):
            seen += 1
            if seen == entry:
                return offset
    return 0


def write_matrix_market(path, m: CooMatrix, s: Semiring) -> None:
    """Write ``m`` as a general coordinate file (float-valued semirings only)."""
    if s.dtype.kind not in "fi":
        raise UnsupportedFormatError(f"cannot write {s.name} values to Matrix Market")
    field = "integer" if s.dtype.kind == "i" else "real"
    with Path(path).open("w") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate {field} general\n")
        fh.write(f"{m.nrows} {m.ncols} {m.nnz}\n")
        conv = int if field == "integer" else float
        for r, c, v in zip(m.rows.tolist(), m.cols.tolist(), m.values.tolist()):
            fh.write(f"{r + 1} {c + 1} {conv(v)!r}\n")


def generate_rmat(scale: int, edge_factor: float, seed: int, s: Semiring | None = None) -> CooMatrix:
    """Recursive-matrix graph with Graph500 quadrant probabilities.

    Produces ``round(edge_factor * 2**scale)`` edges on ``2**scale`` vertices.
    Duplicate edges are folded with ``s.add``; self loops are kept.  Values are
    integer weights in [1, 9] (float-valued semirings), ``True`` (boolean) or
    (weight, target) pairs (min-select).
    """
    if scale < 1:
        raise ValueError("scale must be >= 1")
    s = s or make_arithmetic()
    n = 1 << scale
    nedges = int(round(edge_factor * n))
    rng = np.random.default_rng(seed)
    a, b, c, _ = RMAT_PROBS
    rows = np.zeros(nedges, dtype=INDEX)
    cols = np.zeros(nedges, dtype=INDEX)
    for bit in range(scale):
        u = rng.random(nedges)
        row_bit = u >= a + b
        col_bit = ((u >= a) & (u < a + b)) | (u >= a + b + c)
        rows |= row_bit.astype(INDEX) << bit
        cols |= col_bit.astype(INDEX) << bit
    weights = rng.integers(1, 10, size=nedges).astype(np.float64)
    coo = CooMatrix(n, n, rows, cols, _values_for(weights, cols, s))
    return coo.normalize(s)
