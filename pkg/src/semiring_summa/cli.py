"""Command-line driver.

    semiring-summa multiply --gen rmat:10:8:42 --semiring minplus --procs 4
    semiring-summa sweep --gen rmat:12:8:1 --procs 9
    semiring-summa verify-corpus --dir ~/suitesparse

Exit status is 0 when everything requested succeeded, 1 when a check
(oracle, corpus) failed and 2 for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .errors import SpgemmError
from .fabric import PHASES, CommConfig, CommMode, LatencyModel, ProcessGrid
from .formats import coo_to_csr, content_checksum
from .local_spgemm import naive_multiply
from .matrix_io import generate_rmat, read_matrix_market
from .semiring import SEMIRINGS, get_semiring
from .summa import distribute, gather, require_commutative, summa25_multiply
from .tuner import (
    Workload,
    default_ladder,
    find_crossover,
    parse_threshold,
    sweep_thresholds,
    write_sweep_table,
)

log = logging.getLogger("semiring_summa")

ORACLE_LIMIT = 4096
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# name -> (rows, cols, nnz after symmetrisation or None)
CORPUS = {
    "rmat": (65536, 65536, None),
    "atmosmodd": (1270432, 1270432, 8814880),
    "delaunay_n22": (4194304, 4194304, 25165738),
    "delaunay_n23": (8388608, 8388608, None),
    "Long_dt_Coup0": (1470152, 1470152, 70219816),
}


def parse_gen(spec: str):
    """``rmat:<scale>:<edgefactor>:<seed>`` -> (scale, edge_factor, seed)."""
    parts = spec.split(":")
    if len(parts) != 4 or parts[0] != "rmat":
        raise ValueError(f"--gen expects rmat:<scale>:<edgefactor>:<seed>, got {spec!r}")
    return int(parts[1]), float(parts[2]), int(parts[3])


def load_matrix(args, s):
    if args.matrix:
        return read_matrix_market(args.matrix, s)
    scale, ef, seed = parse_gen(args.gen)
    return generate_rmat(scale, ef, seed, s)


def load_model(args) -> LatencyModel:
    return LatencyModel.load(args.model) if args.model else LatencyModel.default()


def _add_common(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--matrix", help="Matrix Market coordinate file")
    src.add_argument("--gen", help="generate a matrix, e.g. rmat:12:8:42")
    p.add_argument("--semiring", default="arithmetic", choices=sorted(SEMIRINGS))
    p.add_argument("--procs", type=int, default=4, help="simulated process count (perfect square)")
    p.add_argument("--model", help="latency model file (JSON)")
    p.add_argument("--rounds", type=int, choices=(1, 2), default=2)
    p.add_argument("--report", help="output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semiring-summa", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    m = sub.add_parser("multiply", help="compute A*A and report a cost breakdown")
    _add_common(m)
    m.add_argument("--comm", choices=[c.value for c in CommMode], default="hybrid")
    m.add_argument("--threshold-bytes", type=parse_threshold, default=65536)
    m.add_argument("--iters", type=int, default=4, help="timed iterations after one warm-up")
    m.add_argument("--check-oracle", action="store_true")
    m.add_argument("--omit-wall", action="store_true", help="drop wall-clock fields from the report")
    m.set_defaults(func=cmd_multiply)

    sw = sub.add_parser("sweep", help="threshold sweep table")
    _add_common(sw)
    sw.add_argument("--sweep", help="comma list of thresholds (default: ladder around crossover)")
    sw.add_argument("--points", type=int, default=12)
    sw.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify-corpus", help="check benchmark corpus matrices' dimensions")
    v.add_argument("--dir", type=Path, help="directory holding <name>.mtx files")
    v.add_argument("files", nargs="*", type=Path)
    v.set_defaults(func=cmd_verify_corpus)

    dm = sub.add_parser("dump-model", help="write the bundled latency model")
    dm.add_argument("path", type=Path)
    dm.set_defaults(func=lambda a: LatencyModel.default().dump(a.path) or EXIT_OK)
    return parser


def _emit(text: str, path) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_multiply(args) -> int:
    s = get_semiring(args.semiring)
    require_commutative(s)
    grid = ProcessGrid(args.procs)
    cfg = CommConfig(threshold_bytes=args.threshold_bytes, mode=CommMode(args.comm))
    model = load_model(args)
    if args.iters < 1:
        raise ValueError("--iters must be >= 1")

    matrix = load_matrix(args, s)
    if matrix.nrows != matrix.ncols:
        raise ValueError(f"A*A needs a square matrix, got {matrix.nrows}x{matrix.ncols}")
    if args.check_oracle and matrix.nrows > ORACLE_LIMIT:
        log.error("oracle check refused: n=%d exceeds %d", matrix.nrows, ORACLE_LIMIT)
        return EXIT_USAGE
    dist = distribute(matrix, grid, s)

    iterations = []
    result = None
    for it in range(args.iters + 1):
        t0 = time.perf_counter()
        result, ledger = summa25_multiply(dist, dist, s, cfg, model, args.rounds)
        elapsed = time.perf_counter() - t0
        if it == 0:
            continue  # warm-up
        entry = ledger.to_dict()
        entry["wall_total_seconds"] = elapsed
        iterations.append(entry)

    product = gather(result)
    report = {
        "matrix": args.matrix or args.gen,
        "nrows": matrix.nrows,
        "ncols": matrix.ncols,
        "nnz": matrix.nnz,
        "semiring": s.name,
        "procs": grid.p,
        "rounds": args.rounds,
        "comm": cfg.mode.value,
        "threshold_bytes": cfg.threshold_bytes,
        "model": model.name,
        "iterations": len(iterations),
        "first_iteration": iterations[0],
        "mean": {
            "simulated_seconds": {
                ph: float(np.mean([it["simulated_seconds"][ph] for it in iterations])) for ph in PHASES
            },
            "wall_seconds": {
                ph: float(np.mean([it["wall_seconds"][ph] for it in iterations])) for ph in PHASES
            },
        },
        "per_iteration": iterations,
        "result_nnz": product.nnz,
        "result_checksum": f"{content_checksum(product):016x}",
    }
    status = EXIT_OK
    if args.check_oracle:
        csr = coo_to_csr(matrix, s)
        expected = naive_multiply(csr, csr, s)
        ok = content_checksum(expected) == content_checksum(product)
        report["oracle"] = "pass" if ok else "fail"
        status = EXIT_OK if ok else EXIT_FAIL
    if args.omit_wall:
        _strip_wall(report)
    _emit(json.dumps(report, indent=2) + "\n", args.report)
    return status


def _strip_wall(obj) -> None:
    if isinstance(obj, dict):
        for key in [k for k in obj if k.startswith("wall")]:
            del obj[key]
        for v in obj.values():
            _strip_wall(v)
    elif isinstance(obj, list):
        for v in obj:
            _strip_wall(v)


def cmd_sweep(args) -> int:
    s = get_semiring(args.semiring)
    require_commutative(s)
    grid = ProcessGrid(args.procs)
    model = load_model(args)
    matrix = load_matrix(args, s)
    if args.sweep:
        thresholds = [parse_threshold(t) for t in args.sweep.split(",") if t.strip()]
    else:
        crossover = find_crossover(model, grid.q, 1, 2**40)
        log.info("crossover at fanout %d: %s bytes", grid.q, crossover)
        thresholds = default_ladder(crossover, args.points)
    rows = sweep_thresholds(Workload(matrix, s, grid), thresholds, model, args.rounds)
    if args.report:
        write_sweep_table(rows, args.report)
    else:
        write_sweep_table(rows, sys.stdout)
    return EXIT_OK


def cmd_verify_corpus(args) -> int:
    files: dict[str, Path] = {}
    for f in args.files:
        files[f.stem] = f
    if args.dir:
        for name in CORPUS:
            cand = args.dir / f"{name}.mtx"
            if cand.exists():
                files.setdefault(name, cand)
    status = EXIT_OK
    checked = 0
    for name, (rows, cols, nnz) in CORPUS.items():
        path = files.get(name)
        if path is None or not path.exists():
            if name in files or args.dir:
                log.warning("%s: no file supplied, skipped", name)
            continue
        m = read_matrix_market(path, get_semiring("boolean"))
        found = (m.nrows, m.ncols, m.nnz)
        diffs = []
        if (m.nrows, m.ncols) != (rows, cols):
            diffs.append(f"dims expected {rows}x{cols}, found {m.nrows}x{m.ncols}")
        if nnz is not None and m.nnz != nnz:
            diffs.append(f"nnz expected {nnz}, found {m.nnz}")
        checked += 1
        if diffs:
            status = EXIT_FAIL
            print(f"FAIL {name}: " + "; ".join(diffs))
        else:
            print(f"PASS {name}: {found[0]}x{found[1]}, {found[2]} nnz")
    unknown = sorted(set(files) - set(CORPUS))
    for name in unknown:
        log.warning("%s: not part of the corpus, skipped", name)
    if checked == 0:
        log.warning("no corpus matrices found")
    return status


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except (SpgemmError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
