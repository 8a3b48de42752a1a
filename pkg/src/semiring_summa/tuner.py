"""Host/device crossover search and threshold sweeps."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable

from .errors import InvalidRangeError, SpgemmError
from .fabric import INFINITE_THRESHOLD, CommConfig, CommMode, LatencyModel, ProcessGrid
from .formats import CooMatrix, content_checksum
from .semiring import Semiring
from .summa import distribute, gather, summa25_multiply


def find_crossover(model: LatencyModel, fanout: int, lo_bytes: int, hi_bytes: int) -> int | None:
    """Smallest size in [lo, hi] where the host path stops being cheaper.

    Returns ``None`` unless the host path wins at ``lo`` and loses (or ties)
    at ``hi``.  Bisection runs to 1-byte resolution.
    """
    lo, hi = int(lo_bytes), int(hi_bytes)
    if lo >= hi or lo < 0:
        raise InvalidRangeError(f"need 0 <= lo < hi, got [{lo}, {hi}]")

    def host_not_cheaper(n: int) -> bool:
        return model.host_path_cost(n, fanout) >= model.device_path_cost(n, fanout)

    if host_not_cheaper(lo) or not host_not_cheaper(hi):
        return None
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if host_not_cheaper(mid):
            hi = mid
        else:
            lo = mid
    return hi


def default_ladder(crossover: int | None, points: int = 12) -> list[int]:
    """``points`` thresholds: 0, a x4 geometric ladder through ``crossover``, infinity."""
    if points < 3:
        raise ValueError("a ladder needs at least 3 points")
    centre = crossover or 65536
    inner = points - 2
    half = inner // 2
    ladder = sorted({max(1, int(round(centre * 4.0 ** (e - half)))) for e in range(inner)})
    return [0, *ladder, INFINITE_THRESHOLD]


@dataclass(frozen=True)
class Workload:
    matrix: CooMatrix
    semiring: Semiring
    grid: ProcessGrid


@dataclass(frozen=True)
class SweepRow:
    threshold_bytes: int
    pct_host_bcasts: float
    sim_comm_seconds: float
    wall_local_seconds: float
    result_checksum: int


COLUMNS = ("threshold_bytes", "pct_host_bcasts", "sim_comm_seconds", "wall_local_seconds", "result_checksum")


def sweep_thresholds(
    workload: Workload,
    thresholds: Iterable[int],
    model: LatencyModel | None = None,
    rounds: int = 2,
) -> list[SweepRow]:
    """One HYBRID run of A*A per threshold; every run must give the same product."""
    model = model or LatencyModel.default()
    s = workload.semiring
    dist = distribute(workload.matrix, workload.grid, s)
    rows = []
    for t in thresholds:
        cfg = CommConfig(threshold_bytes=int(t), mode=CommMode.HYBRID)
        c, ledger = summa25_multiply(dist, dist, s, cfg, model, rounds)
        rows.append(
            SweepRow(
                threshold_bytes=int(t),
                pct_host_bcasts=100.0 * ledger.host_fraction,
                sim_comm_seconds=ledger.sim["broadcast"],
                wall_local_seconds=ledger.wall["local_multiply"],
                result_checksum=content_checksum(gather(c)),
            )
        )
    if len({r.result_checksum for r in rows}) > 1:
        raise SpgemmError("threshold sweep produced differing products")
    return rows


def write_sweep_table(rows: list[SweepRow], path_or_file) -> None:
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow(
                [
                    "inf" if r.threshold_bytes >= INFINITE_THRESHOLD else r.threshold_bytes,
                    f"{r.pct_host_bcasts:.4f}",
                    f"{r.sim_comm_seconds:.9e}",
                    f"{r.wall_local_seconds:.6e}",
                    f"{r.result_checksum:016x}",
                ]
            )
    finally:
        if own:
            fh.close()


def parse_threshold(text: str) -> int:
    text = text.strip().lower()
    if text in ("inf", "infinity", "max"):
        return INFINITE_THRESHOLD
    value = float(text)
    if value < 0 or math.isnan(value):
        raise ValueError(f"bad threshold {text!r}")
    return INFINITE_THRESHOLD if math.isinf(value) else int(value)
