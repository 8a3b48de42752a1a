"""Deterministic simulated message-passing fabric.

Rank programs are generator functions ``program(ctx)``.  Collectives are
entered with ``yield from bcast(ctx, ...)`` / ``yield from exchange_sizes(...)``;
the scheduler in :func:`run_program` advances every rank until it blocks on a
collective, completes collectives whose whole communicator is waiting, and
repeats.  Costs come from a :class:`LatencyModel` and are charged to a
per-rank :class:`CostLedger`; nothing is timed on real hardware except the
local kernels wrapped in :meth:`RankContext.timed`.
"""

from __future__ import annotations

import inspect
import json
import math
import time
import warnings
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DeadlockError, GridError, MalformedInputError, ProtocolError

PHASES = ("prepare", "broadcast", "local_multiply", "merge", "copy")
INFINITE_THRESHOLD = 2**63 - 1
SIZE_TRIPLE_BYTES = 24


class MemorySpace(Enum):
    HOST = "host"
    DEVICE = "device"


class CommMode(Enum):
    HOST_ONLY = "host"
    DEVICE_ONLY = "device"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class CommConfig:
    threshold_bytes: int = 65536
    mode: CommMode = CommMode.HYBRID

    def __post_init__(self):
        if self.threshold_bytes < 0:
            raise ValueError("threshold_bytes must be >= 0")


def choose_path(nbytes: int, cfg: CommConfig) -> MemorySpace:
    if cfg.mode is CommMode.HOST_ONLY:
        return MemorySpace.HOST
    if cfg.mode is CommMode.DEVICE_ONLY:
        return MemorySpace.DEVICE
    return MemorySpace.DEVICE if nbytes >= cfg.threshold_bytes else MemorySpace.HOST


@dataclass(frozen=True)
class ProcessGrid:
    """Square ``q x q`` arrangement of ``p`` ranks, row-major."""

    p: int

    def __post_init__(self):
        if self.p < 1 or math.isqrt(self.p) ** 2 != self.p:
            raise GridError(f"process count must be a perfect square, got {self.p}")

    @property
    def q(self) -> int:
        return math.isqrt(self.p)

    def coords(self, rank: int) -> tuple[int, int]:
        return divmod(rank, self.q)

    def rank_of(self, row: int, col: int) -> int:
        return row * self.q + col

    def row_members(self, row: int) -> list[int]:
        return [self.rank_of(row, c) for c in range(self.q)]

    def col_members(self, col: int) -> list[int]:
        return [self.rank_of(r, col) for r in range(self.q)]

    def members(self, scope: tuple[str, int]) -> list[int]:
        kind, index = scope
        if kind == "row":
            return self.row_members(index)
        if kind == "col":
            return self.col_members(index)
        raise ValueError(f"unknown communicator {kind!r}")


class Curve:
    """Latency curve through (bytes, seconds) samples, linear in log-log."""

    def __init__(self, points):
        pts = sorted((float(b), float(t)) for b, t in points)
        if len(pts) < 2:
            raise MalformedInputError("a curve needs at least two sample points")
        x = np.array([b for b, _ in pts])
        y = np.array([t for _, t in pts])
        if np.any(x <= 0) or np.any(y <= 0):
            raise MalformedInputError("curve samples must be strictly positive")
        if np.any(np.diff(x) <= 0):
            raise MalformedInputError("curve sample sizes must be distinct")
        self.points = list(zip(x.tolist(), y.tolist()))
        self._lx = np.log(x)
        self._ly = np.log(y)
        self._lo_slope = (self._ly[1] - self._ly[0]) / (self._lx[1] - self._lx[0])
        self._hi_slope = (self._ly[-1] - self._ly[-2]) / (self._lx[-1] - self._lx[-2])

    def __call__(self, nbytes) -> float:
        lx = math.log(max(float(nbytes), 1.0))
        if lx < self._lx[0]:
            ly = self._ly[0] + self._lo_slope * (lx - self._lx[0])
        elif lx > self._lx[-1]:
            ly = self._ly[-1] + self._hi_slope * (lx - self._lx[-1])
        else:
            ly = float(np.interp(lx, self._lx, self._ly))
        return math.exp(ly)

    def is_non_decreasing(self) -> bool:
        return bool(np.all(np.diff(self._ly) >= 0)) and self._lo_slope >= 0 and self._hi_slope >= 0


def _affine_samples(fixed: float, bandwidth: float, sizes) -> list[tuple[float, float]]:
    return [(float(b), fixed + b / bandwidth) for b in sizes]


GIB = float(1 << 30)
CURVE_NAMES = ("host_bcast", "device_bcast", "copy_h2d", "copy_d2h")


@dataclass
class LatencyModel:
    """Cost curves for the two broadcast paths and the host/device copies.

    Broadcast curves give the cost of one tree stage; a broadcast to
    ``fanout`` ranks takes ``ceil(log2(fanout))`` stages.  The three scalar
    terms price the simulated local multiply and merge.
    """

    curves: dict[str, Curve]
    multiply_launch: float = 5e-6
    multiply_per_flop: float = 2e-9
    merge_per_tuple: float = 5e-9
    name: str = "custom"

    def __post_init__(self):
        missing = [c for c in CURVE_NAMES if c not in self.curves]
        if missing:
            raise MalformedInputError(f"latency model lacks curves: {missing}")

    @classmethod
    def default(cls) -> "LatencyModel":
        sizes = [2**e for e in range(0, 35)]
        return cls(
            curves={
                "host_bcast": Curve(_affine_samples(30e-6, 12 * GIB, sizes)),
                "device_bcast": Curve(_affine_samples(85e-6, 40 * GIB, sizes)),
                "copy_h2d": Curve(_affine_samples(8e-6, 20 * GIB, sizes)),
                "copy_d2h": Curve(_affine_samples(8e-6, 20 * GIB, sizes)),
            },
            name="default",
        )

    @staticmethod
    def stages(fanout: int) -> int:
        return math.ceil(math.log2(fanout)) if fanout > 1 else 0

    def host_bcast(self, nbytes, fanout) -> float:
        return self.stages(fanout) * self.curves["host_bcast"](nbytes)

    def device_bcast(self, nbytes, fanout) -> float:
        return self.stages(fanout) * self.curves["device_bcast"](nbytes)

    def copy_h2d(self, nbytes) -> float:
        return self.curves["copy_h2d"](nbytes)

    def copy_d2h(self, nbytes) -> float:
        return self.curves["copy_d2h"](nbytes)

    def host_path_cost(self, nbytes, fanout) -> float:
        return self.copy_d2h(nbytes) + self.host_bcast(nbytes, fanout) + self.copy_h2d(nbytes)

    def device_path_cost(self, nbytes, fanout) -> float:
        return self.device_bcast(nbytes, fanout)

    def path_cost(self, path: MemorySpace, nbytes, fanout) -> float:
        if path is MemorySpace.HOST:
            return self.host_path_cost(nbytes, fanout)
        return self.device_path_cost(nbytes, fanout)

    def multiply_cost(self, nflops: int) -> float:
        return self.multiply_launch + nflops * self.multiply_per_flop

    def merge_cost(self, ntuples: int) -> float:
        return ntuples * self.merge_per_tuple

    def validate(self, fanout: int = 4) -> bool:
        """Warn when the model lacks the host-then-device crossover shape."""
        ok = all(c.is_non_decreasing() for c in self.curves.values())
        if not ok:
            warnings.warn(f"latency model {self.name!r} has a decreasing curve", stacklevel=2)
            return False
        lo, hi = 1, 2**40
        small = self.host_path_cost(lo, fanout) < self.device_path_cost(lo, fanout)
        large = self.host_path_cost(hi, fanout) > self.device_path_cost(hi, fanout)
        if not (small and large):
            warnings.warn(
                f"latency model {self.name!r} has no host/device crossover", stacklevel=2
            )
            return False
        return True

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "multiply_launch": self.multiply_launch,
            "multiply_per_flop": self.multiply_per_flop,
            "merge_per_tuple": self.merge_per_tuple,
            "curves": {k: [list(p) for p in c.points] for k, c in self.curves.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LatencyModel":
        try:
            curves = {k: Curve(v) for k, v in d["curves"].items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInputError(f"bad latency model: {exc}") from None
        extra = {k: float(d[k]) for k in ("multiply_launch", "multiply_per_flop", "merge_per_tuple") if k in d}
        model = cls(curves=curves, name=str(d.get("name", "custom")), **extra)
        model.validate()
        return model

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "LatencyModel":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise MalformedInputError(f"{path}: {exc}") from None
        return cls.from_dict(data)


@dataclass(frozen=True)
class Buffer:
    space: MemorySpace
    data: bytes

    @property
    def nbytes(self) -> int:
        return len(self.data)


@dataclass(frozen=True)
class MessageRecord:
    scope: tuple[str, int]
    root: int
    nbytes: int
    fanout: int
    path: MemorySpace
    cost: float
    host_cost: float
    device_cost: float


@dataclass
class CostLedger:
    sim: dict[str, float] = field(default_factory=lambda: dict.fromkeys(PHASES, 0.0))
    wall: dict[str, float] = field(default_factory=lambda: dict.fromkeys(PHASES, 0.0))
    host_bcasts: int = 0
    device_bcasts: int = 0
    meta_bcasts: int = 0
    bytes_by_path: dict[str, int] = field(default_factory=lambda: {"host": 0, "device": 0})
    local_multiplies: int = 0
    skipped_multiplies: int = 0
    peak_bcast_bytes: int = 0
    messages: list[MessageRecord] = field(default_factory=list)
    per_rank: list["CostLedger"] = field(default_factory=list, repr=False)

    @property
    def payload_bcasts(self) -> int:
        return self.host_bcasts + self.device_bcasts

    @property
    def host_fraction(self) -> float:
        total = self.payload_bcasts
        return self.host_bcasts / total if total else 0.0

    def charge(self, phase: str, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("negative cost")
        self.sim[phase] += seconds

    def simulated_signature(self) -> tuple:
        """Everything deterministic about the ledger (excludes wall clock)."""
        return (
            tuple(self.sim[p] for p in PHASES),
            self.host_bcasts,
            self.device_bcasts,
            self.meta_bcasts,
            tuple(sorted(self.bytes_by_path.items())),
            self.local_multiplies,
            self.skipped_multiplies,
            self.peak_bcast_bytes,
            tuple(self.messages),
        )

    def to_dict(self) -> dict:
        return {
            "simulated_seconds": dict(self.sim),
            "wall_seconds": dict(self.wall),
            "host_bcasts": self.host_bcasts,
            "device_bcasts": self.device_bcasts,
            "meta_bcasts": self.meta_bcasts,
            "bytes_by_path": dict(self.bytes_by_path),
            "local_multiplies": self.local_multiplies,
            "skipped_multiplies": self.skipped_multiplies,
            "peak_bcast_bytes": self.peak_bcast_bytes,
        }


class RankContext:
    """Per-rank handle given to a rank program."""

    def __init__(self, rank: int, grid: ProcessGrid, cfg: CommConfig, model: LatencyModel):
        self.rank = rank
        self.grid = grid
        self.row, self.col = grid.coords(rank)
        self.cfg = cfg
        self.model = model
        self.ledger = CostLedger()

    def scope(self, kind: str) -> tuple[str, int]:
        return (kind, self.row if kind == "row" else self.col)

    def charge(self, phase: str, seconds: float) -> None:
        self.ledger.charge(phase, seconds)

    @contextmanager
    def timed(self, phase: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.ledger.wall[phase] += time.perf_counter() - t0

    def note_resident(self, nbytes: int) -> None:
        self.ledger.peak_bcast_bytes = max(self.ledger.peak_bcast_bytes, int(nbytes))


@dataclass
class _Collective:
    kind: str
    scope: tuple[str, int]
    root: int
    payload: object
    nbytes: int | None


def bcast(ctx: RankContext, root: int, buf: Buffer | None, scope: str, nbytes: int):
    """Broadcast a device buffer from ``root`` across the row or column.

    Every participant passes the pre-agreed ``nbytes``; the root also passes
    ``buf``.  Returns the delivered device-resident buffer.
    """
    op = _Collective("bcast", ctx.scope(scope), root, buf if ctx.rank == root else None, nbytes)
    result = yield op
    return result


def exchange_sizes(ctx: RankContext, root: int, triple, scope: str):
    """Broadcast a (nrows, ncols, nnz) triple; always over the host path."""
    op = _Collective("sizes", ctx.scope(scope), root, tuple(triple) if ctx.rank == root else None, None)
    result = yield op
    return result


def _resolve(ops: dict[int, _Collective], members: list[int], cfg, model, global_ledger, ctxs):
    first = ops[members[0]]
    kinds = {ops[r].kind for r in members}
    roots = {ops[r].root for r in members}
    if len(kinds) != 1:
        raise ProtocolError(f"{first.scope}: ranks entered different collectives {sorted(kinds)}")
    if len(roots) != 1:
        raise ProtocolError(f"{first.scope}: ranks disagree on root {sorted(roots)}")
    root = first.root
    if root not in members:
        raise ProtocolError(f"{first.scope}: root {root} is not a member of {members}")
    fanout = len(members)
    payload = ops[root].payload
    if payload is None:
        raise ProtocolError(f"{first.scope}: root {root} supplied no payload")

    if first.kind == "sizes":
        cost = model.host_bcast(SIZE_TRIPLE_BYTES, fanout)
        for r in members:
            ctxs[r].charge("broadcast", cost)
        global_ledger.meta_bcasts += 1
        return payload

    if not isinstance(payload, Buffer) or payload.space is not MemorySpace.DEVICE:
        raise ProtocolError(f"{first.scope}: broadcast payload must be device resident")
    nbytes = payload.nbytes
    for r in members:
        if ops[r].nbytes != nbytes:
            raise ProtocolError(
                f"{first.scope}: rank {r} expects {ops[r].nbytes} bytes, root sends {nbytes}"
            )
    path = choose_path(nbytes, cfg)
    host_cost = model.host_path_cost(nbytes, fanout)
    device_cost = model.device_path_cost(nbytes, fanout)
    cost = host_cost if path is MemorySpace.HOST else device_cost
    for r in members:
        ctxs[r].charge("broadcast", cost)
    if path is MemorySpace.HOST:
        global_ledger.host_bcasts += 1
    else:
        global_ledger.device_bcasts += 1
    global_ledger.bytes_by_path[path.value] += nbytes
    global_ledger.messages.append(
        MessageRecord(first.scope, root, nbytes, fanout, path, cost, host_cost, device_cost)
    )
    # host path stages through host memory and lands back on the device
    return Buffer(MemorySpace.DEVICE, bytes(payload.data))


def run_program(p: int, program, cfg: CommConfig | None = None, model: LatencyModel | None = None):
    """Run ``program(ctx)`` on ``p`` simulated ranks.

    Returns ``(results, merged_ledger, rank_ledgers)``.  The merged ledger
    takes, per phase, the maximum over ranks (bulk-synchronous critical
    path) and counts every broadcast once.
    """
    grid = ProcessGrid(p)
    cfg = cfg or CommConfig()
    model = model or LatencyModel.default()
    ctxs = [RankContext(r, grid, cfg, model) for r in range(p)]
    merged = CostLedger()

    gens = {}
    results = [None] * p
    for r in range(p):
        out = program(ctxs[r])
        if inspect.isgenerator(out):
            gens[r] = out
        else:
            results[r] = out

    inbox: dict[int, object] = {r: None for r in gens}
    pending: dict[int, _Collective] = {}
    runnable = sorted(gens)
    while True:
        for r in runnable:
            try:
                op = gens[r].send(inbox[r])
            except StopIteration as stop:
                results[r] = stop.value
                del gens[r]
                continue
            if not isinstance(op, _Collective):
                raise ProtocolError(f"rank {r} yielded {op!r}, expected a collective")
            pending[r] = op
        if not gens:
            break

        by_scope = defaultdict(list)
        for r in sorted(pending):
            by_scope[pending[r].scope].append(r)
        runnable = []
        for scope in sorted(by_scope):
            members = grid.members(scope)
            if by_scope[scope] != members:
                continue
            ops = {r: pending.pop(r) for r in members}
            delivered = _resolve(ops, members, cfg, model, merged, ctxs)
            for r in members:
                inbox[r] = delivered
            runnable.extend(members)
        if not runnable:
            blocked = {r: pending[r].scope for r in sorted(pending)}
            raise DeadlockError(
                "collective deadlock; blocked ranks: "
                + ", ".join(f"{r} on {k}[{i}]" for r, (k, i) in blocked.items()),
                blocked,
            )
        runnable.sort()

    ledgers = [c.ledger for c in ctxs]
    for phase in PHASES:
        merged.sim[phase] = max(l.sim[phase] for l in ledgers)
        merged.wall[phase] = max(l.wall[phase] for l in ledgers)
    merged.local_multiplies = sum(l.local_multiplies for l in ledgers)
    merged.skipped_multiplies = sum(l.skipped_multiplies for l in ledgers)
    merged.peak_bcast_bytes = max(l.peak_bcast_bytes for l in ledgers)
    merged.per_rank = ledgers
    return results, merged, ledgers
