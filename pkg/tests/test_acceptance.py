"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line (visible even under
output capture) before asserting.  Run alone with

    pytest tests/test_acceptance.py -v
"""

import math
import time

import numpy as np
import pytest

from semiring_summa import summa as summa_mod
from semiring_summa.errors import UnsupportedSemiringError
from semiring_summa.fabric import INFINITE_THRESHOLD, CommConfig, CommMode, LatencyModel, ProcessGrid
from semiring_summa.formats import (
    CooMatrix,
    coo_to_csc,
    coo_to_csr,
    content_checksum,
    csc_to_dcsc,
    csr_to_coo,
    dcsc_decompress,
    from_dense,
    reinterpret_transpose,
    to_dense,
)
from semiring_summa.local_spgemm import esc_multiply, naive_multiply
from semiring_summa.matrix_io import generate_rmat
from semiring_summa.semiring import get_semiring, make_arithmetic, make_minplus, make_minselect
from semiring_summa.summa import distribute, gather, square_repeatedly, summa25_multiply
from semiring_summa.tuner import Workload, default_ladder, find_crossover, sweep_thresholds

from _helpers import floyd_warshall, random_coo, random_dense, scalar_matmul

pytestmark = pytest.mark.acceptance

MODEL = LatencyModel.default()


@pytest.fixture
def verdict(capsys):
    def report(number, title, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}"
        if detail:
            line += f" ({detail})"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return report


def bits_equal(x, y):
    return (
        x.shape == y.shape
        and np.array_equal(x.rows, y.rows)
        and np.array_equal(x.cols, y.cols)
        and x.values.tobytes() == y.values.tobytes()
    )


def oracle(a, b, s):
    return csr_to_coo(naive_multiply(coo_to_csr(a, s), coo_to_csr(b, s), s))


def test_01_oracle_equivalence(verdict):
    rng = np.random.default_rng(2024)
    names = ["arithmetic", "minplus", "boolean"]
    densities = [0.01, 0.05, 0.2]
    procs = [1, 4, 9, 16]
    t0 = time.perf_counter()
    exact = tolerant = failed = 0
    for case in range(500):
        s = get_semiring(names[case % 3])
        dens = densities[(case // 3) % 3]
        p = procs[(case // 9) % 4]
        n, k, m = (int(x) for x in rng.integers(1, 97, 3))
        a = random_coo(rng, n, k, dens, s, integer=False)
        b = random_coo(rng, k, m, dens, s, integer=False)
        g = ProcessGrid(p)
        c, _ = summa25_multiply(distribute(a, g, s), distribute(b, g, s), s)
        got, ref = gather(c), oracle(a, b, s)
        if bits_equal(got, ref):
            exact += 1
        elif s.name == "arithmetic" and np.allclose(to_dense(got, s), to_dense(ref, s), rtol=1e-10, atol=0):
            tolerant += 1
        else:
            failed += 1
    elapsed = time.perf_counter() - t0
    ok = failed == 0 and elapsed < 120
    verdict(1, "oracle equivalence", ok,
            f"{exact} bit-exact, {tolerant} within 1e-10, {failed} wrong, {elapsed:.1f}s")


def test_02_transpose_trick(verdict):
    rng = np.random.default_rng(7)
    names = ["arithmetic", "minplus", "boolean"]
    bad = 0
    for case in range(200):
        s = get_semiring(names[case % 3])
        n, k, m = (int(x) for x in rng.integers(1, 41, 3))
        a = random_coo(rng, n, k, 0.15, s, integer=False)
        b = random_coo(rng, k, m, 0.15, s, integer=False)
        at = reinterpret_transpose(coo_to_csc(a, s))
        bt = reinterpret_transpose(coo_to_csc(b, s))
        ct = esc_multiply(bt, at, s)
        got = np.ascontiguousarray(to_dense(ct, s).T)
        if got.tobytes() != to_dense(oracle(a, b, s), s).tobytes():
            bad += 1
    verdict(2, "transpose-trick identity", bad == 0, f"{200 - bad}/200 exact")


def test_03_round_trips(verdict):
    rng = np.random.default_rng(3)
    s = make_arithmetic()
    bad = 0
    for case in range(200):
        nrows, ncols = (int(x) for x in rng.integers(1, 60, 2))
        d = random_dense(rng, nrows, ncols, 0.1, s, integer=False)
        if case % 10 == 0:
            d[:] = 0.0  # every column empty
        elif case % 10 == 1:
            d[0, :] = rng.standard_normal(ncols) + 10.0  # no column empty
        csc = coo_to_csc(from_dense(d, s), s)
        back = dcsc_decompress(csc_to_dcsc(csc))
        same = (
            np.array_equal(back.colptr, csc.colptr)
            and np.array_equal(back.rowids, csc.rowids)
            and back.values.tobytes() == csc.values.tobytes()
        )
        twice = reinterpret_transpose(reinterpret_transpose(csc))
        inv = (
            twice.shape == csc.shape
            and twice.colptr.tobytes() == csc.colptr.tobytes()
            and twice.rowids.tobytes() == csc.rowids.tobytes()
            and twice.values.tobytes() == csc.values.tobytes()
        )
        bad += not (same and inv)
    verdict(3, "DCSC and transpose round trips", bad == 0, f"{200 - bad}/200 exact")


def test_04_shortest_paths(verdict):
    rng = np.random.default_rng(44)
    s = make_minplus()
    bad = 0
    for _ in range(50):
        n = int(rng.integers(1, 33))
        w = random_dense(rng, n, n, float(rng.choice([0.05, 0.1, 0.3])), s)
        np.fill_diagonal(w, 0.0)
        d = distribute(from_dense(w, s), ProcessGrid(4), s)
        times = max(1, math.ceil(math.log2(n))) if n > 1 else 1
        out, _ = square_repeatedly(d, s, times)
        bad += to_dense(gather(out), s).tolist() != floyd_warshall(w.tolist())
    verdict(4, "min-plus squaring matches Floyd-Warshall", bad == 0, f"{50 - bad}/50 exact")


def test_05_comm_mode_independence(verdict):
    rng = np.random.default_rng(55)
    names = ["arithmetic", "minplus", "boolean"]
    bad = 0
    for case in range(50):
        s = get_semiring(names[case % 3])
        p = [4, 9, 16][case % 3]
        n = int(rng.integers(8, 80))
        a = distribute(random_coo(rng, n, n, 0.1, s, integer=False), ProcessGrid(p), s)
        cfgs = [CommConfig(0, CommMode.HOST_ONLY), CommConfig(0, CommMode.DEVICE_ONLY)]
        cfgs += [CommConfig(t) for t in (0, 256, 2048, 16384, INFINITE_THRESHOLD)]
        sums = {content_checksum(gather(summa25_multiply(a, a, s, cfg)[0])) for cfg in cfgs}
        bad += len(sums) != 1
    verdict(5, "comm-mode independence", bad == 0, f"{50 - bad}/50 single checksum")


def test_06_crossover_optimality(verdict):
    notes = []
    shape_ok = True
    for fanout in (2, 3, 4):
        s_star = find_crossover(MODEL, fanout, 1, 2**40)
        lo, hi = s_star // 2, 2 * s_star
        shape_ok &= MODEL.host_path_cost(lo, fanout) < MODEL.device_path_cost(lo, fanout)
        shape_ok &= MODEL.device_path_cost(hi, fanout) < MODEL.host_path_cost(hi, fanout)
        notes.append(f"s*(fanout {fanout})={s_star}")

    s = make_arithmetic()
    grid = ProcessGrid(9)
    s_star = find_crossover(MODEL, grid.q, 1, 2**40)
    rows = sweep_thresholds(Workload(generate_rmat(12, 8, 1, s), s, grid), [0, s_star, INFINITE_THRESHOLD], MODEL)
    cost = {r.threshold_bytes: r.sim_comm_seconds for r in rows}
    dist = distribute(generate_rmat(12, 8, 1, s), grid, s)
    device_only = summa25_multiply(dist, dist, s, CommConfig(0, CommMode.DEVICE_ONLY), MODEL)[1].sim["broadcast"]
    speedup = device_only / cost[s_star]
    ok = (
        shape_ok
        and cost[s_star] <= cost[0]
        and cost[s_star] <= cost[INFINITE_THRESHOLD]
        and speedup > 1.0
    )
    notes.append(f"rmat-12 p=9 speedup over device-only {speedup:.2f}x")
    verdict(6, "crossover routing optimality", ok, ", ".join(notes))


def test_07_threshold_monotonicity(verdict):
    s = make_arithmetic()
    grid = ProcessGrid(9)
    ladder = default_ladder(find_crossover(MODEL, grid.q, 1, 2**40), 12)
    rows = sweep_thresholds(Workload(generate_rmat(10, 8, 7, s), s, grid), ladder, MODEL)
    pcts = [r.pct_host_bcasts for r in rows]
    ok = len(rows) == 12 and pcts == sorted(pcts) and pcts[0] == 0.0 and pcts[-1] == 100.0
    verdict(7, "threshold monotonicity", ok, "host %: " + " ".join(f"{x:.0f}" for x in pcts))


def test_08_empty_guard(verdict, monkeypatch):
    s = make_arithmetic()
    calls = []
    real = summa_mod.esc_multiply

    def counting(a, b, *args, **kwargs):
        calls.append((a.nnz, b.nnz))
        return real(a, b, *args, **kwargs)

    monkeypatch.setattr(summa_mod, "esc_multiply", counting)
    # nonzeros only in the top block row: ranks of the other rows see empty A pieces
    w = np.zeros((12, 12))
    w[:4] = np.random.default_rng(8).standard_normal((4, 12))
    grid = ProcessGrid(9)
    d = distribute(from_dense(w, s), grid, s)
    c, led = summa25_multiply(d, d, s)
    idle = [led.per_rank[r] for r in range(grid.p) if grid.coords(r)[0] > 0]
    guard = (
        all(a > 0 and b > 0 for a, b in calls)
        and len(calls) == led.local_multiplies
        and led.skipped_multiplies > 0
        and all(rl.local_multiplies == 0 and rl.sim["local_multiply"] == 0.0 for rl in idle)
        and to_dense(gather(c), s).tolist() == to_dense(oracle(from_dense(w, s), from_dense(w, s), s), s).tolist()
    )
    calls.clear()
    e = distribute(CooMatrix.empty(10, 10, s), grid, s)
    ce, le = summa25_multiply(e, e, s)
    empty_ok = ce.nnz == 0 and not calls and le.sim["local_multiply"] == 0.0 and le.payload_bcasts == 0
    verdict(8, "empty-operand guard", guard and empty_ok,
            f"{led.local_multiplies} run, {led.skipped_multiplies} skipped")


def test_09_halving(verdict):
    rng = np.random.default_rng(99)
    names = ["arithmetic", "minplus", "boolean"]
    bad = 0
    ratios = []
    for case in range(20):
        s = get_semiring(names[case % 3])
        p = [1, 4, 9, 16][case % 4]
        n = int(rng.integers(10, 96))
        d = distribute(random_coo(rng, n, n, float(rng.choice([0.05, 0.2])), s, integer=False), ProcessGrid(p), s)
        c2, l2 = summa25_multiply(d, d, s, rounds=2)
        c1, l1 = summa25_multiply(d, d, s, rounds=1)
        bad += not (bits_equal(gather(c2), gather(c1)) and l2.peak_bcast_bytes <= l1.peak_bcast_bytes)
        if l1.peak_bcast_bytes:
            ratios.append(l2.peak_bcast_bytes / l1.peak_bcast_bytes)
    verdict(9, "2.5D halving equivalence and memory bound", bad == 0,
            f"{20 - bad}/20, mean peak ratio {np.mean(ratios):.2f}")


def test_10_noncommutative(verdict):
    s = make_minselect()
    d = distribute(CooMatrix.empty(6, 6, s), ProcessGrid(4), s)
    try:
        summa25_multiply(d, d, s)
        refused, msg = False, "accepted"
    except UnsupportedSemiringError as exc:
        msg = str(exc)
        refused = "commutative semirings" in msg
    rng = np.random.default_rng(10)
    bad = 0
    for _ in range(100):
        n, k, m = (int(x) for x in rng.integers(1, 17, 3))
        da = random_dense(rng, n, k, 0.3, s)
        db = random_dense(rng, k, m, 0.3, s)
        a, b = coo_to_csr(from_dense(da, s), s), coo_to_csr(from_dense(db, s), s)
        c = esc_multiply(a, b, s, chunk_size=int(rng.integers(1, 40)))
        ref = naive_multiply(a, b, s)
        dense = [[s.to_python(v) for v in row] for row in to_dense(c, s)]
        same = (
            np.array_equal(c.rowptr, ref.rowptr)
            and np.array_equal(c.colids, ref.colids)
            and c.values.tobytes() == ref.values.tobytes()
            and dense == scalar_matmul(da, db, s)
        )
        bad += not same
    verdict(10, "non-commutative rejection", refused and bad == 0,
            f"SUMMA refused: {refused}; serial min-select {100 - bad}/100 exact")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
