"""Semiring-generic distributed SpGEMM over a simulated host/device fabric."""

from .fabric import CommConfig, CommMode, CostLedger, LatencyModel, MemorySpace, ProcessGrid, choose_path, run_program
from .formats import CooMatrix, CscMatrix, CsrMatrix, DcscMatrix, content_checksum
from .local_spgemm import esc_multiply, naive_multiply
from .matrix_io import generate_rmat, read_matrix_market
from .semiring import Semiring, get_semiring, make_arithmetic, make_boolean, make_minplus, make_minselect
from .summa import DistMatrix, distribute, gather, summa25_multiply
from .tuner import find_crossover, sweep_thresholds

__version__ = "0.1.0"

__all__ = [
    "CommConfig",
    "CommMode",
    "CooMatrix",
    "CostLedger",
    "CscMatrix",
    "CsrMatrix",
    "DcscMatrix",
    "DistMatrix",
    "LatencyModel",
    "MemorySpace",
    "ProcessGrid",
    "Semiring",
    "choose_path",
    "content_checksum",
    "distribute",
    "esc_multiply",
    "find_crossover",
    "gather",
    "generate_rmat",
    "get_semiring",
    "make_arithmetic",
    "make_boolean",
    "make_minplus",
    "make_minselect",
    "naive_multiply",
    "read_matrix_market",
    "run_program",
    "summa25_multiply",
    "sweep_thresholds",
]
