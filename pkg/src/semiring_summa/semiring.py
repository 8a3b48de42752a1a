"""Semirings over which sparse products are evaluated.

A :class:`Semiring` carries two views of the same algebra: scalar operators
on plain Python values (``add``/``mul``) and vectorised operators on numpy
arrays (``vadd``/``vmul``) used by the kernels.  The value type of a semiring
is fixed by its numpy ``dtype``; arrays of a different kind are rejected.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import SemiringMismatchError

#: weight/payload pair used by the min-select semiring
PAIR_DTYPE = np.dtype([("w", "<f8"), ("p", "<i8")])
#: payload of the multiplicative identity; "keep the other operand's payload"
NEUTRAL_PAYLOAD = -1
#: payload of the additive identity
MAX_PAYLOAD = np.iinfo(np.int64).max


@dataclass(frozen=True)
class Semiring:
    name: str
    add: Callable[[Any, Any], Any]
    mul: Callable[[Any, Any], Any]
    zero: Any
    one: Any
    is_commutative_mul: bool
    dtype: np.dtype
    vadd: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    vmul: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    vzero: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    @property
    def itemsize(self) -> int:
        return self.dtype.itemsize

    def is_zero(self, x) -> bool:
        return bool(self.vzero(self.asarray([x]))[0])

    def full(self, shape, value=None) -> np.ndarray:
        """Array of ``shape`` filled with ``value`` (default: zero)."""
        out = np.empty(shape, dtype=self.dtype)
        out[...] = self._to_numpy_scalar(self.zero if value is None else value)
        return out

    def _to_numpy_scalar(self, value):
        return self.asarray([value])[0]

    def asarray(self, values) -> np.ndarray:
        """Coerce ``values`` to this semiring's value array.

        Raises :class:`SemiringMismatchError` when the values belong to a
        different kind of scalar (e.g. pairs handed to a float semiring).
        """
        if isinstance(values, np.ndarray):
            arr = values
        else:
            values = list(values)
            if self.dtype == PAIR_DTYPE:
                if any(not _is_pair(v) for v in values):
                    raise SemiringMismatchError(f"{self.name} expects (weight, payload) pairs")
                arr = np.array([(float(w), int(p)) for w, p in values], dtype=PAIR_DTYPE)
            else:
                if any(_is_pair(v) for v in values):
                    raise SemiringMismatchError(f"{self.name} does not accept pair values")
                arr = np.asarray(values)
                if arr.size == 0:
                    arr = arr.astype(self.dtype)
        return self._check_kind(arr)

    def _check_kind(self, arr: np.ndarray) -> np.ndarray:
        kind = arr.dtype.kind
        if self.dtype == PAIR_DTYPE:
            if arr.dtype != PAIR_DTYPE:
                raise SemiringMismatchError(f"{self.name} values must be pairs, got {arr.dtype}")
            return arr
        if self.dtype.kind == "b":
            if kind != "b":
                raise SemiringMismatchError(f"{self.name} values must be boolean, got {arr.dtype}")
            return arr
        if kind not in "fiu" or arr.dtype.names is not None:
            raise SemiringMismatchError(f"{self.name} values must be numeric, got {arr.dtype}")
        if self.dtype.kind == "i" and kind == "f":
            raise SemiringMismatchError(f"{self.name} values must be integers, got {arr.dtype}")
        return arr.astype(self.dtype, copy=False)

    def check(self, arr: np.ndarray) -> None:
        """Raise unless ``arr`` already has exactly this semiring's dtype."""
        if arr.dtype != self.dtype:
            raise SemiringMismatchError(
                f"values of dtype {arr.dtype} cannot be used with semiring {self.name!r}"
            )

    def to_python(self, v):
        if self.dtype == PAIR_DTYPE:
            return (float(v["w"]), int(v["p"]))
        return v.item()


def _is_pair(v) -> bool:
    return isinstance(v, (tuple, list, np.void)) and len(v) == 2


def make_arithmetic(integer: bool = False) -> Semiring:
    """Ordinary (+, *) over float64, or int64 when ``integer`` is set."""
    if integer:
        dtype, zero, one, name = np.dtype(np.int64), 0, 1, "arithmetic-int"
    else:
        dtype, zero, one, name = np.dtype(np.float64), 0.0, 1.0, "arithmetic"
    return Semiring(
        name=name,
        add=operator.add,
        mul=operator.mul,
        zero=zero,
        one=one,
        is_commutative_mul=True,
        dtype=dtype,
        vadd=np.add,
        vmul=np.multiply,
        vzero=lambda v: v == 0,
    )


def make_minplus() -> Semiring:
    """Tropical semiring: add is min, mul is +, zero is +inf."""
    return Semiring(
        name="minplus",
        add=min,
        mul=operator.add,
        zero=math.inf,
        one=0.0,
        is_commutative_mul=True,
        dtype=np.dtype(np.float64),
        vadd=np.minimum,
        vmul=np.add,
        vzero=lambda v: v == np.inf,
    )


def make_boolean() -> Semiring:
    return Semiring(
        name="boolean",
        add=operator.or_,
        mul=operator.and_,
        zero=False,
        one=True,
        is_commutative_mul=True,
        dtype=np.dtype(np.bool_),
        vadd=np.logical_or,
        vmul=np.logical_and,
        vzero=np.logical_not,
    )


def _pair_add(x, y):
    xw, xp = x
    yw, yp = y
    if (yw, yp) < (xw, xp):
        return (yw, yp)
    return (xw, xp)


def _pair_mul(x, y):
    w = x[0] + y[0]
    if w == math.inf:
        return (math.inf, MAX_PAYLOAD)
    return (w, x[1] if y[1] == NEUTRAL_PAYLOAD else y[1])


def _pair_vadd(x, y):
    x, y = np.broadcast_arrays(x, y)
    take_y = (y["w"] < x["w"]) | ((y["w"] == x["w"]) & (y["p"] < x["p"]))
    return np.where(take_y, y, x)


def _pair_vmul(x, y):
    x, y = np.broadcast_arrays(x, y)
    out = np.empty(x.shape, dtype=PAIR_DTYPE)
    w = x["w"] + y["w"]
    p = np.where(y["p"] == NEUTRAL_PAYLOAD, x["p"], y["p"])
    dead = w == np.inf
    out["w"] = np.where(dead, np.inf, w)
    out["p"] = np.where(dead, MAX_PAYLOAD, p)
    return out


def make_minselect() -> Semiring:
    """Min-select over (weight, payload) pairs.

    ``add`` keeps the pair with the smaller weight, breaking ties towards the
    smaller payload.  ``mul`` adds weights and keeps the right operand's
    payload, so it does not commute.  Any pair with infinite weight is zero.
    """
    return Semiring(
        name="minselect",
        add=_pair_add,
        mul=_pair_mul,
        zero=(math.inf, MAX_PAYLOAD),
        one=(0.0, NEUTRAL_PAYLOAD),
        is_commutative_mul=False,
        dtype=PAIR_DTYPE,
        vadd=_pair_vadd,
        vmul=_pair_vmul,
        vzero=lambda v: v["w"] == np.inf,
    )


SEMIRINGS: dict[str, Callable[[], Semiring]] = {
    "arithmetic": make_arithmetic,
    "minplus": make_minplus,
    "boolean": make_boolean,
    "minselect": make_minselect,
}


def get_semiring(name: str) -> Semiring:
    try:
        return SEMIRINGS[name]()
    except KeyError:
        raise ValueError(f"unknown semiring {name!r}; choose from {sorted(SEMIRINGS)}") from None


def segmented_fold(values: np.ndarray, starts: np.ndarray, s: Semiring) -> np.ndarray:
    """Left-fold each segment of ``values`` with ``s.vadd``.

    ``starts`` holds the first index of every segment (ascending, first is 0).
    The fold is strictly sequential inside a segment, so floating point
    results depend only on the element order and never on segment layout.
    """
    n = len(values)
    nseg = len(starts)
    if nseg == 0:
        return values[:0].copy()
    lengths = np.diff(np.append(starts, n))
    acc = values[starts].copy()
    if lengths.max(initial=1) == 1:
        return acc
    # longest segments first so each step's active set is a prefix
    order = np.argsort(-lengths, kind="stable")
    sorted_len = lengths[order]
    sorted_start = starts[order]
    sorted_acc = acc[order]
    for t in range(1, int(sorted_len[0])):
        k = int(np.searchsorted(-sorted_len, -t, side="left"))
        sorted_acc[:k] = s.vadd(sorted_acc[:k], values[sorted_start[:k] + t])
    acc[order] = sorted_acc
    return acc
