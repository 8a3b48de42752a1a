import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semiring_summa.errors import SemiringMismatchError
from semiring_summa.semiring import (
    MAX_PAYLOAD,
    PAIR_DTYPE,
    get_semiring,
    make_arithmetic,
    make_boolean,
    make_minplus,
    make_minselect,
    segmented_fold,
)

# integer-valued floats keep float addition exactly associative
exact_floats = st.integers(-10**6, 10**6).map(float)
pairs = st.tuples(st.integers(-50, 50).map(float), st.integers(0, 20))

ELEMENTS = {
    "arithmetic": exact_floats,
    "minplus": st.one_of(exact_floats, st.just(math.inf)),
    "boolean": st.booleans(),
    "minselect": st.one_of(pairs, st.just((math.inf, MAX_PAYLOAD)), st.just((0.0, -1))),
}


def triples(name):
    e = ELEMENTS[name]
    return st.tuples(e, e, e)


class TestBuiltins:
    def test_arithmetic(self):
        s = make_arithmetic()
        assert s.add(2.0, 3.0) == 5.0
        assert s.mul(7.5, s.one) == 7.5
        assert s.add(s.zero, -4.0) == -4.0
        assert s.is_commutative_mul

    def test_minplus(self):
        s = make_minplus()
        assert s.add(3.0, 5.0) == 3.0
        assert s.mul(3.0, 5.0) == 8.0
        assert s.mul(2.0, s.zero) == math.inf
        assert (s.zero, s.one) == (math.inf, 0.0)

    def test_boolean(self):
        s = make_boolean()
        assert s.add(True, False) is True
        assert s.mul(True, False) is False
        assert s.add(False, False) is False

    def test_minselect(self):
        s = make_minselect()
        assert s.add((3.0, 7), (5.0, 2)) == (3.0, 7)
        # equal weights: smaller payload wins
        assert s.add((3.0, 7), (3.0, 2)) == (3.0, 2)
        assert s.mul((1.0, 7), (2.0, 9)) == (3.0, 9)
        assert not s.is_commutative_mul
        assert s.mul((1.0, 7), (2.0, 9)) != s.mul((2.0, 9), (1.0, 7))

    @pytest.mark.parametrize("name", ["arithmetic", "minplus", "boolean", "minselect"])
    def test_lookup_by_name(self, name):
        assert get_semiring(name).name == name

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown semiring"):
            get_semiring("maxtimes")


@pytest.mark.parametrize("name", ["arithmetic", "minplus", "boolean", "minselect"])
def test_axioms_sampled(name):
    s = get_semiring(name)

    @settings(max_examples=1000, deadline=None)
    @given(triples(name))
    def check(t):
        x, y, z = t
        add, mul = s.add, s.mul
        assert add(x, s.zero) == x and add(s.zero, x) == x
        assert mul(x, s.one) == x and mul(s.one, x) == x
        assert mul(x, s.zero) == s.zero and mul(s.zero, x) == s.zero
        assert add(x, y) == add(y, x)
        assert add(add(x, y), z) == add(x, add(y, z))
        assert mul(mul(x, y), z) == mul(x, mul(y, z))
        if s.is_commutative_mul:
            assert mul(x, y) == mul(y, x)

    check()


@pytest.mark.parametrize("name", ["arithmetic", "minplus", "boolean", "minselect"])
def test_vector_ops_agree_with_scalar_ops(name):
    s = get_semiring(name)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(ELEMENTS[name], ELEMENTS[name]), min_size=1, max_size=20))
    def check(xy):
        xs = s.asarray([x for x, _ in xy])
        ys = s.asarray([y for _, y in xy])
        vsum, vprod = s.vadd(xs, ys), s.vmul(xs, ys)
        for k, (x, y) in enumerate(xy):
            assert s.to_python(vsum[k]) == s.add(x, y)
            assert s.to_python(vprod[k]) == s.mul(x, y)

    check()


def test_minselect_zero_detection():
    s = make_minselect()
    assert s.is_zero(s.zero)
    assert not s.is_zero(s.one)
    assert s.is_zero((math.inf, 3))


class TestScalarKinds:
    def test_pairs_rejected_by_float_semiring(self):
        with pytest.raises(SemiringMismatchError):
            make_arithmetic().asarray([(1.0, 2)])

    def test_floats_rejected_by_minselect(self):
        with pytest.raises(SemiringMismatchError):
            make_minselect().asarray(np.array([1.0, 2.0]))

    def test_floats_rejected_by_boolean(self):
        with pytest.raises(SemiringMismatchError):
            make_boolean().asarray(np.array([1.0]))

    def test_check_is_strict(self):
        with pytest.raises(SemiringMismatchError):
            make_minplus().check(np.array([True]))

    def test_integer_arithmetic(self):
        s = make_arithmetic(integer=True)
        assert s.dtype == np.int64 and s.add(2, 3) == 5
        with pytest.raises(SemiringMismatchError):
            s.asarray(np.array([0.5]))


class TestSegmentedFold:
    def test_left_fold_order(self):
        s = make_arithmetic()
        vals = np.array([1e16, 1.0, -1e16, 1.0, 2.0])
        out = segmented_fold(vals, np.array([0, 3]), s)
        # ((1e16 + 1) - 1e16) == 0 in float64, proving a strict left fold
        assert out[0] == ((1e16 + 1.0) + -1e16)
        assert out[1] == 3.0

    def test_matches_python_reduce(self):
        rng = np.random.default_rng(3)
        s = make_arithmetic()
        vals = rng.standard_normal(500)
        starts = np.unique(np.concatenate([[0], rng.integers(1, 500, 40)]))
        out = segmented_fold(vals, starts, s)
        bounds = list(starts) + [500]
        for k in range(len(starts)):
            acc = vals[bounds[k]]
            for v in vals[bounds[k] + 1 : bounds[k + 1]]:
                acc = acc + v
            assert out[k] == acc

    def test_pairs(self):
        s = make_minselect()
        vals = np.array([(3.0, 4), (3.0, 1), (2.0, 9), (5.0, 0)], dtype=PAIR_DTYPE)
        out = segmented_fold(vals, np.array([0, 2]), s)
        assert [s.to_python(v) for v in out] == [(3.0, 1), (2.0, 9)]

    def test_empty(self):
        s = make_boolean()
        assert len(segmented_fold(np.zeros(0, bool), np.zeros(0, np.int64), s)) == 0
