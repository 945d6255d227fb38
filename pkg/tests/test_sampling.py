import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import cumulative_times
from sampled_ioss import sampling
from sampled_ioss.sampling import (
    bounded_gap_random, explicit, materialize, n_per_window, pathological_periods, periodic, shift_check,
)

ROT = np.array([[1, 1], [-1, 1]]) / math.sqrt(2)
C = np.array([[1.0, 0.0]])


class TestMaterialize:
    def test_periodic(self):
        assert materialize(periodic(4), 1, 12).times == (4, 8, 12)

    def test_explicit_from_first(self):
        assert materialize(explicit([2, 3, 1]), 1, 10).times == (2, 5, 6, 8)

    def test_explicit_from_second(self):
        # gaps 3, 1, 2, 3, 1, ... so the fifth time, 10, still fits the horizon
        assert materialize(explicit([2, 3, 1]), 2, 10).times == (3, 4, 6, 9, 10)

    def test_periodic_with_offset(self):
        assert materialize(periodic(3, offset=1), 1, 10).times == (1, 4, 7, 10)

    def test_non_cyclic_tail(self):
        sch = sampling.counterexample_schedule([1, 2], 4)
        assert sch.gap_seq(1, 5) == [1, 2, 4, 4, 4]
        assert materialize(sch, 1, 20).times == (1, 3, 7, 11, 15, 19)

    def test_zero_gaps_collapse_with_warning(self):
        with pytest.warns(UserWarning, match="zero gap"):
            K = materialize(explicit([0, 2]), 1, 7)
        assert K.times == (2, 4, 6)
        assert 0 not in K

    def test_bad_args(self):
        with pytest.raises(sampling.SchemeError):
            materialize(periodic(2), 0, 10)
        with pytest.raises(sampling.SchemeError):
            periodic(0)

    def test_mask_and_csv(self):
        K = materialize(periodic(3), 1, 9)
        assert list(np.flatnonzero(K.mask(9))) == [3, 6, 9]
        assert K.to_csv() == "t\n3\n6\n9\n"


def test_random_scheme_gaps_and_determinism():
    a, b = bounded_gap_random(5, 7), bounded_gap_random(5, 7)
    ga = a.gap_seq(1, 1000)
    assert ga == b.gap_seq(1, 1000)
    assert min(ga) >= 1 and max(ga) <= 5
    # order independence of the counter-based generator
    assert a.gap(900) == ga[899]
    assert bounded_gap_random(5, 8).gap_seq(1, 50) != ga[:50]


def test_n_per_window_counts():
    sch = n_per_window(3, 10, seed=4)
    K = materialize(sch, 1, 100)
    for w in range(10):
        assert sum(10 * w < t <= 10 * w + 10 for t in K.times) == 3
    assert max(np.diff((0,) + K.times)) <= sch.delta_max
    assert sch.delta_max == 17


class TestShift:
    def test_periodic_example(self):
        assert shift_check(periodic(4), 1, 2, 1, 20)

    def test_explicit_example(self):
        assert shift_check(explicit([2, 3, 1]), 1, 1, 1, 20)
        assert materialize(explicit([2, 3, 1]), 2, 20).times[0] + 2 == 5

    def test_zero_index_rejected(self):
        with pytest.raises(sampling.SchemeError):
            shift_check(periodic(4), 1, 0, 1, 20)

    def test_horizon_too_short(self):
        with pytest.raises(sampling.HorizonTooShort):
            shift_check(periodic(4), 1, 3, 3, 20)


class TestValidate:
    def test_random(self):
        rep = sampling.scheme_validate(bounded_gap_random(5, 7), 1000)
        assert rep.ok and rep.min_gap >= 1 and rep.max_gap <= 5

    def test_explicit_violation(self):
        rep = sampling.scheme_validate(explicit([2, 9, 1], delta_max=5), 10)
        assert not rep.ok and rep.violations[0] == (2, 9)

    def test_full_sampling(self):
        rep = sampling.scheme_validate(periodic(1), 50)
        assert rep.ok and rep.min_gap == rep.max_gap == 1


class TestPathological:
    def test_rotation(self):
        got = pathological_periods(ROT, C, 8)
        assert 4 in got and 8 in got and 2 not in got
        assert got == [4, 8]

    def test_diagonal_real(self):
        assert pathological_periods(np.diag([0.5, 0.3]), [[1.0, 1.0]], 30) == []

    def test_unobservable(self):
        with pytest.raises(sampling.UnobservableError):
            pathological_periods(np.diag([0.5, 0.3]), [[1.0, 0.0]], 4)

    def test_marginal_reported(self):
        rep = sampling.period_report(np.diag([0.5, 0.5 * (1 + 3e-8)]), [[1.0, 1.0]], 2)
        assert rep.pathological == [] and rep.marginal == [1]


class TestJson:
    def test_roundtrip(self):
        for sch in (periodic(4), bounded_gap_random(5, 7), explicit([2, 3, 1]), n_per_window(2, 6, 1)):
            again = sampling.scheme_from_dict(sch.to_dict())
            assert again.gap_seq(1, 40) == sch.gap_seq(1, 40)

    def test_schema_errors(self):
        import jsonschema

        with pytest.raises(jsonschema.ValidationError):
            sampling.scheme_from_dict({"kind": "periodic"})
        with pytest.raises(jsonschema.ValidationError):
            sampling.scheme_from_json('{"kind": "bounded_gap_random", "delta_max": 0, "seed": 1}')


# properties ---------------------------------------------------------------

schemes = st.one_of(
    st.integers(1, 9).map(periodic),
    st.tuples(st.integers(1, 12), st.integers(0, 2 ** 31)).map(lambda a: bounded_gap_random(*a)),
    st.lists(st.integers(1, 7), min_size=1, max_size=6).map(explicit),
    st.tuples(st.integers(1, 5), st.integers(0, 100)).map(lambda a: n_per_window(a[0], 6, a[1])),
)


@settings(max_examples=200)
@given(schemes, st.integers(1, 30), st.integers(1, 8), st.integers(1, 8))
def test_shift_property(sch, i, j, k):
    assert shift_check(sch, i, j, k, 40 * sch.delta_max)


@given(schemes, st.integers(1, 20), st.integers(1, 150), st.integers(0, 150))
def test_prefix_monotone(sch, i, T, extra):
    a = materialize(sch, i, T).times
    b = materialize(sch, i, T + extra).times
    assert b[: len(a)] == a and all(t > T for t in b[len(a):])


@given(schemes, st.integers(1, 20), st.integers(1, 200))
def test_times_match_definition(sch, i, T):
    K = materialize(sch, i, T)
    assert list(K.times) == cumulative_times(sch.gap, i, T)
    d = np.diff((0,) + K.times)
    assert np.all(d >= 1) and np.all(d <= sch.delta_max)
    assert list(d[1:]) == [sch.gap(i + j) for j in range(1, len(K.times))]


@given(st.integers(1, 9), st.integers(1, 20), st.integers(1, 200))
def test_periodic_independent_of_index(p, i, T):
    assert materialize(periodic(p), i, T).times == tuple(range(p, T + 1, p))


@given(st.floats(0.05, 2.0), st.floats(0.05, 0.95), st.booleans())
def test_distinct_real_modes_never_pathological(lam, ratio, flip):
    mu = lam * ratio * (-1 if flip else 1)
    assert pathological_periods(np.diag([lam, mu]), [[1.0, 1.0]], 40) == []
