import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multicoal.arrays import (
    ArrayIndexSet, RateArray, RecursionViolated, array_for_type, array_from_representation,
    check_recursion_array, recover_representation, tri,
)
from multicoal.builtin import example
from multicoal.measures import FiniteMeasureOnCube
from multicoal.rates import merger_rate
from multicoal.verification import random_measure_set, random_representation

seeds = st.integers(0, 2 ** 32 - 1)


def direct_moment(J, b, k):
    total = 0.0
    for w, s in J.atoms:
        term = w
        for sj, bj, kj in zip(s, b, k):
            term *= (sj ** kj if kj else 1.0) * ((1 - sj) ** (bj - kj) if bj > kj else 1.0)
        total += term
    return total


# -- index set -----------------------------------------------------------------------

def test_triangular_index():
    assert [tri(b, k) for b in range(3) for k in range(b + 1)] == list(range(6))


def test_index_set_basics():
    idx = ArrayIndexSet(2, (1, 0), b_max=4)
    assert idx.size == 15
    assert idx.minimal == [(2, 0), (0, 1)]
    assert not idx.outside_box((1, 0)) and idx.outside_box((0, 1))
    b, k = idx.unflat(idx.flat((3, 2), (1, 2)))
    assert (b, k) == ((3, 2), (1, 2))
    with pytest.raises(IndexError):
        idx.flat((5, 0), (0, 0))


@pytest.mark.parametrize("d, ell, b_max", [(2, (0,), 4), (1, (-1,), 4), (1, (3,), 3)])
def test_index_set_errors(d, ell, b_max):
    with pytest.raises(ValueError):
        ArrayIndexSet(d, ell, b_max)


def test_domain_mask_counts():
    idx = ArrayIndexSet(2, (1, 1), b_max=3)
    _, k = idx.axis_bk()
    inside = sum(1 for a in k for c in k if a <= 1 and c <= 1)
    assert idx.domain_mask().sum() == idx.size ** 2 - inside


# -- construction ------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["multitype-kingman", "seed-bank", "csbp-local"])
def test_type_array_matches_merger_rates(name):
    m = example(name)
    for i in range(m.d):
        a = array_for_type(m, i, b_max=5)
        for b in itertools.product(range(6), repeat=m.d):
            for k in itertools.product(*[range(x + 1) for x in b]):
                if not a.index.outside_box(k):
                    continue
                assert math.isclose(a.value(b, k), merger_rate(m, b, k, i), rel_tol=1e-13,
                                    abs_tol=1e-15)


def test_type_array_random_sets():
    rng = np.random.default_rng(5)
    for _ in range(10):
        m = random_measure_set(rng)
        i = int(rng.integers(m.d))
        a = array_for_type(m, i, b_max=6)
        for b in itertools.product(range(7), repeat=m.d):
            for k in itertools.product(*[range(x + 1) for x in b]):
                if a.index.outside_box(k):
                    assert math.isclose(a.value(b, k), merger_rate(m, b, k, i),
                                        rel_tol=1e-12, abs_tol=1e-14)


def test_rho_by_minimal_element():
    J = FiniteMeasureOnCube.empty(2)
    a = array_from_representation((0, 1), 4, {(1, 0): 0.5, (0, 2): 2.0}, J)
    assert a.value((3, 3), (1, 0)) == 0.5
    assert a.value((3, 3), (0, 2)) == 2.0
    assert a.value((3, 3), (1, 2)) == 0.0
    with pytest.raises(ValueError):
        array_from_representation((0, 1), 4, {(1, 1): 1.0}, J)
    with pytest.raises(ValueError):
        array_from_representation((0, 1), 4, [-1.0, 0.0], J)
    with pytest.raises(IndexError):
        a.value((3, 3), (0, 1))


def test_values_are_validated():
    idx = ArrayIndexSet(1, (0,), 3)
    with pytest.raises(ValueError):
        RateArray(idx, np.full(idx.size, -1.0))
    with pytest.raises(ValueError):
        RateArray(idx, np.zeros(idx.size + 1))


def test_translation():
    ell, rho, J = random_representation(np.random.default_rng(3), d=2)
    a = array_from_representation(ell, 8, rho, J)
    x = (1, 2)
    b, k = (2, 1), (1, 1)
    assert a.translated(x, b, k) == a.value((3, 3), (2, 3))


# -- recursion -----------------------------------------------------------------------

@settings(max_examples=30)
@given(seeds)
def test_representation_arrays_satisfy_recursion(seed):
    ell, rho, J = random_representation(np.random.default_rng(seed))
    a = array_from_representation(ell, 10, rho, J)
    check = check_recursion_array(a)
    assert check.max_residual <= 1e-12


def test_perturbation_is_localized():
    ell, rho, J = random_representation(np.random.default_rng(11), d=2)
    a = array_from_representation(ell, 8, rho, J)
    b, k = (4, 5), (3, 3)
    vals = np.array(a.values)
    vals[a.index.flat(b, k)] += 1e-3
    check = check_recursion_array(a.with_values(vals))
    assert math.isclose(check.max_residual, 1e-3, rel_tol=1e-6)
    assert check.involves(b, k)
    with pytest.raises(RecursionViolated):
        recover_representation(a.with_values(vals))


# -- recovery ------------------------------------------------------------------------

@settings(max_examples=30)
@given(seeds)
def test_round_trip_recovers_rho_and_moments(seed):
    ell, rho, J = random_representation(np.random.default_rng(seed))
    a = array_from_representation(ell, 16, rho, J)
    rep = recover_representation(a)
    assert np.all(np.abs(rep.rho - rho) <= 2.0 ** -12)
    # the error proxy bounds the actual error for these geometric tails
    assert np.all(rep.rho - rho >= -1e-15)
    assert np.all(rep.rho - rho <= rep.rho_error + 1e-15)
    idx = a.index
    d = idx.d
    for b in itertools.product(range(4), repeat=d):
        for k in itertools.product(*[range(x + 1) for x in b]):
            if idx.outside_box(k) and rep.exact[idx.flat(b, k)]:
                assert abs(rep.moment(b, k) - direct_moment(J, b, k)) <= 1e-10
    for order in range(11):
        if idx.outside_box((order,) * d) and rep.exact[idx.flat((order,) * d, (order,) * d)]:
            assert abs(rep.power_moment((order,) * d) - direct_moment(J, (order,) * d,
                                                                        (order,) * d)) <= 1e-10


def test_single_type_rho_error_proxy():
    J = FiniteMeasureOnCube.from_atoms(1, [(1.0, (0.5,))])
    a = array_from_representation((0,), 16, [0.25], J)
    rep = recover_representation(a)
    # mu_{16, 1} = rho + 2^-16 and the proxy is the last decrement 2^-15 - 2^-16
    assert math.isclose(rep.rho[0] - 0.25, 2.0 ** -16, rel_tol=1e-9)
    assert math.isclose(rep.rho_error[0], 2.0 ** -16, rel_tol=1e-9)


def test_compatibility_of_translated_tables():
    ell, rho, J = random_representation(np.random.default_rng(2), d=3)
    rep = recover_representation(array_from_representation(ell, 9, rho, J))
    assert rep.compatibility_residual(3) <= 1e-12
