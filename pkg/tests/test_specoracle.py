from math import factorial

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sml import multiplicity as mu
from sml import specoracle as so

import oracles


@pytest.mark.parametrize("n", [1, 2, 3])
def test_ratio_law(n):
    for s in range(n, 5):
        r = so.tensor_vs_sym(so.FormalSpectrum.simple(s), n)
        assert r.mset.as_set() == {factorial(n)}
        assert r.extra["sym"]["elements"] == [1]
        assert r.census["total"] == factorial(s) // factorial(s - n)


@pytest.mark.parametrize("n", [2, 3])
def test_singleton_law_over_catalog(n):
    spec = so.FormalSpectrum.simple(n + 1)
    for G in mu.subgroup_catalog(n):
        order = len(oracles.generate(n, G.generators or [tuple(range(n))]))
        r = so.invariant_power_mset(spec, n, G)
        assert r.mset.as_set() == {factorial(n) // order}


def test_invariant_power_rejects_wrong_degree():
    with pytest.raises(so.OracleError):
        so.invariant_power_mset(so.FormalSpectrum.simple(4), 3, mu.PermGroupSpec.trivial(2))
    with pytest.raises(so.OracleError):
        so.tensor_vs_sym(so.FormalSpectrum.simple(2), 3)


def test_null_points_are_excluded():
    assert so.is_null(("a", "a", "b")) and not so.is_null(("a", "b"))
    r = so.tensor_vs_sym(so.FormalSpectrum.simple(3), 2)
    assert r.census["null_points"] == 3


@pytest.mark.parametrize("n", [2, 3, 4])
def test_cartesian_grades_match_double_cosets(n):
    r = so.cartesian_mset(n)
    grades = r.census["grades"]
    for k in range(1, n):
        assert grades[str(k)] == oracles.double_cosets_bruteforce(
            oracles.generate(n, [tuple(range(n))]), n, n - k)


def test_cartesian_quotient_by_point_stabilizer():
    r = so.cartesian_mset(4, mu.PermGroupSpec.symmetric(4, 3))
    assert r.mset.as_set() == {2, 3, 4}


def test_exp_variants():
    assert so.exp_mset(2, 4).mset.as_set() == {2, 4, 8, 16}
    assert so.exp_mset(2, 4).mset.tail == "pow(2)"
    r = so.exp_mset(1, 3, "sym2")
    assert r.mset.as_set() == {1, 3, 15} and r.mset.tail == "oddfact"


@given(st.integers(2, 5), st.integers(1, 6), st.integers(0, 10_000))
def test_gn_rep_homogeneous(n, m, seed):
    assert so.gn_rep_check(n, m, seed=seed).mset.as_set() == {n}


def test_gn_rep_rejects_degenerate_characters():
    with pytest.raises(so.OracleError, match="genericity violated"):
        so.gn_rep_check(2, 1, characters=np.array([[5, 5]]))
    with pytest.raises(so.OracleError, match="genericity violated"):
        so.gn_rep_check(2, 2, characters=np.array([[1, 2], [2, 1]]))


def test_strong_disjoint_product():
    A = so.FormalSpectrum(("a", "b"), (1, 2))
    B = so.FormalSpectrum(("c",), (3,))
    r = so.strong_disjoint_product(A, B)
    assert r.mset.as_set() == {3, 6}
    with pytest.raises(so.OracleError, match="not strongly disjoint"):
        so.strong_disjoint_product(A, so.FormalSpectrum(("a",)))


def test_simple_times_simple_stays_simple():
    r = so.strong_disjoint_product(so.FormalSpectrum.simple(3, "x"), so.FormalSpectrum.simple(2, "y"))
    assert r.mset.as_set() == {1}
