from math import factorial

import pytest
from hypothesis import given, strategies as st

from sml import multiplicity as mu
from sml.mset import MSet, parse_mset

import oracles

finite_sets = st.sets(st.integers(1, 30), min_size=1, max_size=5).map(lambda s: MSet(tuple(s)))


# --------------------------------------------------------------- set calculus

@given(finite_sets, finite_sets)
def test_diamond_commutes(E, F):
    assert mu.diamond(E, F) == mu.diamond(F, E)


@given(finite_sets, finite_sets, finite_sets)
def test_diamond_associates(E, F, G):
    assert mu.diamond(mu.diamond(E, F), G) == mu.diamond(E, mu.diamond(F, G))


@given(finite_sets)
def test_diamond_with_one_and_empty(E):
    assert mu.diamond(E, MSet((1,))).as_set() == E.as_set() | {1}
    assert mu.diamond(E, MSet()) == E


@given(finite_sets, st.integers(1, 6))
def test_scale_then_factor(E, n):
    g, E2 = mu.factor_scale(mu.scale(n, E))
    assert g % n == 0
    assert mu.scale(g, E2) == mu.scale(n, E)


def test_diamond_of_infinite_truncations_is_exact_below_bound():
    E = parse_mset("2,4,8,tail:pow(2)")
    D = mu.diamond(E, MSet((3,)))
    assert D.as_set() == {2, 3, 4, 6, 8}
    assert D.tail == "diamond(pow-2)"
    assert mu.scale(3, mu.poisson_sets("exp_p", {"p": 2})).tail == "scale(3;pow-2)"
    assert mu.diamond(D, E).tail == "diamond(diamond-pow-2;pow-2)"


def test_semigroup_closure():
    assert mu.semigroup_closure([2], "mul", 40).as_set() == {2, 4, 8, 16, 32}
    assert mu.semigroup_closure([3, 5], "add", 12).as_set() == {3, 5, 6, 8, 9, 10, 11, 12}
    assert mu.is_semigroup({2, 4, 8}, "mul", 8)
    assert not mu.is_semigroup({2, 3}, "add", 6)


# ----------------------------------------------------------------- permutations

@given(st.permutations(range(6)), st.permutations(range(6)))
def test_compose_and_inverse(p, q):
    p, q = tuple(p), tuple(q)
    assert mu.compose(p, q) == oracles.compose(p, q)
    assert mu.compose(p, mu.inverse(p)) == tuple(range(6))


@given(st.permutations(range(6)))
def test_centralizer_order_by_counting(p):
    p = tuple(p)
    count = sum(1 for x in oracles.perms(6) if mu.compose(x, p) == mu.compose(p, x))
    assert mu.centralizer_order(mu.cycle_type(p)) == count


def test_catalog_sizes():
    assert [len(mu.subgroup_catalog(n)) for n in (3, 4)] == [6, 30]


@pytest.mark.parametrize("n", [3, 4])
def test_catalog_generates_its_elements(n):
    for G in mu.subgroup_catalog(n):
        assert set(G.elements()) == oracles.generate(n, G.generators or [tuple(range(n))])


@pytest.mark.parametrize("n", [2, 3, 4])
def test_double_cosets_all_subgroups(n):
    for G in mu.subgroup_catalog(n):
        els = oracles.generate(n, G.generators or [tuple(range(n))])
        for k in range(1, n + 1):
            ref = oracles.double_cosets_bruteforce(els, n, k)
            assert mu.double_coset_count_enum(G, n, k) == ref
            assert mu.double_coset_count_burnside(G, n, k) == ref


def test_power_multiplicities_trivial_group():
    for n in range(2, 6):
        want = {factorial(n) // factorial(k) for k in range(1, n)}
        assert mu.power_multiplicities(n).as_set() == want


def test_power_multiplicities_stabilizer_quotient():
    for n in range(2, 7):
        G = mu.PermGroupSpec.symmetric(n, n - 1)
        assert mu.power_multiplicities(n, G).as_set() == set(range(2, n + 1))


def test_perm_group_json_round_trip():
    G = mu.PermGroupSpec.cyclic(5, 3)
    H = mu.PermGroupSpec.from_json(G.to_json())
    assert set(H.elements()) == set(G.elements())


# ------------------------------------------------------------------ Poisson

def test_poisson_families():
    assert mu.poisson_terms("example82", {}, 5) == [1, 3, 15, 105, 945]
    assert mu.poisson_terms("exp_p", {"p": 2}, 3) == [2, 4, 8]
    s2 = [[1, 0]]
    assert mu.poisson_terms("A", {"m": 2, "k": 2, "generators": s2}, 3) == [1, 3, 15]
    with pytest.raises(ValueError, match="provide generators"):
        mu.poisson_terms("A", {"m": 3, "k": 2}, 3)


def test_poisson_tail_descriptors():
    assert mu.poisson_sets("example82").tail == "oddfact"
    assert mu.poisson_sets("exp_p", {"p": 3}).tail == "pow(3)"


# ------------------------------------------------------------------ planner

@pytest.mark.parametrize("E, route", [
    ("1,5", "Thm2.1"),
    ("2,3,6", "Thm5.4"),
    ("2,5", "Thm4.1"),
    ("7", "Thm6.7"),
    ("6,18", "Thm5.7"),
    ("2,4,8,tail:pow(2)", "Thm4.1"),
    ("3,5,6,8,tail:semigroup(add-3-5)", "Cor5.5"),
    ("3,4", "Thm7.1-infinite"),
    ("3,5", "Thm7.1-infinite"),
])
def test_planner_routes(E, route):
    assert mu.plan(parse_mset(E)).route == route


def test_planner_payloads():
    p = mu.plan(parse_mset("1,5"))
    assert p.parameters["verified"] and p.parameters["realization"]["summands"] == [11]
    assert mu.plan(parse_mset("2,3,6")).parameters["factors"] == [[2], [3]]
    assert mu.plan(parse_mset("3,4")).caveats == ["open (probability-preserving)"]
    assert mu.plan(parse_mset("6,18")).parameters == {"n": 6, "E": MSet((3,)).to_json()}


@given(st.lists(st.integers(2, 6), min_size=2, max_size=3))
def test_diamond_decomposition_recovers_products(ps):
    E = MSet()
    for p in ps:
        E = mu.diamond(E, MSet((p,)))
    fac = mu.diamond_decomposition(E.elements)
    assert fac is not None
    F = MSet()
    for p in fac:
        F = mu.diamond(F, MSet((p,)))
    assert F == E
