import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from sml import algebra as alg
from sml import cocycle as cc
from sml import rankone as ro
from sml.cyclo import Cyclo

import oracles

K3 = alg.FinAbGroup((3,))
INV3 = alg.MonomialAut.diagonal(K3, [2])
Z3 = alg.MetabelianGroup(2, INV3)


def chacon_cocycle():
    con = ro.named_construction("chacon")
    # constant difference 2 gives a = (0, 1, 2) on every stage
    lab = cc.LabelSequence((), (cc.LabelPattern("cycle", ((0, (2,)),)),))
    return cc.ProductCocycle(con, lab, K3)


def schedule(directives, target, **kw):
    con, lab = cc.build_schedule(directives, target=target, **kw)
    return cc.ProductCocycle(con, lab, target)


COCYCLES = [
    chacon_cocycle(),
    schedule([{"claim": "fiber-shift", "k": 1}], K3, spacing=3, offset=2),
    schedule([{"claim": "orbit-average", "k": 1}], Z3, spacing=2),
    schedule([{"claim": "half-orbit", "k": 1}], Z3, spacing=4, offset=2),
    schedule([{"claim": "generator", "d": 1}, {"claim": "shift-symmetric", "k": 1, "z": 2}], Z3),
]


# --------------------------------------------------------------------- labels

def test_chacon_labels_give_frozen_beta():
    c = chacon_cocycle()
    assert c.stage_labels(1) == [(0, (0,)), (0, (1,)), (0, (2,))]
    assert cc.labels_beta(c, 2).beta == ((0,), (1,), (0,), (2,))


def test_label_patterns():
    d = cc.LabelPattern("difference", ((0, (1,)),)).labels(Z3, 4)
    assert all(Z3.mul(d[j], Z3.inverse(d[j + 1])) == (0, (1,)) for j in range(3))
    h = cc.LabelPattern("half_cycle", ((0, (1,)), (0, (2,)))).labels(Z3, 6)
    assert h[3:] == [h[3]] * 3


@pytest.mark.parametrize("c", COCYCLES, ids=range(len(COCYCLES)))
def test_beta_matches_recursion_oracle(c):
    for N in (2, 3, 4):
        got = cc.labels_beta(c, N).beta
        ref = oracles.tower_cocycle(c, N)
        if not isinstance(c.target, alg.MetabelianGroup):
            ref = [k for _, k in ref]
        assert list(got) == ref


def test_cocycle_power_chacon():
    assert cc.cocycle_power(chacon_cocycle(), 1, 2) == {0: (2,), 1: (1,), 2: (1,)}


def test_conjugation_identity_and_shift_symmetry():
    c = COCYCLES[2]
    assert all(cc.conjugation_identity_holds(c, n) for n in range(1, 6))
    c = COCYCLES[4]
    assert cc.shift_symmetry_holds(c, 5, 2)


def test_conjugation_identity_refuses_spacer_stage():
    with pytest.raises(ro.HypothesisMismatch):
        cc.conjugation_identity_holds(chacon_cocycle(), 2)


def test_labels_must_start_at_identity():
    with pytest.raises(ValueError):
        cc.ProductCocycle(ro.named_construction("chacon"), cc.LabelSequence((((1,), (0,), (0,)),)), K3)


# ------------------------------------------------------------------ correlations

def test_chacon_twisted_value_frozen():
    c = chacon_cocycle()
    A = ro.LevelSet.full(c.construction, 1)
    tc = cc.twisted_correlation(c, [1], A, A, 1, 2)
    w = Cyclo.root(3, 2)
    assert tc.value == Cyclo.from_powers(3, {2: Fraction(1, 3)})
    assert abs(complex(tc.value) - complex(w) / 3) < 1e-12
    assert tc.radius == Fraction(1, 3)


@st.composite
def twisted_cases(draw):
    c = draw(st.sampled_from(COCYCLES))
    con = c.construction
    n0 = draw(st.integers(2, 3))
    h0 = con.height(n0)
    A = sorted(draw(st.sets(st.integers(0, h0 - 1), min_size=1)))
    B = sorted(draw(st.sets(st.integers(0, h0 - 1), min_size=1)))
    N = n0 + draw(st.integers(0, 2))
    while con.height(N) > 5000 and N > n0:
        N -= 1
    m = draw(st.integers(0, con.height(N) - 1))
    chi = draw(st.integers(0, 2))
    D = c.Z.d_order
    d1, d2 = draw(st.integers(0, D - 1)), draw(st.integers(0, D - 1))
    return c, n0, A, B, m, N, chi, d1, d2


@given(twisted_cases())
def test_twisted_correlation_matches_point_sum(case):
    c, n0, A, B, m, N, chi, d1, d2 = case
    tc = cc.twisted_correlation(c, [chi], ro.LevelSet(n0, A), ro.LevelSet(n0, B), m, N, d1=d1, d2=d2)
    val, rad = oracles.twisted_direct(c, [chi], A, B, n0, m, N, d1, d2)
    assert abs(complex(tc.value) - val) < 1e-9
    assert tc.radius == rad


@given(twisted_cases())
def test_trivial_character_is_the_plain_correlation(case):
    c, n0, A, B, m, N, _, _, _ = case
    if isinstance(c.target, alg.MetabelianGroup):
        return
    LA, LB = ro.LevelSet(n0, A), ro.LevelSet(n0, B)
    tc = cc.twisted_correlation(c, [0], LA, LB, m, N)
    bd = ro.correlation(c.construction, LA, LB, m, N)
    assert tc.value.rational() == bd.lo and tc.radius == bd.width


@given(twisted_cases())
def test_skew_bounds_sum_to_plain_correlation(case):
    c, n0, A, B, m, N, _, _, _ = case
    LA, LB = ro.LevelSet(n0, A), ro.LevelSet(n0, B)
    Z = c.Z
    elems = [(d, (k,)) for d in range(Z.d_order) for k in range(3)]
    norm = (lambda z: z) if isinstance(c.target, alg.MetabelianGroup) else (lambda z: z[1])
    z1 = norm(elems[1 % len(elems)])
    lo = sum(cc.skew_correlation(c, LA, z1, LB, norm(z2), m, N).lo for z2 in elems)
    bd = ro.correlation(c.construction, LA, LB, m, N)
    # summing over z2 counts every determined pair once, at weight w / |Z|
    assert lo * len(elems) == bd.lo


# ------------------------------------------------------------------ weak limits

A3 = ro.LevelSet(3, [0, 1, 3])
B3 = ro.LevelSet(3, [1, 2, 3])


def test_fiber_shift_limit():
    rep = cc.verify_weak_limit_cocycle(COCYCLES[1], "fiber-shift", A=A3, B=B3, k=1, chi=[1],
                                       min_height=10_000)
    assert rep.passed and rep.stage == 8


def test_orbit_average_limit_is_minus_half_scaled():
    rep = cc.verify_weak_limit_cocycle(COCYCLES[2], "orbit-average", A=A3, B=B3, k=1, chi=[1],
                                       min_height=10_000)
    assert rep.passed
    assert rep.records[0]["predicted"]["exact"] == "-1/12"


def test_half_orbit_limit():
    c = COCYCLES[3]
    h3 = c.construction.height(3)
    A = ro.LevelSet.interval(3, 0, h3 // 2)
    B = ro.LevelSet.interval(3, 1, h3)
    for d1, d2 in [(0, 0), (1, 1), (0, 1)]:
        rep = cc.verify_weak_limit_cocycle(c, "half-orbit", A=A, B=B, k=1, chi=[1], d1=d1, d2=d2)
        assert rep.passed, rep.records


def test_verify_refuses_unbalanced_schedule():
    with pytest.raises(ro.HypothesisMismatch):
        cc.verify_weak_limit_cocycle(chacon_cocycle(), "fiber-shift", A=A3, B=B3, k=1, chi=[1])


# --------------------------------------------------------------- orthogonality

def test_orthogonality_verdicts():
    assert cc.orthogonality_test(None, [1], [2], action=INV3).verdict == "equivalent-by-symmetry"
    K7 = alg.FinAbGroup((7,))
    v = cc.orthogonality_test(None, [1], [3], action=alg.MonomialAut.diagonal(K7, [2]))
    assert v.verdict == "orthogonal-witnessed"


def test_spectral_grid_mean_is_zeroth_coefficient():
    c = COCYCLES[1]
    f = ro.LevelSet(3, [0, 1])
    tab = cc.spectral_estimate(c, [1], f, 6, 64)
    assert abs(sum(tab.density) / len(tab.density) - tab.coefficients[0].real) < 1e-9


# ------------------------------------------------------------------------ JSON

@pytest.mark.parametrize("c", COCYCLES, ids=range(len(COCYCLES)))
def test_cocycle_json_round_trip(c):
    rec = json.loads(json.dumps(cc.cocycle_to_json(c)))
    c2 = cc.cocycle_from_json(rec)
    assert cc.cocycle_to_json(c2) == rec
    assert all(c2.stage_labels(n) == c.stage_labels(n) for n in range(1, 7))
