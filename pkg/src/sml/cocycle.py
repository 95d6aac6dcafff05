"""Product-type cocycles of rank-one towers and their twisted correlations.

Labels a_n(j) in a target group Z are attached to the columns of tower n;
beta_{n+1} on column j equals beta_n * a_n(j) and is the identity on new
spacers.  The cocycle over m steps on level i is beta(i) * beta(i+m)^-1.

Every target is handled as Z = D x| K with D cyclic acting on a finite abelian
K through powers of a monomial automorphism; a plain abelian fiber is the case
|D| = 1.
"""
from __future__ import annotations

import cmath
import logging
from math import gcd
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from . import algebra as alg
from .algebra import FinAbGroup, MetabelianGroup, MonomialAut
from .cyclo import Cyclo
from .rankone import (
    InsufficientStage,
    HypothesisMismatch,
    LevelSet,
    TailRule,
    TowerConstruction,
    _qstr,
    auto_stage,
    construction_from_json,
    expand,
    materialize,
    measure,
    pair_stats,
    stage_cap,
    stage_matches,
)

logger = logging.getLogger(__name__)

MAX_TABULATED = 2048
EXACT_EXPONENT = 12

Target = Union[FinAbGroup, MetabelianGroup]


def as_metabelian(target: Target) -> MetabelianGroup:
    if isinstance(target, MetabelianGroup):
        return target
    return MetabelianGroup(1, MonomialAut.identity(target))


class GroupCoding:
    """Integer codes 0..|Z|-1 for Z = D x| K with tabulated product and inverse."""

    def __init__(self, target: Target):
        Z = as_metabelian(target)
        self.Z = Z
        self.K = Z.fiber
        self.D = Z.d_order
        nk = self.K.order
        self.size = self.D * nk
        if self.size > MAX_TABULATED:
            raise ValueError(f"target of order {self.size} is too large to tabulate (limit {MAX_TABULATED})")
        q = np.asarray(self.K.summands, dtype=np.int64)
        radix = np.ones(len(q), dtype=np.int64)
        for j in range(len(q) - 2, -1, -1):
            radix[j] = radix[j + 1] * q[j + 1]
        self._radix = radix
        self._q = q
        codes = np.arange(nk, dtype=np.int64)
        res = (codes[:, None] // radix[None, :]) % q[None, :]
        self.residues = res
        add = (res[:, None, :] + res[None, :, :]) % q
        addk = (add * radix).sum(axis=2)
        act = np.zeros((self.D, nk), dtype=np.int64)
        pw = MonomialAut.identity(self.K)
        for d in range(self.D):
            perm = np.asarray(pw.perm)
            units = np.asarray(pw.units, dtype=np.int64)
            img = np.zeros_like(res)
            img[:, perm] = (res * units[None, :]) % q[perm][None, :]
            act[d] = (img * radix).sum(axis=1)
            pw = Z.action.compose(pw)
        self.act = act
        dd = np.arange(self.size) // nk
        kk = np.arange(self.size) % nk
        d_new = (dd[:, None] + dd[None, :]) % self.D
        k_new = addk[kk[:, None], act[dd[:, None], kk[None, :]]]
        self.mul = d_new * nk + k_new
        negk = ((-res) % q * radix).sum(axis=1)
        inv = np.zeros(self.size, dtype=np.int64)
        for z in range(self.size):
            d, k = dd[z], kk[z]
            dinv = (-d) % self.D
            inv[z] = dinv * nk + act[dinv, negk[k]]
        self.inv = inv
        self._labels = None

    def kcode(self, k: Sequence[int]) -> int:
        return int(sum((int(x) % int(qq)) * int(rr) for x, qq, rr in zip(k, self._q, self._radix)))

    def code(self, z) -> int:
        d, k = z
        return (int(d) % self.D) * self.K.order + self.kcode(k)

    def element(self, code: int):
        d, k = divmod(int(code), self.K.order)
        return d, tuple(int(x) for x in self.residues[k])


def _norm_k(K: FinAbGroup, k) -> tuple[int, ...]:
    if isinstance(k, int):
        k = (k,) + (0,) * (K.rank - 1)
    return K.element(list(k))


def normalize_element(target: Target, z):
    """Accept k, an int for rank-one K, or (d, k) for a semidirect target."""
    Z = as_metabelian(target)
    if isinstance(target, MetabelianGroup):
        d, k = z
        return int(d) % Z.d_order, _norm_k(Z.fiber, k)
    return 0, _norm_k(Z.fiber, z)


# --------------------------------------------------------------- label rules

@dataclass(frozen=True)
class LabelPattern:
    """Per-stage label generator.

      identity                     a(j) = e
      difference(g)                a(j) = g^-j, so a(j) a(j+1)^-1 = g
      cycle(q_1..q_p)              a(j) a(j+1)^-1 = q_(j mod p)
      half_cycle(q_1..q_p)         cycle on j < r/2, identity on the upper half
      shift_symmetric(q.., z)      cycle on j < z, then a(j+z) = v(a(j)), v the fiber action
    """

    kind: str
    elements: tuple = ()
    z: int = 0

    def labels(self, Z: MetabelianGroup, r: int) -> list:
        e = Z.identity()
        if self.kind == "identity":
            return [e] * r
        if self.kind == "difference":
            g = self.elements[0]
            ginv = Z.inverse(g)
            out = [e]
            for _ in range(r - 1):
                out.append(Z.mul(out[-1], ginv))
            return out
        if self.kind in ("cycle", "half_cycle", "shift_symmetric"):
            qs = self.elements
            upto = {"cycle": r, "half_cycle": (r + 1) // 2, "shift_symmetric": min(self.z or r, r)}[self.kind]
            out = [e]
            for j in range(upto - 1):
                out.append(Z.mul(Z.inverse(qs[j % len(qs)]), out[-1]))
            if self.kind == "half_cycle":
                out += [e] * (r - upto)
            elif self.kind == "shift_symmetric":
                while len(out) < r:
                    d, k = out[len(out) - upto]
                    out.append((d, alg.apply_aut(Z.action, k)))
            return out
        raise ValueError(f"unknown label pattern {self.kind!r}")

    def to_json(self) -> dict:
        rec = {"kind": self.kind, "elements": [[d, list(k)] for d, k in self.elements]}
        if self.kind == "shift_symmetric":
            rec["z"] = self.z
        return rec


@dataclass(frozen=True)
class LabelSequence:
    """Explicit labels for the first stages, then a repeating list of patterns."""

    stages: tuple = ()
    cycle: tuple[LabelPattern, ...] = ()
    offset: int = 0

    def at(self, Z: MetabelianGroup, n: int, r: int) -> list:
        if n <= len(self.stages):
            lab = list(self.stages[n - 1])
            if len(lab) != r:
                raise ValueError(f"stage {n} has {len(lab)} labels but r_{n} = {r}")
            return lab
        if not self.cycle:
            return [Z.identity()] * r
        return self.cycle[(n - 1 + self.offset) % len(self.cycle)].labels(Z, r)


@dataclass
class ProductCocycle:
    construction: TowerConstruction
    labels: LabelSequence
    target: Target
    _coding: Optional[GroupCoding] = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        Z = as_metabelian(self.target)
        fixed = []
        for n, lab in enumerate(self.labels.stages, start=1):
            row = tuple(normalize_element(self.target, z) for z in lab)
            if row and row[0] != Z.identity():
                raise ValueError(f"labels at stage {n} must start with the identity")
            fixed.append(row)
        self.labels = LabelSequence(tuple(fixed), self.labels.cycle, self.labels.offset)

    @property
    def Z(self) -> MetabelianGroup:
        return as_metabelian(self.target)

    @property
    def coding(self) -> GroupCoding:
        if self._coding is None:
            self._coding = GroupCoding(self.target)
        return self._coding

    def stage_labels(self, n: int) -> list:
        r = self.construction.params(n).r
        lab = self.labels.at(self.Z, n, r)
        if lab[0] != self.Z.identity():
            raise ValueError(f"labels at stage {n} must start with the identity")
        return lab

    # LabelCoding protocol for the pair engine
    @property
    def size(self) -> int:
        return self.coding.size

    @property
    def mul(self) -> np.ndarray:
        return self.coding.mul

    @property
    def inv(self) -> np.ndarray:
        return self.coding.inv

    def codes(self, n: int, r: int) -> np.ndarray:
        key = ("codes", n)
        if key not in self._cache:
            self._cache[key] = np.asarray([self.coding.code(z) for z in self.stage_labels(n)], dtype=np.int64)
        return self._cache[key]


# ---------------------------------------------------------------- level data

@dataclass(frozen=True)
class LevelLabels:
    stage: int
    beta: tuple


def labels_beta(c: ProductCocycle, N: int) -> LevelLabels:
    if N < 1:
        raise ValueError("N must be >= 1")
    _, beta = materialize(c.construction, 1, N, c)
    el = c.coding.element
    if isinstance(c.target, MetabelianGroup):
        return LevelLabels(N, tuple(el(b) for b in beta))
    return LevelLabels(N, tuple(el(b)[1] for b in beta))


def cocycle_power(c: ProductCocycle, m: int, N: int) -> dict[int, object]:
    """Level i -> beta_N(i) beta_N(i+m)^-1 on the determined levels i < h_N - m."""
    h = c.construction.height(N)
    if h <= m:
        raise InsufficientStage(f"insufficient stage: h_{N} = {h} <= m = {m}")
    _, beta = materialize(c.construction, 1, N, c)
    vals = c.mul[beta[: h - m], c.inv[beta[m:]]]
    el = c.coding.element
    meta = isinstance(c.target, MetabelianGroup)
    return {i: (el(z) if meta else el(z)[1]) for i, z in enumerate(vals.tolist())}


def conjugation_identity_holds(c: ProductCocycle, n: int) -> bool:
    """On a stage with no spacers, the h_n-step cocycle on column j (j < r-1)
    equals beta_n(i) a_n(j) a_n(j+1)^-1 beta_n(i)^-1; compared level by level."""
    con = c.construction
    sp = con.params(n)
    if any(sp.s):
        raise HypothesisMismatch(f"stage {n} has spacers")
    h = con.height(n)
    _, beta_n = materialize(con, 1, n, c)
    _, beta = materialize(con, 1, n + 1, c)
    a = c.codes(n, sp.r)
    mul, inv = c.mul, c.inv
    for j in range(sp.r - 1):
        lv = np.arange(h) + j * h
        direct = mul[beta[lv], inv[beta[lv + h]]]
        conj = mul[mul[mul[beta_n, a[j]], inv[a[j + 1]]], inv[beta_n]]
        if not np.array_equal(direct, conj):
            return False
    return True


# ------------------------------------------------------- twisted correlations

@dataclass(frozen=True)
class TwistedCorrelation:
    """Determined part of a matrix element plus a bound on the undetermined part.

    ``value`` is exact (Cyclo) when the fiber exponent is small, else complex.
    The true matrix element lies within ``radius`` of ``value``.
    """

    value: Union[Cyclo, complex]
    radius: Fraction
    stage_used: int

    @property
    def complex(self) -> complex:
        return complex(self.value)

    def distance(self, target: complex) -> float:
        return abs(complex(self.value) - complex(target)) + float(self.radius)

    def to_json(self) -> dict:
        rec = number_json(self.value)
        rec.update(radius=_qstr(self.radius), stage=self.stage_used)
        return rec


def _chi_exponents(coding: GroupCoding, chi) -> np.ndarray:
    """j(k) with chi(k) = zeta_e^j for every fiber code k."""
    K = coding.K
    e = K.exponent
    chi = _norm_k(K, chi)
    w = np.asarray([c * (e // q) for c, q in zip(chi, K.summands)], dtype=np.int64)
    return (coding.residues * w[None, :]).sum(axis=1) % e


def _twisted_value(coding: GroupCoding, hist: np.ndarray, chi, d1: int, d2: int, w: Fraction):
    nk = coding.K.order
    e = coding.K.exponent
    expo = _chi_exponents(coding, chi)
    weights: dict[int, int] = {}
    nz = np.nonzero(hist)[0]
    for z in nz.tolist():
        dz, kz = divmod(z, nk)
        if (d1 + dz) % coding.D != d2 % coding.D:
            continue
        j = int(expo[coding.act[d1 % coding.D, kz]])
        weights[j] = weights.get(j, 0) + int(hist[z])
    scale = w / coding.D
    if e <= EXACT_EXPONENT:
        return Cyclo.from_powers(e, {j: cnt * scale for j, cnt in weights.items()})
    return complex(sum(cnt * cmath.exp(2j * cmath.pi * j / e) for j, cnt in weights.items()) * float(scale))


def twisted_correlation(c: ProductCocycle, chi, A: LevelSet, B: LevelSet, m: int,
                        N: Optional[int] = None, d1: int = 0, d2: int = 0) -> TwistedCorrelation:
    """<U_chi^m (1_B x 1_d2), 1_A x 1_d1> with U_chi F(x, d) = chi(d.phi(x)) F(Tx, d + psi(x)).

    Haar measure on D is normalized; for an abelian fiber (|D| = 1) this is
    the sum over determined levels of chi(phi^(m)) w_N.
    """
    con = c.construction
    n0 = max(A.stage, B.stage)
    if N is None:
        N = auto_stage(con, m, n0)
    st = pair_stats(con, A, B, m, [N], c)[0]
    val = _twisted_value(c.coding, st.hist, chi, d1, d2, st.width)
    return TwistedCorrelation(val, st.undetermined * st.width / c.coding.D, N)


def twisted_series(c: ProductCocycle, chi, A, B, m, stages, d1=0, d2=0) -> list[TwistedCorrelation]:
    sts = pair_stats(c.construction, A, B, m, stages, c)
    return [TwistedCorrelation(_twisted_value(c.coding, s.hist, chi, d1, d2, s.width),
                               s.undetermined * s.width / c.coding.D, s.stage) for s in sts]


@dataclass(frozen=True)
class SkewBound:
    lo: Fraction
    hi: Fraction
    stage_used: int


def skew_correlation(c: ProductCocycle, A: LevelSet, z1, B: LevelSet, z2, m: int,
                     N: Optional[int] = None) -> SkewBound:
    """<U^m (1_B x 1_z2), 1_A x 1_z1> for the skew product (x, z) -> (Tx, z tau(x)), Haar normalized."""
    con = c.construction
    if N is None:
        N = auto_stage(con, m, max(A.stage, B.stage))
    st = pair_stats(con, A, B, m, [N], c)[0]
    return _skew_from_stats(c, st, z1, z2)


def _skew_from_stats(c, st, z1, z2) -> SkewBound:
    cod = c.coding
    a = cod.code(normalize_element(c.target, z1))
    b = cod.code(normalize_element(c.target, z2))
    # z1 * tau = z2  <=>  tau = z1^-1 z2
    need = int(cod.mul[cod.inv[a], b])
    w = st.width / cod.size
    lo = int(st.hist[need]) * w
    return SkewBound(lo, lo + st.undetermined * w, st.stage)


# ------------------------------------------------------------- verification

MODES = ("fiber-shift", "orbit-average", "half-orbit")


def _diff_codes(c: ProductCocycle, n: int, upto: int) -> list[int]:
    a = c.codes(n, c.construction.params(n).r)
    return [int(c.mul[a[j], c.inv[a[j + 1]]]) for j in range(upto)]


def _balanced(diffs: list[int], allowed: list[int]) -> bool:
    counts = [diffs.count(x) for x in allowed]
    return sum(counts) == len(diffs) and max(counts) - min(counts) <= 1


def _mode_stage_ok(c: ProductCocycle, mode: str, n: int, allowed: list[int]) -> Optional[str]:
    """None when stage n satisfies the mode's hypothesis, else the violated condition."""
    sp = c.construction.params(n)
    cod = c.coding
    nk = cod.K.order
    lab = c.codes(n, sp.r)
    if mode in ("fiber-shift", "orbit-average"):
        if not stage_matches(sp, "zero"):
            return "spacers must vanish"
        if mode == "orbit-average" and any(int(x) // nk for x in lab):
            return "D-labels must vanish"
        if not _balanced(_diff_codes(c, n, sp.r - 1), allowed):
            return "label differences are not equidistributed over the prescribed values"
        return None
    if not stage_matches(sp, "half"):
        return "spacers must be 0 on the lower half and 1 on the upper half"
    if any(int(x) // nk for x in lab):
        return "D-labels must vanish"
    half = (sp.r + 1) // 2
    if any(int(x) for x in lab[half:]):
        return "labels must vanish on the upper half"
    if not _balanced(_diff_codes(c, n, half), allowed):
        return "lower-half label differences are not equidistributed over the orbit"
    return None


@dataclass
class CocycleReport:
    mode: str
    records: list
    passed: bool
    stage: Optional[int]

    def to_json(self) -> dict:
        return {"mode": self.mode, "pass": self.passed, "stage": self.stage, "records": self.records}


def verify_weak_limit_cocycle(c: ProductCocycle, mode: str, *, A: LevelSet, B: LevelSet,
                              k=None, shifts: Optional[Sequence] = None, chi=None,
                              fiber_pair: Optional[tuple] = None, d1: int = 0, d2: int = 0,
                              tol=Fraction(1, 20), cap: Optional[int] = None,
                              stages: Optional[Sequence[int]] = None, min_height: int = 0,
                              max_tests: int = 3, escalate: int = 2) -> CocycleReport:
    """Check a predicted limit of the h_n-th power along the designated stages.

    fiber-shift    abelian fiber, differences equidistributed over ``shifts``
                   (or the single ``k``); twisted -> mean of chi(k_s) mu(A n B),
                   skew with ``fiber_pair`` (g, g') -> mu(A n B) #{s: g' = g + k_s} / (p |K|)
    orbit-average  differences equidistributed over the D-orbit of k, no D-labels;
                   -> l_chi(k) mu(A n B) [d1 = d2] / |D|
    half-orbit     half spacer stage, labels vanish on the upper half;
                   -> (l_chi(k) mu(A n B) [d1 = d2] / |D| + conj <U_chi (1_A x 1_d1), 1_B x 1_d2>) / 2
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    con = c.construction
    cod = c.coding
    Z = c.Z
    cap = cap or stage_cap()
    K = cod.K
    if mode == "fiber-shift":
        if cod.D != 1 and not isinstance(c.target, FinAbGroup):
            raise HypothesisMismatch("fiber-shift needs an abelian fiber")
        ks = [_norm_k(K, x) for x in (shifts if shifts is not None else [k])]
        allowed = sorted({cod.code((0, x)) for x in ks})
    else:
        if k is None:
            raise ValueError("orbit modes need k")
        k = _norm_k(K, k)
        orb = alg.orbit(Z.action, k)
        ks = orb
        allowed = sorted({cod.code((0, x)) for x in orb})
    if chi is None and fiber_pair is None:
        chi = K.zero()
    n0 = max(A.stage, B.stage)
    if stages is not None:
        for n in stages:
            why = _mode_stage_ok(c, mode, n, allowed)
            if why:
                raise HypothesisMismatch(f"stage {n}: {why}")
        found = sorted(stages)
    else:
        found = []
        for n in range(n0, cap + 1):
            try:
                if _mode_stage_ok(c, mode, n, allowed) is None:
                    found.append(n)
            except InsufficientStage:
                break
    if not found:
        raise HypothesisMismatch(f"no stage in [{n0}, {cap}] satisfies the {mode} hypothesis")
    rs = [con.params(n).r for n in found]
    if len(rs) > 1 and not rs[-1] > rs[0]:
        raise HypothesisMismatch(f"r_n does not grow along the designated stages (r = {rs[:6]})")
    tested = [n for n in found if con.height(n) >= min_height][:max_tests]
    if not tested:
        raise HypothesisMismatch(f"no designated stage reaches height {min_height} below the cap {cap}")
    eA = expand(con, A, n0).levels
    eB = expand(con, B, n0).levels
    mu_ab = np.intersect1d(eA, eB).size * con.width(n0)
    records = []
    claim = f"cocycle:{mode}"
    for n in tested:
        m = con.height(n)
        try:
            N0 = auto_stage(con, m, n + 1, cap)
            run = list(range(N0, min(N0 + escalate, cap) + 1))
            stats = pair_stats(con, A, B, m, run, c)
        except InsufficientStage as exc:
            records.append({"claim": claim, "stage": n, "error": str(exc), "pass": False})
            continue
        for st in stats:
            rec = {"claim": claim, "stage": n, "stage_used": st.stage, "m": m}
            if fiber_pair is not None:
                g, g2 = (_norm_k(K, x) for x in fiber_pair)
                hits = sum(1 for x in ks if K.add(g, x) == g2)
                pred = Fraction(hits, len(ks)) * mu_ab / K.order
                meta = isinstance(c.target, MetabelianGroup)
                bd = _skew_from_stats(c, st, (0, g) if meta else g, (0, g2) if meta else g2)
                ok = bd.hi - pred <= Fraction(tol) and pred - bd.lo <= Fraction(tol)
                rec.update(predicted=_qstr(pred), lo=_qstr(bd.lo), hi=_qstr(bd.hi), pass_=ok)
            else:
                val = _twisted_value(cod, st.hist, chi, d1, d2, st.width)
                radius = st.undetermined * st.width / cod.D
                pred, prad = _predict(c, mode, chi, k, ks, mu_ab, d1, d2, A, B, st.stage, cap)
                dist = abs(complex(val) - complex(pred)) + float(radius + prad)
                ok = dist <= float(tol)
                rec.update(predicted=number_json(pred), predicted_radius=_qstr(prad), value=number_json(val),
                           radius=_qstr(radius), distance=_dec(dist), pass_=ok)
            rec["pass"] = rec.pop("pass_")
            records.append(rec)
            if rec["pass"]:
                return CocycleReport(mode, records, True, n)
    return CocycleReport(mode, records, False, None)


def _predict(c, mode, chi, k, ks, mu_ab, d1, d2, A, B, N, cap):
    """Predicted limit (exact when the fiber exponent is small) and its own radius."""
    K = c.coding.K
    Dn = c.coding.D
    chi = _norm_k(K, chi)
    exact = K.exponent <= EXACT_EXPONENT
    if mode == "fiber-shift":
        w = Fraction(mu_ab) / len(ks)
        if exact:
            pw: dict[int, Fraction] = {}
            for x in ks:
                j = alg.character_exponent_index(K, chi, x)
                pw[j] = pw.get(j, 0) + w
            return Cyclo.from_powers(K.exponent, pw), Fraction(0)
        return sum(alg.character_value(K, chi, x) for x in ks) * float(w), Fraction(0)
    same = (d1 - d2) % Dn == 0
    scale = Fraction(mu_ab) / Dn if same else Fraction(0)
    if exact:
        base = alg.orbit_average_exact(c.Z.action, chi, k) * scale
    else:
        base = alg.orbit_average_l(c.Z.action, chi, k) * float(scale)
    if mode == "orbit-average":
        return base, Fraction(0)
    back = twisted_correlation(c, chi, B, A, 1, max(N, auto_stage(c.construction, 1, max(A.stage, B.stage), cap)),
                               d1=d2, d2=d1)
    bv = back.value.conjugate() if isinstance(back.value, Cyclo) else complex(back.value).conjugate()
    if exact:
        return base * Fraction(1, 2) + bv * Fraction(1, 2), back.radius / 2
    return 0.5 * complex(base) + 0.5 * complex(bv), back.radius / 2


def _dec(x: float) -> str:
    return f"{x:.12g}"


def number_json(v) -> dict:
    """Decimal strings for a complex value, plus exact coefficients for a Cyclo."""
    z = complex(v)
    rec = {"re": _dec(z.real + 0.0), "im": _dec(z.imag + 0.0)}
    if isinstance(v, Cyclo):
        q = v.rational()
        if q is not None:
            rec["exact"] = _qstr(q)
        else:
            rec["exact"] = {"root_order": v.n, "coeffs": [_qstr(a) for a in v.coeffs]}
    return rec


# ------------------------------------------------------------------ schedules

DIRECTIVES = {
    "generator": "generator", "2.7": "generator",
    "orbit-average": "orbit-average", "2.8": "orbit-average",
    "half-spacer": "half-spacer", "2.9": "half-spacer",
    "shift-symmetric": "shift-symmetric", "2.12": "shift-symmetric",
    "half-orbit": "half-orbit", "4.2": "half-orbit",
    "fiber-shift": "fiber-shift",
}


def _directive_parts(Z: MetabelianGroup, target: Optional[Target], d: dict):
    kind = DIRECTIVES.get(str(d.get("claim")))
    if kind is None:
        raise ValueError(f"unknown directive {d.get('claim')!r}")
    if target is None:
        # trivial fiber: every directive keeps its spacer pattern, labels vanish
        pat = {"half-spacer": "half", "half-orbit": "half"}.get(kind, "zero")
        return pat, LabelPattern("identity")
    K = Z.fiber
    if kind == "generator":
        g = int(d["d"]) % Z.d_order
        if Z.d_order > 1 and gcd(g, Z.d_order) != 1:
            raise ValueError(f"d = {g} does not generate D of order {Z.d_order}")
        return "zero", LabelPattern("difference", ((g, K.zero()),))
    if kind == "half-spacer":
        return "half", LabelPattern("identity")
    if kind == "fiber-shift":
        ks = d.get("shifts") or [d["k"]]
        return "zero", LabelPattern("cycle", tuple((0, _norm_k(K, x)) for x in ks))
    k = _norm_k(K, d["k"])
    orb = tuple((0, x) for x in alg.orbit(Z.action, k))
    if kind == "orbit-average":
        return "zero", LabelPattern("cycle", orb)
    if kind == "half-orbit":
        return "half", LabelPattern("half_cycle", orb)
    z = int(d.get("z", len(orb)))
    return "zero", LabelPattern("shift_symmetric", orb, z)


def build_schedule(directives: Sequence[dict], r: str = "n+1", target: Optional[Target] = None,
                   spacing: int = 1, offset: int = 0, base_width=1) -> tuple[TowerConstruction, LabelSequence]:
    """Round-robin stage assignment of the directives.

    With spacing s > 1 only every s-th stage carries a directive and the stages
    in between are plain (no spacers, identity labels).
    """
    if not directives:
        raise ValueError("need at least one directive")
    if spacing < 1:
        raise ValueError("spacing must be >= 1")
    Z = as_metabelian(target) if target is not None else None
    parts = [_directive_parts(Z, target, d) for d in directives]
    cyc_s, cyc_l = [], []
    for pat, lab in parts:
        cyc_s.append(pat)
        cyc_l.append(lab)
        for _ in range(spacing - 1):
            cyc_s.append("zero")
            cyc_l.append(LabelPattern("identity"))
    seen: dict[int, str] = {}
    for idx, name in enumerate(cyc_s):
        if seen.setdefault(idx, name) != name:
            raise ValueError("contradictory directives on one stage class")
    tail = TailRule("periodic", {"r": r, "cycle": cyc_s, "offset": offset})
    con = TowerConstruction((), tail, Fraction(base_width))
    return con, LabelSequence((), tuple(cyc_l), offset)


def shift_symmetry_holds(c: ProductCocycle, n: int, z: int) -> bool:
    """b(j + z) = v(b(j)) for 0 <= j < r_n - z."""
    lab = c.stage_labels(n)
    act = c.Z.action
    return all(lab[j + z][1] == alg.apply_aut(act, lab[j][1]) for j in range(len(lab) - z))


# ---------------------------------------------------------------- orthogonality

@dataclass
class OrthogonalityVerdict:
    verdict: str  # orthogonal-witnessed | equivalent-by-symmetry | inconclusive
    witness: Optional[tuple] = None
    detail: dict = field(default_factory=dict)


def orthogonality_test(c: Optional[ProductCocycle], chi, chi2, *, action: Optional[MonomialAut] = None,
                       tol=Fraction(1, 20), cap: Optional[int] = None, min_height: int = 10_000,
                       r: str = "n+1") -> OrthogonalityVerdict:
    """Equivalent when chi2 lies in the dual orbit of chi; otherwise look for k
    separating the orbit averages and witness both scalar limits at one stage."""
    if c is not None:
        act = c.Z.action
    elif action is not None:
        act = action
    else:
        raise ValueError("need a cocycle or a fiber action")
    K = act.group
    chi = _norm_k(K, chi)
    chi2 = _norm_k(K, chi2)
    if chi2 in set(alg.dual_orbit(act, chi)):
        return OrthogonalityVerdict("equivalent-by-symmetry")
    Z = MetabelianGroup.generated_by(act) if c is None else c.Z
    cands = []
    for k in K.elements():
        if alg.orbit_average_exact(act, chi, k) != alg.orbit_average_exact(act, chi2, k):
            cands.append(k)
    if not cands:
        return OrthogonalityVerdict("inconclusive", detail={"reason": "no separating k"})
    k = cands[0]
    if c is None or not _has_orbit_stage(c, k, cap):
        con, lab = build_schedule([{"claim": "orbit-average", "k": list(k)}], r=r, target=Z,
                                  spacing=2)
        c = ProductCocycle(con, lab, Z)
    A = LevelSet.full(c.construction, 1)
    try:
        ra = verify_weak_limit_cocycle(c, "orbit-average", A=A, B=A, k=k, chi=chi, tol=tol, cap=cap,
                                       min_height=min_height, max_tests=2)
        rb = verify_weak_limit_cocycle(c, "orbit-average", A=A, B=A, k=k, chi=chi2, tol=tol, cap=cap,
                                       min_height=min_height, max_tests=2)
    except (HypothesisMismatch, InsufficientStage) as exc:
        return OrthogonalityVerdict("inconclusive", k, {"reason": str(exc)})
    if ra.passed and rb.passed and ra.stage == rb.stage:
        return OrthogonalityVerdict("orthogonal-witnessed", k, {
            "stage": ra.stage,
            "l_chi": number_json(alg.orbit_average_exact(act, chi, k)),
            "l_chi2": number_json(alg.orbit_average_exact(act, chi2, k)),
        })
    return OrthogonalityVerdict("inconclusive", k, {"reason": "scalar limits not both witnessed"})


def _has_orbit_stage(c: ProductCocycle, k, cap) -> bool:
    cod = c.coding
    orb = alg.orbit(c.Z.action, k)
    allowed = sorted({cod.code((0, x)) for x in orb})
    for n in range(1, (cap or stage_cap()) + 1):
        try:
            if c.construction.height(n) >= 10_000 and _mode_stage_ok(c, "orbit-average", n, allowed) is None:
                return True
        except InsufficientStage:
            return False
    return False


# ------------------------------------------------------------ spectral estimate

@dataclass
class SpectralTable:
    theta: list[float]
    density: list[float]
    error: list[float]
    coefficients: list[complex]


def spectral_estimate(c: ProductCocycle, chi, f: LevelSet, N_max: int, grid: int,
                      coefficients: Optional[Sequence[complex]] = None,
                      radii: Optional[Sequence[float]] = None) -> SpectralTable:
    """Fejer mean sum_{|n|<=N} (1 - |n|/(N+1)) c_n e^{-i n theta} on a uniform grid.

    c_n = <U_chi^n 1_f, 1_f> from certified values (c_-n = conj c_n); the
    per-point error adds the weighted radii.  Diagnostic only.
    """
    if grid < 8:
        raise ValueError("grid needs at least 8 points")
    if coefficients is None:
        coeffs, rads = [], []
        for n in range(N_max + 1):
            tc = twisted_correlation(c, chi, f, f, n)
            coeffs.append(complex(tc.value) + float(tc.radius) / 2)
            rads.append(float(tc.radius) / 2)
    else:
        coeffs = [complex(x) for x in coefficients]
        rads = list(radii) if radii is not None else [0.0] * len(coeffs)
        N_max = len(coeffs) - 1
    thetas = [2 * np.pi * t / grid for t in range(grid)]
    dens, errs = [], []
    for th in thetas:
        tot = coeffs[0].real
        err = rads[0]
        for n in range(1, N_max + 1):
            wgt = 1 - n / (N_max + 1)
            term = coeffs[n] * cmath.exp(-1j * n * th)
            tot += 2 * wgt * term.real
            err += 2 * wgt * rads[n]
        dens.append(tot)
        errs.append(err)
    return SpectralTable(thetas, dens, errs, coeffs)


# -------------------------------------------------------------------- files

def target_from_json(rec: dict) -> Target:
    G, aut, _ = alg.deserialize(rec)
    if "d_order" in rec:
        return MetabelianGroup(int(rec["d_order"]), aut)
    return G


def target_to_json(t: Target) -> dict:
    if isinstance(t, MetabelianGroup):
        return t.to_json()
    return alg.serialize(t)


def _label_from_json(target: Target, x):
    if isinstance(target, MetabelianGroup):
        d, k = x
        return int(d), k
    return x


def cocycle_from_json(rec: dict) -> ProductCocycle:
    con = construction_from_json(rec)
    lab = rec.get("labels")
    if not lab:
        raise ValueError("spec has no labels section")
    target = target_from_json(lab["target"])
    stages = tuple(tuple(_label_from_json(target, x) for x in row) for row in lab.get("stages", []))
    Z = as_metabelian(target)
    cyc = []
    for p in lab.get("cycle", []):
        elems = tuple(normalize_element(target, _label_from_json(target, x)) for x in p.get("elements", []))
        cyc.append(LabelPattern(p["kind"], elems, int(p.get("z", 0))))
    return ProductCocycle(con, LabelSequence(stages, tuple(cyc), int(lab.get("offset", 0))), target)


def _pattern_json(p: LabelPattern, meta: bool) -> dict:
    rec = p.to_json()
    if not meta:
        rec["elements"] = [list(k) for _, k in p.elements]
    return rec


def cocycle_to_json(c: ProductCocycle) -> dict:
    rec = c.construction.to_json()
    meta = isinstance(c.target, MetabelianGroup)
    rec["labels"] = {
        "target": target_to_json(c.target),
        "stages": [[[d, list(k)] if meta else list(k) for d, k in row] for row in c.labels.stages],
        "cycle": [_pattern_json(p, meta) for p in c.labels.cycle],
        "offset": c.labels.offset,
    }
    return rec
