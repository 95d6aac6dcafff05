"""Rank-one cutting and stacking: towers, level sets, certified correlations.

Stage n carries parameters (r_n, s_n): the n-th tower is cut into r_n
columns, s_n(j) spacers go on top of column j, and the columns are stacked
left to right.  Heights obey h_1 = 1, h_{n+1} = r_n h_n + sum_j s_n(j), and
widths w_{n+1} = w_n / r_n.  Level i of tower n becomes the levels
j*h_n + s_n(0) + ... + s_n(j-1) + i of tower n+1.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Protocol, Sequence

import numpy as np

from .rules import Rule, RuleLike, as_rule

logger = logging.getLogger(__name__)

DEFAULT_STAGE_CAP = 64
# longest word we are willing to hold in memory at once
MAX_MATERIALIZE = 60_000_000


def stage_cap(default: int = DEFAULT_STAGE_CAP) -> int:
    env = os.environ.get("SML_STAGE_CAP")
    return int(env) if env else default


class InsufficientStage(ValueError):
    pass


class HypothesisMismatch(ValueError):
    """The construction does not satisfy the hypothesis of the requested check."""


@dataclass(frozen=True)
class StageParams:
    r: int
    s: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "s", tuple(int(x) for x in self.s))
        if self.r < 2:
            raise ValueError(f"r must be >= 2, got {self.r}")
        if len(self.s) != self.r:
            raise ValueError(f"need {self.r} spacer counts, got {len(self.s)}")
        if any(x < 0 for x in self.s):
            raise ValueError("spacer counts are nonnegative")

    @property
    def spacers(self) -> int:
        return sum(self.s)

    def offsets(self, h: int) -> list[int]:
        """Start index in tower n+1 of each column of tower n."""
        out, acc = [], 0
        for j in range(self.r):
            out.append(j * h + acc)
            acc += self.s[j]
        return out

    def to_json(self) -> dict:
        return {"r": self.r, "s": list(self.s)}


def spacer_pattern(name: str, r: int, n: int = 0, h: int = 0, z: int = 0) -> tuple[int, ...]:
    if name == "zero":
        return (0,) * r
    if name == "one":
        return (1,) * r
    if name == "half":
        return tuple(0 if 2 * j < r else 1 for j in range(r))
    if name == "staircase":
        return tuple(range(r))
    if name == "high":
        return tuple(z + j for j in range(r))
    raise ValueError(f"unknown spacer pattern {name!r}")


TAIL_KINDS = ("chacon", "djr", "staircase", "almost_staircase", "high_staircase",
              "zero_spacer", "half_spacer", "constant_spacer", "periodic")


@dataclass(frozen=True)
class TailRule:
    """Named generator of stage parameters.

    kinds and parameters:
      chacon                         r = 3, s = (0, 1, 0)
      djr                            r = 2^(n+1), one spacer over column 2^n
      staircase(r)                   s(i) = i
      almost_staircase(r, delta)     s(i) = i for delta*r <= i, 0 below
      high_staircase(r, z)           s(i) = z + i
      zero_spacer(r), half_spacer(r) s = 0; s = 0 on the lower half, 1 above
      constant_spacer(r, c)          s = c
      periodic(r, cycle, offset)     stage n follows cycle[(n - 1 + offset) % len]
                                     with patterns zero / one / half / staircase
    """

    kind: str
    params: tuple[tuple[str, object], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in TAIL_KINDS:
            raise ValueError(f"unknown construction kind {self.kind!r}")
        if isinstance(self.params, dict):
            object.__setattr__(self, "params", tuple(sorted(self.params.items())))
        p = dict(self.params)
        for key in ("r", "z", "delta", "c"):
            if key in p:
                p[key] = str(p[key])
                as_rule(p[key])
        if self.kind in ("staircase", "almost_staircase", "high_staircase", "zero_spacer",
                         "half_spacer", "constant_spacer", "periodic") and "r" not in p:
            raise ValueError(f"{self.kind} needs an r rule")
        if self.kind == "almost_staircase" and "delta" not in p:
            raise ValueError("almost_staircase needs a delta rule")
        if self.kind == "high_staircase" and "z" not in p:
            raise ValueError("high_staircase needs a z rule")
        if self.kind == "periodic":
            cyc = p.get("cycle")
            if not cyc:
                raise ValueError("periodic needs a nonempty cycle")
            p["cycle"] = tuple(cyc)
            for name in p["cycle"]:
                spacer_pattern(name, 2)
            p["offset"] = int(p.get("offset", 0))
        object.__setattr__(self, "params", tuple(sorted(p.items())))

    def param(self, key, default=None):
        return dict(self.params).get(key, default)

    def _r(self, n: int, h: int) -> int:
        return int(as_rule(self.param("r"))(n, h))

    def pattern_name(self, n: int) -> Optional[str]:
        """Name of the spacer pattern used at stage n, when the kind has one."""
        k = self.kind
        if k == "periodic":
            cyc = self.param("cycle")
            return cyc[(n - 1 + self.param("offset")) % len(cyc)]
        return {"staircase": "staircase", "zero_spacer": "zero", "half_spacer": "half"}.get(k)

    def stage(self, n: int, h: int) -> StageParams:
        k = self.kind
        if k == "chacon":
            return StageParams(3, (0, 1, 0))
        if k == "djr":
            r = 2 ** (n + 1)
            return StageParams(r, tuple(1 if i == 2**n else 0 for i in range(r)))
        r = self._r(n, h)
        if k == "staircase":
            return StageParams(r, tuple(range(r)))
        if k == "almost_staircase":
            d = Fraction(as_rule(self.param("delta"))(n, h))
            return StageParams(r, tuple(i if i >= d * r else 0 for i in range(r)))
        if k == "high_staircase":
            z = int(as_rule(self.param("z"))(n, h))
            return StageParams(r, tuple(z + i for i in range(r)))
        if k == "zero_spacer":
            return StageParams(r, (0,) * r)
        if k == "half_spacer":
            return StageParams(r, spacer_pattern("half", r))
        if k == "constant_spacer":
            c = int(as_rule(self.param("c"))(n, h))
            return StageParams(r, (c,) * r)
        return StageParams(r, spacer_pattern(self.pattern_name(n), r))

    def summable_tag(self) -> Optional[bool]:
        """Closed-form verdict on sum s_n/h_n < inf, or None when not decided here."""
        k = self.kind
        if k in ("chacon", "djr", "zero_spacer"):
            return True
        r = as_rule(self.param("r"))
        if not r.is_polynomial_in_n():
            return None
        # polynomial spacer totals against heights that at least double per stage
        if k in ("staircase", "almost_staircase", "half_spacer", "periodic"):
            return True
        if k == "constant_spacer":
            return True if as_rule(self.param("c")).is_polynomial_in_n() else None
        if k == "high_staircase":
            z = as_rule(self.param("z"))
            if z.is_polynomial_in_n():
                return True
            if z.expr.replace(" ", "") in ("h", "1*h") or _dominates_height(z):
                return False
        return None

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        for key, val in self.params:
            out[key] = list(val) if isinstance(val, tuple) else val
        return out


def _dominates_height(z: Rule) -> bool:
    # z = h + c or c*h with c >= 1 and no n dependence: each term s_n/h_n >= r_n
    if z.uses("n"):
        return False
    return all(z(1, hh) >= hh for hh in (1, 10, 1000))


@dataclass(frozen=True)
class TowerConstruction:
    prefix: tuple[StageParams, ...] = ()
    tail: Optional[TailRule] = None
    base_width: Fraction = Fraction(1)
    _h: list = field(default_factory=lambda: [1], compare=False, repr=False)
    _p: list = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "base_width", Fraction(self.base_width))
        if self.base_width <= 0:
            raise ValueError("base width must be positive")
        if not self.prefix and self.tail is None:
            raise ValueError("a construction needs a prefix or a tail rule")

    def params(self, n: int) -> StageParams:
        """(r_n, s_n) for n >= 1."""
        if n < 1:
            raise ValueError("stages start at 1")
        while len(self._p) < n:
            k = len(self._p) + 1
            if k <= len(self.prefix):
                sp = self.prefix[k - 1]
            elif self.tail is None:
                raise InsufficientStage(f"construction has only {len(self.prefix)} stages")
            else:
                sp = self.tail.stage(k, self._h[k - 1])
            self._p.append(sp)
            self._h.append(sp.r * self._h[k - 1] + sp.spacers)
        return self._p[n - 1]

    def height(self, n: int) -> int:
        if n > 1:
            self.params(n - 1)
        return self._h[n - 1]

    def width(self, n: int) -> Fraction:
        w = self.base_width
        for k in range(1, n):
            w /= self.params(k).r
        return w

    @property
    def finite_stages(self) -> Optional[int]:
        return len(self.prefix) + 1 if self.tail is None else None

    def pattern_name(self, n: int) -> Optional[str]:
        if n > len(self.prefix):
            return self.tail.pattern_name(n) if self.tail else None
        return None

    def to_json(self) -> dict:
        return {
            "prefix": [p.to_json() for p in self.prefix],
            "tail": self.tail.to_json() if self.tail else None,
            "base_width": _qstr(self.base_width),
        }


def _qstr(q: Fraction) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}" if q.denominator != 1 else str(q.numerator)


def construction_from_json(rec: dict) -> TowerConstruction:
    prefix = tuple(StageParams(int(p["r"]), tuple(p["s"])) for p in rec.get("prefix", []))
    tail = None
    t = rec.get("tail")
    if t:
        t = dict(t)
        kind = t.pop("kind")
        tail = TailRule(kind, t)
    return TowerConstruction(prefix, tail, Fraction(str(rec.get("base_width", "1"))))


# ------------------------------------------------------------------ geometry

def heights(c: TowerConstruction, N: int) -> list[int]:
    if N < 1:
        raise ValueError("N must be >= 1")
    return [c.height(n) for n in range(1, N + 1)]


class LevelSet:
    """A union of levels of tower ``stage``; ``levels`` is a sorted int64 array."""

    __slots__ = ("stage", "levels")

    def __init__(self, stage: int, levels: Iterable[int]):
        arr = np.unique(np.asarray(list(levels) if not isinstance(levels, np.ndarray) else levels,
                                   dtype=np.int64))
        if stage < 1:
            raise ValueError("stages start at 1")
        self.stage = stage
        self.levels = arr
        self.levels.flags.writeable = False

    @classmethod
    def full(cls, c: TowerConstruction, n: int) -> "LevelSet":
        return cls(n, np.arange(c.height(n), dtype=np.int64))

    @classmethod
    def interval(cls, n: int, start: int, stop: int) -> "LevelSet":
        return cls(n, np.arange(start, stop, dtype=np.int64))

    def check(self, c: TowerConstruction) -> None:
        if len(self.levels) and (self.levels[0] < 0 or self.levels[-1] >= c.height(self.stage)):
            raise ValueError(f"level index outside tower {self.stage}")

    def __len__(self) -> int:
        return int(self.levels.size)

    def __eq__(self, other) -> bool:
        return (isinstance(other, LevelSet) and self.stage == other.stage
                and np.array_equal(self.levels, other.levels))

    def __repr__(self) -> str:
        body = ", ".join(map(str, self.levels[:12].tolist()))
        more = ", ..." if len(self) > 12 else ""
        return f"LevelSet({self.stage}, [{body}{more}])"

    def to_json(self) -> dict:
        return {"stage": self.stage, "levels": self.levels.tolist()}


def expand(c: TowerConstruction, A: LevelSet, N: int) -> LevelSet:
    """The same set written as levels of tower N."""
    if N < A.stage:
        raise ValueError("can only expand to a later stage")
    A.check(c)
    lv = A.levels
    for n in range(A.stage, N):
        sp = c.params(n)
        offs = np.asarray(sp.offsets(c.height(n)), dtype=np.int64)
        lv = (offs[:, None] + lv[None, :]).ravel()
    return LevelSet(N, lv)


def measure(c: TowerConstruction, A: LevelSet) -> Fraction:
    return len(A) * c.width(A.stage)


def total_measure(c: TowerConstruction, N: int) -> Fraction:
    return c.height(N) * c.width(N)


@dataclass(frozen=True)
class MeasureClass:
    verdict: str  # finite | infinite | undetermined
    partial_sum: Fraction
    horizon: int


def classify_measure(c: TowerConstruction, horizon: int) -> MeasureClass:
    """Partial sum of s_n/h_n and a closed-form verdict where the tail kind allows one."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    total = Fraction(0)
    lim = horizon if c.finite_stages is None else min(horizon, c.finite_stages - 1)
    for n in range(1, lim + 1):
        total += Fraction(c.params(n).spacers, c.height(n))
    if c.tail is None:
        verdict = "finite"
    else:
        tag = c.tail.summable_tag()
        verdict = {True: "finite", False: "infinite", None: "undetermined"}[tag]
    return MeasureClass(verdict, total, horizon)


# ----------------------------------------------------------------- pair engine

class LabelCoding(Protocol):
    """Integer codes for a finite group Z together with per-stage label codes."""

    size: int
    mul: np.ndarray
    inv: np.ndarray

    def codes(self, n: int, r: int) -> np.ndarray: ...


class _Trivial:
    size = 1
    mul = np.zeros((1, 1), dtype=np.int64)
    inv = np.zeros(1, dtype=np.int64)

    def codes(self, n: int, r: int) -> np.ndarray:
        return np.zeros(r, dtype=np.int64)


TRIVIAL = _Trivial()


@dataclass
class PairStats:
    """Counts of level pairs (i, i+m) with i in A and i+m in B at one stage.

    ``hist[z]`` counts determined pairs whose cocycle value has code z;
    ``undetermined`` counts A-levels among the top m levels.
    """

    stage: int
    m: int
    hist: np.ndarray
    undetermined: int
    width: Fraction

    @property
    def determined(self) -> int:
        return int(self.hist.sum())


def _masks(c, A: LevelSet, B: LevelSet, n0: int):
    h0 = c.height(n0)
    ea = expand(c, A, n0).levels
    eb = expand(c, B, n0).levels
    # index 0 is the spacer label (-1 shifted)
    ma = np.zeros(h0 + 1, dtype=bool)
    mb = np.zeros(h0 + 1, dtype=bool)
    ma[ea + 1] = True
    mb[eb + 1] = True
    return ma, mb


def _beta_word(c, coding, n: int) -> np.ndarray:
    beta = np.zeros(1, dtype=np.int64)
    for k in range(1, n):
        sp = c.params(k)
        a = coding.codes(k, sp.r)
        if a[0] != 0:
            raise ValueError(f"labels at stage {k} must start with the identity")
        parts = []
        for j in range(sp.r):
            parts.append(coding.mul[beta, a[j]])
            if sp.s[j]:
                parts.append(np.zeros(sp.s[j], dtype=np.int64))
        beta = np.concatenate(parts)
    return beta


def _grow(c, coding, word: np.ndarray, beta: np.ndarray, n: int):
    sp = c.params(n)
    a = coding.codes(n, sp.r)
    if a[0] != 0:
        raise ValueError(f"labels at stage {n} must start with the identity")
    wparts, bparts = [], []
    for j in range(sp.r):
        wparts.append(word)
        bparts.append(coding.mul[beta, a[j]])
        if sp.s[j]:
            wparts.append(np.full(sp.s[j], -1, dtype=word.dtype))
            bparts.append(np.zeros(sp.s[j], dtype=np.int64))
    return np.concatenate(wparts), np.concatenate(bparts)


def _check_size(c, n: int) -> None:
    if c.height(n) > MAX_MATERIALIZE:
        raise InsufficientStage(
            f"tower {n} has {c.height(n)} levels, above the in-memory limit {MAX_MATERIALIZE}")


def materialize(c: TowerConstruction, n0: int, N: int, coding: LabelCoding = TRIVIAL):
    """Word of tower N (stage-n0 level index or -1 on later spacers) and its beta codes."""
    _check_size(c, N)
    word = np.arange(c.height(n0), dtype=np.int32)
    beta = _beta_word(c, coding, n0)
    for n in range(n0, N):
        word, beta = _grow(c, coding, word, beta, n)
    return word, beta


def pair_stats_direct(c, A: LevelSet, B: LevelSet, m: int, N: int,
                      coding: LabelCoding = TRIVIAL) -> PairStats:
    """Reference count on the fully expanded tower N."""
    n0 = max(A.stage, B.stage)
    if N < n0:
        raise ValueError("stage N precedes the sets")
    h = c.height(N)
    if h <= m:
        raise InsufficientStage(f"insufficient stage: h_{N} = {h} <= m = {m}")
    ma, mb = _masks(c, A, B, n0)
    word, beta = materialize(c, n0, N, coding)
    return _stats_from_word(ma, mb, word, beta, m, N, c.width(N), coding)


def _stats_from_word(ma, mb, word, beta, m, N, w, coding) -> PairStats:
    h = len(word)
    lo_w = word[: h - m]
    hi_w = word[m:]
    sel = ma[lo_w + 1] & mb[hi_w + 1]
    z = coding.mul[beta[: h - m][sel], coding.inv[beta[m:][sel]]]
    hist = np.bincount(z, minlength=coding.size).astype(np.int64)
    und = int(ma[word[h - m:] + 1].sum())
    return PairStats(N, m, hist, und, w)


def pair_stats(c: TowerConstruction, A: LevelSet, B: LevelSet, m: int,
               stages: Sequence[int], coding: LabelCoding = TRIVIAL) -> list[PairStats]:
    """Pair counts at each requested stage without expanding the later towers.

    Once h_N >= m, a pair (i, i+m) in tower N+1 either sits inside one column
    (r_N copies of the tower-N count) or straddles the gap between column j
    and column j+1.  Straddles only involve the top m levels of the column
    below and the bottom m levels of the column above, so it suffices to
    carry those two windows from stage to stage.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    stages = sorted(set(stages))
    if not stages:
        return []
    n0 = max(A.stage, B.stage)
    first = stages[0]
    if first < n0:
        raise ValueError(f"stage {first} precedes the sets (stage {n0})")
    for N in stages:
        if c.height(N) <= m:
            raise InsufficientStage(f"insufficient stage: h_{N} = {c.height(N)} <= m = {m}")
    ma, mb = _masks(c, A, B, n0)
    # a column of height exactly m already holds both windows
    M0 = n0
    while c.height(M0) < m:
        M0 += 1
    start = M0
    word, beta = materialize(c, n0, start, coding)
    out = []
    cur = _stats_from_word(ma, mb, word, beta, m, start, c.width(start), coding)
    h = len(word)
    pre, pre_b = word[:m].copy(), beta[:m].copy()
    suf, suf_b = word[h - m:].copy(), beta[h - m:].copy()
    del word, beta
    N = start
    want = set(stages)
    if N in want:
        out.append(cur)
    mul, inv = coding.mul, coding.inv
    pre_in_b = mb[pre + 1]
    while N < stages[-1]:
        sp = c.params(N)
        a = coding.codes(N, sp.r)
        if a[0] != 0:
            raise ValueError(f"labels at stage {N} must start with the identity")
        hist = cur.hist * sp.r
        suf_in_a = ma[suf + 1]
        groups: dict[tuple[int, int], int] = {}
        for j in range(sp.r - 1):
            key = (sp.s[j], int(mul[a[j], inv[a[j + 1]]]))
            groups[key] = groups.get(key, 0) + 1
        for (g, cc), count in groups.items():
            if g >= m:
                continue
            sel = suf_in_a[g:] & pre_in_b[: m - g]
            if not sel.any():
                continue
            z = mul[mul[suf_b[g:][sel], cc], inv[pre_b[: m - g][sel]]]
            hist = hist + count * np.bincount(z, minlength=coding.size)
        g = sp.s[-1]
        if g >= m:
            suf = np.full(m, -1, dtype=suf.dtype)
            suf_b = np.zeros(m, dtype=np.int64)
        else:
            suf = np.concatenate([suf[g:], np.full(g, -1, dtype=suf.dtype)])
            suf_b = np.concatenate([mul[suf_b[g:], a[-1]], np.zeros(g, dtype=np.int64)])
        N += 1
        und = int(ma[suf + 1].sum())
        cur = PairStats(N, m, hist, und, c.width(N))
        if N in want:
            out.append(cur)
    return out


@dataclass(frozen=True)
class CorrelationBound:
    lo: Fraction
    hi: Fraction
    stage_used: int

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def to_json(self) -> dict:
        return {"lo": _qstr(self.lo), "hi": _qstr(self.hi), "stage": self.stage_used}


def _bound(st: PairStats) -> CorrelationBound:
    lo = st.determined * st.width
    return CorrelationBound(lo, lo + st.undetermined * st.width, st.stage)


def auto_stage(c: TowerConstruction, m: int, min_stage: int, cap: Optional[int] = None) -> int:
    """Smallest N >= min_stage with h_N >= 16 m (and h_N > m)."""
    cap = cap or stage_cap()
    N = max(min_stage, 1)
    while c.height(N) < 16 * m or c.height(N) <= m:
        N += 1
        if N > cap:
            raise InsufficientStage(f"no stage up to the cap {cap} reaches height 16*{m}")
    return N


def correlation(c: TowerConstruction, A: LevelSet, B: LevelSet, m: int,
                N: Optional[int] = None) -> CorrelationBound:
    """Certified interval for mu(T^m A n B)."""
    n0 = max(A.stage, B.stage)
    if N is None:
        N = auto_stage(c, m, n0)
    return _bound(pair_stats(c, A, B, m, [N])[0])


def correlations(c, A, B, m, stages) -> list[CorrelationBound]:
    return [_bound(s) for s in pair_stats(c, A, B, m, stages)]


def correlation_backward(c: TowerConstruction, A: LevelSet, B: LevelSet, m: int, N: int) -> CorrelationBound:
    """mu(A n T^-m B) counted from the B side: levels j >= m of B whose j-m lies in A."""
    ea = expand(c, A, N).levels
    eb = expand(c, B, N).levels
    h = c.height(N)
    if h <= m:
        raise InsufficientStage(f"insufficient stage: h_{N} = {h} <= m = {m}")
    pre = eb[eb >= m] - m
    hits = np.intersect1d(pre, ea, assume_unique=True).size
    top = int((ea >= h - m).sum())
    w = c.width(N)
    return CorrelationBound(hits * w, (hits + top) * w, N)


# ------------------------------------------------------------- weak limits

CASES = ("i", "ii", "iii", "iv")
_CASE_PATTERN = {"i": "zero", "ii": "one", "iii": "staircase", "iv": "half"}


def stage_matches(sp: StageParams, pattern: str) -> bool:
    return sp.s == spacer_pattern(pattern, sp.r)


@dataclass
class WeakLimitReport:
    case: str
    p: int
    records: list
    passed: bool
    stage: Optional[int]

    def to_json(self) -> dict:
        return {"case": self.case, "p": self.p, "pass": self.passed, "stage": self.stage,
                "records": self.records}


def designated_stages(c: TowerConstruction, pattern: str, start: int, cap: int,
                      stages: Optional[Sequence[int]] = None) -> list[int]:
    """Stages carrying ``pattern``; explicit stages are validated instead of searched."""
    if stages is not None:
        for n in stages:
            sp = c.params(n)
            if not stage_matches(sp, pattern):
                raise HypothesisMismatch(
                    f"stage {n}: s_n = {list(sp.s)} is not the {pattern} spacer pattern")
        found = sorted(stages)
    else:
        found = []
        for n in range(start, cap + 1):
            try:
                sp = c.params(n)
            except InsufficientStage:
                break
            if stage_matches(sp, pattern):
                found.append(n)
    if not found:
        raise HypothesisMismatch(f"no stage in [{start}, {cap}] carries the {pattern} spacer pattern")
    rs = [c.params(n).r for n in found]
    if len(rs) > 1 and not (rs[-1] > rs[0] and all(b >= a for a, b in zip(rs, rs[1:]))):
        raise HypothesisMismatch(f"r_n does not grow along the designated stages (r = {rs[:6]})")
    return found


def _within(bound: CorrelationBound, plo: Fraction, phi: Fraction, tol) -> bool:
    tol = Fraction(tol)
    return bound.hi - plo <= tol and phi - bound.lo <= tol


def weak_limit_check(c: TowerConstruction, case: str, p: int, A: LevelSet, B: LevelSet,
                     tol=Fraction(1, 50), cap: Optional[int] = None,
                     stages: Optional[Sequence[int]] = None, min_height: int = 0,
                     escalate: int = 2, max_tests: int = 3) -> WeakLimitReport:
    """Compare mu(T^(p h_n) A n B) with the predicted weak limit along designated stages.

    Predictions: i -> mu(A n B); ii -> mu(T^-p A n B); iii -> mu(A)mu(B)/mu(X);
    iv -> (mu(A n B) + mu(T^-p A n B)) / 2.  A stage passes when the whole
    certified interval lies within tol of the whole prediction interval.
    """
    if case not in CASES:
        raise ValueError(f"case must be one of {CASES}")
    if p < 1:
        raise ValueError("p must be >= 1")
    cap = cap or stage_cap()
    n0 = max(A.stage, B.stage)
    found = designated_stages(c, _CASE_PATTERN[case], n0, cap, stages)
    if case == "iii":
        mc = classify_measure(c, cap)
        if mc.verdict != "finite":
            raise HypothesisMismatch("case iii needs a finite measure (projection onto constants)")
    tested = [n for n in found if c.height(n) >= min_height][:max_tests]
    if not tested:
        raise HypothesisMismatch(f"no designated stage reaches height {min_height} below the cap {cap}")
    exact_ab = np.intersect1d(expand(c, A, n0).levels, expand(c, B, n0).levels).size * c.width(n0)
    records = []
    for n in tested:
        m = p * c.height(n)
        try:
            N0 = auto_stage(c, m, n + 1, cap)
        except InsufficientStage as exc:
            records.append({"claim": f"weak-limit:{case}", "stage": n, "error": str(exc), "pass": False})
            continue
        run = list(range(N0, min(N0 + escalate, cap) + 1))
        try:
            bounds = correlations(c, A, B, m, run)
        except InsufficientStage as exc:
            records.append({"claim": f"weak-limit:{case}", "stage": n, "error": str(exc), "pass": False})
            continue
        for bd in bounds:
            plo, phi = _prediction(c, case, p, A, B, exact_ab, bd.stage_used, cap)
            ok = _within(bd, plo, phi, tol)
            records.append({
                "claim": f"weak-limit:{case}", "stage": n, "stage_used": bd.stage_used, "m": m,
                "predicted": [_qstr(plo), _qstr(phi)], "lo": _qstr(bd.lo), "hi": _qstr(bd.hi),
                "pass": ok,
            })
            if ok:
                return WeakLimitReport(case, p, records, True, n)
    return WeakLimitReport(case, p, records, False, None)


def _prediction(c, case, p, A, B, exact_ab, N, cap):
    if case == "i":
        return exact_ab, exact_ab
    if case in ("ii", "iv"):
        back = correlation(c, B, A, p, max(N, auto_stage(c, p, max(A.stage, B.stage), cap)))
        if case == "ii":
            return back.lo, back.hi
        return (exact_ab + back.lo) / 2, (exact_ab + back.hi) / 2
    # iii: product over total mass; the horizon total bounds mu(X) from below
    mx = total_measure(c, min(cap, N + 4))
    val = measure(c, A) * measure(c, B) / mx
    return val, val


# -------------------------------------------------------- named constructions

def named_construction(kind: str, **params) -> TowerConstruction:
    """Towers from a named tail rule; base width 1 unless ``base_width`` is given."""
    bw = Fraction(str(params.pop("base_width", 1)))
    return TowerConstruction((), TailRule(kind, params), bw)


def concatenate(constructions: Sequence[TowerConstruction], switch_counts: Sequence[int]) -> TowerConstruction:
    """Splice stage parameters: N_1 stages of the first, then N_i - 1 of each next.

    The last construction supplies every remaining stage; its count is only
    validated.  Rules that read h_n see the heights of the spliced tower.
    """
    if not constructions or len(constructions) != len(switch_counts):
        raise ValueError("need equally long, nonempty lists")
    if any(k < 1 for k in switch_counts):
        raise ValueError("switch counts must be >= 1")
    if len(constructions) == 1:
        return constructions[0]
    prefix: list[StageParams] = []
    h = 1
    for idx, (con, k) in enumerate(zip(constructions[:-1], switch_counts[:-1])):
        take = k if idx == 0 else k - 1
        for _ in range(take):
            n = len(prefix) + 1
            if n <= len(con.prefix):
                sp = con.prefix[n - 1]
            elif con.tail is not None:
                sp = con.tail.stage(n, h)
            else:
                raise ValueError(f"construction {idx + 1} has no stage {n}")
            prefix.append(sp)
            h = sp.r * h + sp.spacers
    last = constructions[-1]
    prefix.extend(last.prefix[len(prefix):])
    return TowerConstruction(tuple(prefix), last.tail, constructions[0].base_width)
