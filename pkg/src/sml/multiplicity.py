"""Arithmetic of multiplicity sets, permutation double cosets and the realizability planner.

Permutations are tuples of images of 0..n-1; compose(p, q) is p after q.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from math import factorial, gcd, prod
from typing import Iterable, Optional, Sequence

import numpy as np

from . import algebra as alg
from .mset import MSet

logger = logging.getLogger(__name__)

Perm = tuple[int, ...]


# ------------------------------------------------------------- set calculus

def _finite_bound(*sets: MSet) -> Optional[int]:
    """Largest value up to which an operation on truncations is exact."""
    bounds = [max(s.elements, default=0) for s in sets if not s.is_finite]
    return min(bounds) if bounds else None


def _flat(tail: str) -> str:
    """Nested descriptors are flattened so the result keeps one level of parentheses."""
    return tail.replace("(", "-").replace(")", "").replace(";", "-").replace(":", "_")


def _combine_tail(op: str, *sets: MSet) -> Optional[str]:
    tails = [_flat(s.tail or "inf") for s in sets if not s.is_finite]
    if not tails:
        return None
    return f"{op}({';'.join(tails)})"


def diamond(E: MSet, F: MSet) -> MSet:
    """E u F u E.F; an empty operand is neutral."""
    if E.is_empty:
        return F
    if F.is_empty:
        return E
    vals = set(E) | set(F) | {a * b for a in E for b in F}
    bound = _finite_bound(E, F)
    if bound is not None:
        vals = {v for v in vals if v <= bound}
    inf = E.has_infinity or F.has_infinity
    return MSet(tuple(vals), inf, _combine_tail("diamond", E, F))


def scale(n: int, E: MSet) -> MSet:
    if n < 1:
        raise ValueError("scale factor must be >= 1")
    tail = None if E.tail is None else (E.tail if n == 1 else f"scale({n};{_flat(E.tail)})")
    return MSet(tuple(n * e for e in E), E.has_infinity, tail)


def factor_scale(E: MSet) -> tuple[int, MSet]:
    """(g, E/g) with g = gcd(E)."""
    if not E.elements:
        raise ValueError("cannot factor an empty set")
    g = reduce(gcd, E.elements)
    return g, MSet(tuple(e // g for e in E), E.has_infinity, E.tail if g == 1 else None)


def semigroup_closure(gens: Iterable[int], op: str, bound: int) -> MSet:
    gens = sorted(set(int(g) for g in gens))
    if not gens or gens[0] < 1:
        raise ValueError("generators must be positive integers")
    if bound < gens[-1]:
        raise ValueError("bound must be >= max(gens)")
    if op not in ("add", "mul"):
        raise ValueError("op must be 'add' or 'mul'")
    f = (lambda a, b: a + b) if op == "add" else (lambda a, b: a * b)
    seen = set(gens)
    frontier = list(gens)
    while frontier:
        nxt = []
        for a in frontier:
            for g in gens:
                v = f(a, g)
                if v <= bound and v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    if op == "mul" and gens == [1]:
        return MSet((1,))
    tag = f"semigroup({op}-{'-'.join(map(str, gens))})"
    return MSet(tuple(seen), tail=tag)


def is_semigroup(E: Iterable[int], op: str, bound: int) -> bool:
    """Closed under op below ``bound``."""
    S = set(E)
    f = (lambda a, b: a + b) if op == "add" else (lambda a, b: a * b)
    return all(f(a, b) in S for a in S for b in S if f(a, b) <= bound)


# -------------------------------------------------------------- permutations

def compose(p: Perm, q: Perm) -> Perm:
    return tuple(p[i] for i in q)


def inverse(p: Perm) -> Perm:
    out = [0] * len(p)
    for i, x in enumerate(p):
        out[x] = i
    return tuple(out)


def cycle_type(p: Perm) -> tuple[int, ...]:
    """Cycle lengths in decreasing order, fixed points included."""
    seen = [False] * len(p)
    out = []
    for i in range(len(p)):
        if not seen[i]:
            k, j = 0, i
            while not seen[j]:
                seen[j] = True
                j = p[j]
                k += 1
            out.append(k)
    return tuple(sorted(out, reverse=True))


def centralizer_order(ctype: Sequence[int]) -> int:
    """|C(g)| = prod i^m_i m_i! for cycle type with m_i cycles of length i."""
    counts: dict[int, int] = {}
    for c in ctype:
        counts[c] = counts.get(c, 0) + 1
    return prod(i**m * factorial(m) for i, m in counts.items())


def from_cycles(n: int, cycles: Iterable[Sequence[int]]) -> Perm:
    p = list(range(n))
    for cyc in cycles:
        for a, b in zip(cyc, list(cyc[1:]) + [cyc[0]]):
            p[a] = b
    return tuple(p)


@dataclass(frozen=True)
class PermGroupSpec:
    """Subgroup of S_n given by generators (images of 0..n-1)."""

    n: int
    generators: tuple[Perm, ...] = ()

    def __post_init__(self) -> None:
        gens = tuple(tuple(int(x) for x in g) for g in self.generators)
        for g in gens:
            if len(g) != self.n or sorted(g) != list(range(self.n)):
                raise ValueError(f"{g} is not a permutation of 0..{self.n - 1}")
        object.__setattr__(self, "generators", gens)

    @classmethod
    def trivial(cls, n: int) -> "PermGroupSpec":
        return cls(n, ())

    @classmethod
    def symmetric(cls, n: int, k: Optional[int] = None) -> "PermGroupSpec":
        """S_k inside S_n: permutations fixing every i >= k."""
        k = n if k is None else k
        if not 0 <= k <= n:
            raise ValueError("need 0 <= k <= n")
        gens = []
        if k >= 2:
            gens.append(from_cycles(n, [[0, 1]]))
        if k >= 3:
            gens.append(from_cycles(n, [list(range(k))]))
        return cls(n, tuple(gens))

    @classmethod
    def alternating(cls, n: int, k: Optional[int] = None) -> "PermGroupSpec":
        k = n if k is None else k
        gens = [from_cycles(n, [[0, 1, i]]) for i in range(2, k)]
        return cls(n, tuple(gens))

    @classmethod
    def cyclic(cls, n: int, k: Optional[int] = None) -> "PermGroupSpec":
        k = n if k is None else k
        return cls(n, (from_cycles(n, [list(range(k))]),) if k >= 2 else ())

    def elements(self) -> frozenset[Perm]:
        return _closure(self.n, self.generators)

    @property
    def order(self) -> int:
        return len(self.elements())

    def to_json(self) -> dict:
        return {"n": self.n, "generators": [list(g) for g in self.generators]}

    @classmethod
    def from_json(cls, rec: dict) -> "PermGroupSpec":
        return cls(int(rec["n"]), tuple(tuple(g) for g in rec.get("generators", [])))


@lru_cache(maxsize=4096)
def _closure(n: int, gens: tuple[Perm, ...]) -> frozenset[Perm]:
    e = tuple(range(n))
    seen = {e}
    frontier = [e]
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens:
                y = compose(x, g)
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    return frozenset(seen)


@lru_cache(maxsize=8)
def _sym_table(n: int):
    elems = list(itertools.permutations(range(n)))
    index = {p: i for i, p in enumerate(elems)}
    arr = np.asarray(elems, dtype=np.int64).reshape(len(elems), n)
    radix = n ** np.arange(n - 1, -1, -1, dtype=np.int64)
    lut = np.full(max(1, n**n), -1, dtype=np.int64)
    lut[(arr * radix).sum(axis=1)] = np.arange(len(elems))
    # comp[a, b, i] = elems[a][elems[b][i]]
    comp = arr[:, arr]
    mul = lut[(comp * radix).sum(axis=2)]
    return elems, index, mul


def _index_closure(mul: np.ndarray, gens: Sequence[int]) -> frozenset[int]:
    seen = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for x in frontier:
            row = mul[x]
            for g in gens:
                y = int(row[g])
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    return frozenset(seen)


@lru_cache(maxsize=8)
def _all_subgroups(n: int) -> tuple[tuple[frozenset[int], tuple[int, ...]], ...]:
    elems, index, mul = _sym_table(n)
    found: dict[frozenset[int], tuple[int, ...]] = {frozenset({0}): ()}
    queue = [frozenset({0})]
    while queue:
        H = queue.pop()
        gens = found[H]
        for g in range(len(elems)):
            if g in H:
                continue
            K = _index_closure(mul, gens + (g,))
            if K not in found:
                found[K] = gens + (g,)
                queue.append(K)
    return tuple(sorted(found.items(), key=lambda kv: (len(kv[0]), sorted(kv[0]))))


def subgroup_catalog(n: int) -> list[PermGroupSpec]:
    """All subgroups of S_n for n <= 5; a named list for n = 6."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n <= 5:
        elems = _sym_table(n)[0]
        return [PermGroupSpec(n, tuple(elems[g] for g in gens)) for _, gens in _all_subgroups(n)]
    if n == 6:
        return _named_catalog_6()
    raise ValueError("subgroup catalog covers n <= 6")


def _named_catalog_6() -> list[PermGroupSpec]:
    n = 6
    out = [PermGroupSpec.trivial(n)]
    out += [PermGroupSpec.symmetric(n, k) for k in range(2, 7)]
    out += [PermGroupSpec.alternating(n, k) for k in range(3, 7)]
    out.append(PermGroupSpec.cyclic(n))
    out.append(PermGroupSpec(n, (from_cycles(n, [list(range(6))]), from_cycles(n, [[1, 5], [2, 4]]))))
    out.append(PermGroupSpec(n, (from_cycles(n, [[0, 1]]), from_cycles(n, [[0, 1, 2]]),
                                 from_cycles(n, [[3, 4]]), from_cycles(n, [[3, 4, 5]]))))
    out.append(PermGroupSpec(n, (from_cycles(n, [[0, 1]]), from_cycles(n, [[2, 3]]),
                                 from_cycles(n, [[2, 3, 4, 5]]))))
    out.append(PermGroupSpec(n, (from_cycles(n, [[0, 1]]), from_cycles(n, [[2, 3]]), from_cycles(n, [[4, 5]]))))
    out.append(PermGroupSpec(n, (from_cycles(n, [[0, 1, 2]]), from_cycles(n, [[3, 4, 5]]))))
    return out


# ------------------------------------------------------------- double cosets

def _sub_indices(G: PermGroupSpec) -> list[int]:
    index = _sym_table(G.n)[1]
    return sorted(index[p] for p in G.elements())


def double_coset_count_enum(G: PermGroupSpec, n: int, k: int) -> int:
    """Number of double cosets G sigma S_k by direct enumeration."""
    if G.n != n:
        raise ValueError(f"degree mismatch: group on {G.n} points, n = {n}")
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    _, _, mul = _sym_table(n)
    g_idx = np.asarray(_sub_indices(G), dtype=np.int64)
    s_idx = np.asarray(_sub_indices(PermGroupSpec.symmetric(n, k)), dtype=np.int64)
    seen = np.zeros(mul.shape[0], dtype=bool)
    count = 0
    for sigma in range(mul.shape[0]):
        if seen[sigma]:
            continue
        count += 1
        left = mul[g_idx, sigma]
        seen[mul[left[:, None], s_idx[None, :]].ravel()] = True
    return count


def double_coset_count_burnside(G: PermGroupSpec, n: int, k: int) -> int:
    """Orbits of G x S_k on S_n acting by sigma -> g sigma tau^-1.

    (g, tau) fixes sigma iff tau = sigma^-1 g sigma, so the fixed count is
    |C(g)| when g and tau share a cycle type and 0 otherwise.
    """
    if G.n != n:
        raise ValueError(f"degree mismatch: group on {G.n} points, n = {n}")
    Sk = PermGroupSpec.symmetric(n, k).elements()
    types_k: dict[tuple[int, ...], int] = {}
    for t in Sk:
        ct = cycle_type(t)
        types_k[ct] = types_k.get(ct, 0) + 1
    Gel = G.elements()
    total = 0
    for g in Gel:
        ct = cycle_type(g)
        total += types_k.get(ct, 0) * centralizer_order(ct)
    denom = len(Gel) * len(Sk)
    if total % denom:
        raise ArithmeticError("Burnside sum is not divisible by the group order")
    return total // denom


def double_coset_count(G: PermGroupSpec, n: int, k: int) -> int:
    """#(G \\ S_n / S_k), counted twice; the two counts must agree."""
    a = double_coset_count_enum(G, n, k)
    b = double_coset_count_burnside(G, n, k)
    if a != b:
        raise AssertionError(f"double coset counts disagree: enumeration {a}, Burnside {b}")
    return a


def power_multiplicities(n: int, G: Optional[PermGroupSpec] = None) -> MSet:
    """Multiplicities of the n-fold Cartesian power, or of its quotient by G."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if G is None:
        return MSet(tuple(factorial(n) // factorial(k) for k in range(n)))
    return MSet(tuple(double_coset_count(G, n, k) for k in range(1, n)))


# ------------------------------------------------------------------- Poisson

def poisson_terms(kind: str, params: dict, terms: int) -> list[int]:
    if terms < 1:
        raise ValueError("terms must be >= 1")
    if kind == "example82":
        return [prod(range(1, 2 * j, 2)) for j in range(1, terms + 1)]
    if kind == "exp_p":
        p = int(params["p"])
        if p < 1:
            raise ValueError("p must be >= 1")
        return [p**j for j in range(1, terms + 1)]
    if kind in ("A", "A(m,k)"):
        m, k = int(params["m"]), int(params["k"])
        gens = params.get("generators")
        if gens is None:
            raise ValueError(f"A({m},{k}) needs a subgroup of S_{m} of order {k}: provide generators")
        G = PermGroupSpec(m, tuple(tuple(g) for g in gens))
        if G.order != k:
            raise ValueError(f"generators give a subgroup of order {G.order}, not {k}")
        return [factorial(m * j) // (k**j * factorial(j)) for j in range(1, terms + 1)]
    raise ValueError(f"unknown Poisson family {kind!r}")


def poisson_sets(kind: str, params: Optional[dict] = None, terms: int = 5) -> MSet:
    params = params or {}
    vals = poisson_terms(kind, params, terms)
    if kind == "exp_p" and int(params["p"]) == 1:
        return MSet((1,))
    tag = {"example82": "oddfact", "exp_p": f"pow({params.get('p')})"}.get(kind)
    if tag is None:
        tag = f"A({params['m']};{params['k']})"
    return MSet(tuple(vals), tail=tag)


# ------------------------------------------------------------------- planner

ROUTES = ("Thm2.1", "Thm4.1", "Thm5.4", "Thm5.7", "Cor5.5", "Thm3.5/6.3", "Thm6.7", "Thm7.1-infinite", "open")


@dataclass
class Plan:
    route: str
    parameters: dict = field(default_factory=dict)
    caveats: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.route not in ROUTES:
            raise ValueError(f"unknown route {self.route!r}")

    def to_json(self) -> dict:
        return {"route": self.route, "parameters": self.parameters, "caveats": self.caveats}


def diamond_decomposition(E: Iterable[int], max_len: int = 6) -> Optional[list[int]]:
    """Factors p_1 <= ... <= p_l (l >= 2, p_i >= 2) with {p_1} <> ... <> {p_l} = E."""
    target = frozenset(E)
    if not target or min(target) < 2:
        return None
    cands = sorted(target)
    top = max(target)

    @lru_cache(maxsize=None)
    def search(factors: tuple[int, ...], products: frozenset[int]) -> Optional[tuple[int, ...]]:
        if products == target and len(factors) >= 2:
            return factors
        if len(factors) >= max_len:
            return None
        lo = factors[-1] if factors else cands[0]
        for p in cands:
            if p < lo or p > top:
                continue
            new = products | {p} | {x * p for x in products}
            if not new <= target:
                continue
            hit = search(factors + (p,), frozenset(new))
            if hit:
                return hit
        return None

    res = search((), frozenset())
    return list(res) if res else None


@lru_cache(maxsize=1)
def _double_coset_table() -> tuple[tuple[frozenset[int], int, PermGroupSpec], ...]:
    out = []
    for n in range(2, 7):
        for G in subgroup_catalog(n):
            vals = frozenset(double_coset_count_burnside(G, n, k) for k in range(1, n))
            out.append((vals, n, G))
    return tuple(out)


def _realization_payload(E: MSet) -> tuple[dict, list[str]]:
    caveats = []
    if not E.elements:
        return {"realization": None}, caveats
    try:
        R = alg.realize_finite(E, verify=True, truncate=None if E.is_finite else max(E.elements))
    except alg.RealizationRefused as exc:
        caveats.append(f"realization refused: {exc}")
        return {"realization": None}, caveats
    except alg.StructureError as exc:
        caveats.append(f"no realization: {exc}")
        return {"realization": None}, caveats
    if R.annotation != "exact":
        caveats.append(R.annotation)
    return {"realization": R.to_json(), "verified": True}, caveats


def plan(E: MSet) -> Plan:
    """First matching realization route.

    Order: 1 in E; a diamond product of >= 2 singletons; 2 in E; a singleton;
    n.E' with 1 in E'; a semigroup; a double-coset set; otherwise infinite
    measure only.
    """
    if E.is_empty:
        raise ValueError("E must be nonempty")
    vals = set(E.elements)
    finite = E.is_finite
    mixing = "mixing realization conjectural"
    if 1 in vals:
        rest = MSet(tuple(vals - {1}), E.has_infinity, E.tail)
        payload, cav = _realization_payload(rest)
        payload["E"] = rest.to_json()
        cav.insert(0, "normalized to E \\ {1}; the route adjoins 1")
        return Plan("Thm2.1", payload, cav + [mixing])
    if finite:
        fac = diamond_decomposition(vals)
        if fac:
            return Plan("Thm5.4", {"factors": [[p] for p in fac]}, [mixing])
    if 2 in vals:
        rest = MSet(tuple(vals - {2}), E.has_infinity, E.tail)
        return Plan("Thm4.1", {"E": rest.to_json()}, ["the route adjoins 2", mixing])
    if finite and len(vals) == 1:
        return Plan("Thm6.7", {"n": next(iter(vals))}, [])
    g, Ep = factor_scale(E)
    if g > 1 and 1 in Ep:
        sub = MSet(tuple(set(Ep.elements) - {1}), Ep.has_infinity, Ep.tail)
        return Plan("Thm5.7", {"n": g, "E": sub.to_json()}, [mixing])
    if not finite:
        bound = max(vals) if vals else 0
        for op in ("mul", "add"):
            if vals and is_semigroup(vals, op, bound):
                caveats = ["detected on the stored truncation"]
                if E.tail and E.tail.startswith("semigroup"):
                    caveats = []
                return Plan("Cor5.5", {"op": op, "truncation": sorted(vals), "tail": E.tail},
                            caveats + ["Gaussian realizations have simple spectrum or infinite multiplicity set"])
    if finite:
        for dvals, n, G in _double_coset_table():
            if dvals == vals:
                return Plan("Thm3.5/6.3", {"n": n, "group": G.to_json(), "order": G.order}, [])
    return Plan("Thm7.1-infinite", {"E": E.to_json()}, ["open (probability-preserving)"])
