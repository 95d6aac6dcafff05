"""Formal-spectrum oracle for multiplicities of tensor, symmetric and Cartesian powers.

A formal spectrum is a list of distinct symbols standing for generic points
of a continuous spectral type.  Products of symbols are compared as
multisets; a multiset with a repeated symbol is a null point and is dropped.
Every count below comes from explicit orbit enumeration, with the closed
form used only as a cross-check.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import factorial, prod
from typing import Mapping, Optional, Sequence

import numpy as np

from .mset import MSet
from .multiplicity import PermGroupSpec, double_coset_count

Point = tuple[str, ...]


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class FormalSpectrum:
    """Symbols with a multiplicity per symbol (1 for a simple spectrum)."""

    symbols: tuple[str, ...]
    mult: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        syms = tuple(str(s) for s in self.symbols)
        if len(set(syms)) != len(syms):
            raise OracleError("symbols must be distinct")
        mult = tuple(self.mult) or (1,) * len(syms)
        if len(mult) != len(syms) or any(m < 1 for m in mult):
            raise OracleError("one positive multiplicity per symbol")
        object.__setattr__(self, "symbols", syms)
        object.__setattr__(self, "mult", mult)

    @classmethod
    def simple(cls, k: int, prefix: str = "s") -> "FormalSpectrum":
        return cls(tuple(f"{prefix}{i}" for i in range(k)))

    def multiplicity(self) -> dict[str, int]:
        return dict(zip(self.symbols, self.mult))

    def to_json(self) -> dict:
        return {"symbols": list(self.symbols), "mult": list(self.mult)}


@dataclass
class OracleReport:
    operation: str
    inputs: dict
    mset: MSet
    census: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        rec = {"operation": self.operation, "inputs": self.inputs, "mset": self.mset.to_json(), "census": self.census}
        rec.update(self.extra)
        return rec


def is_null(point: Sequence[str]) -> bool:
    return len(set(point)) != len(point)


def _slot_orbits(tuples: list[tuple], G: PermGroupSpec) -> int:
    """Orbits of G on tuples, slot permutation (g.t)[g(i)] = t[i]."""
    gel = G.elements()
    seen: set[tuple] = set()
    count = 0
    for t in tuples:
        if t in seen:
            continue
        count += 1
        for g in gel:
            img = [None] * len(t)
            for i, x in enumerate(t):
                img[g[i]] = x
            seen.add(tuple(img))
    return count


def _power_multiplicities(spec: FormalSpectrum, n: int, G: PermGroupSpec) -> tuple[dict[Point, int], int]:
    """Point -> multiplicity on V^(tensor n)/G, plus the number of null points skipped."""
    groups: dict[Point, list[tuple]] = {}
    for t in itertools.product(spec.symbols, repeat=n):
        groups.setdefault(tuple(sorted(t)), []).append(t)
    out, null = {}, 0
    for pt, tups in sorted(groups.items()):
        if is_null(pt):
            null += 1
            continue
        out[pt] = _slot_orbits(tups, G)
    return out, null


def _check_n(spec: FormalSpectrum, n: int) -> None:
    if n < 1:
        raise OracleError("n must be >= 1")
    if n > len(spec.symbols):
        raise OracleError(f"no generic points: n = {n} exceeds {len(spec.symbols)} symbols")


def invariant_power_mset(spec: FormalSpectrum, n: int, G: PermGroupSpec) -> OracleReport:
    """Multiplicities on the G-invariant part of the n-th tensor power."""
    _check_n(spec, n)
    if G.n != n:
        raise OracleError(f"group acts on {G.n} slots, power is {n}")
    order = G.order
    if factorial(n) % order:
        raise OracleError("|G| does not divide n!")
    m, null = _power_multiplicities(spec, n, G)
    expect = factorial(n) // order
    # G acts freely on orderings of distinct symbols
    if any(v != expect for v in m.values()):
        raise AssertionError("orbit count differs from n!/|G| on a generic point")
    return OracleReport("invariant_power_mset", {"spec": spec.to_json(), "n": n, "group": G.to_json()},
                        MSet(tuple(m.values())),
                        {"points": len(m), "null_points": null, "total": sum(m.values()), "group_order": order})


def tensor_vs_sym(spec: FormalSpectrum, n: int) -> OracleReport:
    """Multiplicities of the tensor and symmetric powers and their ratio n!."""
    _check_n(spec, n)
    ten, null = _power_multiplicities(spec, n, PermGroupSpec.trivial(n))
    sym, _ = _power_multiplicities(spec, n, PermGroupSpec.symmetric(n))
    if ten.keys() != sym.keys():
        raise AssertionError("tensor and symmetric powers live on different points")
    ratios = {ten[p] // sym[p] for p in ten if ten[p] % sym[p] == 0}
    if any(ten[p] != factorial(n) * sym[p] for p in ten):
        raise AssertionError("tensor multiplicity is not n! times the symmetric one")
    s = len(spec.symbols)
    total = sum(ten.values())
    if total != prod(range(s - n + 1, s + 1)):
        raise AssertionError("tensor census differs from the injective-arrangement count")
    return OracleReport("tensor_vs_sym", {"spec": spec.to_json(), "n": n}, MSet(tuple(ten.values())),
                        {"points": len(ten), "null_points": null, "total": total},
                        {"sym": MSet(tuple(sym.values())).to_json(), "ratio": sorted(ratios)})


def cartesian_mset(n: int, G: Optional[PermGroupSpec] = None) -> OracleReport:
    """Multiplicities of the n-th Cartesian power (orthocomplement of constants), mod G.

    Grade k (k slots carry the nonconstant part) contributes, at a generic
    point of the k-fold convolution, one copy per G-orbit of injective
    placements of k distinct symbols into the n slots.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    G = G or PermGroupSpec.trivial(n)
    if G.n != n:
        raise OracleError(f"group acts on {G.n} slots, power is {n}")
    by_grade = {}
    syms = tuple(f"s{i}" for i in range(n))
    for k in range(1, n + 1):
        layouts = []
        for slots in itertools.permutations(range(n), k):
            t = ["1"] * n
            for sym, slot in zip(syms[:k], slots):
                t[slot] = sym
            layouts.append(tuple(t))
        by_grade[k] = _slot_orbits(layouts, G)
    for k in range(1, n):
        dc = double_coset_count(G, n, n - k)
        if dc != by_grade[k]:
            raise AssertionError(f"grade {k}: {by_grade[k]} orbits but {dc} double cosets")
    return OracleReport("cartesian_mset", {"n": n, "group": G.to_json()}, MSet(tuple(by_grade.values())),
                        {"grades": {str(k): v for k, v in by_grade.items()}})


def _hyperoctahedral(n: int) -> PermGroupSpec:
    """Symmetries of n unordered pairs {2i, 2i+1} on 2n slots."""
    m = 2 * n
    gens = []
    for i in range(n):
        p = list(range(m))
        p[2 * i], p[2 * i + 1] = 2 * i + 1, 2 * i
        gens.append(tuple(p))
    if n >= 2:
        p = list(range(m))
        for i in range(n):
            j = (i + 1) % n
            p[2 * i], p[2 * i + 1] = 2 * j, 2 * j + 1
        gens.append(tuple(p))
        p = list(range(m))
        p[0], p[1], p[2], p[3] = 2, 3, 0, 1
        gens.append(tuple(p))
    return PermGroupSpec(m, tuple(gens))


ENUM_GRADE_CAP = 4


def exp_mset(p: int, N: int, variant: str = "copies") -> OracleReport:
    """Grades 1..N of the exponential (symmetric Fock) functor.

    ``copies``: the input has multiplicity p, grade n carries p^n (one copy per
    colouring of n distinct symbols).  ``sym2``: grade n of the symmetric
    square family carries (2n)!/(2^n n!) (placements of 2n distinct symbols
    into n unordered pairs).  Grades above 4 use the closed form.
    """
    if p < 1 or N < 1:
        raise ValueError("need p >= 1 and N >= 1")
    grades = {}
    for n in range(1, N + 1):
        if variant == "copies":
            closed = p**n
            if n <= ENUM_GRADE_CAP and p**n <= 10**5:
                syms = tuple(f"s{i}" for i in range(n))
                cols = {tuple(sorted(zip(syms, c))) for c in itertools.product(range(p), repeat=n)}
                val = len(cols)
                assert val == closed
            grades[n] = closed
        elif variant == "sym2":
            closed = factorial(2 * n) // (2**n * factorial(n))
            if n <= ENUM_GRADE_CAP:
                G = _hyperoctahedral(n)
                orders = list(itertools.permutations(range(2 * n)))
                val = _slot_orbits(orders, G)
                assert val == closed and G.order == 2**n * factorial(n)
            grades[n] = closed
        else:
            raise ValueError("variant must be 'copies' or 'sym2'")
    tail = None
    if variant == "copies" and p > 1:
        tail = f"pow({p})"
    elif variant == "sym2":
        tail = "oddfact"
    return OracleReport("exp_mset", {"p": p, "N": N, "variant": variant}, MSet(tuple(grades.values()), tail=tail),
                        {"grades": {str(k): v for k, v in grades.items()}})


# ------------------------------------------------ Z^n x| Z/n representation

def generic_characters(n: int, m: int, seed: int = 0, denom: int = 1_000_003) -> np.ndarray:
    """m characters of Z^n as exponents a (z_i = exp(2 pi i a_i / denom))."""
    rng = np.random.default_rng(seed)
    return rng.integers(1, denom, size=(m, n))


def _validate_generic(a: np.ndarray, denom: int) -> None:
    m, n = a.shape
    for row in a:
        if len(set((int(x) % denom) for x in row)) != n:
            raise OracleError("genericity violated: coincident coordinates within an orbit")
    lam = [int(sum(int(x) for x in row)) % denom for row in a]
    if len(set(lam)) != m:
        raise OracleError("genericity violated: two orbits share an eigenvalue")


def gn_rep_check(n: int, m: int, seed: int = 0, characters: Optional[np.ndarray] = None,
                 denom: int = 1_000_003) -> OracleReport:
    """Eigenvalue multiplicities of U_(1,...,1) in an (n m)-dimensional representation.

    Z^n acts diagonally by m orbits of n characters, the generator of Z/n
    shifts the coordinates cyclically (and with them the characters).
    """
    if n < 2 or m < 1:
        raise ValueError("need n >= 2 and m >= 1")
    a = generic_characters(n, m, seed, denom) if characters is None else np.asarray(characters, dtype=np.int64)
    if a.shape != (m, n):
        raise ValueError(f"characters must have shape ({m}, {n})")
    _validate_generic(a, denom)
    dim = n * m
    # basis (t, j): orbit t, shifted character number j
    ph = np.zeros((n, dim))
    for t in range(m):
        for j in range(n):
            shifted = np.roll(a[t], -j)
            for i in range(n):
                ph[i, t * n + j] = shifted[i]
    U = [np.diag(np.exp(2j * np.pi * ph[i] / denom)) for i in range(n)]
    P = np.zeros((dim, dim), dtype=complex)
    for t in range(m):
        for j in range(n):
            P[t * n + (j + 1) % n, t * n + j] = 1
    Pinv = P.conj().T
    for i in range(n):
        lhs = P @ U[i] @ Pinv
        if not np.allclose(lhs, U[(i - 1) % n]):
            raise AssertionError("shift does not normalize the diagonal part")
    Ustar = np.eye(dim, dtype=complex)
    for i in range(n):
        Ustar = Ustar @ U[i]
    for M in U + [P, Ustar]:
        if not np.allclose(M.conj().T @ M, np.eye(dim)):
            raise AssertionError("representation is not unitary")
    ev = np.linalg.eigvals(Ustar)
    ang = np.sort(np.mod(np.angle(ev), 2 * np.pi))
    clusters = []
    tol = np.pi / denom
    for x in ang:
        if clusters and abs(x - clusters[-1][0]) < tol:
            clusters[-1][1] += 1
        else:
            clusters.append([x, 1])
    if len(clusters) > 1 and abs(clusters[0][0] + 2 * np.pi - clusters[-1][0]) < tol:
        clusters[0][1] += clusters.pop()[1]
    mults = [c[1] for c in clusters]
    if any(x != n for x in mults):
        raise AssertionError(f"eigenvalue multiplicities {mults}, expected all {n}")
    return OracleReport("gn_rep_check", {"n": n, "m": m, "seed": seed}, MSet(tuple(mults)),
                        {"dimension": dim, "eigenvalues": len(clusters)})


def strong_disjoint_product(A: FormalSpectrum, B: FormalSpectrum) -> OracleReport:
    """Multiplicities of the tensor product of two formally strongly disjoint spectra."""
    shared = set(A.symbols) & set(B.symbols)
    if shared:
        raise OracleError(f"not strongly disjoint in the formal model: shared {sorted(shared)}")
    ma, mb = A.multiplicity(), B.multiplicity()
    # product points (a, b) are pairwise distinct by genericity
    vals = {(a, b): ma[a] * mb[b] for a in A.symbols for b in B.symbols}
    return OracleReport("strong_disjoint_product", {"A": A.to_json(), "B": B.to_json()},
                        MSet(tuple(vals.values())), {"points": len(vals), "total": sum(vals.values())})
