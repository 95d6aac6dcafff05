"""Finite abelian groups with monomial automorphisms, orbit sets and characters.

Groups are direct sums of cyclic summands Z/q_j.  Elements are dense tuples of
residues indexed by slot (slots are 0-based everywhere in this package).  An
automorphism is monomial: slot j is sent to slot perm[j] with multiplier
units[j].
"""
from __future__ import annotations

import cmath
import json
import logging
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from math import gcd, lcm, prod
from typing import Iterable, Iterator, Optional, Sequence

from .cyclo import Cyclo
from .mset import MSet

logger = logging.getLogger(__name__)

Element = tuple[int, ...]

DEFAULT_SLOT_BOUND = 10_000
DEFAULT_PRIME_CAP = 100_000


class StructureError(ValueError):
    """Element, slot or modulus does not fit the ambient group."""


class RealizationRefused(ValueError):
    """A size guard tripped; ``required`` holds the bound that would be needed."""

    def __init__(self, msg: str, required: int):
        super().__init__(msg)
        self.required = required


@dataclass(frozen=True)
class FinAbGroup:
    summands: tuple[int, ...]
    blocks: tuple[tuple[str, tuple[int, ...]], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "summands", tuple(int(q) for q in self.summands))
        if not self.summands:
            raise StructureError("a group needs at least one slot")
        if any(q < 2 for q in self.summands):
            raise StructureError("cyclic moduli must be >= 2")
        if self.blocks:
            seen = sorted(s for _, slots in self.blocks for s in slots)
            if seen != list(range(len(self.summands))):
                raise StructureError("blocks must partition the slots")

    @property
    def rank(self) -> int:
        return len(self.summands)

    @property
    def order(self) -> int:
        return prod(self.summands)

    @property
    def exponent(self) -> int:
        return reduce(lcm, self.summands, 1)

    def zero(self) -> Element:
        return (0,) * self.rank

    def element(self, residues: dict[int, int] | Sequence[int]) -> Element:
        """Build an element from a dense sequence or a sparse slot->residue map."""
        if isinstance(residues, dict):
            g = [0] * self.rank
            for j, x in residues.items():
                if not 0 <= j < self.rank:
                    raise StructureError(f"slot {j} outside group of rank {self.rank}")
                g[j] = x
        else:
            g = list(residues)
            if len(g) != self.rank:
                raise StructureError(f"element has {len(g)} slots, group has {self.rank}")
        return tuple(x % q for x, q in zip(g, self.summands))

    def check(self, g: Sequence[int]) -> None:
        if len(g) != self.rank:
            raise StructureError(f"element has {len(g)} slots, group has {self.rank}")

    def add(self, g: Element, h: Element) -> Element:
        return tuple((a + b) % q for a, b, q in zip(g, h, self.summands))

    def neg(self, g: Element) -> Element:
        return tuple((-a) % q for a, q in zip(g, self.summands))

    def elements(self, support: Optional[Iterable[int]] = None) -> Iterator[Element]:
        """All elements, optionally restricted to a coordinate support."""
        slots = sorted(set(range(self.rank) if support is None else support))
        base = [0] * self.rank
        yield from _iter_support(base, slots, self.summands, 0)

    def to_json(self) -> dict:
        return {"summands": list(self.summands)}


def _iter_support(base, slots, mods, i):
    if i == len(slots):
        yield tuple(base)
        return
    j = slots[i]
    for x in range(mods[j]):
        base[j] = x
        yield from _iter_support(base, slots, mods, i + 1)
    base[j] = 0


@dataclass(frozen=True)
class MonomialAut:
    group: FinAbGroup
    perm: tuple[int, ...]
    units: tuple[int, ...]

    def __post_init__(self) -> None:
        n = self.group.rank
        object.__setattr__(self, "perm", tuple(int(p) for p in self.perm))
        object.__setattr__(self, "units", tuple(int(u) for u in self.units))
        if len(self.perm) != n or len(self.units) != n:
            raise StructureError("perm and units must have one entry per slot")
        if sorted(self.perm) != list(range(n)):
            raise StructureError("perm is not a permutation of the slots")
        q = self.group.summands
        for j in range(n):
            if q[self.perm[j]] != q[j]:
                raise StructureError(f"slot {j} (mod {q[j]}) mapped to slot of modulus {q[self.perm[j]]}")
            if gcd(self.units[j], q[j]) != 1:
                raise StructureError(f"multiplier {self.units[j]} is not a unit mod {q[j]}")
        object.__setattr__(self, "units", tuple(u % m for u, m in zip(self.units, q)))

    @classmethod
    def identity(cls, group: FinAbGroup) -> "MonomialAut":
        return cls(group, tuple(range(group.rank)), (1,) * group.rank)

    @classmethod
    def diagonal(cls, group: FinAbGroup, units: Sequence[int]) -> "MonomialAut":
        return cls(group, tuple(range(group.rank)), tuple(units))

    def __call__(self, g: Sequence[int]) -> Element:
        return apply_aut(self, g)

    def compose(self, other: "MonomialAut") -> "MonomialAut":
        """self after other."""
        if other.group != self.group:
            raise StructureError("automorphisms of different groups")
        perm = tuple(self.perm[other.perm[j]] for j in range(self.group.rank))
        units = tuple(self.units[other.perm[j]] * other.units[j] for j in range(self.group.rank))
        return MonomialAut(self.group, perm, units)

    def inverse(self) -> "MonomialAut":
        n = self.group.rank
        q = self.group.summands
        perm = [0] * n
        units = [0] * n
        for j in range(n):
            t = self.perm[j]
            perm[t] = j
            units[t] = pow(self.units[j], -1, q[j])
        return MonomialAut(self.group, tuple(perm), tuple(units))

    def power(self, k: int) -> "MonomialAut":
        if k < 0:
            return self.inverse().power(-k)
        out = MonomialAut.identity(self.group)
        base = self
        while k:
            if k & 1:
                out = base.compose(out)
            base = base.compose(base)
            k >>= 1
        return out

    def is_identity(self) -> bool:
        return self.perm == tuple(range(self.group.rank)) and all(u == 1 for u in self.units)

    def order(self) -> int:
        """Multiplicative order of the automorphism."""
        total = 1
        for cyc in self.cycles():
            mult = 1
            for j in cyc:
                mult = mult * self.units[j] % self.group.summands[j]
            total = lcm(total, len(cyc) * _unit_order(mult, self.group.summands[cyc[0]]))
        return total

    def cycles(self) -> list[list[int]]:
        """Slot cycles of the permutation, each listed as j, perm[j], perm[perm[j]], ..."""
        seen = [False] * self.group.rank
        out = []
        for j in range(self.group.rank):
            if seen[j]:
                continue
            cyc = []
            t = j
            while not seen[t]:
                seen[t] = True
                cyc.append(t)
                t = self.perm[t]
            out.append(cyc)
        return out

    def dual(self) -> "MonomialAut":
        """Transpose map, acting on characters in the same tuple form.

        With chi_g(k) = exp(2 pi i sum g_j k_j / q_j) one has chi_g(v k) = chi_g'(k)
        where g'_j = u_j g_perm[j]; in monomial form perm' = perm^-1 and
        units'[s] = u[perm^-1(s)].
        """
        n = self.group.rank
        inv = [0] * n
        for j, t in enumerate(self.perm):
            inv[t] = j
        return MonomialAut(self.group, tuple(inv), tuple(self.units[inv[s]] for s in range(n)))

    def to_json(self) -> dict:
        return {"perm": list(self.perm), "units": list(self.units)}


def _unit_order(u: int, q: int) -> int:
    u %= q
    k, x = 1, u
    while x != 1 % q:
        x = x * u % q
        k += 1
    return k


@dataclass(frozen=True)
class SupportSubgroup:
    group: FinAbGroup
    support: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        object.__setattr__(self, "support", frozenset(int(s) for s in self.support))
        if any(not 0 <= s < self.group.rank for s in self.support):
            raise StructureError("support slots outside the ambient group")

    @classmethod
    def full(cls, group: FinAbGroup) -> "SupportSubgroup":
        return cls(group, frozenset(range(group.rank)))

    def contains(self, g: Sequence[int]) -> bool:
        return all(x == 0 for j, x in enumerate(g) if j not in self.support)

    def order(self) -> int:
        return prod(self.group.summands[j] for j in self.support)

    def annihilator(self) -> "SupportSubgroup":
        """The dual annihilator Y, again a coordinate subgroup."""
        return SupportSubgroup(self.group, frozenset(range(self.group.rank)) - self.support)

    def to_json(self) -> dict:
        return {"support": sorted(self.support)}


def serialize(group: FinAbGroup, aut: Optional[MonomialAut] = None,
              sub: Optional[SupportSubgroup] = None) -> dict:
    """Byte-stable record {summands, perm, units, support}."""
    aut = aut or MonomialAut.identity(group)
    sub = sub or SupportSubgroup.full(group)
    return {
        "summands": list(group.summands),
        "perm": list(aut.perm),
        "units": list(aut.units),
        "support": sorted(sub.support),
    }


def deserialize(rec: dict) -> tuple[FinAbGroup, MonomialAut, SupportSubgroup]:
    group = FinAbGroup(tuple(rec["summands"]))
    n = group.rank
    aut = MonomialAut(group, tuple(rec.get("perm", range(n))), tuple(rec.get("units", [1] * n)))
    sub = SupportSubgroup(group, frozenset(rec.get("support", range(n))))
    return group, aut, sub


def dumps(group, aut=None, sub=None) -> str:
    return json.dumps(serialize(group, aut, sub), separators=(",", ":"))


# ---------------------------------------------------------------- operations

def apply_aut(v: MonomialAut, g: Sequence[int]) -> Element:
    q = v.group.summands
    if len(g) != len(q):
        raise StructureError(f"element has {len(g)} slots, automorphism acts on {len(q)}")
    out = [0] * len(q)
    for j, x in enumerate(g):
        t = v.perm[j]
        out[t] = v.units[j] * x % q[t]
    return tuple(out)


def orbit(v: MonomialAut, g: Sequence[int]) -> list[Element]:
    """v^0 g, v^1 g, ... up to the first return."""
    v.group.check(g)
    start = tuple(x % q for x, q in zip(g, v.group.summands))
    out = [start]
    x = apply_aut(v, start)
    while x != start:
        out.append(x)
        x = apply_aut(v, x)
    return out


def multiplicity_set_L_bruteforce(G: FinAbGroup, v: MonomialAut,
                                  H: Optional[SupportSubgroup] = None) -> MSet:
    """Reference evaluation: walk the orbit of every nonzero h in H."""
    H = H or SupportSubgroup.full(G)
    zero = G.zero()
    sizes = set()
    for h in G.elements(H.support):
        if h == zero:
            continue
        sizes.add(sum(1 for x in orbit(v, h) if H.contains(x)))
    if not sizes:
        raise ValueError("no nonzero h: the subgroup is trivial")
    return MSet(tuple(sizes))


def _merge(sig_a, sig_b):
    la, ja = sig_a
    lb, jb = sig_b
    if la == 1:
        return sig_b
    if lb == 1:
        return sig_a
    L = lcm(la, lb)
    return L, frozenset(i for i in range(L) if i % la in ja and i % lb in jb)


def multiplicity_set_L(G: FinAbGroup, v: MonomialAut,
                       H: Optional[SupportSubgroup] = None) -> MSet:
    """L(G, v, H): the sizes #(O(h) n H) over nonzero h in H.

    The orbit of h splits along the slot cycles of v.  For every cycle we
    enumerate the part of H living on it and record, per element, the period
    of its orbit and the residues i (mod that period) with v^i x in H.  The
    count for a general h is read off the combined residue pattern, which is
    exact and avoids walking orbits of length up to the order of v.
    """
    H = H or SupportSubgroup.full(G)
    if not H.support:
        raise ValueError("no nonzero h: the subgroup is trivial")
    q = G.summands
    # per cycle: set of (period, hit residues) for nonzero parts
    sig_sets = []
    for cyc in v.cycles():
        slots = [j for j in cyc if j in H.support]
        sigs = set()
        if slots:
            local = {j: i for i, j in enumerate(cyc)}
            for vals in _iter_support([0] * len(cyc), [local[j] for j in slots], [q[cyc[0]]] * len(cyc), 0):
                if not any(vals):
                    continue
                sigs.add(_cycle_signature(v, cyc, vals, H))
        sig_sets.append(sigs)
    # fold: states are (signature, nonzero flag)
    states = {((1, frozenset([0])), False)}
    for sigs in sig_sets:
        if not sigs:
            continue
        nxt = set(states)  # this cycle's part is zero
        for sig, flag in states:
            for s in sigs:
                nxt.add((_merge(sig, s), True))
        states = nxt
    sizes = {len(sig[1]) for sig, flag in states if flag}
    return MSet(tuple(sizes))


def _cycle_signature(v: MonomialAut, cyc: list[int], vals: Sequence[int], H: SupportSubgroup):
    # walk the orbit of an element supported on one slot cycle
    q = v.group.summands[cyc[0]]
    n = len(cyc)
    pos = {j: i for i, j in enumerate(cyc)}
    mult = [v.units[j] for j in cyc]
    target = [pos[v.perm[j]] for j in cyc]
    inH = [j in H.support for j in cyc]
    start = tuple(vals)
    x = start
    hits = []
    i = 0
    while True:
        if all(x[t] == 0 or inH[t] for t in range(n)):
            hits.append(i)
        y = [0] * n
        for t in range(n):
            if x[t]:
                y[target[t]] = mult[t] * x[t] % q
        x = tuple(y)
        i += 1
        if x == start:
            break
    return i, frozenset(hits)


def lcm_closed(E: MSet | Iterable[int]) -> bool:
    s = set(E)
    return all(lcm(a, b) in s for a in s for b in s)


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def block_for_length(p: int, prime_cap: Optional[int] = None) -> tuple[int, int]:
    """(q, u): Z/q with a multiplier whose nonzero orbits all have length p.

    q is the least prime with q = 1 mod p and u the least unit of order p; p = 1
    gives (2, 1).
    """
    if p < 1:
        raise ValueError("orbit lengths are positive")
    if p == 1:
        return 2, 1
    cap = prime_cap or int(os.environ.get("SML_PRIME_CAP", DEFAULT_PRIME_CAP))
    q = p + 1
    while q <= cap:
        if _is_prime(q):
            for u in range(2, q):
                if _unit_order(u, q) == p:
                    return q, u
        q += p
    raise ValueError(f"no prime q = 1 mod {p} below the search cap {cap}")


@dataclass(frozen=True)
class Realization:
    """(G, v, H) plus bookkeeping; iterates as the triple."""

    group: FinAbGroup
    aut: MonomialAut
    subgroup: SupportSubgroup
    annotation: str = "exact"

    def __iter__(self):
        return iter((self.group, self.aut, self.subgroup))

    def to_json(self) -> dict:
        rec = serialize(self.group, self.aut, self.subgroup)
        rec["blocks"] = [[name, list(slots)] for name, slots in self.group.blocks]
        rec["annotation"] = self.annotation
        return rec


def _truncate(E: MSet | Iterable[int], truncate: Optional[int]) -> tuple[list[int], str]:
    if isinstance(E, MSet):
        elems = list(E.elements)
        infinite = not E.is_finite
    else:
        elems = sorted(set(E))
        infinite = False
    if truncate is not None:
        if len(elems) > truncate:
            infinite = True
        elems = elems[:truncate]
    elif infinite:
        raise ValueError("infinite set: pass a truncation length")
    if not elems:
        raise ValueError("E must be nonempty")
    return elems, ("prefix realization" if infinite else "exact")


def realize_finite(E: MSet | Iterable[int], *, slot_bound: Optional[int] = None,
                   prime_cap: Optional[int] = None, truncate: Optional[int] = None,
                   verify: bool = True) -> Realization:
    """Build (G, v, H) with L(G, v, H) = E by the block construction.

    G = B_1 + B_2^(p_1) + B_3^(p_1 p_2) + ...; H keeps the first slot of
    every block; on block i the automorphism shifts the slots cyclically and
    multiplies the slot entering position 0 by u_i.
    """
    ps, note = _truncate(E, truncate)
    bound = slot_bound or int(os.environ.get("SML_SLOT_BOUND", DEFAULT_SLOT_BOUND))
    need = prod(ps)
    if need > bound:
        raise RealizationRefused(f"product of E is {need}, above the slot bound {bound}", need)
    summands: list[int] = []
    perm: list[int] = []
    units: list[int] = []
    blocks = []
    support = []
    width = 1
    for i, p in enumerate(ps):
        q, u = block_for_length(p, prime_cap)
        base = len(summands)
        slots = tuple(range(base, base + width))
        for t in range(width):
            summands.append(q)
            nxt = (t + 1) % width
            perm.append(base + nxt)
            units.append(u if nxt == 0 else 1)
        blocks.append((f"B{i + 1}", slots))
        support.append(base)
        width *= p
    G = FinAbGroup(tuple(summands), tuple(blocks))
    v = MonomialAut(G, tuple(perm), tuple(units))
    H = SupportSubgroup(G, frozenset(support))
    if verify:
        got = multiplicity_set_L(G, v, H)
        if got.as_set() != set(ps):
            raise AssertionError(f"block construction produced {got}, expected {ps}")
    return Realization(G, v, H, note)


def realize_lcm_closed(E: MSet | Iterable[int], *, prime_cap: Optional[int] = None,
                       verify: bool = True) -> Realization:
    """A group with L(G, v) = E for lcm-closed E: one cyclic block per element.

    Elements mixing several blocks have orbit length the lcm of the block
    lengths, which stays in E by closure.
    """
    ps, note = _truncate(E, None)
    if not lcm_closed(ps):
        raise ValueError("E is not lcm-closed, and every L(G, v) is (lcm of orbit lengths is an orbit length)")
    qs, us = zip(*(block_for_length(p, prime_cap) for p in ps))
    G = FinAbGroup(tuple(qs), tuple((f"B{i + 1}", (i,)) for i in range(len(ps))))
    v = MonomialAut.diagonal(G, us)
    H = SupportSubgroup.full(G)
    if verify:
        got = multiplicity_set_L(G, v, H)
        if got.as_set() != set(ps):
            raise AssertionError(f"direct sum produced {got}, expected {ps}")
    return Realization(G, v, H, note)


# ---------------------------------------------------------------- characters

def character_phase(G: FinAbGroup, chi: Sequence[int], k: Sequence[int]) -> Fraction:
    """t in [0,1) with chi(k) = exp(2 pi i t)."""
    return sum((Fraction(a * b, q) for a, b, q in zip(chi, k, G.summands)), Fraction(0)) % 1


def character_value(G: FinAbGroup, chi: Sequence[int], k: Sequence[int]) -> complex:
    t = character_phase(G, chi, k)
    return cmath.exp(2j * cmath.pi * float(t))


def character_exponent_index(G: FinAbGroup, chi: Sequence[int], k: Sequence[int]) -> int:
    """j with chi(k) = zeta_e^j, e the exponent of G."""
    e = G.exponent
    return sum(a * b * (e // q) for a, b, q in zip(chi, k, G.summands)) % e


def dual_orbit(v: MonomialAut, chi: Sequence[int]) -> list[Element]:
    return orbit(v.dual(), chi)


def orbit_average_exact(v: MonomialAut, chi: Sequence[int], k: Sequence[int]) -> Cyclo:
    """l_chi(k) as an element of Q(zeta_e)."""
    G = v.group
    orb = dual_orbit(v, chi)
    e = G.exponent
    weights: dict[int, Fraction] = {}
    for eta in orb:
        j = character_exponent_index(G, eta, k)
        weights[j] = weights.get(j, Fraction(0)) + Fraction(1, len(orb))
    return Cyclo.from_powers(e, weights)


def orbit_average_l(v: MonomialAut, chi: Sequence[int], k: Sequence[int]) -> complex:
    """(1/#O(chi)) * sum over the dual orbit of eta(k)."""
    val = complex(orbit_average_exact(v, chi, k))
    return complex(round(val.real, 15), round(val.imag, 15))


def distinguishing_point(v: MonomialAut, chi: Sequence[int], chi2: Sequence[int]) -> Optional[Element]:
    """Some k with l_chi(k) != l_chi2(k), or None when the dual orbits coincide."""
    G = v.group
    if tuple(chi2) in set(dual_orbit(v, chi)):
        return None
    for k in G.elements():
        if orbit_average_exact(v, chi, k) != orbit_average_exact(v, chi2, k):
            return k
    return None


# --------------------------------------------------------------- metabelian

@dataclass(frozen=True)
class MetabelianGroup:
    """Z = D x| K with D cyclic of order d_order acting through powers of ``action``."""

    d_order: int
    action: MonomialAut

    def __post_init__(self) -> None:
        if self.d_order < 1:
            raise StructureError("d_order must be positive")
        if not self.action.power(self.d_order).is_identity():
            raise StructureError("action^d_order is not the identity")

    @property
    def fiber(self) -> FinAbGroup:
        return self.action.group

    @classmethod
    def generated_by(cls, action: MonomialAut) -> "MetabelianGroup":
        """D taken as the cyclic group <v> itself."""
        return cls(action.order(), action)

    @property
    def order(self) -> int:
        return self.d_order * self.fiber.order

    def act(self, d: int, k: Sequence[int]) -> Element:
        return apply_aut(self.action.power(d % self.d_order), k)

    def identity(self) -> tuple[int, Element]:
        return 0, self.fiber.zero()

    def mul(self, a, b):
        return metab_mul(a, b, self)

    def inverse(self, a):
        d, k = a
        return (-d) % self.d_order, self.act(-d, self.fiber.neg(k))

    def to_json(self) -> dict:
        rec = serialize(self.fiber, self.action)
        rec["d_order"] = self.d_order
        return rec


def metab_mul(a, b, Z: MetabelianGroup):
    """(d, k)(d', k') = (d + d', k + d.k')."""
    d, k = a
    d2, k2 = b
    return (d + d2) % Z.d_order, Z.fiber.add(k, Z.act(d, k2))
