"""Independent reference computations shared by the tests.

Deliberately naive: plain Python lists and integers, no numpy, none of the
package's internal helpers beyond reading construction parameters.
"""
from __future__ import annotations

import cmath
import itertools
from fractions import Fraction
from math import gcd


def orbit_sizes_in_support(summands, perm, units, support):
    """{#(orbit(h) n H)} over nonzero h in H, H spanned by the support slots."""
    q = list(summands)
    n = len(q)

    def step(g):
        out = [0] * n
        for j, x in enumerate(g):
            out[perm[j]] = units[j] * x % q[perm[j]]
        return tuple(out)

    sizes = set()
    zero = (0,) * n
    ranges = [range(q[j]) if j in support else range(1) for j in range(n)]
    for h in itertools.product(*ranges):
        if h == zero:
            continue
        count, x = 0, h
        while True:
            if all(x[j] == 0 for j in range(n) if j not in support):
                count += 1
            x = step(x)
            if x == h:
                break
        sizes.add(count)
    return sizes


def tower_word(con, n0, N):
    """Levels of tower N as stage-n0 level indices, -1 for later spacers."""
    col = list(range(con.height(n0)))
    for k in range(n0, N):
        sp = con.params(k)
        new = []
        for j in range(sp.r):
            new.extend(col)
            new.extend([-1] * sp.s[j])
        col = new
    return col


def tower_cocycle(c, N):
    """beta on tower N by beta_(n+1)(j h_n + s + i) = beta_n(i) a_n(j), spacers at the identity."""
    Z = c.Z
    e = Z.identity()
    beta = [e]
    for k in range(1, N):
        sp = c.construction.params(k)
        a = c.stage_labels(k)
        new = []
        for j in range(sp.r):
            new.extend(Z.mul(b, a[j]) for b in beta)
            new.extend([e] * sp.s[j])
        beta = new
    return beta


def twisted_direct(c, chi, A_levels, B_levels, n0, m, N, d1=0, d2=0):
    """sum over determined pairs of chi(d1 . phi) [d1 + psi = d2] w_N / |D|, plus the radius."""
    from sml.algebra import character_value
    Z = c.Z
    word = tower_word(c.construction, n0, N)
    beta = tower_cocycle(c, N)
    h = len(word)
    a, b = set(A_levels), set(B_levels)
    total = 0j
    for i in range(h - m):
        if word[i] in a and word[i + m] in b:
            dz, kz = Z.mul(beta[i], Z.inverse(beta[i + m]))
            if (d1 + dz) % Z.d_order == d2 % Z.d_order:
                total += character_value(Z.fiber, chi, Z.act(d1, kz))
    und = sum(1 for i in range(h - m, h) if word[i] in a)
    w = c.construction.width(N) / Z.d_order
    return total * float(w), und * w


def correlation_bounds(con, A_stage, A_levels, B_levels, m, N):
    """(lo, hi) for mu(T^m A n B) from tower N by direct point counting."""
    word = tower_word(con, A_stage, N)
    h = len(word)
    a, b = set(A_levels), set(B_levels)
    det = sum(1 for i in range(h - m) if word[i] in a and word[i + m] in b)
    und = sum(1 for i in range(h - m, h) if word[i] in a)
    w = con.width(N)
    return det * w, (det + und) * w


def level_measure(con, stage, levels):
    return len(set(levels)) * con.width(stage)


def root_of_unity(k, e):
    return cmath.exp(2j * cmath.pi * k / e)


def orbit_average(q, mult, chi, k):
    """Average of chi(mult^i k) over the multiplier orbit on Z/q (rank one)."""
    vals, x = [], chi
    while True:
        vals.append(root_of_unity(x * k, q))
        x = x * mult % q
        if x == chi % q:
            break
    return sum(vals) / len(vals)


def perms(n):
    return list(itertools.permutations(range(n)))


def compose(p, q):
    """(p o q)(i) = p[q[i]]."""
    return tuple(p[i] for i in q)


def generate(n, gens):
    ident = tuple(range(n))
    seen = {ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens:
                y = compose(g, x)
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    return seen


def double_cosets_bruteforce(G, n, k):
    """#(G \\ S_n / S_k), S_k the permutations fixing every point >= k."""
    Sk = [p + tuple(range(k, n)) for p in itertools.permutations(range(k))]
    left = set()
    classes = 0
    for x in perms(n):
        if x in left:
            continue
        classes += 1
        for g in G:
            for s in Sk:
                left.add(compose(compose(g, x), s))
    return classes


def fraction_close(a, b, tol):
    return abs(Fraction(a) - Fraction(b)) <= Fraction(tol)


def units_mod(q):
    return [u for u in range(1, q) if gcd(u, q) == 1]
