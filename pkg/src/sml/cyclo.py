"""Exact arithmetic in cyclotomic fields Q(zeta_N), canonical power basis."""
from __future__ import annotations

import cmath
from fractions import Fraction
from functools import lru_cache
from math import gcd
from typing import Mapping, Union

Number = Union[int, Fraction]


def _polydiv_exact(num: list[int], den: list[int]) -> list[int]:
    # division of integer polynomials (low degree first), den monic
    num = list(num)
    out = [0] * (len(num) - len(den) + 1)
    for i in range(len(out) - 1, -1, -1):
        c = num[i + len(den) - 1]
        out[i] = c
        if c:
            for j, d in enumerate(den):
                num[i + j] -= c * d
    if any(num[: len(den) - 1]):
        raise ArithmeticError("inexact polynomial division")
    return out


@lru_cache(maxsize=None)
def cyclotomic_poly(n: int) -> tuple[int, ...]:
    """Integer coefficients of the n-th cyclotomic polynomial, constant term first."""
    if n < 1:
        raise ValueError("n must be positive")
    poly = [-1] + [0] * (n - 1) + [1]
    for d in range(1, n):
        if n % d == 0:
            poly = _polydiv_exact(poly, list(cyclotomic_poly(d)))
    return tuple(poly)


class Cyclo:
    """An element of Q(zeta_N) stored in the basis 1, zeta, ..., zeta^(phi(N)-1)."""

    __slots__ = ("n", "coeffs")

    def __init__(self, n: int, coeffs=()):
        self.n = n
        self.coeffs = self._reduce(n, [Fraction(c) for c in coeffs])

    @staticmethod
    def _reduce(n: int, c: list[Fraction]) -> tuple[Fraction, ...]:
        phi = cyclotomic_poly(n)
        deg = len(phi) - 1
        c = c + [Fraction(0)] * max(0, deg - len(c))
        for i in range(len(c) - 1, deg - 1, -1):
            t = c[i]
            if t:
                for j, p in enumerate(phi):
                    c[i - deg + j] -= t * p
        return tuple(c[:deg])

    @classmethod
    def from_powers(cls, n: int, weights: Mapping[int, Number]) -> "Cyclo":
        """Sum of weights[j] * zeta_N^j."""
        c = [Fraction(0)] * n
        for j, w in weights.items():
            c[j % n] += Fraction(w)
        return cls(n, c)

    @classmethod
    def root(cls, n: int, j: int = 1) -> "Cyclo":
        return cls.from_powers(n, {j: 1})

    def _lift(self, m: int) -> "Cyclo":
        if m == self.n:
            return self
        step = m // self.n
        return Cyclo.from_powers(m, {j * step: c for j, c in enumerate(self.coeffs) if c})

    def _common(self, other: "Cyclo") -> tuple["Cyclo", "Cyclo"]:
        m = self.n * other.n // gcd(self.n, other.n)
        return self._lift(m), other._lift(m)

    def __add__(self, other):
        if not isinstance(other, Cyclo):
            other = Cyclo(self.n, [other])
        a, b = self._common(other)
        return Cyclo(a.n, [x + y for x, y in zip(a.coeffs, b.coeffs)])

    __radd__ = __add__

    def __neg__(self):
        return Cyclo(self.n, [-x for x in self.coeffs])

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Cyclo):
            f = Fraction(other)
            return Cyclo(self.n, [f * x for x in self.coeffs])
        a, b = self._common(other)
        prod = [Fraction(0)] * (len(a.coeffs) + len(b.coeffs))
        for i, x in enumerate(a.coeffs):
            if x:
                for j, y in enumerate(b.coeffs):
                    prod[i + j] += x * y
        return Cyclo(a.n, prod)

    __rmul__ = __mul__

    def conjugate(self) -> "Cyclo":
        return Cyclo.from_powers(self.n, {-j: c for j, c in enumerate(self.coeffs) if c})

    def __eq__(self, other) -> bool:
        if not isinstance(other, Cyclo):
            other = Cyclo(self.n, [other])
        a, b = self._common(other)
        return a.coeffs == b.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def rational(self) -> Fraction | None:
        """The value as a rational when it lies in Q, else None."""
        if any(self.coeffs[1:]):
            return None
        return self.coeffs[0] if self.coeffs else Fraction(0)

    def __complex__(self) -> complex:
        z = cmath.exp(2j * cmath.pi / self.n)
        return complex(sum(float(c) * z**j for j, c in enumerate(self.coeffs)))

    def __abs__(self) -> float:
        return abs(complex(self))

    def __repr__(self) -> str:
        terms = [f"{c}*z{self.n}^{j}" for j, c in enumerate(self.coeffs) if c]
        return "Cyclo(" + (" + ".join(terms) if terms else "0") + ")"
