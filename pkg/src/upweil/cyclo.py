"""Exact arithmetic in Z[zeta_N][1/p].

Values are integer coefficient vectors modulo the N-th cyclotomic polynomial,
scaled by an explicit power of p (and optionally a half power of p, used for
the metaplectic normalizations).  Equality decisions are always made on the
canonical exact form; floating point enters only in the sanity cross-check
``to_complex``.
"""

from __future__ import annotations

import cmath
from functools import lru_cache
from math import gcd


@lru_cache(maxsize=None)
def cyclotomic_poly(n: int) -> tuple:
    """Coefficients (low degree first) of the n-th cyclotomic polynomial,
    computed by exact division of x^n - 1 by the lower Phi_d."""
    if n == 1:
        return (-1, 1)
    poly = [-1] + [0] * (n - 1) + [1]  # x^n - 1
    for d in range(1, n):
        if n % d == 0:
            poly = _polydiv_exact(poly, list(cyclotomic_poly(d)))
    return tuple(poly)


def _polydiv_exact(num: list, den: list) -> list:
    num = num[:]
    out = [0] * (len(num) - len(den) + 1)
    for i in range(len(out) - 1, -1, -1):
        c = num[i + len(den) - 1]
        assert c % den[-1] == 0
        q = c // den[-1]
        out[i] = q
        for j, dj in enumerate(den):
            num[i + j] -= q * dj
    assert all(c == 0 for c in num), "non-exact cyclotomic division"
    return out


class CycloRing:
    """Z[zeta_n] with basis 1, z, ..., z^(deg-1), deg = phi(n)."""

    def __init__(self, order: int, p: int):
        if order < 1:
            raise ValueError("order must be positive")
        self.order = order
        self.p = p
        phi = cyclotomic_poly(order)
        self.deg = len(phi) - 1
        self._phi = phi
        # reduction table: z^k for k in [deg, 2*deg-2] (phi is monic)
        self._powers = []
        cur = [-c for c in phi[:-1]]
        self._powers.append(tuple(cur))
        for _ in range(self.deg - 2):
            cur = self._shift_reduce(cur, phi)
            self._powers.append(tuple(cur))
        # z^k for any k mod order, as basis vectors
        self._zpow_cache: dict[int, tuple] = {}

    def _shift_reduce(self, vec: list, phi: tuple) -> list:
        out = [0] + list(vec[:-1])
        top = vec[-1]
        if top:
            for i in range(self.deg):
                out[i] -= top * phi[i]
        return out

    def reduce_poly(self, coeffs: list) -> tuple:
        """Reduce an arbitrary-degree integer polynomial in z."""
        out = list(coeffs[: self.deg]) + [0] * max(0, self.deg - len(coeffs))
        for k in range(self.deg, len(coeffs)):
            c = coeffs[k]
            if not c:
                continue
            if k - self.deg < len(self._powers):
                pw = self._powers[k - self.deg]
            else:
                pw = self.zpow(k % self.order)
            for i, w in enumerate(pw):
                out[i] += c * w
        return tuple(out)

    def zpow(self, k: int) -> tuple:
        """Basis vector of z^k (k taken mod order)."""
        k %= self.order
        if not self._zpow_cache:
            cur = [0] * self.deg
            cur[0] = 1
            for i in range(self.order):
                self._zpow_cache[i] = tuple(cur)
                cur = self._shift_reduce(cur, self._phi)
        return self._zpow_cache[k]

    def zero(self) -> "CycloValue":
        return CycloValue(self, (0,) * self.deg, 0)

    def one(self) -> "CycloValue":
        return CycloValue(self, self.zpow(0), 0)

    def integer(self, a: int) -> "CycloValue":
        return CycloValue(self, tuple(a * c for c in self.zpow(0)), 0)

    def root(self, order: int, k: int) -> "CycloValue":
        """zeta_order^k as an element; order must divide the ring order."""
        if self.order % order:
            raise ValueError(f"root of order {order} not in Z[zeta_{self.order}]")
        return CycloValue(self, self.zpow((k % order) * (self.order // order)), 0)

    def __repr__(self):
        return f"CycloRing(zeta_{self.order}, p={self.p})"


def ring_for(p: int, *orders: int) -> CycloRing:
    """The smallest Z[zeta_N] containing all requested root orders."""
    n = 1
    for o in orders:
        n = n * o // gcd(n, o)
    return CycloRing(n, p)


class CycloValue:
    """p^pexp * (sqrt(p))^half * (integer cyclotomic element).

    ``half`` is 0 or 1; values with different half flags do not mix under
    addition and compare unequal.  The canonical form extracts the full
    p-content of the coefficient vector into pexp.
    """

    __slots__ = ("ring", "coeffs", "pexp", "half")

    def __init__(self, ring: CycloRing, coeffs: tuple, pexp: int = 0, half: int = 0):
        self.ring = ring
        if half not in (0, 1):
            pexp += half // 2
            half %= 2
        # canonical: strip p-content
        if any(coeffs):
            p = ring.p
            while all(c % p == 0 for c in coeffs):
                coeffs = tuple(c // p for c in coeffs)
                pexp += 1
        else:
            coeffs = (0,) * ring.deg
            pexp = 0
            half = 0
        self.coeffs = coeffs
        self.pexp = pexp
        self.half = half

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def __add__(self, other: "CycloValue") -> "CycloValue":
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        if self.half != other.half:
            raise ValueError("cannot add values with mismatched half-power flags")
        assert self.ring is other.ring
        e = min(self.pexp, other.pexp)
        f1 = self.ring.p ** (self.pexp - e)
        f2 = self.ring.p ** (other.pexp - e)
        return CycloValue(self.ring,
                          tuple(f1 * a + f2 * b for a, b in zip(self.coeffs, other.coeffs)),
                          e, self.half)

    def __neg__(self) -> "CycloValue":
        return CycloValue(self.ring, tuple(-c for c in self.coeffs), self.pexp, self.half)

    def __sub__(self, other: "CycloValue") -> "CycloValue":
        return self + (-other)

    def __mul__(self, other) -> "CycloValue":
        if isinstance(other, int):
            return CycloValue(self.ring, tuple(other * c for c in self.coeffs),
                              self.pexp, self.half)
        assert self.ring is other.ring
        if self.is_zero() or other.is_zero():
            return self.ring.zero()
        n = self.ring.deg
        prod = [0] * (2 * n - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    if b:
                        prod[i + j] += a * b
        return CycloValue(self.ring, self.ring.reduce_poly(prod),
                          self.pexp + other.pexp, self.half + other.half)

    __rmul__ = __mul__

    def scale_p(self, k: int) -> "CycloValue":
        return CycloValue(self.ring, self.coeffs, self.pexp + k, self.half)

    def scale_half(self, h: int) -> "CycloValue":
        return CycloValue(self.ring, self.coeffs, self.pexp, self.half + h)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CycloValue):
            return NotImplemented
        return (self.coeffs == other.coeffs and self.pexp == other.pexp
                and self.half == other.half)

    def __hash__(self):
        return hash((self.coeffs, self.pexp, self.half))

    def to_complex(self) -> complex:
        z = cmath.exp(2j * cmath.pi / self.ring.order)
        acc = 0j
        zz = 1 + 0j
        for c in self.coeffs:
            acc += c * zz
            zz *= z
        return acc * self.ring.p ** self.pexp * self.ring.p ** (0.5 * self.half)

    def key(self) -> tuple:
        return (self.coeffs, self.pexp, self.half)

    def jsonable(self) -> dict:
        d = {"coeffs": list(self.coeffs), "pexp": self.pexp}
        if self.half:
            d["half"] = self.half
        return d

    def __repr__(self):
        if self.is_zero():
            return "Cyclo(0)"
        s = f"Cyclo({list(self.coeffs)}"
        if self.pexp:
            s += f" * p^{self.pexp}"
        if self.half:
            s += " * sqrt(p)"
        return s + f" @ zeta_{self.ring.order})"
