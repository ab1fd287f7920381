"""Truncated p-adic etale algebras and scaled residues.

The coefficient algebra O is one of three shapes over Z_p (p odd):

  * ``field``  -- O = Z_p itself,
  * ``split``  -- O = Z_p + Z_p with coordinate-swap conjugation,
  * ``unram2`` -- O = Z_p[y]/(y^2 - c) for a fixed non-residue c,
                  with conjugation y -> -y.

Everything is computed at a fixed working precision N: an element of O is a
tuple of integer coordinates known modulo p^N.  A ScaledResidue is such a
tuple together with a denominator exponent e, denoting p^(-e) * coords.
Equality is decided at the common effective precision, never by rounding.
"""

from __future__ import annotations

import math
from typing import Iterator

INF = math.inf

_EXTS = ("field", "split", "unram2")


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def _smallest_nonresidue(p: int) -> int:
    for c in range(2, p):
        if pow(c, (p - 1) // 2, p) == p - 1:
            return c
    raise ValueError(f"no quadratic non-residue mod {p}")


def _int_val(a: int, p: int, cap: int) -> int | float:
    """p-adic valuation of the integer a, INF if a == 0 (capped at cap)."""
    if a == 0:
        return INF
    v = 0
    while a % p == 0 and v < cap:
        a //= p
        v += 1
    return v


class RingCtx:
    """Immutable context for O/p^N arithmetic plus unit-group dlog tables.

    Construction builds, for each level 1..N, a generating set of
    (O/p^level)^x together with a full discrete-log dictionary.  The tables
    are small at desk scale and make character evaluation a lookup.
    """

    def __init__(self, p: int, ext: str, N: int, root_window: int | None = None):
        if not _is_prime(p) or p < 3:
            raise ValueError(f"p must be an odd prime, got {p}")
        if ext not in _EXTS:
            raise ValueError(f"ext must be one of {_EXTS}, got {ext!r}")
        if N < 1:
            raise ValueError(f"precision N must be >= 1, got {N}")
        self.p = p
        self.ext = ext
        self.N = N
        self.root_window = N if root_window is None else root_window
        self.ncoords = 1 if ext == "field" else 2
        self.nonresidue = _smallest_nonresidue(p) if ext == "unram2" else None
        # residue size of O/pO
        self.q = p if ext == "field" else p * p
        self._pk = [p ** k for k in range(N + 1)]
        self._dlog: dict[int, dict] = {}
        self._gens: dict[int, tuple] = {}
        for level in range(1, N + 1):
            self._build_unit_tables(level)

    # --- coordinate kernel -------------------------------------------------

    def pk(self, k: int) -> int:
        return self.p ** k if k > self.N else self._pk[k]

    def czero(self) -> tuple:
        return (0,) * self.ncoords if self.ncoords > 1 else (0,)

    def cone(self) -> tuple:
        return (1, 0) if self.ext == "unram2" else ((1, 1) if self.ext == "split" else (1,))

    def cfrom_int(self, a: int, level: int) -> tuple:
        m = self.pk(level)
        a %= m
        if self.ext == "field":
            return (a,)
        if self.ext == "split":
            return (a, a)
        return (a, 0)

    def cadd(self, x: tuple, y: tuple, level: int) -> tuple:
        m = self.pk(level)
        return tuple((a + b) % m for a, b in zip(x, y))

    def csub(self, x: tuple, y: tuple, level: int) -> tuple:
        m = self.pk(level)
        return tuple((a - b) % m for a, b in zip(x, y))

    def cneg(self, x: tuple, level: int) -> tuple:
        m = self.pk(level)
        return tuple((-a) % m for a in x)

    def cmul(self, x: tuple, y: tuple, level: int) -> tuple:
        m = self.pk(level)
        if self.ext == "field":
            return ((x[0] * y[0]) % m,)
        if self.ext == "split":
            return ((x[0] * y[0]) % m, (x[1] * y[1]) % m)
        a, b = x
        c, d = y
        return ((a * c + b * d * self.nonresidue) % m, (a * d + b * c) % m)

    def cbar(self, x: tuple, level: int) -> tuple:
        m = self.pk(level)
        if self.ext == "field":
            return x
        if self.ext == "split":
            return (x[1], x[0])
        return (x[0], (-x[1]) % m)

    def cvals(self, x: tuple, level: int) -> tuple:
        """Coordinate-wise valuations; for unram2 the valuation of a+by is
        min(v(a), v(b)) since the extension is unramified."""
        if self.ext == "unram2":
            v = min(_int_val(x[0], self.p, level), _int_val(x[1], self.p, level))
            return (v,)
        return tuple(_int_val(a, self.p, level) for a in x)

    def cis_unit(self, x: tuple, level: int) -> bool:
        return all(v == 0 for v in self.cvals(x, level))

    def cinv(self, x: tuple, level: int) -> tuple:
        """Inverse of a unit in O/p^level."""
        m = self.pk(level)
        if not self.cis_unit(x, level):
            raise ZeroDivisionError("inverse of a non-unit residue")
        if self.ext == "field":
            return (pow(x[0], -1, m),)
        if self.ext == "split":
            return (pow(x[0], -1, m), pow(x[1], -1, m))
        # (a+by)^-1 = (a-by)/(a^2 - c b^2)
        a, b = x
        nrm = (a * a - self.nonresidue * b * b) % m
        ninv = pow(nrm, -1, m)
        return ((a * ninv) % m, ((-b) * ninv) % m)

    def creduce(self, x: tuple, level: int) -> tuple:
        m = self.pk(level)
        return tuple(a % m for a in x)

    # --- unit-group tables ---------------------------------------------------

    def _field_units(self, level: int) -> Iterator[int]:
        m = self.pk(level)
        for a in range(1, m):
            if a % self.p:
                yield a

    def _build_unit_tables(self, level: int) -> None:
        p, m = self.p, self.pk(level)
        if self.ext in ("field", "split"):
            # (Z/p^level)^x is cyclic for odd p; find one generator.
            order = (p - 1) * p ** (level - 1)
            gen = None
            for g in range(2, m):
                if g % p == 0:
                    continue
                ok = True
                for ell in {f for f in _prime_factors(order)}:
                    if pow(g, order // ell, m) == 1:
                        ok = False
                        break
                if ok:
                    gen = g
                    break
            assert gen is not None
            table = {}
            x = 1
            for k in range(order):
                table[x] = k
                x = (x * gen) % m
            self._gens[level] = (gen,)
            self._dlog[level] = table
        else:
            # (O/p^level)^x = <T> x (1 + pO)/(1 + p^level O); generators
            # T (order q-1), 1+p, 1+py (each of order p^(level-1)).
            q1 = p * p - 1
            wild = p ** (level - 1)
            tgen = self._unram_teichmuller_gen(level)
            g1 = self.cfrom_int(1 + p, level) if level > 1 else self.cone()
            g2 = (1 % m, p % m) if level > 1 else self.cone()
            table = {}
            x0 = self.cone()
            for i in range(q1):
                x1 = x0
                for j in range(wild):
                    x2 = x1
                    for k in range(wild):
                        table[x2] = (i, j, k)
                        x2 = self.cmul(x2, g2, level)
                    x1 = self.cmul(x1, g1, level)
                x0 = self.cmul(x0, tgen, level)
            self._gens[level] = (tgen, g1, g2)
            self._dlog[level] = table

    def _unram_teichmuller_gen(self, level: int) -> tuple:
        """An element of order q - 1 = p^2 - 1 in (O/p^level)^x."""
        p = self.p
        q1 = p * p - 1
        wild = p ** (level - 1)
        for a in range(p):
            for b in range(p):
                x = (a, b)
                if not self.cis_unit(x, level):
                    continue
                # candidate must have full tame order in the residue field
                if self._mult_order_residue(x) == q1:
                    # kill the wild part: x^(p^(level-1) * ...) adjusts; simply
                    # raise to wild power repeatedly to project onto tame part
                    y = self.cpow(x, wild, level)
                    # y has order dividing q1 and reduces to a generator
                    if self._cpow_order(y, level) == q1:
                        return y
        raise AssertionError("no Teichmueller generator found")

    def _mult_order_residue(self, x: tuple) -> int:
        one = self.cone()
        y = self.creduce(x, 1)
        k = 1
        while self.creduce(y, 1) != self.creduce(one, 1):
            y = self.cmul(y, x, 1)
            k += 1
            if k > self.p * self.p:
                return 0
        return k

    def _cpow_order(self, x: tuple, level: int) -> int:
        one = self.creduce(self.cone(), level)
        y = self.creduce(x, level)
        k = 1
        while y != one:
            y = self.cmul(y, x, level)
            k += 1
        return k

    def cpow(self, x: tuple, n: int, level: int) -> tuple:
        r = self.cone()
        b = self.creduce(x, level)
        while n > 0:
            if n & 1:
                r = self.cmul(r, b, level)
            b = self.cmul(b, b, level)
            n >>= 1
        return self.creduce(r, level)

    def unit_dlog(self, x: tuple, level: int):
        """Discrete log of a unit at the given level.

        field/split: int exponent per coordinate w.r.t. the cyclic generator;
        unram2: triple (tame, wild1, wild2)."""
        x = self.creduce(x, level)
        if self.ext == "field":
            return (self._dlog[level][x[0]],)
        if self.ext == "split":
            return (self._dlog[level][x[0]], self._dlog[level][x[1]])
        return self._dlog[level][x]

    def units(self, level: int) -> Iterator[tuple]:
        if self.ext == "field":
            for a in self._field_units(level):
                yield (a,)
        elif self.ext == "split":
            for a in self._field_units(level):
                for b in self._field_units(level):
                    yield (a, b)
        else:
            for x in self._dlog[level]:
                yield x

    def unit_group_order(self, level: int) -> int:
        p = self.p
        if self.ext == "field":
            return (p - 1) * p ** (level - 1)
        if self.ext == "split":
            return ((p - 1) * p ** (level - 1)) ** 2
        return (p * p - 1) * p ** (2 * (level - 1))

    def generators(self, level: int) -> tuple:
        return self._gens[level]

    def __repr__(self) -> str:
        return f"RingCtx(p={self.p}, ext={self.ext!r}, N={self.N})"

    # migration helper for JSON descriptors
    def descriptor(self) -> dict:
        return {"p": self.p, "ext": self.ext, "precision": self.N,
                "window": self.root_window}


def _prime_factors(n: int) -> Iterator[int]:
    d = 2
    while d * d <= n:
        if n % d == 0:
            yield d
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        yield n


def make_ring(p: int, ext: str, N: int, root_window: int | None = None) -> RingCtx:
    """Build a ring context; raises ValueError on composite p or N < 1."""
    return RingCtx(p, ext, N, root_window)


def ring_from_descriptor(desc: dict) -> RingCtx:
    return make_ring(int(desc["p"]), str(desc["ext"]), int(desc["precision"]),
                     int(desc.get("window", desc["precision"])))


class ScaledResidue:
    """p^(-e) * num with num in O/p^prec.

    Canonical form: num is a unit in at least one coordinate, or e = 0
    (zero is (0, 0)).  The element's value is known modulo p^(prec - e).
    """

    __slots__ = ("ctx", "coords", "e", "prec")

    def __init__(self, ctx: RingCtx, coords: tuple, e: int = 0,
                 prec: int | None = None, _canonical: bool = False):
        self.ctx = ctx
        self.prec = ctx.N if prec is None else prec
        if self.prec < 1:
            raise PrecisionError("effective precision exhausted")
        coords = ctx.creduce(coords, self.prec)
        if not _canonical:
            coords, e, self.prec = self._canonicalize(ctx, coords, e, self.prec)
        self.coords = coords
        self.e = e

    @staticmethod
    def _canonicalize(ctx, coords, e, prec):
        if all(a == 0 for a in coords):
            # zero-at-precision: the value is only O(p^(prec-e))
            if e > 0:
                prec -= e
                if prec < 1:
                    raise PrecisionError("zero residue with no remaining precision")
            return ctx.czero(), 0, prec
        if e <= 0:
            # fold non-negative powers of p into the coordinates
            if e < 0:
                m = ctx.pk(prec)
                f = pow(ctx.p, -e)
                coords = tuple((a * f) % m for a in coords)
                e = 0
            return coords, e, prec
        vmin = min(ctx.cvals(coords, prec))
        k = int(min(e, vmin if vmin is not INF else e))
        if k > 0:
            f = ctx.p ** k
            m = ctx.pk(prec - k)
            coords = tuple((a // f) % m for a in coords)
            e -= k
            prec -= k
            if prec < 1:
                raise PrecisionError("canonicalization exhausted precision")
        return coords, e, prec

    # --- constructors ------------------------------------------------------

    @classmethod
    def from_int(cls, ctx: RingCtx, a: int, e: int = 0) -> "ScaledResidue":
        return cls(ctx, ctx.cfrom_int(a, ctx.N), e)

    @classmethod
    def zero(cls, ctx: RingCtx) -> "ScaledResidue":
        return cls(ctx, ctx.czero(), 0, ctx.N, _canonical=True)

    @classmethod
    def one(cls, ctx: RingCtx) -> "ScaledResidue":
        return cls(ctx, ctx.cone(), 0, ctx.N, _canonical=True)

    @classmethod
    def from_pair(cls, ctx: RingCtx, a: int, b: int, e: int = 0) -> "ScaledResidue":
        if ctx.ncoords != 2:
            raise ValueError("pair constructor needs a split/unram2 context")
        m = ctx.pk(ctx.N)
        return cls(ctx, (a % m, b % m), e)

    # --- basic queries -------------------------------------------------------

    def is_zero(self) -> bool:
        return all(a == 0 for a in self.coords)

    def known_mod(self) -> int:
        """The element is determined modulo p^known_mod()."""
        return self.prec - self.e

    def coord_valuations(self) -> tuple:
        """Exact coordinate valuations, shifted by the denominator; INF marks
        'zero at this precision', i.e. valuation >= prec - e."""
        vs = self.ctx.cvals(self.coords, self.prec)
        return tuple(v - self.e if v is not INF else INF for v in vs)

    def valuation(self):
        """min coordinate valuation; INF means >= prec - e (interval
        semantics at truncation)."""
        return min(self.coord_valuations())

    def val_lower(self) -> int:
        v = self.valuation()
        return self.prec - self.e if v is INF else int(v)

    def is_unit(self) -> bool:
        return all(v == 0 for v in self.coord_valuations())

    def is_integral(self) -> bool:
        """True iff every coordinate has valuation >= 0 as far as the
        precision can tell; raises if the question is undecidable."""
        for v in self.coord_valuations():
            if v is INF:
                if self.prec - self.e < 0:
                    raise PrecisionError("integrality undecidable at this precision")
            elif v < 0:
                return False
        return True

    # --- arithmetic ----------------------------------------------------------

    def _align(self, other: "ScaledResidue"):
        e = max(self.e, other.e)
        p = self.ctx.p
        k1 = min(self.prec + e - self.e, other.prec + e - other.e)
        f1 = p ** (e - self.e)
        f2 = p ** (e - other.e)
        m = self.ctx.pk(k1)
        c1 = tuple((a * f1) % m for a in self.coords)
        c2 = tuple((a * f2) % m for a in other.coords)
        return c1, c2, e, k1

    def __add__(self, other: "ScaledResidue") -> "ScaledResidue":
        c1, c2, e, k = self._align(other)
        return ScaledResidue(self.ctx, self.ctx.cadd(c1, c2, k), e, k)

    def __sub__(self, other: "ScaledResidue") -> "ScaledResidue":
        c1, c2, e, k = self._align(other)
        return ScaledResidue(self.ctx, self.ctx.csub(c1, c2, k), e, k)

    def __neg__(self) -> "ScaledResidue":
        return ScaledResidue(self.ctx, self.ctx.cneg(self.coords, self.prec),
                             self.e, self.prec, _canonical=True)

    def __mul__(self, other: "ScaledResidue") -> "ScaledResidue":
        ctx = self.ctx
        v1 = self.ctx.cvals(self.coords, self.prec)
        v2 = self.ctx.cvals(other.coords, other.prec)
        m1 = min(v1)
        m2 = min(v2)
        m1 = self.prec if m1 is INF else int(m1)
        m2 = other.prec if m2 is INF else int(m2)
        k = min(self.prec + m2, other.prec + m1, self.prec + other.prec)
        k = min(k, ctx.N)
        if k < 1:
            raise PrecisionError("product lost all precision")
        c = ctx.cmul(ctx.creduce(self.coords, k), ctx.creduce(other.coords, k), k)
        return ScaledResidue(ctx, c, self.e + other.e, k)

    def inverse(self) -> "ScaledResidue":
        """Inverse; every coordinate must be a unit times a p-power."""
        ctx = self.ctx
        vs = ctx.cvals(self.coords, self.prec)
        if any(v is INF for v in vs):
            raise ZeroDivisionError("inverse of zero-at-precision")
        if ctx.ext in ("field", "unram2"):
            v = int(vs[0]) if ctx.ext == "field" else int(vs[0])
            f = ctx.p ** v
            k = self.prec - v
            if k < 1:
                raise PrecisionError("inverse lost all precision")
            u = ctx.creduce(tuple(a // f for a in self.coords), k)
            uinv = ctx.cinv(u, k)
            return ScaledResidue(ctx, uinv, v - self.e, k)
        # split with possibly mixed coordinate valuations:
        # (p^v1 u1, p^v2 u2)^-1 = p^-(vmax - e) * (p^(vmax-v1) u1^-1, ...)
        v1, v2 = int(vs[0]), int(vs[1])
        vmax = max(v1, v2)
        k = self.prec - vmax
        if k < 1:
            raise PrecisionError("inverse lost all precision")
        m = ctx.pk(k)
        out = []
        for a, v in zip(self.coords, (v1, v2)):
            u = (a // ctx.p ** v) % ctx.pk(self.prec - v)
            ui = pow(u, -1, ctx.pk(self.prec - v))
            out.append((ui * ctx.p ** (vmax - v)) % m)
        return ScaledResidue(ctx, tuple(out), vmax - self.e, k)

    def bar(self) -> "ScaledResidue":
        return ScaledResidue(self.ctx, self.ctx.cbar(self.coords, self.prec),
                             self.e, self.prec, _canonical=True)

    def scale_p(self, k: int) -> "ScaledResidue":
        """Multiply by p^k (k may be negative)."""
        return ScaledResidue(self.ctx, self.coords, self.e - k, self.prec)

    def reduce_unit(self, level: int) -> tuple:
        """The unit residue mod p^level; requires a unit."""
        if self.e != 0 or not self.is_unit():
            raise ValueError("reduce_unit needs a unit with e = 0")
        if level > self.prec:
            raise PrecisionError("unit not known to the requested level")
        return self.ctx.creduce(self.coords, level)

    def trace_to_base(self) -> "ScaledResidue":
        """Tr_{K/F}: identity (field), sum of coordinates (split), x + xbar
        (unram2).  The result is F-rational."""
        if self.ctx.ext == "field":
            return self
        s = self + self.bar()
        if self.ctx.ext == "split":
            # bar-fixed pair (a, a): carry the diagonal coordinate
            return s
        return s

    # --- comparison ----------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScaledResidue):
            return NotImplemented
        c1, c2, _, k = self._align(other)
        m = self.ctx.pk(k)
        return tuple(a % m for a in c1) == tuple(a % m for a in c2)

    # equality is precision-relative, so hashing would be unsound
    __hash__ = None

    def __repr__(self) -> str:
        if self.e:
            return f"SR({self.coords} / p^{self.e}, prec={self.prec})"
        return f"SR({self.coords}, prec={self.prec})"


class PrecisionError(ArithmeticError):
    """Raised when a question is undecidable at the working precision."""


def conj_bar(x: ScaledResidue, ctx: RingCtx | None = None) -> ScaledResidue:
    """The conjugation of O: identity / coordinate swap / y -> -y."""
    return x.bar()


def valuation(x: ScaledResidue):
    """Valuation with interval semantics: INF means >= prec - e."""
    return x.valuation()
