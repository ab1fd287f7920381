"""Finite-order multiplicative characters and the additive character psi.

psi is the standard character of F = Q_p with kernel Z_p, evaluated as
psi(x) = e^{-2 pi i {x}} = zeta_{p^w}^{-a} for x = a / p^w + Z_p.  On the
quadratic algebra K the composite psi_K = psi o Tr_{K/F} is also provided.

Characters of (O/p^r)^x are stored as exponent data against the generator
tables built in RingCtx: a tame exponent and wild exponent data (a pair in
the unram2 case, where the wild part has rank two).
"""

from __future__ import annotations

from .cyclo import CycloRing, CycloValue
from .rings import INF, RingCtx, ScaledResidue


def psi_frac(ring: CycloRing, ctx: RingCtx, numer: int, w: int) -> CycloValue:
    """psi_F(p^-w * numer) = zeta_{p^w}^{-numer}."""
    if w <= 0:
        return ring.one()
    if w > ctx.root_window:
        raise ValueError(f"psi needs zeta_(p^{w}) beyond the configured window")
    return ring.root(ctx.p ** w, -numer)


def psi_eval_base(x: ScaledResidue, ring: CycloRing) -> CycloValue:
    """psi_F at an F-rational element (coordinates must agree)."""
    ctx = x.ctx
    if ctx.ext == "field":
        a = x.coords[0]
    elif ctx.ext == "split":
        if x.coords[0] % ctx.pk(x.prec) != x.coords[1] % ctx.pk(x.prec):
            raise ValueError("element is not F-rational")
        a = x.coords[0]
    else:
        if x.coords[1] % ctx.pk(x.prec) != 0:
            raise ValueError("element is not F-rational")
        a = x.coords[0]
    if x.e <= 0:
        return ring.one()
    # value depends on numer mod p^e only; x.prec >= 1 guarantees that much
    if x.prec < x.e:
        raise ValueError("insufficient precision to evaluate psi")
    return psi_frac(ring, ctx, a % ctx.pk(x.e), x.e)


def psi_eval(x: ScaledResidue, ring: CycloRing) -> CycloValue:
    """psi_K = psi_F o Tr_{K/F}; on F itself this is plain psi_F."""
    ctx = x.ctx
    if ctx.ext == "field":
        return psi_eval_base(x, ring)
    return psi_eval_base(x.trace_to_base(), ring)


class FiniteOrderCharacter:
    """Character of (O/p^r)^x given by exponents on the generator tables.

    field:   chi(g^k)      = zeta_{p-1}^(tame*k) * zeta_{p^(r-1)}^(wild*k)
    unram2:  chi(T^i a^j b^k) = zeta_{p^2-1}^(tame*i) * zeta_{p^(r-1)}^(w1*j + w2*k)
    split:   a pair of field characters, one per coordinate.
    """

    def __init__(self, ctx: RingCtx, level: int, tame_exp, wild_exp):
        if not (1 <= level <= ctx.N):
            raise ValueError(f"character level {level} outside ring precision")
        self.ctx = ctx
        self.level = level
        p = ctx.p
        wild_mod = p ** (level - 1)
        if ctx.ext == "split":
            te = tuple(tame_exp) if isinstance(tame_exp, (tuple, list)) else (tame_exp, tame_exp)
            we = tuple(wild_exp) if isinstance(wild_exp, (tuple, list)) else (wild_exp, wild_exp)
            self.tame_exp = (te[0] % (p - 1), te[1] % (p - 1))
            self.wild_exp = (we[0] % wild_mod, we[1] % wild_mod)
        elif ctx.ext == "field":
            self.tame_exp = tame_exp % (p - 1)
            self.wild_exp = wild_exp % wild_mod
        else:
            self.tame_exp = tame_exp % (p * p - 1)
            we = tuple(wild_exp) if isinstance(wild_exp, (tuple, list)) else (wild_exp, 0)
            self.wild_exp = (we[0] % wild_mod, we[1] % wild_mod)

    @classmethod
    def trivial(cls, ctx: RingCtx, level: int = 1) -> "FiniteOrderCharacter":
        zero = (0, 0) if ctx.ext in ("split", "unram2") else 0
        return cls(ctx, level, (0, 0) if ctx.ext == "split" else 0, zero)

    @classmethod
    def from_descriptor(cls, ctx: RingCtx, desc) -> "FiniteOrderCharacter":
        if isinstance(desc, (list, tuple)):
            if ctx.ext != "split":
                raise ValueError("character pair only valid for a split ring")
            a, b = desc
            return cls(ctx, max(int(a["level"]), int(b["level"])),
                       (int(a["tame_exp"]), int(b["tame_exp"])),
                       (int(a["wild_exp"]), int(b["wild_exp"])))
        return cls(ctx, int(desc["level"]), desc["tame_exp"], desc["wild_exp"])

    def is_trivial(self) -> bool:
        if self.ctx.ext == "split":
            return self.tame_exp == (0, 0) and self.wild_exp == (0, 0)
        if self.ctx.ext == "field":
            return self.tame_exp == 0 and self.wild_exp == 0
        return self.tame_exp == 0 and self.wild_exp == (0, 0)

    def order(self) -> int:
        from math import gcd, lcm
        p, r = self.ctx.p, self.level
        tmod = p - 1 if self.ctx.ext != "unram2" else p * p - 1
        wmod = p ** (r - 1)
        parts = []
        if self.ctx.ext == "split":
            for te, we in zip(self.tame_exp, self.wild_exp):
                parts += [tmod // gcd(tmod, te) if te else 1,
                          wmod // gcd(wmod, we) if we else 1]
        elif self.ctx.ext == "field":
            parts = [tmod // gcd(tmod, self.tame_exp) if self.tame_exp else 1,
                     wmod // gcd(wmod, self.wild_exp) if self.wild_exp else 1]
        else:
            parts = [tmod // gcd(tmod, self.tame_exp) if self.tame_exp else 1]
            for we in self.wild_exp:
                parts.append(wmod // gcd(wmod, we) if we else 1)
        return lcm(*parts)

    def root_orders(self) -> tuple:
        """Root-of-unity orders the values of this character live in."""
        p = self.ctx.p
        tame = p - 1 if self.ctx.ext != "unram2" else p * p - 1
        return (tame, p ** (self.level - 1))

    def eval_coords(self, u: tuple, ring: CycloRing) -> CycloValue:
        """Value at a unit residue (raw coordinate tuple)."""
        ctx, r, p = self.ctx, self.level, self.ctx.p
        if not ctx.cis_unit(u, r):
            raise ValueError("character undefined off units")
        u = ctx.creduce(u, r)
        if ctx.ext == "field":
            (k,) = ctx.unit_dlog(u, r)
            val = ring.root(p - 1, self.tame_exp * k)
            if r > 1 and self.wild_exp:
                val = val * ring.root(p ** (r - 1), self.wild_exp * k)
            return val
        if ctx.ext == "split":
            k1, k2 = ctx.unit_dlog(u, r)
            val = ring.root(p - 1, self.tame_exp[0] * k1 + self.tame_exp[1] * k2)
            if r > 1:
                w = self.wild_exp[0] * k1 + self.wild_exp[1] * k2
                if w:
                    val = val * ring.root(p ** (r - 1), w)
            return val
        i, j, k = ctx.unit_dlog(u, r)
        val = ring.root(p * p - 1, self.tame_exp * i)
        if r > 1:
            w = self.wild_exp[0] * j + self.wild_exp[1] * k
            if w:
                val = val * ring.root(p ** (r - 1), w)
        return val

    def __repr__(self):
        return (f"Chi({self.ctx.ext}, r={self.level}, tame={self.tame_exp}, "
                f"wild={self.wild_exp})")


def char_eval(chi: FiniteOrderCharacter, u: ScaledResidue, ring: CycloRing) -> CycloValue:
    """chi(u) for a unit u; raises on non-units."""
    if u.e != 0 or not u.is_unit():
        raise ValueError("character undefined off units")
    return chi.eval_coords(u.reduce_unit(chi.level), ring)


def chi_tilde_value(ctx: RingCtx, x: ScaledResidue, ring: CycloRing) -> CycloValue:
    """The designated extension of the quadratic character chi_{K/F} to K^x.

    field/split: trivial; unram2: (-1)^{v(x)} (the unramified extension)."""
    if ctx.ext != "unram2":
        return ring.one()
    v = x.valuation()
    if v is INF:
        raise ValueError("chi_tilde undefined at zero")
    return ring.one() if int(v) % 2 == 0 else -ring.one()
