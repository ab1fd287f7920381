"""T+ semigroups, unipotent coset transversals, and the U_p operators.

The H-side operator sums phi(^t t ^t u X) over an exact transversal of
U_H(O) / t U_H(O) t^-1; the G-side operator has two routes:

  * generic     -- the literal transversal sum of Weil actions by u t,
  * specialized -- |det A|^((2m+eps)/2) (chitilde gamma)^eps * I_s
                   * 1_{Her_n(O)}(^t Xbar J X) * sum_a0 phi(X a0 A(t)),

which agree exactly on tables supported on the integral-Gram locus (the
distinguished function phi_chi always is).  The equivariance checker scans
a window pointwise on exact integer lifts and reports the empirical
proportionality constant against the two |det A|^(+-(2m+eps)/2) candidates.
"""

from __future__ import annotations

import itertools
import time
from fractions import Fraction
from typing import Sequence

from .cases import CaseTag
from .chars import FiniteOrderCharacter, chi_tilde_value, psi_eval_base
from .cyclo import CycloRing
from .matrices import (mat_bar_transpose, mat_identity, mat_inverse, mat_mul,
                       mat_transpose)
from .rings import INF, RingCtx, ScaledResidue
from .schwartz import (MatrixWindow, SchwartzTable, WindowOverflow, _depth,
                       _materialized_window, _trace, gram_matrix)

# --- integer-lift kernel -----------------------------------------------------


class Lifts:
    """Exact integer arithmetic on coordinate tuples (no truncation)."""

    def __init__(self, ctx: RingCtx):
        self.ctx = ctx
        self.p = ctx.p
        self.nc = ctx.ncoords
        self.c = ctx.nonresidue

    def zero(self):
        return (0,) * self.nc

    def one(self):
        if self.ctx.ext == "split":
            return (1, 1)
        return (1, 0) if self.nc == 2 else (1,)

    def add(self, x, y):
        return tuple(a + b for a, b in zip(x, y))

    def sub(self, x, y):
        return tuple(a - b for a, b in zip(x, y))

    def mul(self, x, y):
        if self.ctx.ext == "field":
            return (x[0] * y[0],)
        if self.ctx.ext == "split":
            return (x[0] * y[0], x[1] * y[1])
        return (x[0] * y[0] + self.c * x[1] * y[1], x[0] * y[1] + x[1] * y[0])

    def bar(self, x):
        if self.ctx.ext == "field":
            return x
        if self.ctx.ext == "split":
            return (x[1], x[0])
        return (x[0], -x[1])

    def from_sr(self, x: ScaledResidue, scale: int):
        """Integer lift of the canonical representative times p^scale."""
        if scale < x.e:
            raise ValueError("lift scale below the denominator exponent")
        f = self.p ** (scale - x.e)
        return tuple(a * f for a in x.coords)

    def divisible(self, x, k: int) -> bool:
        f = self.p ** k
        return all(a % f == 0 for a in x)

    def unit_at(self, x, k: int) -> bool:
        """Is p^-k x a unit in O?"""
        f = self.p ** k
        if any(a % f for a in x):
            return False
        red = tuple((a // f) % self.p for a in x)
        if self.ctx.ext == "split":
            return red[0] != 0 and red[1] != 0
        return any(r != 0 for r in red)

    def residue(self, x, k: int, level: int):
        """(p^-k x) mod p^level as a coordinate tuple."""
        f = self.p ** k
        m = self.p ** level
        return tuple((a // f) % m for a in x)

    # matrices: tuples of tuples of coordinate tuples
    def mmul(self, A, B):
        n, k, m2 = len(A), len(B), len(B[0])
        out = []
        for i in range(n):
            row = []
            for j in range(m2):
                acc = self.mul(A[i][0], B[0][j])
                for t in range(1, k):
                    acc = self.add(acc, self.mul(A[i][t], B[t][j]))
                row.append(acc)
            out.append(row)
        return tuple(tuple(r) for r in out)

    def mtranspose(self, A):
        return tuple(tuple(col) for col in zip(*A))

    def mbar_transpose(self, A):
        return tuple(tuple(self.bar(x) for x in col) for col in zip(*A))

    def from_sr_matrix(self, M, scale: int):
        return tuple(tuple(self.from_sr(x, scale) for x in row) for row in M)

    def det(self, A):
        n = len(A)
        if n == 1:
            return A[0][0]
        if n == 2:
            return self.sub(self.mul(A[0][0], A[1][1]), self.mul(A[0][1], A[1][0]))
        acc = None
        for j in range(n):
            minor = tuple(row[:j] + row[j + 1:] for row in A[1:])
            term = self.mul(A[0][j], self.det(minor))
            if j % 2:
                term = tuple(-t for t in term)
            acc = term if acc is None else self.add(acc, term)
        return acc


# --- torus elements ----------------------------------------------------------


def _coord_exps(x: ScaledResidue) -> tuple:
    """Per-coordinate valuations of a monomial (unit times p-power) entry."""
    vs = x.coord_valuations()
    if any(v is INF for v in vs):
        raise ValueError("torus entries must be units times p-powers")
    return tuple(int(v) for v in vs)


class TorusElementH:
    """diag(a_1..a_m, abar_1^-1..abar_m^-1 [, u]) with u u-bar = 1 (eps=1)."""

    def __init__(self, ctx: RingCtx, case: CaseTag, a: Sequence[ScaledResidue],
                 u: ScaledResidue | None = None):
        case.check_ring(ctx)
        if len(a) != case.m:
            raise ValueError(f"need {case.m} torus entries")
        self.ctx = ctx
        self.case = case
        self.a = list(a)
        if case.eps:
            if u is None:
                u = ScaledResidue.one(ctx)
            if not (u * u.bar() == ScaledResidue.one(ctx)):
                raise ValueError("the eps=1 torus coordinate must satisfy u ubar = 1")
        elif u is not None:
            raise ValueError("u coordinate only exists for eps = 1")
        self.u = u

    @classmethod
    def from_exponents(cls, ctx, case, exps, u_exp: int = 0, u_sign: int = 1):
        a = []
        for e in exps:
            if ctx.ext == "split":
                e1, e2 = e if isinstance(e, (tuple, list)) else (e, e)
                a.append(_split_monomial(ctx, e1, e2))
            else:
                a.append(ScaledResidue.from_int(ctx, ctx.p ** max(e, 0), max(-e, 0)))
        u = None
        if case.eps:
            if ctx.ext == "split":
                u = _split_norm_one(ctx, u_exp)
            else:
                if u_exp != 0:
                    raise ValueError("u must have exponent 0 outside the split case")
                u = ScaledResidue.from_int(ctx, u_sign)
        return cls(ctx, case, a, u)

    def tplus_check(self, cross_validate: bool = False) -> bool:
        ok = True
        for j in range(self.case.m - 1):
            if not (self.a[j] * self.a[j + 1].inverse()).is_integral():
                ok = False
        am = self.a[-1]
        if not (am * am.bar()).is_integral():
            ok = False
        if self.case.eps and not (am * self.u.inverse()).is_integral():
            ok = False
        if ok and cross_validate:
            ok = _conjugation_validates(self)
        return ok

    def matrix(self) -> list:
        ctx, m = self.ctx, self.case.m
        entries = list(self.a) + [x.bar().inverse() for x in self.a]
        if self.case.eps:
            entries.append(self.u)
        from .matrices import mat_diag
        return mat_diag(entries)

    def exps(self):
        return [_coord_exps(x) for x in self.a]

    def label(self):
        out = []
        for x in self.a:
            out.append(list(_coord_exps(x)))
        d = {"a_exps": out}
        if self.case.eps:
            d["u_exps"] = list(_coord_exps(self.u))
        return d


def _split_norm_one(ctx: RingCtx, k: int) -> ScaledResidue:
    """(p^k, p^-k) as a ScaledResidue over a split ring."""
    if k >= 0:
        return ScaledResidue.from_pair(ctx, ctx.p ** (2 * k), 1, k)
    return ScaledResidue.from_pair(ctx, 1, ctx.p ** (-2 * k), -k)


class TorusElementG:
    """diag(a_1..a_m, d..d, abar^-1s, dbar^-1s) in T+ of G (n >= m)."""

    def __init__(self, ctx: RingCtx, case: CaseTag, a: Sequence[ScaledResidue],
                 d: ScaledResidue | None = None, sign: int = 1):
        case.check_ring(ctx)
        if len(a) != case.m:
            raise ValueError(f"need {case.m} entries")
        if case.n > case.m and d is None:
            raise ValueError("n > m requires the d entry")
        if case.n == case.m:
            d = None
        self.ctx = ctx
        self.case = case
        self.a = list(a)
        self.d = d
        self.sign = sign if case.metaplectic else 1

    @classmethod
    def from_torus_h(cls, t: TorusElementH, d_exp=0, sign: int = 1):
        ctx, case = t.ctx, t.case
        d = None
        if case.n > case.m:
            if ctx.ext == "split":
                e1, e2 = d_exp if isinstance(d_exp, (tuple, list)) else (d_exp, d_exp)
                d = _split_monomial(ctx, e1, e2)
            else:
                d = ScaledResidue.from_int(ctx, ctx.p ** max(d_exp, 0), max(-d_exp, 0))
        return cls(ctx, case, t.a, d, sign)

    def diag_entries(self) -> list:
        return list(self.a) + [self.d] * (self.case.n - self.case.m)

    def a_matrix(self) -> list:
        from .matrices import mat_diag
        return mat_diag(self.diag_entries())

    def matrix(self) -> list:
        from .matrices import mat_diag
        entries = self.diag_entries()
        return mat_diag(entries + [x.bar().inverse() for x in entries])

    def tplus_check(self, cross_validate: bool = False) -> bool:
        entries = self.diag_entries()
        ok = True
        for j in range(len(entries) - 1):
            if not (entries[j] * entries[j + 1].inverse()).is_integral():
                ok = False
        an = entries[-1]
        if not (an * an.bar()).is_integral():
            ok = False
        if ok and cross_validate:
            ok = _conjugation_validates_g(self)
        return ok

    def det_a(self) -> ScaledResidue:
        acc = self.diag_entries()[0]
        for x in self.diag_entries()[1:]:
            acc = acc * x
        return acc

    def label(self):
        d = {"a_exps": [list(_coord_exps(x)) for x in self.a]}
        if self.d is not None:
            d["d_exps"] = list(_coord_exps(self.d))
        if self.case.metaplectic:
            d["sign"] = self.sign
        return d


def _split_monomial(ctx: RingCtx, e1: int, e2: int) -> ScaledResidue:
    den = max(-min(e1, e2), 0)
    return ScaledResidue.from_pair(ctx, ctx.p ** (e1 + den), ctx.p ** (e2 + den), den)


def tplus_check(t) -> bool:
    """Valuation-condition membership in T+, cross-validated by conjugating
    the unipotent generators."""
    return t.tplus_check(cross_validate=True)


# --- unipotent parametrization and transversals ------------------------------


class UnipotentParam:
    """Root coordinates of a unipotent element.

    G side: u = m(A) n(S), A in U_GLn(O), S in Her_n(O).
    H side: u = m_H(A) n_H(S) x(b), S anti-Hermitian, b the eps=1 column.
    Coordinates are ScaledResidues; materialization asserts membership."""

    def __init__(self, side: str, case: CaseTag, ctx: RingCtx,
                 A: dict | None = None, S: dict | None = None,
                 b: list | None = None):
        self.side = side
        self.case = case
        self.ctx = ctx
        self.A = A or {}
        self.S = S or {}
        self.b = b

    def gl_matrix(self, size: int) -> list:
        M = mat_identity(self.ctx, size)
        for (i, j), x in self.A.items():
            M[i][j] = x
        return M

    def s_matrix(self, size: int, anti: bool) -> list:
        z = ScaledResidue.zero(self.ctx)
        M = [[z for _ in range(size)] for _ in range(size)]
        for (i, j), x in self.S.items():
            M[i][j] = x
            if i != j:
                M[j][i] = -x.bar() if anti else x.bar()
        return M

    def materialize(self, check: bool = True) -> list:
        ctx, case = self.ctx, self.case
        m, n = case.m, case.n
        if self.side == "G":
            A = self.gl_matrix(n)
            S = self.s_matrix(n, anti=False)
            top = [row_a + row_s for row_a, row_s in zip(A, mat_mul(A, S))]
            bot_right = mat_bar_transpose(mat_inverse(A))
            z = ScaledResidue.zero(ctx)
            bot = [[z] * n + row for row in bot_right]
            g = top + bot
            if check:
                from .matrices import is_form_preserving
                J2n = _symplectic_form(ctx, n)
                if not is_form_preserving(g, J2n):
                    raise AssertionError("materialized G-unipotent fails the form")
            return g
        # H side
        A = self.gl_matrix(m)
        S = self.s_matrix(m, anti=True)
        z = ScaledResidue.zero(ctx)
        d = case.rows
        # m_H(A)
        mh = mat_identity(ctx, d)
        Ainvbar_t = mat_bar_transpose(mat_inverse(A))
        for i in range(m):
            for j in range(m):
                mh[i][j] = A[i][j]
                mh[m + i][m + j] = Ainvbar_t[i][j]
        # radical n_H(S) x(b) = [[1, S - b ^tbbar / 2, b], [0, 1, 0], [0, -^tbbar, 1]]
        rad = mat_identity(ctx, d)
        bb = self.b if self.b is not None else [z] * m
        half = ScaledResidue.from_int(ctx, pow(2, -1, ctx.pk(ctx.N)))
        for i in range(m):
            for j in range(m):
                rad[i][m + j] = S[i][j]
                if case.eps:
                    rad[i][m + j] = rad[i][m + j] - half * (bb[i] * bb[j].bar())
        if case.eps:
            for i in range(m):
                rad[i][2 * m] = bb[i]
            for j in range(m):
                rad[2 * m][m + j] = -bb[j].bar()
        g = mat_mul(mh, rad)
        if check:
            from .matrices import is_form_preserving
            J = case.j_matrix(ctx)
            if not is_form_preserving(g, J):
                raise AssertionError("materialized H-unipotent fails the form")
        return g


def _symplectic_form(ctx: RingCtx, n: int) -> list:
    z, one = ScaledResidue.zero(ctx), ScaledResidue.one(ctx)
    J = [[z for _ in range(2 * n)] for _ in range(2 * n)]
    for i in range(n):
        J[i][n + i] = one
        J[n + i][i] = -one
    return J


def _box_digits(ctx: RingCtx, exps) -> list:
    """All coordinate tuples with coordinate t running mod p^exps[t]."""
    ranges = [range(ctx.p ** max(e, 0)) for e in exps]
    out = []
    for combo in itertools.product(*ranges):
        out.append(tuple(combo))
    return out


def _sr_from_digits(ctx: RingCtx, digits: tuple) -> ScaledResidue:
    if ctx.ncoords == 1:
        return ScaledResidue.from_int(ctx, digits[0])
    return ScaledResidue.from_pair(ctx, digits[0], digits[1])


def _entry_exps(x: ScaledResidue, ctx: RingCtx):
    v = _coord_exps(x)
    return v if ctx.ext == "split" else (v[0],)


def gl_coset_reps(ctx: RingCtx, diag: list) -> list:
    """Transversal of U_GL(O) / A U_GL(O) A^-1 for A = diag(diag): entry
    (i, j), i < j, runs mod p^(v(a_i) - v(a_j)) per coordinate."""
    n = len(diag)
    exps = [_entry_exps(x, ctx) for x in diag]
    positions = [(i, j) for i in range(n) for j in range(i + 1, n)]
    per_pos = []
    for (i, j) in positions:
        ediff = tuple(ei - ej for ei, ej in zip(exps[i], exps[j]))
        if any(e < 0 for e in ediff):
            raise ValueError("diagonal not dominance-ordered (not in T+)")
        if ctx.ext != "split":
            ediff = (ediff[0], ediff[0]) if ctx.ncoords == 2 else ediff
            # unram2: O/p^e O has p^(2e) digit pairs
            box = list(itertools.product(range(ctx.p ** ediff[0]),
                                         range(ctx.p ** ediff[0]))) \
                if ctx.ncoords == 2 else [(k,) for k in range(ctx.p ** ediff[0])]
        else:
            box = list(itertools.product(range(ctx.p ** ediff[0]),
                                         range(ctx.p ** ediff[1])))
        per_pos.append(box)
    reps = []
    for combo in itertools.product(*per_pos):
        A = {pos: _sr_from_digits(ctx, dig) for pos, dig in zip(positions, combo)
             if any(dig)}
        reps.append(A)
    return reps


def her_coset_reps(ctx: RingCtx, diag: list, anti: bool) -> list:
    """Transversal of Her_n(O) / A Her_n(O) ^tAbar (or the anti-Hermitian
    version), in the free coordinates (i <= j)."""
    n = len(diag)
    exps = [_entry_exps(x, ctx) for x in diag]
    coords = []
    for i in range(n):
        for j in range(i, n):
            if i == j:
                if ctx.ext == "field":
                    if anti:
                        continue  # skew-symmetric: zero diagonal (p odd)
                    coords.append(((i, i), "diag", exps[i][0] * 2))
                elif ctx.ext == "split":
                    coords.append(((i, i), "diag", exps[i][0] + exps[i][1]))
                else:
                    coords.append(((i, i), "diag", 2 * exps[i][0]))
            else:
                if ctx.ext == "split":
                    coords.append(((i, j), "off",
                                   (exps[i][0] + exps[j][1], exps[i][1] + exps[j][0])))
                else:
                    e = exps[i][0] + exps[j][0]
                    coords.append(((i, j), "off", (e, e) if ctx.ncoords == 2 else (e,)))
    per = []
    for (_, kind, e) in coords:
        if kind == "diag":
            per.append([(k,) for k in range(ctx.p ** e)])
        else:
            if ctx.ncoords == 1:
                per.append([(k,) for k in range(ctx.p ** e[0])])
            else:
                per.append(list(itertools.product(range(ctx.p ** e[0]),
                                                  range(ctx.p ** e[1]))))
    reps = []
    for combo in itertools.product(*per):
        S = {}
        for ((i, j), kind, _), dig in zip(coords, combo):
            if not any(dig):
                continue
            if kind == "diag":
                S[(i, j)] = _diag_sr(ctx, dig[0], anti)
            else:
                S[(i, j)] = (ScaledResidue.from_int(ctx, dig[0]) if ctx.ncoords == 1
                             else ScaledResidue.from_pair(ctx, dig[0], dig[1]))
        reps.append(S)
    return reps


def _diag_sr(ctx: RingCtx, k: int, anti: bool) -> ScaledResidue:
    if ctx.ext == "field":
        return ScaledResidue.from_int(ctx, k)
    if ctx.ext == "split":
        return ScaledResidue.from_pair(ctx, k, -k if anti else k)
    # unram2: diagonal Hermitian entries lie in Z_p, anti-Hermitian in y Z_p
    return ScaledResidue.from_pair(ctx, 0 if anti else k, k if anti else 0)


def coset_reps(side: str, t, case: CaseTag) -> list:
    """Exact transversal of U(O) / t U(O) t^-1 as UnipotentParam list."""
    ctx = t.ctx
    if not t.tplus_check():
        raise ValueError("t is not in T+")
    if side == "G":
        diag = t.diag_entries()
        reps = []
        for A in gl_coset_reps(ctx, diag):
            for S in her_coset_reps(ctx, diag, anti=False):
                reps.append(UnipotentParam("G", case, ctx, A, S))
        return reps
    # H side: m_H(A) n_H(S) x(b)
    a = t.a
    reps = []
    b_boxes = [()]
    if case.eps:
        uinv = t.u.inverse()
        per = []
        for ai in a:
            prod = ai * uinv
            e = _entry_exps(prod, ctx)
            if ctx.ncoords == 1:
                per.append([(k,) for k in range(ctx.p ** e[0])])
            elif ctx.ext == "split":
                per.append(list(itertools.product(range(ctx.p ** e[0]),
                                                  range(ctx.p ** e[1]))))
            else:
                per.append(list(itertools.product(range(ctx.p ** e[0]),
                                                  range(ctx.p ** e[0]))))
        b_boxes = list(itertools.product(*per))
    for A in gl_coset_reps(ctx, a):
        for S in her_coset_reps(ctx, a, anti=True):
            for bdig in b_boxes:
                b = None
                if case.eps:
                    b = [_sr_from_digits(ctx, d) for d in bdig]
                reps.append(UnipotentParam("H", case, ctx, A, S, b))
    return reps


def coset_count(side: str, t, case: CaseTag) -> int:
    return len(coset_reps(side, t, case))


def reps_pairwise_distinct(side: str, t, case: CaseTag) -> bool:
    """Exhaustive membership check that the enumerated representatives are
    pairwise in distinct cosets (small instances only)."""
    reps = [u.materialize() for u in coset_reps(side, t, case)]
    tm = t.matrix()
    tinv = mat_inverse(tm)
    for i in range(len(reps)):
        gi_inv = mat_inverse(reps[i])
        for j in range(len(reps)):
            if i == j:
                continue
            w = mat_mul(gi_inv, reps[j])
            conj = mat_mul(mat_mul(tinv, w), tm)
            from .matrices import mat_is_integral
            if mat_is_integral(conj):
                return False
    return True


def _conjugation_validates(t: TorusElementH) -> bool:
    """Conjugate one generator per root-coordinate family and check that
    t u t^-1 stays integral."""
    ctx, case = t.ctx, t.case
    m = case.m
    gens = []
    one = ScaledResidue.one(ctx)
    for i in range(m - 1):
        gens.append(UnipotentParam("H", case, ctx, A={(i, i + 1): one}))
    if m >= 2:
        gens.append(UnipotentParam("H", case, ctx, S={(0, m - 1): one}))
    if ctx.ext != "field":
        gens.append(UnipotentParam("H", case, ctx,
                                   S={(m - 1, m - 1): _diag_sr(ctx, 1, True)}))
    if case.eps:
        gens.append(UnipotentParam("H", case, ctx, b=[one] * m))
    tm = t.matrix()
    tinv = mat_inverse(tm)
    from .matrices import mat_is_integral
    for g in gens:
        conj = mat_mul(mat_mul(tm, g.materialize()), tinv)
        if not mat_is_integral(conj):
            return False
    return True


def _conjugation_validates_g(t: TorusElementG) -> bool:
    ctx, case = t.ctx, t.case
    n = case.n
    one = ScaledResidue.one(ctx)
    gens = []
    for i in range(n - 1):
        gens.append(UnipotentParam("G", case, ctx, A={(i, i + 1): one}))
    gens.append(UnipotentParam("G", case, ctx, S={(0, n - 1): one}))
    gens.append(UnipotentParam("G", case, ctx, S={(n - 1, n - 1): _diag_sr(ctx, 1, False)}))
    tm = t.matrix()
    tinv = mat_inverse(tm)
    from .matrices import mat_is_integral
    for g in gens:
        conj = mat_mul(mat_mul(tm, g.materialize()), tinv)
        if not mat_is_integral(conj):
            return False
    return True


# --- operator application on tables ------------------------------------------


def apply_UH(table: SchwartzTable, t: TorusElementH) -> SchwartzTable:
    """The sum-normalized operator: (U~_t phi)(X) = sum_u phi(^t t ^t u X)
    over the exact transversal of U_H(O) / t U_H(O) t^-1."""
    if not t.tplus_check():
        raise ValueError("t not in T+_H")
    case = t.case
    ctx = table.window.ring
    tm = t.matrix()
    t_t = mat_transpose(tm)
    mats = [mat_mul(t_t, mat_transpose(u.materialize()))
            for u in coset_reps("H", t, case)]
    v2 = table.window.v + _depth(mat_inverse(tm))
    r2 = table.window.r + _depth(tm)
    out_w = _materialized_window(table.window, v2, r2)
    zero = table.cyclo.zero()
    values: dict = {}
    for cell in out_w.cells():
        X = out_w.cell_matrix(cell)
        acc = zero
        for M in mats:
            acc = acc + table.lookup(mat_mul(M, X))
        if not acc.is_zero():
            values[cell] = acc
    return SchwartzTable(out_w, values, table.cyclo, table.gamma, table.sign)


def apply_UG(table: SchwartzTable, tbreve: TorusElementG, route: str = "specialized") -> SchwartzTable:
    """The G-side operator in the same sum normalization.

    generic:     sum over the full transversal m(a0) n(s0) of Weil actions
                 by u tbreve.
    specialized: |det A|^((2m+eps)/2) (chitilde gamma)^eps * I_s
                 * 1_{Her_n(O)}(gram) * sum_a0 phi(X a0 A(tbreve)).
    The two agree exactly for tables supported on the integral-Gram locus."""
    if route not in ("generic", "specialized"):
        raise ValueError("route must be generic|specialized")
    if not tbreve.tplus_check():
        raise ValueError("tbreve not in T+_G")
    case = tbreve.case
    ctx = table.window.ring
    A_t = tbreve.a_matrix()
    diag = tbreve.diag_entries()
    a0_reps = gl_coset_reps(ctx, diag)
    s_reps = her_coset_reps(ctx, diag, anti=False)
    I_s = len(s_reps)
    detA = tbreve.det_a()
    from .schwartz import _abs_power_value, _gamma_label
    scalar = _abs_power_value(ctx, detA, 2 * case.m + case.eps, table.cyclo)
    gamma = dict(table.gamma)
    sign = table.sign * tbreve.sign
    if case.eps and case.name == "U1":
        scalar = scalar * chi_tilde_value(ctx, detA, table.cyclo)
    if case.metaplectic:
        lbl = _gamma_label(detA)
        gamma[lbl] = gamma.get(lbl, 0) - 1
        gamma = {k: x for k, x in gamma.items() if x}
    n = case.n
    A_mats = [mat_mul(UnipotentParam("G", case, ctx, A=a0).gl_matrix(n), A_t)
              for a0 in a0_reps]
    v2 = table.window.v + _depth(mat_inverse(A_t))
    r2 = max(table.window.r + _depth(A_t), v2 + 1)
    out_w = _materialized_window(table.window, v2, r2)
    J = case.j_matrix(ctx)
    zero = table.cyclo.zero()
    half = ScaledResidue.from_int(ctx, pow(2, -1, ctx.pk(ctx.N)))
    values: dict = {}
    if route == "specialized":
        for cell in out_w.cells():
            X = out_w.cell_matrix(cell)
            G = gram_matrix(X, J)
            if not all(x.is_integral() for row in G for x in row):
                continue
            acc = zero
            for Am in A_mats:
                acc = acc + table.lookup(mat_mul(X, Am))
            if not acc.is_zero():
                values[cell] = (acc * I_s) * scalar
    else:
        s_mats = []
        for a0 in a0_reps:
            a0m = UnipotentParam("G", case, ctx, A=a0).gl_matrix(n)
            a0bt = mat_bar_transpose(a0m)
            row = []
            for s0 in s_reps:
                S = UnipotentParam("G", case, ctx, S=s0).s_matrix(n, anti=False)
                row.append(mat_mul(mat_mul(a0m, S), a0bt))  # a0 s0 ^t a0bar
            s_mats.append(row)
        for cell in out_w.cells():
            X = out_w.cell_matrix(cell)
            G = gram_matrix(X, J)
            acc = zero
            for Am, srow in zip(A_mats, s_mats):
                base = table.lookup(mat_mul(X, Am))
                if base.is_zero():
                    continue
                for SS in srow:
                    ps = psi_eval_base(half * _trace(mat_mul(SS, G)), table.cyclo)
                    acc = acc + base * ps
            if not acc.is_zero():
                values[cell] = acc * scalar
    return SchwartzTable(out_w, values, table.cyclo, gamma, sign)


# --- pointwise scanning verifier ---------------------------------------------


def _lift_depth_mats(L: Lifts, mats: list) -> tuple:
    """Common-scale integer lifts of a list of ScaledResidue matrices."""
    s = max((_depth(M) for M in mats), default=0)
    return s, [L.from_sr_matrix(M, s) for M in mats]


def _phi_lift_eval(L: Lifts, W, e: int, m: int, r: int):
    """Distinguished-function support/minor evaluation on an integer lift.

    Value matrix is p^-e W.  Returns None off the support; on it, the tuple
    of leading-minor unit residues of the X1 block mod p^r."""
    # integrality outside X1
    rows = len(W)
    cols = len(W[0])
    for i in range(rows):
        for j in range(cols):
            if i < m and j < m:
                continue
            if not L.divisible(W[i][j], e):
                return None
    if m == 1:
        x = W[0][0]
        if not L.unit_at(x, e):
            return None
        return (L.residue(x, e, r),)
    # leading minors of the X1 block
    res = []
    for j in range(1, m + 1):
        block = tuple(tuple(W[i][k] for k in range(j)) for i in range(j))
        d = L.det(block)
        if not L.unit_at(d, j * e):
            return None
        res.append(L.residue(d, j * e, r))
    # X1 entries must individually be integral as well
    for i in range(m):
        for j in range(m):
            if not L.divisible(W[i][j], e):
                return None
    return tuple(res)


def _lift_gram(L: Lifts, X, case: CaseTag):
    """^t Xbar J X on lifts; scale doubles."""
    m = case.m
    rows = len(X)
    # J X: swap the two m-blocks of rows, keep the eps row
    JX = tuple(X[m + i] for i in range(m)) + tuple(X[i] for i in range(m))
    if case.eps:
        JX = JX + (X[2 * m],)
    return L.mmul(L.mbar_transpose(X), JX)


def _cells_iter(digits: int, slots: int, sample: int | None, seed: int):
    if sample is None:
        return itertools.product(range(digits), repeat=slots)
    import random
    rng = random.Random(seed)
    def gen():
        for _ in range(sample):
            yield tuple(rng.randrange(digits) for _ in range(slots))
    return gen()


def scan_operators(t: TorusElementH, tbreve: TorusElementG, v: int, r: int,
                   sample: int | None = None, seed: int = 0) -> dict:
    """Shared window scan for the equivariance checker and the support
    identity.  Aggregates, per cell of the (v, r) window:

      count_l  -- H-side transversal hits sum_u 1_V(^t t ^t u X)
      her      -- 1_{Her_n(O)}(^t Xbar J X)
      count_r  -- GL_n-side hits sum_a0 1_V(X a0 A(tbreve))
      minres   -- the leading-minor residue tuples on both sides (m = 1 shape
                  shared by all transversal hits; asserted)

    All arithmetic is on exact integer lifts of the cell representatives.
    For m = 1 the top-left condition is coset-independent on both sides and
    prunes the bulk of the window before any transversal loop."""
    case = t.case
    ctx = t.ctx
    L = Lifts(ctx)
    tm = t.matrix()
    t_t = mat_transpose(tm)
    h_mats = [mat_mul(t_t, mat_transpose(u.materialize()))
              for u in coset_reps("H", t, case)]
    su, h_lifts = _lift_depth_mats(L, h_mats)
    A_t = tbreve.a_matrix()
    a0_mats = [mat_mul(UnipotentParam("G", case, ctx, A=a0).gl_matrix(case.n), A_t)
               for a0 in gl_coset_reps(ctx, tbreve.diag_entries())]
    sa, a_lifts = _lift_depth_mats(L, a0_mats)
    I_s = len(her_coset_reps(ctx, tbreve.diag_entries(), anti=False))
    m, n, rows = case.m, case.n, case.rows
    digits = ctx.p ** (v + r)
    slots = rows * n * L.nc
    nc = L.nc
    stats: dict = {}
    mism = 0
    mism_example = None
    fibers_l: set = set()
    fibers_r: set = set()
    cells = 0
    # m = 1 pruning data: a1 acts on row 0 (H side) and column 0 (G side)
    prune = m == 1
    a1_h = L.from_sr(t.a[0], su) if prune else None
    a1_g = L.from_sr(tbreve.a[0], sa) if prune else None
    eh, eg = v + su, v + sa
    mul, unit_at, divisible = L.mul, L.unit_at, L.divisible
    for cell in _cells_iter(digits, slots, sample, seed):
        cells += 1
        X = tuple(tuple(tuple(cell[(i * n + j) * nc + t0] for t0 in range(nc))
                        for j in range(n)) for i in range(rows))
        cl = cr = 0
        key_l = key_r = None
        l_possible = r_possible = True
        if prune:
            x00 = X[0][0]
            if not unit_at(mul(a1_h, x00), eh):
                l_possible = False
            else:
                for j in range(1, n):
                    if not divisible(mul(a1_h, X[0][j]), eh):
                        l_possible = False
                        break
            if not unit_at(mul(a1_g, x00), eg):
                r_possible = False
            else:
                for i in range(1, rows):
                    if not divisible(mul(a1_g, X[i][0]), eg):
                        r_possible = False
                        break
            if not (l_possible or r_possible):
                fibers_l.add(0)
                fibers_r.add(0)
                continue
        if l_possible:
            for M in h_lifts:
                got = _phi_lift_eval(L, L.mmul(M, X), eh, m, r)
                if got is not None:
                    cl += 1
                    if key_l is None:
                        key_l = got
                    elif key_l != got:
                        key_l = "MIXED"
        her = False
        if r_possible:
            G = _lift_gram(L, X, case)
            her = all(divisible(x, 2 * v) for row in G for x in row)
        if r_possible and her:
            for M in a_lifts:
                got = _phi_lift_eval(L, L.mmul(X, M), eg, m, r)
                if got is not None:
                    cr += 1
                    if key_r is None:
                        key_r = got
                    elif key_r != got:
                        key_r = "MIXED"
        fibers_l.add(cl)
        fibers_r.add(cr if her else 0)
        lnz = cl > 0
        rnz = her and cr > 0
        if lnz != rnz:
            mism += 1
            if mism_example is None:
                mism_example = cell
            continue
        if lnz:
            k = (cl, cr, key_l == key_r and key_l != "MIXED", key_l, key_r)
            stats[k] = stats.get(k, 0) + 1
    return {"case": case.name, "m": m, "n": n, "p": ctx.p, "ext": ctx.ext,
            "v": v, "r": r, "cells_checked": cells,
            "support_mismatches": mism, "mismatch_example": mism_example,
            "stats": stats, "I_s": I_s, "h_cosets": len(h_lifts),
            "a_cosets": len(a_lifts),
            "fibers_l": sorted(fibers_l), "fibers_r": sorted(fibers_r),
            "sampled": sample is not None}


def _compat_check(t: TorusElementH, tbreve: TorusElementG, probe: bool) -> None:
    for x, y in zip(t.a, tbreve.a):
        if not (x == y):
            raise ValueError("t and tbreve must share the a_1..a_m entries")
    case = t.case
    if (case.name == "U1" and case.n > case.m and t.ctx.ext == "split"
            and not probe):
        du = tbreve.d * t.u.inverse()
        if not du.is_unit():
            raise ValueError("case U1 split with n > m needs d u^-1 a unit "
                             "(pass probe=True to probe the hypothesis)")


def _frac_p_exponent(x: Fraction, p: int):
    """2*log_p for a p-power Fraction, else None."""
    num, den = x.numerator, x.denominator
    e = 0
    while num % p == 0:
        num //= p
        e += 1
    while den % p == 0:
        den //= p
        e -= 1
    if num == 1 and den == 1:
        return e
    return None


def _det_val_total(detA: ScaledResidue) -> int:
    ctx = detA.ctx
    vs = detA.coord_valuations()
    if ctx.ext == "split":
        return int(vs[0]) + int(vs[1])
    v = int(min(vs))
    return 2 * v if ctx.ext == "unram2" else v


def check_equivariance(t: TorusElementH, tbreve: TorusElementG,
                       chars: Sequence[FiniteOrderCharacter], v: int, r: int,
                       probe: bool = False, sample: int | None = None,
                       seed: int = 0) -> dict:
    """Brute-force verification of the local equivariance identity.

    Scans the (v, r) window, compares L = U~_H phi_chi against the
    specialized G-side route, asserts a single proportionality constant and
    matches it against the two candidates |det A(tbreve)|^(+-(2m+eps)/2);
    the constant is reported in the integral normalization (c times the
    Hermitian coset count).  Currently requires m = 1, which covers the
    whole verification grid; larger m is exercised at indicator level by
    support_identity and at table level by apply_UH/apply_UG."""
    case = t.case
    if case.m != 1:
        raise NotImplementedError("value-level scan requires m = 1; use the "
                                  "table operators for larger m")
    if len(chars) != case.m:
        raise ValueError("need one character per torus block")
    _compat_check(t, tbreve, probe)
    t0 = time.perf_counter()
    scan = scan_operators(t, tbreve, v, r, sample, seed)
    support_equal = scan["support_mismatches"] == 0
    stats = scan["stats"]
    # character-level value agreement: the scanned minor residues feed every
    # character; equality of residues is checked structurally, and char-level
    # equality follows (and is re-checked here through the value exponents)
    chi = chars[0]
    def chi_key(res):
        if res in (None, "MIXED"):
            return res
        return tuple(chi.eval_coords(u, _tiny_ring(t.ctx)).key() for u in res)
    keys_ok = True
    ratios = set()
    for (cl, cr, same, kl, kr), _cnt in stats.items():
        if kl == "MIXED" or kr == "MIXED" or chi_key(kl) != chi_key(kr):
            keys_ok = False
        ratios.add(Fraction(cl, cr))
    proportional = support_equal and keys_ok and len(ratios) <= 1
    detA = tbreve.det_a()
    vtot = _det_val_total(detA)
    w2 = 2 * case.m + case.eps
    exponent2 = None
    matched = "none"
    if proportional and ratios:
        rho = ratios.pop()
        rho_exp = _frac_p_exponent(rho, t.ctx.p)
        if rho_exp is None:
            proportional = False
        else:
            # c * I_s = rho * p^(vtot*w2/2), in half-exponent units:
            exponent2 = 2 * rho_exp + vtot * w2
            if exponent2 == vtot * w2:
                matched = "minus"
            elif exponent2 == -vtot * w2:
                matched = "plus"
            if vtot == 0 and exponent2 == 0:
                matched = "identity"
    elif proportional:
        matched = "empty-support"
    unit_tokens = {}
    if case.eps:
        from .schwartz import _gamma_label
        if case.metaplectic:
            unit_tokens["gamma"] = {_gamma_label(detA): 1}
        if case.name == "U1" and t.ctx.ext == "unram2":
            unit_tokens["chi_tilde_sign"] = -1 if vtot % 2 else 1
    ok = support_equal and proportional and matched != "none"
    return {
        "case": case.name, "p": t.ctx.p, "ext": t.ctx.ext,
        "m": case.m, "n": case.n,
        "t": t.label(), "t_breve": tbreve.label(),
        "chars": [repr(c) for c in chars],
        "window": {"v": v, "r": r},
        "support_equal": support_equal,
        "proportional": proportional,
        "constant_pexp": (exponent2 // 2 if exponent2 is not None and exponent2 % 2 == 0
                          else (f"{exponent2}/2" if exponent2 is not None else None)),
        "matched_candidate": matched,
        "unit_tokens": unit_tokens,
        "cells_checked": scan["cells_checked"],
        "h_cosets": scan["h_cosets"], "a_cosets": scan["a_cosets"],
        "I_s": scan["I_s"],
        "sampled": scan["sampled"],
        "pass": ok,
        "wall_time_ms": int(1000 * (time.perf_counter() - t0)),
    }


_TINY_RINGS: dict = {}


def _tiny_ring(ctx: RingCtx) -> CycloRing:
    key = (ctx.p, ctx.ext, ctx.N)
    if key not in _TINY_RINGS:
        from .cyclo import ring_for
        tame = ctx.p - 1 if ctx.ext != "unram2" else ctx.p * ctx.p - 1
        _TINY_RINGS[key] = ring_for(ctx.p, tame, ctx.p ** max(ctx.N - 1, 1))
    return _TINY_RINGS[key]


def support_identity(t: TorusElementH, tbreve: TorusElementG, v: int, r: int,
                     probe: bool = False, sample: int | None = None,
                     seed: int = 0) -> dict:
    """Indicator-level identity from the proof: the vol-normalized coset
    averages of 1_{V_supp} on both sides are {0,1}-valued and share the same
    support.  All four cases run here (no psi, gamma or characters)."""
    _compat_check(t, tbreve, probe)
    t0 = time.perf_counter()
    scan = scan_operators(t, tbreve, v, r, sample, seed)
    zero_one_l = set(scan["fibers_l"]) <= {0, 1}
    zero_one_r = set(scan["fibers_r"]) <= {0, 1}
    support_equal = scan["support_mismatches"] == 0
    ok = zero_one_l and zero_one_r and support_equal
    return {
        "case": t.case.name, "p": t.ctx.p, "ext": t.ctx.ext,
        "m": t.case.m, "n": t.case.n,
        "t": t.label(), "t_breve": tbreve.label(),
        "window": {"v": v, "r": r},
        "support_equal": support_equal,
        "zero_one_valued": zero_one_l and zero_one_r,
        "fibers_h": scan["fibers_l"], "fibers_g": scan["fibers_r"],
        "support_mismatches": scan["support_mismatches"],
        "cells_checked": scan["cells_checked"],
        "h_cosets": scan["h_cosets"], "a_cosets": scan["a_cosets"],
        "sampled": scan["sampled"],
        "probe": probe,
        "pass": ok if not probe else True,
        "identity_holds": ok,
        "wall_time_ms": int(1000 * (time.perf_counter() - t0)),
    }
