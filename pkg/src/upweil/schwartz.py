"""Windowed Schwartz tables on (2m+eps) x n matrix space and Weil actions.

A MatrixWindow models the finite quotient p^-v M(O) / p^r M(O); a
SchwartzTable is a finitely supported function on its cells with exact
cyclotomic values.  Tables are immutable values: the H-action and the
Siegel-parabolic action return new tables on the minimal enclosing window
and refuse (loudly) to materialize windows beyond a hard cell cap.
"""

from __future__ import annotations

import itertools
import json
from typing import Iterator, Sequence

from .cases import CaseTag
from .chars import FiniteOrderCharacter, char_eval, chi_tilde_value, psi_eval_base
from .cyclo import CycloRing, CycloValue
from .matrices import (leading_minor_dets, mat_bar_transpose, mat_mul,
                       mat_transpose)
from .rings import INF, PrecisionError, RingCtx, ScaledResidue

MATERIALIZE_CAP = 3_000_000


class WindowOverflow(RuntimeError):
    """Requested materialization exceeds the window cap or the precision."""


class MatrixWindow:
    def __init__(self, ring: RingCtx, rows: int, cols: int, v: int, r: int):
        if v < 0 or r < 1:
            raise ValueError("need v >= 0 and r >= 1")
        if v + r > ring.N:
            raise ValueError(f"window v+r = {v + r} exceeds ring precision {ring.N}")
        self.ring = ring
        self.rows = rows
        self.cols = cols
        self.v = v
        self.r = r
        self.ncoords = ring.ncoords
        self.digits = ring.p ** (v + r)
        self.slots = rows * cols * self.ncoords

    def cell_count(self) -> int:
        return self.digits ** self.slots

    def cells(self) -> Iterator[tuple]:
        return itertools.product(range(self.digits), repeat=self.slots)

    def integral_cells(self) -> Iterator[tuple]:
        """Cells lying in M(O): digits divisible by p^v."""
        step = self.ring.p ** self.v
        vals = range(0, self.digits, step)
        return itertools.product(vals, repeat=self.slots)

    def cell_matrix(self, cell: tuple) -> list:
        """The canonical representative as a ScaledResidue matrix."""
        ring = self.ring
        nc = self.ncoords
        out = []
        idx = 0
        for _ in range(self.rows):
            row = []
            for _ in range(self.cols):
                coords = tuple(cell[idx + t] for t in range(nc))
                row.append(ScaledResidue(ring, coords, self.v, self.v + self.r))
                idx += nc
            out.append(row)
        return out

    def entry_digits(self, x: ScaledResidue):
        """Digits of an element of p^-v O / p^r O, or None if outside."""
        ring = self.ring
        e, v = x.e, self.v
        mod = self.digits
        if e <= v:
            f = ring.p ** (v - e)
            if x.prec + (v - e) < v + self.r:
                raise PrecisionError("entry not known to window level")
            return tuple((a * f) % mod for a in x.coords)
        f = ring.p ** (e - v)
        if x.prec < e + self.r:
            raise PrecisionError("entry not known to window level")
        out = []
        for a in x.coords:
            if a % f:
                return None
            out.append((a // f) % mod)
        return tuple(out)

    def matrix_cell(self, M: list):
        """Cell key of a matrix, or None if it lies outside p^-v M(O)."""
        key = []
        for row in M:
            for x in row:
                d = self.entry_digits(x)
                if d is None:
                    return None
                key.extend(d)
        return tuple(key)

    def descriptor(self) -> dict:
        return {"rows": self.rows, "cols": self.cols, "v": self.v, "r": self.r,
                "ring": self.ring.descriptor()}

    def same_shape(self, other: "MatrixWindow") -> bool:
        return (self.rows, self.cols) == (other.rows, other.cols) and \
            self.ring is other.ring

    def __repr__(self):
        return (f"MatrixWindow({self.rows}x{self.cols}, v={self.v}, r={self.r}, "
                f"p={self.ring.p}, ext={self.ring.ext})")


class SchwartzTable:
    """Sparse table of exact values on a window, plus metaplectic bookkeeping.

    ``gamma`` counts opaque gamma(det A, psi/2) factors by canonical label;
    tables with different gamma content never compare equal.
    """

    def __init__(self, window: MatrixWindow, values: dict, cyclo: CycloRing,
                 gamma: dict | None = None, sign: int = 1):
        self.window = window
        self.values = {k: v for k, v in values.items() if not v.is_zero()}
        self.cyclo = cyclo
        self.gamma = dict(gamma or {})
        self.sign = sign

    def value_at_cell(self, cell: tuple) -> CycloValue:
        return self.values.get(cell, self.cyclo.zero())

    def lookup(self, M: list) -> CycloValue:
        """Value of the table, viewed as a function on K-space, at M."""
        cell = self.window.matrix_cell(M)
        if cell is None:
            return self.cyclo.zero()
        return self.values.get(cell, self.cyclo.zero())

    def support_size(self) -> int:
        return len(self.values)

    def value_multiset(self) -> dict:
        out: dict = {}
        for v in self.values.values():
            out[v.key()] = out.get(v.key(), 0) + 1
        return out

    def __eq__(self, other):
        if not isinstance(other, SchwartzTable):
            return NotImplemented
        return (self.window.same_shape(other.window)
                and (self.window.v, self.window.r) == (other.window.v, other.window.r)
                and self.gamma == other.gamma and self.sign == other.sign
                and self.values == other.values)

    def jsonable(self) -> dict:
        cells = []
        for cell in sorted(self.values):
            cells.append({"cell": "".join(f"{d:0{len(str(self.window.digits - 1))}d}"
                                          for d in cell),
                          "digits": list(cell),
                          "value": self.values[cell].jsonable()})
        return {"window": self.window.descriptor(),
                "cyclo_order": self.cyclo.order,
                "gamma": self.gamma, "sign": self.sign, "cells": cells}

    def dump_json(self) -> str:
        return json.dumps(self.jsonable(), sort_keys=True)

    def __repr__(self):
        return f"SchwartzTable({self.window!r}, support={len(self.values)})"


# --- the distinguished Schwartz function ------------------------------------


def in_lower_upper(X1: list) -> bool:
    """Membership in B^-_m(O) B_m(O): integral entries and unit leading
    principal minors."""
    for row in X1:
        for x in row:
            if not x.is_integral():
                return False
    return all(d.is_unit() for d in leading_minor_dets(X1, len(X1)))


def in_lower_upper_oracle(ctx: RingCtx, level: int, m: int) -> set:
    """All products of integral lower- and upper-triangular invertible
    matrices mod p^level, as tuples of coordinate digits (test oracle)."""
    pk = ctx.pk(level)
    units = list(ctx.units(level))
    def all_elems():
        return itertools.product(range(pk), repeat=ctx.ncoords)
    def tri(lower: bool):
        diag_choices = itertools.product(units, repeat=m)
        off_positions = [(i, j) for i in range(m) for j in range(m)
                         if (i > j if lower else i < j)]
        for diag in diag_choices:
            for offs in itertools.product(all_elems(), repeat=len(off_positions)):
                M = [[None] * m for _ in range(m)]
                for i in range(m):
                    M[i][i] = diag[i]
                for (i, j), val in zip(off_positions, offs):
                    M[i][j] = tuple(val)
                for i in range(m):
                    for j in range(m):
                        if M[i][j] is None:
                            M[i][j] = ctx.czero()
                yield M
    def mul(A, B):
        return [[_csum(ctx, [ctx.cmul(A[i][t], B[t][j], level) for t in range(m)], level)
                 for j in range(m)] for i in range(m)]
    out = set()
    for L in tri(True):
        for U in tri(False):
            P = mul(L, U)
            out.add(tuple(x for row in P for c in row for x in c))
    return out


def _csum(ctx, xs, level):
    acc = xs[0]
    for x in xs[1:]:
        acc = ctx.cadd(acc, x, level)
    return acc


def phi_chi_value(case: CaseTag, chars: Sequence[FiniteOrderCharacter],
                  Y: list, cyclo: CycloRing) -> CycloValue:
    """Closed-form evaluation of the distinguished Schwartz function at an
    exact matrix: product of chi_j at the leading minors of the X1 block on
    its support, zero off it."""
    m, n = case.m, case.n
    if len(chars) != m:
        raise ValueError(f"need {m} characters, got {len(chars)}")
    X1 = [row[:m] for row in Y[:m]]
    # integrality of X2 and the bottom strip
    for row in Y[:m]:
        for x in row[m:]:
            if not x.is_integral():
                return cyclo.zero()
    for row in Y[m:]:
        for x in row:
            if not x.is_integral():
                return cyclo.zero()
    if not in_lower_upper(X1):
        return cyclo.zero()
    val = cyclo.one()
    for chi, d in zip(chars, leading_minor_dets(X1, m)):
        val = val * char_eval(chi, d, cyclo)
    return val


def build_phi_chi(chars: Sequence[FiniteOrderCharacter], window: MatrixWindow,
                  case: CaseTag, cyclo: CycloRing) -> SchwartzTable:
    """Materialize phi_chi on the window.  The support is contained in the
    integral cells, so only those are visited; the window must satisfy
    r >= max conductor of the characters."""
    case.check_ring(window.ring)
    if window.rows != case.rows or window.cols != case.n:
        raise ValueError("window shape does not match the case")
    rmax = max(chi.level for chi in chars)
    if window.r < rmax:
        raise ValueError(f"window level r={window.r} below character conductor {rmax}")
    ring = window.ring
    count = ring.p ** (window.r * window.slots)
    if count > MATERIALIZE_CAP:
        raise WindowOverflow(f"{count} integral cells exceed the cap")
    values = {}
    for cell in window.integral_cells():
        Y = window.cell_matrix(cell)
        val = phi_chi_value(case, chars, Y, cyclo)
        if not val.is_zero():
            values[cell] = val
    return SchwartzTable(window, values, cyclo)


# --- group actions -----------------------------------------------------------


def _depth(M: list) -> int:
    """max(0, -valuation) over entries: the denominator depth."""
    d = 0
    for row in M:
        for x in row:
            v = x.valuation()
            if v is not INF and v < 0:
                d = max(d, -int(v))
    return d


def _materialized_window(window: MatrixWindow, v2: int, r2: int) -> MatrixWindow:
    w = MatrixWindow(window.ring, window.rows, window.cols, v2, r2)
    if w.cell_count() > MATERIALIZE_CAP:
        raise WindowOverflow(
            f"output window has {w.cell_count()} cells (cap {MATERIALIZE_CAP}); "
            "use the pointwise evaluators instead")
    return w


def act_h(table: SchwartzTable, h: list, case: CaseTag,
          J: list | None = None) -> SchwartzTable:
    """omega(1, h) table: X -> table(^t h X), for h in H at working precision.

    The output lives on the minimal enclosing window."""
    ring = table.window.ring
    if J is None:
        J = case.j_matrix(ring)
    from .matrices import is_form_preserving, mat_inverse
    if not is_form_preserving(h, J):
        raise ValueError("h does not preserve the form at working precision")
    th = mat_transpose(h)
    th_inv = mat_inverse(th)
    v2 = table.window.v + _depth(th_inv)
    r2 = table.window.r + _depth(th)
    out_w = _materialized_window(table.window, v2, r2)
    values = {}
    for cell in out_w.cells():
        X = out_w.cell_matrix(cell)
        val = table.lookup(mat_mul(th, X))
        if not val.is_zero():
            values[cell] = val
    return SchwartzTable(out_w, values, table.cyclo, table.gamma, table.sign)


def _abs_power_value(ctx: RingCtx, detA: ScaledResidue, weight2: int,
                     cyclo: CycloRing) -> CycloValue:
    """|det A|^(weight2/2) as an exact value; weight2 = 2m + eps."""
    v = detA.valuation()
    if v is INF:
        raise ValueError("det A is zero at precision")
    vtot = int(v) * (2 if ctx.ext == "unram2" else 1)
    if ctx.ext == "split":
        vs = detA.coord_valuations()
        vtot = int(vs[0]) + int(vs[1])
    k = -vtot * weight2
    out = cyclo.one().scale_p(k // 2)
    if k % 2:
        # k negative halves: fold one (p^(1/2))^(-1)... keep exact: use half flag
        # p^(k/2) = p^((k-1)/2) * sqrt(p)
        out = cyclo.one().scale_p((k - 1) // 2).scale_half(1)
    return out


def _gamma_label(detA: ScaledResidue) -> str:
    v = detA.valuation()
    if v is INF:
        return "gamma(0)"
    u = detA.scale_p(-int(v))  # unit part
    return f"gamma(val={int(v)},u={u.coords[0] % detA.ctx.p})"


def act_siegel(table: SchwartzTable, A: list, B: list, case: CaseTag,
               sign: int = 1) -> SchwartzTable:
    """Action of the Siegel-parabolic element [[A, B], [0, ^t Abar^-1]].

    Value at X: psi(1/2 Tr(B ^tAbar ^tXbar J X)) * chitilde^eps(det A)
    * |det A|^((2m+eps)/2) * table(XA), with the OS1 case carrying the
    metaplectic sign and an opaque gamma token."""
    ring = table.window.ring
    case.check_ring(ring)
    from .matrices import mat_det, mat_inverse
    detA = mat_det(A)
    J = case.j_matrix(ring)
    # membership: B ^tAbar must be Hermitian for the element to lie in G
    BAt = mat_mul(B, mat_bar_transpose(A))
    herm_defect = [[BAt[i][j] - BAt[j][i].bar() for j in range(case.n)]
                   for i in range(case.n)]
    if not all(x.is_zero() for row in herm_defect for x in row):
        raise ValueError("ill-formed Siegel element: B ^tAbar not Hermitian")
    A_inv = mat_inverse(A)
    v2 = table.window.v + _depth(A_inv)
    r2 = max(table.window.r + _depth(A), v2 + _depth(BAt) + 1)
    out_w = _materialized_window(table.window, v2, r2)
    scalar = _abs_power_value(ring, detA, 2 * case.m + case.eps, table.cyclo)
    if case.eps and case.name == "U1":
        scalar = scalar * chi_tilde_value(ring, detA, table.cyclo)
    gamma = dict(table.gamma)
    if case.metaplectic:
        lbl = _gamma_label(detA)
        gamma[lbl] = gamma.get(lbl, 0) - 1
        gamma = {k: v for k, v in gamma.items() if v}
    half = ScaledResidue.from_int(ring, pow(2, -1, ring.pk(ring.N)))
    values = {}
    for cell in out_w.cells():
        X = out_w.cell_matrix(cell)
        base = table.lookup(mat_mul(X, A))
        if base.is_zero():
            continue
        G = gram_matrix(X, J)
        tr = _trace(mat_mul(BAt, G))
        ps = psi_eval_base(half * tr, table.cyclo)
        values[cell] = base * ps * scalar
    return SchwartzTable(out_w, values, table.cyclo, gamma, table.sign * sign)


def _trace(M: list) -> ScaledResidue:
    acc = M[0][0]
    for i in range(1, len(M)):
        acc = acc + M[i][i]
    return acc


def gram_matrix(X: list, J: list) -> list:
    """^t Xbar J X; Hermitian by construction."""
    return mat_mul(mat_mul(mat_bar_transpose(X), J), X)


def gram(X: list, case: CaseTag, ctx: RingCtx) -> list:
    G = gram_matrix(X, case.j_matrix(ctx))
    n = len(G)
    for i in range(n):
        for j in range(n):
            if not (G[i][j] - G[j][i].bar()).is_zero():
                raise AssertionError("gram output failed Hermitian symmetry")
    return G
