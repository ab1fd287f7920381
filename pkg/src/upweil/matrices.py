"""Small exact matrices over a truncated p-adic algebra.

Matrices are plain lists of lists of ScaledResidue.  Sizes here are tiny
(at most 2m+eps <= 6), so determinants use cofactor expansion; precision
tracking rides on the ScaledResidue arithmetic.
"""

from __future__ import annotations

from .rings import RingCtx, ScaledResidue


def mat_identity(ctx: RingCtx, n: int) -> list:
    z, o = ScaledResidue.zero(ctx), ScaledResidue.one(ctx)
    return [[o if i == j else z for j in range(n)] for i in range(n)]


def mat_diag(entries: list) -> list:
    ctx = entries[0].ctx
    z = ScaledResidue.zero(ctx)
    n = len(entries)
    return [[entries[i] if i == j else z for j in range(n)] for i in range(n)]


def mat_mul(A: list, B: list) -> list:
    n, k, m = len(A), len(B), len(B[0])
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = A[i][0] * B[0][j]
            for t in range(1, k):
                acc = acc + A[i][t] * B[t][j]
            row.append(acc)
        out.append(row)
    return out


def mat_add(A: list, B: list) -> list:
    return [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def mat_neg(A: list) -> list:
    return [[-a for a in row] for row in A]


def mat_transpose(A: list) -> list:
    return [list(col) for col in zip(*A)]


def mat_bar(A: list) -> list:
    return [[a.bar() for a in row] for row in A]


def mat_bar_transpose(A: list) -> list:
    return mat_transpose(mat_bar(A))


def mat_scale(A: list, c: ScaledResidue) -> list:
    return [[c * a for a in row] for row in A]


def mat_det(A: list) -> ScaledResidue:
    n = len(A)
    if n == 1:
        return A[0][0]
    if n == 2:
        return A[0][0] * A[1][1] - A[0][1] * A[1][0]
    acc = None
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in A[1:]]
        term = A[0][j] * mat_det(minor)
        if j % 2:
            term = -term
        acc = term if acc is None else acc + term
    return acc


def leading_minor_dets(A: list, upto: int) -> list:
    return [mat_det([row[:j] for row in A[:j]]) for j in range(1, upto + 1)]


def mat_is_zero(A: list) -> bool:
    return all(x.is_zero() for row in A for x in row)


def mat_equal(A: list, B: list) -> bool:
    return all(a == b for ra, rb in zip(A, B) for a, b in zip(ra, rb))


def mat_is_integral(A: list) -> bool:
    return all(x.is_integral() for row in A for x in row)


def group_defect(g: list, J: list) -> list:
    """^t gbar J g - J; zero iff g preserves the J-form at precision."""
    return mat_add(mat_mul(mat_mul(mat_bar_transpose(g), J), g), mat_neg(J))


def is_form_preserving(g: list, J: list) -> bool:
    return mat_is_zero(group_defect(g, J))


def mat_inverse(A: list) -> list:
    """Inverse via adjugate; entries must make det invertible."""
    n = len(A)
    det = mat_det(A)
    dinv = det.inverse()
    if n == 1:
        return [[dinv]]
    adj = []
    for i in range(n):
        row = []
        for j in range(n):
            minor = [r[:i] + r[i + 1:] for k, r in enumerate(A) if k != j]
            c = mat_det(minor)
            if (i + j) % 2:
                c = -c
            row.append(c * dinv)
        adj.append(row)
    return adj
