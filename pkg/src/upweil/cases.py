"""The four dual-pair cases and their block shapes.

OS0/OS1 live over K = F (symplectic x orthogonal), U0/U1 over a quadratic
etale K (quasi-split unitary pairs).  ``eps`` distinguishes even (0) from
odd (1) H-side degree; the H-side form matrix J has an extra 1 appended
when eps = 1.
"""

from __future__ import annotations

from .rings import RingCtx, ScaledResidue

_CASES = {
    "OS0": ("field", 0),
    "OS1": ("field", 1),
    "U0": ("split", 0, "unram2"),
    "U1": ("split", 1, "unram2"),
}


class CaseTag:
    def __init__(self, name: str, m: int, n: int):
        if name not in _CASES:
            raise ValueError(f"unknown case {name!r}")
        if not (1 <= m <= n):
            raise ValueError("need 1 <= m <= n")
        self.name = name
        self.eps = _CASES[name][1]
        self.m = m
        self.n = n
        self.rows = 2 * m + self.eps
        self.metaplectic = name == "OS1"

    def compatible_ext(self, ext: str) -> bool:
        if self.name.startswith("OS"):
            return ext == "field"
        return ext in ("split", "unram2")

    def check_ring(self, ctx: RingCtx) -> None:
        if not self.compatible_ext(ctx.ext):
            raise ValueError(f"case {self.name} needs "
                             f"{'K = F' if self.name.startswith('OS') else 'a quadratic K'},"
                             f" got ext={ctx.ext!r}")

    def j_matrix(self, ctx: RingCtx) -> list:
        """J_{2m+eps}: antidiagonal identity blocks, extra 1 for eps = 1."""
        self.check_ring(ctx)
        m, d = self.m, self.rows
        zero, one = ScaledResidue.zero(ctx), ScaledResidue.one(ctx)
        J = [[zero for _ in range(d)] for _ in range(d)]
        for i in range(m):
            J[i][m + i] = one
            J[m + i][i] = one
        if self.eps:
            J[2 * m][2 * m] = one
        return J

    def theta_matrix(self, ctx: RingCtx) -> list:
        """The Weyl element used by the p-adic Petersson pairing (equals J)."""
        return self.j_matrix(ctx)

    def __repr__(self):
        return f"CaseTag({self.name}, m={self.m}, n={self.n})"
