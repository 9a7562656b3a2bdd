"""Hecke symmetries: validation, skew-inverse, C-matrix and R-trace.

A Hecke symmetry is an operator R on C^N (x) C^N over Q[[h]] satisfying the
braid relation R12 R23 R12 = R23 R12 R23 and the quadratic condition
(R - e^h I)(R + e^{-h} I) = 0.  It is skew-invertible when some Psi solves
tr_2 R12 Psi23 = P = tr_2 Psi12 R23.
"""

from __future__ import annotations

import itertools
from typing import Optional, Tuple

from .series import MultiSeries, Rat, TruncationContext, rat
from .tensor import TensorOp


class BraidViolation(Exception):
    pass


class HeckeViolation(Exception):
    pass


class NotSkewInvertible(HeckeViolation):
    pass


def _omega(ctx) -> MultiSeries:
    """e^h - e^{-h}."""
    return ctx.exp_atom(1, "h") - ctx.exp_atom(-1, "h")


class HeckeSymmetry:
    """A validated skew-invertible Hecke symmetry with cached companions."""

    __slots__ = ("ctx", "N", "R", "psi_inv", "c_matrix", "rank_M")

    def __init__(self, ctx, N, R, psi_inv, c_matrix, rank_M=None):
        self.ctx = ctx
        self.N = N
        self.R = R
        self.psi_inv = psi_inv
        self.c_matrix = c_matrix
        self.rank_M = rank_M

    # ---- R-trace -----------------------------------------------------------

    def r_trace(self, A: TensorOp, leg: int = 0) -> TensorOp:
        """Weighted trace over one leg: contract A with C on that leg."""
        C = self.c_matrix.embed([leg], A.m)
        return (A @ C).partial_trace(leg)

    def r_trace_multi(self, A: TensorOp, legs) -> TensorOp:
        """R-trace over several legs, taken left to right."""
        out = A
        for leg in sorted(legs, reverse=True):
            out = self.r_trace(out, leg)
        return out


def dj_r_matrix(N: int, ctx) -> TensorOp:
    """Standard q-deformed flip: e^{d_ij h} e_ij(x)e_ji + (e^h-e^{-h}) sum_{i<j} e_ii(x)e_jj."""
    omega = _omega(ctx)
    eh = ctx.exp_atom(1, "h")
    one = ctx.one()
    ent = {}
    for i in range(N):
        for j in range(N):
            ent[((i, j), (j, i))] = eh if i == j else one
    for i in range(N):
        for j in range(N):
            if i < j:
                key = ((i, j), (i, j))
                ent[key] = ent[key] + omega if key in ent else omega
    return TensorOp(ctx, N, 2, ent)


def dj_psi_matrix(N: int, ctx) -> TensorOp:
    """Closed-form skew-inverse of dj_r_matrix."""
    omega = _omega(ctx)
    ent = {}
    for i in range(N):
        for j in range(N):
            ent[((i, j), (j, i))] = ctx.exp_atom(-1, "h") if i == j else ctx.one()
    for i in range(N):
        for j in range(N):
            if i < j:
                key = ((i, j), (i, j))
                corr = -(omega * ctx.exp_atom(2 * (i - j), "h"))
                ent[key] = ent[key] + corr if key in ent else corr
    return TensorOp(ctx, N, 2, ent)


def check_braid(R: TensorOp) -> Tuple[bool, Optional[tuple]]:
    A = R.embed([0, 1], 3)
    B = R.embed([1, 2], 3)
    return (A @ B @ A).equal(B @ A @ B)


def check_hecke_condition(R: TensorOp) -> Tuple[bool, Optional[tuple]]:
    ctx = R.ctx
    I = TensorOp.identity(ctx, R.N, 2)
    lhs = (R - I.scale(ctx.exp_atom(1, "h"))) @ (R + I.scale(ctx.exp_atom(-1, "h")))
    return lhs.is_zero()


def check_inverse_formula(R: TensorOp) -> Tuple[bool, Optional[tuple]]:
    ctx = R.ctx
    I = TensorOp.identity(ctx, R.N, 2)
    rinv = R - I.scale(_omega(ctx))
    return (R @ rinv).equal(I)


def skew_inverse(R: TensorOp) -> TensorOp:
    """Solve tr_2 R12 Psi23 = P for Psi by exact linear algebra.

    Writing the equation entrywise, Psi[(m,c),(b,c'')] satisfies
        sum_{b,m} R[(a,b),(a'',m)] Psi[(m,c),(b,c'')] = d_{a c''} d_{c a''}.
    For fixed (c, c'') this is the same N^2 x N^2 system
        S[(a,a''),(b,m)] = R[(a,b),(a'',m)]
    against unit right-hand sides, so one h-adic inverse of S gives Psi:
        Psi[(m,c),(b,c'')] = Sinv[(b,m),(c'',c)].
    """
    ctx = R.ctx
    N = R.N
    ent = {}
    for (r, c), v in R.entries.items():
        a, b = r
        a2, m = c
        ent[((a, a2), (b, m))] = v
    S = TensorOp(ctx, N, 2, ent)
    try:
        Sinv = S.invert_h_adic()
    except Exception as e:
        raise NotSkewInvertible(str(e)) from e
    psi_ent = {}
    for (r, c), v in Sinv.entries.items():
        b, m = r
        c2, cc = c
        psi_ent[((m, cc), (b, c2))] = v
    return TensorOp(ctx, N, 2, psi_ent)


def verify_skew_identities(R: TensorOp, Psi: TensorOp) -> Tuple[bool, Optional[tuple]]:
    """Both trace equations plus the ordered-product and transposed forms."""
    ctx = R.ctx
    N = R.N
    P = TensorOp.permutation(ctx, N)
    I2 = TensorOp.identity(ctx, N, 2)
    # tr_2 R12 Psi23 = P = tr_2 Psi12 R23 on three legs
    lhs1 = (R.embed([0, 1], 3) @ Psi.embed([1, 2], 3)).partial_trace(1)
    ok, w = lhs1.equal(P)
    if not ok:
        return False, ("tr2 R12 Psi23", w)
    lhs2 = (Psi.embed([0, 1], 3) @ R.embed([1, 2], 3)).partial_trace(1)
    ok, w = lhs2.equal(P)
    if not ok:
        return False, ("tr2 Psi12 R23", w)
    PR, PPsi = P @ R, P @ Psi
    RP, PsiP = R @ P, Psi @ P
    for tag, got in (
            ("PR.RL.PPsi", PR.ordered_product(PPsi, [0], "RL")),
            ("PR.LR.PPsi", PR.ordered_product(PPsi, [0], "LR")),
            ("RP.LR.PsiP", RP.ordered_product(PsiP, [0], "LR")),
            ("RP.RL.PsiP", RP.ordered_product(PsiP, [0], "RL"))):
        ok, w = got.equal(I2)
        if not ok:
            return False, (tag, w)
    for i in (0, 1):
        ok, w = (PR.transpose_site(i) @ PPsi.transpose_site(i)).equal(I2)
        if not ok:
            return False, (f"(PR)^t{i+1}(PPsi)^t{i+1}", w)
        ok, w = (RP.transpose_site(i) @ PsiP.transpose_site(i)).equal(I2)
        if not ok:
            return False, (f"(RP)^t{i+1}(PsiP)^t{i+1}", w)
    return True, None


def validate(R: TensorOp) -> HeckeSymmetry:
    """Validate a candidate symmetry and attach its solved companions."""
    ok, w = check_braid(R)
    if not ok:
        raise BraidViolation(f"braid relation fails at {w}")
    ok, w = check_hecke_condition(R)
    if not ok:
        raise HeckeViolation(f"quadratic condition fails at {w}")
    ok, w = check_inverse_formula(R)
    if not ok:
        raise HeckeViolation(f"inverse formula fails at {w}")
    psi = skew_inverse(R)
    ok, w = verify_skew_identities(R, psi)
    if not ok:
        raise NotSkewInvertible(f"skew-inverse identity {w[0]} fails at {w[1]}")
    c_matrix = psi.partial_trace(1)
    return HeckeSymmetry(R.ctx, R.N, R, psi, c_matrix)


def builtin_dj(N: int, ctx) -> HeckeSymmetry:
    """The built-in q-flip family; solved Psi is cross-checked against the closed form."""
    sym = validate(dj_r_matrix(N, ctx))
    ok, w = sym.psi_inv.equal(dj_psi_matrix(N, ctx))
    if not ok:
        raise NotSkewInvertible(f"solved skew-inverse deviates from closed form at {w}")
    return sym
