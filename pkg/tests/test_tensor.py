"""Tests for the sparse tensor-leg operator layer."""

import itertools

import pytest

from qva.series import TruncationContext, rat
from qva.tensor import TensorOp, gauss_inverse


def ctx2():
    return TruncationContext(3, ["u"], {"u": 2})


class TestBasics:
    def test_permutation_squares_to_identity(self):
        ctx = ctx2()
        P = TensorOp.permutation(ctx, 2)
        ok, w = (P @ P).equal(TensorOp.identity(ctx, 2, 2))
        assert ok, w

    def test_embed_commutes_on_disjoint_legs(self):
        ctx = ctx2()
        # X on leg 0 and Y on leg 2 of 3 legs commute
        X = TensorOp(ctx, 2, 1, {((0,), (1,)): ctx.one(),
                                 ((1,), (0,)): ctx.const(2)})
        Y = TensorOp(ctx, 2, 1, {((0,), (0,)): ctx.const(3),
                                 ((1,), (0,)): ctx.one()})
        A = X.embed([0], 3)
        B = Y.embed([2], 3)
        ok, w = (A @ B).equal(B @ A)
        assert ok, w

    def test_partial_trace_of_permutation(self):
        ctx = ctx2()
        P = TensorOp.permutation(ctx, 2)
        # tr_2 P = Id on the remaining leg
        T = P.partial_trace(1)
        ok, w = T.equal(TensorOp.identity(ctx, 2, 1))
        assert ok, w

    def test_trace_multiplicativity_on_disjoint_legs(self):
        ctx = ctx2()
        X = TensorOp(ctx, 2, 1, {((0,), (0,)): ctx.const(5),
                                 ((1,), (1,)): ctx.const(7),
                                 ((0,), (1,)): ctx.one()})
        A = X.embed([0], 2) @ X.embed([1], 2)
        full = A.partial_trace(1).partial_trace(0)
        # tr(X (x) X) = (tr X)^2 = 144
        assert full.entry((), ()).constant_term() == 144

    def test_transpose_site_involution_and_trace_invariance(self):
        ctx = ctx2()
        P = TensorOp.permutation(ctx, 2)
        t = P.transpose_site(0)
        ok, w = t.transpose_site(0).equal(P)
        assert ok, w
        a = P.partial_trace(0).partial_trace(0)
        b = t.partial_trace(0).partial_trace(0)
        ok, w = a.equal(b)
        assert ok, w

    def test_scalar_part(self):
        ctx = ctx2()
        s = ctx.from_terms({(1, 0): rat(1), (0, 0): rat(2)})  # 2 + h
        A = TensorOp.identity(ctx, 2, 2).scale(s)
        got = A.scalar_part()
        ok, w = got.equal_within_windows(s)
        assert ok, w
        B = A + TensorOp(ctx, 2, 2, {((0, 0), (1, 1)): ctx.one()})
        with pytest.raises(ValueError):
            B.scalar_part()


class TestOrderedProduct:
    def test_reduces_to_matmul_when_one_block_empty(self):
        ctx = ctx2()
        P = TensorOp.permutation(ctx, 2)
        A = P + TensorOp.identity(ctx, 2, 2).scale(ctx.h())
        B = P.scale(ctx.const(3)) + TensorOp(
            ctx, 2, 2, {((0, 1), (0, 1)): ctx.one()})
        # all legs in block 1: A .LR B = A B ; all in block 2: A .LR B = B A
        ok, w = A.ordered_product(B, [0, 1]).equal(A @ B)
        assert ok, w
        ok, w = A.ordered_product(B, []).equal(B @ A)
        assert ok, w

    def test_rl_is_swapped_lr(self):
        ctx = ctx2()
        A = TensorOp.permutation(ctx, 2) + TensorOp.identity(ctx, 2, 2)
        B = TensorOp(ctx, 2, 2, {((0, 1), (1, 0)): ctx.h(),
                                 ((1, 1), (1, 1)): ctx.one()})
        ok, w = A.ordered_product(B, [0], "RL").equal(
            B.ordered_product(A, [0], "LR"))
        assert ok, w

    def test_factorized_case(self):
        # For A = A1 (x) A2 and B = B1 (x) B2 the blocked product is
        # A1 B1 (x) B2 A2 exactly.
        ctx = ctx2()
        a1 = TensorOp(ctx, 2, 1, {((0,), (1,)): ctx.one(),
                                  ((1,), (1,)): ctx.const(2)})
        a2 = TensorOp(ctx, 2, 1, {((0,), (0,)): ctx.const(3),
                                  ((1,), (0,)): ctx.one()})
        b1 = TensorOp(ctx, 2, 1, {((1,), (0,)): ctx.const(5)})
        b2 = TensorOp(ctx, 2, 1, {((0,), (1,)): ctx.const(7),
                                  ((1,), (1,)): ctx.one()})
        A = a1.embed([0], 2) @ a2.embed([1], 2)
        B = b1.embed([0], 2) @ b2.embed([1], 2)
        want = (a1 @ b1).embed([0], 2) @ (b2 @ a2).embed([1], 2)
        ok, w = A.ordered_product(B, [0]).equal(want)
        assert ok, w


class TestInverse:
    def test_gauss_inverse_oracle(self):
        m = [[rat(2), rat(1)], [rat(1), rat(1)]]
        inv = gauss_inverse(m)
        assert inv == [[rat(1), rat(-1)], [rat(-1), rat(2)]]

    def test_h_adic_inverse_roundtrip(self):
        ctx = ctx2()
        I = TensorOp.identity(ctx, 2, 2)
        P = TensorOp.permutation(ctx, 2)
        A = I.scale(ctx.const(2)) + P.scale(ctx.h())
        Ainv = A.invert_h_adic()
        ok, w = (A @ Ainv).equal(I)
        assert ok, w
        ok, w = (Ainv @ A).equal(I)
        assert ok, w

    def test_h_adic_inverse_of_permutation_like(self):
        ctx = ctx2()
        I = TensorOp.identity(ctx, 2, 2)
        P = TensorOp.permutation(ctx, 2)
        q = ctx.exp_atom(rat(1), "h")  # e^h
        A = P.scale(q) + I.scale(ctx.h())
        Ainv = A.invert_h_adic()
        ok, w = (Ainv @ A).equal(I)
        assert ok, w


class TestSerialization:
    def test_roundtrip_bit_exact(self):
        ctx = ctx2()
        P = TensorOp.permutation(ctx, 2)
        A = P.scale(ctx.exp_atom(rat(1), "h")) + TensorOp.identity(
            ctx, 2, 2).scale(ctx.from_terms({(0, 1): rat(1, 3)}))
        s = A.to_json()
        B = TensorOp.from_json(s)
        assert B.to_json() == s
        ok, w = A.equal(B)
        assert ok, w

    def test_window_survives_roundtrip(self):
        ctx = ctx2()
        u = ctx.var("u", 1)
        uinv = ctx.var("u", -1)
        lossy = (u + ctx.one()) * (uinv + ctx.one())  # degrades validity
        A = TensorOp(ctx, 2, 1, {((0,), (0,)): lossy})
        B = TensorOp.from_json(A.to_json())
        assert B.entry((0,), (0,)).win == lossy.win
