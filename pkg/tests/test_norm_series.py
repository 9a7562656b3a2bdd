"""Tests for the product-normalizing series bundle."""

import pytest

from qva.series import NormSeriesBundle, TruncationContext, rat


def check_gbar_equation(M, K=3):
    b = NormSeriesBundle(M, K)
    ctx = TruncationContext(K, ["x"], {"x": 4})
    one = ctx.one()
    x = ctx.var("x")
    prod = one
    for j in range(M):
        image = x * ctx.exp_atom(-2 * j, "h")
        prod = prod * b.gbar_at(image, "x")
    rhs = (one - x * ctx.exp_atom(-2 * (M - 1), "h")) * (one - x).invert("x")
    ok, w = prod.equal_within_windows(rhs)
    assert ok, w


def check_fbar_equation(M, K=3):
    b = NormSeriesBundle(M, K)
    ctx = TruncationContext(K, ["x"], {"x": 4})
    one = ctx.one()
    x = ctx.var("x")
    prod = one
    for j in range(M):
        image = x * ctx.exp_atom(-2 * j, "h")
        prod = prod * b.fbar_at(image, "x")
    rhs = (one - x * ctx.exp_atom(-2 * (M - 1), "h")) \
        * (one - x * ctx.exp_atom(-2 * M, "h")).invert("x")
    ok, w = prod.equal_within_windows(rhs)
    assert ok, w


def check_f_equation(M, a=1, K=3):
    b = NormSeriesBundle(M, K, a)
    ctx = TruncationContext(K, ["u"], {"u": 2})
    prod = ctx.one()
    for j in range(M):
        # f(u + a*j*h): exponentialized argument e^{-2u/a} e^{-2jh}
        image = b.exp_arg(ctx, {"u": 1}, beta=rat(a) * j)
        prod = prod * b.f_at(image, "u")
    lhs_img = b.exp_arg(ctx, {"u": 1})
    rhs = (ctx.one() - lhs_img * ctx.exp_atom(-2 * (M - 1), "h")) \
        * (ctx.one() - lhs_img * ctx.exp_atom(-2 * M, "h")).invert("u")
    ok, w = prod.equal_within_windows(rhs)
    assert ok, w


class TestGbar:
    @pytest.mark.parametrize("M", [1, 2, 3])
    def test_functional_equation(self, M):
        check_gbar_equation(M)

    def test_m1_is_one(self):
        b = NormSeriesBundle(1, 3)
        ctx = TruncationContext(3, ["x"], {"x": 3})
        ok, w = b.gbar_in(ctx).equal_within_windows(ctx.one())
        assert ok, w

    def test_m2_x_coefficient_is_tanh(self):
        K = 5
        b = NormSeriesBundle(2, K)
        ctx = TruncationContext(K, ["x"], {"x": 3})
        g1 = b.gbar_in(ctx).coeff_extract({"x": 1})
        # tanh h = (1 - e^{-2h}) / (1 + e^{-2h})
        tanh = (ctx.one() - ctx.exp_atom(-2, "h")) \
            * (ctx.one() + ctx.exp_atom(-2, "h")).invert()
        ok, w = g1.equal_within_windows(tanh)
        assert ok, w

    def test_h0_part_is_one(self):
        for M in (1, 2, 3):
            b = NormSeriesBundle(M, 3)
            ctx = TruncationContext(3, ["x"], {"x": 4})
            assert (b.gbar_in(ctx) - ctx.one()).truncate_h(1).is_known_zero()


class TestFbarAndF:
    @pytest.mark.parametrize("M", [1, 2, 3])
    def test_fbar_product_identity(self, M):
        check_fbar_equation(M)

    @pytest.mark.parametrize("M", [1, 2, 3])
    def test_f_product_identity(self, M):
        check_f_equation(M)

    def test_f_m1_closed_form(self):
        # M=1: fbar = (1-x)/(1-x e^{-2h}), so f(u) = (1-e^{-2u})/(1-e^{-2u-2h})
        b = NormSeriesBundle(1, 3)
        ctx = TruncationContext(3, ["u"], {"u": 2})
        img = b.exp_arg(ctx, {"u": 1})
        f = b.f_at(img, "u")
        want = (ctx.one() - img) * (
            ctx.one() - img * ctx.exp_atom(-2, "h")).invert("u")
        ok, w = f.equal_within_windows(want)
        assert ok, w

    def test_minimal_clearing_exponent(self):
        # M=2: the h^1 part of gbar is x/(1-x), so r=0 fails and the
        # search returns a positive exponent bounded by the h-order
        b = NormSeriesBundle(2, 3)
        r, poly = b.gbar_cleared(3)
        assert 1 <= r <= 3
        r1, _ = b.gbar_cleared(1)
        assert r1 == 0
