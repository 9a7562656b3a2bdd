"""Tests for Hecke symmetry validation and skew-inversion."""

import pytest

from qva.series import TruncationContext, rat
from qva.tensor import TensorOp
from qva import hecke


def ctx_h(K=3):
    return TruncationContext(K, [], {})


class TestBuiltinDJ:
    def test_entries_n2(self):
        ctx = ctx_h()
        R = hecke.dj_r_matrix(2, ctx)
        eh = ctx.exp_atom(1, "h")
        assert R.entry((0, 0), (0, 0)).equal_within_windows(eh)[0]
        assert R.entry((0, 1), (1, 0)).equal_within_windows(ctx.one())[0]
        omega = ctx.exp_atom(1, "h") - ctx.exp_atom(-1, "h")
        assert R.entry((0, 1), (0, 1)).equal_within_windows(omega)[0]

    def test_r_at_h0_is_permutation(self):
        ctx = ctx_h()
        R = hecke.dj_r_matrix(2, ctx)
        P = TensorOp.permutation(ctx, 2)
        diff = R - P
        for v in diff.entries.values():
            t = v.truncate_h(1)
            assert t.is_known_zero(), "h^0 part must be the flip"

    def test_validate_passes_n2_n3(self):
        ctx = ctx_h()
        for N in (2, 3):
            sym = hecke.builtin_dj(N, ctx)
            assert sym.N == N

    def test_psi_closed_form_entry(self):
        ctx = ctx_h()
        sym = hecke.builtin_dj(2, ctx)
        omega = ctx.exp_atom(1, "h") - ctx.exp_atom(-1, "h")
        want = -(omega * ctx.exp_atom(-2, "h"))
        ok, w = sym.psi_inv.entry((0, 1), (0, 1)).equal_within_windows(want)
        assert ok, w

    def test_c_matrix_n2(self):
        ctx = ctx_h()
        sym = hecke.builtin_dj(2, ctx)
        assert sym.c_matrix.entry((0,), (0,)).equal_within_windows(
            ctx.exp_atom(-3, "h"))[0]
        assert sym.c_matrix.entry((1,), (1,)).equal_within_windows(
            ctx.exp_atom(-1, "h"))[0]
        assert sym.c_matrix.entry((0,), (1,)).is_known_zero()

    def test_r_squared_identity(self):
        # R^2 = (e^h - e^{-h}) R + I, a rephrasing of the quadratic condition
        ctx = ctx_h()
        R = hecke.dj_r_matrix(2, ctx)
        omega = ctx.exp_atom(1, "h") - ctx.exp_atom(-1, "h")
        I = TensorOp.identity(ctx, 2, 2)
        ok, w = (R @ R).equal(R.scale(omega) + I)
        assert ok, w


class TestValidationRejects:
    def test_permutation_fails_hecke_condition(self):
        ctx = ctx_h()
        P = TensorOp.permutation(ctx, 2)
        with pytest.raises(hecke.HeckeViolation):
            hecke.validate(P)

    def test_scalar_identity_fails(self):
        ctx = ctx_h()
        A = TensorOp.identity(ctx, 2, 2).scale(ctx.exp_atom(1, "h"))
        with pytest.raises(hecke.HeckeViolation):
            hecke.validate(A)

    def test_perturbed_entry_fails(self):
        ctx = ctx_h()
        R = hecke.dj_r_matrix(2, ctx)
        bad = R + TensorOp(ctx, 2, 2, {((0, 0), (1, 1)): ctx.h()})
        with pytest.raises((hecke.BraidViolation, hecke.HeckeViolation)):
            hecke.validate(bad)


class TestRTrace:
    def test_r_trace_identity(self):
        ctx = ctx_h()
        sym = hecke.builtin_dj(2, ctx)
        I1 = TensorOp.identity(ctx, 2, 1)
        got = sym.r_trace(I1).entry((), ())
        want = ctx.exp_atom(-3, "h") + ctx.exp_atom(-1, "h")
        ok, w = got.equal_within_windows(want)
        assert ok, w

    def test_r_trace_off_diagonal_unit(self):
        ctx = ctx_h()
        sym = hecke.builtin_dj(2, ctx)
        e01 = TensorOp(ctx, 2, 1, {((0,), (1,)): ctx.one()})
        assert sym.r_trace(e01).entry((), ()).is_known_zero()

    def test_solver_matches_closed_form_n3(self):
        ctx = ctx_h()
        sym = hecke.builtin_dj(3, ctx)
        ok, w = sym.psi_inv.equal(hecke.dj_psi_matrix(3, ctx))
        assert ok, w
