import pytest

from qva.series import (InsufficientTruncation, NormSeriesBundle,
                        TruncationContext, rat)
from qva.hecke import builtin_dj
from qva.baxter import Baxterizer
from qva import freealg as fa
from qva import actions as ac
from qva import vertex as vx


K = 3


def make(nvars, N=2, h_order=K, deg=2):
    sym = builtin_dj(N, TruncationContext(h_order, [], {}))
    bun = NormSeriesBundle(N, h_order)
    ctx = TruncationContext(h_order, list(nvars), deg)
    return Baxterizer(sym, bun, ctx)


# additive checks: operator coordinates z0, z2; extraction variables s1, s2
BXA = make(("u1", "v1", "z0", "z2", "s1", "s2"))
# phi-coordinated checks additionally need the free coordinate z1 and the
# auxiliary operator variables xu, xv
BXP = make(("u1", "v1", "z0", "z1", "z2", "xu", "xv", "s1", "s2"))


def handle(c, bx=BXA):
    return vx.VertexAlgebraHandle(ac.ActionConfig(bx, fa.RTT_ADD, c))


class TestHandles:
    def test_handle_requires_additive_rtt(self):
        with pytest.raises(ValueError):
            vx.VertexAlgebraHandle(ac.ActionConfig(BXA, fa.RTT_MULT, 0))

    def test_phi_associate_image(self):
        phi = vx.PhiAssociate(1)
        ctx = BXP.ctx
        img = phi.image(ctx, "z2", "u1")
        expected = ctx.var("z2") * ctx.exp_atom(-2, "u1")
        assert (img - expected).is_known_zero()
        mz = phi.minus_z(ctx, "z2", "u1")
        assert (mz - (img - ctx.var("z2"))).is_known_zero()

    def test_phi_associate_rejects_zero_scale(self):
        with pytest.raises(ValueError):
            vx.PhiAssociate(0)

    def test_budget_validation(self):
        ctx = BXA.ctx
        vx.WeakAssocBudget({"u1": 1}, k=2).validate(ctx)
        with pytest.raises(ValueError):
            vx.WeakAssocBudget({"u1": 1}, k=0).validate(ctx)
        with pytest.raises(ValueError):
            vx.WeakAssocBudget({"u1": 1}, k=K + 1).validate(ctx)
        with pytest.raises(ValueError):
            vx.WeakAssocBudget({"u1": 5}, k=1).validate(ctx)
        with pytest.raises(ValueError):
            vx.WeakAssocBudget({"u1": 1}, k=1, r_cap=-1).validate(ctx)

    def test_budget_membership(self):
        ctx = BXA.ctx
        bud = vx.WeakAssocBudget({"u1": 1, "v1": 1}, k=1, total_cap=1)
        idx = {v: ctx.var_index(v) for v in bud.caps}
        inside = (0,) + tuple(1 if v == "u1" else 0 for v in ctx.variables)
        both = (0,) + tuple(1 if v in ("u1", "v1") else 0 for v in ctx.variables)
        assert bud.in_budget(ctx, inside, idx)
        assert not bud.in_budget(ctx, both, idx)  # total cap


class TestVacuumAxioms:
    @pytest.mark.parametrize("c", [0, 1])
    def test_axioms(self, c):
        out = vx.verify_vacuum_axioms(handle(c), "u1", "z0")
        for name, (ok, wit) in out.items():
            assert ok, (name, wit)

    def test_empty_field_is_identity_on_dressed_state(self):
        V = handle(1)
        span = V.spanning(2, ((0, "u1"), (1, "v1")))
        ok, wit = vx.vertex_apply(V, (), span, z="z0").equal(span.state())
        assert ok, wit


class TestLeadingOrder:
    def test_level_zero_field_is_creation_only_mod_h(self):
        # at level 0 the annihilation chain is trivial mod h, so the field
        # reduces to the creation series alone at leading order
        V = handle(0)
        got = vx.vertex_apply(V, ("u1",), V.spanning(2, ((1, "v1"),)),
                              z="z0")
        exp = fa.tplus_apply(fa.tplus_apply(V.vacuum(2), 1, "v1"),
                             0, "u1", z="z0")
        ok, wit = vx.truncate_state(got - exp, 1).is_zero()
        assert ok, wit

    def test_level_one_field_differs_beyond_leading_order(self):
        V = handle(1)
        got = vx.vertex_apply(V, ("u1",), V.spanning(2, ((1, "v1"),)),
                              z="z0")
        exp = fa.tplus_apply(fa.tplus_apply(V.vacuum(2), 1, "v1"),
                             0, "u1", z="z0")
        ok, _ = vx.truncate_state(got - exp, 1).is_zero()
        assert ok
        ok, _ = (got - exp).is_zero()
        assert not ok


class TestVertexApplyErrors:
    def test_occupied_leg_rejected(self):
        V = handle(0)
        span = V.spanning(2, ((0, "v1"),))
        with pytest.raises(ValueError):
            vx.vertex_apply(V, ("u1",), span, z="z0")

    def test_too_few_legs_rejected(self):
        V = handle(0)
        with pytest.raises(ValueError):
            vx.vertex_apply(V, ("u1", "v1"), V.spanning(1), z="z0")

    def test_wrong_flavor_target_rejected(self):
        V = handle(0)
        other = ac.ActionConfig(BXA, fa.BRAIDED_ADD, 0)
        with pytest.raises(ValueError):
            vx.vertex_apply(V, ("u1",), other.spanning(2), z="z0")


class TestBraiding:
    @pytest.mark.parametrize("c", [0, 1])
    def test_unit_component(self, c):
        out = vx.verify_braiding(handle(c), ("u1",), ("v1",), "z0")
        ok, wit = out["unit-component"]
        assert ok, wit

    def test_level_zero_braiding_is_identity_at_leading_order(self):
        out = vx.verify_braiding(handle(0), ("u1",), ("v1",), "z0")
        ok, wit = out["h0-consistency"]
        assert ok, wit

    def test_both_sides_are_nontrivial(self):
        lhs, rhs = vx.braiding_eval(handle(1), 1, 1, ("u1",), ("v1",), "z0")
        assert any(el.max_word_len() == 2 for el in lhs.entries.values())
        assert any(el.max_word_len() == 2 for el in rhs.entries.values())

    def test_variable_counts_checked(self):
        with pytest.raises(ValueError):
            vx.braiding_eval(handle(0), 2, 1, ("u1",), ("v1",), "z0")


class TestModuleApply:
    @pytest.mark.parametrize("flavor,kind", [
        (fa.RTT_ADD, vx.KIND_MODULE),
        (fa.BRAIDED_ADD, vx.KIND_MODULE),
        (fa.RTT_MULT, vx.KIND_PHI_RTT),
        (fa.BRAIDED_MULT, vx.KIND_PHI),
    ])
    @pytest.mark.parametrize("c", [0, 1])
    def test_unit_vector_field_is_identity(self, flavor, kind, c):
        bx = BXA if kind == vx.KIND_MODULE else BXP
        mcfg = ac.ActionConfig(bx, flavor, c)
        tgt = mcfg.spanning(1)
        st = vx.module_apply(kind, (), tgt, "z2", xvars=("xu",))
        ok, wit = st.equal(tgt.state())
        assert ok, wit

    def test_module_kind_on_state_space_is_the_field(self):
        # the additive module composite on the state space itself is the
        # state-field map
        V = handle(1)
        tgt = V.spanning(2, ((1, "v1"),))
        via_module = vx.module_apply(vx.KIND_MODULE, ("u1",), tgt,
                                     ("z0", "z2"))
        via_field = vx.vertex_apply(V, ("u1",), tgt, z=("z0", "z2"))
        ok, wit = via_module.equal(via_field)
        assert ok, wit

    @pytest.mark.parametrize("flavor,kind", [
        (fa.RTT_MULT, vx.KIND_PHI_RTT),
        (fa.BRAIDED_MULT, vx.KIND_PHI),
    ])
    @pytest.mark.parametrize("c", [0, 1])
    def test_phi_field_on_vacuum_is_polynomial(self, flavor, kind, c):
        mcfg = ac.ActionConfig(BXP, flavor, c)
        st = vx.module_apply(kind, ("u1",), mcfg.spanning(1), "z2",
                             xvars=("xu",))
        assert (st.den - BXP.ctx.one()).is_known_zero()
        j = 1 + BXP.ctx.var_index("z2")
        for el in st.entries.values():
            for s in el.combo.values():
                assert all(e[j] >= 0 for e in s.terms)

    def test_kind_and_flavor_must_match(self):
        mult = ac.ActionConfig(BXP, fa.RTT_MULT, 0)
        add = ac.ActionConfig(BXA, fa.RTT_ADD, 0)
        with pytest.raises(ValueError):
            vx.module_apply("nonsense", ("u1",), add.spanning(1), "z2")
        with pytest.raises(ValueError):
            vx.module_apply(vx.KIND_MODULE, ("u1",), mult.spanning(1), "z2",
                            xvars=("xu",))
        with pytest.raises(ValueError):
            vx.module_apply(vx.KIND_PHI, ("u1",), mult.spanning(1), "z2",
                            xvars=("xu",))

    def test_phi_kind_requires_aux_variables_and_plain_z(self):
        mcfg = ac.ActionConfig(BXP, fa.RTT_MULT, 0)
        with pytest.raises(ValueError):
            vx.module_apply(vx.KIND_PHI_RTT, ("u1",), mcfg.spanning(1),
                            "z2")
        with pytest.raises(ValueError):
            vx.module_apply(vx.KIND_PHI_RTT, ("u1",), mcfg.spanning(1),
                            ("z0", "z2"), xvars=("xu",))

    def test_braided_kinds_single_variable_only(self):
        mcfg = ac.ActionConfig(BXP, fa.BRAIDED_MULT, 0)
        with pytest.raises(ValueError):
            vx.module_apply(vx.KIND_PHI, ("u1", "v1"), mcfg.spanning(2),
                            "z2", xvars=("xu", "xv"))


class TestWeakAssociativity:
    BUDGET = {"u1": 1, "v1": 1, "z0": 1, "z2": 1}

    @pytest.mark.parametrize("c", [0, 1])
    def test_state_space(self, c):
        bud = vx.WeakAssocBudget(self.BUDGET, k=2)
        rep = vx.weak_assoc_check("algebra", None, handle(c), "u1", "v1",
                                  bud)
        assert rep["status"] == "ok"
        assert rep["minimal_r"] == 0
        assert rep["h_cap"] == 2

    def test_braided_module(self):
        bud = vx.WeakAssocBudget(self.BUDGET, k=2)
        mcfg = ac.ActionConfig(BXA, fa.BRAIDED_ADD, 1)
        rep = vx.weak_assoc_check("module", mcfg, handle(1), "u1", "v1",
                                  bud)
        assert rep["status"] == "ok" and rep["minimal_r"] == 0

    def test_vacuum_argument_is_immediate(self):
        bud = vx.WeakAssocBudget(self.BUDGET, k=2)
        rep = vx.weak_assoc_check("algebra", None, handle(1), None, "v1",
                                  bud)
        assert rep["status"] == "ok" and rep["minimal_r"] == 0
        rep = vx.weak_assoc_check("algebra", None, handle(1), "u1", None,
                                  bud)
        assert rep["status"] == "ok" and rep["minimal_r"] == 0

    @pytest.mark.parametrize("flavor,kind", [
        (fa.RTT_MULT, vx.KIND_PHI_RTT),
        (fa.BRAIDED_MULT, vx.KIND_PHI),
    ])
    @pytest.mark.parametrize("c", [0, 1])
    def test_phi_coordinated(self, flavor, kind, c):
        bud = vx.WeakAssocBudget(self.BUDGET, k=1)
        mcfg = ac.ActionConfig(BXP, flavor, c)
        rep = vx.weak_assoc_check(kind, mcfg, handle(c, BXP), "u1", "v1",
                                  bud, xvars=("xu", "xv"))
        assert rep["status"] == "ok" and rep["minimal_r"] == 0

    def test_phi_beyond_certified_order_is_refused(self):
        bud = vx.WeakAssocBudget(self.BUDGET, k=2)
        mcfg = ac.ActionConfig(BXP, fa.RTT_MULT, 0)
        with pytest.raises(InsufficientTruncation):
            vx.weak_assoc_check(vx.KIND_PHI_RTT, mcfg, handle(0, BXP),
                                "u1", "v1", bud, xvars=("xu", "xv"))

    def test_level_mismatch_rejected(self):
        bud = vx.WeakAssocBudget(self.BUDGET, k=1)
        mcfg = ac.ActionConfig(BXA, fa.BRAIDED_ADD, 1)
        with pytest.raises(ValueError):
            vx.weak_assoc_check("module", mcfg, handle(0), "u1", "v1", bud)

    def test_dressed_target_rejected(self):
        bud = vx.WeakAssocBudget(self.BUDGET, k=1)
        V = handle(0)
        with pytest.raises(ValueError):
            vx.weak_assoc_check("algebra", None, V, "u1", "v1", bud,
                                target=V.spanning(2, ((1, "v1"),)))

    def test_phi_kind_requires_aux_variables(self):
        bud = vx.WeakAssocBudget(self.BUDGET, k=1)
        mcfg = ac.ActionConfig(BXP, fa.RTT_MULT, 0)
        with pytest.raises(ValueError):
            vx.weak_assoc_check(vx.KIND_PHI_RTT, mcfg, handle(0, BXP),
                                "u1", "v1", bud)
