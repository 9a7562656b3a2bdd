import pytest
from hypothesis import given, settings, strategies as st

from qva.series import TruncationContext, NormSeriesBundle, rat
from qva.hecke import builtin_dj
from qva.baxter import Baxterizer
from qva import freealg as fa
from qva import actions as ac


K = 3
VARS = ("u1", "u2", "v1", "v2", "w1")


def make(nvars=VARS, N=2, h_order=K, deg=2):
    sym = builtin_dj(N, TruncationContext(h_order, [], {}))
    bun = NormSeriesBundle(N, h_order)
    ctx = TruncationContext(h_order, list(nvars), deg)
    return Baxterizer(sym, bun, ctx)


BX = make()

WRAPPERS = {
    fa.RTT_ADD: (ac.tminus_apply, ac.tminus_inverse_apply),
    fa.BRAIDED_ADD: (ac.lminus_apply, ac.lminus_inverse_apply),
    fa.RTT_MULT: (ac.tbar_minus_apply, ac.tbar_minus_inverse_apply),
    fa.BRAIDED_MULT: (ac.lbar_minus_apply, ac.lbar_minus_inverse_apply),
    fa.DOUBLE: (ac.tbar_minus_apply, ac.tbar_minus_inverse_apply),
}


def cfg_for(flavor, c=1):
    return ac.ActionConfig(BX, flavor, c)


class TestMinusBasics:
    @pytest.mark.parametrize("flavor", fa.FLAVORS)
    def test_identity_on_scalar_states(self, flavor):
        cfg = cfg_for(flavor)
        span = cfg.spanning(2)
        fwd, _ = WRAPPERS[flavor]
        out = fwd(cfg, span, "u1", 0)
        ok, w = out.state().equal(span.state())
        assert ok, w

    @pytest.mark.parametrize("flavor", fa.FLAVORS)
    def test_roundtrip_forward_then_inverse(self, flavor):
        cfg = cfg_for(flavor)
        span = cfg.spanning(2, ((1, "v1"),))
        fwd, inv = WRAPPERS[flavor]
        out = inv(cfg, fwd(cfg, span, "u1", 0), "u1", 0)
        ok, w = out.state().equal(span.state())
        assert ok, w

    @pytest.mark.parametrize("flavor", fa.FLAVORS)
    def test_roundtrip_inverse_then_forward(self, flavor):
        cfg = cfg_for(flavor)
        span = cfg.spanning(2, ((1, "v1"),))
        fwd, inv = WRAPPERS[flavor]
        out = fwd(cfg, inv(cfg, span, "u1", 0), "u1", 0)
        ok, w = out.state().equal(span.state())
        assert ok, w

    def test_two_operator_roundtrip(self):
        cfg = cfg_for(fa.RTT_ADD)
        span = cfg.spanning(3, ((2, "v1"),))
        out = ac.tminus_apply(cfg, span, "u2", 1)
        out = ac.tminus_apply(cfg, out, "u1", 0)
        out = ac.tminus_inverse_apply(cfg, out, "u1", 0)
        out = ac.tminus_inverse_apply(cfg, out, "u2", 1)
        ok, w = out.state().equal(span.state())
        assert ok, w

    def test_occupied_leg_rejected(self):
        cfg = cfg_for(fa.RTT_ADD)
        span = cfg.spanning(2, ((1, "v1"),))
        with pytest.raises(ValueError):
            ac.minus_apply(cfg, span, "u1", 1)

    def test_leg_out_of_range_rejected(self):
        cfg = cfg_for(fa.RTT_ADD)
        span = cfg.spanning(2)
        with pytest.raises(ValueError):
            ac.minus_apply(cfg, span, "u1", 2)

    def test_nonscalar_under_rejected(self):
        cfg = cfg_for(fa.RTT_ADD)
        under = fa.tplus_apply(cfg.vacuum(2), 1, "v1")
        span = ac.Spanning(cfg, 2, (), under)
        with pytest.raises(ValueError):
            ac.minus_apply(cfg, span, "u1", 0)

    def test_unknown_flavor_rejected(self):
        with pytest.raises(ValueError):
            ac.ActionConfig(BX, "nonsense")

    @given(st.sampled_from(fa.FLAVORS), st.integers(0, 2))
    @settings(max_examples=6, deadline=None)
    def test_roundtrip_property(self, flavor, c):
        cfg = ac.ActionConfig(BX, flavor, c)
        span = cfg.spanning(2, ((1, "v2"),))
        out = ac.minus_apply(cfg, ac.minus_apply(cfg, span, "u1", 0),
                             "u1", 0, inverse=True)
        ok, w = out.state().equal(span.state())
        assert ok, w


class TestClosedInverse:
    @pytest.mark.parametrize("flavor", (fa.RTT_ADD, fa.BRAIDED_MULT))
    def test_forward_composition_two_factors(self, flavor):
        cfg = cfg_for(flavor)
        span = cfg.spanning(3, ((1, "v1"), (2, "v2")))
        ok, w = ac.verify_closed_inverse(cfg, span, "u1", 0)
        assert ok, w

    @pytest.mark.parametrize("flavor", (fa.RTT_ADD, fa.BRAIDED_ADD))
    def test_matches_direct_inversion_additive(self, flavor):
        cfg = cfg_for(flavor)
        span = cfg.spanning(2, ((1, "v1"),))
        closed = ac.minus_inverse_state(cfg, span, "u1", 0)
        direct = ac.minus_apply(cfg, span, "u1", 0, inverse=True).state()
        ok, w = closed.equal(direct)
        assert ok, w

    def test_dressed_presentation_rejected(self):
        cfg = cfg_for(fa.RTT_ADD)
        span = cfg.spanning(2, ((1, "v1"),))
        dressed = ac.minus_apply(cfg, span, "u1", 0)
        with pytest.raises(ValueError):
            ac.minus_inverse_state(cfg, dressed, "u1", 0)


RELATION_FLAVORS = (fa.RTT_ADD, fa.BRAIDED_ADD, fa.RTT_MULT, fa.BRAIDED_MULT)


class TestRelations:
    @pytest.mark.parametrize("flavor", RELATION_FLAVORS)
    @pytest.mark.parametrize("c", (0, 1))
    def test_one_one(self, flavor, c):
        cfg = ac.ActionConfig(BX, flavor, c)
        report = ac.verify_mixed_relations(cfg, 1, 1)
        assert set(report) == {"exchange-minus-minus", "crossing-minus-plus",
                               "inverse-partner", "defect-annihilation"}
        for name, (ok, w) in report.items():
            assert ok, (flavor, c, name, w)

    def test_two_one_plain_additive(self):
        cfg = cfg_for(fa.RTT_ADD)
        report = ac.verify_mixed_relations(cfg, 2, 1)
        for name, (ok, w) in report.items():
            assert ok, (name, w)

    def test_braided_sizes_guarded(self):
        cfg = cfg_for(fa.BRAIDED_ADD)
        with pytest.raises(ValueError):
            ac.verify_mixed_relations(cfg, 2, 1)

    @pytest.mark.parametrize("flavor", RELATION_FLAVORS)
    def test_crossing_shift_collapses_at_level_zero(self, flavor):
        plus0, minus0 = ac.crossing_shift_args(
            ac.ActionConfig(BX, flavor, 0), "u1", "v1")
        assert plus0 == minus0
        plus1, minus1 = ac.crossing_shift_args(
            ac.ActionConfig(BX, flavor, 1), "u1", "v1")
        assert plus1 != minus1
        assert plus1[0] == minus1[0]


class TestDModule:
    def test_restricted_evidence(self):
        dm = ac.dmodule_realize(cfg_for(fa.RTT_MULT))
        ev = dm.restricted_evidence(var="u1", pvars=("v1",))
        for tag in ("forward", "inverse"):
            assert ev[tag]["num_nonpositive"], ev
            assert ev[tag]["den_nonpositive"], ev
            assert ev[tag]["den_unit_part"], ev

    def test_word_filtration_stability(self):
        dm = ac.dmodule_realize(cfg_for(fa.RTT_MULT))
        assert dm.stability(var="u1", pvars=("v1", "v2"))

    def test_defect_annihilation(self):
        dm = ac.dmodule_realize(cfg_for(fa.DOUBLE))
        ok, w = dm.annihilates_defect()
        assert ok, w

    def test_creation_matches_free_product(self):
        cfg = cfg_for(fa.RTT_MULT)
        dm = ac.dmodule_realize(cfg)
        st0 = cfg.vacuum(1)
        ok, w = dm.creation_apply(st0, 0, "v1").equal(
            fa.tplus_apply(st0, 0, "v1"))
        assert ok, w

    def test_wrong_flavor_rejected(self):
        with pytest.raises(ValueError):
            ac.dmodule_realize(cfg_for(fa.RTT_ADD))


class TestSmallRankSmoke:
    def test_rank_three_roundtrip(self):
        bx3 = make(("u1", "v1"), N=3, h_order=2)
        cfg = ac.ActionConfig(bx3, fa.RTT_ADD, 1)
        span = cfg.spanning(2, ((1, "v1"),))
        out = ac.tminus_inverse_apply(
            cfg, ac.tminus_apply(cfg, span, "u1", 0), "u1", 0)
        ok, w = out.state().equal(span.state())
        assert ok, w
