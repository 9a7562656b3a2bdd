"""State-field maps built on the creation/annihilation machinery.

The quantum vertex algebra lives on the additive RTT family: the field
attached to a creation vector is the creation series at a shifted argument
times the inverse annihilation series at the level-shifted argument.  The
same shape, transported to the other operator families, yields module maps:
the braided-additive family carries a module structure with the identical
composite, and the multiplicative families carry phi-coordinated module
structures in which the operator variable of the composite is substituted
by the associate phi(z, u) = z e^{-2u/a}.

All maps are evaluated on spanning presentations in exact cleared rational
form (single central denominator, no Laurent expansion).  The braiding is
tabulated on the dressed spanning set exactly as its defining identity
presents it; it is never inverted off the dressing.  Weak associativity is
a bounded search: both sides of the associativity comparison are formed
exactly, the difference is multiplied by the comparison factor ((z0+z2) or
(phi(z2,z0)-z2)) r times, and the budgeted monomial coefficients are
checked for vanishing mod h^k; the minimal such r is certified.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .series import (InsufficientTruncation, MultiSeries, NotInvertible,
                     Rat, SubstitutionIllDefined, TruncationContext, rat)
from . import freealg as fa
from .actions import ActionConfig, Spanning, minus_apply


class RSearchExhausted(Exception):
    """The weak-associativity search hit its cap; carries the residual."""

    def __init__(self, message: str, residual=None):
        super().__init__(message)
        self.residual = residual


# ---------------------------------------------------------------------------
# handles and budgets
# ---------------------------------------------------------------------------


KIND_MODULE = "module"
KIND_PHI = "phi"
KIND_PHI_RTT = "phi-rtt"
MODULE_KINDS = (KIND_MODULE, KIND_PHI, KIND_PHI_RTT)


@dataclass
class VertexAlgebraHandle:
    """The state space handle: additive-RTT config plus its vacuum."""

    cfg: ActionConfig

    def __post_init__(self):
        if self.cfg.flavor != fa.RTT_ADD:
            raise ValueError("the state-field map lives on the additive "
                             "RTT family")

    @property
    def ctx(self) -> TruncationContext:
        return self.cfg.ctx

    def vacuum(self, m: int) -> fa.MatState:
        return self.cfg.vacuum(m)

    def spanning(self, m: int, factors=(), z=None) -> Spanning:
        return self.cfg.spanning(m, factors, z=z)


@dataclass
class PhiAssociate:
    """The substitution rule phi(z, u) = z e^{-2u/a} of the scale a."""

    a: object

    def __post_init__(self):
        self.a = rat(self.a)
        if not self.a:
            raise ValueError("the scale parameter must be nonzero")

    def image(self, ctx: TruncationContext, zvar: str,
              uvar: str) -> MultiSeries:
        return ctx.var(zvar) * ctx.exp_atom(rat(-2) / self.a, uvar)

    def minus_z(self, ctx: TruncationContext, zvar: str,
                uvar: str) -> MultiSeries:
        """phi(z, u) - z = z (e^{-2u/a} - 1)."""
        return self.image(ctx, zvar, uvar) - ctx.var(zvar)


@dataclass
class WeakAssocBudget:
    """Monomial caps, h-cap and r-search cap for associativity checks.

    `caps` bounds the absolute exponent of each listed variable; variables
    not listed are unrestricted.  `total_cap`, when set, additionally
    bounds the total absolute spectral degree of inspected monomials across
    the capped variables.  `k` is the h-adic comparison order and `r_cap`
    the largest comparison-factor power tried.
    """

    caps: Mapping[str, int]
    k: int
    r_cap: int = 4
    total_cap: Optional[int] = None

    def validate(self, ctx: TruncationContext) -> None:
        if not (1 <= self.k <= ctx.h_order):
            raise ValueError(f"h-cap {self.k} outside 1..{ctx.h_order}")
        for v, cap in self.caps.items():
            if cap < 0 or cap > ctx.degree[ctx.var_index(v)]:
                raise ValueError(
                    f"cap {cap} for {v!r} outside the context window")
        if self.r_cap < 0:
            raise ValueError("r-search cap must be nonnegative")

    def in_budget(self, ctx: TruncationContext, exps: Tuple[int, ...],
                  idx: Mapping[str, int]) -> bool:
        total = 0
        for v, cap in self.caps.items():
            e = abs(exps[1 + idx[v]])
            if e > cap:
                return False
            total += e
        if self.total_cap is not None and total > self.total_cap:
            return False
        return True


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def _check_free_legs(target: Spanning, n: int) -> None:
    if target.m < n:
        raise ValueError(f"target has {target.m} legs, {n} needed for the "
                         "operator")
    occupied = {leg for leg, _, _ in target.split_factors()}
    clash = occupied.intersection(range(n))
    if clash:
        raise ValueError(f"operator legs {sorted(clash)} already carry "
                         "creation factors")


def _plus_block(cfg: ActionConfig, st: fa.MatState, variables: Sequence[str],
                legs: Sequence[int], z) -> fa.MatState:
    if cfg.braided:
        return fa.lplus_product(st, cfg.bx.RP, list(variables), z=z,
                                legs=list(legs))
    return fa.tplus_product(st, list(variables), z=z, legs=list(legs))


def substitute_state(st: fa.MatState, var: str, image: MultiSeries,
                     principal: Optional[str] = None) -> fa.MatState:
    """Substitute one variable in every entry coefficient and the denominator."""
    entries: Dict[tuple, fa.AlgElement] = {}
    for key, el in st.entries.items():
        combo: Dict[fa.Word, MultiSeries] = {}
        for w, s in el.combo.items():
            ns = s.substitute(var, image, principal)
            if not ns.is_known_zero():
                combo[w] = ns
        if combo:
            entries[key] = fa.AlgElement(st.ctx, st.flavor, combo)
    den = st.den.substitute(var, image, principal)
    if den.is_known_zero():
        raise SubstitutionIllDefined("denominator vanished under "
                                     f"substitution of {var!r}")
    return st._like(entries, den)


def truncate_state(st: fa.MatState, k: int) -> fa.MatState:
    """Reduce every entry coefficient mod h^k (denominator kept exact)."""
    entries: Dict[tuple, fa.AlgElement] = {}
    for key, el in st.entries.items():
        combo = {w: s.truncate_h(k) for w, s in el.combo.items()}
        combo = {w: s for w, s in combo.items() if not s.is_known_zero()}
        if combo:
            entries[key] = fa.AlgElement(st.ctx, st.flavor, combo)
    return st._like(entries)


# ---------------------------------------------------------------------------
# the state-field map and the module maps
# ---------------------------------------------------------------------------


def vertex_apply(V: VertexAlgebraHandle, uvars: Sequence[str],
                 target: Spanning, z=None) -> fa.MatState:
    """Apply the field of a creation vector to a spanning presentation.

    The composite is the creation product at the shifted arguments times
    the inverse annihilation product at the level-shifted arguments; the
    inverse chain is applied leg by leg (leg 0 first), then the creation
    product multiplies on the left.  With no operator variables this is the
    identity map.
    """
    cfg = V.cfg
    if target.cfg.flavor != cfg.flavor:
        raise ValueError("target presentation has the wrong flavor")
    n = len(uvars)
    if n == 0:
        return target.state()
    _check_free_legs(target, n)
    c2 = rat(cfg.c) / rat(2)
    span = target
    for i in range(n):
        span = minus_apply(cfg, span, uvars[i], leg=i, zvar=z, beta0=c2,
                           inverse=True)
    return _plus_block(cfg, span.state(), uvars, range(n), z)


def module_apply(kind: str, uvars: Sequence[str], target: Spanning, z,
                 xvars: Optional[Sequence[str]] = None,
                 phi: Optional[PhiAssociate] = None) -> fa.MatState:
    """Apply a module field to a presentation of the matching family.

    kind "module": the additive composite on an additive presentation
    (braided-additive for the canonical module; plain-RTT data reproduces
    the state-field map itself).  kind "phi"/"phi-rtt": the multiplicative
    composite built with auxiliary operator variables `xvars`, followed by
    the substitution x_i -> phi(z, u_i); the level shift of the
    annihilation argument enters as an exact exponential h-shift of the
    chain arguments before substitution.
    """
    cfg = target.cfg
    if kind not in MODULE_KINDS:
        raise ValueError(f"unknown module kind {kind!r}")
    n = len(uvars)
    if kind == KIND_MODULE:
        if not cfg.additive:
            raise ValueError("kind 'module' needs an additive family")
        if cfg.flavor == fa.BRAIDED_ADD and n > 1:
            raise ValueError("braided module fields are supported for a "
                             "single operator variable")
        if n == 0:
            return target.state()
        _check_free_legs(target, n)
        c2 = rat(cfg.c) / rat(2)
        span = target
        for i in range(n):
            span = minus_apply(cfg, span, uvars[i], leg=i, zvar=z, beta0=c2,
                               inverse=True)
        return _plus_block(cfg, span.state(), uvars, range(n), z)

    expected = fa.BRAIDED_MULT if kind == KIND_PHI else fa.RTT_MULT
    if cfg.flavor != expected:
        raise ValueError(f"kind {kind!r} needs the "
                         f"{'braided' if kind == KIND_PHI else 'RTT'} "
                         "multiplicative family")
    if n == 0:
        return target.state()
    if cfg.flavor == fa.BRAIDED_MULT and n > 1:
        raise ValueError("braided module fields are supported for a "
                         "single operator variable")
    if xvars is None or len(xvars) < n:
        raise ValueError("phi-coordinated fields need one auxiliary "
                         "operator variable per factor")
    if not isinstance(z, str):
        raise ValueError("phi-coordinated fields need a single z variable")
    _check_free_legs(target, n)
    phi = phi if phi is not None else PhiAssociate(cfg.a)
    mc2 = -rat(cfg.c) / rat(2)
    span = target
    for i in range(n):
        span = minus_apply(cfg, span, xvars[i], leg=i, zvar=None, beta0=mc2,
                           inverse=True)
    st = _plus_block(cfg, span.state(), xvars, range(n), None)
    ctx = cfg.ctx
    for i in range(n):
        st = substitute_state(st, xvars[i], phi.image(ctx, z, uvars[i]),
                              principal=z)
    return st


# ---------------------------------------------------------------------------
# braiding tabulation
# ---------------------------------------------------------------------------


def braiding_eval(V: VertexAlgebraHandle, n: int, m: int,
                  uvars: Sequence[str], vvars: Sequence[str],
                  z: str) -> Tuple[fa.MatState, fa.MatState]:
    """Both sides of the defining braiding identity on dressed vectors.

    Returns (argument, value): the braiding maps the first returned dressed
    state to the second.  Leg split: legs 0..n-1 carry the u factors, legs
    n..n+m-1 the v factors; the exchange products take arguments
    z + u - v with h-shifts 0, -c (argument side) and +c, 0 (value side).
    The braiding is tabulated on this dressed set; it is not inverted off
    the dressing.
    """
    cfg = V.cfg
    bx = cfg.bx
    if len(uvars) != n or len(vvars) != m:
        raise ValueError("variable counts must match the leg split")
    c = rat(cfg.c)
    total = n + m
    ulegs = list(range(n))
    vlegs = list(range(n, total))

    lhs = cfg.vacuum(total)
    lhs = fa.tplus_product(lhs, list(uvars), legs=ulegs)
    lhs = lhs.act_left(bx.r_product(n, m, list(uvars), list(vvars),
                                    beta=-c, z=z))
    lhs = fa.tplus_product(lhs, list(vvars), legs=vlegs)
    lhs = lhs.act_left(bx.r_product(n, m, list(uvars), list(vvars),
                                    beta=0, z=z, inverse=True))

    rhs = cfg.vacuum(total)
    rhs = rhs.act_left(bx.r_product(n, m, list(uvars), list(vvars),
                                    beta=0, z=z))
    rhs = fa.tplus_product(rhs, list(vvars), legs=vlegs)
    rhs = rhs.act_left(bx.r_product(n, m, list(uvars), list(vvars),
                                    beta=c, z=z, inverse=True))
    rhs = fa.tplus_product(rhs, list(uvars), legs=ulegs)
    return lhs, rhs


def _word_reversed(st: fa.MatState) -> fa.MatState:
    """Reverse the letter order of every word (tensor-slot reindexing)."""
    entries: Dict[tuple, fa.AlgElement] = {}
    for key, el in st.entries.items():
        combo: Dict[fa.Word, MultiSeries] = {}
        for w, s in el.combo.items():
            nw = fa.Word(st.flavor, tuple(reversed(w.letters)))
            combo[nw] = combo[nw] + s if nw in combo else s
        entries[key] = fa.AlgElement(st.ctx, st.flavor, combo)
    return st._like(entries)


def _scalar_part(st: fa.MatState) -> fa.MatState:
    unit = fa.Word(st.flavor)
    entries: Dict[tuple, fa.AlgElement] = {}
    for key, el in st.entries.items():
        s = el.coeff(unit)
        if not s.is_known_zero():
            entries[key] = fa.AlgElement(st.ctx, st.flavor, {unit: s})
    return st._like(entries)


def verify_braiding(V: VertexAlgebraHandle, uvars: Sequence[str],
                    vvars: Sequence[str], z: str) -> Dict[str, tuple]:
    """Structural checks on the tabulated braiding at one leg split.

    "unit-component": the scalar word components of both sides agree
    exactly.  "h0-consistency" (level 0 only): after identifying the two
    word interleavings (the u letters and v letters live in distinct
    tensor slots, so reversing the letter order matches the conventions of
    the two sides), argument and value agree mod h, i.e. the braiding is
    the identity at leading order.
    """
    n, m = len(uvars), len(vvars)
    lhs, rhs = braiding_eval(V, n, m, uvars, vvars, z)
    out: Dict[str, tuple] = {}
    out["unit-component"] = _scalar_part(lhs).equal(_scalar_part(rhs))
    if rat(V.cfg.c) == 0:
        diff = _word_reversed(lhs) - rhs
        ok, wit = truncate_state(diff, 1).is_zero()
        out["h0-consistency"] = (ok, wit)
    return out


def verify_vacuum_axioms(V: VertexAlgebraHandle, uvar: str,
                         z: str) -> Dict[str, tuple]:
    """The two vacuum axioms on a one-factor spanning vector.

    The field of the vacuum is the identity; the field of a creation
    vector applied to the vacuum has no negative z-powers and returns the
    vector at z = 0.
    """
    cfg = V.cfg
    out: Dict[str, tuple] = {}

    span = V.spanning(2, ((1, uvar),))
    out["unit-field"] = vertex_apply(V, (), span, z=z).equal(span.state())

    st = vertex_apply(V, (uvar,), V.spanning(1), z=z)
    ok, wit = (st.den - cfg.ctx.one()).is_known_zero(), None
    zneg = None
    j = 1 + cfg.ctx.var_index(z)
    for key, el in st.entries.items():
        for w, s in el.combo.items():
            for e in s.terms:
                if e[j] < 0:
                    zneg = (key, w.letters, e)
    out["creation-regular"] = (ok and zneg is None, zneg)

    at0 = substitute_state(st, z, cfg.ctx.zero())
    out["creation-at-zero"] = at0.equal(
        fa.tplus_apply(cfg.vacuum(1), 0, uvar))
    return out


# ---------------------------------------------------------------------------
# weak associativity
# ---------------------------------------------------------------------------


def _field_on_vacuum(kind: str, mcfg: ActionConfig, variables: Sequence[str],
                     z: str, xvars: Optional[Sequence[str]],
                     phi: Optional[PhiAssociate]) -> fa.MatState:
    """The module field of a generic creation vector applied to the vacuum.

    The annihilation part fixes the vacuum, so this is the (substituted)
    creation product alone; used as the coefficient-extraction table."""
    L = len(variables)
    st = mcfg.vacuum(L)
    if L == 0:
        return st
    if kind == KIND_MODULE:
        return _plus_block(mcfg, st, variables, range(L), z)
    st = _plus_block(mcfg, st, xvars[:L], range(L), None)
    ctx = mcfg.ctx
    for t in range(L):
        st = substitute_state(st, xvars[t], phi.image(ctx, z, variables[t]),
                              principal=z)
    return st


def _apply_field_to_element(kind: str, mcfg: ActionConfig, A: fa.MatState,
                            z: str, svars: Sequence[str],
                            xvars: Optional[Sequence[str]],
                            phi: Optional[PhiAssociate]) -> fa.MatState:
    """The module field of an arbitrary algebra element, on the vacuum.

    `A` is an additive-RTT state whose words are creation words; the field
    of each word is recovered by coefficient extraction (in the fresh
    spectral variables `svars`) from the field of the generic creation
    vector of the same length, and the results are recombined with the
    word coefficients of `A`.  Word letter t corresponds to extraction leg
    t and variable svars[t].
    """
    if A.flavor != fa.RTT_ADD:
        raise ValueError("field extraction expects additive-RTT words")
    ctx = mcfg.ctx
    tables: Dict[int, fa.MatState] = {}
    cache: Dict[fa.Word, fa.AlgElement] = {}

    def field_of_word(w: fa.Word) -> fa.AlgElement:
        if w in cache:
            return cache[w]
        L = len(w)
        if L > len(svars):
            raise ValueError(f"word length {L} exceeds the extraction "
                             "variables")
        if L not in tables:
            tables[L] = _field_on_vacuum(kind, mcfg, svars[:L], z, xvars,
                                         phi)
        row = tuple(i - 1 for i, _, _ in w.letters)
        col = tuple(k - 1 for _, k, _ in w.letters)
        assign = {svars[t]: r - 1 for t, (_, _, r) in enumerate(w.letters)}
        cache[w] = fa.extract_word_coeff(tables[L], row, col, assign)
        return cache[w]

    entries: Dict[tuple, fa.AlgElement] = {}
    for key, el in A.entries.items():
        acc: Optional[fa.AlgElement] = None
        for w, s in el.combo.items():
            add = field_of_word(w).scale(s)
            acc = add if acc is None else acc + add
        if acc is not None and acc.combo:
            entries[key] = acc
    return fa.MatState(ctx, mcfg.N, mcfg.flavor, A.m, entries, A.den,
                       mcfg.G, mcfg.Rmax)


def _budget_zero(st: fa.MatState, budget: WeakAssocBudget
                 ) -> Tuple[bool, Optional[tuple]]:
    ctx = st.ctx
    idx = {v: ctx.var_index(v) for v in budget.caps}
    for key in sorted(st.entries):
        el = st.entries[key]
        for w in sorted(el.combo):
            s = el.combo[w]
            for e in sorted(s.terms):
                if e[0] >= budget.k:
                    continue
                if budget.in_budget(ctx, e, idx):
                    return False, (key, w.letters, e, s.terms[e])
    return True, None


def weak_assoc_check(kind: str, mcfg: ActionConfig,
                     V: VertexAlgebraHandle, uvar: Optional[str],
                     vvar: Optional[str], budget: WeakAssocBudget,
                     z0: str = "z0", z2: str = "z2",
                     z1: str = "z1",
                     svars: Sequence[str] = ("s1", "s2"),
                     xvars: Optional[Sequence[str]] = None,
                     phi: Optional[PhiAssociate] = None,
                     target: Optional[Spanning] = None) -> dict:
    """Search for the minimal comparison power in weak associativity.

    Compares the iterated field application (outer argument `uvar` at the
    composed coordinate, inner argument `vvar` at z2) against the field of
    the composed vector, on the vacuum.  kind "algebra" runs the
    comparison inside the state space itself; kind "module" on the
    additive module; kind "phi"/"phi-rtt" on the phi-coordinated modules,
    where the iterated side is formed at a free coordinate z1 mod h^k and
    then substituted z1 = phi(z2, z0), and the comparison factor is
    phi(z2, z0) - z2 instead of z0 + z2.

    Either argument may be None (the vacuum vector), giving minimal power
    zero.  Only vacuum targets are supported: a dressed target would put
    the extraction table behind a nontrivial denominator, which the exact
    engine cannot clear word by word.
    """
    if kind == "algebra":
        kind_inner = KIND_MODULE
        mcfg = V.cfg
    elif kind in MODULE_KINDS:
        kind_inner = kind
    else:
        raise ValueError(f"unknown associativity kind {kind!r}")
    if rat(mcfg.c) != rat(V.cfg.c):
        raise ValueError("module and algebra levels differ")
    ctx = mcfg.ctx
    budget.validate(ctx)
    if target is not None:
        if target.factors or any(el.max_word_len() > 0
                                 for el in target.under.entries.values()):
            raise ValueError("only vacuum targets are supported")
    phi_kind = kind_inner in (KIND_PHI, KIND_PHI_RTT)
    if phi_kind:
        if xvars is None or len(xvars) < 2:
            raise ValueError("phi-coordinated checks need two auxiliary "
                             "operator variables")
        phi = phi if phi is not None else PhiAssociate(mcfg.a)

    # iterated side: the inner field on the vacuum, then the outer field
    if phi_kind:
        inner_factors = ((1, xvars[1]),) if vvar is not None else ()
    else:
        inner_factors = ((1, vvar, (z2,)),) if vvar is not None else ()
    inner = mcfg.spanning(2, inner_factors)
    if uvar is None:
        lhs = inner.state()
    elif phi_kind:
        mc2 = -rat(mcfg.c) / rat(2)
        span = minus_apply(mcfg, inner, xvars[0], leg=0, zvar=None,
                           beta0=mc2, inverse=True)
        lhs = _plus_block(mcfg, span.state(), (xvars[0],), (0,), None)
    else:
        c2 = rat(mcfg.c) / rat(2)
        span = minus_apply(mcfg, inner, uvar, leg=0, zvar=(z0, z2),
                           beta0=c2, inverse=True)
        lhs = _plus_block(mcfg, span.state(), (uvar,), (0,), (z0, z2))
    if phi_kind:
        # Mod h the annihilation chains are mutually inverse scalars, so
        # the iterated side coincides with the bare creation part, which is
        # polynomial (bounded-below z-powers: the expandability certificate
        # holds with power zero) and can be substituted safely.  The
        # certificate is only available at h-cap 1 in this engine.
        if budget.k != 1:
            raise InsufficientTruncation(
                "phi-coordinated weak associativity is certified at "
                "h-cap 1 only")
        cpart = mcfg.spanning(2, inner_factors).state()
        if uvar is not None:
            cpart = _plus_block(mcfg, cpart, (xvars[0],), (0,), None)
        # certificate, exact in the auxiliary coordinates
        ok, wit = truncate_state(lhs - cpart, 1).is_zero()
        if not ok:
            raise SubstitutionIllDefined(
                "iterated side does not reduce to its polynomial part "
                f"mod h: {wit}")
        lhs = truncate_state(cpart, 1)
        if uvar is not None:
            lhs = substitute_state(lhs, xvars[0],
                                   phi.image(ctx, z1, uvar), principal=z1)
        if vvar is not None:
            lhs = substitute_state(lhs, xvars[1],
                                   phi.image(ctx, z2, vvar), principal=z2)
        lhs = substitute_state(lhs, z1, phi.image(ctx, z2, z0),
                               principal=z2)

    # composed side: the inner vector hit by the outer field at z0,
    # then the module field of the result at z2
    avars = () if uvar is None else (uvar,)
    afactors = ((1, vvar),) if vvar is not None else ()
    A = vertex_apply(V, avars, V.spanning(2, afactors), z=z0)
    rhs = _apply_field_to_element(kind_inner, mcfg, A, z2, svars, xvars,
                                  phi)

    factor = (phi.minus_z(ctx, z2, z0) if phi_kind
              else ctx.var(z0) + ctx.var(z2))
    diff = truncate_state(lhs - rhs, budget.k)
    witness = None
    for r in range(budget.r_cap + 1):
        ok, witness = _budget_zero(diff, budget)
        if ok:
            return {"identity": kind, "minimal_r": r, "status": "ok",
                    "h_cap": budget.k,
                    "params": {"u": uvar, "v": vvar, "caps": dict(budget.caps),
                               "total_cap": budget.total_cap}}
        diff = truncate_state(diff.scale_series(factor), budget.k)
    raise RSearchExhausted(
        f"no comparison power up to {budget.r_cap} clears the defect",
        residual=witness)
