"""Exact truncated multivariate (Laurent) power-series arithmetic over Q.

Everything is computed in Q[[h]], truncated h-adically at a fixed order K,
over a finite set of named spectral variables.  Spectral variables may carry
negative (Laurent) exponents; the deformation variable h never does.

Each series tracks, per h-order k < K and per variable, a support interval
[slo, shi] (where nonzero coefficients can possibly live) and a validity
interval [vlo, vhi] (where the stored coefficients are exactly the true
ones).  All operations propagate these windows, so equality checks are
either exact or explicitly undecidable (InsufficientTruncation) -- never
approximate.  Coefficients are exact rationals (gmpy2.mpq when available,
fractions.Fraction otherwise).
"""

from __future__ import annotations

import itertools
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

try:  # fast exact rationals if available
    from gmpy2 import mpq as Rat
except ImportError:  # pragma: no cover - environment dependent
    from fractions import Fraction as Rat

__all__ = [
    "Rat",
    "rat",
    "INF",
    "NEG_INF",
    "TruncationContext",
    "MultiSeries",
    "NotInvertible",
    "InsufficientTruncation",
    "SubstitutionIllDefined",
    "div_h",
]

INF = 10 ** 9
NEG_INF = -INF

ZERO = Rat(0)
ONE = Rat(1)


def rat(num, den=1) -> Rat:
    """Exact rational from ints / strings / rationals."""
    return Rat(num) / Rat(den) if den != 1 else Rat(num)


class NotInvertible(ArithmeticError):
    """The series has no inverse in the working ring."""


class InsufficientTruncation(ArithmeticError):
    """The truncation order / degree caps cannot support the request."""


class SubstitutionIllDefined(ArithmeticError):
    """A substitution would need infinitely many unknown contributions."""


def _sat_add(a: int, b: int) -> int:
    """Saturating addition on window bounds."""
    if a >= INF or b >= INF:
        return INF
    if a <= NEG_INF or b <= NEG_INF:
        return NEG_INF
    return a + b


# A window level is either None (nothing known at this h-order) or a tuple of
# per-variable 4-tuples (slo, shi, vlo, vhi).  "Known zero everywhere" is
# encoded by empty support slo=INF, shi=NEG_INF with full validity.
_FULL = None  # placeholder, built per-context


class TruncationContext:
    """Truncation data: h-order K, ordered spectral variables, degree caps.

    The variable order doubles as the expansion order (iota): when an offset
    like z+u appears in a negative power, the leftmost participating variable
    is the principal one by convention (callers always pass it explicitly).
    """

    __slots__ = ("h_order", "variables", "degree", "_index", "_empty_level",
                 "_full_neutral")

    def __init__(self, h_order: int, variables: Sequence[str],
                 degree: Mapping[str, int] | int):
        if h_order < 1:
            raise ValueError("h_order must be >= 1")
        self.h_order = int(h_order)
        self.variables = tuple(variables)
        if len(set(self.variables)) != len(self.variables):
            raise ValueError("duplicate variable names")
        if "h" in self.variables:
            raise ValueError("'h' is implicit and cannot be a variable name")
        if isinstance(degree, int):
            self.degree = tuple(degree for _ in self.variables)
        else:
            self.degree = tuple(int(degree[v]) for v in self.variables)
        self._index = {v: i for i, v in enumerate(self.variables)}
        n = len(self.variables)
        # level of a series that is known-zero at this h-order
        self._empty_level = tuple((INF, NEG_INF, NEG_INF, INF) for _ in range(n))
        # per-variable neutral window for a variable that does not appear
        self._full_neutral = (0, 0, NEG_INF, INF)

    @property
    def nvars(self) -> int:
        return len(self.variables)

    def var_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown variable {name!r}") from None

    def empty_level(self):
        return self._empty_level

    # ---- constructors ----------------------------------------------------

    def zero(self) -> "MultiSeries":
        win = tuple(self._empty_level for _ in range(self.h_order))
        return MultiSeries(self, {}, win, _normalized=True)

    def const(self, value) -> "MultiSeries":
        return self.from_terms({(0,) * (1 + self.nvars): rat(value)})

    def one(self) -> "MultiSeries":
        return self.const(1)

    def from_terms(self, terms: Mapping[Tuple[int, ...], object]) -> "MultiSeries":
        """Exact series from an explicit finite term map (fully valid)."""
        full = tuple(
            tuple(self._full_neutral for _ in range(self.nvars))
            for _ in range(self.h_order))
        t = {tuple(e): rat(c) for e, c in terms.items()}
        return MultiSeries(self, t, full)

    def monomial(self, coeff, h_exp: int = 0, **var_exps: int) -> "MultiSeries":
        exps = [0] * (1 + self.nvars)
        exps[0] = h_exp
        for v, e in var_exps.items():
            exps[1 + self.var_index(v)] = int(e)
        return self.from_terms({tuple(exps): rat(coeff)})

    def h(self) -> "MultiSeries":
        return self.monomial(1, h_exp=1)

    def var(self, name: str, exp: int = 1) -> "MultiSeries":
        return self.monomial(1, **{name: exp})

    def exp_atom(self, coeff, var: str) -> "MultiSeries":
        """exp(coeff*var) truncated at the variable's cap (h: at K).

        For a spectral variable the result is valid up to the degree cap and
        has (true) unbounded support above it; for h it is exact mod h^K.
        """
        c = rat(coeff)
        terms = {}
        if var == "h":
            acc = ONE
            for k in range(self.h_order):
                exps = [0] * (1 + self.nvars)
                exps[0] = k
                terms[tuple(exps)] = acc
                acc = acc * c / (k + 1)
            return self.from_terms(terms)  # exact mod h^K by definition
        j = self.var_index(var)
        cap = self.degree[j]
        acc = ONE
        for e in range(cap + 1):
            exps = [0] * (1 + self.nvars)
            exps[1 + j] = e
            terms[tuple(exps)] = acc
            acc = acc * c / (e + 1)
        ser = self.from_terms(terms)
        # exact support extends beyond the cap: mark validity honestly
        win = []
        for k in range(self.h_order):
            if k == 0:
                level = []
                for i in range(self.nvars):
                    if i == j:
                        level.append((0, INF, NEG_INF, cap))
                    else:
                        level.append(self._full_neutral)
                win.append(tuple(level))
            else:
                win.append(self._empty_level)
        return MultiSeries(self, dict(ser.terms), tuple(win))


class MultiSeries:
    """Sparse exact series: dict (h_exp, e_1, ..., e_n) -> rational."""

    __slots__ = ("ctx", "terms", "win")

    def __init__(self, ctx: TruncationContext, terms: Dict[Tuple[int, ...], Rat],
                 win, _normalized: bool = False):
        self.ctx = ctx
        if _normalized:
            self.terms = terms
            self.win = win
        else:
            self.terms, self.win = _normalize(ctx, terms, win)

    # ---- inspection --------------------------------------------------------

    def is_known_zero(self) -> bool:
        """True if no nonzero coefficient is stored (within validity)."""
        return not self.terms

    def nonzero_witness(self) -> Optional[Tuple[int, ...]]:
        """Lexicographically smallest exponent vector with nonzero coeff."""
        return min(self.terms) if self.terms else None

    def has_information(self) -> bool:
        """True if at least one h-level carries a nonempty valid box."""
        return any(lv is not None for lv in self.win)

    def level_valid(self, k: int) -> bool:
        return self.win[k] is not None

    def constant_term(self) -> Rat:
        zero = (0,) * (1 + self.ctx.nvars)
        lv = self.win[0]
        if lv is None:
            raise InsufficientTruncation("constant term not determined")
        for slo, shi, vlo, vhi in lv:
            if vlo > 0 or vhi < 0:
                raise InsufficientTruncation("constant term not determined")
        return self.terms.get(zero, ZERO)

    def involves(self, var: str) -> bool:
        j = 1 + self.ctx.var_index(var)
        return any(e[j] for e in self.terms)

    def copy(self) -> "MultiSeries":
        return MultiSeries(self.ctx, dict(self.terms), self.win, _normalized=True)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        names = ("h",) + self.ctx.variables
        bits = []
        for e in sorted(self.terms)[:12]:
            mono = "*".join(f"{n}^{p}" for n, p in zip(names, e) if p) or "1"
            bits.append(f"{self.terms[e]}*{mono}")
        more = " + ..." if len(self.terms) > 12 else ""
        return f"<MultiSeries {' + '.join(bits) or '0'}{more}>"

    # ---- ring operations ---------------------------------------------------

    def __neg__(self) -> "MultiSeries":
        return MultiSeries(self.ctx, {e: -c for e, c in self.terms.items()},
                           self.win, _normalized=True)

    def __add__(self, other) -> "MultiSeries":
        other = _coerce(self.ctx, other)
        terms = dict(self.terms)
        for e, c in other.terms.items():
            s = terms.get(e)
            if s is None:
                terms[e] = c
            else:
                s = s + c
                if s:
                    terms[e] = s
                else:
                    del terms[e]
        win = tuple(_level_add(a, b) for a, b in zip(self.win, other.win))
        return MultiSeries(self.ctx, terms, win)

    __radd__ = __add__

    def __sub__(self, other) -> "MultiSeries":
        return self + (-_coerce(self.ctx, other))

    def __rsub__(self, other) -> "MultiSeries":
        return _coerce(self.ctx, other) + (-self)

    def __mul__(self, other) -> "MultiSeries":
        if not isinstance(other, MultiSeries):
            c = rat(other)
            if not c:
                return self.ctx.zero()
            return MultiSeries(self.ctx, {e: v * c for e, v in self.terms.items()},
                               self.win, _normalized=True)
        ctx = self.ctx
        terms = _mul_terms(ctx, self.terms, other.terms)
        win = _mul_windows(ctx, self.win, other.win)
        out = MultiSeries(ctx, terms, win)
        if not out.has_information():
            raise InsufficientTruncation(
                "product window fully collapsed; raise truncation caps")
        return out

    __rmul__ = __mul__

    def pow_int(self, e: int, principal: Optional[str] = None) -> "MultiSeries":
        if e == 0:
            return self.ctx.one()
        base = self if e > 0 else self.invert(principal)
        out = base
        for _ in range(abs(e) - 1):
            out = out * base
        return out

    # ---- structural operations ----------------------------------------------

    def truncate_h(self, n: int) -> "MultiSeries":
        """The reduction mod h^n: levels >= n become known-zero."""
        ctx = self.ctx
        terms = {e: c for e, c in self.terms.items() if e[0] < n}
        win = tuple(lv if k < n else ctx.empty_level()
                    for k, lv in enumerate(self.win))
        return MultiSeries(ctx, terms, win, _normalized=True)

    def h_shift_down(self, d: int) -> "MultiSeries":
        """Divide by h^d exactly; the top d h-levels become unknown."""
        if d == 0:
            return self
        ctx = self.ctx
        K = ctx.h_order
        terms = {}
        for e, c in self.terms.items():
            if e[0] < d:
                raise NotInvertible(f"term with h-exponent {e[0]} < {d}")
            terms[(e[0] - d,) + e[1:]] = c
        win = list(self.win[d:]) + [None] * d
        out = MultiSeries(ctx, terms, tuple(win), _normalized=True)
        if not out.has_information():
            raise InsufficientTruncation("h-division exhausted the h-window")
        return out

    def coeff_extract(self, assign: Mapping[str, int]) -> "MultiSeries":
        """Coefficient of prod var^e over `assign`, as a series (exps zeroed)."""
        ctx = self.ctx
        idx = {1 + ctx.var_index(v): e for v, e in assign.items()}
        terms = {}
        for e, c in self.terms.items():
            if all(e[j] == want for j, want in idx.items()):
                ee = list(e)
                for j in idx:
                    ee[j] = 0
                terms[tuple(ee)] = c
        win = []
        for lv in self.win:
            if lv is None:
                win.append(None)
                continue
            ok = True
            for j, want in idx.items():
                slo, shi, vlo, vhi = lv[j - 1]
                if want < vlo or want > vhi:
                    ok = False
                    break
            if not ok:
                win.append(None)
                continue
            level = []
            for i, w in enumerate(lv):
                if (i + 1) in idx:
                    level.append((0, 0, NEG_INF, INF))
                else:
                    level.append(w)
            win.append(tuple(level))
        return MultiSeries(ctx, terms, tuple(win))

    def var_exponents(self, var: str) -> Tuple[int, ...]:
        j = 1 + self.ctx.var_index(var)
        return tuple(sorted({e[j] for e in self.terms}))

    # ---- inversion / roots ----------------------------------------------------

    def invert(self, principal: Optional[str] = None) -> "MultiSeries":
        """Multiplicative inverse, expanding negative powers of `principal`.

        The h^0 pure-principal part must be nonzero; after factoring its
        lowest monomial u^d*c0 the remainder must lie in the ideal generated
        by h and nonnegative powers of the remaining variables (checked).
        """
        ctx = self.ctx
        pj = None if principal is None else 1 + ctx.var_index(principal)
        # pure principal part: h = 0 and all other variables = 0
        pure = {}
        for e, c in self.terms.items():
            if e[0] != 0:
                continue
            if any(x != 0 for i, x in enumerate(e[1:], start=1)
                   if i != pj):
                continue
            pure[e[pj] if pj is not None else 0] = c
        if not pure:
            raise NotInvertible("h^0 pure principal part is zero")
        d = min(pure)
        c0 = pure[d]
        # check the level-0 window actually covers exponent d
        lv0 = self.win[0]
        if lv0 is None:
            raise InsufficientTruncation("h^0 level is unknown")
        if pj is not None:
            slo, shi, vlo, vhi = lv0[pj - 1]
            if d < vlo or d > vhi:
                raise InsufficientTruncation("leading principal term outside window")
        # m_inv = u^{-d} / c0 ; G = a * m_inv - 1
        if pj is None:
            m_inv = ctx.const(ONE / c0)
        else:
            exps = [0] * (1 + ctx.nvars)
            exps[pj] = -d
            m_inv = ctx.from_terms({tuple(exps): ONE / c0})
        g = self * m_inv - ctx.one()
        for e in g.terms:
            if any(x < 0 for i, x in enumerate(e[1:], start=1) if i != pj):
                raise NotInvertible(
                    "remainder has negative exponents off the principal variable")
            if e[0] == 0 and all(x == 0 for x in e[1:]):
                raise NotInvertible("remainder has a constant term")
        # geometric series 1/(1+G) = sum (-G)^l on raw terms; the result
        # window is derived directly below instead of compounding the
        # (sound but very loose) per-step product windows.
        neg_g = {e: -c for e, c in g.terms.items()}
        one_key = (0,) * (1 + ctx.nvars)
        acc = {one_key: ONE}
        total = {one_key: ONE}
        for _ in range(4 * (ctx.h_order + sum(ctx.degree) + 4)):
            acc = _mul_terms(ctx, acc, neg_g, drop_caps=True)
            if not acc:
                break
            for e, c in acc.items():
                s = total.get(e)
                s = c if s is None else s + c
                if s:
                    total[e] = s
                else:
                    del total[e]
        else:
            raise NotInvertible("geometric expansion did not terminate")
        # Sound validity of sum_l (-G)^l.  G is known exactly on its window
        # boxes; dropped true terms either exceed a non-principal cap (these
        # only influence coefficients outside the box, since G has no
        # negative non-principal exponents) or exceed the principal validity
        # Ug.  A dropped principal-high term can reach final principal
        # exponent j only with j >= Ug+1 - delta*(other degree), where delta
        # bounds the principal deficiency a single G-factor carries per unit
        # of its non-principal degree budget.  Hence coefficients with
        # j <= Ug - delta*(sum_i E_i + m) at h-level m are exact.
        delta = 0
        if pj is not None:
            for e in g.terms:
                if e[pj] < 0:
                    delta = max(delta, -e[pj])
        present = [any(e[1 + i] for e in g.terms) for i in range(ctx.nvars)]
        win = []
        dead = False
        for m in range(ctx.h_order):
            if dead or g.win[m] is None:
                dead = True
                win.append(None)
                continue
            ug = INF
            level = []
            e_sum = 0
            for i in range(ctx.nvars):
                u_i = min(g.win[mm][i][3] for mm in range(m + 1))
                if pj is not None and i == pj - 1:
                    ug = u_i
                    level.append(None)  # placeholder, filled below
                else:
                    if not present[i] and u_i >= INF:
                        level.append((0, 0, NEG_INF, INF))
                    else:
                        e_i = min(u_i, ctx.degree[i])
                        level.append((0, INF, NEG_INF, e_i))
                        if present[i]:
                            e_sum += e_i
            if pj is not None:
                if ug >= INF:
                    vhi = INF
                elif delta == 0:
                    vhi = ug
                else:
                    vhi = ug - delta * (e_sum + m)
                slo = -delta * (e_sum + m) if delta else 0
                level[pj - 1] = (slo, INF, NEG_INF, vhi)
            win.append(tuple(level))
        out = MultiSeries(ctx, total, tuple(win))
        return out * m_inv

    def sqrt_unit(self) -> "MultiSeries":
        """Square root of a unit series with constant term 1 (branch +1)."""
        ctx = self.ctx
        if self.constant_term() != ONE:
            raise NotInvertible("sqrt_unit needs constant term exactly 1")
        x = self - ctx.one()
        for e in x.terms:
            if any(v < 0 for v in e[1:]):
                raise NotInvertible("sqrt_unit argument must be non-Laurent")
            if e[0] == 0 and all(v == 0 for v in e[1:]):
                raise NotInvertible("sqrt_unit remainder has a constant term")
        out = ctx.one()
        acc = ctx.one()
        coeff = ONE
        for l in range(1, 4 * (ctx.h_order + sum(ctx.degree) + 4)):
            coeff = coeff * (Rat(3) / (2 * l) - 1)  # binom(1/2, l) update
            acc = acc * x
            if not acc.terms:
                out = out + acc
                break
            out = out + coeff * acc
        else:
            raise NotInvertible("sqrt expansion did not terminate")
        return out

    # ---- substitution ---------------------------------------------------------

    def substitute(self, var: str, image: "MultiSeries",
                   principal: Optional[str] = None) -> "MultiSeries":
        """Replace `var` by `image`.

        Allowed when either (a) the series is exactly polynomial in `var`
        (full validity in var at every known level), or (b) every output
        monomial receives finitely many contributions because the image is
        anchored: all its terms share the same nonzero exponent pattern on
        some other variable per unit of `var`-degree (e.g. monomial images,
        or var2 * unit-series images).  Case (b) is detected via the image
        having no constant term.

        A weaker anchor also suffices: a single variable carried by every
        image term with exponent one (e.g. z * e^{cu}).  Then the `var`
        exponent maps one-to-one onto the anchor exponent, and the output
        anchor-validity window is capped so that contributions lost to the
        `var` truncation fall outside it.
        """
        ctx = self.ctx
        j = 1 + ctx.var_index(var)
        exps = sorted({e[j] for e in self.terms})
        zero_exp = (0,) * (1 + ctx.nvars)
        image_has_const = zero_exp in image.terms
        exact_in_var = all(
            lv is None or (lv[j - 1][2] == NEG_INF and lv[j - 1][3] == INF)
            for lv in self.win)
        if image_has_const and not exact_in_var:
            raise SubstitutionIllDefined(
                f"image has a constant term but series is truncated in {var!r}")
        anchor = None
        if not exact_in_var:
            # every image term must move var-degree into some anchor variable
            # homogeneously; sufficient practical test: all image terms have
            # identical exponent vectors outside h, or the image is
            # (monomial)*(series with terms of zero spectral degree).
            anchors = {tuple(x for i, x in enumerate(e[1:])) for e in image.terms}
            if len(anchors) != 1:
                # offsets like z+u are degree-1 homogeneous incl. h: also fine
                degs = {e[0] + sum(e[1:]) for e in image.terms}
                if len(degs) != 1:
                    for i in range(1, 1 + ctx.nvars):
                        if i != j and {e[i] for e in image.terms} == {1}:
                            anchor = i
                            break
                    if anchor is None:
                        raise SubstitutionIllDefined(
                            "image neither anchored nor homogeneous while "
                            f"the series is truncated in {var!r}")
        out = ctx.zero()
        pow_cache: Dict[int, MultiSeries] = {0: ctx.one()}
        inv = None

        def image_pow(e: int) -> MultiSeries:
            nonlocal inv
            if e in pow_cache:
                return pow_cache[e]
            if e > 0:
                prev = image_pow(e - 1)
                pow_cache[e] = prev * image
            else:
                if inv is None:
                    inv = image.invert(principal)
                prev = image_pow(e + 1)
                pow_cache[e] = prev * inv
            return pow_cache[e]

        for e in exps:
            coeff = self.coeff_extract({var: e})
            out = out + coeff * image_pow(e)
        # variable `var` no longer occurs: neutralize its window
        win = []
        for lv in out.win:
            if lv is None:
                win.append(None)
                continue
            level = list(lv)
            level[j - 1] = (0, 0, NEG_INF, INF)
            win.append(tuple(level))
        if anchor is None:
            return MultiSeries(ctx, out.terms, tuple(win), _normalized=True)
        # single-variable anchor: contributions from var-exponents beyond the
        # series' validity are missing; they carry anchor exponent at least
        # (vhi_var + 1) plus the lowest anchor exponent the coefficients hold
        # (zero when the series is anchor-free), so cap validity below that.
        slo_anchor = min((e[anchor] for e in self.terms), default=0)
        slo_anchor = min(slo_anchor, 0)
        capped = []
        for k, lv in enumerate(win):
            if lv is None:
                capped.append(None)
                continue
            vhis = [self.win[k2][j - 1][3] for k2 in range(k + 1)
                    if self.win[k2] is not None]
            vhi_var = min(vhis) if vhis else INF
            if vhi_var >= INF:
                capped.append(lv)
                continue
            bound = _sat_add(vhi_var + 1, slo_anchor) - 1
            level = list(lv)
            slo, shi, vlo, vhi = level[anchor - 1]
            level[anchor - 1] = (slo, shi, vlo, min(vhi, bound))
            capped.append(tuple(level))
        return MultiSeries(ctx, out.terms, tuple(capped))

    def shift_h(self, var: str, beta) -> "MultiSeries":
        """Substitute var -> var + beta*h via the binomial expansion.

        Exact for Laurent series: u^e -> sum_j C(e,j) (beta h)^j u^{e-j},
        the sum truncated by the h-order.  Window levels shift accordingly.
        """
        b = rat(beta)
        if not b:
            return self
        ctx = self.ctx
        K = ctx.h_order
        j = 1 + ctx.var_index(var)
        terms: Dict[Tuple[int, ...], Rat] = {}
        for e, c in self.terms.items():
            room = K - e[0]
            binom = ONE
            for l in range(room):
                if l > 0:
                    binom = binom * (e[j] - l + 1) / l * b
                val = c * binom
                if not val:
                    if l > 0 and e[j] >= 0 and l > e[j]:
                        break
                    continue
                ee = list(e)
                ee[0] += l
                ee[j] -= l
                key = tuple(ee)
                s = terms.get(key)
                if s is None:
                    terms[key] = val
                else:
                    s = s + val
                    if s:
                        terms[key] = s
                    else:
                        del terms[key]
        win = []
        for k in range(K):
            level = None
            for l in range(k + 1):  # source level k-l contributes at shift l
                src = self.win[k - l]
                if src is None:
                    level = None
                    break
                if _level_is_empty(src):
                    continue  # known-zero source level: no contribution
                shifted = []
                for i, (slo, shi, vlo, vhi) in enumerate(src):
                    if i == j - 1:
                        shifted.append((_sat_add(slo, -l), _sat_add(shi, -l),
                                        _sat_add(vlo, -l), _sat_add(vhi, -l)))
                    else:
                        shifted.append((slo, shi, vlo, vhi))
                shifted = tuple(shifted)
                level = shifted if level is None else _level_join(level, shifted)
            win.append(level)
        return MultiSeries(ctx, terms, tuple(win))

    def scale_var(self, var: str, beta) -> "MultiSeries":
        """Substitute var -> var * e^{beta*h} via the exponential expansion.

        Exact for Laurent series: u^e -> e^{e*beta*h} u^e, the exponential
        truncated by the h-order; variable exponents are unchanged, so the
        window levels recombine without exponent shifts.
        """
        b = rat(beta)
        if not b:
            return self
        ctx = self.ctx
        K = ctx.h_order
        j = 1 + ctx.var_index(var)
        terms: Dict[Tuple[int, ...], Rat] = {}
        for e, c in self.terms.items():
            room = K - e[0]
            coeff = ONE
            for l in range(room):
                if l > 0:
                    coeff = coeff * b * e[j] / l
                val = c * coeff
                if not val:
                    if l > 0:
                        break  # var-exponent zero: higher orders stay zero
                    continue
                ee = list(e)
                ee[0] += l
                key = tuple(ee)
                s = terms.get(key)
                if s is None:
                    terms[key] = val
                else:
                    s = s + val
                    if s:
                        terms[key] = s
                    else:
                        del terms[key]
        win = []
        for k in range(K):
            level = None
            for l in range(k + 1):  # source level k-l contributes at shift l
                src = self.win[k - l]
                if src is None:
                    level = None
                    break
                if _level_is_empty(src):
                    continue  # known-zero source level: no contribution
                level = src if level is None else _level_join(level, src)
            win.append(level)
        return MultiSeries(ctx, terms, tuple(win))

    # ---- certification ---------------------------------------------------------

    def certify_polynomial(self, var: str, h_order: int,
                           val_offset: int = 0) -> "MultiSeries":
        """Certify that mod h^h_order the series is polynomial in `var`.

        Uses the valuation pattern: every stored term must satisfy
        var_exp <= h_exp + val_offset, and the window must actually reach
        that bound at each level (so the unknown region is covered by the
        valuation bound).  Returns the mod-h^h_order part with `var` marked
        exact.  Raises InsufficientTruncation / SubstitutionIllDefined on
        failure.
        """
        ctx = self.ctx
        j = 1 + ctx.var_index(var)
        for e in self.terms:
            if e[0] < h_order and e[j] > e[0] + val_offset:
                raise SubstitutionIllDefined(
                    f"term violates valuation bound {var}-exp <= h-exp + "
                    f"{val_offset}")
        part = self.truncate_h(h_order)
        win = []
        for k, lv in enumerate(part.win):
            if k >= h_order:
                win.append(lv)
                continue
            if lv is None:
                raise InsufficientTruncation(f"h-level {k} unknown")
            slo, shi, vlo, vhi = lv[j - 1]
            if vhi < k + val_offset:
                raise InsufficientTruncation(
                    f"window too small to certify polynomiality at level {k}")
            level = list(lv)
            level[j - 1] = (slo, min(shi, k + val_offset), NEG_INF, INF)
            win.append(tuple(level))
        return MultiSeries(ctx, part.terms, tuple(win), _normalized=True)

    # ---- comparison ---------------------------------------------------------

    def equal_within_windows(self, other) -> Tuple[bool, Optional[Tuple[int, ...]]]:
        """(equal?, witness).  Raises if the compared region is empty."""
        diff = self - _coerce(self.ctx, other)
        if not diff.has_information():
            raise InsufficientTruncation("comparison region is empty")
        w = diff.nonzero_witness()
        return (w is None), w


def _coerce(ctx: TruncationContext, x) -> MultiSeries:
    if isinstance(x, MultiSeries):
        return x
    return ctx.const(x)


def _mul_terms(ctx, ta, tb, drop_caps=False):
    """Raw term product, dropping h-levels >= K.

    With drop_caps, over-cap variable powers are dropped immediately; the
    caller is then responsible for window tainting (plain products leave
    them for _normalize to record).
    """
    K = ctx.h_order
    caps = ctx.degree
    nv = ctx.nvars
    out: Dict[Tuple[int, ...], Rat] = {}
    a_lv = _group_by_level(ta, K)
    b_lv = _group_by_level(tb, K)
    for k1, da in a_lv.items():
        for k2, db in b_lv.items():
            if k1 + k2 >= K:
                continue
            for e1, c1 in da.items():
                for e2, c2 in db.items():
                    e = tuple(x + y for x, y in zip(e1, e2))
                    if drop_caps and any(e[1 + i] > caps[i]
                                         for i in range(nv)):
                        continue
                    s = out.get(e)
                    s = c1 * c2 if s is None else s + c1 * c2
                    if s:
                        out[e] = s
                    else:
                        del out[e]
    return out


def _group_by_level(terms, K):
    out: Dict[int, Dict[Tuple[int, ...], Rat]] = {}
    for e, c in terms.items():
        out.setdefault(e[0], {})[e] = c
    return out


def _level_join(a, b):
    """Window for the sum of two contributions at the same h-level."""
    out = []
    for (slo1, shi1, vlo1, vhi1), (slo2, shi2, vlo2, vhi2) in zip(a, b):
        out.append((min(slo1, slo2), max(shi1, shi2),
                    max(vlo1, vlo2), min(vhi1, vhi2)))
    return tuple(out)


def _level_add(a, b):
    if a is None or b is None:
        return None  # adding anything to an unknown level stays unknown
    return _level_join(a, b)


def _level_is_empty(level) -> bool:
    return level is not None and all(w[0] >= INF for w in level)


def _mul_windows(ctx, wa, wb):
    K = ctx.h_order
    out = []
    for k in range(K):
        level = None
        dead = False
        seen = False
        for k1 in range(k + 1):
            k2 = k - k1
            la, lb = wa[k1], wb[k2]
            if la is not None and _level_is_empty(la):
                continue
            if lb is not None and _level_is_empty(lb):
                continue
            if la is None or lb is None:
                dead = True
                break
            combined = []
            for (slo1, shi1, vlo1, vhi1), (slo2, shi2, vlo2, vhi2) in zip(la, lb):
                slo = _sat_add(slo1, slo2)
                shi = _sat_add(shi1, shi2)
                # unknown-high of a times support-low of b taints above:
                vhi = min(
                    INF if vhi1 >= INF else _sat_add(vhi1, slo2),
                    INF if vhi2 >= INF else _sat_add(vhi2, slo1))
                # unknown-low of a times support-high of b taints below:
                vlo = max(
                    NEG_INF if vlo1 <= NEG_INF else _sat_add(vlo1, shi2),
                    NEG_INF if vlo2 <= NEG_INF else _sat_add(vlo2, shi1))
                combined.append((slo, shi, vlo, vhi))
            combined = tuple(combined)
            level = combined if level is None else _level_join(level, combined)
            seen = True
        if dead:
            out.append(None)
        elif not seen:
            out.append(ctx.empty_level())
        else:
            out.append(level)
    return tuple(out)


def _normalize(ctx, terms, win):
    K = ctx.h_order
    nv = ctx.nvars
    win = list(win)
    kept: Dict[Tuple[int, ...], Rat] = {}
    capped = [dict() for _ in range(K)]  # var index -> capped vhi
    for e, c in terms.items():
        if not c:
            continue
        k = e[0]
        if k < 0:
            raise ValueError("negative h-exponent")
        if k >= K:
            continue
        lv = win[k]
        if lv is None:
            continue
        drop = False
        for i in range(nv):
            x = e[1 + i]
            slo, shi, vlo, vhi = lv[i]
            if x > ctx.degree[i]:
                capped[k][i] = min(capped[k].get(i, INF), ctx.degree[i])
                drop = True
                break
            if x > vhi or x < vlo:
                drop = True
                break
        if not drop:
            kept[e] = c
    # apply degree-cap taint
    for k in range(K):
        if win[k] is None or not capped[k]:
            continue
        level = list(win[k])
        for i, cap in capped[k].items():
            slo, shi, vlo, vhi = level[i]
            level[i] = (slo, shi, vlo, min(vhi, cap))
        win[k] = tuple(level)
    # collapse detection + support tightening
    obs: Dict[int, list] = {}
    for e in kept:
        k = e[0]
        if k not in obs:
            obs[k] = [[INF, NEG_INF] for _ in range(nv)]
        row = obs[k]
        for i in range(nv):
            x = e[1 + i]
            if x < row[i][0]:
                row[i][0] = x
            if x > row[i][1]:
                row[i][1] = x
    for k in range(K):
        lv = win[k]
        if lv is None:
            continue
        if any(w[2] > w[3] for w in lv):  # vlo > vhi: level collapsed
            win[k] = None
            for e in [e for e in kept if e[0] == k]:
                del kept[e]
            continue
        # Observed-support tightening: sound for variable i whenever every
        # *other* variable is fully valid, because then any unknown term must
        # exceed vhi_i in the i-direction (so support below is exactly the
        # observed support).
        row = obs.get(k)
        level = list(lv)
        for i in range(nv):
            slo, shi, vlo, vhi = level[i]
            others_valid = all(
                level[j][2] <= NEG_INF and level[j][3] >= INF
                for j in range(nv) if j != i)
            if not others_valid:
                continue
            o_lo, o_hi = (row[i] if row else (INF, NEG_INF))
            if vlo <= NEG_INF:
                slo = o_lo if vhi >= INF else min(o_lo, vhi + 1)
            if vhi >= INF:
                shi = o_hi if vlo <= NEG_INF else max(o_hi, vlo - 1)
            level[i] = (slo, shi, vlo, vhi)
        win[k] = tuple(level)
    return kept, tuple(win)


def div_h(num: MultiSeries, den: MultiSeries,
          principal: Optional[str] = None) -> MultiSeries:
    """Exact num/den where den has positive h-valuation d (num's >= d).

    Both are divided by h^d (losing the top d h-levels of validity) and the
    now-unit denominator is inverted.  This is the only sanctioned route to
    h-denominators; the result stays free of negative h-exponents.
    """
    if not den.terms:
        raise NotInvertible("division by (known) zero")
    d = min(e[0] for e in den.terms)
    num2 = num.h_shift_down(d) if d else num
    den2 = den.h_shift_down(d) if d else den
    return num2 * den2.invert(principal)


# ---------------------------------------------------------------------------
# Normalizing series
# ---------------------------------------------------------------------------


class NormSeriesBundle:
    """The product-normalizing series for a given rank parameter M.

    gbar(x) is the unique series in 1 + x*Q[[x,h]] with
        gbar(x) gbar(x e^{-2h}) ... gbar(x e^{-2(M-1)h})
            = (1 - x e^{-2(M-1)h}) / (1 - x),
    fbar(x) = (1-x)/(1-x e^{-2h}) * gbar(x), and f(u) = fbar(e^{-2u/a}).

    Modulo h^n, gbar(x) is rational in x with poles only at x = 1, so
    evaluation at an exponential image goes through a pole-clearing step:
    find the minimal r with (1-x)^r gbar polynomial mod h^n, evaluate that
    exact polynomial at the image and divide by (1-image)^r.
    """

    __slots__ = ("M", "a", "h_order", "_ctx", "_gbar", "_cleared")

    def __init__(self, M: int, h_order: int, a=1, x_cap: Optional[int] = None):
        if M < 1:
            raise ValueError("M must be >= 1")
        self.M = int(M)
        self.a = rat(a)
        self.h_order = int(h_order)
        if x_cap is None:
            x_cap = 3 * h_order + 4
        self._ctx = TruncationContext(h_order, ["x"], {"x": x_cap})
        self._gbar = self._solve()
        self._cleared = {}

    # ---- solving ----------------------------------------------------------

    def _scale_x(self, s: MultiSeries, j: int) -> MultiSeries:
        """s(x e^{-2jh}) for an exact polynomial s."""
        ctx = self._ctx
        K = ctx.h_order
        terms: Dict[Tuple[int, ...], Rat] = {}
        # e^{-2jkh} per x-degree k, expanded exactly mod h^K
        for (he, xe), coeff in s.terms.items():
            acc = coeff
            c = rat(-2 * j * xe)
            for l in range(K - he):
                key = (he + l, xe)
                terms[key] = terms.get(key, ZERO) + acc
                acc = acc * c / (l + 1)
        return ctx.from_terms({e: v for e, v in terms.items() if v})

    def _solve(self) -> MultiSeries:
        ctx = self._ctx
        cap = ctx.degree[0]
        one = ctx.one()
        x = ctx.var("x")
        rhs = (one - x * ctx.exp_atom(-2 * (self.M - 1), "h")) \
            * (one - x).invert("x")
        gbar = one
        for k in range(1, cap + 1):
            prod = one
            for j in range(self.M):
                prod = prod * self._scale_x(gbar, j)
            delta = (rhs - prod).coeff_extract({"x": k})
            den = ctx.zero()
            for j in range(self.M):
                den = den + ctx.exp_atom(-2 * j * k, "h")
            g_k = delta * den.invert()
            gbar = gbar + g_k * ctx.var("x", k)
        return gbar

    # ---- certified evaluation ----------------------------------------------

    def gbar_cleared(self, n: Optional[int] = None,
                     margin: int = 2) -> Tuple[int, MultiSeries]:
        """Minimal r with (1-x)^r gbar(x) polynomial mod h^n.

        Certification is by observed zero tail: after clearing, all stored
        x-degrees must sit at least `margin` below the solving cap.  Returns
        (r, the exact polynomial in the solving context).
        """
        if n is None:
            n = self.h_order
        key = (n, margin)
        if key in self._cleared:
            return self._cleared[key]
        ctx = self._ctx
        cap = ctx.degree[0]
        one_minus_x = ctx.one() - ctx.var("x")
        cur = self._gbar.truncate_h(n)
        for r in range(n + 1):
            terms = {e: c for e, c in cur.terms.items() if e[0] < n}
            if all(e[1] <= cap - margin for e in terms):
                poly = ctx.from_terms(terms)
                self._cleared[key] = (r, poly)
                return r, poly
            cur = cur * one_minus_x
        raise NotInvertible(
            f"no pole-clearing exponent r <= {n} found for gbar")

    def gbar_at(self, image: MultiSeries,
                principal: Optional[str] = None) -> MultiSeries:
        """gbar evaluated at a unit-constant-term image, in the image's context."""
        tgt = image.ctx
        r, poly = self.gbar_cleared(tgt.h_order)
        out = tgt.zero()
        for (he, xe), coeff in poly.terms.items():
            out = out + tgt.monomial(coeff, h_exp=he) * image.pow_int(xe, principal)
        if r:
            out = out * (tgt.one() - image).pow_int(-r, principal)
        return out

    def fbar_at(self, image: MultiSeries,
                principal: Optional[str] = None) -> MultiSeries:
        """fbar = (1-x)/(1-x e^{-2h}) gbar at the given image."""
        tgt = image.ctx
        num = tgt.one() - image
        den = tgt.one() - image * tgt.exp_atom(-2, "h")
        return num * den.invert(principal) * self.gbar_at(image, principal)

    def f_at(self, u_image: MultiSeries,
             principal: Optional[str] = None) -> MultiSeries:
        """f at an exponentialized additive argument: pass e^{-2*arg/a}."""
        return self.fbar_at(u_image, principal)

    def exp_arg(self, ctx, terms, beta=0) -> MultiSeries:
        """e^{-2*(sum_i coeff_i*var_i + beta*h)/a} for arg given as {var: coeff}."""
        out = ctx.one()
        for v, coeff in terms.items():
            out = out * ctx.exp_atom(rat(-2) * rat(coeff) / self.a, v)
        if beta:
            out = out * ctx.exp_atom(rat(-2) * rat(beta) / self.a, "h")
        return out

    def gbar_in(self, ctx) -> MultiSeries:
        """The solved gbar transported into a caller context with variable x."""
        cap = ctx.degree[ctx.var_index("x")]
        terms = {}
        for (he, xe), c in self._gbar.terms.items():
            if xe <= cap and he < ctx.h_order:
                exps = [0] * (1 + ctx.nvars)
                exps[0] = he
                exps[1 + ctx.var_index("x")] = xe
                terms[tuple(exps)] = c
        return ctx.from_terms(terms)
