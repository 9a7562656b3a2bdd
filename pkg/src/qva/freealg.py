"""Free-algebra states for the generator families and the ordered L-products.

Five generator families share one state model: words are finite sequences of
letters (i, j, r) with 1 <= i, j <= N and a mode r (r >= 1 for the four "+"
families; any integer for the double family).  States are matrix-valued
elements of the free span of words with exact multi-series coefficients; the
defining quadratic relations are never imposed -- they are exercised through
defect states (`rtt_defect`) that downstream operators must annihilate.

A `MatState` lives on a fixed number of tensor legs.  Generating series are
applied to an existing leg by matrix contraction, with the new letter
concatenated on the left of every word (operators applied later sit further
left in the product).  Rational R-matrix factors multiply states through a
shared central scalar denominator, mirroring the cross-multiplied equality
used throughout the verification layer.
"""

from __future__ import annotations

import itertools
from typing import Dict, Mapping, Optional, Sequence, Tuple

from .series import MultiSeries, TruncationContext, InsufficientTruncation, rat
from .tensor import TensorOp
from .baxter import Baxterizer, RationalOp

RTT_ADD = "RTT-add"
BRAIDED_ADD = "braided-add"
RTT_MULT = "RTT-mult"
BRAIDED_MULT = "braided-mult"
DOUBLE = "double"

FLAVORS = (RTT_ADD, BRAIDED_ADD, RTT_MULT, BRAIDED_MULT, DOUBLE)
BRAIDED_FLAVORS = (BRAIDED_ADD, BRAIDED_MULT)
MULT_FLAVORS = (RTT_MULT, BRAIDED_MULT, DOUBLE)

Letter = Tuple[int, int, int]


class WordLengthExceeded(Exception):
    """A construction would produce a word longer than the length bound."""


class SkipDegenerate(Exception):
    """The requested relation instance is degenerate (collapses to 0 = 0)."""


class Word:
    """An ordered product of generators of one family.

    Letters read left to right; `(i, j, r)` is the generator with matrix
    position (i, j) and mode r.  Modes are positive for the four "+" families;
    the double family also admits r <= 0 (the annihilation-side modes).
    """

    __slots__ = ("flavor", "letters", "_hash")

    def __init__(self, flavor: str, letters: Sequence[Letter] = ()):
        if flavor not in FLAVORS:
            raise ValueError(f"unknown flavor {flavor!r}")
        self.flavor = flavor
        self.letters = tuple(tuple(l) for l in letters)
        self._hash = hash((flavor, self.letters))

    def validate(self, N: int, G: int, Rmax: int) -> None:
        if len(self.letters) > G:
            raise WordLengthExceeded(f"word length {len(self.letters)} > {G}")
        for (i, j, r) in self.letters:
            if not (1 <= i <= N and 1 <= j <= N):
                raise ValueError(f"matrix position out of range: {(i, j)}")
            if self.flavor == DOUBLE:
                if abs(r) > Rmax:
                    raise ValueError(f"mode {r} exceeds bound {Rmax}")
            elif not (1 <= r <= Rmax):
                raise ValueError(f"mode {r} out of range for {self.flavor}")

    def __len__(self) -> int:
        return len(self.letters)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Word) and self.flavor == other.flavor
                and self.letters == other.letters)

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "Word") -> bool:
        return self.letters < other.letters

    def concat(self, other: "Word") -> "Word":
        if self.flavor != other.flavor:
            raise ValueError("cannot concatenate words of different flavors")
        return Word(self.flavor, self.letters + other.letters)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        body = "*".join(f"g[{i},{j}]^({r})" for i, j, r in self.letters)
        return body or "1"


class AlgElement:
    """A finite combination of words with multi-series coefficients."""

    __slots__ = ("ctx", "flavor", "combo")

    def __init__(self, ctx: TruncationContext, flavor: str,
                 combo: Mapping[Word, MultiSeries]):
        self.ctx = ctx
        self.flavor = flavor
        self.combo = dict(combo)

    @classmethod
    def zero(cls, ctx: TruncationContext, flavor: str) -> "AlgElement":
        return cls(ctx, flavor, {})

    @classmethod
    def unit(cls, ctx: TruncationContext, flavor: str) -> "AlgElement":
        return cls(ctx, flavor, {Word(flavor): ctx.one()})

    def copy(self) -> "AlgElement":
        return AlgElement(self.ctx, self.flavor, self.combo)

    def __add__(self, other: "AlgElement") -> "AlgElement":
        combo = dict(self.combo)
        for w, s in other.combo.items():
            combo[w] = combo[w] + s if w in combo else s
        return AlgElement(self.ctx, self.flavor, combo)

    def __neg__(self) -> "AlgElement":
        return AlgElement(self.ctx, self.flavor,
                          {w: -s for w, s in self.combo.items()})

    def __sub__(self, other: "AlgElement") -> "AlgElement":
        return self + (-other)

    def scale(self, s: MultiSeries) -> "AlgElement":
        return AlgElement(self.ctx, self.flavor,
                          {w: s * c for w, c in self.combo.items()})

    def __mul__(self, other: "AlgElement") -> "AlgElement":
        """Free product: concatenate words, multiply coefficients."""
        combo: Dict[Word, MultiSeries] = {}
        for wa, ca in self.combo.items():
            for wb, cb in other.combo.items():
                w = wa.concat(wb)
                c = ca * cb
                combo[w] = combo[w] + c if w in combo else c
        return AlgElement(self.ctx, self.flavor, combo)

    def max_word_len(self) -> int:
        return max((len(w) for w in self.combo), default=0)

    def is_zero(self) -> Tuple[bool, Optional[tuple]]:
        for w in sorted(self.combo):
            s = self.combo[w]
            if not s.is_known_zero():
                return False, (w.letters, s.nonzero_witness())
        return True, None

    def equal(self, other: "AlgElement") -> Tuple[bool, Optional[tuple]]:
        return (self - other).is_zero()

    def coeff(self, word: Word) -> MultiSeries:
        return self.combo.get(word, self.ctx.zero())

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return "AlgElement(" + ", ".join(
            f"{w!r}: {s!r}" for w, s in sorted(self.combo.items())) + ")"


class MatState:
    """A matrix-valued state: (End C^N)^(x m) tensor the free word span.

    `entries` maps (row multi-index, column multi-index) to coefficients;
    `den` is a central scalar denominator shared by all entries (rational
    R-matrix factors contribute to it).  `G` bounds word length, `Rmax`
    bounds generator modes.
    """

    __slots__ = ("ctx", "N", "flavor", "m", "entries", "den", "G", "Rmax")

    def __init__(self, ctx: TruncationContext, N: int, flavor: str, m: int,
                 entries: Mapping[tuple, AlgElement], den: MultiSeries,
                 G: int, Rmax: int):
        self.ctx = ctx
        self.N = N
        self.flavor = flavor
        self.m = m
        self.entries = dict(entries)
        self.den = den
        self.G = G
        self.Rmax = Rmax

    @classmethod
    def vacuum(cls, ctx: TruncationContext, N: int, flavor: str, m: int,
               G: int, Rmax: int) -> "MatState":
        """Identity matrix on every leg, unit word coefficient."""
        one = AlgElement.unit(ctx, flavor)
        entries = {(idx, idx): one
                   for idx in itertools.product(range(N), repeat=m)}
        return cls(ctx, N, flavor, m, entries, ctx.one(), G, Rmax)

    def _like(self, entries, den=None) -> "MatState":
        return MatState(self.ctx, self.N, self.flavor, self.m, entries,
                        self.den if den is None else den, self.G, self.Rmax)

    # ---- linear structure -------------------------------------------------------

    def __add__(self, other: "MatState") -> "MatState":
        assert self.m == other.m and self.flavor == other.flavor
        entries: Dict[tuple, AlgElement] = {}
        for (k, el) in self.entries.items():
            entries[k] = el.scale(other.den)
        for (k, el) in other.entries.items():
            scaled = el.scale(self.den)
            entries[k] = entries[k] + scaled if k in entries else scaled
        return self._like(entries, self.den * other.den)

    def __neg__(self) -> "MatState":
        return self._like({k: -el for k, el in self.entries.items()})

    def __sub__(self, other: "MatState") -> "MatState":
        return self + (-other)

    def scale_series(self, s: MultiSeries) -> "MatState":
        return self._like({k: el.scale(s) for k, el in self.entries.items()})

    # ---- matrix action ----------------------------------------------------------

    def act_left(self, op) -> "MatState":
        """Left matrix multiplication on the legs by a (rational) operator."""
        if isinstance(op, RationalOp):
            return self._act(op.num, left=True, extra_den=op.den)
        return self._act(op, left=True)

    def act_right(self, op) -> "MatState":
        """Right matrix multiplication on the legs by a (rational) operator."""
        if isinstance(op, RationalOp):
            return self._act(op.num, left=False, extra_den=op.den)
        return self._act(op, left=False)

    def _act(self, op: TensorOp, left: bool,
             extra_den: Optional[MultiSeries] = None) -> "MatState":
        assert op.m == self.m and op.N == self.N
        entries: Dict[tuple, AlgElement] = {}
        if left:
            # (A S)[p, q] = sum_k A[p, k] S[k, q]
            index: Dict[tuple, list] = {}
            for (p, k), s in op.entries.items():
                index.setdefault(k, []).append((p, s))
            for (k, q), el in self.entries.items():
                for p, s in index.get(k, ()):
                    add = el.scale(s)
                    key = (p, q)
                    entries[key] = entries[key] + add if key in entries else add
        else:
            # (S A)[p, q] = sum_k S[p, k] A[k, q]
            index = {}
            for (k, q), s in op.entries.items():
                index.setdefault(k, []).append((q, s))
            for (p, k), el in self.entries.items():
                for q, s in index.get(k, ()):
                    add = el.scale(s)
                    key = (p, q)
                    entries[key] = entries[key] + add if key in entries else add
        den = self.den if extra_den is None else self.den * extra_den
        return self._like(entries, den)

    # ---- comparisons ------------------------------------------------------------

    def is_zero(self) -> Tuple[bool, Optional[tuple]]:
        for key in sorted(self.entries):
            ok, w = self.entries[key].is_zero()
            if not ok:
                return False, (key,) + w
        return True, None

    def equal(self, other: "MatState") -> Tuple[bool, Optional[tuple]]:
        return (self - other).is_zero()

    def entry(self, row: tuple, col: tuple) -> AlgElement:
        return self.entries.get((row, col),
                                AlgElement.zero(self.ctx, self.flavor))

    def ordered_product_matrix(self, op, block1: Sequence[int],
                               mode: str = "RL") -> "MatState":
        """Blocked ordered product `op . state` over a leg bipartition.

        Mirrors the tensor-operator ordered product with A = op, B = self:
        A .LR B = sum A_1 B_1 (x) B_2 A_2 over the (block1 | block2) split;
        A .RL B swaps the roles.  Operator entries are central scalars, so
        the word coefficients of the state ride along unchanged.
        """
        num = op.num if isinstance(op, RationalOp) else op
        extra_den = op.den if isinstance(op, RationalOp) else None
        b1 = tuple(block1)
        b2 = tuple(p for p in range(self.m) if p not in b1)

        def split(idx):
            return tuple(idx[p] for p in b1), tuple(idx[p] for p in b2)

        def join(x1, x2):
            out = [0] * self.m
            for pos, v in zip(b1, x1):
                out[pos] = v
            for pos, v in zip(b2, x2):
                out[pos] = v
            return tuple(out)

        # A .LR B: rows (i, j), cols (k, l) from A[(i,q),(p,l)], B[(p,j),(k,q)]
        # A .RL B = B .LR A with the matrix roles of A and B swapped while the
        # word coefficients still come from the state.
        entries: Dict[tuple, AlgElement] = {}
        bindex: Dict[tuple, list] = {}
        for (rb, cb), el in self.entries.items():
            p, j = split(rb)
            k, q = split(cb)
            bindex.setdefault((p, q), []).append((j, k, el))
        for (ra, ca), va in num.entries.items():
            if mode == "LR":
                i, q = split(ra)
                p, l = split(ca)
                for j, k, el in bindex.get((p, q), ()):
                    key = (join(i, j), join(k, l))
                    add = el.scale(va)
                    entries[key] = entries[key] + add if key in entries else add
            else:
                assert mode == "RL"
                # B .LR A with A scalar-entried: rows (p, j), cols (k, q) from
                # B[(p,q'),(p',q... )] -- implement by symmetry of the formula:
                # (A .RL B) = sum B_1 A_1 (x) A_2 B_2
                p, j = split(ra)
                k, q = split(ca)
                for (rb, cb), el in self.entries.items():
                    i, qb = split(rb)
                    pb, l = split(cb)
                    if pb != p or qb != q:
                        continue
                    key = (join(i, j), join(k, l))
                    add = el.scale(va)
                    entries[key] = entries[key] + add if key in entries else add
        den = self.den if extra_den is None else self.den * extra_den
        return self._like(entries, den)


# ---- generating series application -----------------------------------------------


def _mode_count(ctx: TruncationContext, Rmax: int, names: Sequence[str]) -> int:
    cap = min(ctx.degree[ctx.var_index(v)] for v in names)
    return min(Rmax, cap + 1)


def tplus_apply(state: MatState, leg: int, var: str,
                z: Optional[str] = None) -> MatState:
    """Left-multiply the creation generating series on one leg.

    The series attached to matrix position (i, j) is
        sum_{r>=1} g_{ij}^{(r)} arg^{r-1}        (RTT and double families)
        delta_{ij} - sum_{r>=1} g_{ij}^{(r)} arg^{r-1}   (braided families)
    with arg the variable `var`, shifted to `z + var` when `z` is given.
    Modes are kept up to min(Rmax, degree cap + 1); higher modes cannot
    contribute to any retained monomial.
    """
    ctx = state.ctx
    if not (0 <= leg < state.m):
        raise ValueError(f"leg {leg} out of range")
    zs = () if z is None else ((z,) if isinstance(z, str) else tuple(z))
    names = (var,) + zs
    rmax = _mode_count(ctx, state.Rmax, names)
    base = ctx.var(var)
    for zv in zs:
        base = base + ctx.var(zv)
    braided = state.flavor in BRAIDED_FLAVORS

    # series coefficient of mode r: +/- arg^(r-1)
    powers = [ctx.one()]
    for _ in range(1, rmax):
        powers.append(powers[-1] * base)
    if braided:
        powers = [-p for p in powers]

    if any(el.max_word_len() + 1 > state.G for el in state.entries.values()):
        raise WordLengthExceeded(
            f"applying a generator would exceed word length {state.G}")

    entries: Dict[tuple, AlgElement] = {}

    def accumulate(key, el):
        entries[key] = entries[key] + el if key in entries else el

    for (row, col), el in state.entries.items():
        k = row[leg]
        if braided:
            # delta_{ik} contribution: identity matrix part, unit word
            accumulate((row, col), el)
        for i in range(state.N):
            parts: Dict[Word, MultiSeries] = {}
            for r in range(1, rmax + 1):
                letter = Word(state.flavor, ((i + 1, k + 1, r),))
                pw = powers[r - 1]
                for w, c in el.combo.items():
                    nw = letter.concat(w)
                    nc = pw * c
                    parts[nw] = parts[nw] + nc if nw in parts else nc
            if parts:
                nrow = row[:leg] + (i,) + row[leg + 1:]
                accumulate((nrow, col), AlgElement(ctx, state.flavor, parts))
    return state._like(entries)


def tplus_product(state: MatState, variables: Sequence[str],
                  z: Optional[str] = None,
                  legs: Optional[Sequence[int]] = None) -> MatState:
    """Plain ordered product of creation series, factor i on legs[i]."""
    if legs is None:
        legs = range(len(variables))
    legs = tuple(legs)
    out = state
    for i in range(len(variables) - 1, -1, -1):
        out = tplus_apply(out, legs[i], variables[i], z=z)
    return out


def lplus_product(state: MatState, rp: TensorOp, variables: Sequence[str],
                  z: Optional[str] = None,
                  legs: Optional[Sequence[int]] = None) -> MatState:
    """Ordered braided product with trailing (RP) insertions per factor.

    Factor i (1-based) is L_i(arg_i) (RP)_{i,i+1} ... (RP)_{i,n}; factors are
    multiplied left to right and the whole product is applied to `state`.
    """
    n = len(variables)
    if legs is None:
        legs = range(n)
    legs = tuple(legs)
    assert state.m >= n
    out = state
    for i in range(n - 1, -1, -1):
        for j in range(n - 1, i, -1):
            out = out.act_left(rp.embed([legs[i], legs[j]], out.m))
        out = tplus_apply(out, legs[i], variables[i], z=z)
    return out


def remove_rp_insertion(state: MatState, psip: TensorOp, a: int,
                        b: int) -> MatState:
    """Cancel one (RP)_{ab} insertion sitting right of the leg-`a` factor.

    For M = X_a (RP)_{ab} Y with X carrying matrix structure only on leg `a`,
    the skew-inverse contraction
        T[row_b -> beta, col_a -> gamma]
          = sum_{p,j} (PsiP)[(j, beta), (gamma, p)] M[row_b -> p, col_a -> j]
    recovers X_a Y exactly; `psip` is the two-leg skew-inverse times the
    permutation.  Entry coefficients are central, so word order is preserved.
    """
    entries: Dict[tuple, AlgElement] = {}
    for (row, col), el in state.entries.items():
        p = row[b]
        j = col[a]
        for (r2, c2), s in psip.entries.items():
            if r2[0] != j or c2[1] != p:
                continue
            beta, gamma = r2[1], c2[0]
            nrow = row[:b] + (beta,) + row[b + 1:]
            ncol = col[:a] + (gamma,) + col[a + 1:]
            add = el.scale(s)
            key = (nrow, ncol)
            entries[key] = entries[key] + add if key in entries else add
    return state._like(entries)


# ---- coefficient extraction --------------------------------------------------------


def extract_word_coeff(state: MatState, row: tuple, col: tuple,
                       assign: Mapping[str, int]) -> AlgElement:
    """The algebra coefficient of one matrix entry at one monomial.

    Raises InsufficientTruncation when the requested monomial lies outside
    the validity window of any contributing series.
    """
    ctx = state.ctx
    if not (state.den - ctx.one()).is_known_zero():
        raise ValueError("cannot extract word coefficients across a "
                         "nontrivial denominator")
    el = state.entry(tuple(row), tuple(col))
    combo: Dict[Word, MultiSeries] = {}
    for w, s in el.combo.items():
        ext = s.coeff_extract(assign)
        for k in range(ctx.h_order):
            if not ext.level_valid(k):
                raise InsufficientTruncation(
                    f"monomial {dict(assign)} outside the validity window "
                    f"of word {w.letters} at h^{k}")
        if not ext.is_known_zero():
            combo[w] = ext
    return AlgElement(ctx, state.flavor, combo)


# ---- defining-relation defects -------------------------------------------------


def _baxterizer(rspec) -> Baxterizer:
    return rspec.baxterizer if hasattr(rspec, "baxterizer") else rspec


def rtt_defect(rspec, state: MatState, u: str, v: str,
               legs: Tuple[int, int] = (0, 1),
               variant: bool = False) -> MatState:
    """LHS - RHS of the flavor's defining quadratic relation applied to a state.

    The two relation legs receive fresh creation factors in the variables
    `u` and `v`; the exchange matrix acts on those legs.  With `variant`
    the polynomial exchange matrix replaces the normalized one, which scales
    the defect by a central unit.  Equal variables degenerate the relation
    to 0 = 0 and raise SkipDegenerate.
    """
    if u == v:
        raise SkipDegenerate("the two relation variables must differ")
    bx = _baxterizer(rspec)
    m = state.m
    l1, l2 = legs
    flavor = state.flavor
    arg = ({u: rat(1), v: rat(-1)}, 0)

    if flavor in (RTT_ADD, BRAIDED_ADD):
        base = (RationalOp.whole(bx.R_prime(arg)) if variant
                else bx.R_add(arg))
    else:
        base = (RationalOp.whole(bx.Rbar_prime(bx.mult_image(arg))) if variant
                else bx.Rbar(arg))
    R12 = base.embed([l1, l2], m)
    R21 = base.embed([l2, l1], m)

    if flavor in BRAIDED_FLAVORS:
        rp12 = bx.RP.embed([l1, l2], m)
        rp21 = bx.RP.embed([l2, l1], m)
        lhs = tplus_apply(state, l2, v)
        lhs = lhs.act_left(rp12)
        lhs = tplus_apply(lhs, l1, u)
        lhs = lhs.act_left(R12)
        rhs = state.act_left(R21)
        rhs = tplus_apply(rhs, l1, u)
        rhs = rhs.act_left(rp21)
        rhs = tplus_apply(rhs, l2, v)
    else:
        lhs = tplus_apply(state, l2, v)
        lhs = tplus_apply(lhs, l1, u)
        lhs = lhs.act_left(R12)
        rhs = state.act_left(R12)
        rhs = tplus_apply(rhs, l1, u)
        rhs = tplus_apply(rhs, l2, v)
    return lhs - rhs
