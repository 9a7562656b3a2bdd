"""Sparse operators on tensor powers of C^N with exact series entries.

A TensorOp represents an element of End((C^N)^{tensor m}) whose matrix
entries are MultiSeries.  Entries are keyed by (row_multi_index,
col_multi_index); multi-indices are row-major with site 1 slowest, i.e.
index tuples read left to right across the tensor legs.  Legs are addressed
by 0-based positions throughout.
"""

from __future__ import annotations

import itertools
import json
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .series import (
    INF, NEG_INF, InsufficientTruncation, MultiSeries, NotInvertible, Rat,
    TruncationContext, rat,
)

Idx = Tuple[int, ...]


class TensorOp:
    __slots__ = ("ctx", "N", "m", "entries")

    def __init__(self, ctx: TruncationContext, N: int, m: int,
                 entries: Optional[Dict[Tuple[Idx, Idx], MultiSeries]] = None):
        self.ctx = ctx
        self.N = N
        self.m = m
        self.entries = {}
        if entries:
            for k, v in entries.items():
                if not v.is_known_zero() or not all(
                        lv is not None for lv in v.win):
                    self.entries[k] = v

    # ---- constructors ------------------------------------------------------

    @classmethod
    def identity(cls, ctx, N, m) -> "TensorOp":
        one = ctx.one()
        ent = {}
        for i in itertools.product(range(N), repeat=m):
            ent[(i, i)] = one
        return cls(ctx, N, m, ent)

    @classmethod
    def permutation(cls, ctx, N) -> "TensorOp":
        """The flip P on two legs: P(v (x) w) = w (x) v."""
        one = ctx.one()
        ent = {}
        for i in range(N):
            for j in range(N):
                ent[((i, j), (j, i))] = one
        return cls(ctx, N, 2, ent)

    def copy(self) -> "TensorOp":
        return TensorOp(self.ctx, self.N, self.m, dict(self.entries))

    # ---- ring operations -----------------------------------------------------

    def __add__(self, other: "TensorOp") -> "TensorOp":
        assert self.m == other.m and self.N == other.N
        ent = dict(self.entries)
        for k, v in other.entries.items():
            ent[k] = ent[k] + v if k in ent else v
        return TensorOp(self.ctx, self.N, self.m, ent)

    def __sub__(self, other: "TensorOp") -> "TensorOp":
        return self + (-other)

    def __neg__(self) -> "TensorOp":
        return TensorOp(self.ctx, self.N, self.m,
                        {k: -v for k, v in self.entries.items()})

    def scale(self, s) -> "TensorOp":
        """Multiply every entry by a scalar series or rational."""
        return TensorOp(self.ctx, self.N, self.m,
                        {k: v * s for k, v in self.entries.items()})

    def __matmul__(self, other: "TensorOp") -> "TensorOp":
        assert self.m == other.m and self.N == other.N
        by_row: Dict[Idx, List[Tuple[Idx, MultiSeries]]] = {}
        for (r, c), v in other.entries.items():
            by_row.setdefault(r, []).append((c, v))
        ent: Dict[Tuple[Idx, Idx], MultiSeries] = {}
        for (r, mid), va in self.entries.items():
            for c, vb in by_row.get(mid, ()):
                key = (r, c)
                prod = va * vb
                ent[key] = ent[key] + prod if key in ent else prod
        return TensorOp(self.ctx, self.N, self.m, ent)

    # ---- leg surgery -----------------------------------------------------------

    def embed(self, legs: Sequence[int], m_total: int) -> "TensorOp":
        """Place this m-leg operator on the given target legs, identity elsewhere."""
        assert len(legs) == self.m
        others = [p for p in range(m_total) if p not in legs]
        ent = {}
        for (r, c), v in self.entries.items():
            for rest in itertools.product(range(self.N), repeat=len(others)):
                row = [0] * m_total
                col = [0] * m_total
                for pos, x in zip(legs, r):
                    row[pos] = x
                for pos, x in zip(legs, c):
                    col[pos] = x
                for pos, x in zip(others, rest):
                    row[pos] = x
                    col[pos] = x
                ent[(tuple(row), tuple(col))] = v
        return TensorOp(self.ctx, self.N, m_total, ent)

    def partial_trace(self, leg: int) -> "TensorOp":
        ent: Dict[Tuple[Idx, Idx], MultiSeries] = {}
        for (r, c), v in self.entries.items():
            if r[leg] != c[leg]:
                continue
            key = (r[:leg] + r[leg + 1:], c[:leg] + c[leg + 1:])
            ent[key] = ent[key] + v if key in ent else v
        return TensorOp(self.ctx, self.N, self.m - 1, ent)

    def transpose_site(self, leg: int) -> "TensorOp":
        ent = {}
        for (r, c), v in self.entries.items():
            row = r[:leg] + (c[leg],) + r[leg + 1:]
            col = c[:leg] + (r[leg],) + c[leg + 1:]
            ent[(row, col)] = v
        return TensorOp(self.ctx, self.N, self.m, ent)

    # ---- ordered products -------------------------------------------------------

    def ordered_product(self, other: "TensorOp", block1: Sequence[int],
                        mode: str = "LR") -> "TensorOp":
        """Blocked ordered product over a bipartition of the legs.

        With A = sum A_1 (x) A_2 split along (block1 | block2):
          A .LR B = sum A_1 B_1 (x) B_2 A_2
          A .RL B = sum B_1 A_1 (x) A_2 B_2  (= B .LR A)
        """
        if mode == "RL":
            return other.ordered_product(self, block1, "LR")
        assert mode == "LR"
        A, B = self, other
        assert A.m == B.m
        b1 = tuple(block1)
        b2 = tuple(p for p in range(A.m) if p not in b1)

        def split(idx: Idx) -> Tuple[Idx, Idx]:
            return tuple(idx[p] for p in b1), tuple(idx[p] for p in b2)

        bindex: Dict[Tuple[Idx, Idx], List] = {}
        for (rb, cb), vb in B.entries.items():
            p, j = split(rb)
            k, q = split(cb)
            bindex.setdefault((p, q), []).append((j, k, vb))
        ent: Dict[Tuple[Idx, Idx], MultiSeries] = {}
        for (ra, ca), va in A.entries.items():
            i, q = split(ra)
            p, l = split(ca)
            for j, k, vb in bindex.get((p, q), ()):
                row = [0] * A.m
                col = [0] * A.m
                for pos, x in zip(b1, i):
                    row[pos] = x
                for pos, x in zip(b2, j):
                    row[pos] = x
                for pos, x in zip(b1, k):
                    col[pos] = x
                for pos, x in zip(b2, l):
                    col[pos] = x
                key = (tuple(row), tuple(col))
                prod = va * vb
                ent[key] = ent[key] + prod if key in ent else prod
        return TensorOp(self.ctx, self.N, self.m, ent)

    # ---- inverses ------------------------------------------------------------------

    def h_constant_matrix(self) -> List[List[Rat]]:
        """Dense h^0 constant part (entries must be spectral-variable free)."""
        n = self.N ** self.m
        basis = list(itertools.product(range(self.N), repeat=self.m))
        pos = {b: i for i, b in enumerate(basis)}
        mat = [[Rat(0)] * n for _ in range(n)]
        for (r, c), v in self.entries.items():
            mat[pos[r]][pos[c]] = v.constant_term()
        return mat

    def invert_h_adic(self) -> "TensorOp":
        """Inverse when the h^0 part is an invertible constant matrix."""
        ctx = self.ctx
        n = self.N ** self.m
        basis = list(itertools.product(range(self.N), repeat=self.m))
        a0 = self.h_constant_matrix()
        a0inv = gauss_inverse(a0)
        a0inv_op = TensorOp(ctx, self.N, self.m, {
            (basis[i], basis[j]): ctx.const(a0inv[i][j])
            for i in range(n) for j in range(n) if a0inv[i][j]})
        rest = self - TensorOp(ctx, self.N, self.m, {
            (basis[i], basis[j]): ctx.const(a0[i][j])
            for i in range(n) for j in range(n) if a0[i][j]})
        return neumann_inverse(self, a0inv_op, rest)

    def neumann_inverse_with(self, unit_part: "TensorOp",
                             unit_inverse: "TensorOp") -> "TensorOp":
        return neumann_inverse(self, unit_inverse, self - unit_part)

    # ---- inspection ----------------------------------------------------------------

    def entry(self, row: Idx, col: Idx) -> MultiSeries:
        v = self.entries.get((row, col))
        return v if v is not None else self.ctx.zero()

    def is_zero(self) -> Tuple[bool, Optional[tuple]]:
        """(known-zero within windows?, witness (row,col,exps) or None)."""
        worst = None
        informative = False
        for (r, c), v in sorted(self.entries.items()):
            if v.has_information():
                informative = True
            w = v.nonzero_witness()
            if w is not None and worst is None:
                worst = (r, c, w)
        if worst is not None:
            return False, worst
        if not informative and self.entries:
            raise InsufficientTruncation("zero-test region is empty")
        return True, None

    def equal(self, other: "TensorOp") -> Tuple[bool, Optional[tuple]]:
        return (self - other).is_zero()

    def scalar_part(self) -> MultiSeries:
        """If self = s * Id, return s; raise otherwise."""
        diag = None
        for i in itertools.product(range(self.N), repeat=self.m):
            v = self.entry(i, i)
            if diag is None:
                diag = v
            else:
                ok, w = v.equal_within_windows(diag)
                if not ok:
                    raise ValueError(f"not scalar: diagonal mismatch {w}")
        check = self - TensorOp.identity(self.ctx, self.N, self.m).scale(diag)
        ok, w = check.is_zero()
        if not ok:
            raise ValueError(f"not scalar: off-diagonal witness {w}")
        return diag

    def map_entries(self, fn) -> "TensorOp":
        return TensorOp(self.ctx, self.N, self.m,
                        {k: fn(v) for k, v in self.entries.items()})

    # ---- serialization ----------------------------------------------------------------

    def to_json(self) -> str:
        ctx = self.ctx
        names = ["h"] + list(ctx.variables)
        entries = []
        for (r, c) in sorted(self.entries):
            v = self.entries[(r, c)]
            coeff = []
            for e in sorted(v.terms):
                q = v.terms[e]
                coeff.append({
                    "exps": {names[i]: int(x) for i, x in enumerate(e) if x},
                    "num": str(q.numerator),
                    "den": str(q.denominator),
                })
            win = [None if lv is None else [list(w) for w in lv]
                   for lv in v.win]
            entries.append({"row": list(r), "col": list(c),
                            "coeff": coeff, "win": win})
        doc = {
            "N": self.N,
            "m": self.m,
            "context": {
                "h_order": ctx.h_order,
                "variables": list(ctx.variables),
                "degree": {v: d for v, d in zip(ctx.variables, ctx.degree)},
            },
            "entries": entries,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, doc: str) -> "TensorOp":
        d = json.loads(doc)
        c = d["context"]
        ctx = TruncationContext(c["h_order"], c["variables"], c["degree"])
        names = ["h"] + list(ctx.variables)
        ent = {}
        for e in d["entries"]:
            terms = {}
            for t in e["coeff"]:
                exps = tuple(t["exps"].get(n, 0) for n in names)
                terms[exps] = rat(int(t["num"]), int(t["den"]))
            win = tuple(None if lv is None else tuple(tuple(w) for w in lv)
                        for lv in e["win"])
            ent[(tuple(e["row"]), tuple(e["col"]))] = MultiSeries(
                ctx, terms, win, _normalized=True)
        return cls(ctx, d["N"], d["m"], ent)

    def __repr__(self) -> str:  # pragma: no cover
        return f"<TensorOp N={self.N} m={self.m} nnz={len(self.entries)}>"


def neumann_inverse(a: TensorOp, unit_inv: TensorOp,
                    rest: TensorOp) -> TensorOp:
    """(A0 + R)^{-1} = A0inv sum_l (-R A0inv)^l, R adically small.

    Terminates because every entry of R has positive h-degree or positive
    degree in some capped variable; guarded by an iteration cap.
    """
    ctx = a.ctx
    step = (-rest) @ unit_inv
    total = TensorOp.identity(ctx, a.N, a.m)
    acc = total
    for _ in range(2 * (ctx.h_order + sum(ctx.degree) + 4)):
        acc = acc @ step
        total = total + acc
        if not acc.entries or all(not v.terms for v in acc.entries.values()):
            break
    else:
        raise NotInvertible("Neumann series did not terminate")
    return unit_inv @ total


def gauss_inverse(mat: List[List[Rat]]) -> List[List[Rat]]:
    """Exact dense inverse over Q by Gauss-Jordan elimination."""
    n = len(mat)
    a = [row[:] + [Rat(1) if i == j else Rat(0) for j in range(n)]
         for i, row in enumerate(mat)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col]), None)
        if piv is None:
            raise NotInvertible("singular constant matrix")
        a[col], a[piv] = a[piv], a[col]
        inv = Rat(1) / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for r in range(n):
            if r != col and a[r][col]:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[n:] for row in a]
