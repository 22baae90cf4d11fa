"""Brute-force cross-checks for the engine.

The pointwise routines share nothing with the engine's symbolic linear algebra:
they evaluate Jacobians at a rational point and do exact rational linear
algebra there.  The prolongation search reuses the plain prolongation and the
static linearizability test, and simply tries every raw-input prolongation
sequence up to a depth bound.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import flint

from .engine import prolong_with_column
from .geometry import ControlAffineSystem, Distribution, Filtration, VectorField, is_sfl
from .symcore import Expr, NonGenericPointError, Point

__all__ = [
    "LsopWitness",
    "brute_force_lsop",
    "pointwise_bracket",
    "pointwise_characteristic",
    "h_candidate_search",
    "default_ratio_grid",
    "same_span",
]


@dataclass
class LsopWitness:
    """Prolongation path ending in a static feedback linearizable system."""

    path: list[tuple[int, tuple[str, str]]]
    system: ControlAffineSystem
    rho: int
    systems: list[ControlAffineSystem] = field(default_factory=list)

    def __len__(self):
        return len(self.path)

    def controls(self) -> list[int]:
        return [i for i, _ in self.path]


IDENTITY_FAMILY = (((0, 1), 1), ((1, 0), 2))


def brute_force_lsop(
    sys: ControlAffineSystem,
    depth: int,
    feedback_family: Sequence[tuple[tuple[int, int], int]] = IDENTITY_FAMILY,
) -> LsopWitness | None:
    """Breadth-first search over one-fold prolongations up to ``depth``.

    Each family entry is ``((b21, b22), label)``: the constant feedback column
    and the index reported in the witness.  The default family prolongs the raw
    first or second input.
    """
    queue = deque([(sys, [], [sys])])
    while queue:
        node, path, chain = queue.popleft()
        ok, rho = is_sfl(node)
        if ok:
            return LsopWitness(path, node, rho, chain)
        if len(path) >= depth:
            continue
        for (b21, b22), label in feedback_family:
            c21 = Expr.constant(b21, node.states)
            c22 = Expr.constant(b22, node.states)
            child, control = prolong_with_column(node, c21, c22, f"z{len(path)}")
            queue.append((child, path + [(label, (str(b21), str(b22)))], chain + [child]))
    return None


# -- pointwise linear algebra ------------------------------------------------

def _mat(rows: Sequence[Sequence]) -> flint.fmpq_mat:
    m = len(rows)
    n = len(rows[0]) if m else 0
    return flint.fmpq_mat(m, n, [x for r in rows for x in r])


def _rank(vectors: Sequence[Sequence]) -> int:
    if not vectors:
        return 0
    return _mat(vectors).rank()


def _nullspace(rows: Sequence[Sequence], ncols: int) -> list[list]:
    """Right kernel of the matrix with the given rows."""
    if not rows:
        return [[flint.fmpq(1 if i == j else 0) for i in range(ncols)] for j in range(ncols)]
    R, rank = _mat(rows).rref()
    pivots = []
    for i in range(rank):
        for j in range(ncols):
            if R[i, j] != 0:
                pivots.append(j)
                break
    basis = []
    for free in range(ncols):
        if free in pivots:
            continue
        vec = [flint.fmpq(0)] * ncols
        vec[free] = flint.fmpq(1)
        for i, pc in enumerate(pivots):
            vec[pc] = -R[i, free]
        basis.append(vec)
    return basis


def _jacobian_at(V: VectorField, p: Point) -> list[list]:
    vals = p.fmpq_for(V.vars)
    return [[c.diff(x).eval_fmpq(vals) for x in V.vars] for c in V.comps]


def pointwise_bracket(V: VectorField, W: VectorField, p: Point) -> list:
    """``[V, W](p)`` from Jacobians evaluated at ``p``."""
    v, w = V.evaluate(p), W.evaluate(p)
    JV, JW = _jacobian_at(V, p), _jacobian_at(W, p)
    n = len(v)
    return [
        sum((JW[i][j] * v[j] - JV[i][j] * w[j] for j in range(n)), flint.fmpq(0))
        for i in range(n)
    ]


def _independent_at(fields: Sequence[VectorField], p: Point) -> tuple[list[int], list[list]]:
    kept, vals = [], []
    for i, g in enumerate(fields):
        v = g.evaluate(p)
        if _rank(vals + [v]) > len(vals):
            kept.append(i)
            vals.append(v)
    return kept, vals


def _annihilator(vectors: list[list], n: int) -> list[list]:
    """Rows spanning the covectors that kill every vector in the list."""
    return _nullspace(vectors, n) if vectors else [[flint.fmpq(1 if i == j else 0) for i in range(n)] for j in range(n)]


def pointwise_characteristic(D: Distribution, p: Point) -> list[list[Fraction]]:
    """Basis of ``{sum a_i g_i(p) : sum a_i [g_i, g_j](p) in D(p) for all j}``."""
    n = D.n
    kept, base = _independent_at(D.generators, p)
    gens = [D.generators[i] for i in kept]
    r = len(gens)
    ann = _annihilator(base, n)
    rows = []
    for j in range(r):
        cols = [pointwise_bracket(gens[i], gens[j], p) for i in range(r)]
        for a in ann:
            rows.append([sum((a[c] * cols[i][c] for c in range(n)), flint.fmpq(0)) for i in range(r)])
    rows = [row for row in rows if any(x != 0 for x in row)]
    coeffs = _nullspace(rows, r)
    out = []
    for a in coeffs:
        vec = [sum((a[i] * base[i][c] for i in range(r)), flint.fmpq(0)) for c in range(n)]
        out.append([Fraction(int(x.p), int(x.q)) for x in vec])
    return out


def _q(x) -> flint.fmpq:
    if isinstance(x, flint.fmpq):
        return x
    x = Fraction(x)
    return flint.fmpq(x.numerator, x.denominator)


def same_span(A: Sequence[Sequence], B: Sequence[Sequence]) -> bool:
    """Exact equality of two spans of rational vectors."""
    A = [[_q(x) for x in v] for v in A]
    B = [[_q(x) for x in v] for v in B]
    ra, rb = _rank(A), _rank(B)
    return ra == rb and _rank(A + B) == ra


def default_ratio_grid() -> list[tuple[Fraction, Fraction]]:
    """201 finite ratios ``i/10`` for ``|i| <= 100`` plus the point at infinity."""
    grid = [(Fraction(i, 10), Fraction(1)) for i in range(-100, 101)]
    grid.append((Fraction(1), Fraction(0)))
    return grid


def h_candidate_search(
    filt: Filtration,
    k: int,
    points: Sequence[Point],
    ratios: Iterable[tuple[Fraction, Fraction]] | None = None,
) -> list[tuple[Fraction, Fraction]]:
    """Ratios ``[b21 : b22]`` that pass the pointwise involutivity test.

    For ``H = D^{k-1} + span{b21 X1 + b22 X2}`` with ``X_i = ad_f^k g_i``, any
    choice of coefficient functions can only move ``[d, xi]`` inside ``D^k``
    through derivative terms, so a necessary condition at each point is that
    ``b21 [d, X1] + b22 [d, X2]`` lies in ``D^k(p)`` for every ``d`` in
    ``D^{k-1}``.  This refutes candidates; it never proves one.
    """
    if len(points) < 3:
        raise ValueError("need at least three points")
    ratios = list(ratios) if ratios is not None else default_ratio_grid()
    X1, X2 = filt.ad(k, 1), filt.ad(k, 2)
    lower = filt.D(k - 1).generators
    upper = filt.D(k).generators
    residues = []
    for p in points:
        try:
            _, base = _independent_at(upper, p)
            ann = _annihilator(base, filt.sys.n)
            kept, _ = _independent_at(lower, p)
            for i in kept:
                d = lower[i]
                b1, b2 = pointwise_bracket(d, X1, p), pointwise_bracket(d, X2, p)
                for a in ann:
                    r1 = sum((a[c] * b1[c] for c in range(len(b1))), flint.fmpq(0))
                    r2 = sum((a[c] * b2[c] for c in range(len(b2))), flint.fmpq(0))
                    if r1 != 0 or r2 != 0:
                        residues.append((r1, r2))
        except NonGenericPointError:
            raise
    out = []
    for b21, b22 in ratios:
        q21 = flint.fmpq(b21.numerator, b21.denominator)
        q22 = flint.fmpq(b22.numerator, b22.denominator)
        if all(q21 * r1 + q22 * r2 == 0 for r1, r2 in residues):
            out.append((b21, b22))
    return out
