"""Linear algebra over the field of rational functions.

Every answer returned here is exact.  Evaluation at random rational points is
used in two ways only: as a certificate when a sampled rank already reaches the
trivial upper bound, and as a cross-check of the symbolic result.  Pointwise
rank can never exceed the generic rank, so a disagreement that survives
resampling means the samples keep landing on a degenerate set and we refuse to
guess.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Iterator, Sequence

import flint

from .symcore import Expr, NonGenericPointError, Point, _context

__all__ = [
    "GenericityError",
    "Sampler",
    "FunMatrix",
    "EchelonSpan",
    "generic_rank",
    "bareiss_rank",
    "rref",
    "kernel_basis",
    "solve_membership",
    "pointwise_rank",
]

NUM_BOUND = 10**6
DEN_BOUND = 10**3


class GenericityError(RuntimeError):
    """Sampled rank stayed below the symbolic rank after the resample budget."""


class Sampler:
    """Deterministic stream of random rational points per variable tuple."""

    def __init__(self, seed: int = 42, samples: int = 5, budget: int = 20):
        if samples < 1:
            raise ValueError("need at least one sample point")
        self.seed = seed
        self.samples = samples
        self.budget = budget
        self._streams: dict[tuple[str, ...], list[Point]] = {}

    def point(self, vars: Sequence[str], i: int) -> Point:
        vars = tuple(vars)
        pts = self._streams.setdefault(vars, [])
        if len(pts) <= i:
            # a fresh generator replays the same stream for this variable tuple
            rng = random.Random(f"{self.seed}|{','.join(vars)}")
            pts.clear()
            for _ in range(max(i + 1, self.samples + self.budget)):
                values = [
                    Fraction(rng.randint(-NUM_BOUND, NUM_BOUND), rng.randint(1, DEN_BOUND))
                    for _ in vars
                ]
                pts.append(Point(vars, values))
        return pts[i]

    def points(self, vars: Sequence[str], count: int | None = None) -> Iterator[Point]:
        total = self.samples + self.budget if count is None else count
        for i in range(total):
            yield self.point(vars, i)


_DEFAULT = Sampler()


def default_sampler() -> Sampler:
    return _DEFAULT


class FunMatrix:
    """Dense matrix of rational functions sharing one variable tuple."""

    def __init__(self, rows: Sequence[Sequence[Expr]], vars: Sequence[str] | None = None, ncols: int | None = None):
        self.rows = [list(r) for r in rows]
        if vars is None:
            if not self.rows or not self.rows[0]:
                raise ValueError("variables are required for an empty matrix")
            vars = self.rows[0][0].vars
        self.vars = tuple(vars)
        self.nrows = len(self.rows)
        self.ncols = len(self.rows[0]) if self.rows else (ncols or 0)
        for r in self.rows:
            if len(r) != self.ncols:
                raise ValueError("ragged matrix")
            for j, e in enumerate(r):
                if e.vars != self.vars:
                    r[j] = e.lift(self.vars)

    @classmethod
    def from_columns(cls, cols: Sequence[Sequence[Expr]], nrows: int, vars: Sequence[str]) -> FunMatrix:
        rows = [[col[i] for col in cols] for i in range(nrows)]
        return cls(rows, vars, ncols=len(cols))

    def column(self, j: int) -> list[Expr]:
        return [r[j] for r in self.rows]

    def columns(self) -> list[list[Expr]]:
        return [self.column(j) for j in range(self.ncols)]

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def evaluate(self, p: Point) -> flint.fmpq_mat:
        vals = p.fmpq_for(self.vars)
        flat = [e.eval_fmpq(vals) for r in self.rows for e in r]
        return flint.fmpq_mat(self.nrows, self.ncols, flat)

    def __repr__(self):
        body = "; ".join(", ".join(str(e) for e in r) for r in self.rows)
        return f"FunMatrix([{body}])"


def pointwise_rank(M: FunMatrix, p: Point) -> int:
    if M.nrows == 0 or M.ncols == 0:
        return 0
    return M.evaluate(p).rank()


def _sampled_ranks(M: FunMatrix, smp: Sampler, start: int, count: int) -> Iterator[int]:
    for i in range(start, start + count):
        try:
            yield pointwise_rank(M, smp.point(M.vars, i))
        except NonGenericPointError:
            continue


def generic_rank(M: FunMatrix, smp: Sampler | None = None) -> int:
    """Rank over the rational-function field."""
    smp = smp or _DEFAULT
    bound = min(M.nrows, M.ncols)
    if bound == 0:
        return 0
    best = 0
    for r in _sampled_ranks(M, smp, 0, smp.samples):
        best = max(best, r)
        if best == bound:
            return best
    exact = bareiss_rank(M)
    if best == exact:
        return exact
    for r in _sampled_ranks(M, smp, smp.samples, smp.budget):
        if r == exact:
            return exact
    raise GenericityError(
        f"sampled rank {best} below symbolic rank {exact} after {smp.budget} resamples"
    )


def _lcm(a, b):
    return a * (b / a.gcd(b))


def bareiss_rank(M: FunMatrix) -> int:
    """Fraction-free elimination on the column-cleared polynomial matrix."""
    if M.nrows == 0 or M.ncols == 0:
        return 0
    ctx = _context(M.vars)
    cols = []
    for j in range(M.ncols):
        col = M.column(j)
        L = ctx.constant(1)
        for e in col:
            if not e.den.is_one():
                L = _lcm(L, e.den)
        cols.append([e.num * (L / e.den) for e in col])
    A = [[cols[j][i] for j in range(M.ncols)] for i in range(M.nrows)]
    m, n = M.nrows, M.ncols
    prev = ctx.constant(1)
    rank = 0
    for k in range(min(m, n)):
        best = None
        for j in range(k, n):
            for i in range(k, m):
                a = A[i][j]
                if a.is_zero():
                    continue
                key = (a.total_degree(), j, i)
                if best is None or key < best:
                    best = key
        if best is None:
            break
        _, pj, pi = best
        A[k], A[pi] = A[pi], A[k]
        for row in A:
            row[k], row[pj] = row[pj], row[k]
        piv = A[k][k]
        for i in range(k + 1, m):
            aik = A[i][k]
            for j in range(k + 1, n):
                val = piv * A[i][j] - aik * A[k][j]
                A[i][j] = val / prev if not prev.is_one() else val
            A[i][k] = ctx.from_dict({})
        prev = piv
        rank += 1
    return rank


def rref(M: FunMatrix) -> tuple[list[list[Expr]], list[int]]:
    """Reduced row echelon form over the function field.

    Columns are scanned left to right; within a column the pivot is the entry
    of lowest total degree, ties broken by row index.
    """
    A = [list(r) for r in M.rows]
    m, n = M.nrows, M.ncols
    pivots: list[int] = []
    row = 0
    for col in range(n):
        if row == m:
            break
        cand = [(A[i][col].complexity(), i) for i in range(row, m) if not A[i][col].is_zero()]
        if not cand:
            continue
        _, pi = min(cand)
        A[row], A[pi] = A[pi], A[row]
        inv = A[row][col].inverse()
        A[row] = [e * inv if not e.is_zero() else e for e in A[row]]
        for i in range(m):
            if i == row:
                continue
            c = A[i][col]
            if c.is_zero():
                continue
            A[i] = [a - c * b if not b.is_zero() else a for a, b in zip(A[i], A[row])]
        pivots.append(col)
        row += 1
    return A, pivots


def kernel_basis(M: FunMatrix) -> list[list[Expr]]:
    """Basis of the right kernel; each vector has a 1 in its own free column."""
    R, pivots = rref(M)
    zero = Expr.constant(0, M.vars)
    one = Expr.constant(1, M.vars)
    basis = []
    for f in range(M.ncols):
        if f in pivots:
            continue
        vec = [zero] * M.ncols
        vec[f] = one
        for i, pc in enumerate(pivots):
            vec[pc] = -R[i][f]
        basis.append(vec)
    return basis


def _matvec(M: FunMatrix, c: Sequence[Expr]) -> list[Expr]:
    out = []
    for r in M.rows:
        acc = Expr.constant(0, M.vars)
        for a, b in zip(r, c):
            if not a.is_zero() and not b.is_zero():
                acc = acc + a * b
        out.append(acc)
    return out


def solve_membership(v: Sequence[Expr], A: FunMatrix) -> list[Expr] | None:
    """Coefficients ``c`` with ``A c = v``, or None when ``v`` is not in the span."""
    if len(v) != A.nrows:
        raise ValueError("dimension mismatch")
    aug = FunMatrix([list(r) + [e] for r, e in zip(A.rows, v)], A.vars, ncols=A.ncols + 1)
    R, pivots = rref(aug)
    if A.ncols in pivots:
        return None
    c = [Expr.constant(0, A.vars)] * A.ncols
    for i, pc in enumerate(pivots):
        c[pc] = R[i][A.ncols]
    if any(not (a - b).is_zero() for a, b in zip(_matvec(A, c), v)):
        raise AssertionError("membership certificate failed verification")
    return c


class EchelonSpan:
    """Incrementally maintained reduced echelon basis of a span of vectors.

    ``reduce`` returns the canonical representative of a vector modulo the
    span (zero in every pivot coordinate), which is linear in the vector.
    """

    def __init__(self, dim: int, vars: Sequence[str]):
        self.dim = dim
        self.vars = tuple(vars)
        self.rows: list[tuple[int, list[Expr]]] = []

    @property
    def rank(self) -> int:
        return len(self.rows)

    def reduce(self, v: Sequence[Expr]) -> list[Expr]:
        v = list(v)
        for piv, row in self.rows:
            c = v[piv]
            if c.is_zero():
                continue
            v = [a - c * b if not b.is_zero() else a for a, b in zip(v, row)]
        return v

    def contains(self, v: Sequence[Expr]) -> bool:
        if self.rank == self.dim:
            return True
        return all(e.is_zero() for e in self.reduce(v))

    def add(self, v: Sequence[Expr]) -> bool:
        if self.rank == self.dim:
            return False
        r = self.reduce(v)
        cand = [(e.complexity(), i) for i, e in enumerate(r) if not e.is_zero()]
        if not cand:
            return False
        _, piv = min(cand)
        inv = r[piv].inverse()
        r = [e * inv if not e.is_zero() else e for e in r]
        new_rows = []
        for p, row in self.rows:
            c = row[piv]
            if not c.is_zero():
                row = [a - c * b if not b.is_zero() else a for a, b in zip(row, r)]
            new_rows.append((p, row))
        new_rows.append((piv, r))
        self.rows = new_rows
        return True
