"""Vector fields, distributions and the objects built from them.

Distributions are carried by generator lists.  Ranks are generic ranks over
the rational-function field, so "involutive" and "contains" always mean
"on an open dense set".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import flint

from .funlinalg import EchelonSpan, FunMatrix, GenericityError, Sampler, default_sampler, kernel_basis
from .symcore import Expr, NonGenericPointError, Point, parse_expr

__all__ = [
    "VectorField",
    "Distribution",
    "ControlAffineSystem",
    "Filtration",
    "lie_bracket",
    "linearizability_sequence",
    "is_involutive",
    "non_involutivity_index",
    "involutive_closure",
    "derived_sequence",
    "growth_vector",
    "characteristic_distribution",
    "corank",
    "is_sfl",
]


class VectorField:
    """Tuple of rational-function components in the coordinates ``vars``."""

    __slots__ = ("vars", "comps")

    def __init__(self, comps: Sequence[Expr], vars: Sequence[str]):
        self.vars = tuple(vars)
        if len(comps) != len(self.vars):
            raise ValueError(f"expected {len(self.vars)} components, got {len(comps)}")
        self.comps = tuple(c if c.vars == self.vars else c.lift(self.vars) for c in comps)

    @classmethod
    def parse(cls, texts: Sequence[str], vars: Sequence[str]) -> VectorField:
        return cls([parse_expr(t, vars) for t in texts], vars)

    @classmethod
    def coordinate(cls, name: str, vars: Sequence[str]) -> VectorField:
        vars = tuple(vars)
        return cls([Expr.constant(1 if v == name else 0, vars) for v in vars], vars)

    @classmethod
    def zero(cls, vars: Sequence[str]) -> VectorField:
        vars = tuple(vars)
        return cls([Expr.constant(0, vars)] * len(vars), vars)

    @property
    def dim(self) -> int:
        return len(self.vars)

    def __getitem__(self, i):
        return self.comps[i]

    def __iter__(self):
        return iter(self.comps)

    def __len__(self):
        return len(self.comps)

    def __add__(self, other: VectorField) -> VectorField:
        return VectorField([a + b for a, b in zip(self.comps, other.comps)], self.vars)

    def __sub__(self, other: VectorField) -> VectorField:
        return VectorField([a - b for a, b in zip(self.comps, other.comps)], self.vars)

    def __neg__(self) -> VectorField:
        return VectorField([-a for a in self.comps], self.vars)

    def scale(self, c) -> VectorField:
        return VectorField([a * c if not a.is_zero() else a for a in self.comps], self.vars)

    def __eq__(self, other):
        if not isinstance(other, VectorField):
            return NotImplemented
        return self.vars == other.vars and all(a == b for a, b in zip(self.comps, other.comps))

    def __hash__(self):
        return hash(tuple(str(c) for c in self.comps))

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.comps)

    def apply(self, h: Expr) -> Expr:
        """Directional derivative of ``h`` along the field."""
        acc = Expr.constant(0, self.vars)
        for v, c in zip(self.vars, self.comps):
            if not c.is_zero():
                d = h.diff(v)
                if not d.is_zero():
                    acc = acc + c * d
        return acc

    def lift(self, vars: Sequence[str]) -> VectorField:
        """Embed into a larger coordinate tuple; new components are zero."""
        vars = tuple(vars)
        by_name = dict(zip(self.vars, self.comps))
        comps = [by_name[v].lift(vars) if v in by_name else Expr.constant(0, vars) for v in vars]
        return VectorField(comps, vars)

    def evaluate(self, p: Point) -> list:
        vals = p.fmpq_for(self.vars)
        return [c.eval_fmpq(vals) for c in self.comps]

    def to_strings(self) -> list[str]:
        return [str(c) for c in self.comps]

    def __repr__(self):
        return f"VectorField({self.to_strings()})"


def lie_bracket(V: VectorField, W: VectorField) -> VectorField:
    """[V, W] = J_W V - J_V W."""
    if V.vars != W.vars:
        raise ValueError("vector fields live on different coordinates")
    comps = []
    for i in range(V.dim):
        comps.append(V.apply(W.comps[i]) - W.apply(V.comps[i]))
    return VectorField(comps, V.vars)


def _pointwise_rank(vectors: Sequence[list]) -> int:
    if not vectors:
        return 0
    n = len(vectors[0])
    flat = [vec[i] for i in range(n) for vec in vectors]
    return flint.fmpq_mat(n, len(vectors), flat).rank()


class Distribution:
    """Span of a list of vector fields, with cached generic rank and basis."""

    def __init__(
        self,
        generators: Iterable[VectorField],
        vars: Sequence[str],
        tags: Sequence[str] | None = None,
        smp: Sampler | None = None,
    ):
        self.vars = tuple(vars)
        self.generators = [g if g.vars == self.vars else g.lift(self.vars) for g in generators]
        self.tags = list(tags) if tags is not None else [""] * len(self.generators)
        if len(self.tags) != len(self.generators):
            raise ValueError("one tag per generator")
        self.smp = smp or default_sampler()
        self._rank: int | None = None
        self._basis_idx: list[int] | None = None
        self._good_point: tuple[Point, list[list]] | None = None
        self._echelon: EchelonSpan | None = None
        self._involutive: bool | None = None

    @property
    def n(self) -> int:
        return len(self.vars)

    def __len__(self):
        return len(self.generators)

    # -- rank and basis -----------------------------------------------
    def _evaluate_at(self, i: int):
        p = self.smp.point(self.vars, i)
        try:
            return p, [g.evaluate(p) for g in self.generators]
        except NonGenericPointError:
            return None

    @staticmethod
    def _greedy(values: list[list]) -> list[int]:
        kept: list[int] = []
        chosen: list[list] = []
        for i, vec in enumerate(values):
            trial = chosen + [vec]
            if _pointwise_rank(trial) == len(trial):
                kept.append(i)
                chosen = trial
        return kept

    def _compute(self):
        if self._rank is not None:
            return
        m = len(self.generators)
        if m == 0:
            self._rank, self._basis_idx = 0, []
            return
        bound = min(self.n, m)
        best, best_eval = -1, None
        for i in range(self.smp.samples):
            ev = self._evaluate_at(i)
            if ev is None:
                continue
            r = _pointwise_rank(ev[1])
            if r > best:
                best, best_eval = r, ev
            if best == bound:
                break
        if best == bound:
            self._rank = best
            self._good_point = best_eval
            self._basis_idx = self._greedy(best_eval[1])
            return
        # the sampled value is only a lower bound here; settle it symbolically
        ech = EchelonSpan(self.n, self.vars)
        kept = [i for i, g in enumerate(self.generators) if ech.add(g.comps)]
        self._echelon = ech
        self._rank = ech.rank
        self._basis_idx = kept
        if best == self._rank:
            self._good_point = best_eval
            return
        for i in range(self.smp.samples, self.smp.samples + self.smp.budget):
            ev = self._evaluate_at(i)
            if ev is not None and _pointwise_rank(ev[1]) == self._rank:
                self._good_point = ev
                return
        raise GenericityError(
            f"sampled rank {best} below symbolic rank {self._rank} after {self.smp.budget} resamples"
        )

    @property
    def rank(self) -> int:
        self._compute()
        return self._rank

    def basis_indices(self) -> list[int]:
        self._compute()
        return list(self._basis_idx)

    def basis(self) -> list[VectorField]:
        return [self.generators[i] for i in self.basis_indices()]

    def basis_tags(self) -> list[str]:
        return [self.tags[i] for i in self.basis_indices()]

    def reduced(self) -> Distribution:
        """Same span, generated by an independent subset."""
        idx = self.basis_indices()
        out = Distribution([self.generators[i] for i in idx], self.vars, [self.tags[i] for i in idx], self.smp)
        out._rank, out._basis_idx = self._rank, list(range(len(idx)))
        if self._good_point is not None:
            p, vals = self._good_point
            out._good_point = (p, [vals[i] for i in idx])
        return out

    def echelon(self) -> EchelonSpan:
        if self._echelon is None or self._echelon.rank != self.rank:
            ech = EchelonSpan(self.n, self.vars)
            for g in self.basis():
                ech.add(g.comps)
            self._echelon = ech
        return self._echelon

    # -- membership ---------------------------------------------------
    def is_full(self) -> bool:
        return self.rank == self.n

    def contains(self, v: VectorField) -> bool:
        if self.is_full():
            return True
        if v.is_zero():
            return True
        if self.rank == 0:
            return False
        if self._good_point is not None:
            p, vals = self._good_point
            try:
                pv = v.evaluate(p)
            except NonGenericPointError:
                pv = None
            if pv is not None:
                base = [vals[i] for i in self._basis_idx]
                if _pointwise_rank(base + [pv]) > self.rank:
                    return False
        return self.echelon().contains(v.comps)

    def reduce(self, v: VectorField) -> VectorField:
        """Canonical representative of ``v`` modulo the distribution."""
        if self.is_full():
            return VectorField.zero(self.vars)
        return VectorField(self.echelon().reduce(v.comps), self.vars)

    def contains_all(self, other: Distribution | Iterable[VectorField]) -> bool:
        fields = other.basis() if isinstance(other, Distribution) else list(other)
        return all(self.contains(g) for g in fields)

    def equals(self, other: Distribution) -> bool:
        return self.rank == other.rank and self.contains_all(other)

    # -- constructions -------------------------------------------------
    def plus(self, *extra, tags: Sequence[str] | None = None) -> Distribution:
        gens = list(self.basis())
        gtags = list(self.basis_tags())
        new_tags = iter(tags) if tags is not None else None
        for item in extra:
            if isinstance(item, Distribution):
                gens += item.basis()
                gtags += item.basis_tags()
            else:
                for g in ([item] if isinstance(item, VectorField) else item):
                    gens.append(g)
                    gtags.append(next(new_tags) if new_tags else "")
        return Distribution(gens, self.vars, gtags, self.smp)

    def brackets(self, other: Distribution | None = None) -> list[tuple[str, VectorField]]:
        """Tagged brackets of basis elements; all pairs i<j when ``other`` is None."""
        A, At = self.basis(), self.basis_tags()
        out = []
        if other is None:
            for i in range(len(A)):
                for j in range(i + 1, len(A)):
                    out.append((f"[{At[i]},{At[j]}]", lie_bracket(A[i], A[j])))
        else:
            B, Bt = other.basis(), other.basis_tags()
            for i in range(len(A)):
                for j in range(len(B)):
                    out.append((f"[{At[i]},{Bt[j]}]", lie_bracket(A[i], B[j])))
        return out

    def plus_brackets(self, other: Distribution | None = None) -> Distribution:
        """``self + [self, other]`` (``other`` defaults to ``self``)."""
        pairs = self.brackets(other)
        return self.plus([v for _, v in pairs], tags=[t for t, _ in pairs])

    def is_involutive(self) -> bool:
        if self._involutive is None:
            if self.is_full():
                self._involutive = True
            else:
                B = self.basis()
                self._involutive = all(
                    self.contains(lie_bracket(B[i], B[j]))
                    for i in range(len(B))
                    for j in range(i + 1, len(B))
                )
        return self._involutive

    def generator_strings(self) -> list[list[str]]:
        return [g.to_strings() for g in self.basis()]

    def __repr__(self):
        return f"Distribution(rank={self.rank}, n={self.n}, gens={self.basis_tags()})"


def corank(inner: Distribution, outer: Distribution) -> int:
    if not outer.contains_all(inner):
        raise ValueError("corank requires inner to be contained in outer")
    return outer.rank - inner.rank


def is_involutive(D: Distribution) -> bool:
    return D.is_involutive()


def derived_sequence(D: Distribution, depth: int) -> list[Distribution]:
    """``[D, D + [D,D], ...]`` with ``depth`` entries (stops repeating once stable)."""
    seq = [D.reduced()]
    while len(seq) < depth:
        last = seq[-1]
        if last.is_full() or (len(seq) > 1 and last.rank == seq[-2].rank):
            seq.append(last)
            continue
        seq.append(last.plus_brackets().reduced())
    return seq


def growth_vector(D: Distribution, depth: int = 3) -> list[int]:
    """Ranks of the derived sequence, cut at ``depth`` entries or where it stabilises."""
    ranks = [E.rank for E in derived_sequence(D, depth)]
    while len(ranks) > 1 and ranks[-1] == ranks[-2]:
        ranks.pop()
    return ranks


def involutive_closure(D: Distribution) -> Distribution:
    E = D.reduced()
    while not E.is_full():
        F = E.plus_brackets().reduced()
        if F.rank == E.rank:
            break
        E = F
    return E


def characteristic_distribution(D: Distribution) -> Distribution:
    """Fields of ``D`` whose bracket with every field of ``D`` stays in ``D``.

    Writing a candidate as ``sum a_i b_i`` over a basis, the derivative terms of
    ``[sum a_i b_i, b_j]`` already lie in ``D``, so membership reduces to the
    linear conditions ``sum a_i [b_i, b_j] = 0`` modulo ``D``.
    """
    B = D.basis()
    tags = D.basis_tags()
    r, n, vars = len(B), D.n, D.vars
    if D.is_full() or r == 0:
        return D.reduced()
    res = {}
    for i in range(r):
        for j in range(i + 1, r):
            res[i, j] = D.reduce(lie_bracket(B[i], B[j]))
    zero = Expr.constant(0, vars)
    rows = []
    for j in range(r):
        for c in range(n):
            row = []
            for i in range(r):
                if i == j:
                    row.append(zero)
                elif i < j:
                    row.append(res[i, j].comps[c])
                else:
                    row.append(-res[j, i].comps[c])
            if any(not e.is_zero() for e in row):
                rows.append(row)
    if not rows:
        return D.reduced()
    ker = kernel_basis(FunMatrix(rows, vars))
    gens, gtags = [], []
    for a in ker:
        acc = VectorField.zero(vars)
        parts = []
        for ai, b, t in zip(a, B, tags):
            if not ai.is_zero():
                acc = acc + b.scale(ai)
                parts.append(t if ai == 1 else f"({ai})*{t}")
        gens.append(acc)
        gtags.append(" + ".join(parts))
    return Distribution(gens, vars, gtags, D.smp)


@dataclass
class ControlAffineSystem:
    """dx/dt = f + u1 g1 + u2 g2 on the coordinates ``states``."""

    states: tuple[str, ...]
    f: VectorField
    g1: VectorField
    g2: VectorField
    name: str = ""
    lineage: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.states = tuple(self.states)
        for label in ("f", "g1", "g2"):
            v = getattr(self, label)
            if v.vars != self.states:
                setattr(self, label, v.lift(self.states) if set(v.vars) <= set(self.states) else v)
            if getattr(self, label).vars != self.states:
                raise ValueError(f"{label} is not defined on the states {self.states}")

    @classmethod
    def from_strings(cls, states: Sequence[str], f: Sequence[str], g1: Sequence[str], g2: Sequence[str], name: str = "") -> ControlAffineSystem:
        states = tuple(states)
        return cls(
            states,
            VectorField.parse(f, states),
            VectorField.parse(g1, states),
            VectorField.parse(g2, states),
            name=name,
        )

    @property
    def n(self) -> int:
        return len(self.states)

    def replace(self, **changes) -> ControlAffineSystem:
        data = dict(states=self.states, f=self.f, g1=self.g1, g2=self.g2, name=self.name, lineage=list(self.lineage))
        data.update(changes)
        return ControlAffineSystem(**data)

    def swapped(self) -> ControlAffineSystem:
        return self.replace(g1=self.g2, g2=self.g1)

    def describe(self) -> dict:
        return {
            "states": list(self.states),
            "f": self.f.to_strings(),
            "g1": self.g1.to_strings(),
            "g2": self.g2.to_strings(),
        }


class Filtration:
    """Lazily computed linearizability distributions ``D^j`` of a system.

    ``D^j`` is spanned by ``ad_f^q g_i`` for ``q <= j``.  Once the rank stops
    growing the sequence is constant, so indices past that point reuse the
    stable distribution.
    """

    def __init__(self, sys: ControlAffineSystem, smp: Sampler | None = None):
        self.sys = sys
        self.smp = smp or default_sampler()
        self._ad: dict[tuple[int, int], VectorField] = {}
        self._D: list[Distribution] = []
        self._stable: int | None = None

    def ad(self, q: int, i: int) -> VectorField:
        key = (q, i)
        if key not in self._ad:
            if q == 0:
                self._ad[key] = self.sys.g1 if i == 1 else self.sys.g2
            else:
                self._ad[key] = lie_bracket(self.sys.f, self.ad(q - 1, i))
        return self._ad[key]

    def ad_of(self, q: int, g: VectorField) -> VectorField:
        out = g
        for _ in range(q):
            out = lie_bracket(self.sys.f, out)
        return out

    def zero(self) -> Distribution:
        return Distribution([], self.sys.states, smp=self.smp)

    def D(self, j: int) -> Distribution:
        if j < 0:
            return self.zero()
        if self._stable is not None and j > self._stable:
            return self._D[self._stable]
        while len(self._D) <= j:
            q = len(self._D)
            new = [self.ad(q, 1), self.ad(q, 2)]
            tags = [f"ad_f^{q} g1", f"ad_f^{q} g2"]
            if q == 0:
                D = Distribution(new, self.sys.states, tags, self.smp).reduced()
            else:
                D = self._D[-1].plus(new, tags=tags).reduced()
                if D.rank == self._D[-1].rank:
                    self._stable = q - 1
                    return self._D[q - 1]
            self._D.append(D)
            if D.is_full():
                self._stable = q
                if j > q:
                    return D
        return self._D[j]

    def stable_index(self) -> int:
        j = 0
        while self._stable is None:
            self.D(j)
            j += 1
        return self._stable

    def ranks(self, upto: int) -> list[int]:
        return [self.D(j).rank for j in range(upto + 1)]

    def index(self) -> int | None:
        """Non-involutivity index: first ``j`` with ``D^j`` not involutive."""
        j = 0
        while True:
            if not self.D(j).is_involutive():
                return j
            if self._stable is not None and j >= self._stable:
                return None
            j += 1

    def rho(self) -> int | None:
        j = 0
        while True:
            if self.D(j).is_full():
                return j
            if self._stable is not None and j >= self._stable:
                return None
            j += 1


def linearizability_sequence(sys: ControlAffineSystem, jmax: int, smp: Sampler | None = None) -> list[Distribution]:
    filt = Filtration(sys, smp)
    return [filt.D(j) for j in range(jmax + 1)]


def non_involutivity_index(seq: Sequence[Distribution]) -> int | None:
    for j, D in enumerate(seq):
        if not D.is_involutive():
            return j
    return None


def is_sfl(sys: ControlAffineSystem, smp: Sampler | None = None) -> tuple[bool, int | None]:
    """Static feedback linearizability test; returns ``(flag, rho)``."""
    filt = Filtration(sys, smp)
    if filt.index() is not None:
        return False, None
    rho = filt.rho()
    return rho is not None, rho
