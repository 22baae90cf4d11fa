"""Decision procedure for linearizability by successive one-fold prolongations.

Each step computes the non-involutivity index ``k`` of the current system,
classifies the system, tries to build an involutive distribution ``H`` squeezed
between ``D^{k-1}`` and ``D^k`` (corank one on each side), reads off which
control combination to prolong, and prolongs it.  The loop stops when the
current system is static feedback linearizable or when no valid ``H`` exists.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .funlinalg import FunMatrix, Sampler, default_sampler, kernel_basis, solve_membership
from .geometry import (
    ControlAffineSystem,
    Distribution,
    Filtration,
    VectorField,
    characteristic_distribution,
    derived_sequence,
    involutive_closure,
    lie_bracket,
)
from .symcore import Expr

__all__ = [
    "CaseLabel",
    "Classification",
    "LsopiDistribution",
    "StepReport",
    "Verdict",
    "ClassificationError",
    "ProlongationError",
    "classify",
    "construct_H_case_II",
    "construct_H_case_III",
    "canonical_H",
    "find_tilde_g2",
    "special_H_conditions",
    "special_H_forced",
    "extract_beta_column",
    "validate_lsopi",
    "prolong_with_column",
    "build_prolongation",
    "affinize",
    "flatness_necessary_check",
    "run_lsopi",
]


class CaseLabel(str, Enum):
    I = "I"
    II_A = "II_A"
    II_B = "II_B"
    II_NO_H = "II_NO_H"
    III_C1 = "III_C1"
    III_C2 = "III_C2"
    III_C3 = "III_C3"
    III_C4 = "III_C4"
    III_C5_PRIME = "III_C5_PRIME"
    III_C5_DOUBLE_PRIME = "III_C5_DOUBLE_PRIME"
    III_C6 = "III_C6"

    @property
    def is_case_II(self) -> bool:
        return self.value.startswith("II_")

    @property
    def is_case_III(self) -> bool:
        return self.value.startswith("III_")


NO_RATIONAL_H = "canonical search found no rational involutive H"


class ClassificationError(AssertionError):
    pass


class ProlongationError(AssertionError):
    pass


@dataclass
class Classification:
    label: CaseLabel
    k: int
    r: int
    r_II: int
    growth: list[int]
    closure: Distribution
    closure_rank: int
    rank_closure_f: int | None = None
    rank_next: int | None = None


@dataclass
class LsopiDistribution:
    """An involutive ``H`` with ``D^{k-1} < H < D^k`` and its feedback column."""

    H: Distribution
    k: int
    beta: tuple[Expr, Expr]
    xi: VectorField
    special: bool = False
    forced: bool = True


@dataclass
class StepReport:
    index: int
    n: int
    k: int | None
    case: str
    r: int | None = None
    r_II: int | None = None
    growth_vector: list[int] = field(default_factory=list)
    closure_rank: int | None = None
    ranks: list[int] = field(default_factory=list)
    H_generators: list[list[str]] | None = None
    beta_column: list[str] | None = None
    prolonged_control: str | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "n": self.n,
            "k": self.k,
            "case": self.case,
            "r": self.r,
            "r_II": self.r_II,
            "growth_vector": list(self.growth_vector),
            "closure_rank": self.closure_rank,
            "ranks": list(self.ranks),
            "H_generators": self.H_generators,
            "beta_column": self.beta_column,
            "prolonged_control": self.prolonged_control,
            "notes": list(self.notes),
        }


@dataclass
class Verdict:
    kind: str
    ell: int | None
    steps: list[StepReport]
    reason: str = ""
    failing_step: int | None = None
    conclusive: bool = True
    systems: list[ControlAffineSystem] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "verdict": self.kind,
            "ell": self.ell,
            "conclusive": self.conclusive,
            "failing_step": self.failing_step,
            "reason": self.reason,
            "steps": [s.to_dict() for s in self.steps],
        }


# -- classification ------------------------------------------------------

def classify(filt: Filtration, k: int) -> Classification:
    """Assign exactly one case label to a system with non-involutivity index k."""
    f = filt.sys.f
    Dk, Dk1 = filt.D(k), filt.D(k - 1)
    seq = derived_sequence(Dk, 3)
    growth = [E.rank for E in seq]
    r = growth[1] - growth[0]
    r_II = Dk.plus_brackets(Dk1).rank - Dk.rank if k >= 1 else 0
    closure = seq[2] if seq[2].rank == seq[1].rank else involutive_closure(seq[2])
    out = Classification(CaseLabel.I, k, r, r_II, growth, closure, closure.rank)
    if r_II > 0:
        out.label = {2: CaseLabel.II_A, 1: CaseLabel.II_B}.get(r, CaseLabel.II_NO_H)
        return out

    m = 2 * k + 2
    bar = closure.rank
    if bar == m + 1 and not closure.is_full():
        out.rank_closure_f = closure.plus([lie_bracket(f, b) for b in Dk.basis()]).rank
    fk = out.rank_closure_f
    if fk == m + 2:
        out.rank_next = filt.D(k + 1).rank
    preds = {
        CaseLabel.III_C1: growth == [m, m + 1, m + 1] and bar == m + 1 and closure.is_full(),
        CaseLabel.III_C2: growth == [m, m + 1, m + 2],
        CaseLabel.III_C3: growth == [m, m + 1, m + 3],
        CaseLabel.III_C4: bar == m + 1 and fk == m + 1,
        CaseLabel.III_C5_PRIME: bar == m + 1 and fk == m + 2 and out.rank_next == m + 1,
        CaseLabel.III_C5_DOUBLE_PRIME: bar == m + 1 and fk == m + 2 and out.rank_next == m + 2,
        CaseLabel.III_C6: bar == m + 1 and fk == m + 3,
    }
    hits = [label for label, ok in preds.items() if ok]
    if len(hits) != 1:
        raise ClassificationError(f"expected one label, got {hits} (k={k}, growth={growth}, closure={bar})")
    out.label = hits[0]
    return out


# -- building H ----------------------------------------------------------

def validate_lsopi(filt: Filtration, k: int, H: Distribution, xi: VectorField) -> list[str]:
    """Problems with ``H`` as an LSOPI-distribution (empty list if none)."""
    Dk, Dk1 = filt.D(k), filt.D(k - 1)
    problems = []
    if not H.contains_all(Dk1):
        problems.append("H does not contain D^{k-1}")
    if not Dk.contains_all(H):
        problems.append("H is not inside D^k")
    if H.rank != Dk1.rank + 1 or Dk.rank != H.rank + 1:
        problems.append(f"coranks are not one (ranks {Dk1.rank}, {H.rank}, {Dk.rank})")
    if not H.is_involutive():
        problems.append("H is not involutive")
    if not problems:
        span = Dk1.plus([xi])
        if not (H.contains(xi) and span.contains_all(H)):
            problems.append("H is not D^{k-1} + span{ad_f^k g2p}")
    return problems


def extract_beta_column(filt: Filtration, k: int, H: Distribution) -> tuple[Expr, Expr]:
    """Column ``(b21, b22)`` with ``ad_f^k(b21 g1 + b22 g2)`` in H but not in D^{k-1}.

    Modulo ``D^{k-1}`` the map ``g -> ad_f^k g`` is linear over functions, so the
    column spans the kernel of ``[ad_f^k g1, ad_f^k g2]`` taken modulo ``H``.
    The first nonzero entry is normalised to one.
    """
    vars = filt.sys.states
    w1 = H.reduce(filt.ad(k, 1))
    w2 = H.reduce(filt.ad(k, 2))
    M = FunMatrix([[a, b] for a, b in zip(w1.comps, w2.comps)], vars)
    ker = kernel_basis(M)
    if len(ker) != 1:
        raise ProlongationError(f"expected a one-dimensional feedback kernel, got {len(ker)}")
    b21, b22 = ker[0]
    lead = b21 if not b21.is_zero() else b22
    if lead != 1:
        b21, b22 = b21 / lead, b22 / lead
    xi = filt.ad_of(k, filt.sys.g1.scale(b21) + filt.sys.g2.scale(b22))
    if not H.contains(xi) or filt.D(k - 1).contains(xi):
        raise ProlongationError("feedback column does not generate H modulo D^{k-1}")
    return b21, b22


def _lsopi_from(filt: Filtration, k: int, H: Distribution, notes: list[str], **flags) -> LsopiDistribution | None:
    H = H.reduced()
    try:
        beta = extract_beta_column(filt, k, H)
    except ProlongationError as exc:
        notes.append(f"rejected H: {exc}")
        return None
    xi = filt.ad_of(k, filt.sys.g1.scale(beta[0]) + filt.sys.g2.scale(beta[1]))
    problems = validate_lsopi(filt, k, H, xi)
    if problems:
        notes.append("rejected H: " + "; ".join(problems))
        return None
    return LsopiDistribution(H, k, beta, xi, **flags)


def construct_H_case_II(filt: Filtration, cls: Classification, notes: list[str]) -> LsopiDistribution | None:
    k, f = cls.k, filt.sys.f
    Dk, Dk1 = filt.D(k), filt.D(k - 1)
    if cls.label is CaseLabel.II_NO_H:
        notes.append(f"r = {cls.r}: no LSOPI-distribution exists")
        return None
    C = characteristic_distribution(Dk)
    if cls.label is CaseLabel.II_A:
        checks = [("A1", cls.r_II == 1), ("A2", C.rank == 2 * k - 1)]
        H = Dk1.plus([lie_bracket(f, c) for c in C.basis()])
        checks.append(("A3", H.rank == 2 * k + 1))
        checks.append(("A4", checks[-1][1] and H.is_involutive()))
    else:
        checks = [("B1", C.rank == 2 * k)]
        H = Dk1.plus(C)
        checks.append(("B2", H.rank == 2 * k + 1))
        checks.append(("B3", checks[-1][1] and H.is_involutive()))
    notes.append("conditions " + ", ".join(f"{name}={'yes' if ok else 'no'}" for name, ok in checks))
    notes.append(f"rank C(D^k) = {C.rank}")
    if not all(ok for _, ok in checks):
        failed = [name for name, ok in checks if not ok]
        notes.append(f"no LSOPI-distribution: {failed[0]} fails")
        return None
    return _lsopi_from(filt, k, H, notes)


def _rational_roots(A: Expr, B: Expr, C: Expr) -> list[Expr] | None:
    """Roots of ``A t^2 + B t + C`` in the function field; None means every t works."""
    if A.is_zero():
        if B.is_zero():
            return None if C.is_zero() else []
        return [-C / B]
    disc = B * B - A * C * 4
    if disc.is_zero():
        return [-B / (A * 2)]
    prod = disc.num * disc.den
    try:
        root = prod.sqrt()
    except Exception:
        return []
    s = Expr._pair(disc.vars, root, disc.den)
    roots = [(-B + s) / (A * 2), (-B - s) / (A * 2)]
    return sorted(roots, key=str)


def canonical_H(filt: Filtration, k: int, notes: list[str]) -> LsopiDistribution | None:
    """Deterministic involutive choice of ``H = D^{k-1} + span{X1 + t X2}``.

    ``X_i = ad_f^k g_i``.  Candidates are tried with the earliest pivot first:
    columns ``(1, t)`` with ``t`` constant along ``D^{k-1}`` (a root of the
    quadratic that makes each ``[d, X1 + t X2]`` proportional to ``X1 + t X2``),
    then the column ``(0, 1)``.
    """
    vars = filt.sys.states
    X1, X2 = filt.ad(k, 1), filt.ad(k, 2)
    Dk1 = filt.D(k - 1)
    one, zero = Expr.constant(1, vars), Expr.constant(0, vars)
    ts: list[Expr] | None = None
    if k >= 1:
        cols = FunMatrix.from_columns([b.comps for b in Dk1.basis()] + [X1.comps, X2.comps], len(vars), vars)
        for d in Dk1.basis():
            coeffs = []
            for X in (X1, X2):
                sol = solve_membership(lie_bracket(d, X).comps, cols)
                if sol is None:
                    coeffs = None
                    break
                coeffs.append(sol[-2:])
            if coeffs is None:
                ts = []
                break
            (c11, c12), (c21, c22) = coeffs
            roots = _rational_roots(c21, c11 - c22, -c12)
            if roots is None:
                continue
            ts = roots if ts is None else [t for t in ts if any((t - s).is_zero() for s in roots)]
            if not ts:
                break
    candidates = [(one, t) for t in (ts if ts is not None else [zero])] + [(zero, one)]
    for b1, b2 in candidates:
        xi = X1.scale(b1) + X2.scale(b2)
        H = Dk1.plus([xi]).reduced()
        if H.rank == Dk1.rank + 1 and H.is_involutive():
            out = _lsopi_from(filt, k, H, notes)
            if out is not None:
                return out
    notes.append(NO_RATIONAL_H)
    return None


def find_tilde_g2(filt: Filtration, cls: Classification) -> tuple[VectorField, Expr, bool]:
    """``g2 - a g1`` with ``ad_f^{k+1}`` of it inside the involutive closure.

    Returns ``(field, a, permuted)``; ``permuted`` means the roles of the two
    inputs were exchanged because ``ad_f^{k+1} g1`` already lies in the closure.
    """
    k, bar = cls.k, cls.closure
    sys = filt.sys
    Y1, Y2 = filt.ad(k + 1, 1), filt.ad(k + 1, 2)
    if bar.contains(Y1):
        tilde, alpha, permuted = sys.g1, Expr.constant(0, sys.states), True
    else:
        w1, w2 = bar.reduce(Y1), bar.reduce(Y2)
        c = next(i for i, e in enumerate(w1.comps) if not e.is_zero())
        alpha = w2.comps[c] / w1.comps[c]
        if not (w2 - w1.scale(alpha)).is_zero():
            raise ClassificationError("no function a puts ad_f^{k+1}(g2 - a g1) in the closure")
        tilde, permuted = sys.g2 - sys.g1.scale(alpha), False
    if not bar.contains(filt.ad_of(k + 1, tilde)):
        raise ClassificationError("tilde g2 check failed")
    return tilde, alpha, permuted


def special_H_conditions(filt: Filtration, cls: Classification, tilde: VectorField) -> dict:
    """Checks on the special choice ``E = D^{k-1} + span{ad_f^k tilde}``.

    ``C5a``: the closure of ``D^k`` plus its drift brackets has rank ``2k+5``.
    ``C5b``: ``E`` is involutive (always true when ``k = 0``).
    """
    k, bar = cls.k, cls.closure
    rank = bar.plus([lie_bracket(filt.sys.f, b) for b in bar.basis()]).rank
    E = filt.D(k - 1).plus([filt.ad_of(k, tilde)])
    return {"C5a": rank == 2 * k + 5, "C5b": k == 0 or E.is_involutive(), "E": E}


def special_H_forced(filt: Filtration, k: int, tilde: VectorField) -> tuple[int, bool, bool]:
    """Whether the special ``H`` is the only choice that can work.

    Returns ``(bracket_corank, side, conclusive)``: the corank of ``D^{k+1}`` in
    ``D^{k+1} + [D^k, D^{k+1}]``, whether ``ad_f^k tilde`` preserves
    ``D^{k+1}``, and whether the two together force the special choice.
    """
    Dk, Dn = filt.D(k), filt.D(k + 1)
    bracket_corank = Dn.plus_brackets(Dk).rank - Dn.rank
    x = filt.ad_of(k, tilde)
    side = all(Dn.contains(lie_bracket(x, b)) for b in Dn.basis())
    conclusive = k >= 1 and (bracket_corank == 2 or (bracket_corank == 1 and side))
    return bracket_corank, side, conclusive


def construct_H_case_III(filt: Filtration, cls: Classification, notes: list[str]) -> LsopiDistribution | None:
    k, label = cls.k, cls.label
    if label is CaseLabel.III_C1:
        return canonical_H(filt, k, notes)
    if label is CaseLabel.III_C2:
        H = characteristic_distribution(filt.D(k).plus_brackets())
        notes.append(f"H = C(D^k + [D^k, D^k]) of rank {H.rank}")
        out = _lsopi_from(filt, k, H, notes)
        if out is None:
            notes.append("characteristic distribution of D^k + [D^k, D^k] is not a valid H")
        return out
    if label is CaseLabel.III_C5_DOUBLE_PRIME:
        tilde, alpha, permuted = find_tilde_g2(filt, cls)
        notes.append(f"alpha = {alpha}" + (" (inputs permuted)" if permuted else ""))
        app_a = special_H_conditions(filt, cls, tilde)
        notes.append(f"C5a={'yes' if app_a['C5a'] else 'no'}, C5b={'yes' if app_a['C5b'] else 'no'}")
        if k >= 1:
            bracket_corank, side, conclusive = special_H_forced(filt, k, tilde)
            notes.append(f"bracket corank = {bracket_corank}, side condition {'holds' if side else 'fails'}")
        else:
            conclusive = False
        E = app_a["E"]
        if app_a["C5b"]:
            out = _lsopi_from(filt, k, E, notes, special=True, forced=conclusive)
            if out is not None:
                notes.append("H = D^{k-1} + span{ad_f^k tilde g2}" + ("" if conclusive else " (not forced)"))
                return out
        if conclusive:
            notes.append("no LSOPI-distribution: the special choice is forced and fails")
            return None
        out = canonical_H(filt, k, notes)
        if out is not None:
            out.forced = False
            notes.append("non-forced canonical H")
        return out
    notes.append(f"no LSOPI-distribution in case {label.value}")
    return None


# -- prolongation --------------------------------------------------------

def _fresh_name(states: Sequence[str], base: str) -> str:
    name = base
    while name in states:
        name += "_"
    return name


def _combo(terms: Sequence[tuple[Expr, str]]) -> str:
    out = []
    for c, name in terms:
        if c.is_zero():
            continue
        if c == 1:
            out.append(name)
        elif c == -1:
            out.append(f"-{name}")
        else:
            out.append(f"({c})*{name}")
    return " + ".join(out).replace("+ -", "- ") or "0"


def prolong_with_column(sys: ControlAffineSystem, b21: Expr, b22: Expr, name: str) -> tuple[ControlAffineSystem, str]:
    """Prolong ``b22 u1 - b21 u2`` after the feedback ``u = beta v``.

    ``beta`` has second column ``(b21, b22)`` and first column ``(1, 0)`` when
    ``b22`` is nonzero, else ``(0, 1)``.  The first new input becomes a state.
    """
    c1, c2 = (1, 0) if not b22.is_zero() else (0, 1)
    if (b22 * c1 - b21 * c2).is_zero():
        raise ProlongationError("singular feedback column")
    g1t = sys.g1 if c1 == 1 else sys.g2
    g2t = sys.g1.scale(b21) + sys.g2.scale(b22)
    name = _fresh_name(sys.states, name)
    vars = sys.states + (name,)
    u = Expr.variable(name, vars)
    f_new = sys.f.lift(vars) + g1t.lift(vars).scale(u)
    new = ControlAffineSystem(
        vars,
        f_new,
        VectorField.coordinate(name, vars),
        g2t.lift(vars),
        name=sys.name,
        lineage=list(sys.lineage) + [f"prolong {_combo([(b22, 'u1'), (-b21, 'u2')])} as {name}"],
    )
    return new, _combo([(b22, "u1"), (-b21, "u2")])


def build_prolongation(
    filt: Filtration, L: LsopiDistribution, name: str, check: bool = True
) -> tuple[ControlAffineSystem, str]:
    """Prolong along ``L`` and check the new filtration matches ``H``."""
    sys = filt.sys
    new, control = prolong_with_column(sys, L.beta[0], L.beta[1], name)
    if check:
        problems = prolongation_problems(filt, L, new)
        if problems:
            raise ProlongationError("; ".join(problems))
    return new, control


def prolongation_problems(filt: Filtration, L: LsopiDistribution, new: ControlAffineSystem) -> list[str]:
    """Compare ``D_p^j`` with ``span{d/du} + H^j`` for ``j <= k``."""
    sys, k = filt.sys, L.k
    nf = Filtration(new, filt.smp)
    u_field = new.g1
    g2p = sys.g1.scale(L.beta[0]) + sys.g2.scale(L.beta[1])
    problems = []
    for j in range(k + 1):
        Hj = filt.D(j - 1).plus([filt.ad_of(j, g2p)])
        if j == k and not Hj.equals(L.H):
            problems.append("the feedback column does not generate H")
        lifted = Distribution([u_field] + [b.lift(new.states) for b in Hj.basis()], new.states, smp=filt.smp)
        Dp = nf.D(j)
        if not Dp.equals(lifted):
            problems.append(f"D_p^{j} differs from span(d/du) + H^{j}")
        if not Dp.is_involutive():
            problems.append(f"D_p^{j} is not involutive")
    if nf.D(k).rank != 2 * k + 2:
        problems.append(f"rank D_p^k = {nf.D(k).rank}, expected {2 * k + 2}")
    return problems


def affinize(states: Sequence[str], controls: Sequence[str], F: Sequence[Expr], name: str = "") -> ControlAffineSystem:
    """Turn ``dx/dt = F(x, u)`` into a control-affine system by prolonging both inputs."""
    from .funlinalg import generic_rank

    states, controls = tuple(states), tuple(controls)
    vars = states + controls
    F = [e.lift(vars) for e in F]
    if len(F) != len(states):
        raise ValueError("one right-hand side per state")
    J = FunMatrix([[e.diff(u) for u in controls] for e in F], vars)
    if generic_rank(J) != len(controls):
        raise ValueError("the inputs do not enter independently")
    zero = Expr.constant(0, vars)
    f = VectorField(list(F) + [zero] * len(controls), vars)
    return ControlAffineSystem(
        vars,
        f,
        VectorField.coordinate(controls[0], vars),
        VectorField.coordinate(controls[1], vars),
        name=name,
        lineage=["affinized"],
    )


def flatness_necessary_check(filt: Filtration, k: int, label: CaseLabel | None = None) -> str | None:
    """Reason the system cannot be flat, or None."""
    if k >= 1 and filt.D(k).rank - filt.D(k - 1).rank == 1:
        return "D^{k-1} has corank one in D^k"
    if label is CaseLabel.III_C4:
        return "not strongly accessible: the closure of D^k is f-invariant and proper"
    return None


def run_lsopi(sys: ControlAffineSystem, max_steps: int | None = None, smp: Sampler | None = None) -> Verdict:
    smp = smp or default_sampler()
    max_steps = sys.n if max_steps is None else max_steps
    steps: list[StepReport] = []
    systems = [sys]
    non_forced = False
    prev_k = None
    for i in range(max_steps + 1):
        filt = Filtration(sys, smp)
        k = filt.index()
        step = StepReport(index=i, n=sys.n, k=k, case=CaseLabel.I.value)
        steps.append(step)
        if k is None:
            rho = filt.rho()
            step.ranks = filt.ranks(filt.stable_index())
            if rho is not None:
                step.notes.append(f"static feedback linearizable, rho = {rho}")
                return Verdict("LSOPI", i, steps, "static feedback linearizable", systems=systems)
            step.notes.append("all D^j involutive but the rank stalls below n")
            return Verdict("NOT_FLAT", None, steps, "not controllable: D^j stalls below n", i, systems=systems)
        if prev_k is not None and k <= prev_k:
            raise ProlongationError(f"non-involutivity index did not increase ({prev_k} -> {k})")
        prev_k = k
        step.ranks = filt.ranks(k)
        reason = flatness_necessary_check(filt, k)
        if reason:
            step.case = "corank_deficient"
            step.notes.append(reason)
            return Verdict("NOT_FLAT", None, steps, reason, i, systems=systems)
        cls = classify(filt, k)
        step.case = cls.label.value
        step.r, step.r_II = cls.r, cls.r_II
        step.growth_vector = cls.growth
        step.closure_rank = cls.closure_rank
        reason = flatness_necessary_check(filt, k, cls.label)
        if reason:
            step.notes.append(reason)
            return Verdict("NOT_FLAT", None, steps, reason, i, systems=systems)
        if cls.label.is_case_II:
            L = construct_H_case_II(filt, cls, step.notes)
        else:
            L = construct_H_case_III(filt, cls, step.notes)
        if L is None:
            undecided = non_forced or NO_RATIONAL_H in step.notes
            kind = "INCONCLUSIVE" if undecided else "NOT_LSOPI"
            return Verdict(kind, None, steps, "no LSOPI-distribution", i, conclusive=not undecided, systems=systems)
        non_forced = non_forced or not L.forced
        step.H_generators = L.H.generator_strings()
        step.beta_column = [str(L.beta[0]), str(L.beta[1])]
        sys, control = build_prolongation(filt, L, f"u1_{i}")
        step.prolonged_control = control
        systems.append(sys)
    raise ProlongationError(f"step cap {max_steps} exceeded")
