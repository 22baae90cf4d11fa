"""Named systems used by the tests, the CLI examples and the README."""

from __future__ import annotations

from .geometry import ControlAffineSystem, VectorField
from .symcore import Expr, parse_expr

__all__ = [
    "chained_form",
    "chained_form_rescaled",
    "pomet_form",
    "double_chain_with_product",
    "wrong_feedback_prolongation",
    "brunovsky",
    "uncontrollable",
    "SYNTHETIC",
    "synthetic",
]


def chained_form() -> ControlAffineSystem:
    """x1' = u1, x2' = x3 u1, x3' = x4 u1, x4' = u2."""
    return ControlAffineSystem.from_strings(
        ["x1", "x2", "x3", "x4"],
        ["0", "0", "0", "0"],
        ["1", "x3", "x4", "0"],
        ["0", "0", "0", "1"],
        name="chained form",
    )


def chained_form_rescaled(gamma: str, name: str = "u0") -> ControlAffineSystem:
    """The chained form with ``u1 = gamma * w`` and ``w`` prolonged once."""
    base = chained_form()
    states = base.states + (name,)
    g = parse_expr(gamma, states)
    u = Expr.variable(name, states)
    g1 = base.g1.lift(states)
    return ControlAffineSystem(
        states,
        g1.scale(g * u),
        VectorField.coordinate(name, states),
        base.g2.lift(states),
        name=f"chained form, u1 = ({gamma}) {name}",
    )


def pomet_form(a: str = "1", b: str = "0", c: str = "0", d: str = "0") -> ControlAffineSystem:
    """Four-state normal form that needs a threefold prolongation.

    x1' = u1, x2' = a x4 + b + x3 u1, x3' = c x4 + d + x4 u1, x4' = u2, with
    a, b, c, d functions of x1, x2, x3.
    """
    return ControlAffineSystem.from_strings(
        ["x1", "x2", "x3", "x4"],
        ["0", f"({a})*x4 + ({b})", f"({c})*x4 + ({d})", "0"],
        ["1", "x3", "x4", "0"],
        ["0", "0", "0", "1"],
        name="pomet normal form",
    )


def double_chain_with_product() -> ControlAffineSystem:
    """Two triple integrators plus w' = x11 x22."""
    return ControlAffineSystem.from_strings(
        ["w", "x11", "x12", "x13", "x21", "x22", "x23"],
        ["x11*x22", "x12", "x13", "0", "x22", "x23", "0"],
        ["0", "0", "0", "1", "0", "0", "0"],
        ["0", "0", "0", "0", "0", "0", "1"],
        name="double chain with product",
    )


def wrong_feedback_prolongation(name: str = "up") -> ControlAffineSystem:
    """``double_chain_with_product`` after u1 = up + x13 v2, u2 = v2, up' = v1."""
    base = double_chain_with_product()
    states = base.states + (name,)
    u = Expr.variable(name, states)
    x13 = Expr.variable("x13", states)
    g1, g2 = base.g1.lift(states), base.g2.lift(states)
    return ControlAffineSystem(
        states,
        base.f.lift(states) + g1.scale(u),
        VectorField.coordinate(name, states),
        g1.scale(x13) + g2,
        name="double chain, non-LSOPI prolongation",
    )


def brunovsky(n1: int, n2: int) -> ControlAffineSystem:
    """Two integrator chains of lengths n1 and n2."""
    states = [f"y{i}" for i in range(1, n1 + 1)] + [f"z{i}" for i in range(1, n2 + 1)]
    f = [f"y{i + 1}" for i in range(1, n1)] + ["0"] + [f"z{i + 1}" for i in range(1, n2)] + ["0"]
    g1 = ["0"] * (n1 + n2)
    g2 = ["0"] * (n1 + n2)
    g1[n1 - 1] = "1"
    g2[n1 + n2 - 1] = "1"
    return ControlAffineSystem.from_strings(states, f, g1, g2, name=f"brunovsky {n1}+{n2}")


def uncontrollable() -> ControlAffineSystem:
    """x1' = u1, x2' = u2, x3' = 0."""
    return ControlAffineSystem.from_strings(
        ["x1", "x2", "x3"], ["0", "0", "0"], ["1", "0", "0"], ["0", "1", "0"], name="uncontrollable"
    )


def _n(k: int) -> list[str]:
    return [f"x{i}" for i in range(1, k + 1)]


_AB = ["a1", "a2", "b1", "b2", "z1", "z2"]
_AB7 = _AB + ["z3"]
_E = lambda n, i: ["1" if j == i else "0" for j in range(n)]  # noqa: E731

# (states, f, g1, g2) of small systems that land in each branch of the classifier
SYNTHETIC: dict[str, tuple[list[str], list[str], list[str], list[str]]] = {
    "C1_k1": (_n(5), ["2*x1", "x1*x3", "2*x2*x5 + 2", "1", "x4"], ["1", "0", "0", "1", "0"], _E(5, 4)),
    "C2_k0": (_n(4), ["-1", "x2*x4", "0", "2*x3*x4 + 2"], ["0", "1", "2*x4", "2*x1"], _E(4, 0)),
    "C3": (_n(5), ["0"] * 5, _E(5, 0), ["0", "1", "x1", "x1^2", "x1*x2"]),
    "C4": (_n(4), ["0"] * 4, ["1", "0", "x2", "0"], _E(4, 1)),
    "C4_drift": (_n(4), ["2", "0", "0", "0"], ["x4", "1", "0", "0"], _E(4, 3)),
    "C5_prime": (_n(4), ["0", "0", "0", "x2"], ["2", "-x3", "0", "-1"], _E(4, 2)),
    "C6": (_n(5), ["0", "0", "0", "-x3 - 1", "2*x2*x4 + 2"], ["x3", "1", "0", "1", "0"], _E(5, 2)),
    "C5pp_alpha": (_n(4), ["x3*x4", "0", "1", "1"], ["0", "1", "0", "2*x3"], _E(4, 2)),
    "C5pp_alpha0": (_n(4), ["x3", "0", "-x2*x4", "0"], ["1", "0", "2*x2", "2"], _E(4, 1)),
    "C5pp_permuted": (_n(4), ["-x3", "0", "0", "-x2"], ["0", "-1", "0", "x3"], _E(4, 2)),
    "C5pp_C5a": (_n(5), ["2*x3", "x3", "0", "-x1*x4 + x2", "-x3 - x4"], ["0", "0", "-x1", "2", "0"], _E(5, 0)),
    "C5pp_k1_permuted": (_AB, ["0", "0", "-a1 - a1*a2", "-a2", "-a2*b1", "b2"], _E(6, 0), _E(6, 1)),
    "C5pp_k1_alpha": (_AB, ["0", "0", "-a1 - a1*a2", "-a2", "-a2*b1", "b1"], _E(6, 0), _E(6, 1)),
    "C5pp_k1_r1_side": (
        _AB7, ["0", "0", "-a2*b1", "-a1 + 1", "-a2*b2", "b2*z2 - 1", "-b2^2"], _E(7, 0), _E(7, 1)
    ),
    "C5pp_k1_r1_noside": (
        _AB7, ["0", "0", "z1", "2*a1", "a1*z2", "a2*b2 + b2", "-a2*b2"], _E(7, 0), _E(7, 1)
    ),
    "IIB_ok": (_n(5), ["x2", "0", "x5", "0", "x1*x5"], ["0", "0", "-x5", "-x5", "1"], _E(5, 1)),
    "IIB_B3_fails": (_n(6), ["0", "4", "-x1*x3", "2", "0", "-x1*x4"], ["0", "0", "0", "1", "-x6", "0"], _E(6, 0)),
    "IIA_ok": (_n(6), ["2*x5", "2", "-x2*x3", "-x1*x2", "0", "0"], ["-1", "2*x6", "1", "1", "0", "x2"], _E(6, 4)),
    "IIA_A2_fails": (
        _n(6), ["0", "2*x3", "2*x1*x2 - 1", "x1", "-x2^2", "2*x1*x5 - 1"], ["2", "0", "0", "0", "0", "2"], _E(6, 1)
    ),
    "IIA_A4_fails": (
        _n(6),
        ["-x1*x5", "0", "x5*x6", "-x2*x5", "2*x1*x2", "2*x2*x5 + x6"],
        ["2", "2", "0", "x3", "0", "2*x6"],
        _E(6, 4),
    ),
    "corank_k1": (_n(4), ["0", "0", "-x3", "0"], ["0", "2*x3", "1", "1"], _E(4, 0)),
}


def synthetic(name: str) -> ControlAffineSystem:
    states, f, g1, g2 = SYNTHETIC[name]
    return ControlAffineSystem.from_strings(states, f, g1, g2, name=name)
