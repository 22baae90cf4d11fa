"""Exact rational-function expressions over a fixed tuple of state variables.

An :class:`Expr` keeps the parse tree it was built from (if any) together with
a lazily computed canonical pair ``(num, den)`` of multivariate polynomials
over Q.  The pair is reduced by a gcd and the denominator is made monic in
graded-lex order, so two expressions are equal exactly when their pairs are.
Polynomial arithmetic is delegated to FLINT.
"""

from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import flint

__all__ = [
    "Expr",
    "Point",
    "ExprSyntaxError",
    "UnknownVariableError",
    "ZeroDenominatorError",
    "NonGenericPointError",
    "parse_expr",
    "normalize",
    "differentiate",
    "equals_zero",
    "evaluate",
    "const",
    "var",
]


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, text: str = "", pos: int = 0):
        super().__init__(f"{message} at position {pos}: {text!r}")
        self.pos = pos
        self.text = text


class UnknownVariableError(ExprSyntaxError):
    pass


class ZeroDenominatorError(ZeroDivisionError):
    """A denominator simplifies to the zero polynomial."""


class NonGenericPointError(ZeroDivisionError):
    """Evaluation hit a pole of the expression."""


@lru_cache(maxsize=None)
def _context(names: tuple[str, ...]):
    return flint.fmpq_mpoly_ctx.get(names, "deglex")


def _to_fraction(q) -> Fraction:
    return Fraction(int(q.p), int(q.q))


def _to_fmpq(value) -> flint.fmpq:
    if isinstance(value, flint.fmpq):
        return value
    value = Fraction(value)
    return flint.fmpq(value.numerator, value.denominator)


def _merge_vars(a: tuple[str, ...], b: tuple[str, ...]) -> tuple[str, ...]:
    if a == b:
        return a
    extra = tuple(v for v in b if v not in a)
    return a + extra


class Expr:
    """Immutable rational function in the variables ``vars``."""

    __slots__ = ("vars", "_tree", "_num", "_den", "_derivs")

    def __init__(self, vars: Sequence[str], tree=None, num=None, den=None):
        self.vars = tuple(vars)
        self._tree = tree
        self._num = num
        self._den = den
        # memo of partial derivatives, filled on demand
        self._derivs: dict[str, Expr] = {}

    # -- construction -------------------------------------------------
    @classmethod
    def _pair(cls, vars: tuple[str, ...], num, den) -> Expr:
        """Build from an unreduced pair."""
        if num.is_zero():
            ctx = _context(vars)
            return cls(vars, num=ctx.from_dict({}), den=ctx.constant(1))
        if den.is_zero():
            raise ZeroDenominatorError("denominator is identically zero")
        if not den.is_constant():
            g = num.gcd(den)
            if not g.is_constant():
                num = num / g
                den = den / g
        lc = den.leading_coefficient()
        if lc != 1:
            num = num / lc
            den = den / lc
        return cls(vars, num=num, den=den)

    @classmethod
    def constant(cls, value, vars: Sequence[str]) -> Expr:
        vars = tuple(vars)
        ctx = _context(vars)
        return cls(vars, num=ctx.constant(_to_fmpq(value)), den=ctx.constant(1))

    @classmethod
    def variable(cls, name: str, vars: Sequence[str]) -> Expr:
        vars = tuple(vars)
        if name not in vars:
            raise UnknownVariableError(f"unknown variable {name!r}", name, 0)
        ctx = _context(vars)
        return cls(vars, num=ctx.gens()[vars.index(name)], den=ctx.constant(1))

    # -- canonical form -----------------------------------------------
    def _canon(self):
        if self._num is None:
            num, den = _tree_to_pair(self._tree, self.vars)
            reduced = Expr._pair(self.vars, num, den)
            self._num, self._den = reduced._num, reduced._den
        return self._num, self._den

    @property
    def num(self):
        return self._canon()[0]

    @property
    def den(self):
        return self._canon()[1]

    @property
    def tree(self):
        return self._tree

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_constant(self) -> bool:
        num, den = self._canon()
        return num.is_constant() and den.is_constant()

    def is_polynomial(self) -> bool:
        return self.den.is_one()

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("expression is not constant")
        num = self.num
        return Fraction(0) if num.is_zero() else _to_fraction(num.leading_coefficient())

    def complexity(self) -> int:
        """Total degree of numerator plus denominator; used for pivoting."""
        num, den = self._canon()
        dn = 0 if num.is_zero() else num.total_degree()
        return dn + den.total_degree()

    def free_symbols(self) -> tuple[str, ...]:
        num, den = self._canon()
        used = [False] * len(self.vars)
        for poly in (num, den):
            if poly.is_zero():
                continue
            for i, d in enumerate(poly.degrees()):
                if d > 0:
                    used[i] = True
        return tuple(v for v, u in zip(self.vars, used) if u)

    def lift(self, vars: Sequence[str]) -> Expr:
        """Re-express in a superset of the current variables."""
        vars = tuple(vars)
        if vars == self.vars:
            return self
        missing = [v for v in self.vars if v not in vars]
        if missing:
            raise ValueError(f"cannot lift: {missing} not in target variables")
        num, den = self._canon()
        ctx = _context(vars)
        gens = ctx.gens()
        images = [gens[vars.index(v)] for v in self.vars]
        if self.vars:
            num2 = num.compose(*images, ctx=ctx)
            den2 = den.compose(*images, ctx=ctx)
        else:
            num2 = ctx.constant(num.leading_coefficient() if not num.is_zero() else 0)
            den2 = ctx.constant(1)
        return Expr(vars, num=num2, den=den2)

    # -- arithmetic ---------------------------------------------------
    def _coerce(self, other) -> tuple[Expr, Expr] | None:
        if isinstance(other, Expr):
            if other.vars == self.vars:
                return self, other
            merged = _merge_vars(self.vars, other.vars)
            return self.lift(merged), other.lift(merged)
        if isinstance(other, (int, Fraction, flint.fmpq, flint.fmpz)):
            return self, Expr.constant(other, self.vars)
        return None

    def __add__(self, other):
        pair = self._coerce(other)
        if pair is None:
            return NotImplemented
        a, b = pair
        n1, d1 = a._canon()
        n2, d2 = b._canon()
        if n1.is_zero():
            return b if b._tree is None else Expr(b.vars, num=n2, den=d2)
        if n2.is_zero():
            return a if a._tree is None else Expr(a.vars, num=n1, den=d1)
        if d1.is_one() and d2.is_one():
            return Expr(a.vars, num=n1 + n2, den=d1)
        if d1 == d2:
            return Expr._pair(a.vars, n1 + n2, d1)
        g = d1.gcd(d2)
        if g.is_one():
            return Expr._pair(a.vars, n1 * d2 + n2 * d1, d1 * d2)
        e1 = d2 / g
        return Expr._pair(a.vars, n1 * e1 + n2 * (d1 / g), d1 * e1)

    __radd__ = __add__

    def __neg__(self):
        n, d = self._canon()
        return Expr(self.vars, num=-n, den=d)

    def __sub__(self, other):
        pair = self._coerce(other)
        if pair is None:
            return NotImplemented
        return pair[0] + (-pair[1])

    def __rsub__(self, other):
        pair = self._coerce(other)
        if pair is None:
            return NotImplemented
        return pair[1] + (-pair[0])

    def __mul__(self, other):
        pair = self._coerce(other)
        if pair is None:
            return NotImplemented
        a, b = pair
        n1, d1 = a._canon()
        n2, d2 = b._canon()
        vars = a.vars
        if n1.is_zero() or n2.is_zero():
            return Expr.constant(0, vars)
        if d1.is_one() and d2.is_one():
            return Expr(vars, num=n1 * n2, den=d1)
        if not d2.is_one():
            g = n1.gcd(d2)
            if not g.is_constant():
                n1, d2 = n1 / g, d2 / g
        if not d1.is_one():
            g = n2.gcd(d1)
            if not g.is_constant():
                n2, d1 = n2 / g, d1 / g
        num, den = n1 * n2, d1 * d2
        lc = den.leading_coefficient()
        if lc != 1:
            num, den = num / lc, den / lc
        return Expr(vars, num=num, den=den)

    __rmul__ = __mul__

    def inverse(self) -> Expr:
        n, d = self._canon()
        if n.is_zero():
            raise ZeroDenominatorError("division by an expression that is identically zero")
        lc = n.leading_coefficient()
        return Expr(self.vars, num=d / lc, den=n / lc)

    def __truediv__(self, other):
        pair = self._coerce(other)
        if pair is None:
            return NotImplemented
        return pair[0] * pair[1].inverse()

    def __rtruediv__(self, other):
        pair = self._coerce(other)
        if pair is None:
            return NotImplemented
        return pair[1] * pair[0].inverse()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        n, d = self._canon()
        if k < 0:
            return self.inverse() ** (-k)
        num, den = n**k, d**k
        return Expr(self.vars, num=num, den=den)

    # -- comparison ---------------------------------------------------
    def __eq__(self, other):
        pair = self._coerce(other)
        if pair is None:
            return NotImplemented
        a, b = pair
        return a.num == b.num and a.den == b.den

    def __hash__(self):
        return hash(self.to_string())

    def __bool__(self):
        raise TypeError("truth value of an Expr is ambiguous; use is_zero()")

    # -- calculus and evaluation --------------------------------------
    def diff(self, name: str) -> Expr:
        cached = self._derivs.get(name)
        if cached is not None:
            return cached
        if name not in self.vars:
            raise UnknownVariableError(f"unknown variable {name!r}", name, 0)
        n, d = self._canon()
        i = self.vars.index(name)
        dn = n.derivative(i)
        if d.is_constant():
            out = Expr(self.vars, num=dn, den=d)
        else:
            dd = d.derivative(i)
            out = Expr._pair(self.vars, dn * d - n * dd, d * d)
        self._derivs[name] = out
        return out

    def eval_fmpq(self, values: Sequence) -> flint.fmpq:
        """Evaluate the canonical form at FLINT rationals aligned with ``vars``."""
        n, d = self._canon()
        if not self.vars:
            return flint.fmpq(0) if n.is_zero() else n.leading_coefficient() / d.leading_coefficient()
        dv = d(*values)
        if dv == 0:
            raise NonGenericPointError("denominator vanishes at the point")
        return n(*values) / dv

    # -- printing -----------------------------------------------------
    def to_string(self) -> str:
        n, d = self._canon()
        num_s = _poly_str(n, self.vars)
        if d.is_one():
            return num_s
        if len(n.coeffs()) > 1 or "/" in num_s:
            num_s = f"({num_s})"
        den_s = _poly_str(d, self.vars)
        if len(d.coeffs()) > 1 or "*" in den_s:
            den_s = f"({den_s})"
        return f"{num_s}/{den_s}"

    __str__ = to_string

    def __repr__(self):
        return f"Expr({self.to_string()!r})"


def _fmt_coeff(c) -> str:
    return str(c.p) if c.q == 1 else f"{c.p}/{c.q}"


def _poly_str(p, names: tuple[str, ...]) -> str:
    if p.is_zero():
        return "0"
    pieces = []
    for exps, c in p.terms():
        mono = "*".join(
            name if e == 1 else f"{name}^{e}" for name, e in zip(names, exps) if e
        )
        neg = c < 0
        a = -c if neg else c
        if not mono:
            body = _fmt_coeff(a)
        elif a == 1:
            body = mono
        else:
            body = f"{_fmt_coeff(a)}*{mono}"
        pieces.append((neg, body))
    neg, body = pieces[0]
    out = ("-" if neg else "") + body
    for neg, body in pieces[1:]:
        out += (" - " if neg else " + ") + body
    return out


# -- parse trees -------------------------------------------------------
# nodes: ("num", int) ("var", name) ("neg", a) ("add"|"sub"|"mul"|"div", a, b) ("pow", a, k)

def _tree_to_pair(node, vars: tuple[str, ...]):
    ctx = _context(vars)
    kind = node[0]
    if kind == "num":
        return ctx.constant(node[1]), ctx.constant(1)
    if kind == "var":
        return ctx.gens()[vars.index(node[1])], ctx.constant(1)
    if kind == "neg":
        n, d = _tree_to_pair(node[1], vars)
        return -n, d
    if kind == "pow":
        n, d = _tree_to_pair(node[1], vars)
        k = node[2]
        if k < 0:
            if n.is_zero():
                raise ZeroDenominatorError("negative power of zero")
            n, d, k = d, n, -k
        return n**k, d**k
    n1, d1 = _tree_to_pair(node[1], vars)
    n2, d2 = _tree_to_pair(node[2], vars)
    if kind == "add":
        return n1 * d2 + n2 * d1, d1 * d2
    if kind == "sub":
        return n1 * d2 - n2 * d1, d1 * d2
    if kind == "mul":
        return n1 * n2, d1 * d2
    if kind == "div":
        if n2.is_zero():
            raise ZeroDenominatorError("denominator is identically zero")
        return n1 * d2, d1 * n2
    raise ValueError(f"bad node {kind!r}")


def _tree_eval(node, point: Mapping[str, Fraction]) -> Fraction:
    kind = node[0]
    if kind == "num":
        return Fraction(node[1])
    if kind == "var":
        return point[node[1]]
    if kind == "neg":
        return -_tree_eval(node[1], point)
    if kind == "pow":
        base = _tree_eval(node[1], point)
        if node[2] < 0 and base == 0:
            raise NonGenericPointError("negative power of zero at the point")
        return base ** node[2]
    a = _tree_eval(node[1], point)
    b = _tree_eval(node[2], point)
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    if b == 0:
        raise NonGenericPointError("division by zero at the point")
    return a / b


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(.))")


def _tokenize(text: str):
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        start = m.start(m.lastindex)
        if m.group(1):
            tokens.append(("num", int(m.group(1)), start))
        elif m.group(2):
            tokens.append(("name", m.group(2), start))
        else:
            ch = m.group(3)
            if ch not in "+-*/^()":
                raise ExprSyntaxError(f"unexpected character {ch!r}", text, start)
            tokens.append(("op", ch, start))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, vars: tuple[str, ...]):
        self.text = text
        self.vars = vars
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(msg, self.text, tok[2])

    def parse(self):
        if self.peek()[0] == "end":
            self.error("empty expression")
        node = self.sum()
        if self.peek()[0] != "end":
            self.error(f"unexpected token {self.peek()[1]!r}")
        return node

    def sum(self):
        node = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = ("add" if op == "+" else "sub", node, self.product())
        return node

    def product(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = ("mul" if op == "*" else "div", node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in ("+", "-"):
            self.take()
            inner = self.unary()
            return ("neg", inner) if tok[1] == "-" else inner
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.take()
            sign = 1
            if self.peek()[0] == "op" and self.peek()[1] in ("+", "-"):
                sign = -1 if self.take()[1] == "-" else 1
            exp = self.take()
            if exp[0] != "num":
                self.error("exponent must be an integer literal", exp)
            return ("pow", base, sign * exp[1])
        return base

    def atom(self):
        tok = self.take()
        if tok[0] == "num":
            return ("num", tok[1])
        if tok[0] == "name":
            if tok[1] not in self.vars:
                raise UnknownVariableError(f"unknown variable {tok[1]!r}", self.text, tok[2])
            return ("var", tok[1])
        if tok[0] == "op" and tok[1] == "(":
            node = self.sum()
            close = self.take()
            if close[1] != ")" or close[0] != "op":
                self.error("expected ')'", close)
            return node
        self.error("expected a number, variable or '('", tok)


def parse_expr(text: str, vars: Sequence[str]) -> Expr:
    """Parse ``text`` over ``vars``. The canonical form is computed lazily."""
    vars = tuple(vars)
    tree = _Parser(text, vars).parse()
    return Expr(vars, tree=tree)


def normalize(e: Expr) -> Expr:
    """Canonical representative; raises ZeroDenominatorError for 0 denominators."""
    n, d = e._canon()
    return Expr(e.vars, num=n, den=d)


def equals_zero(e: Expr) -> bool:
    return e.is_zero()


def differentiate(e: Expr, name: str) -> Expr:
    return e.diff(name)


def const(value, vars: Sequence[str]) -> Expr:
    return Expr.constant(value, vars)


def var(name: str, vars: Sequence[str]) -> Expr:
    return Expr.variable(name, vars)


class Point(Mapping):
    """Exact rational assignment to every variable of an ambient tuple."""

    __slots__ = ("vars", "values", "_fmpq")

    def __init__(self, vars: Sequence[str], values: Iterable):
        self.vars = tuple(vars)
        self.values = tuple(Fraction(v) for v in values)
        if len(self.values) != len(self.vars):
            raise ValueError("point needs exactly one value per variable")
        self._fmpq = tuple(_to_fmpq(v) for v in self.values)

    @classmethod
    def from_mapping(cls, vars: Sequence[str], mapping: Mapping) -> Point:
        return cls(vars, [mapping[v] for v in vars])

    def __getitem__(self, name):
        return self.values[self.vars.index(name)]

    def __iter__(self):
        return iter(self.vars)

    def __len__(self):
        return len(self.vars)

    def fmpq_for(self, vars: tuple[str, ...]) -> tuple:
        if vars == self.vars:
            return self._fmpq
        return tuple(self._fmpq[self.vars.index(v)] for v in vars)

    def __repr__(self):
        inner = ", ".join(f"{v}={x}" for v, x in zip(self.vars, self.values))
        return f"Point({inner})"


def evaluate(e: Expr, p: Mapping) -> Fraction:
    """Exact value at ``p``; the parse tree is used when the expression has one."""
    if e.tree is not None:
        point = {v: Fraction(p[v]) for v in e.vars}
        return _tree_eval(e.tree, point)
    if isinstance(p, Point):
        values = p.fmpq_for(e.vars)
    else:
        values = tuple(_to_fmpq(p[v]) for v in e.vars)
    return _to_fraction(e.eval_fmpq(values))
