"""Operator trees for elementary algebra expressions and equations.

Grammar: numbers ``[0-9]+(\\.[0-9]+)?``, single lowercase variable letters,
binary ``+ - * / ^ =``, unary negation, parentheses, and implicit
multiplication (``3x``, ``2(x+1)``, ``x(x+1)``, ``(a)(b)``, ``(a)b``, ``xy``).
Precedence, high to low: ``^`` (right-assoc), unary ``-``, ``* /`` and
implicit multiplication (left-assoc), ``+ -`` (left-assoc), ``=`` (root only,
at most one).

Numbers evaluate as exact rationals; unary negation is the internal operator
``~`` (it prints as ``-``), and number literals are never negative, so a tree
prints back to a string that reparses to the identical tree.
"""
from __future__ import annotations

import random
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, NamedTuple, Union

NEG = "~"  #: internal operator name for unary negation
BINARY_OPS = ("=", "+", "-", "*", "/", "^")


class ExprError(Exception):
    """Base class for expression-layer errors."""


class LexError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class EvalError(ExprError):
    pass


class UnboundVariable(EvalError):
    pass


class DivisionByZero(EvalError):
    pass


class NonIntegerExponent(EvalError):
    pass


class DepthExceeded(ExprError):
    pass


class TypeMismatch(ExprError):
    pass


class OracleInconclusive(ExprError):
    pass


# ---------------------------------------------------------------------- trees


@dataclass(frozen=True)
class Num:
    """Nonnegative exact-rational literal. Negative values live under ``~``."""

    value: Fraction

    def __post_init__(self):
        v = self.value
        if not isinstance(v, Fraction):
            v = Fraction(str(v)) if isinstance(v, float) else Fraction(v)
            object.__setattr__(self, "value", v)
        if v < 0:
            raise ValueError("number literals are nonnegative; use unary negation")


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if len(self.name) != 1 or not self.name.islower() or not self.name.isalpha():
            raise ValueError(f"variable must be one lowercase letter, got {self.name!r}")


@dataclass(frozen=True)
class Op:
    op: str
    args: tuple

    def __post_init__(self):
        if not isinstance(self.args, tuple):
            object.__setattr__(self, "args", tuple(self.args))
        want = 1 if self.op == NEG else 2
        if self.op not in BINARY_OPS and self.op != NEG:
            raise ValueError(f"unknown operator {self.op!r}")
        if len(self.args) != want:
            raise ValueError(f"{self.op!r} takes {want} operand(s), got {len(self.args)}")


Expr = Union[Num, Var, Op]


def is_equation(e: Expr) -> bool:
    return isinstance(e, Op) and e.op == "="


def sides(e: Expr) -> tuple[Expr, Expr]:
    if not is_equation(e):
        raise TypeMismatch("expected an equation")
    return e.args[0], e.args[1]


def collect_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Op):
        out: set[str] = set()
        for a in e.args:
            out |= collect_vars(a)
        return out
    return set()


def node_count(e: Expr) -> int:
    if isinstance(e, Op):
        return 1 + sum(node_count(a) for a in e.args)
    return 1


def subtrees(e: Expr) -> Iterator[Expr]:
    """Preorder iterator over every node."""
    yield e
    if isinstance(e, Op):
        for a in e.args:
            yield from subtrees(a)


# ---------------------------------------------------------------------- lexer


class Token(NamedTuple):
    kind: str  # num | var | op | lparen | rparen
    text: str
    pos: int


_TOKEN_RE = re.compile(
    r"(?P<num>[0-9]+(?:\.[0-9]+)?)|(?P<var>[a-z])|(?P<op>[+\-*/^=])|(?P<lparen>\()|(?P<rparen>\))"
)


def tokenize(s: str) -> list[Token]:
    """Lex ``s`` into tokens; raises LexError with the byte offset on bad input."""
    out: list[Token] = []
    i = 0
    while i < len(s):
        if s[i].isspace():
            i += 1
            continue
        m = _TOKEN_RE.match(s, i)
        if m is None:
            raise LexError(f"unexpected character {s[i]!r}", i)
        out.append(Token(m.lastgroup, m.group(), i))
        i = m.end()
    return out


# --------------------------------------------------------------------- parser

_INFIX_BP = {"=": (2, 3), "+": (10, 11), "-": (10, 11), "*": (20, 21), "/": (20, 21), "^": (30, 29)}
_PREFIX_BP = 25  # unary minus: tighter than * /, looser than ^
_IMPLICIT_LEFT = {"num", "var", "rparen"}
_IMPLICIT_RIGHT = {"var", "lparen"}


class _Parser:
    def __init__(self, tokens: list[Token], length: int):
        self.toks = tokens
        self.i = 0
        self.end = length

    def _next(self, expect: str) -> Token:
        if self.i >= len(self.toks):
            raise ParseError(f"expected {expect}, found end of input", self.end)
        t = self.toks[self.i]
        self.i += 1
        return t

    def expr(self, min_bp: int, eq_ok: bool) -> Expr:
        tok = self._next("an expression")
        if tok.kind == "num":
            left: Expr = Num(Fraction(tok.text))
        elif tok.kind == "var":
            left = Var(tok.text)
        elif tok.kind == "op" and tok.text == "-":
            left = Op(NEG, (self.expr(_PREFIX_BP, False),))
        elif tok.kind == "lparen":
            left = self.expr(0, False)  # '=' is illegal inside parentheses
            closing = self._next("')'")
            if closing.kind != "rparen":
                raise ParseError(f"expected ')', found {closing.text!r}", closing.pos)
        else:
            raise ParseError(f"unexpected token {tok.text!r}", tok.pos)

        while self.i < len(self.toks):
            nxt = self.toks[self.i]
            if nxt.kind == "op":
                lbp, rbp = _INFIX_BP[nxt.text]
                if lbp < min_bp:
                    break
                if nxt.text == "=" and not eq_ok:
                    raise ParseError("'=' is only allowed once, at the top level", nxt.pos)
                self.i += 1
                right = self.expr(rbp, False)
                left = Op(nxt.text, (left, right))
                if nxt.text == "=":
                    eq_ok = False
            elif nxt.kind in _IMPLICIT_RIGHT and self.toks[self.i - 1].kind in _IMPLICIT_LEFT:
                if 20 < min_bp:
                    break
                right = self.expr(21, False)
                left = Op("*", (left, right))
            else:
                break
        return left


def parse(s: str) -> Expr:
    """Parse ``s`` into an operator tree. Raises LexError or ParseError."""
    toks = tokenize(s)
    p = _Parser(toks, len(s))
    e = p.expr(0, True)
    if p.i < len(toks):
        t = toks[p.i]
        raise ParseError(f"unexpected token {t.text!r}", t.pos)
    return e


# -------------------------------------------------------------------- printer

_PREC = {"=": 0, "+": 1, "-": 1, "*": 2, "/": 2, NEG: 3, "^": 4}
_LEAF_PREC = 100


def format_number(v: Fraction) -> str:
    """Minimal literal for a nonnegative terminating rational."""
    if v < 0:
        raise ValueError("cannot format a negative literal")
    if v.denominator == 1:
        return str(v.numerator)
    den = v.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        raise ValueError(f"{v} has no terminating decimal literal")
    k = max(twos, fives)
    digits = str(v.numerator * 10**k // v.denominator).rjust(k + 1, "0")
    return digits[:-k] + "." + digits[-k:]


def _fmt(e: Expr) -> tuple[str, int]:
    if isinstance(e, Num):
        return format_number(e.value), _LEAF_PREC
    if isinstance(e, Var):
        return e.name, _LEAF_PREC
    if e.op == NEG:
        s, p = _fmt(e.args[0])
        if p < _PREC[NEG]:
            s = f"({s})"
        return "-" + s, _PREC[NEG]

    a, b = e.args
    p = _PREC[e.op]
    if e.op == "*" and isinstance(a, Num):
        # implicit multiplication: 3x, 2x^2, 2(x+1)
        lit = format_number(a.value)
        if isinstance(b, Var):
            return lit + b.name, p
        if isinstance(b, Op) and b.op == "^" and isinstance(b.args[0], Var):
            return lit + _fmt(b)[0], p
        bs, bp = _fmt(b)
        if bp < p:
            return f"{lit}({bs})", p
    ls, lp = _fmt(a)
    rs, rp = _fmt(b)
    if e.op == "^":
        if lp <= p:
            ls = f"({ls})"
        if rp < _PREC[NEG]:  # a bare negated exponent reparses fine
            rs = f"({rs})"
    else:
        if lp < p:
            ls = f"({ls})"
        if rp <= p:
            rs = f"({rs})"
    return ls + e.op + rs, p


def print_expr(e: Expr) -> str:
    """Canonical infix form; ``parse(print_expr(e)) == e`` structurally."""
    return _fmt(e)[0]


# ---------------------------------------------------------------- linearize


class TreeToken(NamedTuple):
    symbol: str
    path: tuple  # child indices from the root, 0 = left / only child


def linearize(e: Expr, max_depth: int = 16) -> list[TreeToken]:
    """Preorder DFS with the root-to-node path as positional encoding."""
    out: list[TreeToken] = []

    def walk(node: Expr, path: tuple):
        if len(path) >= max_depth:
            raise DepthExceeded(f"tree deeper than {max_depth} levels")
        if isinstance(node, Num):
            sym = format_number(node.value)
        elif isinstance(node, Var):
            sym = node.name
        else:
            sym = node.op
        out.append(TreeToken(sym, path))
        if isinstance(node, Op):
            for i, child in enumerate(node.args):
                walk(child, path + (i,))

    walk(e, ())
    return out


# ------------------------------------------------------------------- eval_at


def _ev(e: Expr, a: dict[str, Fraction]) -> Fraction:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return a[e.name]
        except KeyError:
            raise UnboundVariable(f"variable {e.name!r} has no value") from None
    if e.op == NEG:
        return -_ev(e.args[0], a)
    if e.op == "+":
        return _ev(e.args[0], a) + _ev(e.args[1], a)
    if e.op == "-":
        return _ev(e.args[0], a) - _ev(e.args[1], a)
    if e.op == "*":
        return _ev(e.args[0], a) * _ev(e.args[1], a)
    if e.op == "/":
        den = _ev(e.args[1], a)
        if den == 0:
            raise DivisionByZero("division by zero")
        return _ev(e.args[0], a) / den
    if e.op == "^":
        exp = _ev(e.args[1], a)
        if exp.denominator != 1:
            raise NonIntegerExponent(f"exponent {exp} is not an integer")
        base = _ev(e.args[0], a)
        if base == 0 and exp < 0:
            raise DivisionByZero("zero base with negative exponent")
        return base ** int(exp)
    raise EvalError("cannot evaluate an equation; evaluate its sides")


def eval_at(e: Expr, assignment: dict[str, Fraction]) -> Fraction:
    """Exact-rational evaluation of a bare expression at an assignment."""
    if is_equation(e):
        raise EvalError("cannot evaluate an equation; evaluate its sides")
    return _ev(e, assignment)


# --------------------------------------------------------------- equiv_check

_VALUE_NUMERATORS = [i for i in range(-9, 10) if i != 0]


def _random_value(rng: random.Random) -> Fraction:
    return Fraction(rng.choice(_VALUE_NUMERATORS), rng.randint(1, 9))


def equiv_check(
    e1: Expr,
    e2: Expr,
    trials: int = 8,
    seed: int = 0,
    max_rejections: int = 100,
) -> bool:
    """Randomized equivalence oracle.

    Bare expressions must agree in value at every sampled assignment;
    equations must agree on the satisfied/violated indicator. Assignments
    whose evaluation rejects (division by zero, non-integer exponent) are
    resampled; more than ``max_rejections`` of them raises OracleInconclusive.
    """
    eq = is_equation(e1)
    if eq != is_equation(e2):
        raise TypeMismatch("cannot compare an equation with a bare expression")
    names = sorted(collect_vars(e1) | collect_vars(e2))
    rng = random.Random(seed)
    rejections = 0
    done = 0
    while done < trials:
        a = {n: _random_value(rng) for n in names}
        try:
            if eq:
                l1, r1 = sides(e1)
                l2, r2 = sides(e2)
                agree = (_ev(l1, a) == _ev(r1, a)) == (_ev(l2, a) == _ev(r2, a))
            else:
                agree = _ev(e1, a) == _ev(e2, a)
        except (DivisionByZero, NonIntegerExponent):
            rejections += 1
            if rejections > max_rejections:
                raise OracleInconclusive(
                    f"{rejections} rejected assignments; cannot certify"
                ) from None
            continue
        if not agree:
            return False
        done += 1
    return True
