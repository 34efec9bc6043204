"""Synthetic equation-solving steps: seven operations, injected bugs, and a
numeric step-validity oracle.

Generation knobs (GenParams):

- ``entropy``: constants are drawn up to magnitude ``3*entropy``; one-decimal
  constants appear once ``entropy >= 3``; the probability that a variable
  monomial carries an explicit coefficient is ``1 - 0.5**entropy``, which is
  what makes mean tree size grow with entropy.
- ``degree``: maximum monomial degree; additive terms per side lie in
  ``[1, degree + 2]``.
- ``flip``: probability that the complicated side of the equation is the
  right-hand side.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from fractions import Fraction
from math import ceil

from .expr import (
    NEG,
    DivisionByZero,
    EvalError,
    Expr,
    Num,
    Op,
    OracleInconclusive,
    TypeMismatch,
    Var,
    collect_vars,
    equiv_check,
    eval_at,
    is_equation,
    sides,
    subtrees,
)


class MathOp(IntEnum):
    """The seven recognized operations, in canonical (tie-break) order."""

    COMBINE_ADD = 0
    COMBINE_MUL = 1
    ADD_SIDE = 2
    SUB_SIDE = 3
    MUL_SIDE = 4
    DIV_SIDE = 5
    DISTRIBUTE = 6


SIDE_OPS = frozenset({MathOp.ADD_SIDE, MathOp.SUB_SIDE, MathOp.MUL_SIDE, MathOp.DIV_SIDE})


class BugKind(IntEnum):
    SIGN_FLIP = 0
    WRONG_ARITH_COMBINE = 1
    ONE_SIDE_ONLY = 2
    DROPPED_TERM = 3
    WRONG_SIMPLIFY_FRACTION = 4
    WRONG_OP_SELECTED = 5


class Outcome(Enum):
    OK = "OK"
    BUG = "BUG"
    ERROR = "ERROR"


class NotApplicable(Exception):
    """The operation (or bug kind) has no site in the given expression."""


class InjectionFailed(Exception):
    """No corruption attempt produced an oracle-invalid step."""


@dataclass(frozen=True)
class GenParams:
    entropy: int = 1
    degree: int = 1
    flip: float = 0.0

    def __post_init__(self):
        if self.entropy < 1 or self.degree < 1:
            raise ValueError("entropy and degree start at 1")
        if not 0.0 <= self.flip <= 1.0:
            raise ValueError("flip is a probability")


@dataclass(frozen=True)
class Step:
    before: Expr
    after: Expr
    op: MathOp
    outcome: Outcome = Outcome.OK
    step_id: str = ""
    difficulty: str = ""
    feedback: str = ""


_BANDS = {
    (1, 1): "ES_01",
    (1, 2): "ES_02",
    (2, 1): "ES_03",
    (2, 2): "ES_04",
    (3, 1): "ES_05",
    (3, 2): "ES_07",  # the reference corpus has no ES_06 label
}


def difficulty_band(p: GenParams) -> str:
    return _BANDS[(min(p.entropy, 3), min(p.degree, 2))]


# ----------------------------------------------------------- term machinery


def _flatten_terms(e: Expr) -> list[tuple[int, Expr]]:
    """Split an additive spine into (sign, term) pairs."""
    out: list[tuple[int, Expr]] = []

    def walk(n: Expr, sign: int):
        if isinstance(n, Op) and n.op == "+":
            walk(n.args[0], sign)
            walk(n.args[1], sign)
        elif isinstance(n, Op) and n.op == "-":
            walk(n.args[0], sign)
            walk(n.args[1], -sign)
        elif isinstance(n, Op) and n.op == NEG:
            out.append((-sign, n.args[0]))
        else:
            out.append((sign, n))

    walk(e, 1)
    return out


def _rebuild_terms(terms: list[tuple[int, Expr]]) -> Expr:
    if not terms:
        return Num(0)
    sign, t = terms[0]
    e: Expr = Op(NEG, (t,)) if sign < 0 else t
    for sign, t in terms[1:]:
        e = Op("+" if sign > 0 else "-", (e, t))
    return e


def side_term_count(e: Expr) -> int:
    return len(_flatten_terms(e))


def _monomial_parts(e: Expr):
    """(coefficient, ((var, deg), ...)) for a monomial term, else None."""
    if isinstance(e, Num):
        return e.value, ()
    if isinstance(e, Var):
        return Fraction(1), ((e.name, 1),)
    if isinstance(e, Op):
        if e.op == NEG:
            p = _monomial_parts(e.args[0])
            return (-p[0], p[1]) if p else None
        if e.op == "^":
            base, exp = e.args
            if isinstance(base, Var) and isinstance(exp, Num) and exp.value.denominator == 1 and exp.value >= 1:
                return Fraction(1), ((base.name, int(exp.value)),)
            return None
        if e.op == "*":
            pa = _monomial_parts(e.args[0])
            pb = _monomial_parts(e.args[1])
            if pa is None or pb is None:
                return None
            powers: dict[str, int] = {}
            for v, d in pa[1] + pb[1]:
                powers[v] = powers.get(v, 0) + d
            return pa[0] * pb[0], tuple(sorted(powers.items()))
    return None


def _build_monomial(mag: Fraction, powers) -> Expr:
    factors = [Var(v) if d == 1 else Op("^", (Var(v), Num(d))) for v, d in powers]
    if not factors:
        return Num(mag)
    e: Expr = factors[0]
    for f in factors[1:]:
        e = Op("*", (e, f))
    if mag != 1:
        e = Op("*", (Num(mag), e))
    return e


def _replace_at(e: Expr, path: tuple, new: Expr) -> Expr:
    if not path:
        return new
    args = list(e.args)
    args[path[0]] = _replace_at(args[path[0]], path[1:], new)
    return Op(e.op, tuple(args))


def _find_paths(e: Expr, pred) -> list[tuple]:
    out = []

    def walk(n: Expr, path: tuple):
        if pred(n):
            out.append(path)
        if isinstance(n, Op):
            for i, a in enumerate(n.args):
                walk(a, path + (i,))

    walk(e, ())
    return out


def _pow_parts(e: Expr):
    if isinstance(e, Num):
        return ("const", e.value)
    if isinstance(e, Var):
        return ("var", e.name, 1)
    if isinstance(e, Op) and e.op == "^":
        base, exp = e.args
        if isinstance(base, Var) and isinstance(exp, Num) and exp.value.denominator == 1 and exp.value >= 1:
            return ("var", base.name, int(exp.value))
    return None


def _mul_merge(node: Expr):
    """Result of combining a product of like factors, or None."""
    if not (isinstance(node, Op) and node.op == "*"):
        return None
    pa, pb = _pow_parts(node.args[0]), _pow_parts(node.args[1])
    if pa is None or pb is None:
        return None
    if pa[0] == "const" and pb[0] == "const":
        return Num(pa[1] * pb[1])
    if pa[0] == "var" and pb[0] == "var" and pa[1] == pb[1]:
        return Op("^", (Var(pa[1]), Num(pa[2] + pb[2])))
    return None


def _smul(a: Expr, b: Expr) -> Expr:
    """Product with the trivial simplifications students apply on sight."""
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    if a == Num(1):
        return b
    if b == Num(1):
        return a
    return Op("*", (a, b))


def _distribute(node: Expr):
    if not (isinstance(node, Op) and node.op == "*"):
        return None
    a, b = node.args
    if isinstance(b, Op) and b.op in ("+", "-"):
        return Op(b.op, (_smul(a, b.args[0]), _smul(a, b.args[1])))
    if isinstance(a, Op) and a.op in ("+", "-"):
        return Op(a.op, (_smul(a.args[0], b), _smul(a.args[1], b)))
    return None


# ----------------------------------------------------------- apply_operation


def _combine_add_sites(parts_of_side):
    sites = []
    for side_idx, terms in parts_of_side:
        keys = []
        for sign, t in terms:
            p = _monomial_parts(t)
            keys.append(p[1] if p else None)
        for i in range(len(terms)):
            if keys[i] is None:
                continue
            for j in range(i + 1, len(terms)):
                if keys[j] == keys[i]:
                    sites.append((side_idx, i, j))
    return sites


def _combine_add(e: Expr, rng: random.Random, site=None) -> Expr:
    if is_equation(e):
        split = [(0, _flatten_terms(e.args[0])), (1, _flatten_terms(e.args[1]))]
    else:
        split = [(None, _flatten_terms(e))]
    sites = _combine_add_sites(split)
    if not sites:
        raise NotApplicable("no pair of like additive terms")
    side_idx, i, j = sites[site] if site is not None else rng.choice(sites)
    terms = dict(split)[side_idx]
    ci = terms[i][0] * _monomial_parts(terms[i][1])[0]
    cj = terms[j][0] * _monomial_parts(terms[j][1])[0]
    powers = _monomial_parts(terms[i][1])[1]
    c = ci + cj
    merged = list(terms)
    del merged[j]
    if c == 0:
        del merged[i]
    else:
        merged[i] = (1 if c > 0 else -1, _build_monomial(abs(c), powers))
    new_side = _rebuild_terms(merged)
    if side_idx is None:
        return new_side
    return Op("=", (new_side, e.args[1]) if side_idx == 0 else (e.args[0], new_side))


def _rewrite_at_site(e: Expr, rng, site, transform, what: str) -> Expr:
    paths = _find_paths(e, lambda n: transform(n) is not None)
    if not paths:
        raise NotApplicable(what)
    path = paths[site] if site is not None else rng.choice(paths)
    node = e
    for i in path:
        node = node.args[i]
    return _replace_at(e, path, transform(node))


def _apply_side(e: Expr, op: MathOp, t: Expr) -> Expr:
    l, r = sides(e)
    if op is MathOp.ADD_SIDE:
        f = lambda s: Op("+", (s, t))
    elif op is MathOp.SUB_SIDE:
        f = lambda s: Op("-", (s, t))
    elif op is MathOp.MUL_SIDE:
        # students fold 1*2 -> 2 on sight; keep x*2 as written
        f = lambda s: Num(s.value * t.value) if isinstance(s, Num) and isinstance(t, Num) else Op("*", (s, t))
    else:
        f = lambda s: Op("/", (s, t))
    return Op("=", (f(l), f(r)))


def _draw_side_term(e: Expr, op: MathOp, p: GenParams, rng: random.Random) -> Expr:
    cap = 3 * p.entropy
    names = sorted(collect_vars(e)) or ["x"]
    if op in (MathOp.ADD_SIDE, MathOp.SUB_SIDE):
        if rng.random() < 0.35:
            v = Var(rng.choice(names))
            if cap >= 2 and rng.random() < 0.4:
                return Op("*", (Num(rng.randint(2, cap)), v))
            return v
        return Num(rng.randint(1, cap))
    var_prob = 0.2 if op is MathOp.MUL_SIDE else 0.1
    if rng.random() < var_prob:
        return Var(rng.choice(names))
    return Num(rng.randint(2, max(2, cap)))


def apply_operation(
    e: Expr,
    op: MathOp,
    rng: random.Random | None = None,
    *,
    term: Expr | None = None,
    site: int | None = None,
    params: GenParams | None = None,
) -> Step:
    """Apply ``op`` to ``e`` and return the OK step; NotApplicable if no site.

    ``term`` pins the drawn side term, ``site`` picks among rewrite sites in
    enumeration order; both default to seeded random choices.
    """
    rng = rng if rng is not None else random.Random(0)
    p = params or GenParams(entropy=2, degree=2)
    if op in SIDE_OPS:
        if not is_equation(e):
            raise NotApplicable("side operations need an equation")
        t = term if term is not None else _draw_side_term(e, op, p, rng)
        after = _apply_side(e, op, t)
    elif op is MathOp.COMBINE_ADD:
        after = _combine_add(e, rng, site)
    elif op is MathOp.COMBINE_MUL:
        after = _rewrite_at_site(e, rng, site, _mul_merge, "no product of like factors")
    else:
        after = _rewrite_at_site(e, rng, site, _distribute, "no product over a sum")
    return Step(before=e, after=after, op=op)


# ----------------------------------------------------------- validity oracle

_IDENT = {MathOp.ADD_SIDE: 0, MathOp.SUB_SIDE: 0, MathOp.MUL_SIDE: 1, MathOp.DIV_SIDE: 1}
_VALUE_NUMERATORS = [i for i in range(-9, 10) if i != 0]


def _oracle_value(rng: random.Random) -> Fraction:
    return Fraction(rng.choice(_VALUE_NUMERATORS), rng.randint(1, 9))


def step_validity_oracle(s: Step, trials: int = 8, seed: int = 0, max_rejections: int = 100) -> bool:
    """True iff the after-expression is consistent with applying s.op to s.before."""
    before, after, op = s.before, s.after, s.op
    if op not in SIDE_OPS:
        if is_equation(before) != is_equation(after):
            return False
        try:
            if is_equation(before):
                changed = [i for i in (0, 1) if before.args[i] != after.args[i]]
                if len(changed) != 1:
                    return False
                i = changed[0]
                return equiv_check(before.args[i], after.args[i], trials, seed)
            if before == after:
                return False
            return equiv_check(before, after, trials, seed)
        except TypeMismatch:
            return False

    if not (is_equation(before) and is_equation(after)):
        return False
    bl, br = sides(before)
    al, ar = sides(after)
    names = sorted(collect_vars(before) | collect_vars(after))
    rng = random.Random(seed)
    rejections = 0
    done = 0
    saw_effect = False
    while done < trials:
        a = {n: _oracle_value(rng) for n in names}
        try:
            vbl, vbr = eval_at(bl, a), eval_at(br, a)
            val, var_ = eval_at(al, a), eval_at(ar, a)
            if op in (MathOp.ADD_SIDE, MathOp.SUB_SIDE):
                dl, dr = val - vbl, var_ - vbr
                if dl != dr:
                    return False
                t = dl
            elif op is MathOp.MUL_SIDE:
                if vbl != 0:
                    t = val / vbl
                    if var_ != vbr * t:
                        return False
                elif vbr != 0:
                    t = var_ / vbr
                    if val != vbl * t:
                        return False
                else:
                    raise DivisionByZero("both before-sides are zero here")
            else:  # DIV_SIDE: after = before / t
                if val != 0:
                    t = vbl / val
                    if var_ * t != vbr:
                        return False
                elif var_ != 0:
                    t = vbr / var_
                    if val * t != vbl:
                        return False
                else:
                    raise DivisionByZero("both after-sides are zero here")
        except EvalError:
            rejections += 1
            if rejections > max_rejections:
                raise OracleInconclusive(f"{rejections} rejected assignments") from None
            continue
        saw_effect = saw_effect or (t != _IDENT[op])
        done += 1
    return saw_effect


# ----------------------------------------------------------- initial equations

_LETTERS = "abcdgkmnpqstuvwyz"


def _draw_vars(p: GenParams, rng: random.Random) -> list[str]:
    first = "x" if rng.random() < 0.6 else rng.choice(_LETTERS)
    names = [first]
    if p.degree >= 2 and rng.random() < 0.4:
        names.append(rng.choice([c for c in _LETTERS if c not in names]))
    if p.entropy >= 3 and rng.random() < 0.4:
        names.append(rng.choice([c for c in _LETTERS if c not in names]))
    return names


def _const_value(p: GenParams, rng: random.Random) -> Fraction:
    cap = 3 * p.entropy
    if p.entropy >= 3 and rng.random() < 0.3:
        return Fraction(rng.randint(1, cap * 10), 10)
    return Fraction(rng.randint(1, cap))


def _coeff_value(p: GenParams, rng: random.Random) -> int:
    return rng.randint(2, max(2, 3 * p.entropy))


def _gen_term(p: GenParams, rng: random.Random, names: list[str], simple: bool = False) -> tuple[int, Expr]:
    sign = -1 if rng.random() < 0.25 else 1
    if rng.random() < (0.55 if simple else 0.35):
        return sign, Num(_const_value(p, rng))
    v = rng.choice(names)
    if not simple and p.degree >= 2 and len(names) >= 2 and rng.random() < 0.15:
        w = rng.choice([n for n in names if n != v])
        base: Expr = Op("*", (Var(v), Var(w)))
    else:
        d = 1 if simple else rng.randint(1, p.degree)
        base = Var(v) if d == 1 else Op("^", (Var(v), Num(d)))
    if rng.random() < 1 - 0.5**p.entropy:
        return sign, Op("*", (Num(_coeff_value(p, rng)), base))
    return sign, base


def _mergeable_product(p: GenParams, rng: random.Random, names: list[str]) -> Expr:
    if p.degree >= 2 and rng.random() < 0.7:
        v = rng.choice(names)
        d2 = rng.randint(1, max(1, p.degree - 1))
        right: Expr = Var(v) if d2 == 1 else Op("^", (Var(v), Num(d2)))
        return Op("*", (Var(v), right))
    c1 = rng.randint(2, 3 * p.entropy) if p.entropy >= 1 else 2
    c2 = rng.randint(2, max(2, 3 * p.entropy))
    return Op("*", (Num(max(2, c1)), Num(c2)))


def _product_over_sum(p: GenParams, rng: random.Random, names: list[str]) -> Expr:
    v = rng.choice(names)
    inner_op = "-" if rng.random() < 0.4 else "+"
    m1: Expr = Var(v)
    m2: Expr = Num(_const_value(p, rng)) if rng.random() < 0.6 else Var(rng.choice(names))
    inner = Op(inner_op, (m1, m2))
    f: Expr = Var(rng.choice(names)) if rng.random() < 0.5 else Num(Fraction(rng.randint(2, max(2, 3 * p.entropy))))
    if rng.random() < 0.5:
        return Op("*", (f, inner))
    return Op("*", (inner, f))


def gen_initial_equation(p: GenParams, rng: random.Random, ensure_site: MathOp | None = None) -> Expr:
    names = _draw_vars(p, rng)
    n_complex = rng.randint(max(1, min(2, p.degree)), p.degree + 2)
    n_simple = rng.randint(1, 2)
    complex_terms = [_gen_term(p, rng, names) for _ in range(n_complex)]
    simple_terms = [_gen_term(p, rng, names, simple=True) for _ in range(n_simple)]

    if ensure_site is MathOp.COMBINE_ADD:
        while len(complex_terms) < 2:
            complex_terms.append(_gen_term(p, rng, names))
        i, j = rng.sample(range(len(complex_terms)), 2)
        if rng.random() < 0.3:
            powers: tuple = ()
        else:
            d = rng.randint(1, p.degree)
            powers = ((rng.choice(names), d),)
        for k in (i, j):
            sign = -1 if rng.random() < 0.25 else 1
            mag = _const_value(p, rng)
            complex_terms[k] = (sign, _build_monomial(mag, powers))
    elif ensure_site is MathOp.COMBINE_MUL:
        idx = rng.randrange(len(complex_terms))
        complex_terms[idx] = (1, _mergeable_product(p, rng, names))
    elif ensure_site is MathOp.DISTRIBUTE:
        idx = rng.randrange(len(complex_terms))
        complex_terms[idx] = (1, _product_over_sum(p, rng, names))

    if not any(collect_vars(t) for _, t in complex_terms + simple_terms):
        idx = rng.randrange(len(complex_terms))
        complex_terms[idx] = (1, Var(rng.choice(names)))

    if rng.random() < p.flip:
        lhs_terms, rhs_terms = simple_terms, complex_terms
    else:
        lhs_terms, rhs_terms = complex_terms, simple_terms
    return Op("=", (_rebuild_terms(lhs_terms), _rebuild_terms(rhs_terms)))


# ----------------------------------------------------------- bug injection

BUG_COMPAT = {
    BugKind.SIGN_FLIP: tuple(MathOp),
    BugKind.WRONG_ARITH_COMBINE: tuple(MathOp),
    BugKind.ONE_SIDE_ONLY: tuple(sorted(SIDE_OPS)),
    BugKind.DROPPED_TERM: tuple(MathOp),
    BugKind.WRONG_SIMPLIFY_FRACTION: (MathOp.DIV_SIDE,),
    BugKind.WRONG_OP_SELECTED: tuple(MathOp),
}

_PARTNER = {
    MathOp.ADD_SIDE: MathOp.MUL_SIDE,
    MathOp.SUB_SIDE: MathOp.DIV_SIDE,
    MathOp.MUL_SIDE: MathOp.ADD_SIDE,
    MathOp.DIV_SIDE: MathOp.SUB_SIDE,
}


def _split_sides(e: Expr) -> list[tuple[int | None, Expr]]:
    if is_equation(e):
        return [(0, e.args[0]), (1, e.args[1])]
    return [(None, e)]


def _with_side(e: Expr, side_idx, new_side: Expr) -> Expr:
    if side_idx is None:
        return new_side
    return Op("=", (new_side, e.args[1]) if side_idx == 0 else (e.args[0], new_side))


def _changed_side_indices(before: Expr, after: Expr) -> list[int | None]:
    if is_equation(before) and is_equation(after):
        out = [i for i in (0, 1) if before.args[i] != after.args[i]]
        return out or [0, 1]
    return [None]


def _corrupt(base: Step, kind: BugKind, rng: random.Random, side: int | None) -> Expr | None:
    after = base.after
    if kind is BugKind.SIGN_FLIP:
        cands = [
            (si, ti)
            for si, s in _split_sides(after)
            for ti in range(side_term_count(s))
        ]
        si, ti = rng.choice(cands)
        terms = _flatten_terms(dict(_split_sides(after))[si])
        terms[ti] = (-terms[ti][0], terms[ti][1])
        return _with_side(after, si, _rebuild_terms(terms))

    if kind is BugKind.WRONG_ARITH_COMBINE:
        changed = set(_changed_side_indices(base.before, after))
        region = [(si, s) for si, s in _split_sides(after) if si in changed]
        cands = [
            (si, path)
            for si, s in region
            for path in _find_paths(s, lambda n: isinstance(n, Num))
        ]
        if cands:
            si, path = rng.choice(cands)
            s = dict(_split_sides(after))[si]
            node = s
            for i in path:
                node = node.args[i]
            return _with_side(after, si, _replace_at(s, path, Num(node.value + 1)))
        cands = [
            (si, path)
            for si, s in region
            for path in _find_paths(s, lambda n: isinstance(n, Var))
        ]
        if not cands:
            return None
        si, path = rng.choice(cands)
        s = dict(_split_sides(after))[si]
        node = s
        for i in path:
            node = node.args[i]
        return _with_side(after, si, _replace_at(s, path, Op("*", (Num(2), node))))

    if kind is BugKind.ONE_SIDE_ONLY:
        pick = side if side is not None else rng.randrange(2)
        l, r = sides(base.before)
        al, ar = sides(after)
        return Op("=", (al, r) if pick == 0 else (l, ar))

    if kind is BugKind.DROPPED_TERM:
        cands = [(si, s) for si, s in _split_sides(after) if side_term_count(s) >= 2]
        if not cands:
            return None
        si, s = rng.choice(cands)
        terms = _flatten_terms(s)
        del terms[rng.randrange(len(terms))]
        return _with_side(after, si, _rebuild_terms(terms))

    if kind is BugKind.WRONG_SIMPLIFY_FRACTION:
        paths = _find_paths(
            after,
            lambda n: isinstance(n, Op) and n.op == "/"
            and isinstance(n.args[0], Num) and isinstance(n.args[1], Num),
        )
        if not paths:
            return None
        path = rng.choice(paths)
        node = after
        for i in path:
            node = node.args[i]
        v = node.args[0].value / node.args[1].value
        wrong = Fraction(v.numerator * 10 // v.denominator, 10)
        if wrong == v:
            wrong = v + Fraction(1, 10)
        return _replace_at(after, path, Num(wrong))

    # WRONG_OP_SELECTED: actually perform a different-family operation
    actual = _PARTNER.get(base.op, MathOp.ADD_SIDE)
    t = _draw_side_term(base.before, actual, GenParams(entropy=2, degree=1), rng)
    return _apply_side(base.before, actual, t)


def gen_buggy_step(
    e: Expr,
    op: MathOp,
    kind: BugKind,
    rng: random.Random,
    *,
    term: Expr | None = None,
    side: int | None = None,
    params: GenParams | None = None,
) -> Step:
    """A corrupted step for (op, kind), certified invalid by the oracle."""
    if op not in BUG_COMPAT[kind]:
        raise NotApplicable(f"{kind.name} is not defined for {op.name}")
    if kind in (BugKind.ONE_SIDE_ONLY, BugKind.WRONG_OP_SELECTED) and not is_equation(e):
        raise NotApplicable(f"{kind.name} needs an equation")
    base = apply_operation(e, op, rng, term=term, params=params)
    for _ in range(20):
        corrupted = _corrupt(base, kind, rng, side)
        if corrupted is None:
            raise InjectionFailed(f"{kind.name} has no corruption site in {op.name} step")
        if corrupted == base.after:
            continue
        s = Step(before=e, after=corrupted, op=op, outcome=Outcome.BUG, feedback=kind.name)
        try:
            still_valid = step_validity_oracle(s, seed=rng.getrandbits(32))
        except OracleInconclusive:
            continue
        if not still_valid:
            return s
    raise InjectionFailed(f"could not make an invalid {kind.name} step for {op.name}")


# ----------------------------------------------------------- datasets


def gen_dataset(n_per_op: int, p: GenParams, bug_fraction: float, rng: random.Random,
                id_prefix: str = "s") -> list[Step]:
    """n_per_op OK steps per operation plus ceil(bug_fraction*total) bug steps.

    Deterministic for a fixed (params, seed); IDs are sequential in output order.
    Separately generated corpora should use distinct id prefixes so their id
    sets stay disjoint (leakage checks key on step ids).
    """
    band = difficulty_band(p)
    steps: list[Step] = []

    def add(s: Step):
        steps.append(replace(s, step_id=f"{id_prefix}{len(steps) + 1:06d}", difficulty=band))

    for op in MathOp:
        count = 0
        attempts = 0
        while count < n_per_op:
            attempts += 1
            if attempts > 200 * n_per_op + 200:
                raise RuntimeError(f"cannot generate {op.name} steps under {p}")
            e = gen_initial_equation(p, rng, ensure_site=op)
            try:
                s = apply_operation(e, op, rng, params=p)
                if not step_validity_oracle(s, seed=rng.getrandbits(32)):
                    continue
            except (NotApplicable, OracleInconclusive):
                continue
            add(s)
            count += 1

    n_bugs = ceil(bug_fraction * len(steps))
    kinds = list(BugKind)
    made = 0
    attempts = 0
    while made < n_bugs:
        attempts += 1
        if attempts > 200 * n_bugs + 200:
            raise RuntimeError(f"cannot generate bug steps under {p}")
        kind = kinds[made % len(kinds)]
        op = rng.choice(BUG_COMPAT[kind])
        e = gen_initial_equation(p, rng, ensure_site=op)
        try:
            add(gen_buggy_step(e, op, kind, rng, params=p))
        except (NotApplicable, InjectionFailed, OracleInconclusive):
            continue
        made += 1
    return steps
