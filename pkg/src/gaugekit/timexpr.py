"""Closed-form scalar functions of time: parsing, printing, evaluation, exact differentiation.

The expression language is deliberately small.  Grammar (whitespace insignificant)::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := base ("^" INTEGER)?
    base   := NUMBER | "t" | "(" expr ")" | FUNC "(" expr ")" | "-" base
    FUNC   := "exp" | "sin" | "cos"

Expressions are immutable trees; all functions here are pure.  Equality of two
expressions is structural (dataclass equality); semantic equality is checked by
sampled evaluation elsewhere, never by canonicalization.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

__all__ = [
    "TimeExpr", "Lit", "TVar", "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Fun",
    "T", "ParseError", "EvalError", "parse_expr", "format_expr", "eval_expr",
    "compile_expr", "diff_expr", "lit", "eadd", "esub", "emul", "ediv", "eneg",
    "epow", "efun",
]


@dataclass(frozen=True)
class Lit:
    value: float


@dataclass(frozen=True)
class TVar:
    pass


@dataclass(frozen=True)
class Neg:
    arg: "TimeExpr"


@dataclass(frozen=True)
class Add:
    left: "TimeExpr"
    right: "TimeExpr"


@dataclass(frozen=True)
class Sub:
    left: "TimeExpr"
    right: "TimeExpr"


@dataclass(frozen=True)
class Mul:
    left: "TimeExpr"
    right: "TimeExpr"


@dataclass(frozen=True)
class Div:
    left: "TimeExpr"
    right: "TimeExpr"


@dataclass(frozen=True)
class Pow:
    base: "TimeExpr"
    exponent: int


@dataclass(frozen=True)
class Fun:
    name: str  # "exp" | "sin" | "cos"
    arg: "TimeExpr"


TimeExpr = Union[Lit, TVar, Neg, Add, Sub, Mul, Div, Pow, Fun]

#: The time variable, shared singleton.
T = TVar()

_FUNCTIONS = {"exp": math.exp, "sin": math.sin, "cos": math.cos}

_DENOM_FLOOR = 1e-14


class ParseError(ValueError):
    """Syntax error with byte offset and the set of tokens that were expected."""

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = expected
        detail = f"{message} at offset {offset}"
        if expected:
            detail += " (expected " + " or ".join(expected) + ")"
        super().__init__(detail)


class EvalError(ArithmeticError):
    """Evaluation failure; carries the offending subexpression."""

    def __init__(self, message: str, subexpr: TimeExpr, t: float):
        self.subexpr = subexpr
        self.t = t
        super().__init__(f"{message} at t={t!r}: {format_expr(subexpr)}")


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_NUMBER_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_INT_RE = re.compile(r"\d+\Z")


class _Tokens:
    """Single-pass token stream over the source with byte offsets."""

    def __init__(self, source: str):
        self.source = source
        self.pos = 0
        self._skip_ws()

    def _skip_ws(self):
        while self.pos < len(self.source) and self.source[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str | None:
        """Return the next token text without consuming it, or None at EOF."""
        if self.pos >= len(self.source):
            return None
        ch = self.source[self.pos]
        if ch in "+-*/^()":
            return ch
        m = _NUMBER_RE.match(self.source, self.pos)
        if m:
            return m.group(0)
        m = _IDENT_RE.match(self.source, self.pos)
        if m:
            return m.group(0)
        raise ParseError(f"unexpected character {ch!r}", self.pos)

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", self.pos)
        self.pos += len(tok)
        self._skip_ws()
        return tok

    def expect(self, token: str):
        got = self.peek()
        if got != token:
            raise ParseError(
                f"unexpected {'end of input' if got is None else repr(got)}",
                self.pos, expected=(repr(token),))
        self.take()


def parse_expr(source: str) -> TimeExpr:
    """Parse `source` into an expression tree.

    Literal-only subtrees are folded to a single literal at construction;
    no other rewriting happens, so the result is the unique AST of the
    source under standard precedence.
    """
    stream = _Tokens(source)
    if stream.peek() is None:
        raise ParseError("empty input", 0)
    tree = _parse_sum(stream)
    if stream.peek() is not None:
        raise ParseError(f"trailing input {stream.peek()!r}", stream.pos,
                         expected=("'+'", "'-'", "'*'", "'/'", "'^'", "end of input"))
    return tree


def _parse_sum(s: _Tokens) -> TimeExpr:
    node = _parse_term(s)
    while s.peek() in ("+", "-"):
        op = s.take()
        rhs = _parse_term(s)
        node = _fold_binary(Add if op == "+" else Sub, node, rhs, s)
    return node


def _parse_term(s: _Tokens) -> TimeExpr:
    node = _parse_factor(s)
    while s.peek() in ("*", "/"):
        op = s.take()
        rhs = _parse_factor(s)
        node = _fold_binary(Mul if op == "*" else Div, node, rhs, s)
    return node


def _parse_factor(s: _Tokens) -> TimeExpr:
    node = _parse_base(s)
    if s.peek() == "^":
        s.take()
        at = s.pos
        tok = s.peek()
        if tok is None or not _INT_RE.match(tok):
            raise ParseError(
                f"unexpected {'end of input' if tok is None else repr(tok)}",
                at, expected=("nonnegative integer exponent",))
        s.take()
        node = _fold_pow(node, int(tok), s)
    return node


def _parse_base(s: _Tokens) -> TimeExpr:
    at = s.pos
    tok = s.peek()
    if tok is None:
        raise ParseError("unexpected end of input", at,
                         expected=("number", "'t'", "'('", "function", "'-'"))
    if tok == "-":
        s.take()
        inner = _parse_base(s)
        return Lit(-inner.value) if isinstance(inner, Lit) else Neg(inner)
    if tok == "(":
        s.take()
        node = _parse_sum(s)
        s.expect(")")
        return node
    if _NUMBER_RE.fullmatch(tok):
        s.take()
        value = float(tok)
        if not math.isfinite(value):
            raise ParseError("numeric constant out of range", at)
        return Lit(value)
    if tok == "t":
        s.take()
        return T
    if _IDENT_RE.fullmatch(tok):
        if tok not in _FUNCTIONS:
            raise ParseError(f"unknown function {tok!r}", at,
                             expected=("'exp'", "'sin'", "'cos'", "'t'"))
        s.take()
        s.expect("(")
        arg = _parse_sum(s)
        s.expect(")")
        if isinstance(arg, Lit):
            return Lit(_fold_value(lambda: _FUNCTIONS[tok](arg.value), s.pos))
        return Fun(tok, arg)
    raise ParseError(f"unexpected {tok!r}", at,
                     expected=("number", "'t'", "'('", "function", "'-'"))


def _fold_value(compute, offset: int) -> float:
    try:
        value = compute()
    except OverflowError:
        raise ParseError("constant folding overflows", offset) from None
    if not math.isfinite(value):
        raise ParseError("constant folding overflows", offset)
    return value


def _fold_binary(cls, a: TimeExpr, b: TimeExpr, s: _Tokens) -> TimeExpr:
    if cls is Div and isinstance(b, Lit) and b.value == 0.0:
        raise ParseError("division by constant zero", s.pos)
    if isinstance(a, Lit) and isinstance(b, Lit):
        ops = {Add: lambda x, y: x + y, Sub: lambda x, y: x - y,
               Mul: lambda x, y: x * y, Div: lambda x, y: x / y}
        return Lit(_fold_value(lambda: ops[cls](a.value, b.value), s.pos))
    return cls(a, b)


def _fold_pow(base: TimeExpr, k: int, s: _Tokens) -> TimeExpr:
    if isinstance(base, Lit):
        return Lit(_fold_value(lambda: base.value ** k, s.pos))
    return Pow(base, k)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def _fmt_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def format_expr(e: TimeExpr) -> str:
    """Render `e` so that parse_expr(format_expr(e)) is structurally equal to e."""
    return _fmt(e, 0)


def _fmt(e: TimeExpr, level: int) -> str:
    # level: 0 expr, 1 term, 2 factor, 3 base-with-power, 4 atom
    if isinstance(e, Lit):
        if e.value < 0 or (e.value == 0 and math.copysign(1.0, e.value) < 0):
            return _wrap("-" + _fmt_number(-e.value), 4, level)
        return _fmt_number(e.value)
    if isinstance(e, TVar):
        return "t"
    if isinstance(e, Fun):
        return f"{e.name}({_fmt(e.arg, 0)})"
    if isinstance(e, Neg):
        return _wrap("-" + _fmt(e.arg, 4), 4, level)
    if isinstance(e, Pow):
        return _wrap(f"{_fmt(e.base, 4)}^{e.exponent}", 3, level)
    if isinstance(e, (Mul, Div)):
        op = "*" if isinstance(e, Mul) else "/"
        return _wrap(f"{_fmt(e.left, 1)}{op}{_fmt(e.right, 2)}", 1, level)
    if isinstance(e, (Add, Sub)):
        op = "+" if isinstance(e, Add) else "-"
        return _wrap(f"{_fmt(e.left, 0)}{op}{_fmt(e.right, 1)}", 0, level)
    raise TypeError(f"not a TimeExpr node: {e!r}")


def _wrap(text: str, prec: int, level: int) -> str:
    # prec: the loosest context where `text` reparses as intended.
    # A leading "-" (prec 4 here) is a grammar `base`, legal anywhere except
    # as the bare right operand of ^ (never produced: exponents are ints).
    if prec == 4:
        return text
    return f"({text})" if prec < level else text


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def eval_expr(e: TimeExpr, t: float) -> float:
    """Evaluate `e` at time `t`.

    Raises EvalError when a quotient denominator falls below 1e-14 in
    magnitude, naming the offending subexpression.
    """
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, TVar):
        return t
    if isinstance(e, Neg):
        return -eval_expr(e.arg, t)
    if isinstance(e, Add):
        return eval_expr(e.left, t) + eval_expr(e.right, t)
    if isinstance(e, Sub):
        return eval_expr(e.left, t) - eval_expr(e.right, t)
    if isinstance(e, Mul):
        return eval_expr(e.left, t) * eval_expr(e.right, t)
    if isinstance(e, Div):
        den = eval_expr(e.right, t)
        if abs(den) <= _DENOM_FLOOR:
            raise EvalError("near-zero denominator", e.right, t)
        return eval_expr(e.left, t) / den
    if isinstance(e, Pow):
        return eval_expr(e.base, t) ** e.exponent
    if isinstance(e, Fun):
        return _FUNCTIONS[e.name](eval_expr(e.arg, t))
    raise TypeError(f"not a TimeExpr node: {e!r}")


# ---------------------------------------------------------------------------
# Compiled evaluation (hot paths: grid tables, ODE right-hand sides)
# ---------------------------------------------------------------------------

def compile_expr(e: TimeExpr):
    """Compile `e` into a plain Python callable t -> float.

    Value-equivalent to eval_expr, including the near-zero-denominator guard
    (each quotient keeps a reference to its denominator subexpression for
    error reporting).
    """
    ctx = {"exp": math.exp, "sin": math.sin, "cos": math.cos}

    def gen(node: TimeExpr) -> str:
        if isinstance(node, Lit):
            return repr(node.value)
        if isinstance(node, TVar):
            return "t"
        if isinstance(node, Neg):
            return f"(-{gen(node.arg)})"
        if isinstance(node, Add):
            return f"({gen(node.left)}+{gen(node.right)})"
        if isinstance(node, Sub):
            return f"({gen(node.left)}-{gen(node.right)})"
        if isinstance(node, Mul):
            return f"({gen(node.left)}*{gen(node.right)})"
        if isinstance(node, Div):
            name = f"_dv{len(ctx)}"
            ctx[name] = _division_guard(node.right)
            return f"{name}({gen(node.left)},{gen(node.right)},t)"
        if isinstance(node, Pow):
            return f"({gen(node.base)}**{node.exponent})"
        if isinstance(node, Fun):
            return f"{node.name}({gen(node.arg)})"
        raise TypeError(f"not a TimeExpr node: {node!r}")

    src = gen(e)
    return eval(f"lambda t: {src}", ctx)  # noqa: S307 - generated from our own AST


def _division_guard(den_expr: TimeExpr):
    def div(num: float, den: float, t: float):
        if abs(den) <= _DENOM_FLOOR:
            raise EvalError("near-zero denominator", den_expr, t)
        return num / den
    return div


# ---------------------------------------------------------------------------
# Construction helpers
# ---------------------------------------------------------------------------
# Used by diff_expr and by the symbolic matrix algebra in other modules.
# They fold literal-only nodes, drop 0/1 identities and pull negations out of
# products, and merge exp*exp factors; they never reorder non-literal terms.

def lit(v: float) -> Lit:
    if not math.isfinite(v):
        raise ValueError(f"non-finite literal {v!r}")
    return Lit(float(v))


def eneg(a: TimeExpr) -> TimeExpr:
    if isinstance(a, Lit):
        return Lit(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def eadd(a: TimeExpr, b: TimeExpr) -> TimeExpr:
    if isinstance(a, Lit) and isinstance(b, Lit):
        return Lit(a.value + b.value)
    if isinstance(a, Lit) and a.value == 0.0:
        return b
    if isinstance(b, Lit) and b.value == 0.0:
        return a
    if isinstance(b, Neg):
        return esub(a, b.arg)
    if isinstance(b, Lit) and b.value < 0:
        return Sub(a, Lit(-b.value))
    return Add(a, b)


def esub(a: TimeExpr, b: TimeExpr) -> TimeExpr:
    if isinstance(a, Lit) and isinstance(b, Lit):
        return Lit(a.value - b.value)
    if isinstance(b, Lit) and b.value == 0.0:
        return a
    if isinstance(a, Lit) and a.value == 0.0:
        return eneg(b)
    if isinstance(b, Neg):
        return eadd(a, b.arg)
    return Sub(a, b)


def _linear_in_t(e: TimeExpr) -> float | None:
    """Coefficient c when e is c*t up to trivial shapes, else None."""
    if isinstance(e, TVar):
        return 1.0
    if isinstance(e, Neg):
        c = _linear_in_t(e.arg)
        return None if c is None else -c
    if isinstance(e, Mul):
        if isinstance(e.left, Lit) and isinstance(e.right, TVar):
            return e.left.value
        if isinstance(e.right, Lit) and isinstance(e.left, TVar):
            return e.right.value
    if isinstance(e, Lit) and e.value == 0.0:
        return 0.0
    return None


def _merge_exp(a: Fun, b: Fun) -> TimeExpr:
    ca, cb = _linear_in_t(a.arg), _linear_in_t(b.arg)
    if ca is not None and cb is not None:
        return efun("exp", emul(Lit(ca + cb), T))
    return efun("exp", eadd(a.arg, b.arg))


def emul(a: TimeExpr, b: TimeExpr) -> TimeExpr:
    if isinstance(a, Lit) and isinstance(b, Lit):
        return Lit(a.value * b.value)
    if isinstance(a, Lit):
        if a.value == 0.0:
            return Lit(0.0)
        if a.value == 1.0:
            return b
        if a.value == -1.0:
            return eneg(b)
        if isinstance(b, Mul) and isinstance(b.left, Lit):
            return emul(Lit(a.value * b.left.value), b.right)
        if isinstance(b, Neg):
            return emul(Lit(-a.value), b.arg)
        return Mul(a, b)
    if isinstance(b, Lit):
        return emul(b, a)
    if isinstance(a, Neg):
        return eneg(emul(a.arg, b))
    if isinstance(b, Neg):
        return eneg(emul(a, b.arg))
    if isinstance(a, Fun) and a.name == "exp" and isinstance(b, Fun) and b.name == "exp":
        return _merge_exp(a, b)
    if isinstance(a, Mul) and isinstance(a.left, Lit):
        return emul(a.left, emul(a.right, b))
    if isinstance(b, Mul) and isinstance(b.left, Lit):
        return emul(b.left, emul(a, b.right))
    if isinstance(a, Fun) and a.name == "exp" and isinstance(b, Mul) \
            and isinstance(b.left, Fun) and b.left.name == "exp":
        return emul(_merge_exp(a, b.left), b.right)
    return Mul(a, b)


def ediv(a: TimeExpr, b: TimeExpr) -> TimeExpr:
    if isinstance(b, Lit):
        if b.value == 0.0:
            raise ZeroDivisionError("division by constant zero expression")
        if isinstance(a, Lit):
            return Lit(a.value / b.value)
        if b.value == 1.0:
            return a
        return emul(Lit(1.0 / b.value), a)
    if isinstance(a, Lit) and a.value == 0.0:
        return Lit(0.0)
    return Div(a, b)


def epow(a: TimeExpr, k: int) -> TimeExpr:
    if k < 0:
        raise ValueError("integer power must be nonnegative")
    if k == 0:
        return Lit(1.0)
    if k == 1:
        return a
    if isinstance(a, Lit):
        return Lit(a.value ** k)
    return Pow(a, k)


def efun(name: str, arg: TimeExpr) -> TimeExpr:
    if name not in _FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    if isinstance(arg, Lit):
        return Lit(_FUNCTIONS[name](arg.value))
    return Fun(name, arg)


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------

def diff_expr(e: TimeExpr) -> TimeExpr:
    """Exact derivative of `e` with respect to t (product/quotient/chain rules).

    The result is value-equivalent to the analytic derivative; it is not
    canonicalized beyond the trivial constructor cleanups above.
    """
    if isinstance(e, Lit):
        return Lit(0.0)
    if isinstance(e, TVar):
        return Lit(1.0)
    if isinstance(e, Neg):
        return eneg(diff_expr(e.arg))
    if isinstance(e, Add):
        return eadd(diff_expr(e.left), diff_expr(e.right))
    if isinstance(e, Sub):
        return esub(diff_expr(e.left), diff_expr(e.right))
    if isinstance(e, Mul):
        return eadd(emul(diff_expr(e.left), e.right), emul(e.left, diff_expr(e.right)))
    if isinstance(e, Div):
        num = esub(emul(diff_expr(e.left), e.right), emul(e.left, diff_expr(e.right)))
        return ediv(num, epow(e.right, 2))
    if isinstance(e, Pow):
        if e.exponent == 0:
            return Lit(0.0)
        return emul(emul(Lit(float(e.exponent)), epow(e.base, e.exponent - 1)),
                    diff_expr(e.base))
    if isinstance(e, Fun):
        du = diff_expr(e.arg)
        if e.name == "exp":
            return emul(Fun("exp", e.arg), du)
        if e.name == "sin":
            return emul(Fun("cos", e.arg), du)
        return eneg(emul(Fun("sin", e.arg), du))
    raise TypeError(f"not a TimeExpr node: {e!r}")
