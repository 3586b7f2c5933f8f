"""A tiny arithmetic expression language for problem data.

Obstacles, boundary values and right-hand sides can be written as
strings in configs: numbers, the variables x, y, t, the constant pi,
binary + - * / ^, unary minus, and the functions abs, min, max, pow,
sqrt, pos (positive part).

Precedence, loosest to tightest:

    + -            (left associative)
    * /            (left associative)
    ^              (right associative: 2^3^2 = 2^(3^2))
    unary -        (binds tighter than ^'s base: -x^2 = (-x)^2)
    atoms          (numbers, variables, calls, parentheses)

Note the unary-minus rule: the minus attaches to the base before the
power applies, so -x^2 is (-x)^2, not -(x^2).  An exponent may itself
be negated: 2^-3 parses.  The pretty-printer emits fully parenthesized
text, so printed trees re-parse to structurally identical trees.

Evaluation is strict: division by zero, 0 to a negative power, a
fractional power of a negative base, and sqrt of a negative number all
raise EvaluationError rather than producing infinities or NaN.
Evaluation is vectorized: variables may be bound to numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, ParseError

__all__ = [
    "Num",
    "Var",
    "Neg",
    "Bin",
    "Call",
    "FUNCTIONS",
    "VARIABLES",
    "parse_expression",
    "eval_expression",
    "pretty",
    "variables_used",
]

VARIABLES = ("x", "y", "t")

# name -> (min arity, max arity)
FUNCTIONS = {
    "abs": (1, 1),
    "min": (2, None),
    "max": (2, None),
    "pow": (2, 2),
    "sqrt": (1, 1),
    "pos": (1, 1),
}

CONSTANTS = {"pi": np.pi}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        """(kind, value, offset); kinds: num, ident, op, lparen, rparen,
        comma, end."""
        self._skip_ws()
        if self.pos >= len(self.text):
            return ("end", "", self.pos)
        ch = self.text[self.pos]
        if ch.isdigit() or ch == ".":
            j = self.pos
            seen_e = False
            while j < len(self.text):
                c = self.text[j]
                if c.isdigit() or c == ".":
                    j += 1
                elif c in "eE" and not seen_e and j + 1 < len(self.text) and (
                    self.text[j + 1].isdigit()
                    or (
                        self.text[j + 1] in "+-"
                        and j + 2 < len(self.text)
                        and self.text[j + 2].isdigit()
                    )
                ):
                    seen_e = True
                    j += 2 if self.text[j + 1] in "+-" else 1
                else:
                    break
            return ("num", self.text[self.pos : j], self.pos)
        if ch.isalpha() or ch == "_":
            j = self.pos
            while j < len(self.text) and (self.text[j].isalnum() or self.text[j] == "_"):
                j += 1
            return ("ident", self.text[self.pos : j], self.pos)
        if ch in "+-*/^":
            return ("op", ch, self.pos)
        if ch == "(":
            return ("lparen", ch, self.pos)
        if ch == ")":
            return ("rparen", ch, self.pos)
        if ch == ",":
            return ("comma", ch, self.pos)
        raise ParseError(f"unexpected character {ch!r}", self.pos)

    def next(self):
        tok = self.peek()
        self.pos = tok[2] + len(tok[1])
        return tok


class _Parser:
    def __init__(self, text: str):
        self.lex = _Lexer(text)

    def parse(self):
        node = self._expr()
        kind, value, offset = self.lex.peek()
        if kind != "end":
            raise ParseError(
                f"unexpected trailing input {value!r}", offset, expected=("end",)
            )
        return node

    def _expr(self):
        node = self._term()
        while True:
            kind, value, _ = self.lex.peek()
            if kind == "op" and value in "+-":
                self.lex.next()
                node = Bin(value, node, self._term())
            else:
                return node

    def _term(self):
        node = self._power()
        while True:
            kind, value, _ = self.lex.peek()
            if kind == "op" and value in "*/":
                self.lex.next()
                node = Bin(value, node, self._power())
            else:
                return node

    def _power(self):
        base = self._base()
        kind, value, _ = self.lex.peek()
        if kind == "op" and value == "^":
            self.lex.next()
            return Bin("^", base, self._power())
        return base

    def _base(self):
        kind, value, offset = self.lex.peek()
        if kind == "op" and value == "-":
            self.lex.next()
            return Neg(self._base())
        return self._atom()

    def _atom(self):
        kind, value, offset = self.lex.next()
        if kind == "num":
            try:
                return Num(float(value))
            except ValueError:
                raise ParseError(f"malformed number {value!r}", offset) from None
        if kind == "ident":
            if value in CONSTANTS:
                return Num(float(CONSTANTS[value]))
            nkind, _, _ = self.lex.peek()
            if nkind == "lparen":
                if value not in FUNCTIONS:
                    raise ParseError(
                        f"unknown function {value!r}",
                        offset,
                        expected=tuple(sorted(FUNCTIONS)),
                    )
                self.lex.next()
                args = [self._expr()]
                while True:
                    k, v, o = self.lex.next()
                    if k == "comma":
                        args.append(self._expr())
                    elif k == "rparen":
                        break
                    else:
                        raise ParseError(
                            f"expected ',' or ')' in argument list, got {v!r}",
                            o,
                            expected=(",", ")"),
                        )
                lo, hi = FUNCTIONS[value]
                if len(args) < lo or (hi is not None and len(args) > hi):
                    want = f"{lo}" if hi == lo else f">= {lo}"
                    raise ParseError(
                        f"{value} takes {want} argument(s), got {len(args)}", offset
                    )
                return Call(value, tuple(args))
            if value not in VARIABLES:
                raise ParseError(
                    f"unknown identifier {value!r}", offset, expected=VARIABLES
                )
            return Var(value)
        if kind == "lparen":
            node = self._expr()
            k, v, o = self.lex.next()
            if k != "rparen":
                raise ParseError(f"expected ')', got {v!r}", o, expected=(")",))
            return node
        raise ParseError(
            f"expected a value, got {value!r}" if value else "unexpected end of input",
            offset,
            expected=("number", "identifier", "("),
        )


def parse_expression(text: str) -> object:
    """Parse text into an AST; errors carry the byte offset."""
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    return _Parser(text).parse()


def _check_finite(value, what: str):
    if not np.all(np.isfinite(value)):
        raise EvaluationError(f"{what} produced a non-finite value")
    return value


def _power(base, exponent):
    base = np.asarray(base, dtype=float)
    exponent = np.asarray(exponent, dtype=float)
    if np.any((base == 0.0) & (exponent < 0.0)):
        raise EvaluationError("0 raised to a negative power")
    frac = exponent != np.round(exponent)
    if np.any((base < 0.0) & frac):
        raise EvaluationError("fractional power of a negative base")
    return _check_finite(np.power(base, exponent), "power")


def eval_expression(ast, env: dict):
    """Evaluate with variables bound in env (scalars or numpy arrays).

    Returns a float for scalar inputs, an array otherwise.
    """
    result = _eval(ast, env)
    if np.ndim(result) == 0:
        return float(result)
    return result


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name not in env or env[node.name] is None:
            raise EvaluationError(f"unbound variable {node.name!r}")
        return np.asarray(env[node.name], dtype=float)
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, Bin):
        left = _eval(node.left, env)
        right = _eval(node.right, env)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            if np.any(np.asarray(right) == 0.0):
                raise EvaluationError("division by zero")
            return left / right
        return _power(left, right)
    if isinstance(node, Call):
        args = [_eval(a, env) for a in node.args]
        if node.name == "abs":
            return np.abs(args[0])
        if node.name == "min":
            out = args[0]
            for a in args[1:]:
                out = np.minimum(out, a)
            return out
        if node.name == "max":
            out = args[0]
            for a in args[1:]:
                out = np.maximum(out, a)
            return out
        if node.name == "pow":
            return _power(args[0], args[1])
        if node.name == "sqrt":
            if np.any(np.asarray(args[0]) < 0.0):
                raise EvaluationError("square root of a negative number")
            return np.sqrt(args[0])
        return np.maximum(args[0], 0.0)  # pos
    raise EvaluationError(f"not an expression node: {node!r}")


def pretty(node) -> str:
    """Fully parenthesized text that re-parses to an identical tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{pretty(node.operand)})"
    if isinstance(node, Bin):
        return f"({pretty(node.left)} {node.op} {pretty(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(pretty(a) for a in node.args)})"
    raise EvaluationError(f"not an expression node: {node!r}")


def variables_used(node) -> set:
    """The set of variable names occurring in the tree."""
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Neg):
        return variables_used(node.operand)
    if isinstance(node, Bin):
        return variables_used(node.left) | variables_used(node.right)
    if isinstance(node, Call):
        out = set()
        for a in node.args:
            out |= variables_used(a)
        return out
    return set()
