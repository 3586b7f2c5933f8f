"""Expression language: parsing, precedence, evaluation, round-trips."""

import numpy as np
import pytest

from plaplab.errors import EvaluationError, ParseError
from plaplab.expressions import (
    FUNCTIONS,
    VARIABLES,
    Bin,
    Call,
    Neg,
    Num,
    Var,
    eval_expression,
    parse_expression,
    pretty,
    variables_used,
)


def ev(text, **env):
    return eval_expression(parse_expression(text), env)


class TestParsing:
    def test_number(self):
        assert parse_expression("3.5") == Num(3.5)

    def test_scientific_notation(self):
        assert parse_expression("2.5e-3") == Num(0.0025)
        assert parse_expression("1e2") == Num(100.0)

    def test_variable(self):
        assert parse_expression("x") == Var("x")

    def test_pi_folds_to_number(self):
        assert parse_expression("pi") == Num(float(np.pi))

    def test_addition_left_associative(self):
        assert parse_expression("1-2-3") == Bin(
            "-", Bin("-", Num(1.0), Num(2.0)), Num(3.0)
        )

    def test_division_left_associative(self):
        assert ev("2/4/4") == pytest.approx(0.125)

    def test_multiplication_binds_tighter(self):
        assert ev("1+2*3") == 7.0
        assert ev("(1+2)*3") == 9.0

    def test_power_right_associative(self):
        assert ev("2^3^2") == 512.0

    def test_power_binds_tighter_than_times(self):
        assert ev("2*3^2") == 18.0

    def test_unary_minus_attaches_to_base(self):
        # the documented rule: -x^2 is (-x)^2
        assert ev("-x^2", x=3.0) == 9.0
        assert parse_expression("-x^2") == Bin("^", Neg(Var("x")), Num(2.0))

    def test_negated_exponent(self):
        assert ev("2^-3") == 0.125

    def test_double_negation(self):
        assert ev("--5") == 5.0

    def test_minus_after_operator(self):
        assert ev("2*-3") == -6.0

    def test_call_with_variadic_args(self):
        node = parse_expression("max(1, 2, 3)")
        assert node == Call("max", (Num(1.0), Num(2.0), Num(3.0)))

    def test_whitespace_insensitive(self):
        assert parse_expression(" 1 +  2 ") == parse_expression("1+2")


class TestParseErrors:
    def test_empty(self):
        with pytest.raises(ParseError) as e:
            parse_expression("")
        assert e.value.offset == 0

    def test_blank(self):
        with pytest.raises(ParseError) as e:
            parse_expression("   ")
        assert e.value.offset == 0

    def test_dangling_operator_offset(self):
        with pytest.raises(ParseError) as e:
            parse_expression("2 *")
        assert e.value.offset == 3

    def test_trailing_input(self):
        with pytest.raises(ParseError) as e:
            parse_expression("1 + 2 3")
        assert e.value.offset == 6

    def test_missing_rparen(self):
        with pytest.raises(ParseError):
            parse_expression("2 + (3")

    def test_unknown_identifier(self):
        with pytest.raises(ParseError) as e:
            parse_expression("z + 1")
        assert "z" in str(e.value)
        assert e.value.expected == VARIABLES

    def test_unknown_function(self):
        with pytest.raises(ParseError) as e:
            parse_expression("foo(2)")
        assert "foo" in str(e.value)

    def test_arity_too_many(self):
        with pytest.raises(ParseError):
            parse_expression("abs(1, 2)")

    def test_arity_too_few(self):
        with pytest.raises(ParseError):
            parse_expression("min(1)")

    def test_bad_character(self):
        with pytest.raises(ParseError):
            parse_expression("1 @ 2")


class TestEvaluation:
    def test_polynomial(self):
        assert ev("x^2 + y^2", x=3.0, y=4.0) == 25.0

    def test_pos_clips_negative(self):
        assert ev("pos(0 - 2)") == 0.0
        assert ev("pos(2)") == 2.0

    def test_min_max_nested(self):
        assert ev("min(1, max(0, x))", x=7.0) == 1.0

    def test_functions(self):
        assert ev("abs(-3)") == 3.0
        assert ev("sqrt(9)") == 3.0
        assert ev("pow(2, 10)") == 1024.0

    def test_vectorized(self):
        xs = np.linspace(0.0, 1.0, 5)
        out = ev("x^2 + 1", x=xs)
        np.testing.assert_allclose(out, xs**2 + 1)

    def test_scalar_returns_python_float(self):
        assert isinstance(ev("1 + 1"), float)

    def test_division_by_zero(self):
        with pytest.raises(EvaluationError):
            ev("1/x", x=0.0)

    def test_vector_division_by_zero(self):
        with pytest.raises(EvaluationError):
            ev("1/x", x=np.array([1.0, 0.0]))

    def test_zero_to_negative_power(self):
        with pytest.raises(EvaluationError):
            ev("0^-1")

    def test_fractional_power_of_negative(self):
        with pytest.raises(EvaluationError):
            ev("(-2)^0.5")

    def test_sqrt_of_negative(self):
        with pytest.raises(EvaluationError):
            ev("sqrt(0-4)")

    def test_unbound_variable(self):
        with pytest.raises(EvaluationError):
            ev("t + 1", x=1.0)

    def test_integer_power_of_negative_ok(self):
        assert ev("(-2)^3") == -8.0


class TestVariablesUsed:
    def test_collects_all(self):
        assert variables_used(parse_expression("x*y + min(t, 1)")) == {"x", "y", "t"}

    def test_constant_expression(self):
        assert variables_used(parse_expression("1 + pi")) == set()


def random_tree(rng, depth):
    """A random AST whose pretty-printed text must re-parse identically.

    Number literals are kept non-negative: a bare negative literal
    prints as -c, which re-parses as Neg(Num(c)).
    """
    if depth <= 0 or rng.random() < 0.3:
        if rng.random() < 0.5:
            return Num(float(abs(rng.standard_normal())))
        return Var(VARIABLES[rng.integers(len(VARIABLES))])
    kind = rng.integers(3)
    if kind == 0:
        return Neg(random_tree(rng, depth - 1))
    if kind == 1:
        op = "+-*/^"[rng.integers(5)]
        return Bin(op, random_tree(rng, depth - 1), random_tree(rng, depth - 1))
    name = list(FUNCTIONS)[rng.integers(len(FUNCTIONS))]
    lo, hi = FUNCTIONS[name]
    nargs = lo if hi == lo else int(rng.integers(lo, lo + 3))
    return Call(name, tuple(random_tree(rng, depth - 1) for _ in range(nargs)))


def test_round_trip_thousand_random_trees():
    rng = np.random.default_rng(20240817)
    for _ in range(1000):
        tree = random_tree(rng, depth=int(rng.integers(1, 6)))
        assert parse_expression(pretty(tree)) == tree


def test_pretty_is_fully_parenthesized():
    assert pretty(parse_expression("1+2*3")) == "(1.0 + (2.0 * 3.0))"
