import numpy as np
import pytest

from ortholap.expr import (
    BinOp,
    Call,
    Const,
    DomainError,
    Neg,
    Num,
    ParseError,
    Var,
    evaluate,
    parse,
    to_text,
)


def test_precedence_mul_over_add():
    assert parse("x+y*z") == BinOp("+", Var("x"), BinOp("*", Var("y"), Var("z")))


def test_power_right_associative():
    tree = parse("2^3^2")
    assert tree == BinOp("^", Num(2.0), BinOp("^", Num(3.0), Num(2.0)))
    assert evaluate(tree, (0.0, 0.0, 0.0)) == 512.0


def test_syntax_error_offset():
    with pytest.raises(ParseError) as err:
        parse("x + * y")
    assert err.value.offset == 4


def test_unbalanced_parenthesis():
    with pytest.raises(ParseError, match="parenthesis"):
        parse("sin(x")
    with pytest.raises(ParseError):
        parse("(x+y")


def test_unknown_identifier():
    with pytest.raises(ParseError, match="unknown identifier 'foo'"):
        parse("foo + 1")
    with pytest.raises(ParseError) as err:
        parse("x + bar")
    assert err.value.offset == 4


def test_whitespace_insensitive():
    assert parse(" x\t+ y *z ") == parse("x+y*z")


def test_evaluate_basics():
    assert evaluate(parse("cos(0)"), (5.0, -1.0, 2.0)) == 1.0
    assert evaluate(parse("x*y"), (2.0, 3.0, 7.0)) == 6.0
    assert evaluate(parse("sin(pi/2)"), (0.0, 0.0, 0.0)) == 1.0


def test_unary_minus_binds_below_power():
    # -x^2 is -(x^2), not (-x)^2
    assert evaluate(parse("-x^2"), (3.0, 0.0, 0.0)) == -9.0
    assert evaluate(parse("2^-2"), (0.0, 0.0, 0.0)) == 0.25


def test_evaluate_vectorized():
    xs = np.linspace(0.0, 1.0, 11)
    vals = evaluate(parse("sin(pi*x)+z"), (xs, 0.0, 2.0))
    assert np.array_equal(vals, np.sin(np.pi * xs) + 2.0)


def test_domain_errors():
    with pytest.raises(DomainError, match="division by zero"):
        evaluate(parse("1/(x-1)"), (1.0, 0.0, 0.0))
    with pytest.raises(DomainError, match="log"):
        evaluate(parse("log(x)"), (-2.0, 0.0, 0.0))
    with pytest.raises(DomainError, match="sqrt"):
        evaluate(parse("sqrt(y)"), (0.0, -1.0, 0.0))
    # offending sub-expression is named
    with pytest.raises(DomainError, match="log\\(x-2.0\\)"):
        evaluate(parse("1 + log(x - 2)"), (0.0, 0.0, 0.0))


def _random_tree(rng, depth):
    choice = rng.integers(0, 6 if depth > 0 else 3)
    if choice == 0:
        return Num(float(np.round(rng.uniform(0, 10), 3)))
    if choice == 1:
        return Var(("x", "y", "z")[rng.integers(0, 3)])
    if choice == 2:
        return Const("pi")
    if choice == 3:
        return Neg(_random_tree(rng, depth - 1))
    if choice == 4:
        op = "+-*/^"[rng.integers(0, 5)]
        return BinOp(op, _random_tree(rng, depth - 1), _random_tree(rng, depth - 1))
    func = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs")[rng.integers(0, 7)]
    return Call(func, _random_tree(rng, depth - 1))


def test_print_parse_roundtrip_1000_random_trees():
    rng = np.random.default_rng(20240817)
    for _ in range(1000):
        tree = _random_tree(rng, depth=4)
        text = to_text(tree)
        reparsed = parse(text)
        assert reparsed == tree, text
        assert to_text(reparsed) == text


# fixed regression corpus: source text paired with a hand-built tree
CORPUS = [
    ("1+2*3", BinOp("+", Num(1.0), BinOp("*", Num(2.0), Num(3.0)))),
    ("(1+2)*3", BinOp("*", BinOp("+", Num(1.0), Num(2.0)), Num(3.0))),
    ("x-y-z", BinOp("-", BinOp("-", Var("x"), Var("y")), Var("z"))),
    ("x/y/z", BinOp("/", BinOp("/", Var("x"), Var("y")), Var("z"))),
    ("2^3^2", BinOp("^", Num(2.0), BinOp("^", Num(3.0), Num(2.0)))),
    ("-x^2", Neg(BinOp("^", Var("x"), Num(2.0)))),
    ("(-x)^2", BinOp("^", Neg(Var("x")), Num(2.0))),
    ("2^-1", BinOp("^", Num(2.0), Neg(Num(1.0)))),
    ("pi*x", BinOp("*", Const("pi"), Var("x"))),
    ("sin(pi*x)", Call("sin", BinOp("*", Const("pi"), Var("x")))),
    ("cos(x)*cos(y)", BinOp("*", Call("cos", Var("x")), Call("cos", Var("y")))),
    ("exp(-(x^2))", Call("exp", Neg(BinOp("^", Var("x"), Num(2.0))))),
    ("sqrt(x*x+y*y)", Call("sqrt", BinOp("+", BinOp("*", Var("x"), Var("x")),
                                         BinOp("*", Var("y"), Var("y"))))),
    ("abs(z-0.5)", Call("abs", BinOp("-", Var("z"), Num(0.5)))),
    ("tan(z/4)", Call("tan", BinOp("/", Var("z"), Num(4.0)))),
    ("log(1+x*x)", Call("log", BinOp("+", Num(1.0), BinOp("*", Var("x"), Var("x"))))),
    ("1e2+x", BinOp("+", Num(100.0), Var("x"))),
    ("2.5e-1*y", BinOp("*", Num(0.25), Var("y"))),
    ("x*-y", BinOp("*", Var("x"), Neg(Var("y")))),
    ("1--z", BinOp("-", Num(1.0), Neg(Var("z")))),
]


def test_regression_corpus_bit_exact():
    assert len(CORPUS) == 20
    rng = np.random.default_rng(7)
    points = rng.uniform(0.1, 2.0, size=(5, 3))
    for source, tree in CORPUS:
        assert parse(source) == tree
        for p in points:
            a = evaluate(parse(source), tuple(p))
            b = evaluate(tree, tuple(p))
            assert np.float64(a) == np.float64(b)  # bit-exact
