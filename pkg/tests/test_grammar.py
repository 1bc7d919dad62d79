import pytest
import sympy as sp

from vcburgers.expr import UnknownSymbolError, diff, func, is_zero, t, x
from vcburgers.grammar import ParseError, from_json, jet_symbol, parse, to_json, to_text


@pytest.mark.parametrize("text,expected", [
    ("1 + 2*3", 7),
    ("2^3^2", 512),
    ("-x^2", -x**2),
    ("(x + t)*x", (x + t) * x),
    ("abs(x)^(1/2)", sp.sqrt(sp.Abs(x))),
    ("exp(ln(x))", x),
])
def test_precedence(text, expected):
    assert is_zero(parse(text) - expected)


def test_jets_and_functions():
    assert parse("u_tx") == jet_symbol(1, 1)
    g = parse("gq(t, x)", auto=True)
    assert parse("gq_x(t, x)") == diff(g, x)
    assert parse("hq(x*t)", auto=True).signature[0].name == "w"


def test_unknown_and_errors():
    with pytest.raises(UnknownSymbolError):
        parse("nosuchname")
    with pytest.raises(ParseError) as err:
        parse("x + (t")
    assert err.value.pos == 6
    with pytest.raises(ParseError):
        parse("u_y")
    with pytest.raises(ParseError):
        parse("x )")


@pytest.mark.parametrize("e", [
    x**2 * sp.exp(-t) / 3,
    sp.Abs(x) ** sp.Rational(-3, 2) - 2 * sp.sign(x),
    sp.log(sp.Abs(x)) + func("A2", "t", "x")(t, x),
    diff(func("phi")(x * sp.exp(t)), x),
    -x + t - 1,
])
def test_text_and_json_round_trip(e):
    assert is_zero(parse(to_text(e)) - e)
    assert from_json(to_json(e)) == e


def test_to_text_is_canonical():
    assert to_text(x + t) == to_text(t + x)
    assert to_text(-(x - t)) == "t - x"
