import pytest
import sympy as sp

from vcburgers.classify import (
    IntegrationError,
    TABLE3_DIMENSIONS,
    burgers_reducible,
    case3_inequation_check,
    gauge_stabilizer_check,
    hat_equation,
    instantiate_table2,
    instantiate_table3,
    integrate,
    kolmogorov_residual,
    map_F,
    match_table2,
    proof_steps,
    splitting_invariant,
    splitting_invariant_hat,
)
from vcburgers.expr import DegenerateError, ExprError, diff, func, is_zero, param, t, x
from vcburgers.symmetry import Equation

g = func("g", "t")
a = func("a", "t")


@pytest.mark.parametrize("e,var", [
    (1, x), (x**3, x), (1 / x, x), (sp.Abs(x) ** sp.Rational(1, 3), x),
    (x * sp.Abs(x) ** sp.Rational(-1, 2), x), (sp.exp(-2 * x + t), x), (3 * t**2 + sp.exp(t), t),
])
def test_integrate_patterns(e, var):
    assert is_zero(diff(integrate(e, var), var) - e)


def test_integrate_outside_library():
    with pytest.raises(IntegrationError):
        integrate(1 / (1 + x**2), x)


def test_splitting_invariant_examples():
    assert splitting_invariant(Equation.make("L", C=1)).verdict == "L0"
    nu = sp.Rational(1, 3)
    s = splitting_invariant(Equation.make("L", C=x, A2=sp.Abs(x) ** nu))
    assert s.verdict == "L1"
    assert splitting_invariant(Equation.make("L")).verdict == "indeterminate"
    assert splitting_invariant(Equation.make("L", C=x, A2=x**2)).verdict == "L0"


def test_hat_splitting_examples():
    A10, A11 = func("A10", "t")(t), func("A11", "t")(t)
    assert splitting_invariant_hat(Equation.make("Lhat", A1=A11 * x + A10)).verdict == "Lhat0"
    al = sp.Rational(1, 2)
    e = Equation.make("Lhat", A1=param("c1") * sp.Abs(x) ** (al / (1 + al)))
    assert splitting_invariant_hat(e).verdict == "Lhat1"
    assert splitting_invariant_hat(Equation.make("Lhat")).verdict == "indeterminate"


def test_reducible_examples():
    assert burgers_reducible(Equation.make("L", A2=1, C=1)).verified
    no = burgers_reducible(Equation.make("L", A2=g(t), C=1))
    assert not no.reducible
    lab, value, ok = no.constraints[1]
    assert not ok and is_zero(value + diff(g(t), t) / g(t) ** 2)
    yes = burgers_reducible(Equation.make("L", A2=a(t), C=a(t)))
    assert yes.reducible and yes.verified


def test_reducible_with_x_dependence():
    # C = x, A2 = x^2: constraints hold, X = ln|x|
    r = burgers_reducible(Equation.make("L", A2=x**2, C=x), "xpos")
    assert r.reducible and r.verified


def test_map_examples():
    A2 = func("A2", "t", "x")(t, x)
    im = map_F(Equation.make("L", C=1))
    assert im.X == x and im.equation["A1"] == 0
    im = map_F(Equation.make("L", C=sp.exp(x)))
    assert is_zero(im.X + sp.exp(-x))
    assert is_zero(im.equation["A2"] - sp.exp(-2 * x) * A2)
    assert is_zero(im.equation["A1"] + sp.exp(-x) * A2)
    c = func("c", "t")(t)
    im = map_F(Equation.make("L", C=c))
    assert is_zero(im.equation["A1"] - x * diff(c, t) / c**2)
    assert im.consistent


def test_map_needs_x_outside_library():
    with pytest.raises(ExprError, match="supply X"):
        map_F(Equation.make("L", C=1 + x**2))
    with pytest.raises(ExprError):
        map_F(Equation.make("L", C=1 + x**2), X=x)


@pytest.mark.parametrize("nu", [sp.Rational(1, 2), 3, -1])
def test_splittings_consistent_on_power_family(nu):
    eq = Equation.make("L", C=x, A2=sp.Abs(x) ** nu)
    im = map_F(eq, chart="xpos")
    assert im.consistent
    assert (im.invariant.verdict == "L1") == (im.hat_invariant.verdict == "Lhat1")


def test_match_examples():
    r = match_table2(Equation.make("Lhat", A2=sp.exp(x), A1=3 * sp.exp(x)))
    assert r.case == 6 and r.parameters == {"c1": 3} and r.ok
    phi, psi = func("phi")(x), func("psi")(x)
    r = match_table2(Equation.make("Lhat", A2=phi, A1=psi + t))
    assert r.case == 2 and len(r.basis) == 1
    r = match_table2(Equation.make("Lhat"))
    assert r.case == 0


def test_match_rejects_affine():
    with pytest.raises(ExprError):
        match_table2(Equation.make("Lhat", A2=1, A1=x))


def test_match_after_map():
    eq = Equation.make("L", A2=x**3, C=x)
    h = hat_equation(map_F(eq, chart="xpos"), "xpos")
    assert match_table2(h, "xpos").case == 6


@pytest.mark.parametrize("case", range(1, 8))
def test_hat_regular_rows(case):
    r = instantiate_table2(case)
    assert r.ok


def test_hat_regular_wrong_basis_detected():
    from vcburgers.classify import _verify
    from vcburgers.jet import D, S1

    r = instantiate_table2(4, {"alpha": 2, "c1": 1})
    flags, _ = _verify([D(t) + 3 * S1()], r.equation, None)
    assert flags == [False]


def test_hat_regular_inequations():
    with pytest.raises(DegenerateError):
        instantiate_table2(4, {"alpha": -1})


@pytest.mark.parametrize("case", range(1, 7))
def test_regular_rows(case):
    r = instantiate_table3(case)
    assert r.ok and len(r.basis) == TABLE3_DIMENSIONS[case]


def test_regular_row_seven():
    r = instantiate_table3(7)
    assert r.residual_zero == [False, False]
    assert all(r.alternative["residual_zero"]) and r.alternative["closed"]
    assert any("passes" in n for n in r.notes)


def test_regular_row_four_specific():
    r = instantiate_table3(4, {"nu": sp.Rational(1, 2), "mu": 3})
    assert r.ok and r.splitting.verdict == "L1"


def test_regular_inequations():
    with pytest.raises(DegenerateError):
        instantiate_table3(4, {"nu": 2})
    with pytest.raises(DegenerateError):
        instantiate_table3(5, {"gamma": 1})


def test_case3_inequation():
    ground, agrees, witness = case3_inequation_check()
    assert ground and not agrees
    psi = func("psi")(x)
    assert is_zero(witness - diff(1 / psi, x))


def test_kolmogorov_examples():
    eq = Equation.make("Lhat", A2=1, A1=func("A1", "t", "x")(t, x))
    assert is_zero(kolmogorov_residual(x, eq) + eq["A1"])
    c1 = sp.Rational(1, 3)
    al = sp.Rational(1, 2)
    k = sp.Abs(x) ** (al / (1 + al))
    eq = Equation.make("Lhat", A2=x * k, A1=c1 * k)
    assert is_zero(kolmogorov_residual(sp.Abs(x) ** (1 - c1), eq), "xpos")


def test_proof_steps_all_pass():
    items = proof_steps()
    assert items and all(i.status == "pass" for i in items), [i for i in items if i.status != "pass"]


@pytest.mark.parametrize("case", range(1, 8))
def test_gauge_stabilizer(case):
    items = gauge_stabilizer_check(case)
    assert all(i.status == "pass" for i in items), items
