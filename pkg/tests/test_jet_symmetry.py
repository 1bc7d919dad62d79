import pytest
import sympy as sp

from vcburgers.expr import ExprError, diff, func, is_zero, param, t, u, x
from vcburgers.grammar import jet_symbol
from vcburgers.jet import (
    D,
    D_hat,
    P,
    P_hat,
    S0,
    S0_hat,
    S1,
    S1_hat,
    field,
    fields_equal,
    lie_bracket,
    project,
    prolong,
    total_derivative,
)
from vcburgers.symmetry import (
    Equation,
    classifying_equations,
    determining_system,
    invariance_residual,
    is_symmetry,
    kernel_check,
    restricted_ansatz,
    same_condition,
    span_coefficients,
    split_terms,
    verify_classifying_solution,
)

from oracles import CLASSICAL_BURGERS_ALGEBRA, polynomial_symmetries

ux, uxx = jet_symbol(0, 1), jet_symbol(0, 2)
tau = func("tau", "t")(t)
chi = func("chi", "t")(t)


def test_total_derivative():
    A2 = func("A2", "t", "x")(t, x)
    e = A2 * ux
    assert total_derivative(e, "x") == diff(A2, x) * ux + A2 * uxx


def test_prolongation_of_translation_is_trivial():
    pr = prolong(field(x=1))
    assert all(c == 0 for _, c in pr.eta)


def test_prolongation_of_scaling():
    pr = prolong(field(x=x, u=u))
    assert pr.coefficient((0, 1)) == 0
    assert pr.coefficient((0, 2)) == -uxx
    assert pr.coefficient((1, 0)) == jet_symbol(1, 0)


def test_bracket_and_projection():
    assert fields_equal(lie_bracket(S0(), S1()), S0())
    assert fields_equal(lie_bracket(P(chi), S1()), P(chi))
    assert fields_equal(project(D_hat(tau)), D(tau))
    assert fields_equal(project(S1_hat()), S1())
    assert fields_equal(project(S0_hat() + P_hat(chi)), S0() + P(chi))


def test_vector_field_direction_mismatch():
    with pytest.raises(ExprError):
        lie_bracket(S0(), S0_hat())


def test_classical_burgers_algebra():
    eq = Equation.make("L", A2=1, C=1)
    for tau_, xi_, eta_ in CLASSICAL_BURGERS_ALGEBRA:
        assert is_symmetry(field(t=tau_, x=xi_, u=eta_), eq)
    assert not is_symmetry(field(x=x), eq)


def test_oracle_agrees_on_classical_burgers():
    found = polynomial_symmetries(1, 0, 1)
    assert len(found) == 5
    basis = [field(t=a, x=b, u=c) for a, b, c in CLASSICAL_BURGERS_ALGEBRA]
    for trip in found:
        q = field(t=trip[0], x=trip[1], u=trip[2])
        assert is_symmetry(q, Equation.make("L", A2=1, C=1))
        assert span_coefficients(q, basis) is not None


def test_residual_of_opaque_class_has_no_third_order_jets():
    r = invariance_residual(D(tau), Equation.make("Lhat"))
    assert not r.has(jet_symbol(0, 3))


def test_determining_system_reassembles():
    ds = determining_system(Equation.make("Lhat"), restricted_ansatz(tau, chi, param("alpha"),
                                                                    param("beta")))
    assert is_zero(ds.reassemble() - ds.residual)


def test_classifying_equations_reproduced():
    al, be = param("alpha"), param("beta")
    eq = Equation.make("Lhat")
    ds = determining_system(eq, restricted_ansatz(tau, chi, al, be))
    want = classifying_equations(tau, chi, al, be, eq["A1"], eq["A2"])
    nonzero = [e for e in ds.equations if not is_zero(e)]
    for w in want:
        assert any(same_condition(e, w) for e in nonzero)
    assert all(any(same_condition(e, w) for w in want) for e in nonzero)


def test_classifying_solution_on_case_six():
    c1 = param("c1")
    eq = Equation.make("Lhat", A2=sp.exp(x), A1=c1 * sp.exp(x))
    # D(t) - P(1) - S1: tau = t, chi = -1, alpha = -1, beta = 0
    assert verify_classifying_solution(t, sp.S(-1), sp.S(-1), sp.S(0), eq)
    assert not verify_classifying_solution(t, sp.S(1), sp.S(-1), sp.S(0), eq)


def test_split_terms_structural_error():
    from vcburgers.symmetry import StructuralError

    with pytest.raises(StructuralError):
        split_terms(sp.exp(ux), lambda a: a == ux)


def test_kernel_is_zero():
    k = kernel_check()
    assert k.zero_kernel
    with pytest.raises(ExprError):
        kernel_check("L")


def test_prolongation_matches_characteristic_formula():
    from vcburgers.jet import MULTIINDICES_2, total_derivative_multi

    q = field(t=tau, x=x * chi + u, u=func("A2", "t", "x")(t, x) * u**2 + sp.exp(x) * u)
    char = q["u"] - q["t"] * jet_symbol(1, 0) - q["x"] * ux
    pr = prolong(q)
    for a, b in MULTIINDICES_2:
        want = total_derivative_multi(char, (a, b))
        want += q["t"] * jet_symbol(a + 1, b) + q["x"] * jet_symbol(a, b + 1)
        assert sp.expand(pr.coefficient((a, b)) - want) == 0
