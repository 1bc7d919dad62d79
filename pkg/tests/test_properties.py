"""Randomized identities. The cheap ones get 200 examples, jet-level ones 100."""

import sympy as sp
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from vcburgers.equivalence import compose, hat_equivalence, pushforward_field
from vcburgers.expr import diff, func, is_zero, t, u, x
from vcburgers.grammar import jet_symbol
from vcburgers.jet import field, prolong
from vcburgers.symmetry import Equation, determining_system, split_terms

PROPERTY = settings(max_examples=200, deadline=None, derandomize=True,
                    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])
HEAVY = PROPERTY

A = func("A2", "t", "x")(t, x)
g = func("g", "t")(t)
phi = func("phi")(x)

leaves = st.sampled_from([t, x, A, g, phi, sp.S(1), sp.S(2), sp.S(-3), sp.Rational(1, 2)])


def _combine(children):
    return st.one_of(
        st.tuples(children, children).map(lambda p: p[0] + p[1]),
        st.tuples(children, children).map(lambda p: p[0] * p[1]),
        st.tuples(children, st.integers(-2, 3)).map(lambda p: p[0] ** p[1]),
        children.map(lambda e: sp.exp(e / 2)),
        children.map(sp.Abs),
    )


def _finite(e):
    return not e.has(sp.zoo, sp.nan, sp.oo, -sp.oo)


exprs = st.recursive(leaves, _combine, max_leaves=6).filter(_finite)

small = st.integers(-3, 3).map(sp.S)
polys_tx = st.tuples(small, small, small, small).map(
    lambda c: c[0] + c[1] * t + c[2] * x + c[3] * t * x)
polys_txu = st.tuples(polys_tx, small, small).map(lambda c: c[0] + c[1] * u + c[2] * x * u)
fields = st.tuples(polys_tx, polys_txu, polys_txu).map(lambda c: field(t=c[0], x=c[1], u=c[2]))
nonzero = st.sampled_from([sp.S(1), sp.S(-1), sp.S(2), sp.Rational(1, 3), sp.Rational(-5, 2)])


@PROPERTY
@given(exprs)
def test_partials_commute(e):
    assert is_zero(diff(diff(e, t), x) - diff(diff(e, x), t))


@PROPERTY
@given(exprs, exprs)
def test_leibniz(f, h):
    assert is_zero(diff(f * h, x) - diff(f, x) * h - f * diff(h, x))


@HEAVY
@given(fields, fields, nonzero, small)
def test_prolongation_is_linear(q1, q2, a, b):
    lhs = prolong(a * q1 + b * q2)
    p1, p2 = prolong(q1), prolong(q2)
    for alpha, c in lhs.eta:
        assert sp.expand(c - a * p1.coefficient(alpha) - b * p2.coefficient(alpha)) == 0


def _ghat(data):
    a, b, x0, x1, x2, v1, v0 = data
    return hat_equivalence(T=a * t + b, X0=x0 + x1 * t + x2 * t**2, U1=v1, U0=v0)


ghats = st.tuples(nonzero, small, small, small, small, nonzero, small).map(_ghat)


@PROPERTY
@given(ghats, ghats, fields)
def test_pushforward_is_functorial(p1, p2, q):
    lhs = pushforward_field(compose(p2, p1, family="composite"), q)
    rhs = pushforward_field(p2, pushforward_field(p1, q))
    assert all(is_zero(lhs[d] - rhs[d]) for d in ("t", "x", "u"))


jets = [jet_symbol(0, 1), jet_symbol(0, 2), jet_symbol(1, 1)]
jet_polys = st.lists(st.tuples(polys_txu, st.sampled_from(jets + [sp.S(1)]),
                               st.integers(0, 2)), max_size=5).map(
    lambda terms: sp.Add(*[c * j**k for c, j, k in terms]))
equations = st.tuples(polys_tx, polys_tx).filter(lambda p: 0 not in p).map(
    lambda p: Equation.make("L", A2=p[1], C=p[0]))


@HEAVY
@given(jet_polys, equations, fields)
def test_splitting_reassembles(e, eq, q):
    parts = split_terms(e, lambda a: a in jets)
    assert sp.expand(sum((m * c for m, c in parts.items()), sp.S.Zero) - e) == 0
    ds = determining_system(eq, q)
    assert sp.expand(ds.reassemble() - ds.residual) == 0
