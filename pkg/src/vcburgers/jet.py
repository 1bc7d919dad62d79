"""Jet coordinates, total derivatives, vector fields and their prolongation."""

from __future__ import annotations

import re
from dataclasses import dataclass

import sympy as sp

from .expr import ExprError, diff, expand_terms, t, u, x
from .grammar import jet_symbol, to_text

BASE = ("t", "x", "u")
_BASE_SYMBOLS = {"t": t, "x": x, "u": u}
_ELEMENT_SYMBOLS: dict = {}
_JET_NAME = re.compile(r"u_(t*)(x*)$")


def element_coord(name):
    """Coordinate symbol for an arbitrary element treated as independent."""
    sym = _ELEMENT_SYMBOLS.get(name)
    if sym is None:
        sym = _ELEMENT_SYMBOLS[name] = sp.Symbol(name, real=True)
    return sym


def coord(name):
    return _BASE_SYMBOLS.get(name) or element_coord(name)


def jet_index(sym):
    """Multiindex of a jet coordinate symbol, or None."""
    if sym == u:
        return (0, 0)
    if not getattr(sym, "is_Symbol", False):
        return None
    m = _JET_NAME.match(sym.name)
    if m is None:
        return None
    return (len(m.group(1)), len(m.group(2)))


def jets_in(e):
    """Jet coordinates (including u) occurring in ``e``, by (order, t-order)."""
    found = [s for s in sp.sympify(e).free_symbols if jet_index(s) is not None]
    return sorted(found, key=lambda s: (sum(jet_index(s)), jet_index(s)[0]))


def total_derivative(e, direction):
    """D_t or D_x applied to an expression on the jet space."""
    e = sp.sympify(e)
    var, step = (t, (1, 0)) if direction == "t" else (x, (0, 1))
    out = diff(e, var)
    for s in jets_in(e):
        a, b = jet_index(s)
        out += jet_symbol(a + step[0], b + step[1]) * diff(e, s)
    return out


def total_derivative_multi(e, alpha):
    for _ in range(alpha[0]):
        e = total_derivative(e, "t")
    for _ in range(alpha[1]):
        e = total_derivative(e, "x")
    return e


@dataclass(frozen=True)
class VectorField:
    """A vector field; ``components`` maps direction names to coefficients."""

    components: tuple  # ((direction, expr), ...) in direction order
    directions: tuple = BASE

    @classmethod
    def make(cls, comps, directions=BASE):
        for k in comps:
            if k not in directions:
                raise ExprError(f"direction {k!r} not in {directions}")
        items = tuple((d, sp.sympify(comps.get(d, 0))) for d in directions)
        return cls(items, tuple(directions))

    def __getitem__(self, d):
        return dict(self.components).get(d, sp.S.Zero)

    @property
    def is_base(self):
        return self.directions == BASE

    def _check(self, other):
        if self.directions != other.directions:
            raise ExprError("vector fields live on different direction sets")

    def __add__(self, other):
        self._check(other)
        return VectorField.make({d: self[d] + other[d] for d in self.directions}, self.directions)

    def __sub__(self, other):
        return self + (-1) * other

    def __rmul__(self, c):
        return VectorField.make({d: c * self[d] for d in self.directions}, self.directions)

    def __neg__(self):
        return (-1) * self

    def on(self, e):
        """Directional derivative of ``e`` along the field."""
        e = sp.sympify(e)
        return sp.Add(*[self[d] * diff(e, coord(d)) for d in self.directions if self[d] != 0])

    def map(self, fn):
        return VectorField.make({d: fn(self[d]) for d in self.directions}, self.directions)

    def to_json(self):
        return {d: to_text(self[d]) for d in self.directions}

    def __str__(self):
        return " + ".join(f"({to_text(self[d])})*d_{d}" for d in self.directions if self[d] != 0) or "0"


def field(directions=BASE, **comps):
    return VectorField.make(comps, directions)


def lie_bracket(q1, q2):
    q1._check(q2)
    return VectorField.make(
        {d: q1.on(q2[d]) - q2.on(q1[d]) for d in q1.directions}, q1.directions)


@dataclass(frozen=True)
class ProlongedVectorField:
    base: VectorField
    eta: tuple  # ((multiindex, expr), ...)

    def coefficient(self, alpha):
        return dict(self.eta)[tuple(alpha)]


MULTIINDICES_2 = ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2))


def prolong(q, order=2):
    """Second prolongation by the characteristic formula."""
    if not q.is_base:
        raise ExprError("prolongation defined on base fields only")
    if order != 2:
        raise ExprError("only second prolongation is supported")
    # eta^a = D^a eta - sum over 0 < b <= a of binom(a, b) (D^b tau u_{a-b+t} + D^b xi u_{a-b+x});
    # the b = 0 terms cancel, so only the small components get differentiated
    comps = {d: {(0, 0): expand_terms(q[d])} for d in BASE}
    for a, b in MULTIINDICES_2:
        for d in BASE:
            lower, direction = ((a, b - 1), "x") if b else ((a - 1, b), "t")
            comps[d][(a, b)] = expand_terms(total_derivative(comps[d][lower], direction))
    coeffs = []
    for a, b in MULTIINDICES_2:
        c = comps["u"][(a, b)]
        for i in range(a + 1):
            for j in range(b + 1):
                if i == j == 0:
                    continue
                w = sp.binomial(a, i) * sp.binomial(b, j)
                c -= w * (comps["t"][(i, j)] * jet_symbol(a - i + 1, b - j)
                          + comps["x"][(i, j)] * jet_symbol(a - i, b - j + 1))
        coeffs.append(((a, b), expand_terms(c)))
    return ProlongedVectorField(q, tuple(coeffs))


def apply(qp, e):
    """Action of a (prolonged) field on an expression of the second-order jet."""
    e = sp.sympify(e)
    if isinstance(qp, VectorField):
        return qp.on(e)
    out = qp.base.on(e)
    for alpha, c in qp.eta:
        s = jet_symbol(*alpha)
        if e.has(s):
            out += c * diff(e, s)
    return out


# ---------------------------------------------------------------- named generators

HAT = BASE + ("A1", "A2")


def D(tau):
    return field(t=tau, x=diff(tau, t) * x)


def S0():
    return field(u=1)


def S1():
    return field(x=x, u=u)


def P(chi):
    return field(x=chi)


def D_hat(tau):
    a2 = element_coord("A2")
    return field(HAT, t=tau, x=diff(tau, t) * x, A1=-diff(tau, t, 2) * x, A2=diff(tau, t) * a2)


def S0_hat():
    return field(HAT, u=1, A1=1)


def S1_hat():
    return field(HAT, x=x, u=u, A1=element_coord("A1"), A2=2 * element_coord("A2"))


def P_hat(chi):
    return field(HAT, x=chi, A1=-diff(chi, t))


def project(q):
    """Drop arbitrary-element directions."""
    return VectorField.make({d: q[d] for d in BASE})


def fields_equal(q1, q2, chart=None):
    from .expr import is_zero

    q1._check(q2)
    return all(is_zero(q1[d] - q2[d], chart) for d in q1.directions)
