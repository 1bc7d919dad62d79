"""Point transformations of the Burgers-type classes and their group structure."""

from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp

from .expr import (
    DegenerateError,
    ExprError,
    FormalFunction,
    RewriteRule,
    consequence_closure,
    diff,
    function_class,
    inverse_rules,
    is_zero,
    substitute,
    t,
    u,
    x,
)
from .grammar import to_text
from .jet import BASE, VectorField, element_coord, total_derivative
from .symmetry import CLASSES, Equation, generic_element, on_solution


class NotAdmissibleError(ExprError):
    """An admissibility residual does not vanish."""

    def __init__(self, residual):
        super().__init__(f"not admissible: residual {to_text(residual)}")
        self.residual = residual


class NonInvertibleError(ExprError):
    pass


class ClosureError(ExprError):
    pass


# ---------------------------------------------------------------- records


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # "function" | "constant"
    expr: sp.Expr

    def to_json(self):
        return {"name": self.name, "kind": self.kind, "expr": to_text(self.expr)}


_ELEMENT_NAMES = sorted(set().union(*CLASSES.values()))


def _as_functions(e):
    """Source-element coordinates printed as the elements themselves, A2 -> A2(t, x)."""
    subs = {element_coord(n): generic_element(n) for n in _ELEMENT_NAMES}
    return sp.sympify(e).xreplace(subs)


@dataclass(frozen=True)
class PointTransformation:
    """Components on the joint space of variables and arbitrary elements.

    Element pushforwards are written at the old point: plain element
    coordinates stand for source values there.
    """

    family: str
    coords: tuple  # (("t", e), ("x", e), ("u", e))
    elements: tuple = ()  # ((name, e), ...)
    params: tuple = ()
    residuals: tuple = ()
    nondegenerate: tuple = ()
    rules: tuple = ()
    source: tuple = ()  # accepted class tags
    target: str = ""

    def coord(self, name):
        return dict(self.coords)[name]

    def element(self, name):
        return dict(self.elements)[name]

    @property
    def element_names(self):
        return tuple(n for n, _ in self.elements)

    def param(self, name):
        return next(p.expr for p in self.params if p.name == name)

    def to_json(self):
        return {
            "family": self.family,
            "coordinates": {n: to_text(e) for n, e in self.coords},
            "elements": {n: to_text(_as_functions(e)) for n, e in self.elements},
            "parameters": [p.to_json() for p in self.params],
            "nondegeneracy": [to_text(e) for e in self.nondegenerate],
            "admissibility": [to_text(e) for e in self.residuals],
        }


def _fn(name, *sig):
    return function_class(name, tuple({"t": t, "x": x}[s] for s in sig))(*(
        {"t": t, "x": x}[s] for s in sig))


def _const(name):
    return sp.Symbol(name, real=True)


def _E(name):
    return element_coord(name)


def _check_nondegenerate(exprs, what):
    for e in exprs:
        if is_zero(e):
            raise DegenerateError(f"{what}: nondegeneracy {to_text(e)} != 0 violated")


def _fun_or(value, name, *sig):
    return sp.sympify(value) if value is not None else _fn(name, *sig)


def _const_or(value, name):
    return sp.sympify(value) if value is not None else _const(name)


# ---------------------------------------------------------------- families


def b_equivalence(T=None, X=None, U1=None, U0=None, tag="", printed=False):
    """Admissible transformations within the general class (all elements).

    ``printed=True`` takes the source term without the factor U1 in the
    transformed B, as it is often stated; that form is wrong unless U1 = 1.
    """
    T = _fun_or(T, "T" + tag, "t")
    X = _fun_or(X, "X" + tag, "t", "x")
    U1 = _fun_or(U1, "U1" + tag, "t")
    U0 = _fun_or(U0, "U0" + tag, "t", "x")
    A0, A1, A2, B, C = (_E(n) for n in CLASSES["B"])
    Tt, Xx, Xt, Xxx = diff(T, t), diff(X, x), diff(X, t), diff(X, x, 2)
    U0x, U0xx, U1t = diff(U0, x), diff(U0, x, 2), diff(U1, t)
    elements = (
        ("A0", (A0 + U0x * C / U1 + U1t / U1) / Tt),
        ("A1", Xx / Tt * (A1 + Xxx * A2 / Xx + U0 * C / U1 - Xt / Xx)),
        ("A2", Xx**2 * A2 / Tt),
        ("B", ((1 if printed else U1) * B - U0 * U0x * C / U1 - U0xx * A2 - U0x * A1
               - U0 * A0 + diff(U0, t) - U0 * U1t / U1) / Tt),
        ("C", Xx * C / (Tt * U1)),
    )
    nondeg = (Tt * Xx * U1,)
    _check_nondegenerate(nondeg, "B-equiv")
    return PointTransformation(
        "B-equiv", (("t", T), ("x", X), ("u", U1 * u + U0)), elements,
        (Param("T", "function", T), Param("X", "function", X),
         Param("U1", "function", U1), Param("U0", "function", U0)),
        nondegenerate=nondeg, source=("B",), target="B")


def _l_targets(T, X, U1):
    A2, C = _E("A2"), _E("C")
    Tt, Xx = diff(T, t), diff(X, x)
    return (("A2", Xx**2 * A2 / Tt), ("C", Xx * C / (Tt * U1)))


def l_groupoid(T=None, X=None, U1=None, U0=None, tag=""):
    """Admissible transformations of the class with A0 = A1 = B = 0."""
    T = _fun_or(T, "T" + tag, "t")
    X = _fun_or(X, "X" + tag, "t", "x")
    U1 = _fun_or(U1, "U1" + tag, "t")
    U0 = _fun_or(U0, "U0" + tag, "t", "x")
    A2, C = _E("A2"), _E("C")
    residuals = (
        diff(X, t) - A2 * diff(X, x, 2) - U0 * C / U1 * diff(X, x),
        C * diff(U0, x) + diff(U1, t),
        U1 * diff(U0, t) - A2 * diff(U0, x, 2),
    )
    nondeg = (diff(T, t) * diff(X, x) * U1,)
    _check_nondegenerate(nondeg, "L-groupoid")
    return PointTransformation(
        "L-groupoid", (("t", T), ("x", X), ("u", U1 * u + U0)), _l_targets(T, X, U1),
        (Param("T", "function", T), Param("X", "function", X),
         Param("U1", "function", U1), Param("U0", "function", U0)),
        residuals, nondeg, source=("L",), target="L")


def l1_groupoid(T=None, X=None, U1=None, U0=None, tag=""):
    """Regular subclass: U1, U0 constant, X solves a Kolmogorov equation."""
    T = _fun_or(T, "T" + tag, "t")
    X = _fun_or(X, "X" + tag, "t", "x")
    U1 = _const_or(U1, "U1" + tag)
    U0 = _const_or(U0, "U0" + tag)
    A2, C = _E("A2"), _E("C")
    residuals = (diff(X, t) - A2 * diff(X, x, 2) - U0 * C / U1 * diff(X, x),)
    nondeg = (diff(T, t) * diff(X, x) * U1,)
    _check_nondegenerate(nondeg, "L1-groupoid")
    return PointTransformation(
        "L1-groupoid", (("t", T), ("x", X), ("u", U1 * u + U0)), _l_targets(T, X, U1),
        (Param("T", "function", T), Param("X", "function", X),
         Param("U1", "constant", U1), Param("U0", "constant", U0)),
        residuals, nondeg, source=("L",), target="L")


def l_equivalence(T=None, X1=None, X0=None, U1=None, tag=""):
    """Usual equivalence group of the class with A0 = A1 = B = 0."""
    T = _fun_or(T, "T" + tag, "t")
    X1, X0, U1 = (_const_or(v, n + tag) for v, n in ((X1, "X1"), (X0, "X0"), (U1, "U1")))
    A2, C = _E("A2"), _E("C")
    Tt = diff(T, t)
    nondeg = (Tt * X1 * U1,)
    _check_nondegenerate(nondeg, "L-equiv")
    return PointTransformation(
        "L-equiv", (("t", T), ("x", X1 * x + X0), ("u", U1 * u)),
        (("A2", X1**2 * A2 / Tt), ("C", X1 * C / (Tt * U1))),
        (Param("T", "function", T), Param("X1", "constant", X1),
         Param("X0", "constant", X0), Param("U1", "constant", U1)),
        nondegenerate=nondeg, source=("L",), target="L")


def hat_groupoid(T=None, X0=None, U1=None, U0=None, tag=""):
    """Admissible transformations of the class u_t = A2 u_xx + A1 u_x - u u_x."""
    T = _fun_or(T, "T" + tag, "t")
    X0 = _fun_or(X0, "X0" + tag, "t")
    U1 = _fun_or(U1, "U1" + tag, "t")
    U0 = _fun_or(U0, "U0" + tag, "t")
    A1, A2 = _E("A1"), _E("A2")
    Tt, U1t = diff(T, t), diff(U1, t)
    residuals = (diff(U1, t, 2) * x - diff(U0, t) - A1 * U1t,)
    elements = (
        ("A1", U1 * A1 - U1t * x + U0 - (diff(Tt * U1, t) * x + diff(X0, t)) / Tt),
        ("A2", Tt * U1**2 * A2),
    )
    nondeg = (Tt * U1,)
    _check_nondegenerate(nondeg, "Lhat-groupoid")
    return PointTransformation(
        "Lhat-groupoid",
        (("t", T), ("x", Tt * U1 * x + X0), ("u", U1 * u - U1t * x + U0)), elements,
        (Param("T", "function", T), Param("X0", "function", X0),
         Param("U1", "function", U1), Param("U0", "function", U0)),
        residuals, nondeg, source=("Lhat", "Lhat1"), target="Lhat")


def hat_equivalence(T=None, X0=None, U1=None, U0=None, tag=""):
    """Usual equivalence group of the hatted class."""
    T = _fun_or(T, "T" + tag, "t")
    X0 = _fun_or(X0, "X0" + tag, "t")
    U1 = _const_or(U1, "U1" + tag)
    U0 = _const_or(U0, "U0" + tag)
    A1, A2 = _E("A1"), _E("A2")
    Tt = diff(T, t)
    elements = (
        ("A1", U1 * A1 + U0 - (diff(T, t, 2) * U1 * x + diff(X0, t)) / Tt),
        ("A2", Tt * U1**2 * A2),
    )
    nondeg = (Tt * U1,)
    _check_nondegenerate(nondeg, "Ghat")
    return PointTransformation(
        "Ghat", (("t", T), ("x", Tt * U1 * x + X0), ("u", U1 * u + U0)), elements,
        (Param("T", "function", T), Param("X0", "function", X0),
         Param("U1", "constant", U1), Param("U0", "constant", U0)),
        nondegenerate=nondeg, source=("Lhat", "Lhat1"), target="Lhat")


def _hat0_targets(T, X0, U1, U00):
    A10, A11, A2 = _E("A10"), _E("A11"), _E("A2")
    Tt = diff(T, t)
    k = A11 - diff(T, t, 2) / Tt - 2 * diff(U1, t) / U1
    return (
        ("A10", U1 * A10 - diff(X0, t) / Tt + U00 - X0 / Tt * k),
        ("A11", k / Tt),
        ("A2", U1**2 * Tt * A2),
    )


def hat0_groupoid(T=None, X0=None, U1=None, U00=None, tag=""):
    """Admissible transformations of the subclass with A1 affine in x.

    The u-shift is named U00 here; it plays the role of U0 of the hatted
    class restricted to x-independent shifts.
    """
    T = _fun_or(T, "T" + tag, "t")
    X0 = _fun_or(X0, "X0" + tag, "t")
    U1 = _fun_or(U1, "U1" + tag, "t")
    U00 = _fun_or(U00, "U00" + tag, "t")
    A10, A11 = _E("A10"), _E("A11")
    U1t = diff(U1, t)
    residuals = (diff(U1, t, 2) - A11 * U1t, diff(U00, t) + A10 * U1t)
    Tt = diff(T, t)
    nondeg = (Tt * U1,)
    _check_nondegenerate(nondeg, "Lhat0-groupoid")
    return PointTransformation(
        "Lhat0-groupoid",
        (("t", T), ("x", Tt * U1 * x + X0), ("u", U1 * u - U1t * x + U00)),
        _hat0_targets(T, X0, U1, U00),
        (Param("T", "function", T), Param("X0", "function", X0),
         Param("U1", "function", U1), Param("U00", "function", U00)),
        residuals, nondeg, source=("Lhat0",), target="Lhat0")


# -- virtual elements


def _c(name, tag):
    return _const(name + tag)


def _y_targets(T, X0, c1, c0, c2, c1p, c0p, c3, Y0, Y1, Y2, printed=False):
    """Transformed virtual elements given the x-shift X0 (any expression).

    The c2 term of Y2 enters with a plus sign; ``printed=True`` gives the
    commonly stated minus sign, which breaks Y2_t = A10 exp(Y0) on the target.
    """
    s2 = -1 if printed else 1
    U = c1 * Y1 + c0
    delta = c1p * c0 - c1 * c0p
    Tt = diff(T, t)
    return (
        ("Y0", Y0 + sp.log(delta / (Tt * U**2))),
        ("Y1", (c1p * Y1 + c0p) / U),
        ("Y2", delta * Y2 / U - delta * X0 * sp.exp(Y0) / (Tt * U**2)
         + s2 * c2 * (c1p * Y1 + c0p) / U + c3),
    )


def _check_delta(c1, c0, c1p, c0p, family):
    delta = c1p * c0 - c1 * c0p
    if is_zero(delta):
        raise DegenerateError(f"{family}: delta = c1'c0 - c1c0' must be nonzero (delta*T_t > 0)")
    return delta


def generalized_group(T=None, Xbar=None, c=None, tag="", printed=False):
    """Generalized equivalence group of the class with virtual elements.

    ``Xbar`` may depend on t and on the virtual element coordinates.
    ``c`` maps c1, c0, c2, c1p, c0p, c3 to values.
    """
    T = _fun_or(T, "T" + tag, "t")
    Xbar = _fun_or(Xbar, "Xb" + tag, "t")
    cs = {n: _c(n, tag) for n in ("c1", "c0", "c2", "c1p", "c0p", "c3")}
    cs.update({k: sp.sympify(v) for k, v in (c or {}).items()})
    c1, c0, c2, c1p, c0p, c3 = (cs[n] for n in ("c1", "c0", "c2", "c1p", "c0p", "c3"))
    _check_delta(c1, c0, c1p, c0p, "Gbar0")
    A10, A11, A2, Y0, Y1, Y2 = (_E(n) for n in CLASSES["L0bar"])
    U = c1 * Y1 + c0
    # restricted total t-derivative on the joint space
    Dt = _restricted_dt
    DT = Dt(T)
    k = A11 - Dt(DT) / DT - 2 * c1 * sp.exp(Y0) / U
    elements = (
        ("A10", U * A10 - Dt(Xbar) / DT + c2 - c1 * Y2 - Xbar / DT * k),
        ("A11", k / DT),
        ("A2", DT * U**2 * A2),
    ) + _y_targets(T, Xbar, c1, c0, c2, c1p, c0p, c3, Y0, Y1, Y2, printed)
    params = (Param("T", "function", T), Param("Xbar", "function", Xbar)) + tuple(
        Param(n, "constant", cs[n]) for n in ("c1", "c0", "c2", "c1p", "c0p", "c3"))
    return PointTransformation(
        "Gbar0",
        (("t", T), ("x", DT * U * x + Xbar), ("u", U * u - c1 * sp.exp(Y0) * x + c2 - c1 * Y2)),
        elements, params, nondegenerate=(DT, U), source=("L0bar",), target="L0bar")


def _restricted_dt(e):
    """d/dt on the joint space with Y0_t = A11, Y1_t = e^Y0, Y2_t = A10 e^Y0.

    Derivatives of A10, A11 are not needed: parameters here never depend on them.
    """
    A10, A11, Y0, Y1, Y2 = (_E(n) for n in ("A10", "A11", "Y0", "Y1", "Y2"))
    if e.has(A10) or e.has(A11):
        raise ExprError("restricted derivative of parameters depending on A10, A11")
    return (diff(e, t) + A11 * diff(e, Y0) + sp.exp(Y0) * diff(e, Y1)
            + A10 * sp.exp(Y0) * diff(e, Y2))


def effective_group(T=None, Xbr=None, c=None, tag="", printed=False):
    """Effective generalized equivalence group; ``Xbr`` is a function of t.

    ``printed=True`` uses the A10 and Y2 components exactly as they are
    commonly stated; both differ from the ones induced by the group.
    """
    T = _fun_or(T, "T" + tag, "t")
    Xbr = _fun_or(Xbr, "Xbr" + tag, "t")
    cs = {n: _c(n, tag) for n in ("c1", "c0", "c2", "c1p", "c0p", "c3")}
    cs.update({k: sp.sympify(v) for k, v in (c or {}).items()})
    c1, c0, c2, c1p, c0p, c3 = (cs[n] for n in ("c1", "c0", "c2", "c1p", "c0p", "c3"))
    delta = _check_delta(c1, c0, c1p, c0p, "effective-G0")
    A10, A11, A2, Y0, Y1, Y2 = (_E(n) for n in CLASSES["L0bar"])
    U = c1 * Y1 + c0
    Tt = diff(T, t)
    h = sp.exp(-Y0 / 2)
    if printed:
        a10 = U * (A10 - h * Xbr * A11 / 2 - h * diff(Xbr, t)) + c1 * sp.exp(Y0 / 2) + c2 - c1 * Y1
    else:
        a10 = (U * (A10 - h * Xbr * A11 / 2 - h * diff(Xbr, t)) + c1 * sp.exp(Y0 / 2) * Xbr
               + c2 - c1 * Y2)
    elements = (
        ("A10", a10),
        ("A11", (A11 - diff(T, t, 2) / Tt - 2 * c1 * sp.exp(Y0) / U) / Tt),
        ("A2", Tt * U**2 * A2),
        ("Y0", Y0 + sp.log(delta / (Tt * U**2))),
        ("Y1", (c1p * Y1 + c0p) / U),
        ("Y2", delta * Y2 / U - delta * Xbr * sp.exp(Y0 / 2) / U
         + (-1 if printed else 1) * c2 * (c1p * Y1 + c0p) / U + c3),
    )
    params = (Param("T", "function", T), Param("Xbr", "function", Xbr)) + tuple(
        Param(n, "constant", cs[n]) for n in ("c1", "c0", "c2", "c1p", "c0p", "c3"))
    return PointTransformation(
        "effective-G0",
        (("t", T), ("x", Tt * U * (x + h * Xbr)), ("u", U * u - c1 * sp.exp(Y0) * x + c2 - c1 * Y2)),
        elements, params, nondegenerate=(Tt, U, delta), source=("L0bar",), target="L0bar")


def gauge(c1p=None, c0p=None, c3=None, tag=""):
    """Gauge transformations: same equation, shifted virtual elements."""
    c1p, c0p, c3 = (_const_or(v, n + tag) for v, n in ((c1p, "c1p"), (c0p, "c0p"), (c3, "c3")))
    if c1p.is_number and not c1p > 0:
        raise DegenerateError("gauge: c1' must be positive")
    Y0, Y1, Y2 = (_E(n) for n in ("Y0", "Y1", "Y2"))
    elements = tuple((n, _E(n)) for n in ("A10", "A11", "A2")) + (
        ("Y0", Y0 + sp.log(c1p)), ("Y1", c1p * Y1 + c0p), ("Y2", c1p * Y2 + c3))
    return PointTransformation(
        "gauge", (("t", t), ("x", x), ("u", u)), elements,
        tuple(Param(n, "constant", v) for n, v in (("c1p", c1p), ("c0p", c0p), ("c3", c3))),
        nondegenerate=(c1p,), source=("L0bar",), target="L0bar")


def moebius(alpha=None, beta=None, gamma=None, delta=None, kappa=None, mu1=None, mu0=None,
            tag=""):
    """Equivalence group of u_t + u u_x = A2 u_xx; parameters are projective."""
    names = ("alpha", "beta", "gamma", "delta", "kappa", "mu1", "mu0")
    vals = dict(zip(names, (alpha, beta, gamma, delta, kappa, mu1, mu0)))
    p = {n: _const_or(vals[n], n + tag) for n in names}
    a, b, g, d, k, m1, m0 = (p[n] for n in names)
    det = a * d - b * g
    nondeg = (det, k)
    _check_nondegenerate(nondeg, "moebius")
    coords = (
        ("t", (a * t + b) / (g * t + d)),
        ("x", (k * x + m1 * t + m0) / (g * t + d)),
        ("u", (k * (g * t + d) * u - k * g * x + m1 * d - m0 * g) / det),
    )
    return PointTransformation(
        "moebius", coords, (("A2", k**2 * _E("A2") / det),),
        tuple(Param(n, "constant", p[n]) for n in names),
        nondegenerate=nondeg, source=("L0prime",), target="L0prime")


def moebius_matrix(phi):
    """3x3 matrix acting projectively on (x, t, 1)."""
    v = {p.name: p.expr for p in phi.params}
    return sp.Matrix([[v["kappa"], v["mu1"], v["mu0"]],
                      [0, v["alpha"], v["beta"]],
                      [0, v["gamma"], v["delta"]]])


def moebius_from_matrix(m):
    return moebius(alpha=m[1, 1], beta=m[1, 2], gamma=m[2, 1], delta=m[2, 2],
                   kappa=m[0, 0], mu1=m[0, 1], mu0=m[0, 2])


def antiderivative(name, integrand, var=t):
    """Opaque antiderivative of ``integrand`` with its derivative rule."""
    F = function_class(name, (var,))
    rule = RewriteRule(derivative_class_of(F)(var), integrand, f"{name} is an antiderivative")
    return F(var), [rule]


def derivative_class_of(F):
    from .expr import derivative_class

    return derivative_class(F, 0)


def nonplanar_map(A=None, printed=False):
    """Map of u_t + u u_x + A_t/(2A) u = u_xx into the constant-C class.

    ``printed=True`` uses the time change with derivative sqrt(A) instead of
    1/sqrt(A); only the latter makes the nonlinearity coefficient one.
    """
    A = _fun_or(A, "A", "t")
    rate = sp.sqrt(A) if printed else 1 / sp.sqrt(A)
    T, rules = antiderivative("Tnp" if not printed else "Tnq", rate)
    base = b_equivalence(T=T, X=x, U1=sp.sqrt(A), U0=0)
    elements = tuple((n, substitute(e, rules)) for n, e in base.elements)
    return PointTransformation(
        "nonplanar-map", base.coords, elements,
        (Param("A", "function", A), Param("T", "function", T)),
        nondegenerate=(A,), rules=tuple(rules), source=("B",), target="B")


def nonplanar_equation(A=None):
    A = _fun_or(A, "A", "t")
    return Equation.make("B", A0=-diff(A, t) / (2 * A), A1=0, A2=1, B=0, C=1)


NONPLANAR_SAMPLES = (
    # A, explicit time change with T_t = 1/sqrt(A) on t > 0, expected g as a function of s
    (sp.S.One, t, sp.S.One),
    (t, 2 * sp.sqrt(t), t / 2),
    (t**2, sp.log(t), sp.exp(t)),
)


def nonplanar_check(printed_note=True):
    """The nonplanar equation goes to u_t + u u_x = g(t) u_xx with g = sqrt(A).

    Returns ``(items, notes)``; notes describe the map with rate sqrt(A).
    """
    items, notes = [], []
    A = _fn("A", "t")
    eq = nonplanar_equation(A)
    phi = nonplanar_map(A)
    new = transform_elements(phi, eq)
    want = {"C": 1, "A2": sp.sqrt(A), "A0": 0, "A1": 0, "B": 0}
    for n, w in want.items():
        d = positive_form(new.get(n, want[n]) - w)
        items.append(_item(f"opaque A: {n}~ = {to_text(sp.sympify(w))}", "nonplanar map",
                           is_zero(d), to_text(d)))
    res = positive_form(transformed_residual(phi, eq))
    items.append(_item("opaque A: chain-rule residual", "nonplanar map", is_zero(res),
                       to_text(res)))
    for a, T, g in NONPLANAR_SAMPLES:
        rate = positive_form(diff(T, t) - 1 / sp.sqrt(a))
        phi_s = b_equivalence(T=T, X=x, U1=sp.sqrt(a), U0=0)
        eq_s = nonplanar_equation(a)
        got = transform_elements(phi_s, eq_s)
        d = [positive_form(rate), positive_form(got["C"] - 1),
             positive_form(got["A2"] - g.xreplace({t: T}))]
        ok = all(is_zero(e) for e in d)
        items.append(_item(f"A = {to_text(a)}: T = {to_text(T)}, g = {to_text(g)}",
                           "nonplanar map", ok, "; ".join(to_text(e) for e in d)))
    if printed_note:
        q = nonplanar_map(A, printed=True)
        got = transform_elements(q, eq)
        c = positive_form(got["C"] - 1)
        if not is_zero(c):
            notes.append("time change with rate sqrt(A) gives C~ = "
                         f"{to_text(positive_form(got['C']))}, A2~ = "
                         f"{to_text(positive_form(got['A2']))}; rate 1/sqrt(A) is used")
    return items, notes


def f_map(C, A2, X):
    """Hatted image: x-hat = X with X_x = 1/C, t and u unchanged."""
    Xx, Xt = diff(X, x), diff(X, t)
    return PointTransformation(
        "F-map", (("t", t), ("x", X), ("u", u)),
        (("A1", diff(X, x, 2) * A2 - Xt), ("A2", Xx**2 * A2)),
        (Param("X", "function", X),),
        residuals=(Xx * C - 1,), source=("L",), target="Lhat")


# ---------------------------------------------------------------- application


def _element_map(eq, names):
    vals = {}
    for n in names:
        try:
            vals[_E(n)] = eq[n]
        except KeyError:
            pass
    return vals


def admissibility_residuals(phi, eq_src, eq_tgt=None):
    """The family's determining expressions evaluated on ``eq_src``.

    With ``eq_tgt`` the target elements are compared as well.
    """
    names = set(CLASSES[eq_src.cls]) | {"A0", "A1", "A2", "B", "C"}
    vals = _element_map(eq_src, names)
    rules = list(phi.rules) + list(eq_src.rules)
    out = [sp.expand(substitute(r.xreplace(vals), rules)) for r in phi.residuals]
    if eq_tgt is not None:
        at_old = transform_elements(phi, eq_src, check=False)
        for n, e in at_old.items():
            tgt = _at_old_point(phi, eq_tgt[n])
            out.append(sp.expand(substitute(e - tgt, rules)))
    return out


def _at_old_point(phi, e):
    return sp.sympify(e).xreplace({t: phi.coord("t"), x: phi.coord("x")})


def transform_elements(phi, eq, check=True):
    """Target elements at the old point, before relabeling."""
    if phi.source and eq.cls not in phi.source:
        raise ExprError(f"family {phi.family} does not act on class {eq.cls}")
    if check:
        for r in admissibility_residuals(phi, eq):
            if not is_zero(r):
                raise NotAdmissibleError(r)
    names = set(CLASSES[eq.cls]) | {"A0", "A1", "A2", "B", "C"}
    vals = _element_map(eq, names)
    rules = list(phi.rules) + list(eq.rules)
    return {n: substitute(e.xreplace(vals), rules) for n, e in phi.elements}


@dataclass
class Transformed:
    at_old: dict
    equation: Equation | None
    inverse: dict = field(default_factory=dict)
    convention: str = "target elements computed at the old point, then written in the new variables"

    def to_json(self):
        return {
            "convention": self.convention,
            "at_old_point": {n: to_text(e) for n, e in sorted(self.at_old.items())},
            "equation": self.equation.to_json() if self.equation is not None else None,
        }


def transform(phi, eq):
    at_old = transform_elements(phi, eq)
    target = phi.target or eq.cls
    try:
        inv, rules = inverse_coords(phi)
    except NonInvertibleError:
        if any(e.has(t) or e.has(x) for e in at_old.values()):
            return Transformed(at_old, None)
        inv, rules = {}, []
    new = {n: substitute(e.xreplace(inv), rules) for n, e in at_old.items()}
    names = CLASSES[target]
    kept = {n: new[n] for n in names if n in new}
    eqn = Equation.make(target, rules=tuple(eq.rules) + tuple(phi.rules) + tuple(rules), **kept)
    return Transformed(at_old, eqn, inv)


def apply(phi, eq):
    """Map ``eq`` by ``phi``; the result is written in plain variable names."""
    res = transform(phi, eq)
    if res.equation is None:
        raise NonInvertibleError("target elements depend on variables that cannot be inverted")
    return res.equation


def inverse_coords(phi):
    """Old (t, x, u) in terms of new variables, relabeled to plain names."""
    rules = []
    T = phi.coord("t")
    if T == t:
        t_old = t
    elif isinstance(T, FormalFunction) and T.args == (t,):
        inv, rules = inverse_rules(type(T), type(T).base + "inv")
        t_old = inv(t)
    elif not diff(T, t).has(t):
        a, b = _affine(T, t)
        t_old = (t - b) / a
    else:
        s = sp.Dummy("s")
        sols = sp.solve(sp.Eq(T, s), t, dict=True)
        if len(sols) != 1:
            raise NonInvertibleError(f"cannot invert t-component {to_text(T)}")
        t_old = sols[0][t].xreplace({s: t})
    X = phi.coord("x")
    a, b = _affine(X, x)
    sub_t = {t: t_old}
    x_old = ((x - b) / a).xreplace(sub_t)
    U = phi.coord("u")
    a, b = _affine(U, u)
    u_old = ((u - b) / a).xreplace({t: t_old, x: x_old})
    inv = {t: t_old, x: sp.sympify(x_old), u: sp.sympify(u_old)}
    return inv, list(rules)


def _affine(e, s):
    e = sp.expand(e)
    if e.has(s) and diff(diff(e, s), s) != 0:
        if not is_zero(diff(e, s, 2)):
            raise NonInvertibleError(f"component {to_text(e)} is not affine in {s}")
    a = diff(e, s)
    if is_zero(a):
        raise NonInvertibleError(f"component {to_text(e)} does not depend on {s}")
    return a, sp.expand(e - a * s)


# ---------------------------------------------------------------- composition


def compose(phi2, phi1, family=None):
    """phi2 after phi1, on the joint space; parameters recovered when possible."""
    sub = {t: phi1.coord("t"), x: phi1.coord("x"), u: phi1.coord("u")}
    sub.update({_E(n): e for n, e in phi1.elements})
    rules = tuple(phi1.rules) + tuple(r for r in phi2.rules if r not in phi1.rules)
    coords = tuple((n, substitute(e.xreplace(sub), rules)) for n, e in phi2.coords)
    names = list(phi1.element_names) + [n for n in phi2.element_names
                                        if n not in phi1.element_names]
    e1 = dict(phi1.elements)
    e2 = dict(phi2.elements)
    elements = []
    for n in names:
        if n in e2:
            elements.append((n, substitute(e2[n].xreplace(sub), rules)))
        else:
            elements.append((n, e1[n]))
    fam = family or (phi2.family if phi2.family == phi1.family else "composite")
    out = PointTransformation(fam, coords, tuple(elements), (), (), (), rules,
                              phi1.source, phi2.target)
    if fam in RECOVER:
        params = RECOVER[fam](out)
        rebuilt = FAMILY_BUILDERS[fam](params)
        if not same_transformation(out, rebuilt, simplifier=SIMPLIFIERS.get(fam)):
            raise ClosureError(f"composite is not in family {fam}")
        return PointTransformation(fam, coords, tuple(elements), rebuilt.params, (), (),
                                   rules, phi1.source, phi2.target)
    return out


def identity(family="identity", element_names=()):
    return PointTransformation(family, (("t", t), ("x", x), ("u", u)),
                               tuple((n, _E(n)) for n in element_names))


def same_transformation(a, b, chart=None, simplifier=None):
    """Componentwise equality (coordinates and shared elements)."""
    return not differing_components(a, b, chart, simplifier)


def differing_components(a, b, chart=None, simplifier=None):
    rules = list(a.rules) + [r for r in b.rules if r not in a.rules]
    prep = simplifier or (lambda e: e)
    out = []
    for n in BASE:
        d = substitute(a.coord(n) - b.coord(n), rules)
        if not is_zero(prep(d), chart):
            out.append((n, d))
    eb = dict(b.elements)
    for n, e in a.elements:
        if n in eb:
            d = substitute(e - eb[n], rules)
            if not is_zero(prep(d), chart):
                out.append((n, d))
    return out


def _coef(e, s):
    return sp.expand(diff(e, s))


def _recover_ghat(phi):
    T = phi.coord("t")
    U = sp.expand(phi.coord("u"))
    return {"T": T, "U1": _coef(U, u), "U0": U.xreplace({u: 0}),
            "X0": sp.expand(phi.coord("x")).xreplace({x: 0})}


def _recover_lequiv(phi):
    X = sp.expand(phi.coord("x"))
    return {"T": phi.coord("t"), "X1": _coef(X, x), "X0": X.xreplace({x: 0}),
            "U1": _coef(phi.coord("u"), u)}


def _recover_moebius(phi):
    # read the projective matrix off the t- and x-components
    num, den = sp.fraction(sp.cancel(sp.together(phi.coord("t"))))
    xn, xd = sp.fraction(sp.cancel(sp.together(phi.coord("x"))))
    num, den = sp.Poly(num, t), sp.Poly(den, t)
    ratio = sp.cancel(xd / den.as_expr())
    xn = sp.Poly(sp.expand(xn / ratio), x, t)
    return {"alpha": num.coeff_monomial(t), "beta": num.coeff_monomial(1),
            "gamma": den.coeff_monomial(t), "delta": den.coeff_monomial(1),
            "kappa": xn.coeff_monomial(x), "mu1": xn.coeff_monomial(t), "mu0": xn.coeff_monomial(1)}


def _recover_gauge(phi):
    Y1 = _E("Y1")
    e = sp.expand(phi.element("Y1"))
    e2 = sp.expand(phi.element("Y2"))
    return {"c1p": _coef(e, Y1), "c0p": e.xreplace({Y1: 0}), "c3": e2.xreplace({_E("Y2"): 0})}


def _recover_effective(phi):
    # constants are read off at Y = 0; the rebuild comparison validates them
    Y0, Y1, Y2 = (_E(n) for n in ("Y0", "Y1", "Y2"))
    origin = {Y0: 0, Y1: 0, Y2: 0}
    T = phi.coord("t")
    U = sp.cancel(diff(phi.coord("u"), u))
    c1 = sp.cancel(diff(U, Y1))
    c0 = sp.cancel(U - c1 * Y1)
    y1 = sp.cancel(phi.element("Y1") * U)
    c1p = sp.cancel(diff(y1, Y1))
    c0p = sp.cancel(y1 - c1p * Y1)
    c2 = sp.cancel(phi.coord("u").xreplace({u: 0, x: 0, Y2: 0}))
    Tt = diff(T, t)
    xbr = _factored(sp.cancel(phi.coord("x").xreplace({x: 0}).xreplace(origin) / (Tt * c0)))
    delta = c1p * c0 - c1 * c0p
    y2 = phi.element("Y2").xreplace(origin) - (-delta * xbr / c0 + c2 * c0p / c0)
    c3 = sp.cancel(_factored(y2))
    return {"T": T, "Xbr": xbr, "c1": c1, "c0": c0, "c2": c2, "c1p": c1p, "c0p": c0p, "c3": c3}


RECOVER = {
    "Ghat": _recover_ghat,
    "L-equiv": _recover_lequiv,
    "moebius": _recover_moebius,
    "gauge": _recover_gauge,
    "effective-G0": _recover_effective,
}

FAMILY_BUILDERS = {
    "Ghat": lambda p: hat_equivalence(**p),
    "L-equiv": lambda p: l_equivalence(**p),
    "moebius": lambda p: moebius(**p),
    "gauge": lambda p: gauge(**p),
    "effective-G0": lambda p: effective_group(T=p["T"], Xbr=p["Xbr"], c={
        k: p[k] for k in ("c1", "c0", "c2", "c1p", "c0p", "c3")}),
}


SIMPLIFIERS = {"effective-G0": lambda e: _factored(e), "gauge": lambda e: positive_form(e)}


def _positive_factors(b):
    """Factors of a positive ``b`` with no negative numeric factor left over."""
    coeff, rest = sp.factor(sp.cancel(b)).as_coeff_mul()
    rest = list(rest)
    if coeff < 0:
        for i, f in enumerate(rest):
            if f.is_Add:
                rest[i] = -f
                coeff = -coeff
                break
            if f.is_Pow and f.base.is_Add and f.exp.is_odd:
                rest[i] = (-f.base) ** f.exp
                coeff = -coeff
                break
    if coeff < 0:
        return None
    return [coeff] + rest


def _split_pow(p):
    fs = _positive_factors(p.base)
    if fs is None:
        return p
    return sp.Mul(*[f.base ** (f.exp * p.exp) if f.is_Pow else f**p.exp for f in fs])


def _split_log(a):
    fs = _positive_factors(a.args[0])
    if fs is None:
        return a
    out = []
    for f in fs:
        if f.is_Pow and f.exp.is_Rational:
            out.append(f.exp * sp.log(f.base))
        else:
            out.append(sp.log(f))
    return sp.Add(*out)


def positive_form(e):
    """Split powers and logs of products, valid when all factors are positive."""
    e = sp.sympify(e)
    e = e.replace(lambda a: isinstance(a, sp.log), _split_log)
    e = e.replace(lambda a: isinstance(a, sp.exp),
                  lambda a: sp.Mul(*[sp.exp(q) for q in sp.Add.make_args(sp.expand(a.args[0]))]))
    for _ in range(2):
        e = e.replace(lambda p: p.is_Pow and not p.exp.is_Integer and not p.base.is_Symbol,
                      _split_pow)
        e = e.replace(lambda a: isinstance(a, sp.Abs), lambda a: a.args[0])
        e = e.replace(lambda a: isinstance(a, sp.sign), lambda a: sp.S.One)
    return sp.powsimp(e, force=True, combine="exp")


# ---------------------------------------------------------------- inverses


def inverse_ghat(phi):
    p = {q.name: q.expr for q in phi.params}
    T = p["T"]
    inv, rules = inverse_rules(type(T), type(T).base + "inv")
    Ti = inv(t)
    Tt_at = diff(T, t).xreplace({t: Ti})
    X0i = -p["X0"].xreplace({t: Ti}) / (Tt_at * p["U1"])
    psi = hat_equivalence(T=Ti, X0=X0i, U1=1 / p["U1"], U0=-p["U0"] / p["U1"])
    return PointTransformation(psi.family, psi.coords, psi.elements, psi.params,
                               rules=tuple(rules), source=psi.source, target=psi.target)


def inverse_lequiv(phi):
    p = {q.name: q.expr for q in phi.params}
    T = p["T"]
    inv, rules = inverse_rules(type(T), type(T).base + "inv")
    psi = l_equivalence(T=inv(t), X1=1 / p["X1"], X0=-p["X0"] / p["X1"], U1=1 / p["U1"])
    return PointTransformation(psi.family, psi.coords, psi.elements, psi.params,
                               rules=tuple(rules), source=psi.source, target=psi.target)


def inverse_moebius(phi):
    return moebius_from_matrix(moebius_matrix(phi).adjugate())


INVERSES = {"Ghat": inverse_ghat, "L-equiv": inverse_lequiv, "moebius": inverse_moebius}


# ---------------------------------------------------------------- group axioms


@dataclass
class CheckItem:
    check: str
    anchor: str
    status: str  # pass | fail | indeterminate
    witness: str | None = None

    def to_json(self):
        d = {"check": self.check, "anchor": self.anchor, "status": self.status}
        if self.witness is not None:
            d["witness"] = self.witness
        return d


def _item(check, anchor, ok, witness=None):
    return CheckItem(check, anchor, "pass" if ok else "fail",
                     None if ok else (witness if witness is not None else "0 != 0"))


def _witness(diffs):
    return "; ".join(f"{n}: {to_text(d)}" for n, d in diffs) if diffs else None


def _is_identity(phi, chart=None, simplifier=None):
    idt = identity(element_names=phi.element_names)
    return differing_components(phi, idt, chart, simplifier)


GROUP_FAMILIES = {
    "Ghat": (lambda tag: hat_equivalence(tag=tag), ("A1", "A2"), "Lhat"),
    "L-equiv": (lambda tag: l_equivalence(tag=tag), ("A2", "C"), "L"),
    "moebius": (lambda tag: moebius(tag=tag), ("A2",), "L0prime"),
}


def group_axioms(family):
    """Closure, identity and inverse for a parametric group family."""
    build, names, _ = GROUP_FAMILIES[family]
    a, b = build("a"), build("b")
    items = []
    try:
        ab = compose(b, a)
        items.append(_item("closure", family, True))
    except ClosureError as exc:
        items.append(_item("closure", family, False, str(exc)))
        ab = None
    if family == "moebius":
        # the composite matrix is the product of the factors' matrices
        m = moebius_matrix(b) * moebius_matrix(a)
        d = differing_components(compose(b, a, family="composite"), moebius_from_matrix(m))
        items.append(_item("composite parameters: matrix product", family, not d, _witness(d)))
    elif family == "Ghat" and ab is not None:
        p = {q.name: q.expr for q in ab.params}
        pa = {q.name: q.expr for q in a.params}
        pb = {q.name: q.expr for q in b.params}
        expect = {
            "T": pb["T"].xreplace({t: pa["T"]}),
            "U1": pb["U1"] * pa["U1"],
            "U0": pb["U1"] * pa["U0"] + pb["U0"],
            "X0": diff(pb["T"], t).xreplace({t: pa["T"]}) * pb["U1"] * pa["X0"]
            + pb["X0"].xreplace({t: pa["T"]}),
        }
        bad = [(k, p[k] - v) for k, v in expect.items() if not is_zero(p[k] - v)]
        items.append(_item("composite parameters", family, not bad, _witness(bad)))
    idt = identity(element_names=names)
    for label, comp in (("left identity", compose(idt, a, family="composite")),
                        ("right identity", compose(a, idt, family="composite"))):
        d = differing_components(comp, a)
        items.append(_item(label, family, not d, _witness(d)))
    ai = INVERSES[family](a)
    for label, comp in (("left inverse", compose(ai, a, family="composite")),
                        ("right inverse", compose(a, ai, family="composite"))):
        d = _is_identity(comp)
        items.append(_item(label, family, not d, _witness(d)))
    return items


def element_pushforward_consistency(family="Ghat"):
    """Applying two elements in turn equals applying their composite once."""
    build, names, cls = GROUP_FAMILIES[family]
    a, b = build("a"), build("b")
    ab = compose(b, a)
    eq = Equation.make(cls) if cls != "L0prime" else Equation.make("L0prime")
    once = transform_elements(ab, eq)
    first = transform_elements(a, eq)
    sub = {_E(n): v for n, v in first.items()}
    sub.update({t: a.coord("t"), x: a.coord("x")})
    twice = {n: e.xreplace(sub) for n, e in b.elements}
    return all(is_zero(once[n] - twice[n]) for n in names)


# ---------------------------------------------------------------- independent oracle


def transformed_residual(phi, eq, target=None):
    """Target equation expressed in source jets, on solutions of ``eq``.

    Built from the chain rule alone; ``target`` defaults to the pushforward
    values of ``phi``. The result vanishes iff the triple is admissible
    (for families with t-only time change).
    """
    T, X, U = (phi.coord(n) for n in BASE)
    names = set(CLASSES[eq.cls]) | {"A0", "A1", "A2", "B", "C"}
    vals = _element_map(eq, names)
    rules = list(phi.rules) + list(eq.rules)
    T, X, U = (substitute(e.xreplace(vals), rules) for e in (T, X, U))
    if target is None:
        target = transform_elements(phi, eq, check=False)
    tgt = {n: sp.sympify(target.get(n, {"A0": 0, "A1": 0, "B": 0, "C": 1}.get(n, 0)))
           for n in ("A0", "A1", "A2", "B", "C")}
    if "A11" in target:
        tgt["A1"] = target["A11"] * X + target["A10"]
    # tgt["A1"] etc. are at the old point; x-dependence of hatted A1 is in old x
    Dx = lambda e: substitute(total_derivative(e, "x"), rules)  # noqa: E731
    Dt = lambda e: substitute(total_derivative(e, "t"), rules)  # noqa: E731
    Tt, Xx, Xt = Dt(T), Dx(X), Dt(X)
    if not is_zero(Dx(T)):
        raise ExprError("time change depends on x")
    ux_ = Dx(U) / Xx
    uxx_ = Dx(ux_) / Xx
    ut_ = (Dt(U) - Xt * ux_) / Tt
    lhs = (ut_ + tgt["C"] * U * ux_ - tgt["A2"] * uxx_ - tgt["A1"] * ux_ - tgt["A0"] * U
           - tgt["B"])
    return sp.expand(on_solution(eq, lhs))


# ---------------------------------------------------------------- vector fields


def pushforward_field(phi, q):
    """phi_* q for a base field, written in the new variables (relabeled)."""
    inv, rules = inverse_coords(phi)
    rules = list(rules) + list(phi.rules)
    comps = {}
    for n in BASE:
        comps[n] = substitute(q.on(phi.coord(n)).xreplace(inv), rules)
    return VectorField.make(comps)


def elementary(name, param=None):
    """Elementary transformations generating the projected hatted group."""
    if name == "D":
        return hat_equivalence(T=param if param is not None else _fn("T", "t"), X0=0, U1=1, U0=0)
    if name == "S1":
        return hat_equivalence(T=t, X0=0, U1=param if param is not None else _const("U1"), U0=0)
    if name == "S0":
        return hat_equivalence(T=t, X0=0, U1=1, U0=param if param is not None else _const("U0"))
    if name == "P":
        return hat_equivalence(T=t, X0=param if param is not None else _fn("X0", "t"), U1=1, U0=0)
    raise ExprError(f"unknown elementary transformation {name!r}")


def adjoint_table():
    """Every elementary transformation against every basis type, with expectation."""
    from .jet import D, P, S0, S1

    tau = _fn("tau", "t")
    chi = _fn("chi", "t")
    T = _fn("T", "t")
    X0 = _fn("X0", "t")
    U1, U0 = _const("U1"), _const("U0")
    inv_t = function_class("Tinv", (t,))(t)

    def at_inv(e):
        return e.xreplace({t: inv_t})

    fields = {"D(tau)": D(tau), "P(chi)": P(chi), "S0": S0(), "S1": S1()}
    expected = {
        ("D", "D(tau)"): D(at_inv(diff(T, t) * tau)),
        ("D", "P(chi)"): P(at_inv(diff(T, t) * chi)),
        ("S1", "S0"): U1 * S0(),
        ("S1", "P(chi)"): P(U1 * chi),
        ("S0", "S1"): S1() - U0 * S0(),
        ("P", "D(tau)"): D(tau) - P(X0 * diff(tau, t) - diff(X0, t) * tau),
        ("P", "S1"): S1() - P(X0),
    }
    params = {"D": T, "S1": U1, "S0": U0, "P": X0}
    rows = []
    for g in ("D", "S1", "S0", "P"):
        phi = elementary(g, params[g])
        _, rules = inverse_coords(phi)
        for fname, q in fields.items():
            got = pushforward_field(phi, q)
            want = expected.get((g, fname), q)
            listed = (g, fname) in expected
            ok = all(is_zero(substitute(got[d] - want[d], rules)) for d in BASE)
            rows.append({"transformation": g, "field": fname, "listed": listed, "ok": ok,
                         "image": got})
    return rows


def commutator_table():
    """The nonzero commutation relations of the projected algebra."""
    from .jet import D, P, S0, S1, fields_equal, lie_bracket

    t1, t2 = _fn("tau1", "t"), _fn("tau2", "t")
    tau, chi = _fn("tau", "t"), _fn("chi", "t")
    rels = [
        ("[D(tau1),D(tau2)] = D(tau1 tau2_t - tau1_t tau2)", lie_bracket(D(t1), D(t2)),
         D(t1 * diff(t2, t) - diff(t1, t) * t2)),
        ("[D(tau),P(chi)] = P(tau chi_t - tau_t chi)", lie_bracket(D(tau), P(chi)),
         P(tau * diff(chi, t) - diff(tau, t) * chi)),
        ("[S0,S1] = S0", lie_bracket(S0(), S1()), S0()),
        ("[P(chi),S1] = P(chi)", lie_bracket(P(chi), S1()), P(chi)),
    ]
    return [(name, fields_equal(got, want)) for name, got, want in rels]


# ---------------------------------------------------------------- virtual elements


def virtual_rules(A10, A11, order=3):
    Y0, Y1, Y2 = (generic_element(n) for n in ("Y0", "Y1", "Y2"))
    base = [
        RewriteRule(diff(Y0, t), A11, "Y0_t = A11"),
        RewriteRule(diff(Y1, t), sp.exp(Y0), "Y1_t = exp(Y0)"),
        RewriteRule(diff(Y2, t), A10 * sp.exp(Y0), "Y2_t = A10 exp(Y0)"),
    ]
    return consequence_closure(base, [t], order)


def virtual_extend(eq):
    """Attach the virtual elements Y0, Y1, Y2 with their defining rules."""
    if eq.cls != "Lhat0":
        raise ExprError("virtual extension needs an equation with A1 affine in x")
    rules = virtual_rules(eq["A10"], eq["A11"])
    return Equation.make("L0bar", rules=tuple(eq.rules) + tuple(rules), nonzero=eq.nonzero,
                         A10=eq["A10"], A11=eq["A11"], A2=eq["A2"])


def gauge_preserves_rules(phi=None):
    """Transformed virtual elements satisfy the same defining rules."""
    phi = phi or gauge()
    eq = virtual_extend(Equation.make("Lhat0"))
    new = transform_elements(phi, eq)
    Y0n, Y1n, Y2n = new["Y0"], new["Y1"], new["Y2"]
    checks = [
        diff(Y0n, t) - eq["A11"],
        diff(Y1n, t) - sp.exp(Y0n),
        diff(Y2n, t) - eq["A10"] * sp.exp(Y0n),
    ]
    return [is_zero(positive_form(substitute(c, eq.rules))) for c in checks]


# ---------------------------------------------------------------- effective group checks


def _virtual_equation():
    return virtual_extend(Equation.make("Lhat0"))


def groupoid_relabel_check(family="Gbar0", c=None, printed=False):
    """Derivation chains for the transformed virtual elements."""
    if family != "Gbar0":
        raise ExprError(f"relabel check is defined for Gbar0, not {family!r}")
    names = ("c1", "c0", "c2", "c1p", "c0p", "c3")
    cs = {n: _const(n) for n in names}
    cs.update({k: sp.sympify(v) for k, v in (c or {}).items()})
    c1, c0, c2, c1p, c0p, c3 = (cs[n] for n in names)
    _check_delta(c1, c0, c1p, c0p, "Gbar0")
    eq = _virtual_equation()
    rules = eq.rules
    T, X0 = _fn("T", "t"), _fn("X0", "t")
    Tt, Ttt = diff(T, t), diff(T, t, 2)
    A10, A11 = eq["A10"], eq["A11"]
    Y0, Y1, Y2 = (eq[n] for n in ("Y0", "Y1", "Y2"))
    U1 = c1 * Y1 + c0
    U00 = c2 - c1 * Y2
    tg = dict(_y_targets(T, X0, c1, c0, c2, c1p, c0p, c3, Y0, Y1, Y2, printed))
    hat = dict(_hat0_targets(T, X0, U1, U00))
    vals = {_E("A10"): A10, _E("A11"): A11, _E("A2"): eq["A2"]}
    a11_new = substitute(hat["A11"].xreplace(vals), rules)
    a10_new = substitute(hat["A10"].xreplace(vals), rules)

    def dt(e):
        return substitute(diff(e, t), rules)

    def eqv(a, b):
        return is_zero(positive_form(substitute(a - b, rules)))

    items = []
    # Y0: d/dt Y0~ = Y0~_t~ T_t = A11~ T_t = A11 - T_tt/T_t - 2 c1 Y1_t/(c1 Y1 + c0)
    chain = [
        ("d/dt Y0~", dt(tg["Y0"])),
        ("A11~ T_t", a11_new * Tt),
        ("A11 - T_tt/T_t - 2 c1 Y1_t/U1", A11 - Ttt / Tt - 2 * c1 * dt(Y1) / U1),
        ("(Y0 + ln(1/(|T_t| U1^2)))_t", dt(Y0 + sp.log(1 / (sp.Abs(Tt) * U1**2)))),
    ]
    items += _chain_items("Y0", chain, eqv, rules)
    chain = [
        ("d/dt Y1~", dt(tg["Y1"])),
        ("exp(Y0~) T_t", sp.exp(tg["Y0"]) * Tt),
    ]
    items += _chain_items("Y1", chain, eqv, rules)
    chain = [
        ("d/dt Y2~", dt(tg["Y2"])),
        ("A10~ exp(Y0~) T_t", a10_new * sp.exp(tg["Y0"]) * Tt),
    ]
    items += _chain_items("Y2", chain, eqv, rules)
    return items


def _chain_items(name, chain, eqv, rules=()):
    out = []
    for (la, a), (lb, b) in zip(chain, chain[1:]):
        ok = eqv(a, b)
        w = None if ok else to_text(sp.factor(sp.together(positive_form(substitute(a - b, rules)))))
        out.append(_item(f"{name}: {la} = {lb}", "virtual-element chain", ok, w))
    return out


def composition_identity():
    """Composite x-shift of two generalized-group elements with opaque shifts."""
    a = generalized_group(tag="a")
    b = generalized_group(tag="b")
    ab = compose(b, a, family="composite")
    X = sp.expand(ab.coord("x"))
    shift = X.xreplace({x: 0})
    pa = {p.name: p.expr for p in a.params}
    pb = {p.name: p.expr for p in b.params}
    y1_new = a.element("Y1")
    sub = {t: pa["T"]}
    U2 = pb["c1"] * y1_new + pb["c0"]
    expected = diff(pb["T"], t).xreplace(sub) * U2 * pa["Xbar"] + pb["Xbar"].xreplace(sub)
    return is_zero(shift - expected), shift, expected


def _ansatz_group(alpha, beta, tag):
    g = generalized_group(tag=tag)
    p = {q.name: q.expr for q in g.params}
    Y0, Y1 = _E("Y0"), _E("Y1")
    U = p["c1"] * Y1 + p["c0"]
    xb = diff(p["T"], t) * sp.exp(alpha * Y0) * U**beta * _fn("Xbr" + tag, "t")
    return generalized_group(T=p["T"], Xbar=xb, tag=tag)


def _factored(e):
    return positive_form(e)


def _log_coefficient(k):
    """log of a product of powers, with polynomial bases factored."""
    k = sp.factor(sp.sympify(k))
    k = k.replace(lambda p: p.is_Pow, lambda p: sp.factor(sp.cancel(p.base)) ** p.exp)
    return sp.expand_log(sp.log(positive_form(k)), force=True)


_ALPHA = sp.Symbol("alpha_", real=True)
_BETA = sp.Symbol("beta_", real=True)


def ansatz_conditions():
    """Polynomial conditions on the exponents of the shift ansatz.

    The composite shift divided by the ansatz must not depend on Y0, Y1;
    each shift function contributes a coefficient whose logarithmic
    derivatives in Y0, Y1 must vanish.
    """
    al, be = _ALPHA, _BETA
    a, b = _ansatz_group(al, be, "a"), _ansatz_group(al, be, "b")
    ab = compose(b, a, family="composite")
    shift = sp.expand(ab.coord("x")).xreplace({x: 0})
    U3 = sp.factor(sp.cancel(diff(ab.coord("u"), u)))
    T3 = ab.coord("t")
    Y0, Y1 = _E("Y0"), _E("Y1")
    ratio = shift / (diff(T3, t) * sp.exp(al * Y0) * U3**be)
    fa = _fn("Xbra", "t")
    fb = _fn("Xbrb", "t").xreplace({t: a.coord("t")})
    out = []
    for f in (fa, fb):
        k = ratio.xreplace({fa: 1 if f == fa else 0, fb: 1 if f == fb else 0})
        lg = _log_coefficient(k)
        for y in (Y0, Y1):
            num, _ = sp.fraction(sp.together(diff(lg, y)))
            out.append(sp.expand(num))
    return out


def _coefficient_equations(nums):
    eqs = []
    for num in nums:
        if num == 0:
            continue
        num = num.xreplace({g: sp.Dummy() for g in num.atoms(FormalFunction)})
        gens = [s for s in num.free_symbols if s not in (_ALPHA, _BETA)]
        eqs += sp.Poly(num, *gens).coeffs() if gens else [num]
    return eqs


def solve_ansatz_exponents(conditions=None):
    """Exponents making the composite shift follow the ansatz."""
    eqs = _coefficient_equations(conditions or ansatz_conditions())
    return sp.solve(eqs, [_ALPHA, _BETA], dict=True)


def ansatz_defect(alpha, beta, conditions=None):
    """Nonvanishing conditions for a concrete exponent pair (empty: accepted)."""
    conds = conditions or ansatz_conditions()
    out = []
    for c in conds:
        v = sp.expand(c.xreplace({_ALPHA: alpha, _BETA: beta}))
        if v != 0:
            out.append(v)
    return out


ANSATZ_GRID = [(a, b) for a in (-1, 0, sp.Rational(1, 2), 1) for b in (0, 1, 2)]


def effective_group_closure_check():
    items = []
    ok, shift, expected = composition_identity()
    items.append(_item("composite x-shift identity", "composite shift", ok,
                       None if ok else to_text(sp.expand(shift - expected))))
    conds = ansatz_conditions()
    sols = solve_ansatz_exponents(conds)
    target = {"alpha": sp.Rational(-1, 2), "beta": sp.S.One}
    got = [{str(k).rstrip("_"): v for k, v in s.items()} for s in sols]
    ok = got == [target]
    items.append(_item("ansatz exponents solved", "ansatz exponents", ok,
                       None if ok else str(got)))
    for al, be in [(sp.Rational(-1, 2), 1)] + ANSATZ_GRID:
        defect = ansatz_defect(al, be, conds)
        expect_ok = (al, be) == (sp.Rational(-1, 2), 1)
        verdict = "accepted" if not defect else "rejected"
        label = f"ansatz alpha={al}, beta={be} {verdict}"
        status = "pass" if (not defect) == expect_ok else "fail"
        witness = to_text(defect[0]) if defect else None
        if status == "fail" and witness is None:
            witness = "accepted although not the derived pair"
        items.append(CheckItem(label, "ansatz exponents", status, witness))
    # closure of the effective family
    a, b = effective_group(tag="a"), effective_group(tag="b")
    try:
        compose(b, a)
        items.append(_item("closure", "effective group", True))
    except ClosureError as exc:
        items.append(_item("closure", "effective group", False, str(exc)))
    ab = compose(b, a, family="composite")
    p = _recover_effective(ab)
    pa = {q.name: q.expr for q in a.params}
    pb = {q.name: q.expr for q in b.params}
    delta_a = pa["c1p"] * pa["c0"] - pa["c1"] * pa["c0p"]
    Tta = diff(pa["T"], t)
    expect = pa["Xbr"] + pb["Xbr"].xreplace({t: pa["T"]}) / sp.sqrt(delta_a * Tta)
    d = positive_form(p["Xbr"] - expect)
    items.append(_item("composite Xbr = Xbr1 + Xbr2(T1)/sqrt(delta1 T1_t)", "effective group",
                       is_zero(d), to_text(d)))
    # inverse element within the family
    inv_items = _effective_inverse(a)
    items += inv_items
    # gauge subgroup composed with itself
    g1, g2 = gauge(tag="a"), gauge(tag="b")
    try:
        compose(g2, g1)
        items.append(_item("gauge closure", "gauge subgroup", True))
    except ClosureError as exc:
        items.append(_item("gauge closure", "gauge subgroup", False, str(exc)))
    # the element pushforwards are induced by the coordinate change
    eq = _virtual_equation()
    res = transformed_residual(a, eq)
    ok = is_zero(positive_form(res))
    items.append(_item("pushforward admissible (chain-rule oracle)", "effective group", ok,
                       None if ok else to_text(res)))
    return items


def _effective_inverse(phi):
    p = {q.name: q.expr for q in phi.params}
    T = p["T"]
    inv, rules = inverse_rules(type(T), type(T).base + "inv")
    Ti = inv(t)
    m = sp.Matrix([[p["c1p"], p["c0p"]], [p["c1"], p["c0"]]])
    mi = m.inv()
    c2v, c3v = _const("c2v"), _const("c3v")
    delta = m.det()
    xbr = -sp.sqrt(delta * diff(T, t)).xreplace({t: Ti}) * p["Xbr"].xreplace({t: Ti})
    psi = effective_group(T=Ti, Xbr=xbr, c={"c1p": mi[0, 0], "c0p": mi[0, 1], "c1": mi[1, 0],
                                            "c0": mi[1, 1], "c2": c2v, "c3": c3v})
    psi = PointTransformation(psi.family, psi.coords, psi.elements, psi.params,
                              rules=tuple(rules), source=psi.source, target=psi.target)
    comp = compose(psi, phi, family="composite")
    q = _recover_effective(comp)
    sol = sp.solve([q["c2"], q["c3"]], [c2v, c3v], dict=True)
    if len(sol) != 1:
        return [_item("inverse exists", "effective group", False, str(sol))]
    psi = effective_group(T=Ti, Xbr=xbr, c={"c1p": mi[0, 0], "c0p": mi[0, 1], "c1": mi[1, 0],
                                            "c0": mi[1, 1], **{k.name[:2]: v for k, v in
                                                                sol[0].items()}})
    psi = PointTransformation(psi.family, psi.coords, psi.elements, psi.params,
                              rules=tuple(rules), source=psi.source, target=psi.target)
    comp = compose(psi, phi, family="composite")
    d = _is_identity(comp, simplifier=positive_form)
    return [_item("inverse exists", "effective group", not d, _witness(d))]


__all__ = [
    "PointTransformation", "Param", "NotAdmissibleError", "NonInvertibleError", "ClosureError",
    "b_equivalence", "l_groupoid", "l1_groupoid", "l_equivalence", "hat_groupoid",
    "hat_equivalence", "hat0_groupoid", "generalized_group", "effective_group", "gauge",
    "moebius", "nonplanar_map", "nonplanar_check", "f_map", "apply", "transform", "transform_elements",
    "admissibility_residuals", "compose", "pushforward_field", "group_axioms",
    "transformed_residual", "virtual_extend", "groupoid_relabel_check",
    "effective_group_closure_check", "adjoint_table", "commutator_table",
]
