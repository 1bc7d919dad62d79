"""Invariance criterion, determining systems and classifying equations."""

from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp

from .expr import (
    ExprError,
    FormalFunction,
    diff,
    expand_terms,
    func,
    is_zero,
    param,
    substitute,
    t,
    u,
    x,
)
from .grammar import jet_symbol, to_text
from .jet import (
    VectorField,
    apply,
    field as make_field,
    jet_index,
    jets_in,
    lie_bracket,
    prolong,
    total_derivative_multi,
)

# element names and defaults per class
CLASSES = {
    "B": ("A0", "A1", "A2", "B", "C"),
    "L": ("A2", "C"),
    "Lhat": ("A1", "A2"),
    "Lhat1": ("A1", "A2"),
    "Lhat0": ("A10", "A11", "A2"),
    "L0prime": ("A2",),
    "L0bar": ("A10", "A11", "A2", "Y0", "Y1", "Y2"),
}
_DEFAULTS = {"A0": 0, "A1": 0, "B": 0, "C": 1}


class StructuralError(ExprError):
    """The residual is not polynomial in the splitting monomials."""


def generic_element(name):
    """The opaque arbitrary element ``name`` with its natural signature."""
    if name in ("A10", "A11", "Y0", "Y1", "Y2"):
        return func(name, "t")(t)
    return func(name, "t", "x")(t, x)


@dataclass(frozen=True)
class Equation:
    """An equation of a class, given by its arbitrary-element values."""

    cls: str
    elements: tuple  # ((name, expr), ...)
    rules: tuple = ()
    nonzero: tuple = ()
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    @classmethod
    def make(cls, class_tag, rules=(), nonzero=(), **elements):
        if class_tag not in CLASSES:
            raise ExprError(f"unknown class {class_tag!r}")
        names = CLASSES[class_tag]
        bad = set(elements) - set(names)
        if bad:
            raise ExprError(f"class {class_tag} has no elements {sorted(bad)}")
        items = tuple((n, sp.sympify(elements[n]) if n in elements else generic_element(n))
                      for n in names)
        return cls(class_tag, items, tuple(rules), tuple(sp.sympify(z) for z in nonzero))

    def __getitem__(self, name):
        d = dict(self.elements)
        if name in d:
            return d[name]
        if name == "A1" and "A11" in d:
            return d["A11"] * x + d["A10"]
        if name in _DEFAULTS:
            return sp.sympify(_DEFAULTS[name])
        raise KeyError(name)

    def with_rules(self, rules):
        return Equation(self.cls, self.elements, self.rules + tuple(rules), self.nonzero)

    def rhs(self):
        """Right-hand side of the equation solved for u_t."""
        ux, uxx = jet_symbol(0, 1), jet_symbol(0, 2)
        return (self["A2"] * uxx + self["A1"] * ux + self["A0"] * u + self["B"]
                - self["C"] * u * ux)

    def lhs(self):
        return jet_symbol(1, 0) - self.rhs()

    def solved(self, alpha):
        """u_alpha for alpha with a t-derivative, expressed through the equation."""
        alpha = tuple(alpha)
        if alpha not in self._cache:
            a, b = alpha
            self._cache[alpha] = total_derivative_multi(self.rhs(), (a - 1, b))
        return self._cache[alpha]

    def to_json(self):
        return {"class": self.cls, "elements": {n: to_text(e) for n, e in self.elements}}


def on_solution(eq, e):
    """Eliminate u_t and its differential consequences using the equation."""
    e = sp.sympify(e)
    for _ in range(20):
        js = [s for s in jets_in(e) if jet_index(s)[0] >= 1]
        if not js:
            break
        e = e.xreplace({s: eq.solved(jet_index(s)) for s in js})
    else:
        raise ExprError("on-solution substitution did not terminate")
    return substitute(e, eq.rules) if eq.rules else e


def invariance_residual(q, eq):
    """Second prolongation of ``q`` applied to the equation, on solutions."""
    if not q.is_base:
        raise ExprError("invariance residual needs a base vector field")
    q = q.map(lambda c: substitute(c, eq.rules)) if eq.rules else q
    r = on_solution(eq, apply(prolong(q), eq.lhs()))
    # u_xxx survives when tau depends on x; its coefficient then forces tau_x = 0
    return expand_terms(r)


def is_symmetry(q, eq, chart=None):
    return split_is_zero(invariance_residual(q, eq), chart)


def split_is_zero(r, chart=None):
    """Zero test coefficientwise over jet monomials (cheaper on big residuals)."""
    try:
        parts = split_terms(r, _is_jet, expanded=True)
    except StructuralError:
        return is_zero(r, chart)
    return all(is_zero(c, chart) for c in parts.values())


# ---------------------------------------------------------------- splitting


def _is_jet(a):
    return jet_index(a) is not None and a != u


def split_terms(e, is_generator, expanded=False):
    """Group the expanded ``e`` by monomials in the atoms accepted by ``is_generator``.

    Returns ``{monomial: coefficient}``; raises StructuralError when a
    generator occurs non-polynomially.  Pass ``expanded=True`` to skip the
    expansion when ``e`` is already a sum of expanded terms.
    """
    if not expanded:
        e = expand_terms(e)
    out: dict = {}
    for term in sp.Add.make_args(e):
        mono, rest = [], []
        for f in sp.Mul.make_args(term):
            base, ex = f.as_base_exp()
            if is_generator(base) and ex.is_Integer and ex > 0:
                mono.append(f)
            elif any(is_generator(a) for a in sp.preorder_traversal(f)):
                raise StructuralError(f"non-polynomial occurrence in {to_text(f)}")
            else:
                rest.append(f)
        out.setdefault(sp.Mul(*mono), []).append(sp.Mul(*rest))
    out = {k: sp.Add(*v) for k, v in out.items()}
    return {k: v for k, v in out.items() if v != 0}


def _u_free(e):
    return not e.has(u)


@dataclass
class DeterminingSystem:
    equations: list
    monomials: list
    residual: sp.Expr

    def reassemble(self):
        return sp.Add(*[c * m for c, m in zip(self.equations, self.monomials)])

    def to_json(self):
        return [{"monomial": to_text(m), "equation": to_text(c)}
                for m, c in zip(self.monomials, self.equations)]


def determining_system(eq, ansatz):
    """Split the invariance residual over jet monomials, then powers of u."""
    r = invariance_residual(ansatz, eq)
    by_jets = split_terms(r, _is_jet, expanded=True)
    eqs, monos = [], []
    for m in sorted(by_jets, key=sp.default_sort_key):
        c = by_jets[m]
        try:
            parts = split_terms(c, lambda a: a == u, expanded=True)
            if any(not _u_free(v) for v in parts.values()):
                raise StructuralError("u inside coefficients")
        except StructuralError:
            parts = {sp.S.One: c}
        for um in sorted(parts, key=sp.default_sort_key):
            eqs.append(parts[um])
            monos.append(m * um)
    return DeterminingSystem(eqs, monos, r)


def same_condition(e1, e2, chart=None):
    """Two conditions ``e = 0`` agree up to orientation."""
    return is_zero(e1 - e2, chart) or is_zero(e1 + e2, chart)


# ---------------------------------------------------------------- classifying equations


def restricted_ansatz(tau, chi, alpha, beta):
    """D(tau) + alpha S1 + beta S0 + P(chi) written out."""
    return make_field(t=tau, x=(diff(tau, t) + alpha) * x + chi, u=alpha * u + beta)


def classifying_equations(tau, chi, alpha, beta, a1, a2):
    """The two classifying conditions (each ``= 0``) for the hatted class."""
    tt = diff(tau, t)
    xi = (tt + alpha) * x + chi
    first = tau * diff(a2, t) + xi * diff(a2, x) - (tt + 2 * alpha) * a2
    second = (tau * diff(a1, t) + xi * diff(a1, x) - alpha * a1
              + diff(tau, t, 2) * x + diff(chi, t) - beta)
    return [first, second]


def verify_classifying_solution(tau, chi, alpha, beta, eq, chart=None):
    """True iff both classifying conditions vanish identically on ``eq``."""
    conds = classifying_equations(tau, chi, alpha, beta, eq["A1"], eq["A2"])
    return all(is_zero(substitute(c, eq.rules), chart) for c in conds)


@dataclass
class KernelResult:
    zero_kernel: bool
    conditions: list
    solution: dict


def _kernel_unknowns():
    tau = func("tau", "t")(t)
    chi = func("chi", "t")(t)
    return tau, chi, param("alpha"), param("beta")


def kernel_check(class_tag="Lhat1", eq=None):
    """Split the classifying system with respect to free elements."""
    if class_tag != "Lhat1":
        raise ExprError(f"kernel check not supported for class {class_tag!r}")
    eq = eq or Equation.make("Lhat1")
    tau, chi, alpha, beta = _kernel_unknowns()
    conds = classifying_equations(tau, chi, alpha, beta, eq["A1"], eq["A2"])
    free = {a for c in conds for a in c.atoms(FormalFunction) if a.base not in ("tau", "chi")}

    def gen(a):
        return a in free or a == x

    split = []
    for c in conds:
        split.extend(split_terms(c, gen).values())
    # identities in t: their t-derivatives hold too
    system = list(split)
    for _ in range(2):
        system += [diff(c, t) for c in system]
    unknown_atoms = sorted({a for c in system for a in c.atoms(FormalFunction)},
                           key=sp.default_sort_key) + [alpha, beta]
    unknown_atoms += [a for a in (tau, chi) if a not in unknown_atoms]
    dummies = [sp.Dummy() for _ in unknown_atoms]
    lin = [c.xreplace(dict(zip(unknown_atoms, dummies))) for c in system]
    (vec,) = list(sp.linsolve(lin, dummies))
    back = dict(zip(dummies, unknown_atoms))
    solution = {to_text(a): v.xreplace(back) for a, v in zip(unknown_atoms, vec)}
    zero = all(solution[to_text(a)] == 0 for a in (tau, chi, alpha, beta))
    return KernelResult(zero, split, solution)


# ---------------------------------------------------------------- algebra helpers


def _is_constant(f):
    return not (f.free_symbols & VARIABLE_LIKE or f.atoms(FormalFunction)
                or any(jet_index(s) is not None for s in f.free_symbols))


VARIABLE_LIKE = {t, x, u}


def group_by_variable_part(e):
    """``{variable part: constant coefficient}`` for the expanded ``e``."""
    out: dict = {}
    for term in sp.Add.make_args(sp.expand(e)):
        const, var = [], []
        for f in sp.Mul.make_args(term):
            (const if _is_constant(f) else var).append(f)
        key = sp.Mul(*var)
        out[key] = out.get(key, sp.S.Zero) + sp.Mul(*const)
    return out


def span_coefficients(q, basis, chart=None):
    """Constant coefficients expressing ``q`` in ``basis``, or None."""
    cs = [sp.Dummy(f"k{i}") for i in range(len(basis))]
    system = []
    for d in q.directions:
        e = q[d] - sum((c * b[d] for c, b in zip(cs, basis)), sp.S.Zero)
        system.extend(v for v in group_by_variable_part(e).values() if v != 0)
    if system:
        sol = sp.linsolve(system, cs)
        if not sol:
            return None
        vec = list(sol)[0]
        free = set().union(*[v.free_symbols for v in vec]) & set(cs)
        vals = [v.xreplace({f: 0 for f in free}) for v in vec]
    else:
        vals = [sp.S.Zero] * len(cs)
    rest = [q[d] - sum((v * b[d] for v, b in zip(vals, basis)), sp.S.Zero) for d in q.directions]
    if all(is_zero(r, chart) for r in rest):
        return vals
    return None


def bracket_closed(basis, chart=None):
    """Every pairwise bracket lies in the constant span of ``basis``."""
    for i in range(len(basis)):
        for j in range(i + 1, len(basis)):
            if span_coefficients(lie_bracket(basis[i], basis[j]), basis, chart) is None:
                return False
    return True


__all__ = [
    "Equation", "on_solution", "invariance_residual", "is_symmetry", "determining_system",
    "classifying_equations", "verify_classifying_solution", "kernel_check", "restricted_ansatz",
    "split_terms", "same_condition", "span_coefficients", "bracket_closed", "VectorField",
]
