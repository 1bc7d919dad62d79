"""Exact symbolic kernel built on sympy.

Opaque functions are formal function classes whose partial derivatives are
themselves formal atoms (``A2_x(t, x)``), so mixed partials commute by
construction and the chain rule comes for free.  Zero testing maps an
expression to a rational function in frozen generators under the active
sign chart and checks the numerator.
"""

from __future__ import annotations

import contextlib
import threading
from dataclasses import dataclass, field
from functools import reduce
from math import lcm

import sympy as sp

VARIABLE = "variable"
PARAMETER = "parameter"
FUNCTION = "function"
JET = "jet"

CHARTS = ("xpos", "xneg", "both")
_CHART_ALIASES = {"x>0": "xpos", "x<0": "xneg", "xpos": "xpos", "xneg": "xneg", "both": "both"}


class ExprError(Exception):
    """Base error of the symbolic kernel."""


class UnknownSymbolError(ExprError):
    pass


class NonTerminationError(ExprError):
    def __init__(self, rule):
        super().__init__(f"rewrite depth bound exceeded by rule {rule.note or rule.pattern}")
        self.rule = rule


class DegenerateError(ExprError):
    """A quantity declared nonzero vanishes."""


# ---------------------------------------------------------------- formal functions


class FormalFunction(sp.Function):
    """Opaque smooth real function; derivatives are new formal atoms."""

    base: str = ""
    signature: tuple = ()
    multiindex: tuple = ()

    @classmethod
    def eval(cls, *args):
        return None

    def fdiff(self, argindex=1):
        return derivative_class(type(self), argindex - 1)(*self.args)

    def _eval_is_extended_real(self):
        return True

    def _sympystr(self, printer):
        from .grammar import to_text

        return to_text(self)


def _suffix(signature, multiindex):
    names = [s.name for s in signature]
    if all(len(n) == 1 for n in names):
        return "".join(n * k for n, k in zip(names, multiindex))
    return None


def _class_name(base, signature, multiindex):
    if not any(multiindex):
        return base
    suf = _suffix(signature, multiindex)
    if suf is not None:
        return f"{base}_{suf}"
    parts = ",".join(f"{{{s.name},{k}}}" for s, k in zip(signature, multiindex) if k)
    return f"D[{base},{parts}]"


_FUNC_CACHE: dict = {}
_LOCK = threading.RLock()


def function_class(base, signature, multiindex=None):
    """Return the unique formal class for ``base`` differentiated by ``multiindex``."""
    signature = tuple(signature)
    multiindex = tuple(multiindex) if multiindex is not None else (0,) * len(signature)
    key = (base, signature, multiindex)
    with _LOCK:
        cls = _FUNC_CACHE.get(key)
        if cls is None:
            cls = type(
                _class_name(base, signature, multiindex),
                (FormalFunction,),
                {"base": base, "signature": signature, "multiindex": multiindex,
                 "nargs": len(signature), "__module__": __name__},
            )
            _FUNC_CACHE[key] = cls
    return cls


def derivative_class(cls, index):
    mi = list(cls.multiindex)
    mi[index] += 1
    return function_class(cls.base, cls.signature, mi)


def is_formal(e):
    return isinstance(e, FormalFunction)


# ---------------------------------------------------------------- registry


@dataclass
class SymbolInfo:
    name: str
    kind: str
    obj: object
    signature: tuple = ()


class Registry:
    """Append-only symbol table; one sympy object per name."""

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict[str, SymbolInfo] = {}

    def get(self, name):
        return self._entries.get(name)

    def __contains__(self, name):
        return name in self._entries

    def names(self):
        return sorted(self._entries)

    def _add(self, name, kind, obj, signature=()):
        with self._lock:
            old = self._entries.get(name)
            if old is not None:
                if old.kind != kind or tuple(old.signature) != tuple(signature):
                    raise ExprError(f"symbol {name!r} already registered as {old.kind}")
                return old.obj
            self._entries[name] = SymbolInfo(name, kind, obj, tuple(signature))
            return obj

    def variable(self, name):
        return self._add(name, VARIABLE, sp.Symbol(name, real=True))

    def parameter(self, name, positive=False):
        info = self._entries.get(name)
        if info is not None:
            return self._add(name, PARAMETER, info.obj)
        sym = sp.Symbol(name, positive=True) if positive else sp.Symbol(name, real=True)
        return self._add(name, PARAMETER, sym)

    def jet(self, name):
        return self._add(name, JET, sp.Symbol(name, real=True))

    def function(self, name, signature):
        sig = tuple(self.variable(s) if isinstance(s, str) else s for s in signature)
        return self._add(name, FUNCTION, function_class(name, sig), [s.name for s in sig])


REGISTRY = Registry()

t = REGISTRY.variable("t")
x = REGISTRY.variable("x")
u = REGISTRY.variable("u")
w = REGISTRY.variable("w")  # formal argument of unary functions


def var(name):
    return REGISTRY.variable(name)


def param(name, positive=False):
    return REGISTRY.parameter(name, positive)


def params(names):
    return [param(n) for n in names.split()]


def func(name, *signature):
    """Register (or fetch) an opaque function; unary functions default to ``w``."""
    if not signature:
        signature = ("w",)
    return REGISTRY.function(name, signature)


# ---------------------------------------------------------------- session


@dataclass
class Session:
    chart: str = "both"
    nonzero: list = field(default_factory=list)

    def declare_nonzero(self, *exprs):
        for e in exprs:
            e = sp.sympify(e)
            if is_zero(e, self.chart):
                raise DegenerateError(f"declared nonzero quantity vanishes: {e}")
            self.nonzero.append(e)


_SESSION = threading.local()


def current_session():
    s = getattr(_SESSION, "value", None)
    if s is None:
        s = _SESSION.value = Session()
    return s


@contextlib.contextmanager
def session(chart="both"):
    prev = getattr(_SESSION, "value", None)
    _SESSION.value = Session(chart=normalize_chart(chart))
    try:
        yield _SESSION.value
    finally:
        _SESSION.value = prev


def normalize_chart(chart):
    if chart is None:
        return current_session().chart
    try:
        return _CHART_ALIASES[chart]
    except KeyError:
        raise ExprError(f"unknown chart {chart!r}") from None


def require_nonzero(e, what="quantity"):
    if is_zero(e):
        raise DegenerateError(f"{what} must be nonzero")
    return e


# ---------------------------------------------------------------- calculus


def _drop_delta(e):
    if e.has(sp.DiracDelta):
        e = e.replace(lambda a: isinstance(a, sp.DiracDelta), lambda a: sp.S.Zero)
    if e.has(sp.Derivative):
        # left unevaluated when sympy cannot decide the argument is real
        e = e.replace(lambda a: isinstance(a, sp.Derivative) and isinstance(a.expr, sp.sign),
                      lambda a: sp.S.Zero)
    return e


def expand_terms(e):
    """Distribute products and integer powers of sums; leave exp, log and radicals alone."""
    return sp.expand(e, power_exp=False, power_base=False, log=False)


def diff(e, s, n=1):
    """Partial derivative; ``sgn`` is locally constant away from zero."""
    e = sp.sympify(e)
    for _ in range(n):
        e = _drop_delta(sp.diff(e, s))
    return e


def specialize(e, fcls, form):
    """Replace every application of ``fcls`` and its derivatives by ``form``.

    ``form`` is written in the function's signature variables.
    """
    targets = [a for a in sp.sympify(e).atoms(FormalFunction)
               if a.base == fcls.base and a.signature == fcls.signature]
    if not targets:
        return e
    mapping = {}
    for a in targets:
        d = form
        for s, k in zip(a.signature, a.multiindex):
            d = diff(d, s, k)
        mapping[a] = d.xreplace(dict(zip(a.signature, a.args)))
    return _drop_delta(sp.sympify(e).xreplace(mapping))


def normalize(e):
    return sp.expand(sp.sympify(e))


# ---------------------------------------------------------------- rewriting


@dataclass(frozen=True)
class RewriteRule:
    """``pattern -> replacement``; the pattern may contain sympy Wilds."""

    pattern: sp.Expr
    replacement: sp.Expr
    note: str = ""

    @property
    def is_wild(self):
        return bool(self.pattern.atoms(sp.Wild))


MAX_DEPTH = 40


def substitute(e, rules, depth=MAX_DEPTH):
    """Apply rules to a fixpoint, raising if the depth bound is exceeded."""
    e = sp.sympify(e)
    rules = list(rules)
    if not rules:
        return e
    exact = {r.pattern: r.replacement for r in rules if not r.is_wild}
    wild = [r for r in rules if r.is_wild]
    last = None
    for _ in range(depth):
        new = e.xreplace(exact) if exact else e
        if new != e:
            last = next((r for r in rules if not r.is_wild and e.has(r.pattern)), last)
        for r in wild:
            nxt = new.replace(r.pattern, r.replacement)
            if nxt != new:
                last = r
                new = nxt
        if new == e:
            return _drop_delta(e)
        e = new
    raise NonTerminationError(last or rules[0])


def derive_consequences(rule, s):
    """The rule for the ``s``-derivative of the rule's pattern."""
    pat = diff(rule.pattern, s)
    if not is_formal(pat):
        raise ExprError("pattern must be a single formal atom")
    rhs = substitute(diff(rule.replacement, s), [rule])
    note = f"{rule.note}; d/d{s}" if rule.note else f"d/d{s}"
    return RewriteRule(pat, rhs, note)


def consequence_closure(rules, variables, order=3):
    """Close rules under differentiation until patterns reach total order ``order``."""
    out = list(rules)
    frontier = list(rules)
    while frontier:
        nxt = []
        for r in frontier:
            if sum(r.pattern.multiindex) >= order:
                continue
            for s in variables:
                if s not in r.pattern.signature:
                    continue
                c = derive_consequences(RewriteRule(r.pattern, r.replacement, r.note), s)
                c = RewriteRule(c.pattern, substitute(c.replacement, out), c.note)
                if all(c.pattern != o.pattern for o in out):
                    out.append(c)
                    nxt.append(c)
        frontier = nxt
    # replacements may still mention later-derived patterns
    return [RewriteRule(r.pattern, substitute(r.replacement, out), r.note) for r in out]


def inverse_rules(fcls, inv_name=None):
    """Rules making ``inv`` the inverse of the unary function ``fcls``."""
    sig = fcls.signature
    inv = function_class(inv_name or fcls.base + "inv", sig)
    a = sp.Wild("a")
    d_f = derivative_class(fcls, 0)
    d_inv = derivative_class(inv, 0)
    rules = [
        RewriteRule(fcls(inv(a)), a, f"{fcls.base} o inverse"),
        RewriteRule(inv(fcls(a)), a, f"inverse o {fcls.base}"),
        RewriteRule(d_inv(a), 1 / d_f(inv(a)), "inverse derivative"),
    ]
    # higher derivatives of the inverse, by differentiating 1/f'(inv(s))
    s = sp.Dummy("s")
    expr, cls = 1 / d_f(inv(s)), d_inv
    for k in (2, 3):
        expr = diff(expr, s).xreplace({d_inv(s): 1 / d_f(inv(s))})
        cls = derivative_class(cls, 0)
        rules.append(RewriteRule(cls(a), expr.xreplace({s: a}), f"inverse derivative {k}"))
    return inv, rules


# ---------------------------------------------------------------- zero testing


def apply_chart(e, chart):
    if chart == "xpos":
        return e.xreplace({sp.Abs(x): x, sp.sign(x): sp.S.One})
    if chart == "xneg":
        return e.xreplace({sp.Abs(x): -x, sp.sign(x): -sp.S.One})
    return e


def _freeze(e, atoms, prefix):
    mapping = {a: sp.Dummy(f"{prefix}{i}", real=True) for i, a in enumerate(
        sorted(atoms, key=sp.default_sort_key))}
    return e.xreplace(mapping)


def _factor_abs(a):
    """|z1 z2^k| -> |z1| |z2|^k and sgn likewise, for integer k."""
    fn = type(a)
    out = []
    for f in sp.Mul.make_args(a.args[0]):
        b, k = f.as_base_exp()
        if k.is_Integer:
            out.append(fn(b) ** (k if fn is sp.Abs else k % 2))
        else:
            out.append(fn(f))
    return sp.Mul(*out)


def _split_signs(e):
    """abs(z) -> a, sgn(z) -> s, z -> s*a with a > 0 and s^2 = 1."""
    # |(|z|)| = |z| and sgn(|z|) = 1 off z = 0
    e = e.replace(lambda a: isinstance(a, (sp.Abs, sp.sign)) and isinstance(a.args[0], sp.Abs),
                  lambda a: a.args[0] if isinstance(a, sp.Abs) else sp.S.One)
    e = e.replace(lambda a: isinstance(a, (sp.Abs, sp.sign)) and a.args[0].is_Mul, _factor_abs)
    args = {a.args[0] for a in e.atoms(sp.Abs, sp.sign)}
    signs = []
    # compound arguments first: replacing a symbol would change them
    for z in sorted(args, key=lambda z: (z.is_Symbol, sp.default_sort_key(z))):
        a = sp.Dummy("a", positive=True)
        s = sp.Dummy("s", real=True)
        signs.append(s)
        if z.is_Symbol:
            e = e.xreplace({sp.Abs(z): a, sp.sign(z): s})
            e = e.xreplace({z: s * a})
        elif _integer_powers_only(e, sp.Abs(z)):
            # |z| = sgn(z) z keeps the relation with z itself
            e = e.xreplace({sp.Abs(z): s * z, sp.sign(z): s})
        else:
            # an independent positive |z| is sound, if less complete
            e = e.xreplace({sp.Abs(z): a, sp.sign(z): s})
    return _reduce_signs(e, signs), signs


def _integer_powers_only(e, a):
    return all(p.exp.is_Integer for p in e.atoms(sp.Pow) if p.base == a)


def _reduce_signs(e, signs):
    for s in signs:
        e = e.replace(
            lambda p, s=s: p.is_Pow and p.base == s and p.exp.is_Integer and not 0 <= p.exp <= 1,
            lambda p: p.base ** (p.exp % 2),
        )
    return e


def _rational_exponents_lcm(values):
    return reduce(lcm, [sp.Rational(v).q for v in values], 1)


def _group_exps(e):
    atoms = [a for a in e.atoms(sp.exp)]
    if not atoms:
        return e
    groups: dict = {}
    for a in atoms:
        c, m = a.args[0].as_coeff_Mul()
        groups.setdefault(m, []).append((a, c))
    mapping = {}
    for m, items in sorted(groups.items(), key=lambda kv: sp.default_sort_key(kv[0])):
        q = _rational_exponents_lcm([c for _, c in items if c.is_Rational] or [1])
        g = sp.Dummy("E", positive=True)
        for a, c in items:
            if c.is_Rational:
                mapping[a] = g ** int(c * q)
            else:
                mapping[a] = sp.Dummy("E", positive=True)
    return e.xreplace(mapping)


def _exponent_parts(ex):
    """Rational part and {monomial: rational coefficient} of an exponent."""
    ex = sp.expand(sp.cancel(sp.together(ex)))
    r, parts = sp.S.Zero, {}
    for term in sp.Add.make_args(ex):
        if term.is_Rational:
            r += term
            continue
        c, m = term.as_coeff_Mul()
        parts[m] = parts.get(m, sp.S.Zero) + c
    return r, {m: c for m, c in parts.items() if c != 0}


def _group_powers(e):
    """Write powers of one base through a root g and one symbol per exponent monomial."""
    pows = [p for p in e.atoms(sp.Pow) if not p.exp.is_Integer]
    if not pows:
        return e, []
    by_base: dict = {}
    for p in pows:
        by_base.setdefault(p.base, []).append(p)
    mapping, roots, reduce_ = {}, {}, []
    for base in sorted(by_base, key=sp.default_sort_key):
        split = {p: _exponent_parts(p.exp) for p in by_base[base]}
        q = _rational_exponents_lcm([r for r, _ in split.values()])
        monos = sorted({m for _, parts in split.values() for m in parts}, key=sp.default_sort_key)
        qm = {m: _rational_exponents_lcm([parts[m] for _, parts in split.values() if m in parts])
              for m in monos}
        positive = bool(base.is_positive)
        hs = {m: sp.Dummy("H", positive=positive) for m in monos}
        g = sp.Dummy("G", positive=positive)
        for p, (r, parts) in split.items():
            h = sp.Mul(*[hs[m] ** int(c * qm[m]) for m, c in parts.items()])
            k = int(r * q)
            if base.is_Symbol:
                mapping[p] = h * g ** k
            else:
                n, rem = divmod(k, q)
                mapping[p] = h * base ** n * g ** rem
        if base.is_Symbol:
            roots[base] = g ** q
        elif q > 1:
            reduce_.append((g, q, base))
    return e.xreplace(mapping).xreplace(roots), reduce_


def _reduce_roots(e, reduce_):
    """Replace g**k (k >= q) by base**(k//q) * g**(k%q) for each root g of a base."""
    for g, q, base in reduce_:
        e = e.replace(lambda p, g=g, q=q: p.is_Pow and p.base == g and p.exp.is_Integer
                      and p.exp >= q,
                      lambda p, g=g, q=q, base=base: base ** int(p.exp // q) * g ** int(p.exp % q))
    return e


def _split_exp(a):
    return sp.Mul(*[sp.exp(term) for term in sp.Add.make_args(sp.expand(a.args[0]))])


def _expand(e):
    e = e.replace(lambda a: isinstance(a, sp.exp), _split_exp)
    return sp.expand(e, power_exp=False, power_base=True, mul=True, multinomial=True, log=False)


def canonical_numerator(e, chart=None):
    """Numerator of ``e`` as a polynomial in frozen generators."""
    chart = normalize_chart(chart)
    e = _drop_delta(sp.sympify(e))
    if e.is_Number:
        return e
    e = apply_chart(e, chart)
    e = _freeze(e, e.atoms(FormalFunction), "f")
    e, signs = _split_signs(e)
    e = sp.expand_log(e, force=True)
    e = _freeze(e, e.atoms(sp.log), "L")
    e = _expand(e)
    e = _group_exps(e)
    e, reduce_ = _group_powers(e)
    num, _ = sp.fraction(sp.together(e))
    num = sp.expand(num)
    if reduce_:
        num, _ = sp.fraction(sp.together(_reduce_roots(num, reduce_)))
        num = sp.expand(num)
    if signs:
        num = sp.expand(_reduce_signs(num, signs))
    return num


def is_zero(e, chart=None):
    e = sp.sympify(e)
    if e == 0:
        return True
    return canonical_numerator(e, chart) == 0


def equal(a, b, chart=None):
    return is_zero(sp.sympify(a) - sp.sympify(b), chart)


def tidy(e):
    """Presentation form: sign powers reduced, z sgn(z) merged to |z|, cancelled."""
    e = sp.sympify(e)
    e = e.replace(lambda p: p.is_Pow and isinstance(p.base, sp.sign) and p.exp.is_Integer,
                  lambda p: p.base ** (p.exp % 2))
    e = sp.expand(e)
    if e.has(sp.sign):
        e = sp.Add(*[_merge_sign(term) for term in sp.Add.make_args(e)])
    return sp.powsimp(sp.factor(sp.cancel(sp.together(e))))


def _merge_sign(term):
    fs = list(sp.Mul.make_args(term))
    for i, f in enumerate(fs):
        if not isinstance(f, sp.sign):
            continue
        z = f.args[0]
        for j, g in enumerate(fs):
            b, k = g.as_base_exp()
            if b == z and k.is_Integer:
                fs[i], fs[j] = sp.Abs(z), z ** (k - 1)
                break
            if b == sp.Abs(z):
                fs[i], fs[j] = z, sp.Abs(z) ** (k - 1)
                break
    return sp.Mul(*fs)


def formal_atoms(e, base=None):
    atoms = sp.sympify(e).atoms(FormalFunction)
    if base is not None:
        atoms = {a for a in atoms if a.base == base}
    return sorted(atoms, key=sp.default_sort_key)
