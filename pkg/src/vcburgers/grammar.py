"""Text grammar: precedence-climbing parser, canonical printer, JSON tree.

Precedence, tightest first: ``^`` (right associative), unary minus,
``* /``, ``+ -``.  Derivative atoms are written ``f_tx`` or
``D[f,{t,1},{x,1}]``; jet coordinates are ``u_t``, ``u_xx`` and so on.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import sympy as sp

from .expr import (
    FUNCTION,
    JET,
    PARAMETER,
    REGISTRY,
    VARIABLE,
    ExprError,
    FormalFunction,
    UnknownSymbolError,
    function_class,
)


class ParseError(ExprError):
    def __init__(self, message, pos):
        super().__init__(f"{message} at position {pos}")
        self.message = message
        self.pos = pos


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z][A-Za-z0-9]*(?:_[A-Za-z0-9]+)?)|(.))")
_BUILTINS = {"exp": sp.exp, "ln": sp.log, "abs": sp.Abs, "sgn": sp.sign}


@dataclass
class _Tok:
    kind: str  # num, id, op, end
    text: str
    pos: int


def _tokenize(text):
    toks, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        start = m.start(m.lastindex) if m.lastindex else pos
        if m.group(1):
            toks.append(_Tok("num", m.group(1), start))
        elif m.group(2):
            toks.append(_Tok("id", m.group(2), start))
        elif m.group(3):
            ch = m.group(3)
            if ch not in "+-*/^()[]{},":
                raise ParseError(f"unexpected character {ch!r}", start)
            toks.append(_Tok("op", ch, start))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


def jet_symbol(a, b):
    """The jet coordinate u with ``a`` t-derivatives and ``b`` x-derivatives."""
    if a == b == 0:
        return REGISTRY.variable("u")
    return REGISTRY.jet("u_" + "t" * a + "x" * b)


class _Parser:
    def __init__(self, text, auto):
        self.toks = _tokenize(text)
        self.i = 0
        self.auto = auto

    @property
    def tok(self):
        return self.toks[self.i]

    def take(self, text=None):
        tok = self.tok
        if text is not None and tok.text != text:
            raise ParseError(f"expected {text!r}", tok.pos)
        self.i += 1
        return tok

    def parse(self):
        if self.tok.kind == "end":
            raise ParseError("empty expression", 0)
        e = self.expr()
        if self.tok.kind != "end":
            raise ParseError(f"unexpected {self.tok.text!r}", self.tok.pos)
        return e

    def expr(self):
        e = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.take().text
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        e = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.take().text
            rhs = self.unary()
            e = e * rhs if op == "*" else e / rhs
        return e

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.take()
            return -self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            pos = self.take().pos
            ex = self.unary()
            if ex.free_symbols & _variable_like():
                raise ParseError("exponents may contain parameters only", pos)
            return base ** ex
        return base

    def args(self):
        self.take("(")
        out = [self.expr()]
        while self.tok.text == ",":
            self.take()
            out.append(self.expr())
        self.take(")")
        return out

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.take()
            return sp.Integer(int(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.take()
            e = self.expr()
            self.take(")")
            return e
        if tok.kind == "id":
            if tok.text == "D" and self.toks[self.i + 1].text == "[":
                return self.d_atom()
            return self.identifier()
        raise ParseError(f"unexpected {tok.text or 'end of input'!r}", tok.pos)

    def d_atom(self):
        start = self.take().pos
        self.take("[")
        name_tok = self.take()
        info = REGISTRY.get(name_tok.text)
        if info is None or info.kind != FUNCTION:
            raise UnknownSymbolError(f"unknown function {name_tok.text!r} at position {name_tok.pos}")
        sig = info.obj.signature
        mi = [0] * len(sig)
        while self.tok.text == ",":
            self.take()
            self.take("{")
            v = self.take()
            self.take(",")
            k = self.take()
            self.take("}")
            names = [s.name for s in sig]
            if v.text not in names or k.kind != "num":
                raise ParseError("bad derivative specification", v.pos)
            mi[names.index(v.text)] += int(k.text)
        self.take("]")
        cls = function_class(info.obj.base, sig, mi)
        return self.apply(cls, start)

    def apply(self, cls, pos):
        if self.tok.text == "(":
            a = self.args()
            if len(a) != len(cls.signature):
                raise ParseError(f"{cls.base} expects {len(cls.signature)} arguments", pos)
            return cls(*a)
        return cls(*cls.signature)

    def identifier(self):
        tok = self.take()
        name = tok.text
        if name in _BUILTINS and self.tok.text == "(":
            a = self.args()
            if len(a) != 1:
                raise ParseError(f"{name} takes one argument", tok.pos)
            return _BUILTINS[name](a[0])
        base, _, suffix = name.partition("_")
        if base == "u" and suffix:
            if set(suffix) - {"t", "x"}:
                raise ParseError(f"bad jet coordinate {name!r}", tok.pos)
            return jet_symbol(suffix.count("t"), suffix.count("x"))
        info = REGISTRY.get(base)
        if info is not None and info.kind == FUNCTION:
            sig = info.obj.signature
            mi = [0] * len(sig)
            names = [s.name for s in sig]
            for ch in suffix:
                if ch not in names:
                    raise ParseError(f"{base} has no argument {ch!r}", tok.pos)
                mi[names.index(ch)] += 1
            return self.apply(function_class(base, sig, mi), tok.pos)
        if suffix:
            info = REGISTRY.get(name)
            if info is None and self.auto and base and self.tok.text == "(":
                # derivative of a function first seen here: f_x(t, x)
                a = self.args()
                cls = self._infer_function(base, a, tok.pos)
                names = [v.name for v in cls.signature]
                if set(suffix) - set(names):
                    raise ParseError(f"{base} has no argument for suffix {suffix!r}", tok.pos)
                mi = [suffix.count(n) for n in names]
                return function_class(base, cls.signature, mi)(*a)
            if info is None:
                raise UnknownSymbolError(f"unknown symbol {name!r} at position {tok.pos}")
        else:
            info = REGISTRY.get(name)
        if info is not None:
            if info.kind == FUNCTION:
                return self.apply(info.obj, tok.pos)
            if self.tok.text == "(":
                raise ParseError(f"{name} is not a function", self.tok.pos)
            return info.obj
        if not self.auto:
            raise UnknownSymbolError(f"unknown symbol {name!r} at position {tok.pos}")
        if self.tok.text == "(":
            a = self.args()
            return self._infer_function(name, a, tok.pos)(*a)
        return REGISTRY.parameter(name)

    @staticmethod
    def _infer_function(name, a, pos):
        plain = [s for s in a if s.is_Symbol and REGISTRY.get(s.name)
                 and REGISTRY.get(s.name).kind == VARIABLE]
        if len(plain) == len(a) and len(set(a)) == len(a):
            sig = [s.name for s in a]
        elif len(a) == 1:
            sig = ["w"]
        else:
            raise ParseError(f"cannot infer signature of {name}", pos)
        return REGISTRY.function(name, sig)


def _variable_like():
    return {REGISTRY.get(n).obj for n in REGISTRY.names()
            if REGISTRY.get(n).kind in (VARIABLE, JET)}


def parse(text, auto=False):
    """Parse ``text``; unknown names raise unless ``auto`` registers them."""
    return _Parser(text, auto).parse()


# ---------------------------------------------------------------- printing


def _atom_text(e):
    if isinstance(e, FormalFunction):
        name = type(e).__name__
        return f"{name}({', '.join(to_text(a) for a in e.args)})"
    if isinstance(e, sp.exp):
        return f"exp({to_text(e.args[0])})"
    if isinstance(e, sp.log):
        return f"ln({to_text(e.args[0])})"
    if isinstance(e, sp.Abs):
        return f"abs({to_text(e.args[0])})"
    if isinstance(e, sp.sign):
        return f"sgn({to_text(e.args[0])})"
    if e is sp.E:
        return "exp(1)"
    if e.is_Symbol:
        return e.name
    if e.is_Integer:
        return str(e)
    raise ExprError(f"cannot print {e!r}")


def _factor_text(e):
    if e.is_Pow:
        b, ex = e.args
        if b is sp.E:
            return f"exp({to_text(ex)})"
        bt = _atom_text(b) if _is_atomic(b) else f"({to_text(b)})"
        if ex.is_Integer and ex > 0:
            return f"{bt}^{ex}"
        return f"{bt}^({to_text(ex)})"
    if _is_atomic(e) or not (e.is_Add or e.is_Mul or e.is_Rational):
        return _atom_text(e)
    return f"({to_text(e)})"


def _is_atomic(e):
    return (e.is_Symbol or isinstance(e, (FormalFunction, sp.exp, sp.log, sp.Abs, sp.sign))
            or (e.is_Integer and e >= 0) or e is sp.E)


def _term_text(e):
    """Text of a term with nonnegative coefficient (sign handled by caller)."""
    coeff, rest = e.as_coeff_Mul()
    factors = sorted(sp.Mul.make_args(rest), key=sp.default_sort_key) if rest != 1 else []
    parts = []
    if coeff != 1 or not factors:
        parts.append(str(coeff.p) if coeff.q == 1 else f"{coeff.p}/{coeff.q}")
    parts += [_factor_text(f) for f in factors]
    return "*".join(parts)


def to_text(e):
    """Canonical text form; reparses to the same expression."""
    e = sp.sympify(e)
    if e.is_Rational:
        return str(e.p) if e.q == 1 else f"{e.p}/{e.q}"
    terms = sorted(sp.Add.make_args(e), key=sp.default_sort_key)
    out = ""
    for i, term in enumerate(terms):
        coeff, _ = term.as_coeff_Mul()
        neg = coeff.is_negative
        body = _term_text(-term if neg else term)
        if i == 0:
            out = f"-{body}" if neg else body
        else:
            out += f" - {body}" if neg else f" + {body}"
    return out


def to_json(e):
    """JSON tree with a node kind and children."""
    e = sp.sympify(e)
    if e.is_Rational:
        return {"node": "num", "value": to_text(e)}
    if e.is_Symbol:
        info = REGISTRY.get(e.name)
        kind = info.kind if info else PARAMETER
        return {"node": "sym", "kind": kind, "name": e.name}
    if e is sp.E:
        return {"node": "exp", "children": [{"node": "num", "value": "1"}]}
    if isinstance(e, FormalFunction):
        return {"node": "fn", "name": e.base,
                "multiindex": {s.name: k for s, k in zip(e.signature, e.multiindex) if k},
                "children": [to_json(a) for a in e.args]}
    kinds = {sp.Add: "add", sp.Mul: "mul", sp.Pow: "pow", sp.exp: "exp", sp.log: "ln",
             sp.Abs: "abs", sp.sign: "sgn"}
    for cls, kind in kinds.items():
        if isinstance(e, cls):
            args = e.args
            if kind in ("add", "mul"):
                args = sorted(args, key=sp.default_sort_key)
            return {"node": kind, "children": [to_json(a) for a in args]}
    raise ExprError(f"cannot serialize {e!r}")


def from_json(tree):
    node = tree["node"]
    if node == "num":
        return sp.Rational(tree["value"])
    if node == "sym":
        info = REGISTRY.get(tree["name"])
        if info is None:
            raise UnknownSymbolError(tree["name"])
        return info.obj
    kids = [from_json(c) for c in tree.get("children", [])]
    if node == "fn":
        info = REGISTRY.get(tree["name"])
        if info is None:
            raise UnknownSymbolError(tree["name"])
        sig = info.obj.signature
        mi = [tree["multiindex"].get(s.name, 0) for s in sig]
        return function_class(info.obj.base, sig, mi)(*kids)
    if node == "add":
        return sp.Add(*kids)
    if node == "mul":
        return sp.Mul(*kids)
    if node == "pow":
        return sp.Pow(*kids)
    return {"exp": sp.exp, "ln": sp.log, "abs": sp.Abs, "sgn": sp.sign}[node](kids[0])


__all__ = ["ParseError", "parse", "to_text", "to_json", "from_json", "jet_symbol", "JET"]
