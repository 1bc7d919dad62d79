"""Independent oracles, written with plain sympy only.

``polynomial_symmetries`` solves the invariance condition by brute force:
tau, xi, eta are general polynomials with unknown coefficients, the
condition is taken in evolutionary form (the linearization of the equation
applied to the characteristic), and the resulting linear system is solved.
Nothing from vcburgers is used, so agreement with the engine is evidence.
"""

import itertools

import sympy as sp

T, X, U = sp.symbols("t x u", real=True)


def _monomials(vars_, degree):
    out = []
    for powers in itertools.product(range(degree + 1), repeat=len(vars_)):
        if sum(powers) <= degree:
            out.append(sp.Mul(*[v**k for v, k in zip(vars_, powers)]))
    return out


def polynomial_symmetries(A2, A1, C, degree=2, x_positive=False):
    """Basis of point symmetries with polynomial coefficients of bounded degree.

    The equation is u_t + C u u_x = A2 u_xx + A1 u_x with coefficients in t, x.
    Returns a list of (tau, xi, eta) triples spanning the solution space.
    """
    x = sp.Symbol("x", positive=True) if x_positive else X
    A2, A1, C = (sp.sympify(e).xreplace({X: x}) for e in (A2, A1, C))
    mons = _monomials((T, x, U), degree)
    cs = sp.symbols(f"k0:{3 * len(mons)}")
    n = len(mons)
    tau = sum(c * m for c, m in zip(cs[:n], mons))
    xi = sum(c * m for c, m in zip(cs[n:2 * n], mons))
    eta = sum(c * m for c, m in zip(cs[2 * n:], mons))
    # jets as symbols p_ij = d^i_t d^j_x u
    p = {(i, j): sp.Symbol(f"p{i}{j}") for i in range(3) for j in range(4)}
    p[(0, 0)] = U

    def Dx(e):
        out = sp.diff(e, x)
        for (i, j), s in list(p.items()):
            if (i, j + 1) in p and e.has(s):
                out += p[(i, j + 1)] * sp.diff(e, s)
        return out

    def Dt(e):
        out = sp.diff(e, T)
        for (i, j), s in list(p.items()):
            if (i + 1, j) in p and e.has(s):
                out += p[(i + 1, j)] * sp.diff(e, s)
        return out

    Q = eta - tau * p[(1, 0)] - xi * p[(0, 1)]
    Qx = Dx(Q)
    lin = Dt(Q) + C * (Q * p[(0, 1)] + U * Qx) - A2 * Dx(Qx) - A1 * Qx
    # eliminate t-derivatives on solutions
    rhs = A2 * p[(0, 2)] + A1 * p[(0, 1)] - C * U * p[(0, 1)]
    sol = {p[(1, 0)]: rhs, p[(1, 1)]: Dx(rhs), p[(1, 2)]: Dx(Dx(rhs))}
    sol[p[(2, 0)]] = Dt(rhs).xreplace(sol)
    for _ in range(3):
        lin = lin.xreplace(sol)
    lin = sp.expand(lin)
    num, _ = sp.fraction(sp.together(lin))
    gens = [p[(0, 1)], p[(0, 2)], p[(0, 3)], U, T, x]
    gens += sorted(num.atoms(sp.Pow, sp.exp, sp.Abs) - {g for g in gens}, key=sp.default_sort_key)
    poly = sp.Poly(sp.expand(num), *[g for g in gens if num.has(g)])
    system = poly.coeffs()
    solution = sp.linsolve(system, cs)
    (vec,) = list(solution)
    free = sorted(set().union(*[v.free_symbols for v in vec]) & set(cs), key=str)
    basis = []
    for f in free:
        vals = [v.xreplace({g: (1 if g == f else 0) for g in free}) for v in vec]
        trip = tuple(sum(vals[k * n + i] * mons[i] for i in range(n)) for k in range(3))
        basis.append(tuple(e.xreplace({x: X}) for e in trip))
    return basis


CLASSICAL_BURGERS_ALGEBRA = [
    (1, 0, 0),
    (0, 1, 0),
    (0, T, 1),
    (2 * T, X, -U),
    (T**2, T * X, X - T * U),
]
