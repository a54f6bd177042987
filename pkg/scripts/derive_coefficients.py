"""Re-derive the generating-function exponent symbolically and check it.

The closed forms in cvmdi.state_engine are driven by two frozen coefficient
sets (a1..i1 and a2..k2).  This script re-derives them from first principles
so nobody has to trust the transcription:

1.  Write the Wigner function of the displaced two-mode squeezed state, the
    Fock-ancilla and detector generating kernels, and linear source terms
    for the four quadratures of the kept modes.
2.  Integrate the Gaussian over all six phase-space variables (stationary
    quadratic form: Q = N^T M^{-1} N / 4 + C).
3.  Expand Q over the generating variables (s,t,u,v,w1,y1,w2,y2) and reduce
    each monomial coefficient with c = sqrt(1+a^2), R = sqrt(1-T^2).
4.  Assert symbolic equality against the frozen formulas, monomial by
    monomial, and freeze the derived expressions (srepr strings) into
    tests/golden/golden_exponent.json for the fast numeric unit test.

Runs in ~10 minutes (the 6x6 symbolic solve and the monomial extraction
dominate).  Conventions:
a = sinh r, c = cosh r, T = sqrt(tau), R = sqrt(1-tau), D = 1 + a^2 (1-T^2).
"""

import argparse
import pathlib
import sys

import sympy as sp

REPO_ROOT = pathlib.Path(__file__).resolve().parent.parent
GOLDEN_PATH = REPO_ROOT / "tests" / "golden" / "golden_exponent.json"

a = sp.Symbol("a", positive=True)           # sinh r
T = sp.Symbol("T", positive=True)           # sqrt(tau)
R = sp.Symbol("R", positive=True)           # sqrt(1 - tau), kept abstract while solving
d = sp.Symbol("d", positive=True)           # displacement
c = sp.sqrt(1 + a ** 2)                     # cosh r
s, t, u, v = sp.symbols("s t u v")
w1, y1, w2, y2 = sp.symbols("w1 y1 w2 y2")
GENS = (s, t, u, v, w1, y1, w2, y2)
I = sp.I


ch = sp.Symbol("ch", positive=True)  # cosh r, kept abstract while solving


def derive_exponent():
    """Gaussian phase-space integral -> quadratic exponent Q in the generators.

    Everything stays in the polynomial ring over (a, ch, T, R, d); the radical
    substitutions ch -> sqrt(1+a^2), R -> sqrt(1-T^2) happen later, one small
    monomial coefficient at a time (doing them on the full Q drives sympy into
    its slow symbolic-coefficient domain).
    """
    x1, p1, x2, p2, x3, p3 = sp.symbols("x1 p1 x2 p2 x3 p3")

    # inverse beam splitter on modes 2 (kept) and 3 (ancilla)
    x2b = T * x2 - R * x3
    p2b = T * p2 - R * p3
    x3b = R * x2 + T * x3
    p3b = R * p2 + T * p3

    # displaced two-mode squeezed Wigner exponent (modes 1, 2')
    e_state = -sp.Rational(1, 2) * (
        (x1 * ch - x2b * a - d) ** 2 + (p1 * ch + p2b * a) ** 2
        + (x2b * ch - x1 * a - d) ** 2 + (p1 * a + p2b * ch) ** 2)
    # Fock generating kernels: |m> enters on 3', n photons detected on 3
    e_ancilla = -(x3b ** 2 + p3b ** 2) / 2 + u * v \
        + u * (x3b + I * p3b) - v * (x3b - I * p3b)
    e_detect = -(x3 ** 2 + p3 ** 2) / 2 + s * t \
        + s * (x3 + I * p3) - t * (x3 - I * p3)
    e_source = w1 * x1 + y1 * p1 + w2 * x2 + y2 * p2

    E = sp.expand(e_state + e_ancilla + e_detect + e_source)

    xs = (x1, p1, x2, p2, x3, p3)
    M = sp.zeros(6, 6)
    for i in range(6):
        for j in range(6):
            if i == j:
                M[i, j] = -E.coeff(xs[i], 2)
            else:
                M[i, j] = -sp.Rational(1, 2) * E.coeff(xs[i], 1).coeff(xs[j], 1)
    N = sp.Matrix([E.coeff(x, 1).subs([(xx, 0) for xx in xs]) for x in xs])
    C = E.subs([(xx, 0) for xx in xs])

    Mred = M.applyfunc(reduce_rel)
    z = Mred.LUsolve(N)
    z = z.applyfunc(lambda e: sp.cancel(reduce_rel(sp.together(e))))
    return sp.expand((N.T * z)[0, 0] / 4 + C)


def reduce_rel(expr):
    """Reduce modulo ch^2 = 1 + a^2 and R^2 = 1 - T^2 (polynomial rewrite)."""
    expr = sp.expand(expr)
    expr = expr.subs(ch ** 4, (1 + a ** 2) ** 2).subs(ch ** 2, 1 + a ** 2)
    expr = expr.subs(R ** 4, (1 - T ** 2) ** 2).subs(R ** 2, 1 - T ** 2)
    return sp.expand(expr)


def _reduce_ideal(polynomial):
    """Polynomial remainder modulo {ch^2 - (1+a^2), R^2 - (1-T^2)}.

    Guarantees ch and R survive at most linearly, so substituting the
    radicals afterwards cannot square them back into Abs(T^2-1) artifacts
    (sympy does not know that T <= 1).
    """
    _, rem = sp.reduced(sp.expand(polynomial),
                        [ch ** 2 - (1 + a ** 2), R ** 2 - (1 - T ** 2)],
                        ch, R, a, T, d, order="lex")
    return rem


def cleaned_coefficients(Q):
    """{monomial-name: simplified coefficient} over (a, T, d) with radicals."""
    # sympy's cancel wraps sign-indeterminate factors in Abs while tidying
    # the solve output; physically tau = T^2 <= 1, so Abs(T^2-1) = 1 - T^2.
    # It also rewrites odd powers of R and ch as half-powers of R^2, ch^2;
    # fold those back so the coefficients stay polynomial until the end.
    Q = Q.xreplace({sp.Abs(T ** 2 - 1): 1 - T ** 2})
    Q = Q.xreplace({
        sp.sqrt(1 - T ** 2): R,
        (1 - T ** 2) ** sp.Rational(3, 2): R ** 3,
        sp.sqrt(a ** 2 + 1): ch,
        (a ** 2 + 1) ** sp.Rational(3, 2): ch ** 3,
    })
    leftovers = {p for p in Q.atoms(sp.Pow)
                 if p.exp.is_Rational and not p.exp.is_Integer}
    if leftovers:
        raise RuntimeError(f"unnormalized radicals in the exponent: {leftovers}")
    out = {}
    poly = sp.Poly(Q, *GENS)
    for monom, coeff in sorted(poly.terms(), key=lambda mc: (sum(mc[0]), mc[0])):
        name = "*".join(f"{g}**{e}" if e > 1 else f"{g}"
                        for g, e in zip(GENS, monom) if e) or "1"
        num, den = sp.fraction(sp.cancel(sp.together(coeff)))
        coeff = sp.cancel(_reduce_ideal(num) / _reduce_ideal(den))
        # only now that ch and R are at most linear, drop to the radicals
        out[name] = coeff.subs(ch, c).subs(R, sp.sqrt(1 - T ** 2))
    return out


def frozen_expected():
    """The engine's coefficient formulas as sympy expressions, monomial-keyed.

    Layout of the exponent, matching state_engine exactly: the detection
    block reads  -a1 st + b1 s + c1 t - d1 uv + e1 u + f1 v + g1 tu
    + h1 sv - i1  (with b1 = -c2, c1 = +c2, e1 = +sqrt(tau) c2,
    f1 = -sqrt(tau) c2), and the jet program's linear forms
        s: -(c2 + a2 (w1 - i y1) + b2 (w2 + i y2))
        t: +(c2 + a2 (w1 + i y1) + b2 (w2 - i y2))
        u: +(f2 + d2 (w1 - i y1) + e2 (w2 + i y2))
        v: -(f2 + d2 (w1 + i y1) + e2 (w2 - i y2))
    reproduce the same coefficients (f2 = sqrt(tau) c2 = e1; both sets share
    the single constant c2 = d (a+c) sqrt(1-tau) / (2D)).
    """
    tau = T ** 2
    omt = 1 - tau
    D = 1 + a ** 2 * omt
    c2 = d * (a + c) * sp.sqrt(omt) / (2 * D)
    a1 = a ** 2 * omt / D
    d1 = (1 + a ** 2) * omt / D
    g1 = -T / D
    i1 = d ** 2 * omt * (a + c) ** 2 / (4 * D)     # e^{2r} = (a + c)^2
    a2 = a * c * sp.sqrt(omt) / D
    b2 = a ** 2 * T * sp.sqrt(omt) / D
    d2 = T * a2
    e2 = (1 + a ** 2) * sp.sqrt(omt) / D
    g2 = d * (a * tau + c) / D
    h2 = d * T * (a + c) / D
    i2 = (1 + a ** 2 * (1 + tau)) / (2 * D)
    j2 = 2 * a * c * T / D

    return {
        "1": -i1,
        "s": -c2, "t": c2, "u": T * c2, "v": -T * c2,
        "s*t": -a1, "u*v": -d1, "t*u": g1, "s*v": g1,
        "s*w1": -a2, "s*y1": I * a2, "s*w2": -b2, "s*y2": -I * b2,
        "t*w1": a2, "t*y1": I * a2, "t*w2": b2, "t*y2": -I * b2,
        "u*w1": d2, "u*y1": -I * d2, "u*w2": e2, "u*y2": I * e2,
        "v*w1": -d2, "v*y1": -I * d2, "v*w2": -e2, "v*y2": I * e2,
        "w1": g2, "w2": h2,
        "w1**2": i2, "y1**2": i2, "w2**2": i2, "y2**2": i2,
        "w1*w2": j2, "y1*y2": -j2,
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--write-golden", action="store_true",
                        help=f"freeze derived expressions to {GOLDEN_PATH}")
    args = parser.parse_args(argv)

    print("deriving the exponent (about 5 minutes) ...", flush=True)
    Q = derive_exponent()
    print("extracting and reducing monomial coefficients (about 5 more) ...",
          flush=True)
    derived = cleaned_coefficients(Q)
    expected = frozen_expected()

    missing = sorted(set(expected) - set(derived))
    surplus = sorted(set(derived) - set(expected))
    if missing or surplus:
        print(f"monomial mismatch: missing {missing}, surplus {surplus}")
        return 1

    failures = []
    for name in sorted(expected):
        same = derived[name].equals(expected[name])  # fast sampling check
        if same is not True:
            same = sp.simplify(derived[name] - expected[name]) == 0
        if not same:
            failures.append(name)
            print(f"MISMATCH {name}:\n  derived  = {derived[name]}\n"
                  f"  expected = {expected[name]}")
        else:
            print(f"ok {name}")
    if failures:
        print(f"{len(failures)} coefficient(s) disagree")
        return 1

    print("all exponent coefficients match the frozen formulas")
    if args.write_golden:
        # local import so the package need not be installed to run the math
        sys.path.insert(0, str(REPO_ROOT / "src"))
        from cvmdi.serialize import write_json

        GOLDEN_PATH.parent.mkdir(parents=True, exist_ok=True)
        doc = {
            "description": "Monomial coefficients of the generating-function "
                           "exponent Q(s,t,u,v,w1,y1,w2,y2), derived by "
                           "Gaussian phase-space integration; symbols: "
                           "a = sinh r, T = sqrt(tau), d = displacement.",
            "generators": [str(g) for g in GENS],
            "coefficients": {k: sp.srepr(v) for k, v in derived.items()},
        }
        write_json(str(GOLDEN_PATH), doc)
        print(f"wrote {GOLDEN_PATH}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
