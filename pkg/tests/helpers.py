"""Shared builders for tests: parsing shorthands, closed forms used as
oracles, and seeded random triads."""

from fractions import Fraction

import numpy as np

from stochsym.expr import Const, Domain, cos, evaluate_points, exp, parse, sin, substitute
from stochsym.model import FiniteTransformation, InfinitesimalTransformation, Sde


def P(text, n=2):
    return parse(text, n)


def vec(*items):
    return [P(s) for s in items]


def mat(*rows):
    return [[P(s) for s in r] for r in rows]


R = "(x^2 + y^2)^(1/2)"
PUNCTURED = Domain((-10, -10), (10, 10), (P("x^2 + y^2"),), 0.001)
PLANE = Domain((-10, -10), (10, 10), (), 0.001)
UNIT = Domain((-1, -1), (1, 1))

B_SIGN_CORRECT = mat([f"x/{R}", f"y/{R}"], [f"-y/{R}", f"x/{R}"])
# same rotation field with the off-diagonal signs swapped; orthogonal, but not a
# solution of the reduction equations for the rotation symmetry
B_FLIPPED = mat([f"x/{R}", f"-y/{R}"], [f"y/{R}", f"x/{R}"])
ETA_RADIAL = P("1/(x^2 + y^2)")


def brownian(domain=PLANE):
    return Sde(vec("0", "0"), mat(["1", "0"], ["0", "1"]), domain)


def strong(*Y):
    return InfinitesimalTransformation(vec(*Y), mat(["0", "0"], ["0", "0"]), P("0"))


def radial_gauge(B=B_SIGN_CORRECT):
    return FiniteTransformation(vec("x", "y"), vec("x", "y"), B, ETA_RADIAL, PUNCTURED)


# ---------------------------------------------------------------------------
# random triads


def _rat(rng, lo=-3, hi=3, den=4):
    return Const(Fraction(int(rng.integers(lo * den, hi * den + 1)), den))


def _poly(rng, terms=3, scale=1):
    """Small random polynomial in x, y of degree <= 2."""
    x, y = P("x"), P("y")
    monos = [Const(1), x, y, x * x, x * y, y * y]
    out = Const(0)
    for k in rng.choice(len(monos), size=terms, replace=False):
        out = out + _rat(rng, -scale, scale) * monos[k]
    return out


def _nonzero(rng):
    c = _rat(rng, -2, 2)
    while c.value == 0:
        c = _rat(rng, -2, 2)
    return c


def random_triad(rng, domain=UNIT):
    """Triangular diffeomorphism with explicit inverse, B a rotation by a
    polynomial angle, eta = exp(polynomial)."""
    x, y = P("x"), P("y")
    a, c = _nonzero(rng), _nonzero(rng)
    b = _rat(rng)
    d = _rat(rng) * x * x + _rat(rng) * x
    phi = [a * x + b, c * y + d]
    xi = (x - b) / a
    phi_inv = [xi, (y - substitute(d, [xi, y])) / c]
    theta = _poly(rng, 2)
    B = [[cos(theta), -sin(theta)], [sin(theta), cos(theta)]]
    eta = exp(_poly(rng, 2, scale=1) / Const(2))
    return FiniteTransformation(phi, phi_inv, B, eta, domain, _image_box(phi, domain))


def _image_box(phi, domain):
    g = np.linspace(0, 1, 21)
    lo, hi = np.array(domain.low), np.array(domain.high)
    pts = np.array([lo + (hi - lo) * np.array([u, v]) for u in g for v in g])
    img = evaluate_points(list(phi), pts)
    return Domain(tuple(img.min(axis=0) - 0.5), tuple(img.max(axis=0) + 0.5))


def random_sde(rng, domain=UNIT):
    mu = [_poly(rng), _poly(rng)]
    sigma = [[Const(1) + _poly(rng, 2) / Const(4), _poly(rng, 2) / Const(4)],
             [_poly(rng, 2) / Const(4), Const(1) + _poly(rng, 2) / Const(4)]]
    return Sde(mu, sigma, domain)


def random_infinitesimal(rng):
    c = _poly(rng, 2)
    return InfinitesimalTransformation([_poly(rng), _poly(rng)], [[Const(0), c], [-c, Const(0)]], _poly(rng, 2))


def seeded(seed):
    return np.random.default_rng(seed)
