"""Algebra of stochastic transformations: the transformed SDE, group
operations, push-forward and pull-back of infinitesimal transformations, and
numerically integrated one-parameter flows."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
import numpy as np

from .expr import (
    ONE, DimensionError, Domain, EPS_ZERO, N_ZERO, differentiate, evaluate_points,
    lambdify, sqrt, substitute, zero_test,
)
from .model import (
    FiniteTransformation, InfinitesimalTransformation, Sde, compose_mat, compose_vec,
    directional, directional_mat, generator_apply, jacobian, mat_add, mat_scale, matmul, matvec, transpose,
)


class TransformError(ValueError):
    pass


class FlowExitError(RuntimeError):
    """The flow left the domain before reaching the requested parameter."""

    def __init__(self, a_exit: float, message: str | None = None):
        self.a_exit = a_exit
        super().__init__(message or f"flow left the domain at a = {a_exit:.6g}")


def _check_shapes(T: FiniteTransformation, n: int, m: int, what: str) -> None:
    if T.n != n or T.m != m:
        raise DimensionError(f"transformation is (n={T.n}, m={T.m}) but {what} is (n={n}, m={m})")


def transform_sde(T: FiniteTransformation, sde: Sde) -> Sde:
    """Coefficients of ``E_T(mu, sigma)``.

    ``mu' = ((1/eta) L(Phi)) o Phi^{-1}`` and
    ``sigma' = ((1/sqrt(eta)) D(Phi) . sigma . B^T) o Phi^{-1}``, with the
    inverse of ``B`` realised as its transpose.
    """
    _check_shapes(T, sde.n, sde.m, "sde")
    eta = evaluate_points(T.eta, T.domain.sample(N_ZERO))
    eta = eta[~np.isnan(eta)]
    if eta.size == 0 or eta.min() <= 0:
        raise TransformError("eta is not positive on the domain")

    inv_eta = ONE / T.eta
    mu = tuple(inv_eta * generator_apply(sde, phi) for phi in T.phi)
    sig = matmul(matmul(jacobian(T.phi, sde.n), sde.sigma), transpose(T.bmat))
    sig = mat_scale(ONE / sqrt(T.eta), sig)
    return Sde(compose_vec(mu, T.phi_inverse), compose_mat(sig, T.phi_inverse), T.target)


def compose(T2: FiniteTransformation, T1: FiniteTransformation) -> FiniteTransformation:
    """``T2 o T1 = (Phi2 o Phi1, (B2 o Phi1) . B1, (eta2 o Phi1) eta1)``."""
    _check_shapes(T2, T1.n, T1.m, "T1")
    return FiniteTransformation(
        compose_vec(T2.phi, T1.phi),
        compose_vec(T1.phi_inverse, T2.phi_inverse),
        matmul(compose_mat(T2.bmat, T1.phi), T1.bmat),
        substitute(T2.eta, T1.phi) * T1.eta,
        T1.domain,
        T2.target,
    )


def invert(T: FiniteTransformation) -> FiniteTransformation:
    """``T^{-1} = (Phi^{-1}, (B o Phi^{-1})^T, 1 / (eta o Phi^{-1}))``."""
    return FiniteTransformation(
        T.phi_inverse,
        T.phi,
        transpose(compose_mat(T.bmat, T.phi_inverse)),
        ONE / substitute(T.eta, T.phi_inverse),
        T.target,
        T.domain,
    )


def pushforward(T: FiniteTransformation, V: InfinitesimalTransformation) -> InfinitesimalTransformation:
    """``T_*(V)``: ``((D(Phi) Y) o Phi^{-1}, (B C B^T + Y(B) B^T) o Phi^{-1},
    (tau + Y(eta)/eta) o Phi^{-1})``."""
    _check_shapes(T, V.n, V.m, "V")
    Y = matvec(jacobian(T.phi, T.n), V.Y)
    Bt = transpose(T.bmat)
    C = mat_add(matmul(matmul(T.bmat, V.C), Bt), matmul(directional_mat(V.Y, T.bmat), Bt))
    tau = V.tau + directional(V.Y, T.eta) / T.eta
    inv = T.phi_inverse
    return InfinitesimalTransformation(compose_vec(Y, inv), compose_mat(C, inv), substitute(tau, inv))


def pullback(T: FiniteTransformation, V: InfinitesimalTransformation) -> InfinitesimalTransformation:
    """``T^*(V) = (T^{-1})_*(V)``."""
    return pushforward(invert(T), V)


# ---------------------------------------------------------------------------
# componentwise comparison helpers


def _all_zero(exprs, domain: Domain, eps: float) -> tuple[bool, float]:
    ok, worst = True, 0.0
    for e in exprs:
        r = zero_test(e, domain, eps)
        ok &= r.passed
        worst = max(worst, r.worst)
    return ok, worst


def triads_equal(T1: FiniteTransformation, T2: FiniteTransformation, domain: Domain | None = None,
                 eps: float = EPS_ZERO) -> bool:
    """Componentwise identity test of two finite triads (inverse included)."""
    if (T1.n, T1.m) != (T2.n, T2.m):
        return False
    dom = domain or T1.domain
    diffs = [a - b for a, b in zip(T1.phi, T2.phi)]
    diffs += [a - b for ra, rb in zip(T1.bmat, T2.bmat) for a, b in zip(ra, rb)]
    diffs.append(T1.eta - T2.eta)
    ok, _ = _all_zero(diffs, dom, eps)
    if not ok:
        return False
    inv = [a - b for a, b in zip(T1.phi_inverse, T2.phi_inverse)]
    return _all_zero(inv, T1.target if domain is None else domain, eps)[0]


def infinitesimals_equal(V1: InfinitesimalTransformation, V2: InfinitesimalTransformation,
                         domain: Domain, eps: float = EPS_ZERO) -> bool:
    if (V1.n, V1.m) != (V2.n, V2.m):
        return False
    diffs = [a - b for a, b in zip(V1.Y, V2.Y)]
    diffs += [a - b for ra, rb in zip(V1.C, V2.C) for a, b in zip(ra, rb)]
    diffs.append(V1.tau - V2.tau)
    return _all_zero(diffs, domain, eps)[0]


def sdes_equal(s1: Sde, s2: Sde, domain: Domain | None = None, eps: float = EPS_ZERO) -> bool:
    if (s1.n, s1.m) != (s2.n, s2.m):
        return False
    diffs = [a - b for a, b in zip(s1.mu, s2.mu)]
    diffs += [a - b for ra, rb in zip(s1.sigma, s2.sigma) for a, b in zip(ra, rb)]
    return _all_zero(diffs, domain or s1.domain, eps)[0]


# ---------------------------------------------------------------------------
# one-parameter flows


@dataclass
class FlowResult:
    """Numerically integrated triad ``(Phi_a, B_a, eta_a)`` on a point grid.

    ``jac[p, l, i] = d_i Phi_a^l`` and ``hess[p, l, i, j] = d_i d_j Phi_a^l``
    come from the variational equations integrated alongside the flow.
    """

    a: float
    points: np.ndarray
    phi: np.ndarray
    jac: np.ndarray
    hess: np.ndarray
    B: np.ndarray
    eta: np.ndarray
    h_flow: float
    steps: int

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def to_csv(self, path=None) -> str:
        """Rows ``a, point, p_i..., phi_i..., B_ij..., eta``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n, m = self.n, self.m
        header = ["a", "point"] + [f"p{i + 1}" for i in range(n)] + [f"phi{i + 1}" for i in range(n)]
        header += [f"B{i + 1}{j + 1}" for i in range(m) for j in range(m)] + ["eta"]
        w.writerow(header)
        for k in range(len(self.points)):
            row = [repr(self.a), k] + [repr(float(v)) for v in self.points[k]] + [repr(float(v)) for v in self.phi[k]]
            row += [repr(float(v)) for v in self.B[k].ravel()] + [repr(float(self.eta[k]))]
            w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _flow_fields(V: InfinitesimalTransformation):
    n, m = V.n, V.m
    DY = jacobian(V.Y, n)
    D2Y = [differentiate(DY[l][k], q) for l in range(n) for k in range(n) for q in range(n)]
    flat = list(V.Y) + [e for r in DY for e in r] + D2Y + [e for r in V.C for e in r] + [V.tau]
    f = lambdify(flat)
    sizes = [n, n * n, n ** 3, m * m, 1]
    offsets = np.cumsum([0] + sizes)

    def fields(x):
        vals = f(x)
        N = x.shape[0]
        Y = vals[:, offsets[0]:offsets[1]]
        dy = vals[:, offsets[1]:offsets[2]].reshape(N, n, n)
        d2y = vals[:, offsets[2]:offsets[3]].reshape(N, n, n, n)
        C = vals[:, offsets[3]:offsets[4]].reshape(N, m, m)
        tau = vals[:, offsets[4]]
        return Y, dy, d2y, C, tau

    return fields


def flow(V: InfinitesimalTransformation, a_max: float, grid, h_flow: float | None = None,
         domain: Domain | None = None) -> FlowResult:
    """Integrate ``dPhi/da = Y(Phi)``, ``dB/da = C(Phi) B``,
    ``deta/da = tau(Phi) eta`` from the identity with classical RK4.

    The first and second spatial derivatives of ``Phi_a`` are integrated with
    it.  ``h_flow`` defaults to ``1e-3 * |a_max|``.  With ``domain`` given, a
    :class:`FlowExitError` is raised as soon as a grid point leaves it.
    """
    pts = np.atleast_2d(np.asarray(grid, dtype=float))
    N, n = pts.shape
    if n != V.n:
        raise DimensionError(f"grid has dimension {n}, field has {V.n}")
    m = V.m
    if domain is not None and not domain.contains(pts).all():
        raise FlowExitError(0.0, "grid points outside the domain")

    x = pts.copy()
    J = np.broadcast_to(np.eye(n), (N, n, n)).copy()
    H = np.zeros((N, n, n, n))
    B = np.broadcast_to(np.eye(m), (N, m, m)).copy()
    eta = np.ones(N)
    if a_max == 0:
        return FlowResult(0.0, pts, x, J, H, B, eta, 0.0 if h_flow is None else h_flow, 0)

    h_nominal = abs(h_flow) if h_flow is not None else 1e-3 * abs(a_max)
    steps = max(1, math.ceil(abs(a_max) / h_nominal - 1e-9))
    h = a_max / steps
    fields = _flow_fields(V)

    def rhs(state):
        x, J, H, B, eta = state
        Y, dy, d2y, C, tau = fields(x)
        dJ = np.einsum("plk,pki->pli", dy, J)
        dH = np.einsum("plkq,pki,pqj->plij", d2y, J, J) + np.einsum("plk,pkij->plij", dy, H)
        dB = np.einsum("pab,pbc->pac", C, B)
        return (Y, dJ, dH, dB, tau * eta)

    def shift(state, k, c):
        return tuple(s + c * d for s, d in zip(state, k))

    state = (x, J, H, B, eta)
    for step in range(steps):
        k1 = rhs(state)
        k2 = rhs(shift(state, k1, h / 2))
        k3 = rhs(shift(state, k2, h / 2))
        k4 = rhs(shift(state, k3, h))
        state = tuple(s + (h / 6) * (d1 + 2 * d2 + 2 * d3 + d4)
                      for s, d1, d2, d3, d4 in zip(state, k1, k2, k3, k4))
        if not np.all(np.isfinite(state[0])):
            raise FlowExitError((step + 1) * h, "flow blew up")
        if domain is not None and not domain.contains(state[0]).all():
            raise FlowExitError((step + 1) * h)
    x, J, H, B, eta = state
    return FlowResult(float(a_max), pts, x, J, H, B, eta, abs(h), steps)


def flow_tolerance(h_flow: float, a: float = 1.0) -> float:
    """Acceptance budget for flow-derived identities (relative).

    The truncation budget is ``10 h^4`` per unit parameter.  Below that,
    double-precision round-off accumulated over ``|a|/h`` RK4 steps
    dominates, so the budget never drops under ``10 eps |a|/h``.
    """
    steps = max(1.0, abs(a) / h_flow) if h_flow > 0 else 1.0
    return max(10.0 * h_flow ** 4 * max(abs(a), 1.0), ROUNDING_FACTOR * np.finfo(float).eps * steps)


ROUNDING_FACTOR = 10.0
