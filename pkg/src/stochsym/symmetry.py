"""Symmetry certification: determining equations, finite symmetry checks,
Lie-algebra closure, generator commutation, and reduction of a commuting
family of weak symmetries to strong ones."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .expr import (
    Const, DimensionError, Domain, EPS_ZERO, Expr, N_ZERO, ZeroTest,
    evaluate_points, lambdify, to_text, zero_test,
)
from .model import (
    FiniteTransformation, InfinitesimalTransformation, Matrix, Sde, commutator,
    directional, directional_mat, generator_apply, jacobian, lie_bracket,
    mat_add, mat_scale, matmul, mixed_bracket,
)
from .transform import FlowResult, flow_tolerance, sdes_equal, transform_sde

FIT_RESIDUAL_TOL = 1e-8
RANK_TOL = 1e-8


class SymmetryError(ValueError):
    pass


class RankDeficiencyError(SymmetryError):
    pass


class NonCommutingError(SymmetryError):
    pass


# ---------------------------------------------------------------------------
# determining equations


@dataclass
class ResidualReport:
    """Residuals of ``Y(mu) - L(Y) + tau mu = 0`` and
    ``[Y, sigma] + 1/2 tau sigma + sigma C = 0`` with per-entry verdicts."""

    drift: tuple[Expr, ...]
    diffusion: Matrix
    drift_tests: list[ZeroTest]
    diffusion_tests: list[list[ZeroTest]]
    label: str = ""

    @property
    def drift_ok(self) -> bool:
        return all(t.passed for t in self.drift_tests)

    @property
    def diffusion_ok(self) -> bool:
        return all(t.passed for row in self.diffusion_tests for t in row)

    @property
    def passed(self) -> bool:
        return self.drift_ok and self.diffusion_ok

    @property
    def worst(self) -> float:
        tests = self.drift_tests + [t for row in self.diffusion_tests for t in row]
        return max(t.worst for t in tests)

    @property
    def worst_diffusion(self) -> float:
        return max(t.worst for row in self.diffusion_tests for t in row)

    def as_dict(self) -> dict:
        n = len(self.drift)
        return {
            "label": self.label,
            "passed": self.passed,
            "worst": self.worst,
            "drift": [{"residual": to_text(e, n), "zero": t.passed, "worst": t.worst}
                      for e, t in zip(self.drift, self.drift_tests)],
            "diffusion": [[{"residual": to_text(e, n), "zero": t.passed, "worst": t.worst}
                           for e, t in zip(row, trow)]
                          for row, trow in zip(self.diffusion, self.diffusion_tests)],
        }

    def __str__(self) -> str:
        head = f"{self.label or 'V'}: {'symmetry' if self.passed else 'NOT a symmetry'} (worst residual {self.worst:.3g})"
        lines = [head]
        for i, t in enumerate(self.drift_tests):
            lines.append(f"  drift[{i}]      {'0' if t.passed else 'nonzero'}  max|r| = {t.worst:.3g}")
        for i, row in enumerate(self.diffusion_tests):
            for j, t in enumerate(row):
                lines.append(f"  diffusion[{i},{j}] {'0' if t.passed else 'nonzero'}  max|r| = {t.worst:.3g}")
        return "\n".join(lines)


def _check(sde: Sde, V: InfinitesimalTransformation) -> None:
    if (sde.n, sde.m) != (V.n, V.m):
        raise DimensionError(f"sde is (n={sde.n}, m={sde.m}) but V is (n={V.n}, m={V.m})")


def drift_residual(sde: Sde, V: InfinitesimalTransformation) -> tuple[Expr, ...]:
    _check(sde, V)
    return tuple(directional(V.Y, mu_i) - generator_apply(sde, y_i) + V.tau * mu_i
                 for mu_i, y_i in zip(sde.mu, V.Y))


def diffusion_residual(sde: Sde, V: InfinitesimalTransformation) -> Matrix:
    _check(sde, V)
    half_tau = V.tau / Const(2)
    return mat_add(mat_add(mixed_bracket(V.Y, sde.sigma), mat_scale(half_tau, sde.sigma)),
                   matmul(sde.sigma, V.C))


def determining_residuals(sde: Sde, V: InfinitesimalTransformation, label: str = "",
                          eps: float = EPS_ZERO) -> ResidualReport:
    drift = drift_residual(sde, V)
    diff = diffusion_residual(sde, V)
    dom = sde.domain
    return ResidualReport(
        drift, diff,
        [zero_test(e, dom, eps) for e in drift],
        [[zero_test(e, dom, eps) for e in row] for row in diff],
        label,
    )


def is_weak_symmetry(sde: Sde, V: InfinitesimalTransformation) -> bool:
    """General infinitesimal symmetry: both determining equations vanish."""
    return determining_residuals(sde, V).passed


def is_strong_symmetry(sde: Sde, V: InfinitesimalTransformation) -> bool:
    if not is_weak_symmetry(sde, V):
        return False
    dom = sde.domain
    return all(zero_test(e, dom).passed for row in V.C for e in row) and zero_test(V.tau, dom).passed


# ---------------------------------------------------------------------------
# finite symmetries


def finite_symmetry_residual(sde: Sde, T: FlowResult) -> float:
    """Largest relative deviation of ``E_T(mu, sigma)`` from ``(mu, sigma)``
    at the image points of a numerically integrated triad."""
    if (T.n, T.m) != (sde.n, sde.m):
        raise DimensionError("flow and sde dimensions differ")
    n, m = sde.n, sde.m
    A = sde.diffusion_matrix
    f = lambdify(list(sde.mu) + [e for r in sde.sigma for e in r] + [e for r in A for e in r])

    def coeffs(x):
        v = f(x)
        N = x.shape[0]
        return v[:, :n], v[:, n:n + n * m].reshape(N, n, m), v[:, n + n * m:].reshape(N, n, n)

    mu_p, sig_p, A_p = coeffs(T.points)
    mu_q, sig_q, _ = coeffs(T.phi)
    second = np.einsum("pij,plij->pl", A_p, T.hess)
    first = np.einsum("pi,pli->pl", mu_p, T.jac)
    mu_new = (second + first) / T.eta[:, None]
    sig_new = np.einsum("pli,pia,pba->plb", T.jac, sig_p, T.B) / np.sqrt(T.eta)[:, None, None]

    scale = np.maximum.reduce([np.abs(second).max(axis=1), np.abs(first).max(axis=1),
                               np.abs(mu_q).max(axis=1), np.abs(sig_new).max(axis=(1, 2)),
                               np.abs(sig_q).max(axis=(1, 2))])
    dev = np.maximum(np.abs(mu_new - mu_q).max(axis=1), np.abs(sig_new - sig_q).max(axis=(1, 2)))
    ratio = dev / (1.0 + scale)
    if np.isnan(ratio).all():
        raise SymmetryError("coefficients undefined at every flow point")
    return float(np.nanmax(ratio))


def finite_symmetry_check(sde: Sde, T: FiniteTransformation | FlowResult, tol: float | None = None) -> bool:
    """Does ``T`` fix the SDE, i.e. ``E_T(mu, sigma) = (mu, sigma)``?

    A symbolic triad is compared with the identity test; a :class:`FlowResult`
    is compared pointwise at its grid with ``flow_tolerance``.
    """
    if isinstance(T, FlowResult):
        if tol is None:
            tol = flow_tolerance(T.h_flow, T.a)
        return finite_symmetry_residual(sde, T) <= tol
    return sdes_equal(transform_sde(T, sde), sde, T.target, eps=EPS_ZERO if tol is None else tol)


# ---------------------------------------------------------------------------
# Lie algebra


def bracket(V1: InfinitesimalTransformation, V2: InfinitesimalTransformation) -> InfinitesimalTransformation:
    """``[V1, V2] = ([Y1, Y2], Y1(C2) - Y2(C1) - {C1, C2}, Y1(tau2) - Y2(tau1))``."""
    if (V1.n, V1.m) != (V2.n, V2.m):
        raise DimensionError("bracket of transformations with different shapes")
    Y = lie_bracket(V1.Y, V2.Y)
    C = mat_add(mat_add(directional_mat(V1.Y, V2.C), directional_mat(V2.Y, V1.C), sign=-1),
                commutator(V1.C, V2.C), sign=-1)
    tau = directional(V1.Y, V2.tau) - directional(V2.Y, V1.tau)
    return InfinitesimalTransformation(Y, C, tau)


def _components(V: InfinitesimalTransformation) -> list[Expr]:
    return list(V.Y) + [e for r in V.C for e in r] + [V.tau]


@dataclass
class StructureConstants:
    """``constants[i, j, k] = f^k_{ij}`` with ``[V_i, V_j] = f^k_{ij} V_k``."""

    constants: np.ndarray
    residual: float
    brackets_symmetric: np.ndarray
    tol: float = FIT_RESIDUAL_TOL

    @property
    def closed(self) -> bool:
        return self.residual < self.tol

    @property
    def antisymmetric(self) -> bool:
        return bool(np.abs(self.constants + np.swapaxes(self.constants, 0, 1)).max(initial=0.0) <= 1e-9)

    def as_dict(self) -> dict:
        return {"closed": self.closed, "residual": self.residual,
                "brackets_are_symmetries": self.brackets_symmetric.tolist(),
                "constants": np.round(self.constants, 12).tolist()}


def closure_check(sde: Sde, basis: list[InfinitesimalTransformation]) -> StructureConstants:
    """Certify that pairwise brackets are symmetries and fit structure
    constants by least squares at the identity-test points.

    A large fit residual means the span is not closed; that is reported, not
    raised.
    """
    if not basis:
        raise SymmetryError("empty basis")
    for idx, V in enumerate(basis):
        if not is_weak_symmetry(sde, V):
            raise SymmetryError(f"basis element {idx} is not a symmetry")
    k = len(basis)
    pts = sde.domain.sample(N_ZERO)
    cols = np.stack([evaluate_points(_components(V), pts).ravel() for V in basis], axis=1)
    rows_ok = ~np.isnan(cols).any(axis=1)

    consts = np.zeros((k, k, k))
    sym = np.ones((k, k), dtype=bool)
    residual = 0.0
    for i, j in itertools.combinations(range(k), 2):
        W = bracket(basis[i], basis[j])
        sym[i, j] = sym[j, i] = is_weak_symmetry(sde, W)
        target = evaluate_points(_components(W), pts).ravel()
        ok = rows_ok & ~np.isnan(target)
        coef, *_ = np.linalg.lstsq(cols[ok], target[ok], rcond=None)
        fit = np.abs(cols[ok] @ coef - target[ok]).max(initial=0.0) / (1.0 + np.abs(target[ok]).max(initial=0.0))
        residual = max(residual, float(fit))
        consts[i, j] = coef
        consts[j, i] = -coef
    return StructureConstants(consts, residual, sym)


def generator_commutation_residual(sde: Sde, V: InfinitesimalTransformation, f: Expr) -> Expr:
    """``Y(L(f)) - L(Y(f)) + tau L(f)``."""
    _check(sde, V)
    Lf = generator_apply(sde, f)
    return directional(V.Y, Lf) - generator_apply(sde, directional(V.Y, f)) + V.tau * Lf


def generator_commutation_check(sde: Sde, V: InfinitesimalTransformation, f: Expr) -> bool:
    return zero_test(generator_commutation_residual(sde, V, f), sde.domain).passed


# ---------------------------------------------------------------------------
# reduction to strong symmetries


def strong_reduction_verify(basis: list[InfinitesimalTransformation], B: Matrix, eta: Expr,
                            domain: Domain) -> bool:
    """Check ``Y_i(B) = -B C_i`` and ``Y_i(eta) = -tau_i eta`` for every element."""
    for V in basis:
        if V.m != len(B) or V.n != domain.n:
            raise DimensionError("basis element does not match B / domain")
        lhs = mat_add(directional_mat(V.Y, B), matmul(B, V.C))
        if not all(zero_test(e, domain).passed for row in lhs for e in row):
            return False
        if not zero_test(directional(V.Y, eta) + V.tau * eta, domain).passed:
            return False
    return True


@dataclass
class ReductionResult:
    """Numeric ``(B, eta)`` on a flow-box grid around an anchor.

    Node ``idx`` (a k-tuple) sits at flow parameters ``params[idx]`` and
    position ``points[idx]``; moving along axis ``i`` follows ``Y_i``.
    """

    anchor: np.ndarray
    spacing: float
    params: np.ndarray
    points: np.ndarray
    B: np.ndarray
    eta: np.ndarray
    basis: list[InfinitesimalTransformation] = field(repr=False)

    @property
    def k(self) -> int:
        return self.params.shape[-1]

    def _axis_derivative(self, values: np.ndarray, axis: int) -> np.ndarray:
        """Fourth-order central difference along a grid axis (NaN at the two
        outermost nodes on each side)."""
        h = self.spacing
        v = np.moveaxis(values, axis, 0)
        out = np.full_like(v, np.nan)
        out[2:-2] = (-v[4:] + 8 * v[3:-1] - 8 * v[1:-3] + v[:-4]) / (12 * h)
        return np.moveaxis(out, 0, axis)

    def verify_residual(self) -> float:
        """Largest relative residual of ``Y_i(B) + B C_i`` and
        ``Y_i(eta) + tau_i eta`` over interior nodes."""
        pts = self.points.reshape(-1, self.points.shape[-1])
        worst = 0.0
        for i, V in enumerate(self.basis):
            C = evaluate_points([e for r in V.C for e in r], pts).reshape(self.B.shape)
            tau = evaluate_points(V.tau, pts).reshape(self.eta.shape)
            dB = self._axis_derivative(self.B, i)
            deta = self._axis_derivative(self.eta, i)
            rB = np.abs(dB + self.B @ C).max(axis=(-1, -2)) / (1 + np.abs(dB).max(axis=(-1, -2)))
            re = np.abs(deta + tau * self.eta) / (1 + np.abs(deta))
            worst = max(worst, float(np.nanmax(rB)), float(np.nanmax(re)))
        return worst

    def compare(self, B_expr: Matrix, eta_expr: Expr) -> tuple[float, float]:
        """Max absolute grid error against closed forms for ``B`` and ``eta``."""
        pts = self.points.reshape(-1, self.points.shape[-1])
        Bc = evaluate_points([e for r in B_expr for e in r], pts).reshape(self.B.shape)
        ec = evaluate_points(eta_expr, pts).reshape(self.eta.shape)
        return float(np.abs(Bc - self.B).max()), float(np.abs(ec - self.eta).max())

    def strong_residual(self, sde: Sde) -> float:
        """How far ``T_*(V_i)`` is from a strong symmetry of ``E_T(mu, sigma)``
        at interior nodes, with ``T = (id, B, eta)`` taken from the grid.

        Returns the largest relative residual over the pushed-forward
        ``C'``/``tau'`` parts and both determining equations of
        ``(Y_i, 0, 0)`` against the transformed coefficients.
        """
        n, m = sde.n, sde.m
        shape = self.eta.shape
        pts = self.points.reshape(-1, n)
        mu = evaluate_points(list(sde.mu), pts).reshape(shape + (n,))
        sig = evaluate_points([e for r in sde.sigma for e in r], pts).reshape(shape + (n, m))
        root = np.sqrt(self.eta)
        mu_t = mu / self.eta[..., None]
        sig_t = (sig @ np.swapaxes(self.B, -1, -2)) / root[..., None, None]
        A_t = 0.5 * sig_t @ np.swapaxes(sig_t, -1, -2)
        Bt = np.swapaxes(self.B, -1, -2)

        worst = 0.0
        for i, V in enumerate(self.basis):
            DY = jacobian(V.Y, n)
            hess = [[[e for e in jacobian([DY[l][k]], n)[0]] for k in range(n)] for l in range(n)]
            dy = evaluate_points([e for r in DY for e in r], pts).reshape(shape + (n, n))
            d2y = evaluate_points([e for a in hess for b in a for e in b], pts).reshape(shape + (n, n, n))
            C = evaluate_points([e for r in V.C for e in r], pts).reshape(shape + (m, m))
            tau = evaluate_points(V.tau, pts).reshape(shape)

            dB = self._axis_derivative(self.B, i)
            deta = self._axis_derivative(self.eta, i)
            C_push = self.B @ C @ Bt + dB @ Bt
            tau_push = tau + deta / self.eta

            dmu = self._axis_derivative(mu_t, i)
            dsig = self._axis_derivative(sig_t, i)
            LY = np.einsum("...jk,...ljk->...l", A_t, d2y) + np.einsum("...j,...lj->...l", mu_t, dy)
            r_drift = dmu - LY
            r_diff = dsig - dy @ sig_t

            scale = 1 + np.maximum(np.abs(dmu).max(axis=-1), np.abs(dsig).max(axis=(-1, -2)))
            parts = [np.abs(C_push).max(axis=(-1, -2)), np.abs(tau_push),
                     np.abs(r_drift).max(axis=-1) / scale, np.abs(r_diff).max(axis=(-1, -2)) / scale]
            worst = max(worst, *(float(np.nanmax(p)) for p in parts))
        return worst


def _rk4_along(V: InfinitesimalTransformation, x, B, eta, s: float, substeps: int):
    """Follow ``Y`` for parameter ``s`` while solving ``dB/ds = -B C`` and
    ``deta/ds = -tau eta`` (vectorised over starting points)."""
    n, m = V.n, V.m
    f = lambdify(list(V.Y) + [e for r in V.C for e in r] + [V.tau])

    def rhs(x, B, eta):
        v = f(x)
        Y = v[:, :n]
        C = v[:, n:n + m * m].reshape(-1, m, m)
        tau = v[:, -1]
        return Y, -B @ C, -tau * eta

    h = s / substeps
    for _ in range(substeps):
        k1 = rhs(x, B, eta)
        k2 = rhs(x + h / 2 * k1[0], B + h / 2 * k1[1], eta + h / 2 * k1[2])
        k3 = rhs(x + h / 2 * k2[0], B + h / 2 * k2[1], eta + h / 2 * k2[2])
        k4 = rhs(x + h * k3[0], B + h * k3[1], eta + h * k3[2])
        x = x + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        B = B + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        eta = eta + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    return x, B, eta


def strong_reduction_solve(basis: list[InfinitesimalTransformation], anchor, domain: Domain | None = None,
                           extent: float = 0.5, nodes: int = 41, substeps: int = 8) -> ReductionResult:
    """Construct ``(B, eta)`` with ``T_*(V_i)`` strong near ``anchor``.

    Restricted to pairwise commuting bases: starting from ``B = I``,
    ``eta = 1`` at the anchor, the equations are integrated along the flow of
    each ``Y_i`` in turn over parameters ``[-extent, extent]`` (``nodes``
    per axis), which yields values on a flow-box grid.
    """
    if not basis:
        raise SymmetryError("empty basis")
    anchor = np.asarray(anchor, dtype=float)
    n, m = basis[0].n, basis[0].m
    k = len(basis)
    if any((V.n, V.m) != (n, m) for V in basis) or anchor.shape != (n,):
        raise DimensionError("basis elements and anchor must share dimensions")
    if k > n:
        raise RankDeficiencyError(f"{k} fields cannot be independent in dimension {n}")
    Ys = evaluate_points([y for V in basis for y in V.Y], anchor[None, :]).reshape(k, n)
    sv = np.linalg.svd(Ys, compute_uv=False)
    if np.isnan(sv).any() or sv.min() <= RANK_TOL:
        raise RankDeficiencyError(f"Y_i(anchor) are linearly dependent (singular values {sv})")
    dom = domain if domain is not None else Domain.box(n, -1e6, 1e6)
    for i, j in itertools.combinations(range(k), 2):
        W = bracket(basis[i], basis[j])
        if not all(zero_test(e, dom).passed for e in _components(W)):
            raise NonCommutingError(f"[V{i + 1}, V{j + 1}] does not vanish; only commuting bases are supported")

    if nodes < 5 or nodes % 2 == 0:
        raise ValueError("nodes must be odd and at least 5")
    spacing = 2 * extent / (nodes - 1)
    half = nodes // 2

    x = anchor[None, :].copy()
    B = np.eye(m)[None, :, :].copy()
    eta = np.ones(1)
    for axis, V in enumerate(basis):
        # extend every current node along Y_axis in both directions
        fwd, bwd = [(x, B, eta)], [(x, B, eta)]
        for _ in range(half):
            fwd.append(_rk4_along(V, *fwd[-1], spacing, substeps))
            bwd.append(_rk4_along(V, *bwd[-1], -spacing, substeps))
        layers = bwd[:0:-1] + fwd
        # new axis goes last so the flat order stays (axis_1, ..., axis_k)
        x = np.stack([l[0] for l in layers], axis=1).reshape(-1, n)
        B = np.stack([l[1] for l in layers], axis=1).reshape(-1, m, m)
        eta = np.stack([l[2] for l in layers], axis=1).reshape(-1)
        if domain is not None and not domain.contains(x).all():
            raise SymmetryError(f"flow box left the domain along axis {axis + 1}")

    grid = (nodes,) * k
    axis_vals = (np.arange(nodes) - half) * spacing
    params = np.stack(np.meshgrid(*([axis_vals] * k), indexing="ij"), axis=-1)
    return ReductionResult(anchor, spacing, params, x.reshape(grid + (n,)), B.reshape(grid + (m, m)),
                           eta.reshape(grid), list(basis))
