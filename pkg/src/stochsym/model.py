"""SDEs, finite and infinitesimal stochastic transformations, and the
differential operators shared by everything downstream."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expr import (
    ONE, ZERO, Const, Var, DimensionError, Domain, Expr, EPS_ZERO, N_ZERO,
    check_dimension, differentiate, evaluate_points, substitute, zero_test,
)

Vector = tuple[Expr, ...]
Matrix = tuple[tuple[Expr, ...], ...]

ORTHO_TOL = 1e-9
DET_TOL = 1e-6
PSD_TOL = 1e-10


# ---------------------------------------------------------------------------
# small symbolic linear algebra


def vec(items) -> Vector:
    return tuple(_as_expr(e) for e in items)


def mat(rows) -> Matrix:
    return tuple(tuple(_as_expr(e) for e in row) for row in rows)


def _as_expr(e) -> Expr:
    return e if isinstance(e, Expr) else Const(e)


def identity_matrix(m: int) -> Matrix:
    return tuple(tuple(ONE if i == j else ZERO for j in range(m)) for i in range(m))


def zero_matrix(rows: int, cols: int) -> Matrix:
    return tuple((ZERO,) * cols for _ in range(rows))


def identity_map(n: int) -> Vector:
    return tuple(Var(i) for i in range(n))


def shape(a: Matrix) -> tuple[int, int]:
    return len(a), (len(a[0]) if a else 0)


def transpose(a: Matrix) -> Matrix:
    rows, cols = shape(a)
    return tuple(tuple(a[i][j] for i in range(rows)) for j in range(cols))


def matmul(a: Matrix, b: Matrix) -> Matrix:
    (r, k), (k2, c) = shape(a), shape(b)
    if k != k2:
        raise DimensionError(f"cannot multiply {r}x{k} by {k2}x{c}")
    out = []
    for i in range(r):
        row = []
        for j in range(c):
            acc = ZERO
            for q in range(k):
                acc = acc + a[i][q] * b[q][j]
            row.append(acc)
        out.append(tuple(row))
    return tuple(out)


def matvec(a: Matrix, v: Vector) -> Vector:
    return tuple(row[0] for row in matmul(a, tuple((e,) for e in v)))


def mat_add(a: Matrix, b: Matrix, sign: int = 1) -> Matrix:
    if shape(a) != shape(b):
        raise DimensionError(f"shape mismatch {shape(a)} vs {shape(b)}")
    if sign > 0:
        return tuple(tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))
    return tuple(tuple(x - y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_scale(s: Expr, a: Matrix) -> Matrix:
    return tuple(tuple(s * x for x in row) for row in a)


def mat_map(f, a: Matrix) -> Matrix:
    return tuple(tuple(f(x) for x in row) for row in a)


def compose_vec(v: Vector, phi: Sequence[Expr]) -> Vector:
    return tuple(substitute(e, phi) for e in v)


def compose_mat(a: Matrix, phi: Sequence[Expr]) -> Matrix:
    return mat_map(lambda e: substitute(e, phi), a)


def directional(Y: Sequence[Expr], f: Expr) -> Expr:
    """``Y(f) = Y^k d_k f``."""
    acc = ZERO
    for k, yk in enumerate(Y):
        acc = acc + yk * differentiate(f, k)
    return acc


def directional_mat(Y: Sequence[Expr], a: Matrix) -> Matrix:
    return mat_map(lambda e: directional(Y, e), a)


def as_column(v: Vector) -> Matrix:
    return tuple((e,) for e in v)


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True, eq=False)
class Sde:
    """``dX = mu(X) dt + sigma(X) . dW`` on an open subset of R^n."""

    mu: Vector
    sigma: Matrix
    domain: Domain

    def __post_init__(self):
        object.__setattr__(self, "mu", vec(self.mu))
        object.__setattr__(self, "sigma", mat(self.sigma))
        n, m = self.n, self.m
        if len(self.sigma) != n or any(len(r) != m for r in self.sigma):
            raise DimensionError(f"sigma must be {n}x{m}")
        if self.domain.n != n:
            raise DimensionError(f"domain dimension {self.domain.n} != {n}")
        check_dimension(self.mu, n)
        check_dimension([e for r in self.sigma for e in r], n)

    @property
    def n(self) -> int:
        return len(self.mu)

    @property
    def m(self) -> int:
        return len(self.sigma[0]) if self.sigma else 0

    @property
    def diffusion_matrix(self) -> Matrix:
        """``A = 1/2 sigma . sigma^T``."""
        cached = self.__dict__.get("_A")
        if cached is None:
            half = Const(1) / Const(2)
            cached = mat_scale(half, matmul(self.sigma, transpose(self.sigma)))
            object.__setattr__(self, "_A", cached)
        return cached


@dataclass(frozen=True, eq=False)
class FiniteTransformation:
    """Triad ``T = (Phi, B, eta)`` with an explicit inverse ``Phi^{-1}``.

    ``domain`` is where T is defined; ``codomain`` (defaults to ``domain``)
    is where ``Phi^{-1}`` is sampled and where transformed objects live.
    """

    phi: Vector
    phi_inverse: Vector
    bmat: Matrix
    eta: Expr
    domain: Domain
    codomain: Domain | None = None

    def __post_init__(self):
        object.__setattr__(self, "phi", vec(self.phi))
        object.__setattr__(self, "phi_inverse", vec(self.phi_inverse))
        object.__setattr__(self, "bmat", mat(self.bmat))
        object.__setattr__(self, "eta", _as_expr(self.eta))
        n, m = self.n, self.m
        if len(self.phi_inverse) != n:
            raise DimensionError("phi and phi_inverse differ in length")
        if any(len(r) != m for r in self.bmat):
            raise DimensionError("B must be square")
        if self.domain.n != n or (self.codomain is not None and self.codomain.n != n):
            raise DimensionError("domain dimension does not match phi")
        check_dimension(list(self.phi) + list(self.phi_inverse) + [self.eta]
                        + [e for r in self.bmat for e in r], n)

    @property
    def n(self) -> int:
        return len(self.phi)

    @property
    def m(self) -> int:
        return len(self.bmat)

    @property
    def target(self) -> Domain:
        return self.codomain if self.codomain is not None else self.domain

    @classmethod
    def identity(cls, n: int, m: int, domain: Domain) -> "FiniteTransformation":
        return cls(identity_map(n), identity_map(n), identity_matrix(m), ONE, domain)


@dataclass(frozen=True, eq=False)
class InfinitesimalTransformation:
    """Triad ``V = (Y, C, tau)``: vector field, so(m)-valued field, scalar."""

    Y: Vector
    C: Matrix
    tau: Expr

    def __post_init__(self):
        object.__setattr__(self, "Y", vec(self.Y))
        object.__setattr__(self, "C", mat(self.C))
        object.__setattr__(self, "tau", _as_expr(self.tau))
        if any(len(r) != len(self.C) for r in self.C):
            raise DimensionError("C must be square")

    @property
    def n(self) -> int:
        return len(self.Y)

    @property
    def m(self) -> int:
        return len(self.C)

    @classmethod
    def strong(cls, Y, m: int) -> "InfinitesimalTransformation":
        return cls(vec(Y), zero_matrix(m, m), ZERO)

    def scaled(self, s) -> "InfinitesimalTransformation":
        s = _as_expr(s)
        return InfinitesimalTransformation(tuple(s * y for y in self.Y), mat_scale(s, self.C), s * self.tau)

    def __add__(self, other: "InfinitesimalTransformation") -> "InfinitesimalTransformation":
        return InfinitesimalTransformation(
            tuple(a + b for a, b in zip(self.Y, other.Y)),
            mat_add(self.C, other.C),
            self.tau + other.tau,
        )


# ---------------------------------------------------------------------------
# operators


def generator_apply(sde: Sde, f: Expr) -> Expr:
    """``L(f) = A^{ij} d_i d_j f + mu^i d_i f`` with ``A = 1/2 sigma sigma^T``."""
    check_dimension(f, sde.n)
    A = sde.diffusion_matrix
    acc = ZERO
    for i in range(sde.n):
        fi = differentiate(f, i)
        acc = acc + sde.mu[i] * fi
        for j in range(sde.n):
            if isinstance(A[i][j], Const) and A[i][j].value == 0:
                continue
            acc = acc + A[i][j] * differentiate(fi, j)
    return acc


def jacobian(F: Sequence[Expr], n: int) -> Matrix:
    """``D(F)^l_i = d_i F^l`` as a ``len(F) x n`` matrix."""
    return tuple(tuple(differentiate(f, i, n) for i in range(n)) for f in F)


def mixed_bracket(A: Sequence[Expr], Bf: Matrix) -> Matrix:
    """``[A, B]^i_j = A^k d_k B^i_j - B^k_j d_k A^i``.

    For a single column this is the Lie bracket of vector fields.
    """
    n = len(A)
    if len(Bf) != n:
        raise DimensionError(f"matrix field has {len(Bf)} rows, vector field has {n} components")
    DA = jacobian(A, n)
    cols = len(Bf[0]) if Bf else 0
    out = []
    for i in range(n):
        row = []
        for j in range(cols):
            term = directional(A, Bf[i][j])
            for k in range(n):
                term = term - Bf[k][j] * DA[i][k]
            row.append(term)
        out.append(tuple(row))
    return tuple(out)


def lie_bracket(Y1: Sequence[Expr], Y2: Sequence[Expr]) -> Vector:
    return tuple(r[0] for r in mixed_bracket(Y1, as_column(tuple(Y2))))


def commutator(a: Matrix, b: Matrix) -> Matrix:
    return mat_add(matmul(a, b), matmul(b, a), sign=-1)


# ---------------------------------------------------------------------------
# validation


@dataclass
class InvariantCheck:
    name: str
    passed: bool
    worst: float

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "worst": self.worst}


@dataclass
class ValidationReport:
    kind: str
    checks: list[InvariantCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, worst: float) -> None:
        self.checks.append(InvariantCheck(name, bool(passed), float(worst)))

    def as_dict(self) -> dict:
        return {"kind": self.kind, "passed": self.passed, "checks": [c.as_dict() for c in self.checks]}

    def __str__(self) -> str:
        lines = [f"{self.kind}: {'ok' if self.passed else 'INVALID'}"]
        for c in self.checks:
            lines.append(f"  [{'pass' if c.passed else 'FAIL'}] {c.name} (worst {c.worst:.3g})")
        return "\n".join(lines)


def _matrix_values(a: Matrix, pts: np.ndarray) -> np.ndarray:
    rows, cols = shape(a)
    flat = evaluate_points([e for r in a for e in r], pts)
    return flat.reshape(len(pts), rows, cols)


def _nanmax(x) -> float:
    x = np.asarray(x, dtype=float)
    x = x[~np.isnan(x)]
    return float(x.max()) if x.size else float("nan")


def validate(obj, domain: Domain | None = None) -> ValidationReport:
    """Check the structural invariants of an SDE or a transformation at the
    identity-test sample points.  Failures are report entries, never raised."""
    if isinstance(obj, Sde):
        return _validate_sde(obj)
    if isinstance(obj, FiniteTransformation):
        return _validate_finite(obj)
    if isinstance(obj, InfinitesimalTransformation):
        return _validate_infinitesimal(obj, domain or Domain.box(obj.n))
    raise TypeError(f"cannot validate {type(obj).__name__}")


def _validate_sde(sde: Sde) -> ValidationReport:
    report = ValidationReport("Sde")
    pts = sde.domain.sample(N_ZERO)
    A = _matrix_values(sde.diffusion_matrix, pts)
    ok = ~np.isnan(A).any(axis=(1, 2))
    sym = np.abs(A - np.swapaxes(A, 1, 2)).max(axis=(1, 2))
    report.add("A symmetric", np.all(sym[ok] <= EPS_ZERO * (1 + np.abs(A[ok]).max(axis=(1, 2)))), _nanmax(sym[ok]))
    eig = np.linalg.eigvalsh(A[ok]) if ok.any() else np.zeros((0, sde.n))
    worst = -float(eig.min()) if eig.size else 0.0
    report.add("A positive semidefinite", eig.size > 0 and eig.min() >= -PSD_TOL, max(worst, 0.0))
    mu = evaluate_points(list(sde.mu), pts)
    report.add("coefficients defined", bool(ok.any() and (~np.isnan(mu)).all(axis=1).any()),
               float(np.isnan(mu).any(axis=1).mean()))
    return report


def _validate_finite(T: FiniteTransformation) -> ValidationReport:
    report = ValidationReport("FiniteTransformation")
    pts = T.domain.sample(N_ZERO)
    B = _matrix_values(T.bmat, pts)
    ok = ~np.isnan(B).any(axis=(1, 2))
    Bk = B[ok]
    eye = np.eye(T.m)
    ortho = np.abs(np.swapaxes(Bk, 1, 2) @ Bk - eye).max(axis=(1, 2)) if len(Bk) else np.array([np.inf])
    report.add("B orthogonal", ortho.max() <= ORTHO_TOL, ortho.max())
    det = np.linalg.det(Bk) if len(Bk) else np.array([np.nan])
    report.add("det B = 1", bool(np.all(np.abs(det - 1) <= DET_TOL)), _nanmax(np.abs(det - 1)))
    eta = evaluate_points(T.eta, pts)
    eta_ok = eta[~np.isnan(eta)]
    report.add("eta positive", eta_ok.size > 0 and eta_ok.min() >= T.domain.eps,
               max(T.domain.eps - float(eta_ok.min()), 0.0) if eta_ok.size else float("inf"))
    worst = 0.0
    passed = True
    for i in range(T.n):
        r = zero_test(substitute(T.phi_inverse[i], T.phi) - identity_map(T.n)[i], T.domain)
        passed &= r.passed
        worst = max(worst, r.worst)
    report.add("phi_inverse(phi(p)) = p", passed, worst)
    return report


def _validate_infinitesimal(V: InfinitesimalTransformation, domain: Domain) -> ValidationReport:
    report = ValidationReport("InfinitesimalTransformation")
    passed, worst = True, 0.0
    for i in range(V.m):
        for j in range(i, V.m):
            r = zero_test(V.C[i][j] + V.C[j][i], domain)
            passed &= r.passed
            worst = max(worst, r.worst)
    report.add("C antisymmetric", passed, worst)
    return report
