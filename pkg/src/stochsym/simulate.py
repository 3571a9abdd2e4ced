"""Monte Carlo: Euler-Maruyama ensembles, the process transformation
``P_T`` (random time change, noise rotation, state map), and the statistical
checks used to compare ensembles.

Paths are generated in batches.  Path ``p`` always draws its noise from its
own Philox stream keyed by ``(seed, p)``, so any chunking of the path range
yields identical paths.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import stats

from .expr import lambdify
from .model import FiniteTransformation, Sde
from .transform import TransformError, compose

SE_MULTIPLIER = 3.0
KS_PVALUE = 0.01
PATHWISE_CONSTANT = 5.0
SAMPLER_OFFSET = 0x9E3779B9


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    dt: float
    horizon: float
    n_paths: int
    seed: int = 0
    x0: Sequence[float] | Callable[[np.random.Generator], Sequence[float]] | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise SimulationError("dt must be positive")
        if not self.horizon > 0:
            raise SimulationError("horizon must be positive")
        if self.n_paths < 1:
            raise SimulationError("need at least one path")

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))


def path_rng(seed: int, path: int) -> np.random.Generator:
    """Counter-based stream for one path; step ``k`` uses draws ``k*m..k*m+m-1``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(path,))))


@dataclass
class PathBundle:
    """A batch of paths on a shared uniform grid.

    ``X[p, k]`` and ``W[p, k]`` are the state and noise of path ``p`` at
    ``t[k]``.  ``stop[p]`` is the last index carrying data; if
    ``exited[p]`` the state at ``stop[p]`` is the first one outside the
    domain.  Entries past ``stop[p]`` are NaN.
    """

    t: np.ndarray
    X: np.ndarray
    W: np.ndarray
    stop: np.ndarray
    exited: np.ndarray
    first_path: int = 0

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    @property
    def n_paths(self) -> int:
        return self.X.shape[0]

    def __len__(self) -> int:
        return self.n_paths

    def alive(self, k: int) -> np.ndarray:
        """Paths still inside the domain at node ``k``."""
        return np.where(self.exited, k < self.stop, k <= self.stop)

    def index_of(self, time: float) -> int:
        k = int(round(time / self.dt))
        if not (0 <= k < len(self.t)) or abs(self.t[k] - time) > 1e-9 * max(1.0, time):
            raise SimulationError(f"time {time} is not a grid node")
        return k

    def state_at(self, time: float) -> tuple[np.ndarray, float]:
        """States of paths alive at ``time`` and the alive fraction."""
        k = self.index_of(time)
        mask = self.alive(k)
        return self.X[mask, k], float(mask.mean())

    def restrict(self, time: float) -> "PathBundle":
        """Paths alive at ``time``, cut to ``[0, time]``."""
        k = self.index_of(time)
        mask = self.alive(k)
        stop = np.full(int(mask.sum()), k)
        return PathBundle(self.t[:k + 1].copy(), self.X[mask, :k + 1].copy(), self.W[mask, :k + 1].copy(),
                          stop, np.zeros_like(stop, dtype=bool), self.first_path)

    def to_csv(self, path=None) -> str:
        """Rows ``path, k, t, x1.., w1..`` for every stored node."""
        n, m = self.X.shape[2], self.W.shape[2]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["path", "k", "t"] + [f"x{i + 1}" for i in range(n)] + [f"w{a + 1}" for a in range(m)])
        for p in range(self.n_paths):
            for k in range(int(self.stop[p]) + 1):
                w.writerow([self.first_path + p, k, repr(float(self.t[k]))]
                           + [repr(float(v)) for v in self.X[p, k]] + [repr(float(v)) for v in self.W[p, k]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _coefficients(sde: Sde) -> Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]:
    n, m = sde.n, sde.m
    f = lambdify(list(sde.mu) + [e for row in sde.sigma for e in row])

    def coeffs(x):
        v = f(x)
        return v[:, :n], v[:, n:].reshape(-1, n, m)

    return coeffs


def _initial_points(cfg: SimConfig, rngs, n: int) -> np.ndarray:
    if cfg.x0 is None:
        raise SimulationError("SimConfig needs an initial point or sampler")
    if callable(cfg.x0):
        pts = np.array([np.asarray(cfg.x0(r), dtype=float) for r in rngs])
    else:
        pts = np.tile(np.asarray(cfg.x0, dtype=float), (len(rngs), 1))
    if pts.ndim != 2:
        raise SimulationError("initial point must be a flat vector")
    if pts.shape[1] != n:
        raise SimulationError(f"initial point has dimension {pts.shape[1]}, expected {n}")
    return pts


def brownian_increments(seed: int, paths: Sequence[int], steps: int, m: int, dt: float) -> np.ndarray:
    """Increments ``dW[p, k]`` with variance ``dt`` from each path's stream."""
    root = math.sqrt(dt)
    return np.stack([path_rng(seed, p).standard_normal((steps, m)) for p in paths]) * root


def integrate_increments(sde: Sde, x0: np.ndarray, dW: np.ndarray, dt: float,
                         first_path: int = 0) -> PathBundle:
    """Euler-Maruyama driven by given increments ``dW`` of shape ``(N, K, m)``."""
    N, K, m = dW.shape
    n = sde.n
    if m != sde.m:
        raise SimulationError(f"increments have {m} components, sde has m={sde.m}")
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        x0 = np.tile(x0, (N, 1))
    dom = sde.domain
    if not dom.contains(x0).all():
        raise SimulationError("initial point outside the domain")
    coeffs = _coefficients(sde)

    X = np.full((N, K + 1, n), np.nan)
    W = np.full((N, K + 1, m), np.nan)
    X[:, 0] = x0
    W[:, 0] = 0.0
    stop = np.full(N, K)
    exited = np.zeros(N, dtype=bool)
    live = np.arange(N)
    x = x0.copy()
    w = np.zeros((N, m))
    for k in range(K):
        mu, sig = coeffs(x)
        x = x + mu * dt + np.einsum("pia,pa->pi", sig, dW[live, k])
        w = w + dW[live, k]
        X[live, k + 1] = x
        W[live, k + 1] = w
        out = ~(dom.contains(x) & np.isfinite(x).all(axis=1))
        if out.any():
            gone = live[out]
            stop[gone] = k + 1
            exited[gone] = True
            live, x, w = live[~out], x[~out], w[~out]
            if live.size == 0:
                break
    return PathBundle(dt * np.arange(K + 1), X, W, stop, exited, first_path)


def euler_maruyama(sde: Sde, cfg: SimConfig, start: int = 0, count: int | None = None) -> PathBundle:
    """Simulate paths ``start .. start+count-1`` of the ensemble described by ``cfg``.

    ``X_{k+1} = X_k + mu(X_k) dt + sigma(X_k) dW_k``; a path stops at the
    first node outside the domain.
    """
    if count is None:
        count = cfg.n_paths - start
    if count < 1 or start < 0 or start + count > cfg.n_paths:
        raise SimulationError("path range outside the configured ensemble")
    paths = range(start, start + count)
    # a sampler gets its own streams, keyed apart from the noise
    x0 = _initial_points(cfg, [path_rng(cfg.seed + SAMPLER_OFFSET, p) for p in paths], sde.n)
    dW = brownian_increments(cfg.seed, paths, cfg.steps, sde.m, cfg.dt)
    return integrate_increments(sde, x0, dW, cfg.dt, start)


def iter_chunks(sde: Sde, cfg: SimConfig, chunk: int = 2000) -> Iterator[PathBundle]:
    for start in range(0, cfg.n_paths, chunk):
        yield euler_maruyama(sde, cfg, start, min(chunk, cfg.n_paths - start))


# ---------------------------------------------------------------------------
# random time change and process transformation


def clock(eta_values: np.ndarray, dt: float) -> np.ndarray:
    """``beta_k = dt * sum_{j<k} eta_j`` (left-point rule), ``beta_0 = 0``."""
    beta = np.empty(len(eta_values) + 1)
    beta[0] = 0.0
    np.cumsum(eta_values, out=beta[1:])
    beta *= dt
    return beta


def inverse_clock(beta: np.ndarray, t: np.ndarray, new_times: np.ndarray) -> np.ndarray:
    """``alpha`` at ``new_times`` by monotone piecewise-linear inversion of ``beta``."""
    return np.interp(new_times, beta, t)


def process_transform(T: FiniteTransformation, paths: PathBundle, dt_new: float | None = None,
                      until: float | None = None) -> PathBundle:
    """``P_T`` applied to every path of the bundle.

    The clock ``beta`` is built from ``eta(X)``, the noise increments become
    ``sqrt(eta(X_k)) B(X_k) dW_k``, and ``Phi(X)`` and the new noise are
    resampled on a uniform grid of step ``dt_new`` (default: the old step)
    by linear interpolation against ``beta``.  With ``until`` the new grid
    stops there; paths running longer are cut without being marked exited.
    """
    n, m = paths.X.shape[2], paths.W.shape[2]
    if (T.n, T.m) != (n, m):
        raise TransformError(f"transformation is (n={T.n}, m={T.m}) but paths are (n={n}, m={m})")
    if paths.n_paths == 0 or len(paths.t) < 2:
        raise SimulationError("empty path bundle")
    dt = paths.dt
    dt_new = dt if dt_new is None else dt_new
    fmap = lambdify(list(T.phi))
    fgauge = lambdify([T.eta] + [e for row in T.bmat for e in row])

    N = paths.n_paths
    results = []
    horizons = np.empty(N)
    for p in range(N):
        s = int(paths.stop[p])
        x = paths.X[p, :s + 1]
        g = fgauge(x[:s]) if s > 0 else np.empty((0, 1 + m * m))
        eta = g[:, 0]
        if s > 0 and not (eta > 0).all():
            raise TransformError(f"eta is not positive along path {paths.first_path + p}")
        beta = clock(eta, dt)
        B = g[:, 1:].reshape(-1, m, m)
        if (eta == 1.0).all() and (B == np.eye(m)).all():
            w_new = paths.W[p, :s + 1]
        else:
            dW = np.diff(paths.W[p, :s + 1], axis=0)
            inc = np.sqrt(eta)[:, None] * np.einsum("kab,kb->ka", B, dW)
            w_new = np.vstack([np.zeros((1, m)), np.cumsum(inc, axis=0)])
        results.append((beta, fmap(x), w_new))
        horizons[p] = beta[-1]

    K_new = np.floor(horizons / dt_new * (1 + 1e-12) + 1e-9).astype(int)
    exited = paths.exited.copy()
    if until is not None:
        K_cap = int(round(until / dt_new))
        exited &= K_new <= K_cap
        K_new = np.minimum(K_new, K_cap)
    K_max = int(K_new.max())
    t_new = dt_new * np.arange(K_max + 1)
    X_new = np.full((N, K_max + 1, n), np.nan)
    W_new = np.full((N, K_max + 1, m), np.nan)
    for p, (beta, fx, w) in enumerate(results):
        tt = t_new[:K_new[p] + 1]
        same_grid = len(beta) == len(tt) and dt_new == dt and np.array_equal(beta, tt)
        for i in range(n):
            X_new[p, :len(tt), i] = fx[:, i] if same_grid else np.interp(tt, beta, fx[:, i])
        for a in range(m):
            W_new[p, :len(tt), a] = w[:, a] if same_grid else np.interp(tt, beta, w[:, a])
    return PathBundle(t_new, X_new, W_new, K_new, exited, paths.first_path)


# ---------------------------------------------------------------------------
# statistics


@dataclass
class Statistic:
    name: str
    value: float
    bound: float
    passed: bool
    kind: str = "abs<="  # "abs<=": |value| <= bound ; "p>": value > bound

    def as_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "bound": self.bound, "passed": self.passed,
                "kind": self.kind}


@dataclass
class StatReport:
    title: str
    stats: list[Statistic] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.stats)

    def add_abs(self, name: str, value: float, bound: float) -> None:
        self.stats.append(Statistic(name, float(value), float(bound), bool(abs(value) <= bound)))

    def add_p(self, name: str, p: float, threshold: float = KS_PVALUE) -> None:
        self.stats.append(Statistic(name, float(p), threshold, bool(p > threshold), "p>"))

    def as_dict(self) -> dict:
        return {"title": self.title, "passed": self.passed, "info": self.info,
                "stats": [s.as_dict() for s in self.stats]}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)

    def __str__(self) -> str:
        lines = [f"{self.title}: {'PASS' if self.passed else 'FAIL'}"]
        for k, v in self.info.items():
            lines.append(f"  {k} = {v}")
        for s in self.stats:
            rel = "p =" if s.kind == "p>" else "d ="
            cmp = f"> {s.bound:.3g}" if s.kind == "p>" else f"|d| <= {s.bound:.3g}"
            lines.append(f"  {'ok  ' if s.passed else 'FAIL'} {s.name}: {rel} {s.value:.4g} (need {cmp})")
        return "\n".join(lines)


def _se(values: np.ndarray) -> float:
    return float(values.std(ddof=1) / math.sqrt(len(values)))


def brownian_check(W: np.ndarray | PathBundle, dt: float | None = None) -> StatReport:
    """Test ``W`` (shape ``(N, K+1, m)`` on a uniform grid of step ``dt``)
    against standard Brownian motion: increment means, ``Var(W_T) = T``
    and vanishing quadratic covariation between components."""
    if isinstance(W, PathBundle):
        dt = W.dt
        W = W.W
    if dt is None:
        raise SimulationError("grid step required")
    W = np.asarray(W, dtype=float)
    W = W[np.isfinite(W).all(axis=(1, 2))]
    N, K1, m = W.shape
    if N < 100:
        raise SimulationError(f"brownian_check needs at least 100 complete paths, got {N}")
    T = dt * (K1 - 1)
    dW = np.diff(W, axis=1)
    rep = StatReport("brownian_check", info={"paths": N, "T": T})
    c = SE_MULTIPLIER
    for a in range(m):
        inc = dW[:, :, a].ravel()
        rep.add_abs(f"mean increment w{a + 1}", inc.mean(), c * _se(inc))
        sq = W[:, -1, a] ** 2
        rep.add_abs(f"Var(W_T) - T, w{a + 1}", sq.mean() - T, c * _se(sq))
    for a in range(m):
        for b in range(a + 1, m):
            q = (dW[:, :, a] * dW[:, :, b]).sum(axis=1)
            rep.add_abs(f"[w{a + 1},w{b + 1}]_T", q.mean(), c * _se(q))
    return rep


def two_sample_check(a: np.ndarray, b: np.ndarray, min_size: int = 1000) -> StatReport:
    """Compare two ensembles of end states coordinate by coordinate: means,
    second moments (3 pooled standard errors) and a two-sample KS test."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise SimulationError(f"ensembles have mismatched shapes {a.shape} and {b.shape}")
    a = a[np.isfinite(a).all(axis=1)]
    b = b[np.isfinite(b).all(axis=1)]
    if min(len(a), len(b)) < min_size:
        raise SimulationError(f"each ensemble needs at least {min_size} finite states")
    rep = StatReport("two_sample_check", info={"size_a": len(a), "size_b": len(b)})
    c = SE_MULTIPLIER
    for i in range(a.shape[1]):
        u, v = a[:, i], b[:, i]
        rep.add_abs(f"mean x{i + 1}", u.mean() - v.mean(), c * math.hypot(_se(u), _se(v)))
        rep.add_abs(f"second moment x{i + 1}", (u ** 2).mean() - (v ** 2).mean(),
                    c * math.hypot(_se(u ** 2), _se(v ** 2)))
        rep.add_p(f"KS x{i + 1}", stats.ks_2samp(u, v).pvalue)
    return rep


@dataclass
class PathwiseDeviation:
    deviation: float
    threshold: float
    nodes: int

    @property
    def passed(self) -> bool:
        return self.deviation <= self.threshold


def composition_pathwise_check(T1: FiniteTransformation, T2: FiniteTransformation, paths: PathBundle,
                               constant: float = PATHWISE_CONSTANT) -> PathwiseDeviation:
    """Max deviation between ``P_T2(P_T1(X, W))`` and ``P_{T2 o T1}(X, W)``
    over shared nodes, state and noise together; threshold
    ``constant * sqrt(dt)``."""
    two_step = process_transform(T2, process_transform(T1, paths))
    direct = process_transform(compose(T2, T1), paths)
    K = min(len(two_step.t), len(direct.t))
    dev = 0.0
    nodes = 0
    for p in range(paths.n_paths):
        k = min(int(two_step.stop[p]), int(direct.stop[p]), K - 1) + 1
        if k <= 0:
            continue
        d = max(np.abs(two_step.X[p, :k] - direct.X[p, :k]).max(),
                np.abs(two_step.W[p, :k] - direct.W[p, :k]).max())
        dev = max(dev, float(d))
        nodes += k
    return PathwiseDeviation(dev, constant * math.sqrt(paths.dt), nodes)
