"""Command-line front end.

Exit codes: 0 success, 1 a check failed, 2 usage or unknown name,
3 a model object failed validation.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import io as mio
from .expr import (
    Const, DimensionError, Domain, Expr, ExprError, UndecidableError, evaluate_points, simplify, to_text,
    zero_test,
)
from .model import FiniteTransformation, InfinitesimalTransformation, Sde, validate
from .simulate import SimConfig, SimulationError, brownian_check, iter_chunks, process_transform, two_sample_check
from .symmetry import (
    SymmetryError, bracket, closure_check, determining_residuals, is_strong_symmetry, is_weak_symmetry,
    strong_reduction_solve, strong_reduction_verify,
)
from .transform import TransformError, pushforward, transform_sde

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INVALID = 0, 1, 2, 3
FIXTURES = ("ex51", "bm2d")


class UsageError(Exception):
    pass


class ValidationFailed(Exception):
    def __init__(self, name: str, report):
        super().__init__(f"{name} failed validation")
        self.name = name
        self.report = report


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("stochsym") / "fixtures" / f"{name}.json"))


def resolve_model_path(arg: str) -> Path:
    """A file path, or the name of a bundled fixture."""
    p = Path(arg)
    if p.is_file():
        return p
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    if stem in FIXTURES:
        return fixture_path(stem)
    raise UsageError(f"no such model file: {arg}")


@dataclass
class Workspace:
    """Loaded model objects keyed by name, plus output settings."""

    model: mio.ModelFile
    raw: dict
    out_dir: Path | None = None
    seed: int = 0
    extra_transforms: dict[str, FiniteTransformation] = field(default_factory=dict)

    @classmethod
    def open(cls, sde_arg: str, out_dir: str | None = None, seed: int = 0) -> "Workspace":
        path = resolve_model_path(sde_arg)
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise mio.ModelFileError(f"{path}: not valid JSON ({exc})") from None
        ws = cls(mio.loads(raw), raw, Path(out_dir) if out_dir else None, seed)
        ws.validate_all()
        return ws

    def validate_all(self) -> None:
        items = []
        if self.model.sde is not None:
            items.append(("sde", self.model.sde))
        items += [(f"transform {k}", T) for k, T in self.model.transforms.items()]
        items += [(f"symmetry {k}", V) for k, V in self.model.symmetries.items()]
        for name, obj in items:
            rep = validate(obj, self.model.domain)
            if not rep.passed:
                raise ValidationFailed(name, rep)

    @property
    def sde(self) -> Sde:
        if self.model.sde is None:
            raise UsageError("model file has no SDE (mu, sigma)")
        return self.model.sde

    def symmetry(self, name: str) -> InfinitesimalTransformation:
        try:
            return self.model.symmetries[name]
        except KeyError:
            raise UsageError(f"unknown symmetry {name!r} (have {', '.join(self.model.symmetries) or 'none'})") from None

    def symmetries(self, names: list[str] | None) -> dict[str, InfinitesimalTransformation]:
        names = names or list(self.model.symmetries)
        if not names:
            raise UsageError("no symmetries given or defined")
        return {n: self.symmetry(n) for n in names}

    def transform(self, arg: str) -> tuple[str, FiniteTransformation]:
        """A transform by name, or loaded from a model file (its first transform)."""
        if arg in self.model.transforms:
            return arg, self.model.transforms[arg]
        p = Path(arg)
        if p.is_file():
            mf = mio.load(p)
            if not mf.transforms:
                raise UsageError(f"{arg} defines no transformation")
            name, T = next(iter(mf.transforms.items()))
            rep = validate(T)
            if not rep.passed:
                raise ValidationFailed(f"transform {name}", rep)
            return name, T
        raise UsageError(f"unknown transformation {arg!r} (have {', '.join(self.model.transforms) or 'none'})")

    def write(self, filename: str, text: str) -> Path | None:
        if self.out_dir is None:
            return None
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / filename
        path.write_text(text)
        return path


# ---------------------------------------------------------------------------
# output helpers


def show(e: Expr, domain: Domain | None = None, n: int | None = None) -> str:
    """Readable text for ``e``; on a domain, identity-test constants print as constants."""
    if domain is not None:
        n = domain.n if n is None else n
        try:
            if zero_test(e, domain).passed:
                return "0"
            vals = evaluate_points(e, domain.sample())
            vals = vals[np.isfinite(vals)]
            if vals.size and np.ptp(vals) <= 1e-9 * (1 + abs(vals[0])):
                c = Fraction(float(vals[0])).limit_denominator(10_000)
                if zero_test(e - Const(c), domain).passed:
                    return to_text(Const(c), n)
        except UndecidableError:
            pass
    return to_text(simplify(e), n)


def _fmt_vec(v, domain=None, n=None) -> str:
    return "(" + ", ".join(show(e, domain, n) for e in v) + ")"


def _fmt_mat(a, domain=None, n=None) -> str:
    return "[" + ", ".join("[" + ", ".join(show(e, domain, n) for e in r) + "]" for r in a) + "]"


def _triad_dict(V: InfinitesimalTransformation) -> dict:
    return mio.symmetry_to_dict(V)


def _triad_text(V: InfinitesimalTransformation, domain: Domain | None = None) -> str:
    n = V.n
    return (f"Y = {_fmt_vec(V.Y, domain, n)}\n  C = {_fmt_mat(V.C, domain, n)}\n"
            f"  tau = {show(V.tau, domain, n)}")


def _emit(args, text: str, data) -> None:
    if args.format == "json":
        print(json.dumps(data, indent=2, default=float))
    else:
        print(text)


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    Workspace.open(args.sde, args.out, args.seed)
    _emit(args, "all objects valid", {"valid": True})
    return EXIT_OK


def cmd_check(args) -> int:
    ws = Workspace.open(args.sde, args.out, args.seed)
    reports = [determining_residuals(ws.sde, V, name) for name, V in ws.symmetries(args.sym).items()]
    ok = all(r.passed for r in reports)
    data = {"passed": ok, "reports": [r.as_dict() for r in reports]}
    ws.write("check.json", json.dumps(data, indent=2))
    _emit(args, "\n".join(str(r) for r in reports), data)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_transform(args) -> int:
    ws = Workspace.open(args.sde, args.out, args.seed)
    name, T = ws.transform(args.transform)
    new = transform_sde(T, ws.sde)
    tidy = Sde([simplify(e) for e in new.mu], [[simplify(e) for e in r] for r in new.sigma], new.domain)
    out = mio.ModelFile(new.n, new.m, new.domain, tidy)
    data = mio.dumps(out)
    path = ws.write(f"transformed_{name}.json", json.dumps(data, indent=2) + "\n")
    text = f"E_{name}(mu, sigma):\n  mu' = {_fmt_vec(new.mu, new.domain)}\n  sigma' = {_fmt_mat(new.sigma, new.domain)}"
    if path:
        text += f"\nwritten to {path}"
    _emit(args, text, data)
    return EXIT_OK


def cmd_bracket(args) -> int:
    ws = Workspace.open(args.sde, args.out, args.seed)
    if len(args.sym) != 2:
        raise UsageError("bracket takes exactly two symmetry names")
    a, b = args.sym
    W = bracket(ws.symmetry(a), ws.symmetry(b))
    weak = is_weak_symmetry(ws.sde, W) if ws.model.sde is not None else None
    data = {"bracket": [a, b], "result": _triad_dict(W), "is_symmetry": weak}
    text = f"[{a}, {b}]:\n  {_triad_text(W, ws.model.domain)}"
    if weak is not None:
        text += f"\n  symmetry of the SDE: {'yes' if weak else 'no'}"
    _emit(args, text, data)
    return EXIT_OK if weak in (True, None) else EXIT_FAIL


def cmd_closure(args) -> int:
    ws = Workspace.open(args.sde, args.out, args.seed)
    syms = ws.symmetries(args.sym)
    sc = closure_check(ws.sde, list(syms.values()))
    names = list(syms)
    data = {"basis": names, **sc.as_dict()}
    lines = [f"closure of {{{', '.join(names)}}}: {'closed' if sc.closed else 'NOT closed'} "
             f"(fit residual {sc.residual:.3g})"]
    k = len(names)
    for i in range(k):
        for j in range(i + 1, k):
            terms = [f"{sc.constants[i, j, l]:+.6g} {names[l]}" for l in range(k) if abs(sc.constants[i, j, l]) > 1e-9]
            lines.append(f"  [{names[i]}, {names[j]}] = {' '.join(terms) if terms else '0'}")
    ws.write("closure.json", json.dumps(data, indent=2))
    _emit(args, "\n".join(lines), data)
    return EXIT_OK if sc.closed and sc.brackets_symmetric.all() else EXIT_FAIL


def cmd_pushforward(args) -> int:
    ws = Workspace.open(args.sde, args.out, args.seed)
    name, T = ws.transform(args.transform)
    new = transform_sde(T, ws.sde) if ws.model.sde is not None else None
    rows, lines, ok = [], [], True
    for vname, V in ws.symmetries(args.sym).items():
        P = pushforward(T, V)
        entry = {"symmetry": vname, "result": _triad_dict(P)}
        lines.append(f"{name}_*({vname}):\n  {_triad_text(P, T.target)}")
        if new is not None:
            weak = is_weak_symmetry(new, P)
            strong = weak and is_strong_symmetry(new, P)
            entry.update(weak=weak, strong=strong)
            lines.append(f"  against E_{name}: {'strong' if strong else 'weak' if weak else 'not a'} symmetry")
            ok &= weak
        rows.append(entry)
    _emit(args, "\n".join(lines), {"transform": name, "pushforwards": rows})
    return EXIT_OK if ok else EXIT_FAIL


def cmd_reduce(args) -> int:
    ws = Workspace.open(args.sde, args.out, args.seed)
    syms = ws.symmetries(args.sym)
    closed_form = ws.transform(args.transform) if args.transform else None
    domain = closed_form[1].domain if closed_form else ws.model.domain
    res = strong_reduction_solve(list(syms.values()), args.anchor, domain, extent=args.extent, nodes=args.nodes)
    verify = res.verify_residual()
    data = {"basis": list(syms), "anchor": list(args.anchor), "nodes": args.nodes, "extent": args.extent,
            "verify_residual": verify, "passed": verify <= 1e-6}
    lines = [f"reduction of {{{', '.join(syms)}}} from anchor {tuple(args.anchor)}: "
             f"{res.points.size // res.points.shape[-1]} grid nodes",
             f"  Y_i(B) + B C_i, Y_i(eta) + tau_i eta: max residual {verify:.3g}"]
    if ws.model.sde is not None:
        strong = res.strong_residual(ws.sde)
        data["strong_residual"] = strong
        data["passed"] &= strong <= 1e-6
        lines.append(f"  pushed-forward symmetries strong on the grid: max residual {strong:.3g}")
    if closed_form:
        cname, T = closed_form
        eB, ee = res.compare(T.bmat, T.eta)
        sym_ok = strong_reduction_verify(list(syms.values()), T.bmat, T.eta, T.domain)
        data.update(closed_form=cname, max_error_B=eB, max_error_eta=ee, closed_form_verified=sym_ok)
        data["passed"] &= eB <= 1e-5 and ee <= 1e-5 and sym_ok
        lines.append(f"  vs {cname}: max |B - B_{cname}| = {eB:.3g}, max |eta - eta_{cname}| = {ee:.3g}, "
                     f"closed form solves the equations: {'yes' if sym_ok else 'no'}")
    if ws.out_dir is not None:
        flat = res.points.reshape(-1, res.points.shape[-1])
        Bf = res.B.reshape(len(flat), -1)
        table = np.column_stack([res.params.reshape(len(flat), -1), flat, Bf, res.eta.reshape(-1)])
        k, n, m = res.k, flat.shape[1], res.B.shape[-1]
        header = ([f"s{i + 1}" for i in range(k)] + [f"x{i + 1}" for i in range(n)]
                  + [f"B{i + 1}{j + 1}" for i in range(m) for j in range(m)] + ["eta"])
        ws.out_dir.mkdir(parents=True, exist_ok=True)
        np.savetxt(ws.out_dir / "reduction.csv", table, delimiter=",", header=",".join(header), comments="")
    _emit(args, "\n".join(lines), data)
    return EXIT_OK if data["passed"] else EXIT_FAIL


def _end_states(sde, cfg, T, test_time, keep_w=False):
    ends, ws_, alive = [], [], []
    for chunk in iter_chunks(sde, cfg):
        bundle = process_transform(T, chunk, until=test_time) if T is not None else chunk
        if bundle.t[-1] < test_time - 1e-12:
            ends.append(np.empty((0, sde.n)))
            alive.append(np.zeros(chunk.n_paths, dtype=bool))
            continue
        k = bundle.index_of(test_time)
        mask = bundle.alive(k)
        ends.append(bundle.X[mask, k])
        alive.append(mask)
        if keep_w:
            ws_.append(bundle.restrict(test_time).W)
    return np.vstack(ends), float(np.concatenate(alive).mean()), (np.vstack(ws_) if keep_w else None)


def cmd_simulate(args) -> int:
    ws = Workspace.open(args.sde, args.out, args.seed)
    sde = ws.sde
    x0 = args.x0 if args.x0 is not None else [0.0] * sde.n
    if len(x0) != sde.n:
        raise UsageError(f"--x0 needs {sde.n} coordinates")
    cfg = SimConfig(args.dt, args.horizon, args.paths, args.seed, tuple(x0))
    T = ws.transform(args.transform)[1] if args.transform else None
    at = args.at if args.at is not None else (cfg.horizon if T is None else None)
    ends, alive, horizons, csv_parts = [], [], [], []
    for chunk in iter_chunks(sde, cfg):
        bundle = process_transform(T, chunk) if T is not None else chunk
        horizons.append(bundle.t[bundle.stop])
        if at is not None:
            if bundle.t[-1] < at - 1e-12:
                alive.append(np.zeros(bundle.n_paths, dtype=bool))
            else:
                k = bundle.index_of(at)
                mask = bundle.alive(k)
                ends.append(bundle.X[mask, k])
                alive.append(mask)
        if ws.out_dir is not None:
            text = bundle.to_csv()
            csv_parts.append(text if not csv_parts else text.split("\n", 1)[1])
    horizons = np.concatenate(horizons)
    data = {"paths": cfg.n_paths, "dt": cfg.dt, "horizon": cfg.horizon, "seed": cfg.seed,
            "transform": args.transform, "at": at,
            "final_time": {"min": float(horizons.min()), "median": float(np.median(horizons)),
                           "max": float(horizons.max())}}
    lines = [f"simulated {cfg.n_paths} paths, dt = {cfg.dt}, horizon = {cfg.horizon}, seed = {cfg.seed}"
             + (f", transformed by {args.transform}" if T is not None else ""),
             f"  final times: min {horizons.min():.4g}, median {np.median(horizons):.4g}, max {horizons.max():.4g}"]
    if at is not None:
        e = np.vstack(ends) if ends else np.empty((0, sde.n))
        frac = float(np.concatenate(alive).mean())
        data.update(alive=frac, mean=e.mean(axis=0).tolist() if len(e) else None,
                    second_moment=(e ** 2).mean(axis=0).tolist() if len(e) else None)
        lines.append(f"  at t = {at}: alive {frac:.4f}")
        if len(e):
            lines.append(f"  mean {np.round(e.mean(axis=0), 6).tolist()}, "
                         f"second moments {np.round((e ** 2).mean(axis=0), 6).tolist()}")
    if csv_parts:
        ws.write("ensemble.csv", "".join(csv_parts))
        ws.write("summary.json", json.dumps(data, indent=2))
    _emit(args, "\n".join(lines), data)
    return EXIT_OK


@dataclass
class Stage:
    name: str
    passed: bool
    detail: str
    data: dict = field(default_factory=dict)


def run_example(fixture: str, paths: int = 2000, dt: float = 1e-3, seed: int = 42,
                out_dir: str | None = None) -> list[Stage]:
    """Run the whole pipeline on a bundled fixture and return one entry per stage."""
    if fixture not in FIXTURES:
        raise UsageError(f"unknown example {fixture!r} (choose from {', '.join(FIXTURES)})")
    stages: list[Stage] = []

    def stage(name, passed, detail, **data):
        stages.append(Stage(name, bool(passed), detail, data))
        return passed

    try:
        ws = Workspace.open(fixture, out_dir, seed)
    except ValidationFailed as exc:
        stage("validate", False, f"{exc.name}: {exc.report}")
        return stages
    stage("validate", True, "sde, transformations and symmetries valid")
    plan = ws.raw["pipeline"]
    sde = ws.sde

    syms = ws.symmetries(plan["symmetries"])
    reports = [determining_residuals(sde, V, n) for n, V in syms.items()]
    if not stage("symmetries", all(r.passed for r in reports),
                 ", ".join(f"{r.label} {'ok' if r.passed else 'FAIL'}" for r in reports)):
        return stages
    sc = closure_check(sde, list(syms.values()))
    stage("closure", sc.closed and sc.brackets_symmetric.all(), f"fit residual {sc.residual:.3g}",
          constants=sc.constants.tolist())

    basis_names = plan["reduce"]
    already = [n for n, V in syms.items() if n not in basis_names and is_strong_symmetry(sde, V)]
    basis = [ws.symmetry(n) for n in basis_names]
    tname, T = ws.transform(plan["transform"])
    res = strong_reduction_solve(basis, plan["anchor"], T.domain)
    verify = res.verify_residual()
    eB, ee = res.compare(T.bmat, T.eta)
    closed = strong_reduction_verify(basis, T.bmat, T.eta, T.domain)
    detail = (f"{{{', '.join(basis_names)}}}: residual {verify:.3g}; vs {tname}: B {eB:.3g}, eta {ee:.3g}"
              + (f"; already strong, skipped: {', '.join(already)}" if already else ""))
    stage("reduce", verify <= 1e-6 and eB <= 1e-5 and ee <= 1e-5 and closed, detail, skipped=already)

    new = transform_sde(T, sde)
    stage("transform", True, f"mu' = {_fmt_vec(new.mu, new.domain)}, sigma' = {_fmt_mat(new.sigma, new.domain)}")
    pushed = {nm: pushforward(T, ws.symmetry(nm)) for nm in basis_names}
    strong = {nm: is_strong_symmetry(new, P) for nm, P in pushed.items()}
    stage("strong", all(strong.values()),
          ", ".join(f"{tname}_*({nm}) {'strong' if s else 'NOT strong'}" for nm, s in strong.items()))

    test_time = plan["test_time"]
    cfg = SimConfig(dt, plan["horizon"], paths, seed, tuple(plan["x0"]))
    try:
        # the original SDE runs on the transformation's domain, where eta is bounded
        a, alive, W = _end_states(Sde(sde.mu, sde.sigma, T.domain), cfg, T, test_time, keep_w=True)
        b, alive_b, _ = _end_states(new, SimConfig(dt, test_time, paths, seed + 1, tuple(plan["x0"])), None, test_time)
        rep = two_sample_check(a, b)
        bro = brownian_check(W, dt)
        stage("montecarlo", rep.passed and bro.passed,
              f"P_{tname} ensemble vs direct simulation at t = {test_time}: two-sample "
              f"{'pass' if rep.passed else 'FAIL'}, Brownian check {'pass' if bro.passed else 'FAIL'}, "
              f"alive {alive:.4f}",
              two_sample=rep.as_dict(), brownian=bro.as_dict())
    except SimulationError as exc:
        stage("montecarlo", False, str(exc))
    return stages


def cmd_example(args) -> int:
    stages = run_example(args.fixture, args.paths, args.dt, args.seed, args.out)
    ok = all(s.passed for s in stages)
    data = {"example": args.fixture, "passed": ok,
            "stages": [{"stage": s.name, "passed": s.passed, "detail": s.detail, **s.data} for s in stages]}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"example_{args.fixture}.json").write_text(json.dumps(data, indent=2, default=float))
    text = "\n".join(f"[{'pass' if s.passed else 'FAIL'}] {s.name}: {s.detail}" for s in stages)
    if not ok:
        failed = next(s.name for s in stages if not s.passed)
        text += f"\nstage failed: {failed}"
    _emit(args, text, data)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--out", metavar="DIR", help="directory for written reports and data")
    common.add_argument("--seed", type=int, default=42)

    model = argparse.ArgumentParser(add_help=False, parents=[common])
    model.add_argument("--sde", required=True, metavar="FILE", help="model file, or a bundled fixture name")

    p = argparse.ArgumentParser(prog="stochsym", description="Symmetries of stochastic differential equations.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[model], help="check model invariants")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("check", parents=[model], help="determining equations for named symmetries")
    s.add_argument("--sym", nargs="+", metavar="NAME")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("transform", parents=[model], help="write the transformed SDE")
    s.add_argument("--transform", required=True, metavar="NAME|FILE")
    s.set_defaults(func=cmd_transform)

    s = sub.add_parser("bracket", parents=[model], help="bracket of two symmetries")
    s.add_argument("--sym", nargs=2, required=True, metavar="NAME")
    s.set_defaults(func=cmd_bracket)

    s = sub.add_parser("closure", parents=[model], help="structure constants of a symmetry basis")
    s.add_argument("--sym", nargs="+", metavar="NAME")
    s.set_defaults(func=cmd_closure)

    s = sub.add_parser("pushforward", parents=[model], help="push symmetries forward along a transformation")
    s.add_argument("--transform", required=True, metavar="NAME|FILE")
    s.add_argument("--sym", nargs="+", metavar="NAME")
    s.set_defaults(func=cmd_pushforward)

    s = sub.add_parser("reduce", parents=[model], help="turn commuting symmetries into strong ones")
    s.add_argument("--sym", nargs="+", metavar="NAME")
    s.add_argument("--anchor", nargs="+", type=float, required=True)
    s.add_argument("--transform", metavar="NAME|FILE", help="closed-form (id, B, eta) to compare against")
    s.add_argument("--extent", type=float, default=0.5)
    s.add_argument("--nodes", type=int, default=41)
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("simulate", parents=[model], help="Euler-Maruyama ensemble, optionally transformed")
    s.add_argument("--transform", metavar="NAME|FILE")
    s.add_argument("--paths", type=int, default=1000)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--horizon", type=float, default=1.0)
    s.add_argument("--x0", nargs="+", type=float)
    s.add_argument("--at", type=float, help="time at which to summarise the ensemble")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("example", parents=[common], help="run a bundled worked example end to end")
    s.add_argument("fixture", metavar="FIXTURE", help="one of: " + ", ".join(FIXTURES))
    s.add_argument("--paths", type=int, default=2000)
    s.add_argument("--dt", type=float, default=1e-3)
    s.set_defaults(func=cmd_example)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, DimensionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationFailed as exc:
        print(f"error: {exc}\n{exc.report}", file=sys.stderr)
        return EXIT_INVALID
    except mio.ModelFileError as exc:
        print(f"error: invalid model file: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (TransformError, SymmetryError, SimulationError, ExprError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
