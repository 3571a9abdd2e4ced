"""JSON model files.

A model file is one JSON object.  Every coefficient is a string in the
expression grammar (``x, y, z`` aliases allowed when ``n <= 3``)::

    {
      "n": 2, "m": 2,
      "domain": {"box": [[-10, 10], [-10, 10]],
                 "exclusions": ["x^2 + y^2"],      # optional
                 "margin": 0.01},                  # optional, default 1e-3 * diagonal
      "mu": ["x/(x^2 + y^2)", "y/(x^2 + y^2)"],
      "sigma": [["1", "0"], ["0", "1"]],
      "transforms": {
        "T": {"phi": ["x", "y"], "phi_inverse": ["x", "y"],
              "B": [["1", "0"], ["0", "1"]], "eta": "1"}
      },
      "symmetries": {
        "V1": {"Y": ["x", "y"], "C": [["0", "0"], ["0", "0"]], "tau": "2"}
      }
    }

``mu``/``sigma`` are optional (a file may carry only transformations or
symmetries).  A file may also *be* a single transformation (top-level
``phi``...) or a single symmetry (top-level ``Y``...).  Transformations may
carry their own ``domain`` and ``codomain``; they default to the file domain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .expr import Domain, parse, to_text
from .model import FiniteTransformation, InfinitesimalTransformation, Sde


class ModelFileError(ValueError):
    pass


@dataclass
class ModelFile:
    n: int
    m: int
    domain: Domain
    sde: Sde | None = None
    transforms: dict[str, FiniteTransformation] = field(default_factory=dict)
    symmetries: dict[str, InfinitesimalTransformation] = field(default_factory=dict)


def _exprs(items, n, where):
    try:
        return [parse(s, n) for s in items]
    except Exception as exc:
        raise ModelFileError(f"{where}: {exc}") from exc


def _matrix(rows, n, where):
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise ModelFileError(f"{where}: expected a list of rows")
    return [_exprs(r, n, where) for r in rows]


def domain_from_dict(d: dict, n: int) -> Domain:
    try:
        box = d["box"]
    except (KeyError, TypeError):
        raise ModelFileError("domain needs a 'box' entry") from None
    if len(box) != n:
        raise ModelFileError(f"domain box has {len(box)} intervals, expected {n}")
    excl = _exprs(d.get("exclusions", []), n, "domain.exclusions")
    return Domain(tuple(b[0] for b in box), tuple(b[1] for b in box), tuple(excl), d.get("margin"))


def domain_to_dict(dom: Domain) -> dict:
    out = {"box": [[lo, hi] for lo, hi in zip(dom.low, dom.high)],
           "exclusions": [to_text(g, dom.n) for g in dom.exclusions]}
    if dom.margin is not None:
        out["margin"] = dom.margin
    return out


def transform_from_dict(d: dict, n: int, domain: Domain, where: str = "transform") -> FiniteTransformation:
    try:
        phi = _exprs(d["phi"], n, f"{where}.phi")
        inv = _exprs(d["phi_inverse"], n, f"{where}.phi_inverse")
        B = _matrix(d["B"], n, f"{where}.B")
        eta = parse(d["eta"], n)
    except KeyError as exc:
        raise ModelFileError(f"{where}: missing field {exc}") from None
    except ModelFileError:
        raise
    except Exception as exc:
        raise ModelFileError(f"{where}: {exc}") from exc
    dom = domain_from_dict(d["domain"], n) if "domain" in d else domain
    cod = domain_from_dict(d["codomain"], n) if "codomain" in d else None
    return FiniteTransformation(phi, inv, B, eta, dom, cod)


def symmetry_from_dict(d: dict, n: int, where: str = "symmetry") -> InfinitesimalTransformation:
    try:
        Y = _exprs(d["Y"], n, f"{where}.Y")
        C = _matrix(d["C"], n, f"{where}.C")
        tau = parse(d["tau"], n)
    except KeyError as exc:
        raise ModelFileError(f"{where}: missing field {exc}") from None
    except ModelFileError:
        raise
    except Exception as exc:
        raise ModelFileError(f"{where}: {exc}") from exc
    return InfinitesimalTransformation(Y, C, tau)


def loads(data: dict) -> ModelFile:
    if not isinstance(data, dict):
        raise ModelFileError("model file must be a JSON object")
    try:
        n = int(data["n"]) if "n" in data else len(data.get("mu") or data.get("phi") or data.get("Y"))
    except TypeError:
        raise ModelFileError("cannot infer dimension n") from None
    if "m" in data:
        m = int(data["m"])
    elif "sigma" in data:
        m = len(data["sigma"][0])
    elif "B" in data:
        m = len(data["B"])
    elif "C" in data:
        m = len(data["C"])
    else:
        m = n
    domain = domain_from_dict(data["domain"], n) if "domain" in data else Domain.box(n)
    mf = ModelFile(n, m, domain)
    try:
        if "mu" in data or "sigma" in data:
            mf.sde = Sde(_exprs(data["mu"], n, "mu"), _matrix(data["sigma"], n, "sigma"), domain)
        if "phi" in data:
            mf.transforms["T"] = transform_from_dict(data, n, domain)
        if "Y" in data:
            mf.symmetries["V"] = symmetry_from_dict(data, n)
        for name, d in (data.get("transforms") or {}).items():
            mf.transforms[name] = transform_from_dict(d, n, domain, f"transforms.{name}")
        for name, d in (data.get("symmetries") or {}).items():
            mf.symmetries[name] = symmetry_from_dict(d, n, f"symmetries.{name}")
    except KeyError as exc:
        raise ModelFileError(f"missing field {exc}") from None
    except ModelFileError:
        raise
    except Exception as exc:
        raise ModelFileError(str(exc)) from exc
    for obj in [mf.sde, *mf.transforms.values(), *mf.symmetries.values()]:
        if obj is not None and (obj.n != n or obj.m != m):
            raise ModelFileError(f"object of shape (n={obj.n}, m={obj.m}) in a file declaring n={n}, m={m}")
    return mf


def load(path) -> ModelFile:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: invalid JSON ({exc})") from exc
    return loads(data)


def _txt(e, n):
    return to_text(e, n)


def sde_to_dict(sde: Sde) -> dict:
    n = sde.n
    return {
        "n": n, "m": sde.m,
        "domain": domain_to_dict(sde.domain),
        "mu": [_txt(e, n) for e in sde.mu],
        "sigma": [[_txt(e, n) for e in row] for row in sde.sigma],
    }


def transform_to_dict(T: FiniteTransformation) -> dict:
    n = T.n
    out = {
        "phi": [_txt(e, n) for e in T.phi],
        "phi_inverse": [_txt(e, n) for e in T.phi_inverse],
        "B": [[_txt(e, n) for e in row] for row in T.bmat],
        "eta": _txt(T.eta, n),
        "domain": domain_to_dict(T.domain),
    }
    if T.codomain is not None:
        out["codomain"] = domain_to_dict(T.codomain)
    return out


def symmetry_to_dict(V: InfinitesimalTransformation) -> dict:
    n = V.n
    return {"Y": [_txt(e, n) for e in V.Y],
            "C": [[_txt(e, n) for e in row] for row in V.C],
            "tau": _txt(V.tau, n)}


def dumps(mf: ModelFile) -> dict:
    out: dict = {"n": mf.n, "m": mf.m, "domain": domain_to_dict(mf.domain)}
    if mf.sde is not None:
        out.update(sde_to_dict(mf.sde))
    if mf.transforms:
        out["transforms"] = {k: transform_to_dict(T) for k, T in mf.transforms.items()}
    if mf.symmetries:
        out["symmetries"] = {k: symmetry_to_dict(V) for k, V in mf.symmetries.items()}
    return out


def save(mf: ModelFile, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(dumps(mf), indent=2) + "\n")
    return path
