"""System specification documents, the built-in catalog, and the load-time gate.

A document is a flat TOML file (JSON with the same keys is also accepted)::

    name = "aa-oscillator"
    n = 1
    coordinates = ["th", "I"]        # 2n names; canonical omega pairs x_i with x_{n+i}
    omega = "canonical"              # or a 2n x 2n array of expression strings
    h = "I"
    E = ["0", "I^2"]                 # optional symmetry generator, 2n expressions
    x0 = [0.3, 0.5]                  # optional default initial point
    description = "..."

    [domain]                         # box; scalars apply to every coordinate
    lo = [-3.0, 0.25]
    hi = [3.0, 1.0]

    [constants]                      # optional named constants
    k = 2.0

    [catalog]                        # free-form metadata
    expect_symmetry = true
"""

from __future__ import annotations

import json
import sys as _sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..errors import NumericalDomainError, ValidationError
from ..geometry import exterior_derivative
from ..hamiltonian import HamiltonianSystem, SymplecticStructure, symmetry_residual
from ..tolerances import DEFAULTS
from .expr import BUILTIN_CONSTANTS, CompiledExpressions, is_constant, parse_expression

if _sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class DocumentError(ValueError):
    """The document is malformed (wrong keys, counts or types)."""


@dataclass
class SystemSpecDocument:
    name: str
    n: int
    coordinates: list
    h: str
    omega: Union[str, list] = "canonical"
    E: Optional[list] = None
    domain: Optional[tuple] = None
    constants: dict = field(default_factory=dict)
    x0: Optional[list] = None
    description: str = ""
    catalog: dict = field(default_factory=dict)
    source: str = ""


_KEYS = {"name", "n", "coordinates", "h", "omega", "E", "domain", "constants", "x0", "description", "catalog"}


def document_from_mapping(data: dict, source: str = "") -> SystemSpecDocument:
    unknown = set(data) - _KEYS
    if unknown:
        raise DocumentError(f"unknown keys in system document: {sorted(unknown)}")
    for key in ("name", "n", "coordinates", "h"):
        if key not in data:
            raise DocumentError(f"system document is missing {key!r}")
    n = data["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise DocumentError(f"n must be a positive integer, got {n!r}")
    m = 2 * n
    coords = list(data["coordinates"])
    if len(coords) != m or len(set(coords)) != m or not all(isinstance(c, str) for c in coords):
        raise DocumentError(f"coordinates must be {m} distinct names")
    omega = data.get("omega", "canonical")
    if isinstance(omega, str):
        if omega != "canonical":
            raise DocumentError(f"omega must be 'canonical' or a matrix, got {omega!r}")
    elif len(omega) != m or any(len(row) != m for row in omega):
        raise DocumentError(f"omega matrix must be {m} x {m}")
    E = data.get("E")
    if E is not None and len(E) != m:
        raise DocumentError(f"E needs {m} components, got {len(E)}")
    domain = data.get("domain")
    if domain is not None:
        if "lo" not in domain or "hi" not in domain:
            raise DocumentError("domain needs 'lo' and 'hi'")
        domain = (domain["lo"], domain["hi"])
    x0 = data.get("x0")
    if x0 is not None and len(x0) != m:
        raise DocumentError(f"x0 needs {m} entries")
    constants = dict(data.get("constants", {}))
    clash = set(constants) & set(coords)
    if clash:
        raise DocumentError(f"constants shadow coordinates: {sorted(clash)}")
    return SystemSpecDocument(
        name=str(data["name"]), n=n, coordinates=coords, h=str(data["h"]), omega=omega,
        E=None if E is None else [str(e) for e in E], domain=domain, constants=constants,
        x0=x0, description=str(data.get("description", "")), catalog=dict(data.get("catalog", {})),
        source=source,
    )


def parse_document(text: str, fmt: str = "toml", source: str = "") -> SystemSpecDocument:
    try:
        data = json.loads(text) if fmt == "json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise DocumentError(f"cannot parse {source or 'document'}: {exc}") from exc
    return document_from_mapping(data, source)


def load_document(path) -> SystemSpecDocument:
    path = Path(path)
    fmt = "json" if path.suffix.lower() == ".json" else "toml"
    return parse_document(path.read_text(encoding="utf-8"), fmt, str(path))


def _catalog_dir():
    return resources.files("nonnoether") / "catalog"


def catalog_names() -> list:
    return sorted(p.name[: -len(".toml")] for p in _catalog_dir().iterdir() if p.name.endswith(".toml"))


def catalog_document(name: str) -> SystemSpecDocument:
    res = _catalog_dir() / f"{name}.toml"
    if not res.is_file():
        raise FileNotFoundError(f"no catalog system named {name!r} (known: {', '.join(catalog_names())})")
    return parse_document(res.read_text(encoding="utf-8"), "toml", f"catalog:{name}")


def resolve_document(ref: str) -> SystemSpecDocument:
    """A catalog name, or a path to a .toml/.json document."""
    path = Path(ref)
    if path.is_file():
        return load_document(path)
    if ref in catalog_names():
        return catalog_document(ref)
    raise FileNotFoundError(f"{ref!r} is neither a readable file nor a catalog system")


# --------------------------------------------------------------------------
# loading


def _gate_points(doc, count, seed):
    m = 2 * doc.n
    lo, hi = doc.domain if doc.domain is not None else (-1.0, 1.0)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (m,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (m,))
    return lo + (hi - lo) * np.random.default_rng(seed).random((count, m))


def _omega_structure(doc, names, consts):
    m = 2 * doc.n
    if doc.omega == "canonical":
        return SymplecticStructure.canonical(doc.n), None
    exprs = [parse_expression(str(a), names) for row in doc.omega for a in row]
    compiled = CompiledExpressions(exprs, doc.coordinates, consts, shape=(m, m))
    if all(is_constant(e) for e in exprs):
        return None, compiled
    return SymplecticStructure(compiled), compiled


def load_system(doc: SystemSpecDocument, gate_points: int = 20, seed: int = 0) -> HamiltonianSystem:
    """Wire a document into a :class:`HamiltonianSystem` and run the load gate.

    Fatal gates: antisymmetry of omega (10 points), nondegeneracy and
    closedness (20 points), finiteness of h. A symmetry generator that fails
    to commute with the flow is reported in ``gate_report`` but does not stop
    loading. Raises :class:`ValidationError` listing every fatal failure.
    """
    names = list(doc.coordinates) + list(doc.constants)
    consts = {k: float(v) for k, v in doc.constants.items()}
    h_expr = parse_expression(doc.h, names)
    h = CompiledExpressions([h_expr], doc.coordinates, consts)
    E = None
    if doc.E is not None:
        E = CompiledExpressions([parse_expression(e, names) for e in doc.E], doc.coordinates, consts)
    omega, omega_exprs = _omega_structure(doc, names, consts)

    pts = _gate_points(doc, gate_points, seed)
    failures = []
    report = {}

    if omega_exprs is not None:
        mats = []
        for p in pts:
            try:
                mats.append(omega_exprs(p))
            except NumericalDomainError as exc:
                failures.append({"gate": "omega", "detail": f"not evaluable at {p.tolist()}: {exc}"})
                break
        if mats:
            worst, where = 0.0, None
            for p, M in zip(pts[:10], mats[:10]):
                r = float(np.max(np.abs(M + M.T)) / (1.0 + np.max(np.abs(M))))
                if r > worst:
                    worst, where = r, p
            report["antisymmetry"] = {"max_residual": worst, "points": min(10, len(mats))}
            if worst > DEFAULTS["antisymmetry"]:
                failures.append({"gate": "antisymmetry",
                                 "detail": f"omega + omega^T = {worst:.3e} at {where.tolist()}"})
        if omega is None and mats and not failures:
            omega = SymplecticStructure.from_matrix(mats[0]) if abs(np.linalg.det(mats[0])) > DEFAULTS["nondegeneracy"] else None
            if omega is None:
                failures.append({"gate": "nondegeneracy", "detail": "constant omega is degenerate"})

    if omega is not None and not failures:
        dets = np.array([abs(np.linalg.det(omega.at(p))) for p in pts])
        report["nondegeneracy"] = {"min_abs_det": float(dets.min()), "points": len(pts)}
        bad = np.flatnonzero(dets <= DEFAULTS["nondegeneracy"])
        if bad.size:
            failures.append({"gate": "nondegeneracy",
                             "detail": f"|det omega| = {dets[bad[0]]:.3e} at {pts[bad[0]].tolist()}"})
        else:
            closed = [exterior_derivative(omega.form, 2, p).norm_inf() if 2 < 2 * doc.n else 0.0 for p in pts]
            report["closedness"] = {"max_residual": float(max(closed)), "points": len(pts)}
            k = int(np.argmax(closed))
            if closed[k] > DEFAULTS["closedness"]:
                failures.append({"gate": "closedness",
                                 "detail": f"|d omega| = {closed[k]:.3e} at {pts[k].tolist()}"})

    for p in pts:
        try:
            h(p)
        except NumericalDomainError as exc:
            failures.append({"gate": "hamiltonian", "detail": f"h not evaluable at {p.tolist()}: {exc}"})
            break

    if failures:
        raise ValidationError(failures)

    system = HamiltonianSystem(
        n=doc.n, omega=omega, h=h, E=E, box=doc.domain, name=doc.name,
        coords=tuple(doc.coordinates), metadata=dict(doc.catalog),
    )
    if E is not None:
        checks = [symmetry_residual(system, p) for p in pts]
        res = max(c.residual for c in checks)
        wit = min(c.witness for c in checks)
        entry = {"max_residual": res, "min_witness": wit, "points": len(pts)}
        if res > DEFAULTS["symmetry_residual"]:
            entry["warning"] = f"[E, X_h] does not vanish (max {res:.3e}); invariants are not expected to be conserved"
        report["symmetry"] = entry
    return replace(system, gate_report=report)


def load(ref: str, **kwargs) -> HamiltonianSystem:
    """Resolve a catalog name or file path and load it."""
    return load_system(resolve_document(ref), **kwargs)


def default_x0(doc: SystemSpecDocument, system: HamiltonianSystem) -> np.ndarray:
    if doc.x0 is not None:
        return np.asarray(doc.x0, dtype=float)
    if system.box is not None:
        return 0.5 * (system.box[0] + system.box[1])
    return np.zeros(system.dim)


__all__ = [
    "BUILTIN_CONSTANTS",
    "DocumentError",
    "SystemSpecDocument",
    "catalog_document",
    "catalog_names",
    "default_x0",
    "document_from_mapping",
    "load",
    "load_document",
    "load_system",
    "parse_document",
    "resolve_document",
]
