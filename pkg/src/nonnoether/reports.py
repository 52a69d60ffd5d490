"""Report assembly for the command-line tool.

Every report is a plain dict with the fixed top-level layout
``system, gates, invariants, drift, meta``. Gate blocks carry ``passed`` and
``gated``; a gate with ``gated = False`` is reported but does not affect the
exit status (for example the Lenard ladder when the torsion is not small).
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import __version__
from .dynamics import TrajectoryConfig, drift_report, integrate, invariant_fields, pointwise_conservation
from .engine import fn_torsion, invariant_bundle, involution_matrix, lenard_residual, recursion_field
from .hamiltonian import HamiltonianSystem, liouville_residuals, symmetry_residual
from .tolerances import scaled

LENARD_K = 4
INVOLUTION_K = 3


# --------------------------------------------------------------------------
# serialization


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_plain(obj.real), _plain(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _write(obj, out, indent):
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(f"{pad}  {json.dumps(k)}: ")
            _write(v, out, indent + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        out.append("[")
        for i, v in enumerate(obj):
            _write(v, out, indent + 1)
            if i < len(obj) - 1:
                out.append(", ")
        out.append("]")
    elif isinstance(obj, float):
        out.append(format(obj, ".17g") if math.isfinite(obj) else "null")
    else:
        out.append(json.dumps(obj))


def dumps(report) -> str:
    """Deterministic JSON: insertion-ordered keys, 17 significant digits, NaN/inf as null."""
    out = []
    _write(_plain(report), out, 0)
    return "".join(out) + "\n"


def rows_to_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(format(float(v), ".17g") for v in row) for row in rows)
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# helpers


def system_block(sys: HamiltonianSystem) -> dict:
    block = {"name": sys.name, "n": sys.n, "coordinates": list(sys.coords), "has_symmetry": sys.E is not None}
    if sys.box is not None:
        block["domain"] = {"lo": sys.box[0], "hi": sys.box[1]}
    block["metadata"] = dict(sys.metadata)
    block["load_gate"] = sys.gate_report or {}
    return block


def _meta(seed, tol):
    return {"seed": seed, "tolerances": dict(tol), "version": __version__}


def _report(sys, gates, invariants, drift, seed, tol) -> dict:
    return {"system": system_block(sys), "gates": gates, "invariants": invariants, "drift": drift,
            "meta": _meta(seed, tol)}


def gates_passed(report) -> bool:
    return all(g["passed"] for g in report["gates"].values() if g.get("gated", True))


def expects_symmetry(sys: HamiltonianSystem) -> bool:
    return bool(sys.metadata.get("expect_symmetry", True))


def bundle_dict(b) -> dict:
    return {
        "point": b.point,
        "l": b.l,
        "lambda": b.lam.real,
        "lambda_imag": b.lam.imag,
        "mu_hat": b.mu_hat,
        "cross_residuals": b.cross_residuals,
        "trace_residuals": b.trace_residuals,
        "pairing_gap": b.pairing_gap,
    }


# --------------------------------------------------------------------------
# check


def run_check(sys: HamiltonianSystem, points: int = 20, seed: int = 0, tol: dict = None) -> dict:
    """Structural gates, invariant consistency, torsion, Lenard ladder and involution."""
    tol = scaled() if tol is None else tol
    pts = sys.sample_points(points, seed)
    gates = {}

    lv = [liouville_residuals(sys, p) for p in pts]
    r_omega = max(r.omega for r in lv)
    r_W = max(r.bivector for r in lv)
    gates["liouville"] = {
        "passed": r_omega <= tol["liouville"] and r_W <= tol["liouville"],
        "omega_residual": r_omega, "bivector_residual": r_W, "tolerance": tol["liouville"],
    }

    invariants = None
    if sys.E is not None:
        checks = [symmetry_residual(sys, p) for p in pts]
        res = max(c.residual for c in checks)
        wit = min(c.witness for c in checks)
        expected = expects_symmetry(sys)
        if expected:
            passed = res <= tol["symmetry_residual"] and wit >= tol["symmetry_witness_min"]
        else:
            passed = res >= tol["negative_control_min"]
        gates["symmetry"] = {
            "passed": passed, "expected": expected, "residual": res, "witness": wit,
            "tolerance": tol["symmetry_residual"], "witness_min": tol["symmetry_witness_min"],
            "negative_control_min": tol["negative_control_min"],
        }
        gates.update(_invariant_gates(sys, pts, tol, expected))
        invariants = [bundle_dict(invariant_bundle(sys, p)) for p in pts[:1]]
    return _report(sys, gates, invariants, None, seed, tol)


def _invariant_gates(sys, pts, tol, expected) -> dict:
    gates = {}
    fields = invariant_fields(sys)
    conserved = [(name, f) for name, f in fields if name.startswith(("l_", "mu_")) and
                 int(name.split("_")[1]) <= sys.n]
    brackets = {name: pointwise_conservation(sys, f, pts) for name, f in conserved}
    worst = max(brackets.values())
    # a non-commuting generator has no reason to produce conserved quantities
    gates["conservation"] = {"passed": worst <= tol["conservation_bracket"], "gated": expected,
                             "brackets": brackets, "tolerance": tol["conservation_bracket"]}

    bundles = [invariant_bundle(sys, p) for p in pts]
    tr = max(float(np.max(b.trace_residuals)) for b in bundles)
    gap = max(b.pairing_gap for b in bundles)
    gates["spectral"] = {"passed": tr <= tol["trace_consistency"] and gap <= tol["pairing_gap"],
                         "trace_residual": tr, "pairing_gap": gap,
                         "trace_tolerance": tol["trace_consistency"], "pairing_tolerance": tol["pairing_gap"]}
    cross = max(float(np.max(b.cross_residuals)) for b in bundles)
    gates["cross_formula"] = {"passed": cross <= tol["cross_formula"], "residual": cross,
                              "tolerance": tol["cross_formula"]}

    A = recursion_field(sys)
    tors = max(fn_torsion(A, p).max_residual for p in pts)
    flat = tors <= tol["torsion"]
    gates["torsion"] = {"passed": flat, "gated": expected, "max_residual": tors, "tolerance": tol["torsion"]}

    # the Lenard ladder and involution are only implied by vanishing torsion
    lens = [lenard_residual(sys, p, LENARD_K) for p in pts]
    norm = np.max([r.normalized for r in lens], axis=0)
    raw = np.max([r.unnormalized for r in lens], axis=0)
    gates["lenard"] = {"passed": bool(np.all(norm <= tol["lenard"])), "gated": flat and expected,
                       "normalized": norm, "unnormalized": raw, "tolerance": tol["lenard"]}
    inv = involution_matrix(sys, pts, INVOLUTION_K)
    gates["involution"] = {"passed": float(inv.max()) <= tol["involution"], "gated": flat and expected,
                           "max_bracket": float(inv.max()), "matrix": inv, "tolerance": tol["involution"]}
    return gates


# --------------------------------------------------------------------------
# invariants


def invariant_rows(sys: HamiltonianSystem, pts):
    bundles = [invariant_bundle(sys, p) for p in pts]
    header = list(sys.coords) + [f"l_{k + 1}" for k in range(sys.n)] + \
        [f"lam_{k + 1}" for k in range(sys.n)] + [f"mu_{k + 1}" for k in range(sys.dim)]
    rows = [list(b.point) + list(b.l) + list(b.lam.real) + list(b.mu_hat) for b in bundles]
    return bundles, header, rows


def run_invariants(sys: HamiltonianSystem, pts, seed=None, tol: dict = None):
    """Invariant bundles at ``pts``; returns ``(report, csv_text)``."""
    tol = scaled() if tol is None else tol
    sys.require_E()
    bundles, header, rows = invariant_rows(sys, pts)
    tr = max(float(np.max(b.trace_residuals)) for b in bundles)
    gap = max(b.pairing_gap for b in bundles)
    cross = max(float(np.max(b.cross_residuals)) for b in bundles)
    gates = {
        "spectral": {"passed": tr <= tol["trace_consistency"] and gap <= tol["pairing_gap"],
                     "trace_residual": tr, "pairing_gap": gap},
        "cross_formula": {"passed": cross <= tol["cross_formula"], "residual": cross},
    }
    report = _report(sys, gates, [bundle_dict(b) for b in bundles], None, seed, tol)
    return report, rows_to_csv(header, rows)


# --------------------------------------------------------------------------
# integrate


def run_integrate(sys: HamiltonianSystem, x0, cfg: TrajectoryConfig, tol: dict = None):
    """Trajectory plus drift report; returns ``(report, csv_text)``."""
    tol = scaled() if tol is None else tol
    traj = integrate(sys, x0, cfg)
    fields = invariant_fields(sys) if sys.E is not None else []
    drift = drift_report(sys, traj, fields)

    gates = {}
    energy = drift["h"]
    gates["energy_drift"] = {"passed": energy.max_rel <= tol["energy_drift"], "max_rel": energy.max_rel,
                             "tolerance": tol["energy_drift"]}
    if fields:
        worst = max((e.max_rel for e in drift.entries[1:] if e.error is None), default=0.0)
        errors = {e.name: e.error for e in drift.entries if e.error is not None}
        gates["invariant_drift"] = {"passed": worst <= tol["invariant_drift"] and not errors,
                                    "gated": expects_symmetry(sys), "max_rel": worst,
                                    "tolerance": tol["invariant_drift"], "errors": errors}
    drift_block = {
        "dt": cfg.dt, "steps": cfg.steps, "T": cfg.dt * cfg.steps, "x0": np.asarray(x0, dtype=float),
        "final": traj.final, "domain_exit_step": traj.domain_exit_step,
        "entries": {e.name: {"initial": e.initial, "max_abs": e.max_abs, "max_rel": e.max_rel,
                             "t_at_max": e.t_at_max, "error": e.error} for e in drift.entries},
    }
    report = _report(sys, gates, None, drift_block, None, tol)

    names = drift.names()
    header = ["t"] + list(sys.coords) + names
    rows = [[t] + list(x) + [drift.series[name][i] for name in names]
            for i, (t, x) in enumerate(zip(traj.t, traj.x))]
    return report, rows_to_csv(header, rows)
