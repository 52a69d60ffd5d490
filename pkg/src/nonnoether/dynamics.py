"""Trajectories of Hamilton's equations and drift of invariants along them."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .engine import bundle_from_matrices, omega_E
from .errors import DomainExitWarning, IntegrationError
from .geometry import DEFAULT_EPS, as_point, gradient, jacobian
from .hamiltonian import HamiltonianSystem, poisson_bracket


@dataclass(frozen=True)
class TrajectoryConfig:
    dt: float
    steps: int
    newton_tol: float = 1e-12
    newton_max_iters: int = 50
    stride: int = 10
    reverse: bool = False  # step with -dt, for reversibility checks

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be a positive finite number, got {self.dt}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    dt: float
    stride: int
    domain_exit_step: Optional[int] = None
    solver_evals: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]


def integrate(sys: HamiltonianSystem, x0, cfg: TrajectoryConfig, eps: float = DEFAULT_EPS) -> Trajectory:
    """Implicit midpoint rule ``x+ = x + dt X_h((x + x+)/2)``.

    Each step is solved by a simplified Newton iteration whose finite-difference
    Jacobian is reused across steps and refreshed when the iteration stops
    contracting; a singular Jacobian falls back to fixed-point iteration.
    """
    x = as_point(x0).copy()
    m = x.size
    dt = -float(cfg.dt) if cfg.reverse else float(cfg.dt)
    eye = np.eye(m)

    def f(y):
        return sys.omega.inverse_at(y).T @ gradient(sys.h, y, eps)

    def fresh_inverse(mid):
        try:
            return np.linalg.inv(eye - 0.5 * dt * jacobian(f, mid, eps))
        except np.linalg.LinAlgError:
            return None

    store_t, store_x = [0.0], [x.copy()]
    exit_step = None
    evals = 0
    v = f(x)
    Jinv = fresh_inverse(x)
    for step in range(1, cfg.steps + 1):
        z = x + dt * v
        prev = math.inf
        refreshed = False
        for _ in range(cfg.newton_max_iters):
            mid = 0.5 * (x + z)
            fm = f(mid)
            evals += 1
            F = z - x - dt * fm
            size = max(map(abs, F.tolist()))
            if not math.isfinite(size):
                raise IntegrationError("non-finite residual in implicit midpoint solve", step)
            if size <= cfg.newton_tol * max(1.0, max(map(abs, z.tolist()))):
                break
            if size > 0.5 * prev and not refreshed:
                Jinv = fresh_inverse(mid)
                refreshed = True
            prev = size
            z = z - (F if Jinv is None else Jinv @ F)
        else:
            raise IntegrationError(f"midpoint solve did not reach tolerance {cfg.newton_tol}", step)
        v = fm
        x = z
        if exit_step is None and not sys.in_box(x):
            exit_step = step
            warnings.warn(f"trajectory left the domain box at step {step}", DomainExitWarning, stacklevel=2)
        if step % cfg.stride == 0 or step == cfg.steps:
            store_t.append(step * dt)
            store_x.append(x.copy())
    return Trajectory(np.array(store_t), np.array(store_x), dt, cfg.stride, exit_step, evals)


@dataclass
class DriftEntry:
    name: str
    initial: float = math.nan
    max_abs: float = math.nan
    max_rel: float = math.nan
    t_at_max: float = math.nan
    error: Optional[str] = None


@dataclass
class DriftReport:
    entries: list
    times: np.ndarray
    series: dict = field(default_factory=dict)

    def __getitem__(self, name) -> DriftEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def names(self):
        return [e.name for e in self.entries]


def drift_report(sys: HamiltonianSystem, traj: Trajectory, invariants=(), stride: int = 1) -> DriftReport:
    """Max absolute and relative deviation of each invariant from its initial value.

    ``invariants`` holds ``(name, f)`` pairs or bare callables. The energy is
    always reported first under the name ``"h"``. Relative drift divides by
    ``|initial|`` and falls back to the absolute drift when that is zero.
    """
    named = [("h", sys.h)]
    for i, inv in enumerate(invariants):
        named.append(inv if isinstance(inv, tuple) else (f"inv{i + 1}", inv))
    pts = traj.x[::stride]
    times = traj.t[::stride]
    values = {name: np.full(len(pts), np.nan) for name, _ in named}
    errors = {}
    for row, p in enumerate(pts):
        for name, fn in named:
            if name in errors:
                continue
            try:
                values[name][row] = float(fn(p))
            except Exception as exc:  # reported per invariant, the rest still run
                errors[name] = f"{type(exc).__name__}: {exc}"
    entries = []
    for name, _ in named:
        if name in errors:
            entries.append(DriftEntry(name, error=errors[name]))
            continue
        series = values[name]
        dev = np.abs(series - series[0])
        k = int(np.argmax(dev))
        scale = abs(series[0])
        entries.append(DriftEntry(
            name=name,
            initial=float(series[0]),
            max_abs=float(dev[k]),
            max_rel=float(dev[k] / scale) if scale > 0 else float(dev[k]),
            t_at_max=float(times[k]),
        ))
    return DriftReport(entries, times, values)


def invariant_fields(sys: HamiltonianSystem, K=None, eps: float = DEFAULT_EPS):
    """Scalar fields ``l_k``, ``lam_k`` (real parts) and ``mu_k`` sharing one evaluation per point."""
    sys.require_E()
    K = sys.dim if K is None else K
    cache = {}

    def bundle(x):
        key = np.asarray(x, dtype=float).tobytes()
        if key not in cache:
            cache.clear()
            x = as_point(x)
            cache[key] = bundle_from_matrices(omega_E(sys, x, eps).matrix(), sys.omega.inverse_at(x), x, K)
        return cache[key]

    fields = []
    for k in range(sys.n):
        fields.append((f"l_{k + 1}", lambda x, k=k: bundle(x).l[k]))
    for k in range(sys.n):
        fields.append((f"lam_{k + 1}", lambda x, k=k: bundle(x).lam[k].real))
    for k in range(K):
        fields.append((f"mu_{k + 1}", lambda x, k=k: bundle(x).mu_hat[k]))
    return fields


def pointwise_conservation(sys: HamiltonianSystem, f: Callable, points, eps: float = DEFAULT_EPS) -> float:
    """Integrator-free conservation check: ``max |{f, h}|`` over ``points``."""
    return max(abs(poisson_bracket(sys, f, sys.h, p, eps)) for p in np.atleast_2d(points))
