"""Hamiltonian systems on R^2n: the symplectic isomorphism, Poisson brackets,
and the premise checks (Liouville invariance, symmetry commutation).

Sign conventions. ``omega`` is the antisymmetric matrix ``omega_ij`` with
``omega = 1/2 omega_ij dx^i ^ dx^j``; the canonical structure in coordinates
``(q_1..q_n, p_1..p_n)`` is ``sum dq_i ^ dp_i``. ``W`` is the matrix inverse,
``W @ omega = I``. The Hamiltonian field of ``f`` is ``X_f^j = df_i W^ij``,
i.e. the unique field with ``i_{X_f} omega = df``; for the oscillator
``h = (q^2 + p^2)/2`` this gives ``X_h = (p, -q)``. Brackets are
``{f, g} = df(X_g)`` so that ``{q, p} = 1`` and ``df/dt = {f, h}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import DegenerateSymplecticError, MissingSymmetryError
from .geometry import (
    DEFAULT_EPS,
    FormSample,
    MultivectorSample,
    as_point,
    gradient,
    jacobian,
    lie_bracket,
    lie_derivative_form,
    lie_derivative_multivector,
)

DET_FLOOR = 1e-12


def canonical_matrix(n: int) -> np.ndarray:
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


class SymplecticStructure:
    """Matrix field ``x -> omega(x)``; constant structures cache their inverse."""

    def __init__(self, matrix_field: Callable, constant: bool = False):
        self.matrix_field = matrix_field
        self.constant = constant
        self._cached = None
        if constant:
            M = np.array(matrix_field(None), dtype=float)
            self._cached = (M, self._invert(M, None))

    @classmethod
    def from_matrix(cls, M):
        M = np.array(M, dtype=float)
        return cls(lambda x: M, constant=True)

    @classmethod
    def canonical(cls, n: int):
        return cls.from_matrix(canonical_matrix(n))

    @staticmethod
    def _invert(M, x):
        det = np.linalg.det(M)
        if not np.isfinite(det) or abs(det) <= DET_FLOOR:
            raise DegenerateSymplecticError(f"|det omega| = {abs(det):.3e} at {x}")
        return np.linalg.inv(M)

    def at(self, x) -> np.ndarray:
        if self._cached is not None:
            return self._cached[0]
        return np.asarray(self.matrix_field(x), dtype=float)

    def inverse_at(self, x) -> np.ndarray:
        if self._cached is not None:
            return self._cached[1]
        return self._invert(self.at(x), x)

    def form(self, x) -> FormSample:
        return FormSample.from_matrix(self.at(x), check=False)

    def bivector(self, x) -> MultivectorSample:
        return MultivectorSample.from_matrix(self.inverse_at(x), check=False)


@dataclass(frozen=True)
class HamiltonianSystem:
    n: int
    omega: SymplecticStructure
    h: Callable
    E: Optional[Callable] = None
    box: Optional[tuple] = None
    name: str = ""
    coords: tuple = ()
    metadata: dict = field(default_factory=dict)
    gate_report: Optional[dict] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"configuration dimension n must be >= 1, got {self.n}")
        if self.coords and len(self.coords) != 2 * self.n:
            raise ValueError(f"expected {2 * self.n} coordinate names, got {len(self.coords)}")
        if self.box is not None:
            lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (2 * self.n,)) for b in self.box)
            if np.any(hi <= lo):
                raise ValueError("domain box needs lo < hi in every coordinate")
            object.__setattr__(self, "box", (lo.copy(), hi.copy()))

    @property
    def dim(self) -> int:
        return 2 * self.n

    def sample_points(self, count: int, seed=0) -> np.ndarray:
        """Uniform random points in the domain box (default ``[-1, 1]^2n``)."""
        lo, hi = self.box if self.box is not None else (-np.ones(self.dim), np.ones(self.dim))
        rng = np.random.default_rng(seed)
        return lo + (hi - lo) * rng.random((count, self.dim))

    def in_box(self, x) -> bool:
        if self.box is None:
            return True
        lo, hi = self.box
        return bool(np.all(x >= lo) and np.all(x <= hi))

    def X_h(self, x, eps: float = DEFAULT_EPS) -> np.ndarray:
        return hamiltonian_vf(self, self.h, x, eps)

    def require_E(self):
        if self.E is None:
            raise MissingSymmetryError(f"system {self.name or '<unnamed>'} has no symmetry generator E")
        return self.E


def omega_inverse(sys: HamiltonianSystem, x) -> MultivectorSample:
    return sys.omega.bivector(as_point(x))


def hamiltonian_vf(sys: HamiltonianSystem, f: Callable, x, eps: float = DEFAULT_EPS) -> np.ndarray:
    x = as_point(x)
    return sys.omega.inverse_at(x).T @ gradient(f, x, eps)


def hamiltonian_field(sys: HamiltonianSystem, f: Callable, eps: float = DEFAULT_EPS) -> Callable:
    return lambda y: hamiltonian_vf(sys, f, y, eps)


def poisson_bracket(sys: HamiltonianSystem, f: Callable, g: Callable, x, eps: float = DEFAULT_EPS) -> float:
    x = as_point(x)
    return float(jacobian(f, x, eps) @ sys.omega.inverse_at(x).T @ jacobian(g, x, eps))


def bracket_matrix(sys: HamiltonianSystem, fs: Callable, x, eps: float = DEFAULT_EPS) -> np.ndarray:
    """All pairwise brackets ``{f_a, f_b}`` of a vector-valued function ``fs``."""
    x = as_point(x)
    G = np.atleast_2d(jacobian(fs, x, eps))
    return G @ sys.omega.inverse_at(x).T @ G.T


class LiouvilleResiduals(NamedTuple):
    omega: float
    bivector: float


class SymmetryCheck(NamedTuple):
    residual: float
    witness: float


def liouville_residuals(sys: HamiltonianSystem, x, bivector: Optional[Callable] = None,
                        eps: float = DEFAULT_EPS) -> LiouvilleResiduals:
    """Sup norms of ``L_{X_h} omega`` and ``L_{X_h} W`` at ``x``.

    ``bivector`` overrides the field whose invariance is checked (used for
    negative controls); by default it is the inverse of ``omega``.
    """
    x = as_point(x)
    Xh = hamiltonian_field(sys, sys.h, eps)
    r_omega = lie_derivative_form(Xh, sys.omega.form, 2, x, eps).norm_inf()
    W = bivector if bivector is not None else sys.omega.bivector
    r_W = lie_derivative_multivector(Xh, W, x, eps).norm_inf()
    return LiouvilleResiduals(r_omega, r_W)


def symmetry_residual(sys: HamiltonianSystem, x, eps: float = DEFAULT_EPS) -> SymmetryCheck:
    """``|[E, X_h](x)|_inf`` and the non-Noether witness ``|L_E omega(x)|_inf``."""
    E = sys.require_E()
    x = as_point(x)
    Xh = hamiltonian_field(sys, sys.h, eps)
    residual = float(np.max(np.abs(lie_bracket(E, Xh, x, eps))))
    witness = lie_derivative_form(E, sys.omega.form, 2, x, eps).norm_inf()
    return SymmetryCheck(residual, witness)
