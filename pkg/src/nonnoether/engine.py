"""Invariants generated by a non-Noether symmetry ``E``.

From ``omega_E = L_E omega`` this module builds the recursion operator
``A = W omega_E`` (as an endomorphism of vectors; on covectors it acts by the
transpose, ``d'f = A^T df``), the contraction integrals
``l_k = <omega_E^k, W^k>``, the deduplicated spectrum of ``A``, the power
traces ``Tr(A^k)``, and the structural diagnostics: Frolicher-Nijenhuis
torsion, Lenard residuals and the involution matrix.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import CapacityError, ComplexSpectrumWarning, SpectrumPairingWarning
from .geometry import (
    DEFAULT_EPS,
    FormSample,
    MultivectorSample,
    as_point,
    interior_product,
    jacobian,
    lie_bracket,
    lie_derivative_form,
    pairing,
    wedge_power,
)
from .hamiltonian import HamiltonianSystem, bracket_matrix
from .symmetric import elementary_symmetric

# contraction integrals are built on dense-free sparse storage, but wedge
# powers in dimension > 12 get slow enough to be a usage error
MAX_DIM = 12
PAIRING_RTOL = 1e-6
CALIBRATION_TOL = 1e-9


def convention_constant(n: int, k: int) -> float:
    """Factor ``c`` in ``l_k = c * e_k(lambda)`` under this package's conventions.

    Frozen from the brute-force oracle in ``tests/oracles.py`` (random
    antisymmetric pairs, n <= 3): ``c = (-1)^k (k!)^2``, independent of n.
    The sign comes from ``W = omega^{-1}``, under which ``<omega, W> = -n``.
    """
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in 1..{n}, got {k}")
    return (-1.0) ** k * math.factorial(k) ** 2


@dataclass(frozen=True)
class RecursionOperatorSample:
    matrix: np.ndarray
    point: np.ndarray


@dataclass(frozen=True)
class Spectrum:
    values: np.ndarray
    raw: np.ndarray
    pairing_gap: float
    paired: bool


class TorsionSample(NamedTuple):
    max_residual: float


class LenardResiduals(NamedTuple):
    normalized: np.ndarray
    unnormalized: np.ndarray


@dataclass(frozen=True)
class InvariantBundle:
    l: np.ndarray
    lam: np.ndarray
    mu_hat: np.ndarray
    point: np.ndarray
    cross_residuals: np.ndarray
    trace_residuals: np.ndarray
    pairing_gap: float


# --------------------------------------------------------------------------
# omega_E and the recursion operator


def omega_E(sys: HamiltonianSystem, x, eps: float = DEFAULT_EPS) -> FormSample:
    E = sys.require_E()
    return lie_derivative_form(E, sys.omega.form, 2, as_point(x), eps)


def _check_dual_action(A, W, wE):
    # d'f = phi_{omega_E}(phi_omega^{-1}(df)) for every coordinate covector
    form = FormSample.from_matrix(wE, check=False)
    m = A.shape[0]
    for i in range(m):
        X = W[i]  # X^j = (e_i)_k W^{kj}
        via_maps = interior_product(X, form).vector()
        gap = np.max(np.abs(via_maps - A[i]))
        if gap > CALIBRATION_TOL * (1.0 + np.max(np.abs(A))):
            raise RuntimeError(f"recursion matrix disagrees with phi_omegaE o phi_omega^-1 by {gap:.3e}")


def recursion_matrix(sys: HamiltonianSystem, x, calibration: bool = False,
                     eps: float = DEFAULT_EPS) -> RecursionOperatorSample:
    """``A = W omega_E`` at ``x``; ``calibration=True`` substitutes ``omega`` for ``omega_E``."""
    x = as_point(x)
    W = sys.omega.inverse_at(x)
    wE = sys.omega.at(x) if calibration else omega_E(sys, x, eps).matrix()
    A = W @ wE
    _check_dual_action(A, W, wE)
    return RecursionOperatorSample(A, x)


def recursion_field(sys: HamiltonianSystem, eps: float = DEFAULT_EPS) -> Callable:
    return lambda y: recursion_matrix(sys, y, eps=eps).matrix


# --------------------------------------------------------------------------
# invariants


def lutzky_from_matrices(wE, W) -> np.ndarray:
    """``l_k = <wE^k, W^k>`` for k = 1..n from the antisymmetric matrices of a 2-form and a bivector."""
    wE = np.asarray(wE, dtype=float)
    m = wE.shape[0]
    if m > MAX_DIM:
        raise CapacityError(f"contraction integrals limited to phase dimension {MAX_DIM}, got {m}")
    form = FormSample.from_matrix(wE, check=False)
    biv = MultivectorSample.from_matrix(W, check=False)
    return np.array([pairing(wedge_power(form, k), wedge_power(biv, k)) for k in range(1, m // 2 + 1)])


def lutzky_integrals(sys: HamiltonianSystem, x, eps: float = DEFAULT_EPS) -> np.ndarray:
    x = as_point(x)
    return lutzky_from_matrices(omega_E(sys, x, eps).matrix(), sys.omega.inverse_at(x))


def pair_eigenvalues(raw, rtol: float = PAIRING_RTOL) -> Spectrum:
    """Greedily match the 2n eigenvalues into equal pairs and average each pair."""
    raw = np.asarray(raw, dtype=complex)
    remaining = sorted(range(raw.size), key=lambda i: (raw[i].real, raw[i].imag))
    values, worst, paired = [], 0.0, True
    while remaining:
        i = remaining.pop(0)
        if not remaining:
            values.append(raw[i])
            paired = False
            break
        j = min(remaining, key=lambda j: abs(raw[j] - raw[i]))
        remaining.remove(j)
        gap = abs(raw[j] - raw[i]) / (1.0 + abs(raw[i]))
        worst = max(worst, gap)
        paired = paired and gap <= rtol
        values.append(0.5 * (raw[i] + raw[j]))
    values.sort(key=lambda v: (v.real, v.imag))
    return Spectrum(np.array(values), raw, float(worst), bool(paired))


def spectrum_of(A, warn: bool = True) -> Spectrum:
    eig = pair_eigenvalues(np.linalg.eigvals(A))
    if warn and not eig.paired:
        warnings.warn(f"eigenvalues do not pair up (worst relative gap {eig.pairing_gap:.3e})",
                      SpectrumPairingWarning, stacklevel=3)
    if warn and np.any(np.abs(eig.values.imag) > PAIRING_RTOL * (1 + np.abs(eig.values))):
        warnings.warn("recursion operator has complex eigenvalues", ComplexSpectrumWarning, stacklevel=3)
    return eig


def spectrum(sys: HamiltonianSystem, x, eps: float = DEFAULT_EPS) -> Spectrum:
    return spectrum_of(recursion_matrix(sys, x, eps=eps).matrix)


def traces_of(A, K: int) -> np.ndarray:
    out = np.empty(K)
    P = np.eye(A.shape[0])
    for k in range(K):
        P = P @ A
        out[k] = np.trace(P)
    return out


def power_traces(sys: HamiltonianSystem, x, K: int, eps: float = DEFAULT_EPS) -> np.ndarray:
    if K < 1:
        raise ValueError("K must be >= 1")
    return traces_of(recursion_matrix(sys, x, eps=eps).matrix, K)


def trace_residuals(A, raw, K: int) -> np.ndarray:
    """``|Tr(A^k) - sum raw^k| / (1 + |Tr(A^k)|)`` for k = 1..K."""
    tr = traces_of(A, K)
    sums = np.array([np.sum(raw ** k) for k in range(1, K + 1)])
    return np.abs(tr - sums) / (1.0 + np.abs(tr))


def elementary_from_spectrum(sys: HamiltonianSystem, x, eps: float = DEFAULT_EPS):
    """``(e_k(lambda), |l_k - c_k e_k|)`` for k = 1..n."""
    x = as_point(x)
    wE = omega_E(sys, x, eps).matrix()
    W = sys.omega.inverse_at(x)
    eig = spectrum_of(W @ wE)
    e = np.real(np.array(elementary_symmetric(eig.values)))
    l = lutzky_from_matrices(wE, W)
    c = np.array([convention_constant(sys.n, k) for k in range(1, sys.n + 1)])
    return e, np.abs(l - c * e)


def bundle_from_matrices(wE, W, point, K=None) -> InvariantBundle:
    m = W.shape[0]
    n = m // 2
    K = m if K is None else K
    A = W @ wE
    eig = spectrum_of(A, warn=False)
    l = lutzky_from_matrices(wE, W)
    e = np.real(np.array(elementary_symmetric(eig.values)))
    c = np.array([convention_constant(n, k) for k in range(1, n + 1)])
    return InvariantBundle(
        l=l,
        lam=eig.values,
        mu_hat=traces_of(A, K),
        point=np.asarray(point, dtype=float),
        cross_residuals=np.abs(l - c * e) / (1.0 + np.abs(l)),
        trace_residuals=trace_residuals(A, eig.raw, K),
        pairing_gap=eig.pairing_gap,
    )


def invariant_bundle(sys: HamiltonianSystem, x, K=None, eps: float = DEFAULT_EPS) -> InvariantBundle:
    x = as_point(x)
    W = sys.omega.inverse_at(x)
    wE = omega_E(sys, x, eps).matrix()
    _check_dual_action(W @ wE, W, wE)
    return bundle_from_matrices(wE, W, x, K)


# --------------------------------------------------------------------------
# structural diagnostics


def torsion(A: Callable, X: Callable, Y: Callable, x, eps: float = DEFAULT_EPS) -> np.ndarray:
    """``T(A)(X, Y) = [AX, AY] - A([AX, Y] + [X, AY] - A[X, Y])`` at ``x``."""
    x = as_point(x)

    def AX(y):
        return A(y) @ X(y)

    def AY(y):
        return A(y) @ Y(y)

    Ax = np.asarray(A(x), dtype=float)
    inner = lie_bracket(AX, Y, x, eps) + lie_bracket(X, AY, x, eps) - Ax @ lie_bracket(X, Y, x, eps)
    return lie_bracket(AX, AY, x, eps) - Ax @ inner


def fn_torsion(A: Callable, x, eps: float = DEFAULT_EPS) -> TorsionSample:
    """Largest ``|T(A)(e_i, e_j)|_inf`` over coordinate basis pairs ``i < j``."""
    x = as_point(x)
    m = x.size
    basis = np.eye(m)
    worst = 0.0
    for i in range(m):
        for j in range(i + 1, m):
            T = torsion(A, lambda y, v=basis[i]: v, lambda y, v=basis[j]: v, x, eps)
            worst = max(worst, float(np.max(np.abs(T))))
    return TorsionSample(worst)


def trace_field(sys: HamiltonianSystem, K: int, normalized: bool = True, eps: float = DEFAULT_EPS) -> Callable:
    """``y -> (nu_1..nu_K)`` with ``nu_k = Tr(A^k)/k`` (or the raw traces)."""
    scale = 1.0 / np.arange(1, K + 1) if normalized else np.ones(K)
    return lambda y: scale * traces_of(recursion_matrix(sys, y, eps=eps).matrix, K)


def lenard_residual(sys: HamiltonianSystem, x, K: int, eps: float = DEFAULT_EPS) -> LenardResiduals:
    """``r_k = |d nu_{k+1} - A^T d nu_k|_inf`` for k = 1..K-1, normalized and raw."""
    if K < 2:
        raise ValueError("Lenard residuals need K >= 2")
    x = as_point(x)
    A = recursion_matrix(sys, x, eps=eps).matrix
    G = np.atleast_2d(jacobian(trace_field(sys, K, False, eps), x, eps))
    Gn = G / np.arange(1, K + 1)[:, None]

    def ladder(grads):
        return np.array([np.max(np.abs(grads[k] - A.T @ grads[k - 1])) for k in range(1, K)])

    return LenardResiduals(ladder(Gn), ladder(G))


def involution_matrix(sys: HamiltonianSystem, points, K: int, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Max over ``points`` of ``|{nu_j, nu_k}|`` for 1 <= j, k <= K."""
    sys.require_E()
    nu = trace_field(sys, K, True, eps)
    out = np.zeros((K, K))
    for x in np.atleast_2d(points):
        out = np.maximum(out, np.abs(bracket_matrix(sys, nu, x, eps)))
    return out
