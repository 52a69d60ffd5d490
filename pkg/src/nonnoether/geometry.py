"""Pointwise exterior calculus on R^m.

Fields are plain callables evaluated on demand at a point; samples are the
values of forms and multivectors at a single point. Antisymmetric samples are
stored by their strictly increasing index tuples (lexicographic order), so
antisymmetry holds by construction and :meth:`AltSample.dense` expands on
request.

Normalization: the component of ``dx_i ^ dx_j`` at ``(i, j)`` is ``+1`` and
the pairing of a p-form with a p-vector divides the full contraction by p!,
so ``<dx_1 ^ dx_2, d_1 ^ d_2> = 1``.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .errors import CapacityError, DegreeError, KindError, NumericalDomainError

DEFAULT_EPS = 1e-5
# dense expansion refuses arrays larger than this many entries
DENSE_LIMIT = 8**4


def as_point(x) -> np.ndarray:
    """Validate a phase point: 1-D, even length >= 2, finite entries."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2 or x.size % 2:
        raise ValueError(f"phase point must be a vector of even length >= 2, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericalDomainError(f"phase point has non-finite entries: {x}")
    return x


def fd_steps(x: np.ndarray, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Per-coordinate central-difference steps ``eps * max(1, |x_i|)``.

    Each step is rounded to the nearest power of two so that ``x_i +/- step``
    is exact in binary floating point for all but binade-crossing points.
    """
    raw = eps * np.maximum(1.0, np.abs(x))
    return np.exp2(np.round(np.log2(raw)))


def jacobian(F, x, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Central-difference derivative of ``F`` at ``x``.

    ``F`` maps a point to a scalar or an array. The result has shape
    ``out_shape + (m,)`` with the last axis indexing the coordinate the
    derivative is taken with respect to. If ``F`` has a ``batch`` attribute it
    is called once with all ``2m`` stencil points stacked on axis 0.
    """
    x = as_point(x)
    m = x.size
    d = fd_steps(x, eps)
    idx = np.arange(m)
    plus = np.repeat(x[None, :], m, axis=0)
    minus = plus.copy()
    plus[idx, idx] += d
    minus[idx, idx] -= d
    batch = getattr(F, "batch", None)
    try:
        if batch is not None:
            vals = np.asarray(batch(np.concatenate([plus, minus])), dtype=float)
            fp, fm = vals[:m], vals[m:]
        else:
            fp = np.array([np.asarray(F(p), dtype=float) for p in plus])
            fm = np.array([np.asarray(F(p), dtype=float) for p in minus])
    except NumericalDomainError as exc:
        raise NumericalDomainError(f"field not evaluable on the stencil around {x}: {exc}") from exc
    if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
        raise NumericalDomainError(f"non-finite field value on the stencil around {x}")
    h = (plus[idx, idx] - minus[idx, idx]).reshape((m,) + (1,) * (fp.ndim - 1))
    deriv = (fp - fm) / h
    return np.moveaxis(deriv, 0, -1)


def gradient(f, x, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Central-difference gradient of a scalar field.

    Same stencil as :func:`jacobian`, written as a scalar loop because the
    integrator calls it once per solver iteration.
    """
    x = np.asarray(x, dtype=float)
    batch = getattr(f, "batch", None)
    if batch is not None and x.size > 8:
        return jacobian(f, x, eps)
    out = np.empty(x.size)
    for i, xi in enumerate(x.tolist()):
        step = 2.0 ** round(math.log2(eps * max(1.0, abs(xi))))
        y = x.copy()
        y[i] = xi + step
        fp = float(f(y))
        y[i] = xi - step
        fm = float(f(y))
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NumericalDomainError(f"non-finite field value on the stencil around {x}")
        out[i] = (fp - fm) / ((xi + step) - (xi - step))
    return out


# --------------------------------------------------------------------------
# index combinatorics


@lru_cache(maxsize=None)
def _combos(m: int, p: int):
    return tuple(itertools.combinations(range(m), p))


@lru_cache(maxsize=None)
def _positions(m: int, p: int):
    return {c: i for i, c in enumerate(_combos(m, p))}


def _sort_sign(idx):
    """Return (sorted tuple, permutation sign); sign 0 if an index repeats."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return None, 0
    sign = 1
    # bubble sort; index tuples here are short
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return tuple(idx), sign


@lru_cache(maxsize=None)
def _wedge_table(m: int, p: int, q: int):
    pos = _positions(m, p + q)
    ia, ib, out, sg = [], [], [], []
    for a, I in enumerate(_combos(m, p)):
        for b, J in enumerate(_combos(m, q)):
            key, s = _sort_sign(I + J)
            if s:
                ia.append(a)
                ib.append(b)
                out.append(pos[key])
                sg.append(s)
    return (np.array(ia, dtype=int), np.array(ib, dtype=int),
            np.array(out, dtype=int), np.array(sg, dtype=float))


@lru_cache(maxsize=None)
def _interior_table(m: int, p: int):
    pos = _positions(m, p)
    rows = _combos(m, p - 1)
    where = np.zeros((len(rows), m), dtype=int)
    sign = np.zeros((len(rows), m))
    for r, J in enumerate(rows):
        for j in range(m):
            key, s = _sort_sign((j,) + J)
            if s:
                where[r, j] = pos[key]
                sign[r, j] = s
    return where, sign


@lru_cache(maxsize=None)
def _d_table(m: int, p: int):
    pos = _positions(m, p)
    rows = _combos(m, p + 1)
    src = np.zeros((len(rows), p + 1), dtype=int)
    der = np.zeros((len(rows), p + 1), dtype=int)
    sign = np.zeros((len(rows), p + 1))
    for r, I in enumerate(rows):
        for s in range(p + 1):
            src[r, s] = pos[I[:s] + I[s + 1:]]
            der[r, s] = I[s]
            sign[r, s] = -1.0 if s % 2 else 1.0
    return src, der, sign


# --------------------------------------------------------------------------
# samples


class AltSample:
    """Antisymmetric tensor at a point, stored on strictly increasing indices."""

    kind = "alt"
    __slots__ = ("dim", "degree", "values", "truncated")

    def __init__(self, dim: int, degree: int, values, truncated: bool = False):
        if degree < 0:
            raise DegreeError(f"degree must be >= 0, got {degree}")
        values = np.array(values, dtype=float).reshape(-1)
        expected = math.comb(dim, degree)
        if values.size != expected:
            raise ValueError(f"degree-{degree} sample in dimension {dim} needs {expected} components, got {values.size}")
        values.setflags(write=False)
        self.dim = dim
        self.degree = degree
        self.values = values
        self.truncated = truncated

    @classmethod
    def zero(cls, dim, degree, truncated=False):
        return cls(dim, degree, np.zeros(math.comb(dim, degree)), truncated=truncated)

    @classmethod
    def basis(cls, dim, *indices):
        """Wedge of coordinate basis elements, e.g. ``basis(2, 0, 1)`` is dx_1 ^ dx_2."""
        out = np.zeros(math.comb(dim, len(indices)))
        key, s = _sort_sign(indices)
        if s:
            out[_positions(dim, len(indices))[key]] = s
        return cls(dim, len(indices), out)

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=float)
        return cls(v.size, 1, v)

    @classmethod
    def from_matrix(cls, M, check: bool = True):
        M = np.asarray(M, dtype=float)
        m = M.shape[0]
        if M.shape != (m, m):
            raise ValueError(f"expected a square matrix, got shape {M.shape}")
        if check and np.max(np.abs(M + M.T), initial=0.0) > 1e-9 * (1.0 + np.max(np.abs(M), initial=0.0)):
            raise ValueError("matrix is not antisymmetric")
        iu = np.triu_indices(m, 1)
        return cls(m, 2, M[iu])

    @classmethod
    def from_dense(cls, arr):
        arr = np.asarray(arr, dtype=float)
        p = arr.ndim
        m = arr.shape[0] if p else 0
        if p == 0:
            raise DegreeError("use a 1-element values array for degree 0")
        sample = cls(m, p, [arr[c] for c in _combos(m, p)])
        if not np.allclose(sample.dense(), arr, rtol=0, atol=1e-12 * (1 + np.max(np.abs(arr)))):
            raise ValueError("array is not totally antisymmetric")
        return sample

    def component(self, idx) -> float:
        key, s = _sort_sign(idx)
        if not s:
            return 0.0
        return s * float(self.values[_positions(self.dim, self.degree)[key]])

    def dense(self) -> np.ndarray:
        if self.dim**self.degree > DENSE_LIMIT:
            raise CapacityError(f"dense degree-{self.degree} array in dimension {self.dim} exceeds {DENSE_LIMIT} entries")
        if self.degree == 0:
            return np.array(self.values[0])
        if self.degree == 2:
            return self.matrix()
        out = np.zeros((self.dim,) * self.degree)
        for c, val in zip(_combos(self.dim, self.degree), self.values):
            if val == 0.0:
                continue
            for perm in itertools.permutations(range(self.degree)):
                _, s = _sort_sign(perm)
                out[tuple(c[i] for i in perm)] = s * val
        return out

    def matrix(self) -> np.ndarray:
        if self.degree != 2:
            raise DegreeError(f"matrix() needs degree 2, sample has degree {self.degree}")
        M = np.zeros((self.dim, self.dim))
        iu = np.triu_indices(self.dim, 1)
        M[iu] = self.values
        return M - M.T

    def vector(self) -> np.ndarray:
        if self.degree != 1:
            raise DegreeError(f"vector() needs degree 1, sample has degree {self.degree}")
        return np.array(self.values)

    def scalar(self) -> float:
        if self.degree != 0:
            raise DegreeError(f"scalar() needs degree 0, sample has degree {self.degree}")
        return float(self.values[0])

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.values), initial=0.0))

    def _same(self, other):
        if type(other) is not type(self):
            raise KindError(f"cannot combine {self.kind} with {getattr(other, 'kind', type(other).__name__)}")
        if other.dim != self.dim or other.degree != self.degree:
            raise DegreeError("samples differ in dimension or degree")

    def __add__(self, other):
        self._same(other)
        return type(self)(self.dim, self.degree, self.values + other.values)

    def __sub__(self, other):
        self._same(other)
        return type(self)(self.dim, self.degree, self.values - other.values)

    def __neg__(self):
        return type(self)(self.dim, self.degree, -self.values)

    def __mul__(self, c):
        return type(self)(self.dim, self.degree, float(c) * self.values)

    __rmul__ = __mul__

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, degree={self.degree}, values={self.values.tolist()})"


class FormSample(AltSample):
    kind = "form"
    __slots__ = ()


class MultivectorSample(AltSample):
    kind = "multivector"
    __slots__ = ()


# --------------------------------------------------------------------------
# algebra


def wedge(A: AltSample, B: AltSample) -> AltSample:
    if type(A) is not type(B):
        raise KindError(f"wedge of a {A.kind} with a {B.kind}")
    if A.dim != B.dim:
        raise ValueError("wedge of samples in different dimensions")
    m, p, q = A.dim, A.degree, B.degree
    if p + q > m:
        return type(A).zero(m, p + q, truncated=True)
    ia, ib, out, sg = _wedge_table(m, p, q)
    vals = np.zeros(math.comb(m, p + q))
    np.add.at(vals, out, sg * A.values[ia] * B.values[ib])
    return type(A)(m, p + q, vals)


def wedge_power(A: AltSample, k: int) -> AltSample:
    """k-fold wedge product ``A ^ ... ^ A``; ``k = 0`` gives the unit scalar."""
    out = type(A)(A.dim, 0, [1.0])
    for _ in range(k):
        out = wedge(out, A)
    return out


def pairing(alpha: FormSample, P: MultivectorSample) -> float:
    if not isinstance(alpha, FormSample) or not isinstance(P, MultivectorSample):
        raise KindError("pairing needs a form and a multivector")
    if alpha.degree != P.degree or alpha.dim != P.dim:
        raise DegreeError(f"pairing of degree {alpha.degree} with degree {P.degree}")
    # the 1/p! full contraction equals the sum over increasing index tuples
    return float(alpha.values @ P.values)


def interior_product(X, alpha: AltSample, x=None) -> AltSample:
    """Contract a vector (or a vector field evaluated at ``x``) into the first slot of ``alpha``."""
    if alpha.degree < 1:
        raise DegreeError("interior product of a degree-0 sample")
    v = np.asarray(X(x) if callable(X) else X, dtype=float)
    where, sign = _interior_table(alpha.dim, alpha.degree)
    return type(alpha)(alpha.dim, alpha.degree - 1, (sign * alpha.values[where]) @ v)


# --------------------------------------------------------------------------
# differential operators on fields


def _component_values(sample):
    if isinstance(sample, AltSample):
        return sample.values
    return np.atleast_1d(np.asarray(sample, dtype=float))


def exterior_derivative(alpha, p: int, x, eps: float = DEFAULT_EPS) -> FormSample:
    """``d`` of the p-form field ``alpha`` at ``x``.

    ``alpha`` maps a point to a :class:`FormSample` of degree ``p`` (or to a
    float when ``p == 0``).
    """
    x = as_point(x)
    m = x.size
    if p >= m:
        raise DegreeError(f"exterior derivative of a degree-{p} form in dimension {m}")
    jac = jacobian(lambda y: _component_values(alpha(y)), x, eps)
    src, der, sign = _d_table(m, p)
    return FormSample(m, p + 1, np.sum(sign * jac[src, der], axis=1))


def lie_bracket(X, Y, x, eps: float = DEFAULT_EPS) -> np.ndarray:
    """``[X, Y]^i = X^j d_j Y^i - Y^j d_j X^i``."""
    x = as_point(x)
    return jacobian(Y, x, eps) @ np.asarray(X(x), dtype=float) - jacobian(X, x, eps) @ np.asarray(Y(x), dtype=float)


def lie_derivative_form(X, alpha, p: int, x, eps: float = DEFAULT_EPS) -> FormSample:
    """Lie derivative of a p-form field via ``L_X = i_X d + d i_X``."""
    x = as_point(x)
    m = x.size
    if p == 0:
        df = exterior_derivative(alpha, 0, x, eps)
        return FormSample(m, 0, [interior_product(X(x), df).scalar()])
    out = FormSample.zero(m, p)
    if p < m:
        out = out + interior_product(X(x), exterior_derivative(alpha, p, x, eps))
    return out + exterior_derivative(lambda y: interior_product(X(y), alpha(y)), p - 1, x, eps)


def _bivector_matrix(P):
    return P.matrix() if isinstance(P, AltSample) else np.asarray(P, dtype=float)


def lie_derivative_multivector(X, P, x, eps: float = DEFAULT_EPS) -> MultivectorSample:
    """Lie derivative (Schouten bracket ``[X, P]``) of a bivector field.

    ``(L_X P)^{ij} = X^k d_k P^{ij} - P^{kj} d_k X^i - P^{ik} d_k X^j``.
    """
    x = as_point(x)
    Pm = _bivector_matrix(P(x))
    dP = jacobian(lambda y: _bivector_matrix(P(y)), x, eps)
    JX = jacobian(X, x, eps)
    L = dP @ np.asarray(X(x), dtype=float) - JX @ Pm - Pm @ JX.T
    return MultivectorSample.from_matrix(L, check=False)
