"""
Dense Hilbert/Liouville-space algebra.

Operators are plain ``(N, N)`` complex arrays. Liouville-space objects are
never vectorised: a superoperator of the form ``X -> [H, X]`` is applied as a
commutator, and its eigenstructure is read off the Hilbert-space
eigendecomposition of ``H`` (eigenvalues ``h_i - h_j`` with eigenmatrices
``|i><j|``).

The wrapper types :class:`HermitianOperator` and :class:`DensityState` validate
their invariants once at construction and hold read-only arrays; every
operation here also accepts bare ndarrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvariantError, NumericError, ShapeError

HERMITIAN_RTOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
REAL_RESIDUAL_TOL = 1e-10


def as_matrix(x: ArrayLike | "HermitianOperator" | "DensityState") -> NDArray[np.complex128]:
    """Return ``x`` as a square complex128 array, raising ShapeError otherwise."""
    if isinstance(x, (HermitianOperator, DensityState)):
        return x.matrix
    m = np.asarray(x, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    return m


def _same_shape(a: NDArray, b: NDArray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")


def hermiticity_error(m: NDArray) -> float:
    """Max-abs deviation from Hermiticity, relative to the largest entry."""
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(m - m.conj().T))) / scale


def _frozen(m: NDArray) -> NDArray[np.complex128]:
    out = np.array(m, dtype=np.complex128, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Hermitian ``N x N`` matrix (N >= 2), e.g. a Hamiltonian or observable."""

    matrix: NDArray[np.complex128]

    def __post_init__(self):
        m = as_matrix(self.matrix)
        if m.shape[0] < 2:
            raise InvariantError("operator dimension must be at least 2")
        if not np.all(np.isfinite(m)):
            raise InvariantError("operator has non-finite entries")
        err = hermiticity_error(m)
        if err > HERMITIAN_RTOL:
            raise InvariantError(f"operator is not Hermitian (relative error {err:.2e})")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


@dataclass(frozen=True, eq=False)
class DensityState:
    """Hermitian, unit-trace, positive semidefinite ``N x N`` matrix."""

    matrix: NDArray[np.complex128]

    def __post_init__(self):
        m = as_matrix(self.matrix)
        if m.shape[0] < 2:
            raise InvariantError("state dimension must be at least 2")
        check_density(m)
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def weights(self) -> NDArray[np.float64]:
        """Eigenvalues in non-increasing order."""
        return np.linalg.eigvalsh(self.matrix)[::-1]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def check_density(m: NDArray) -> None:
    """Raise InvariantError unless ``m`` is a valid density matrix."""
    if not np.all(np.isfinite(m)):
        raise InvariantError("state has non-finite entries")
    err = hermiticity_error(m)
    if err > HERMITIAN_RTOL:
        raise InvariantError(f"state is not Hermitian (relative error {err:.2e})")
    tr = np.trace(m)
    if abs(tr - 1.0) > TRACE_TOL:
        raise InvariantError(f"state trace is {tr.real:.12g}, expected 1")
    evals = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    if evals[0] < -PSD_TOL:
        raise InvariantError(f"state has negative eigenvalue {evals[0]:.3e}")
    purity = float(np.sum(evals**2))
    if purity > 1.0 + PSD_TOL:
        raise InvariantError(f"state purity {purity:.12g} exceeds 1")


@dataclass(frozen=True, eq=False)
class SpectralPair:
    """Ascending eigenvalues and orthonormal eigenvector columns."""

    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.complex128]

    def reconstruct(self) -> NDArray[np.complex128]:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.conj().T

    def exp_phase(self, theta: float) -> NDArray[np.complex128]:
        """Unitary ``exp(-i theta X)`` for the decomposed operator ``X``."""
        q = self.eigenvectors
        return (q * np.exp(-1j * theta * self.eigenvalues)) @ q.conj().T

    def liouville_eigenvalues(self) -> NDArray[np.float64]:
        """Eigenvalues ``x_i - x_j`` of the commutator superoperator."""
        x = self.eigenvalues
        return x[:, None] - x[None, :]


def commutator_action(H, rho) -> NDArray[np.complex128]:
    """Return ``H rho - rho H``."""
    h, r = as_matrix(H), as_matrix(rho)
    _same_shape(h, r)
    return h @ r - r @ h


def liouville_inner(A, B) -> complex:
    """Hilbert-Schmidt inner product ``tr(A^dagger B)``."""
    a, b = as_matrix(A), as_matrix(B)
    _same_shape(a, b)
    return complex(np.vdot(a, b))


def _real(z: complex, scale: float, what: str) -> float:
    if abs(z.imag) > REAL_RESIDUAL_TOL * max(1.0, scale):
        raise InvariantError(f"{what} has imaginary residual {z.imag:.3e}")
    return z.real


def expectation(A, rho) -> float:
    """Ensemble average ``tr(A rho)`` as a real number."""
    a, r = as_matrix(A), as_matrix(rho)
    z = liouville_inner(a, r)
    return _real(z, hs_norm(a) * hs_norm(r), "expectation value")


def hs_norm(A) -> float:
    """Hilbert-Schmidt (Frobenius) norm."""
    a = as_matrix(A)
    return float(np.sqrt(np.vdot(a, a).real))


def eig_hermitian(A) -> SpectralPair:
    """Eigendecomposition of a Hermitian operator.

    Eigenvector phases are fixed so that the largest-magnitude component of
    each column is real and positive, which makes the output deterministic.
    """
    op = A if isinstance(A, HermitianOperator) else HermitianOperator(as_matrix(A))
    m = op.matrix
    try:
        w, q = np.linalg.eigh(0.5 * (m + m.conj().T))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    idx = np.argmax(np.abs(q), axis=0)
    pivots = q[idx, np.arange(q.shape[1])]
    q = q * (np.abs(pivots) / pivots)
    w.setflags(write=False)
    q.setflags(write=False)
    return SpectralPair(eigenvalues=w, eigenvectors=q)
