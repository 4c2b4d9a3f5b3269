"""
Symmetric split-operator propagation of operators under ``H0 + f(t) V``.

One step over ``[t_j, t_j + dt]`` with the field held at its midpoint value
applies ``U = exp(-i dt/2 H0) exp(-i dt f V) exp(-i dt/2 H0)`` by conjugation,
``X -> U X U^dagger``. This is the Liouville-space Strang splitting
``exp(-i dt/2 L0) exp(-i dt f L1) exp(-i dt/2 L0)`` applied without ever
forming an ``N^2 x N^2`` superoperator. The backward direction applies the
exact adjoint ``X -> U^dagger X U``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import NDArray

from . import _kernels
from .errors import InvariantError, NumericError, ShapeError
from .liouville import (
    HermitianOperator,
    SpectralPair,
    as_matrix,
    commutator_action,
    eig_hermitian,
    hs_norm,
)

FORWARD = "forward"
BACKWARD = "backward"

# Sign of the first-order midpoint extrapolation used when sweeping backward.
BACKWARD_CORRECTION_SIGN = -1.0

FIELD_REAL_RTOL = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    tF: float
    steps: int

    def __post_init__(self):
        if not (np.isfinite(self.t0) and np.isfinite(self.tF)) or self.tF <= self.t0:
            raise InvariantError(f"need tF > t0, got t0={self.t0}, tF={self.tF}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise InvariantError(f"steps must be a positive integer, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        return (self.tF - self.t0) / self.steps

    @property
    def span(self) -> float:
        return self.tF - self.t0

    @cached_property
    def nodes(self) -> NDArray[np.float64]:
        t = self.t0 + np.arange(self.steps + 1) * self.dt
        t.setflags(write=False)
        return t

    @cached_property
    def midpoints(self) -> NDArray[np.float64]:
        tau = self.nodes[:-1] + 0.5 * self.dt
        tau.setflags(write=False)
        return tau

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t0, self.tF, self.steps * factor)


@dataclass(frozen=True, eq=False)
class PropagatorTables:
    """Field-independent data for split-operator steps.

    ``basis_overlap`` is ``Q0^dagger P``, the change of basis from the
    eigenvectors ``P`` of ``V`` to the eigenvectors ``Q0`` of ``H0``.
    """

    H0: NDArray[np.complex128]
    V: NDArray[np.complex128]
    spec0: SpectralPair
    spec1: SpectralPair
    basis_overlap: NDArray[np.complex128]

    @property
    def dim(self) -> int:
        return self.H0.shape[0]

    @cached_property
    def commutator(self) -> NDArray[np.complex128]:
        """``[H0, V]``; by the Jacobi identity ``[L0, L1] X = [[H0, V], X]``."""
        k = commutator_action(self.H0, self.V)
        k.setflags(write=False)
        return k

    @cached_property
    def omega(self) -> NDArray[np.float64]:
        """Commutator-superoperator eigenvalues ``v_k - v_l`` of ``V``."""
        om = np.ascontiguousarray(self.spec1.liouville_eigenvalues())
        om.setflags(write=False)
        return om

    def split_factors(self, dt: float) -> tuple[NDArray, NDArray]:
        """``(Y, Z) = (U0^dagger P, U0 P)`` with ``U0 = exp(-i dt/2 H0)``."""
        q0 = self.spec0.eigenvectors
        ph = np.exp(-0.5j * dt * self.spec0.eigenvalues)
        z = q0 @ (ph[:, None] * self.basis_overlap)
        y = q0 @ (ph.conj()[:, None] * self.basis_overlap)
        return np.ascontiguousarray(y), np.ascontiguousarray(z)

    def opnorm_L1(self) -> float:
        """Operator norm of ``X -> [V, X]`` on Hilbert-Schmidt space."""
        v = self.spec1.eigenvalues
        return float(v[-1] - v[0])


def build_tables(H0, V) -> PropagatorTables:
    h0 = H0 if isinstance(H0, HermitianOperator) else HermitianOperator(as_matrix(H0))
    v = V if isinstance(V, HermitianOperator) else HermitianOperator(as_matrix(V))
    if h0.dim != v.dim:
        raise ShapeError(f"H0 is {h0.dim}x{h0.dim} but V is {v.dim}x{v.dim}")
    s0 = eig_hermitian(h0)
    s1 = eig_hermitian(v)
    overlap = s0.eigenvectors.conj().T @ s1.eigenvectors
    overlap.setflags(write=False)
    return PropagatorTables(h0.matrix, v.matrix, s0, s1, overlap)


def _check_state(state, tables: PropagatorTables) -> NDArray[np.complex128]:
    x = np.ascontiguousarray(as_matrix(state))
    if x.shape[0] != tables.dim:
        raise ShapeError(f"state is {x.shape[0]}x{x.shape[0]}, tables are {tables.dim}x{tables.dim}")
    return x


def step(state, f_mid: float, dt: float, tables: PropagatorTables, direction: str = FORWARD):
    """Advance ``state`` by one symmetric split step with constant field ``f_mid``."""
    x = _check_state(state, tables)
    if not np.isfinite(f_mid):
        raise NumericError(f"non-finite field value {f_mid}")
    y, z = tables.split_factors(dt)
    if direction == FORWARD:
        return _kernels.step_forward(x, float(f_mid), y, z, tables.omega, dt)
    if direction == BACKWARD:
        return _kernels.step_backward(x, float(f_mid), y, z, tables.omega, dt)
    raise ValueError(f"direction must be {FORWARD!r} or {BACKWARD!r}")


def _check_samples(samples, grid: TimeGrid) -> NDArray[np.float64]:
    f = np.ascontiguousarray(samples, dtype=np.float64)
    if f.shape != (grid.steps,):
        raise ShapeError(f"expected {grid.steps} field samples, got {f.shape}")
    if not np.all(np.isfinite(f)):
        raise NumericError("field samples contain non-finite values")
    return f


def propagate(state0, samples, grid: TimeGrid, tables: PropagatorTables) -> NDArray[np.complex128]:
    """Forward trajectory at every node for fixed midpoint field samples."""
    x = _check_state(state0, tables)
    f = _check_samples(samples, grid)
    y, z = tables.split_factors(grid.dt)
    return _kernels.propagate_forward(x, f, y, z, tables.omega, grid.dt)


def propagate_adjoint(stateF, samples, grid: TimeGrid, tables: PropagatorTables) -> NDArray[np.complex128]:
    """Backward (Heisenberg-type) trajectory ending in ``stateF`` at tF."""
    x = _check_state(stateF, tables)
    f = _check_samples(samples, grid)
    y, z = tables.split_factors(grid.dt)
    return _kernels.propagate_backward(x, f, y, z, tables.omega, grid.dt)


def _check_real(z: complex, scale: float) -> float:
    # tr(A [V, rho]) is purely imaginary for Hermitian A, V, rho
    if abs(z.real) > FIELD_REAL_RTOL * max(scale, 1e-300):
        raise InvariantError(
            f"commutator trace has real residual {z.real:.3e}; inputs are not Hermitian"
        )
    return z.imag


def field_base(A_v, rho_v, V, lam: float) -> float:
    """Field ``-(i/lam) tr(A_v [V, rho_v])`` from the instantaneous states."""
    if not lam > 0:
        raise InvariantError(f"lambda must be positive, got {lam}")
    a, r, v = as_matrix(A_v), as_matrix(rho_v), as_matrix(V)
    z = complex(np.trace(a @ commutator_action(v, r)))
    scale = 2.0 * hs_norm(a) * hs_norm(r) * hs_norm(v)
    return _check_real(z, scale) / lam


def _midpoint_correction(A_v, rho_v, H0, V, lam, dt) -> float:
    a, r = as_matrix(A_v), as_matrix(rho_v)
    k = commutator_action(H0, V)
    z = complex(np.trace(a @ commutator_action(k, r)))
    return dt / (2.0 * lam) * z.real


def field_midpoint_forward(A_v, rho_v, H0, V, lam: float, dt: float) -> float:
    """Field at ``t_j + dt/2`` extrapolated from the states at node ``t_j``."""
    return field_base(A_v, rho_v, V, lam) + _midpoint_correction(A_v, rho_v, H0, V, lam, dt)


def field_midpoint_backward(A_v, rho_v_prev, H0, V, lam: float, dt: float) -> float:
    """Field at ``t_j - dt/2`` extrapolated backward from node ``t_j``."""
    return field_base(A_v, rho_v_prev, V, lam) + BACKWARD_CORRECTION_SIGN * _midpoint_correction(
        A_v, rho_v_prev, H0, V, lam, dt
    )
