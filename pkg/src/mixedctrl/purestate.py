"""
Cross-checks between wavefunction and density-matrix dynamics.

For ``rho0 = |psi0><psi0|`` the Liouville-space propagation must reproduce
``|psi(t)><psi(t)|`` with ``psi`` evolved by the same Strang splitting in
Hilbert space, and the objective components must agree when rewritten in
terms of ``psi`` and ``chi(t) = A_v(t) psi(t)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from . import _kernels
from .errors import InvariantError, ShapeError
from .liouville import as_matrix, hs_norm
from .optimizer import ControlField, Trajectory
from .propagator import PropagatorTables, propagate, propagate_adjoint


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: NDArray[np.complex128]

    def __post_init__(self):
        psi = np.array(self.amplitudes, dtype=np.complex128)
        if psi.ndim != 1 or psi.size < 2:
            raise ShapeError("amplitudes must be a vector of length >= 2")
        norm = np.linalg.norm(psi)
        if abs(norm - 1.0) > 1e-12:
            raise InvariantError(f"state norm is {norm:.15g}, expected 1")
        psi.setflags(write=False)
        object.__setattr__(self, "amplitudes", psi)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> NDArray[np.complex128]:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    @classmethod
    def basis(cls, dim: int, k: int = 0) -> "PureState":
        psi = np.zeros(dim, dtype=complex)
        psi[k] = 1.0
        return cls(psi)


def _ket(psi) -> NDArray[np.complex128]:
    return psi.amplitudes if isinstance(psi, PureState) else np.asarray(psi, dtype=np.complex128)


def schrodinger_step(psi, f_mid: float, dt: float, tables: PropagatorTables) -> PureState:
    """``exp(-i dt/2 H0) exp(-i dt f V) exp(-i dt/2 H0) psi``."""
    ket = _ket(psi)
    if ket.shape != (tables.dim,):
        raise ShapeError(f"state has length {ket.size}, tables are {tables.dim}")
    y, z = tables.split_factors(dt)
    out = _kernels.propagate_ket(np.ascontiguousarray(ket), np.array([float(f_mid)]), y, z,
                                 np.ascontiguousarray(tables.spec1.eigenvalues), dt)
    return PureState(out[1])


def propagate_ket(psi0, field: ControlField, tables: PropagatorTables) -> NDArray[np.complex128]:
    """Wavefunction at every grid node, shape ``(J + 1, N)``."""
    ket = _ket(psi0)
    grid = field.grid
    y, z = tables.split_factors(grid.dt)
    return _kernels.propagate_ket(np.ascontiguousarray(ket), field.samples, y, z,
                                  np.ascontiguousarray(tables.spec1.eigenvalues), grid.dt)


def compare_pure_mixed(psi0, field: ControlField, tables: PropagatorTables) -> float:
    """Max over nodes of ``||rho(t) - |psi(t)><psi(t)|||_HS``."""
    ket = _ket(psi0)
    kets = propagate_ket(ket, field, tables)
    rho = propagate(np.outer(ket, ket.conj()), field.samples, field.grid, tables)
    proj = np.einsum("ja,jb->jab", kets, kets.conj())
    diff = rho - proj
    return float(np.sqrt(np.einsum("jab,jab->j", diff.conj(), diff).real).max())


def _steps_kets(kets, field, tables):
    grid = field.grid
    y, z = tables.split_factors(grid.dt)
    v = tables.spec1.eigenvalues
    # U_j psi_j for every step, vectorised over j
    phase = np.exp(-1j * grid.dt * field.samples[:, None] * v[None, :])
    return (phase * (kets[:-1] @ y.conj())) @ z.T


def compare_W_components(psi0, A, field: ControlField, tables: PropagatorTables,
                         A_traj: Trajectory | None = None) -> tuple[float, float]:
    """Absolute differences of ``W1`` and ``W2`` between the two formulations.

    ``A_v`` defaults to ``A`` propagated backward under ``field``. The
    Liouville ``W2`` is ``sum_j <<A_{j+1}|rho_{j+1} - U_j rho_j U_j^dagger>>``;
    the Hilbert form is ``2 Re sum_j <chi_{j+1}|psi_{j+1} - U_j psi_j>`` with
    ``chi = A_v psi`` built from the stored trajectories.
    """
    ket = _ket(psi0)
    a = as_matrix(A)
    grid = field.grid
    if A_traj is None:
        A_states = propagate_adjoint(a, field.samples, grid, tables)
    else:
        A_states = A_traj.states
    kets = propagate_ket(ket, field, tables)
    rho = propagate(np.outer(ket, ket.conj()), field.samples, grid, tables)

    W1_liou = complex(np.vdot(a, rho[-1])).real
    W1_hilb = complex(np.vdot(kets[-1], a @ kets[-1])).real

    y, z = tables.split_factors(grid.dt)
    W2_liou = _kernels.dynamics_residual(np.ascontiguousarray(A_states), rho, field.samples, y, z,
                                         tables.omega, grid.dt)
    chi = np.einsum("jab,jb->ja", A_states[1:], kets[1:])
    resid = kets[1:] - _steps_kets(kets, field, tables)
    W2_hilb = 2.0 * np.sum(np.einsum("ja,ja->j", chi.conj(), resid)).real
    return abs(W1_liou - W1_hilb), abs(W2_liou.real - W2_hilb)


def pure_penalty(field: ControlField) -> float:
    """Pure-state fluence term ``alpha0 * sum f^2 dt`` with ``alpha0 = lam / 2``."""
    alpha0 = field.lam / 2.0
    return alpha0 * float(np.sum(field.samples**2)) * field.grid.dt


def purity_drift(states: NDArray[np.complex128]) -> float:
    pur = np.einsum("jab,jba->j", states, states).real
    return float(np.max(np.abs(pur - pur[0])))


def scale(A, rho0) -> float:
    return hs_norm(A) * hs_norm(rho0)
