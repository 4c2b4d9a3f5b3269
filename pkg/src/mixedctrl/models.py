"""Morse-oscillator ladder models and initial states."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvariantError
from .liouville import DensityState, HermitianOperator

# Lowest four vibrational levels of HF in units of hbar*omega0.
HF_ENERGIES = (0.4843, 1.4214, 2.3691, 3.2434)
HF_OMEGA0 = 7.8e14  # s^-1


def default_dipoles(dim: int) -> NDArray[np.float64]:
    """Harmonic-ladder couplings ``d_n = sqrt(n)``, n = 1..dim-1."""
    return np.sqrt(np.arange(1, dim, dtype=float))


@dataclass(frozen=True, eq=False)
class MorseModel:
    energies: NDArray[np.float64]
    dipoles: NDArray[np.float64] = field(default=None)
    omega0: float = HF_OMEGA0

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        if e.ndim != 1 or e.size < 2:
            raise InvariantError("energies must be a vector of length >= 2")
        if not np.all(np.isfinite(e)) or np.any(np.diff(e) <= 0):
            raise InvariantError("energies must be finite and strictly increasing")
        d = default_dipoles(e.size) if self.dipoles is None else np.asarray(self.dipoles, dtype=float)
        if d.shape != (e.size - 1,):
            raise InvariantError(f"expected {e.size - 1} dipole couplings, got {d.size}")
        if not np.all(np.isfinite(d)) or np.any(d == 0):
            raise InvariantError("dipole couplings must be finite and nonzero")
        if not (self.omega0 > 0 and np.isfinite(self.omega0)):
            raise InvariantError("omega0 must be positive")
        e.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "dipoles", d)
        object.__setattr__(self, "omega0", float(self.omega0))

    @property
    def dim(self) -> int:
        return self.energies.size

    @classmethod
    def hf(cls, dipoles: ArrayLike | None = None) -> "MorseModel":
        """Four-level HF model with default or supplied couplings."""
        return cls(np.array(HF_ENERGIES), dipoles, HF_OMEGA0)


def build_h0(model: MorseModel) -> HermitianOperator:
    return HermitianOperator(np.diag(model.energies).astype(complex))


def build_dipole(model: MorseModel) -> HermitianOperator:
    """Nearest-neighbour transition operator ``sum d_n (|n><n+1| + h.c.)``."""
    d = model.dipoles
    return HermitianOperator((np.diag(d, 1) + np.diag(d, -1)).astype(complex))


def ground_state(dim: int) -> DensityState:
    if dim < 2:
        raise InvariantError("dimension must be at least 2")
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    return DensityState(rho)


def diagonal_state(weights: ArrayLike) -> DensityState:
    w = np.asarray(weights, dtype=float)
    return DensityState(np.diag(w).astype(complex))


def thermal_weights(energies: ArrayLike, kT: float) -> NDArray[np.float64]:
    if not kT > 0:
        raise InvariantError(f"kT must be positive, got {kT}")
    e = np.asarray(energies, dtype=float)
    # shift by the ground energy so small kT does not underflow to 0/0
    w = np.exp(-(e - e.min()) / kT)
    return w / w.sum()


def thermal_state(energies: ArrayLike, kT: float) -> DensityState:
    """Boltzmann ensemble ``w_n = C exp(-E_n / kT)``, diagonal in the energy basis."""
    return diagonal_state(thermal_weights(energies, kT))


def time_to_internal(t_fs: float, omega0: float) -> float:
    """Convert femtoseconds to dimensionless time in units of ``1/omega0``."""
    if not omega0 > 0:
        raise InvariantError("omega0 must be positive")
    return t_fs * 1e-15 * omega0


def time_to_fs(t: ArrayLike, omega0: float) -> NDArray[np.float64]:
    return np.asarray(t, dtype=float) / omega0 * 1e15
