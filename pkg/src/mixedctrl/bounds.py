"""Kinematical extrema of ``tr(A U rho0 U^dagger)`` over all unitaries ``U``."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvariantError, ShapeError
from .liouville import DensityState, HermitianOperator, as_matrix, check_density


@dataclass(frozen=True)
class BoundsResult:
    lower: float
    upper: float
    # attaining_assignment[k] = rank of the A-eigenvalue (0 = largest) paired
    # with the k-th largest weight of rho0 at the upper bound
    attaining_assignment: tuple[int, ...]
    lower_assignment: tuple[int, ...]

    def ratio(self, value: float) -> float:
        """Fraction of the upper bound reached by ``value``."""
        return value / self.upper


def _spectra(rho0, A):
    r = rho0.matrix if isinstance(rho0, DensityState) else as_matrix(rho0)
    a = A.matrix if isinstance(A, HermitianOperator) else HermitianOperator(as_matrix(A)).matrix
    if r.shape != a.shape:
        raise ShapeError(f"rho0 is {r.shape}, A is {a.shape}")
    if not isinstance(rho0, DensityState):
        check_density(r)
    w = np.linalg.eigvalsh(r)[::-1]  # descending
    x = np.linalg.eigvalsh(a)  # ascending
    return w, x


def kinematical_bounds(rho0, A) -> BoundsResult:
    """Rank-pairing bounds.

    The upper bound pairs the largest weight of ``rho0`` with the largest
    eigenvalue of ``A``, the second largest with the second largest, and so
    on; the lower bound pairs largest weight with smallest eigenvalue.
    """
    w, x = _spectra(rho0, A)
    n = w.size
    upper = float(np.dot(w, x[::-1]))
    lower = float(np.dot(w, x))
    if lower > upper:
        raise InvariantError("lower bound exceeds upper bound")
    return BoundsResult(
        lower=lower,
        upper=upper,
        attaining_assignment=tuple(range(n)),
        lower_assignment=tuple(range(n - 1, -1, -1)),
    )


def brute_force_bounds(rho0, A) -> tuple[float, float]:
    """Min and max of ``sum_k w_k a_{pi(k)}`` over all ``N!`` pairings."""
    w, x = _spectra(rho0, A)
    vals = [float(np.dot(w, x[list(p)])) for p in itertools.permutations(range(w.size))]
    return min(vals), max(vals)
