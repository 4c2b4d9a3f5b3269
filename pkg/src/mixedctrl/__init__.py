"""Monotonically convergent optimal control of mixed quantum states.

Density matrices evolve under ``H0 + f(t) V`` with a symmetric split-operator
propagator; a backward/forward sweep iteration raises ``<A(tF)>`` minus a
fluence penalty at every step.
"""

from .bounds import BoundsResult, brute_force_bounds, kinematical_bounds
from .errors import ConfigError, InvariantError, MonotonicityError, NumericError, ShapeError
from .liouville import (
    DensityState,
    HermitianOperator,
    SpectralPair,
    commutator_action,
    eig_hermitian,
    expectation,
    hs_norm,
    liouville_inner,
)
from .models import (
    MorseModel,
    build_dipole,
    build_h0,
    diagonal_state,
    ground_state,
    thermal_state,
    thermal_weights,
)
from .optimizer import (
    ControlField,
    IterationRecord,
    OptimizationResult,
    OptimizerConfig,
    Trajectory,
    evaluate_W,
    run,
)
from .propagator import PropagatorTables, TimeGrid, build_tables, propagate, propagate_adjoint, step
from .purestate import PureState, compare_pure_mixed, compare_W_components

__version__ = "0.1.0"
