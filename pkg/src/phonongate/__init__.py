"""Driven spins coupled to a thermal mechanical oscillator: effective
Hamiltonians, closed-form reduced dynamics, damping-basis solutions and a
thermally protected entangling gate."""

from .analytic import (
    ClosedFormParams,
    Y_function,
    coherence_C,
    coherence_S,
    fidelity_F,
    fidelity_mech,
    fidelity_spin_dephasing,
    infidelity_dephasing,
    infidelity_thermal,
    infidelity_total,
    infidelity_unprotected,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    IntegratorError,
    LayoutError,
    ModelError,
    ParameterError,
    PhononGateError,
    TruncationError,
)
from .hilbert import DensityOperator, Operator, SpaceLayout, embed, expm_apply, partial_trace, tensor
from .model import (
    PROTECTED,
    SystemParams,
    dispersive_transform,
    heff_fourth_order,
    heff_protected,
    heff_second_order,
    tavis_cummings,
    thermal_state,
)
from .dynamics import Dissipators, EvolutionSpec, Trajectory, evolve, exact_vs_effective
from .dampingbasis import EigenElement, damping_eigensystem, damping_propagate, dephasing_eigensystem, dephasing_propagate
from .gate import GateConfig, LogicalQubit, run_gate, selectivity_scan, truth_table

__version__ = "0.1.0"
