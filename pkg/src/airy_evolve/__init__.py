"""Analytic and numeric evolution of nonspreading Airy wave packets."""

from .airy_special import ai, ai_packet, ai_prime, airy_derivatives
from .analytic_propagator import (
    AnalyticState,
    ForceProfile,
    PhysicalConstants,
    alpha,
    analytic_field,
    analytic_state,
    forced_factors,
    phi0,
    total_phase,
    x0,
    x1,
    x1_kernel,
)
from .fields import GridSpec, WaveField
from .numeric_propagator import Aperture, StepScheme, dft, evolve, idft, step
from .operator_algebra import (
    FactorList,
    OperatorExpr,
    classical_acceleration,
    commutator,
    hi_operator,
    zassenhaus,
)
from .verification import hb_eigencheck, peak_trajectory, phase_check, shape_error

__version__ = "0.1.0"
