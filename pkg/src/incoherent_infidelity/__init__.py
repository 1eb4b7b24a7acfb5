"""Estimate the incoherent infidelity of a noisy circuit from composite-cycle survival data.

The package contains a dense Liouville-space simulator for piecewise-constant
Lindblad dynamics with coherent errors, the cycle-based estimator, SPAM and
readout models, an interleaved RB baseline and the accompanying error bounds.
"""

from .bounds import BoundReport, compute_bounds, verify_bounds
from .circuits import (
    CliffordElement,
    CliffordTable,
    ErrorParams,
    GateSpec,
    cnot_circuit,
    erroneous_rotation,
    find_inverting_clifford,
    ghz_circuit,
    inverse_sequence,
    sample_two_qubit_clifford,
)
from .estimator import (
    CoefficientSet,
    EstimationReport,
    clifford_averaged_estimate,
    coefficients,
    estimate,
    exact_incoherent_infidelity,
    sigma_n,
    survival_probability,
)
from .irb import DecayFit, RbConfig, decay_curve, fit_decay, interleaved_estimate, rb_sequence
from .mitigation import DetectorMatrix, calibrate, mitigate
from .propagation import (
    ContinuousSegment,
    InstantGate,
    NoisyCircuit,
    first_magnus_term,
    matrix_exp,
    pulse_inverse,
    realize,
)
from .spam import FiducialSpec, PovmSpec, fiducial_state, measurement_functional, spam_wrapped_survival

__version__ = "0.1.0"
