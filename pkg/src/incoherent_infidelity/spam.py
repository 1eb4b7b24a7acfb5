"""State-preparation and measurement error models."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .circuits import ZERO_ERRORS, CliffordElement, ErrorParams, rotation
from .exceptions import DimensionError, ValidationError
from .liouville import I2, PAULIS, pure_state_vector, vectorize

REFERENCE_FIDUCIAL_ANGLE = 0.005 * math.pi
REFERENCE_POVM = (0.501, 0.0, 0.0, 0.495)
IDEAL_POVM = (0.5, 0.0, 0.0, 0.5)


@dataclass(frozen=True)
class FiducialSpec:
    """Per-qubit ``(alpha_X, alpha_Y)``; the state is ``R_Y(alpha_Y) R_X(alpha_X)|0>``.

    A single pair is broadcast to every qubit.
    """

    rotation_angles: tuple = ((0.0, 0.0),)

    def __post_init__(self):
        angles = tuple(tuple(float(a) for a in pair) for pair in self.rotation_angles)
        if not angles or any(len(pair) != 2 for pair in angles):
            raise ValidationError("rotation_angles must be a list of (alpha_X, alpha_Y) pairs")
        object.__setattr__(self, "rotation_angles", angles)

    @classmethod
    def uniform(cls, alpha_x: float, alpha_y: float) -> "FiducialSpec":
        return cls(((alpha_x, alpha_y),))

    def angles_for(self, n: int) -> tuple:
        if len(self.rotation_angles) == 1:
            return self.rotation_angles * n
        if len(self.rotation_angles) != n:
            raise DimensionError(f"{len(self.rotation_angles)} angle pairs for {n} qubits")
        return self.rotation_angles

    def scaled(self, s: float) -> "FiducialSpec":
        return FiducialSpec(tuple((s * ax, s * ay) for ax, ay in self.rotation_angles))


@dataclass(frozen=True)
class PovmSpec:
    """Single-qubit POVM element ``Pi = sum_k pi_k P_k`` for outcome 0 (the complement is ``I - Pi``)."""

    pi_coefficients: tuple = IDEAL_POVM

    def __post_init__(self):
        pi = tuple(float(c) for c in self.pi_coefficients)
        if len(pi) != 4:
            raise ValidationError("pi_coefficients needs four Pauli coefficients")
        object.__setattr__(self, "pi_coefficients", pi)
        E = self.element
        for M in (E, I2 - E):
            if np.linalg.eigvalsh(M).min() < -1e-12:
                raise ValidationError(f"POVM coefficients {pi} are not positive semidefinite")

    @property
    def element(self) -> np.ndarray:
        return sum(c * P for c, P in zip(self.pi_coefficients, PAULIS))

    def scaled(self, s: float) -> "PovmSpec":
        """Scale the deviation from the ideal projector by ``s``."""
        return PovmSpec(tuple(i + s * (c - i) for c, i in zip(self.pi_coefficients, IDEAL_POVM)))


def fiducial_state(spec: FiducialSpec, n: int) -> np.ndarray:
    """Density vector of the product of rotated single-qubit ``|0>`` states."""
    kets = []
    for ax, ay in spec.angles_for(n):
        kets.append(rotation("Y", ay) @ rotation("X", ax) @ np.array([1, 0], dtype=complex))
    return pure_state_vector(reduce(np.kron, kets))


def measurement_functional(spec: PovmSpec, n: int) -> np.ndarray:
    """Row vector ``<<Pi x ... x Pi|``; ``row @ vec(rho)`` is the all-zeros outcome probability."""
    E = reduce(np.kron, [spec.element] * n)
    return vectorize(E).conj()


def detector_block(spec: PovmSpec) -> np.ndarray:
    """2x2 detector matrix ``D[i, j] = P(outcome i | state j)``."""
    pi0, _, _, pi3 = spec.pi_coefficients
    return np.array([[pi0 + pi3, pi0 - pi3], [1 - (pi0 + pi3), 1 - (pi0 - pi3)]])


@dataclass(frozen=True)
class SpamModel:
    """Fiducial, readout and SPAM-Clifford error settings used together."""

    fiducial: FiducialSpec = FiducialSpec()
    povm: PovmSpec = PovmSpec()
    clifford_params: ErrorParams | None = None

    @classmethod
    def reference(cls, clifford_params: ErrorParams | None = None) -> "SpamModel":
        """Fiducial tilt of 0.005 pi about X then Y and the POVM ``(0.501, 0, 0, 0.495)``."""
        return cls(FiducialSpec.uniform(REFERENCE_FIDUCIAL_ANGLE, REFERENCE_FIDUCIAL_ANGLE),
                   PovmSpec(REFERENCE_POVM), clifford_params)

    def scaled(self, s: float) -> "SpamModel":
        cp = None if self.clifford_params is None else self.clifford_params.scaled(s)
        return SpamModel(self.fiducial.scaled(s), self.povm.scaled(s), cp)


def _superop(op, params: ErrorParams) -> np.ndarray:
    if isinstance(op, CliffordElement):
        return op.superoperator(params)
    return np.asarray(op)


def spam_survival_values(
    prep,
    meas,
    cycle: np.ndarray,
    k_max: int,
    fid: FiducialSpec,
    povm: PovmSpec,
    params: ErrorParams = ZERO_ERRORS,
) -> np.ndarray:
    """``R'_k = <<Pi| K_m cycle^k K_p |0^>>`` for k = 0 ... k_max.

    ``prep`` and ``meas`` are Clifford elements (realized with ``params``) or
    superoperators.
    """
    cycle = np.asarray(cycle)
    dim = math.isqrt(cycle.shape[0])
    n = int(round(math.log2(dim)))
    Kp = _superop(prep, params)
    Km = _superop(meas, params)
    if Kp.shape != cycle.shape or Km.shape != cycle.shape:
        raise DimensionError("SPAM superoperators and cycle have different shapes")
    row = measurement_functional(povm, n) @ Km
    v = Kp @ fiducial_state(fid, n)
    out = [row @ v]
    for _ in range(k_max):
        v = cycle @ v
        out.append(row @ v)
    return np.real(np.array(out))


def spam_wrapped_survival(
    prep,
    meas,
    cycle: np.ndarray,
    k: int,
    fid: FiducialSpec,
    povm: PovmSpec,
    params: ErrorParams = ZERO_ERRORS,
) -> float:
    """Single survival value ``R'_k``; ``k = 0`` is the SPAM-only survival."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return float(spam_survival_values(prep, meas, cycle, k, fid, povm, params)[-1])
