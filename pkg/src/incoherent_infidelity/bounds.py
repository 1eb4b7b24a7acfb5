"""Error bounds on the linear approximation and on the first-order cycle propagator."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .estimator import exact_incoherent_infidelity
from .liouville import liouville_hamiltonian
from .propagation import (
    DEFAULT_QUADRATURE_ORDER,
    NoisyCircuit,
    cycle_circuit,
    cycle_generator,
    magnus_expectation,
    matrix_exp,
    pulse_inverse,
    realize,
)


def spectral_norm(M: np.ndarray) -> float:
    """Largest singular value (full SVD)."""
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[0])


def linearization_bound(x: float) -> float:
    """``e**x - x - 1``."""
    return math.expm1(x) - x


def cycle_bound(y: float) -> float:
    """``2 (e**y - y - 1)``."""
    return 2.0 * (math.expm1(y) - y)


@dataclass
class BoundReport:
    noise_integral: float
    total_integral: float
    linearization_bound: float
    cycle_bound: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def bounds_from_integrals(noise_integral: float, total_integral: float) -> BoundReport:
    return BoundReport(noise_integral, total_integral,
                       linearization_bound(noise_integral), cycle_bound(total_integral))


def _segment_norms(c: NoisyCircuit):
    """Yield (||L||, ||L - i dH_L||, duration) per segment, reusing repeated operators."""
    memo = {}
    for seg in c.segments:
        key = (id(seg.dissipator), seg.coherent_error.tobytes())
        if key not in memo:
            n_l = spectral_norm(seg.dissipator)
            if np.any(seg.coherent_error):
                G = seg.dissipator - 1j * liouville_hamiltonian(seg.coherent_error, check=False)
                n_t = spectral_norm(G)
            else:
                n_t = n_l
            memo[key] = (n_l, n_t)
        yield memo[key] + (seg.duration,)


def compute_bounds(c: NoisyCircuit) -> BoundReport:
    """Integrated generator norms over ``c`` and over its cycle, and the two bounds."""
    noise = 0.0
    total = 0.0
    for n_l, n_t, tau in _segment_norms(c):
        noise += n_l * tau
        total += n_t * tau
    for _, n_t, tau in _segment_norms(pulse_inverse(c)):
        total += n_t * tau
    return bounds_from_integrals(noise, total)


@dataclass
class BoundCheck:
    lhs_linear: float
    rhs_linear: float
    lhs_cycle: float
    rhs_cycle: float

    @property
    def linear_holds(self) -> bool:
        return self.lhs_linear <= self.rhs_linear

    @property
    def cycle_holds(self) -> bool:
        return self.lhs_cycle <= self.rhs_cycle

    @property
    def holds(self) -> tuple:
        return self.linear_holds, self.cycle_holds

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(linear_holds=self.linear_holds, cycle_holds=self.cycle_holds)
        return d


def verify_bounds(
    c: NoisyCircuit,
    rho0: np.ndarray,
    report: BoundReport | None = None,
    order: int = DEFAULT_QUADRATURE_ORDER,
) -> BoundCheck:
    """Exact left-hand sides of both bounds next to their closed-form right-hand sides.

    ``lhs_linear = |eps_inc + <<rho0|Omega_1|rho0>>|`` and ``lhs_cycle`` is the
    spectral distance between the exact cycle and ``exp(2 Omega_1 - i Theta_L)``.
    """
    report = report or compute_bounds(c)
    eps = exact_incoherent_infidelity(c, rho0)
    lhs1 = abs(eps + magnus_expectation(c, rho0, order))
    exact = realize(cycle_circuit(c), "full")
    lhs2 = spectral_norm(exact - matrix_exp(cycle_generator(c, order)))
    return BoundCheck(lhs1, report.linearization_bound, lhs2, report.cycle_bound)
