"""Incoherent-infidelity estimation from composite-cycle survival probabilities."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .circuits import (
    ErrorParams,
    default_table,
    inverse_sequence,
    sample_two_qubit_clifford,
)
from .exceptions import DimensionError, NumericalError, ValidationError
from .liouville import fidelity, pure_state_vector, purity
from .propagation import NoisyCircuit, ideal_unitary, propagate, pulse_inverse, realize
from .spam import SpamModel, spam_survival_values

MAX_ORDER = 20
DEFAULT_N_MAX = 8
CLAMP_TOLERANCE = 1e-10

Shots = Union[int, str]


# -- coefficients ------------------------------------------------------------

def _solve_exact(A: list, b: list) -> list:
    """Gauss-Jordan elimination with partial pivoting over the rationals."""
    n = len(b)
    M = [list(row) + [rhs] for row, rhs in zip(A, b)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(M[r][col]))
        if M[piv][col] == 0:
            raise NumericalError("singular system")
        M[col], M[piv] = M[piv], M[col]
        p = M[col][col]
        M[col] = [x / p for x in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def vandermonde(n: int) -> np.ndarray:
    """``V[j, k] = k**j`` for j, k = 0 ... n."""
    k = np.arange(n + 1, dtype=float)
    return np.vstack([k**j for j in range(n + 1)])


@dataclass(frozen=True)
class CoefficientSet:
    """Weights ``a_0 ... a_n`` cancelling powers ``k^0, k^2 ... k^n`` and picking out ``k^1``."""

    n: int
    a: tuple
    exact: tuple = field(default=(), repr=False)

    def moment(self, j: int) -> Fraction:
        """Exact ``sum_k k**j a_k`` (0 for j != 1 up to n, 1 for j = 1)."""
        return sum((Fraction(k) ** j * ak for k, ak in enumerate(self.exact)), Fraction(0))


def coefficients(n: int) -> CoefficientSet:
    """Solve the Vandermonde system ``V a = e_1`` exactly, returned as floats.

    The solve runs in rational arithmetic so the moment identities hold
    exactly for every order up to 20.
    """
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_ORDER:
        raise ValueError(f"order n must be an integer in [1, {MAX_ORDER}], got {n!r}")
    n = int(n)
    A = [[Fraction(k) ** j for k in range(n + 1)] for j in range(n + 1)]
    b = [Fraction(int(j == 1)) for j in range(n + 1)]
    exact = tuple(_solve_exact(A, b))
    return CoefficientSet(n, tuple(float(x) for x in exact), exact)


def vandermonde_coefficients(n: int, refine: int = 2) -> np.ndarray:
    """Floating-point partial-pivoted solve of the same system (LAPACK).

    Rows are equilibrated before the solve; ``refine`` rounds of iterative
    refinement then use residuals computed exactly, which the integer matrix
    allows.  Without refinement the error at n = 10 is around 1e-9.
    """
    V = vandermonde(n)
    rhs = np.zeros(n + 1)
    rhs[1] = 1.0
    scale = np.abs(V).max(axis=1)
    Vs = V / scale[:, None]
    a = np.linalg.solve(Vs, rhs / scale)
    rows = [[k**j for k in range(n + 1)] for j in range(n + 1)]
    for _ in range(refine):
        exact = [Fraction(x) for x in a]
        resid = [int(j == 1) - sum((r * x for r, x in zip(row, exact)), Fraction(0))
                 for j, row in enumerate(rows)]
        a = a + np.linalg.solve(Vs, np.array([float(x) for x in resid]) / scale)
    return a


def closed_form_coefficients(n: int) -> tuple:
    """``a_0 = -H_n`` and ``a_k = (-1)**(k+1) C(n, k) / k``, as exact fractions."""
    a0 = -sum(Fraction(1, j) for j in range(1, n + 1))
    return (a0,) + tuple(Fraction((-1) ** (k + 1) * math.comb(n, k), k) for k in range(1, n + 1))


# -- survival probabilities ----------------------------------------------------

def _check_pure(rho0: np.ndarray) -> np.ndarray:
    rho0 = np.asarray(rho0, dtype=complex).reshape(-1)
    if abs(purity(rho0) - 1.0) > 1e-10:
        raise ValidationError("initial state must be pure")
    return rho0


def survival_values(cycle: np.ndarray, k_max: int, rho0: np.ndarray) -> np.ndarray:
    """``R_k = <<rho0|cycle^k|rho0>>`` for k = 0 ... k_max, by repeated matvecs."""
    rho0 = _check_pure(rho0)
    if cycle.shape != (rho0.size, rho0.size):
        raise DimensionError(f"cycle {cycle.shape} does not act on a length-{rho0.size} state")
    v = rho0
    out = [np.vdot(rho0, v)]
    for _ in range(k_max):
        v = cycle @ v
        out.append(np.vdot(rho0, v))
    return np.real(np.array(out))


def survival_probability(cycle: np.ndarray, k: int, rho0: np.ndarray) -> float:
    if k < 0:
        raise ValueError("k must be >= 0")
    return float(survival_values(cycle, k, rho0)[-1])


def sigma_n(r: Sequence[float], coeffs: CoefficientSet) -> float:
    r = np.asarray(r, dtype=float)
    if r.shape != (coeffs.n + 1,):
        raise DimensionError(f"need {coeffs.n + 1} survival values, got {r.size}")
    return float(np.dot(coeffs.a, r))


# -- oracles -----------------------------------------------------------------

def _ideal_output(c: NoisyCircuit, rho0: np.ndarray) -> np.ndarray:
    """Pure ideal output of a pure input, as a density vector."""
    rho = rho0.reshape(c.dim, c.dim)
    w, v = np.linalg.eigh(rho)
    psi = ideal_unitary(c) @ v[:, np.argmax(w)]
    return pure_state_vector(psi)


def exact_incoherent_infidelity(c: NoisyCircuit, rho0: np.ndarray) -> float:
    """``1 - F`` between the ideal output and the noise-only (coherent-error-free) output."""
    rho0 = _check_pure(rho0)
    return 1.0 - fidelity(_ideal_output(c, rho0), propagate(c, rho0, "noise_only"))


def exact_total_infidelity(c: NoisyCircuit, rho0: np.ndarray) -> float:
    """``1 - F`` between the ideal output and the output of the full noisy realization."""
    rho0 = _check_pure(rho0)
    return 1.0 - fidelity(_ideal_output(c, rho0), propagate(c, rho0, "full"))


# -- estimation --------------------------------------------------------------

@dataclass
class EstimationReport:
    """Survival values, coefficients and the resulting estimate ``-sigma / 2``."""

    n: int
    r_values: list
    coefficients: list
    sigma: float
    estimate: float
    variance: float
    shots: Shots

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def cycle_superoperator(c: NoisyCircuit) -> np.ndarray:
    """Full realization of the composite cycle: ``c`` then its pulse inverse."""
    return realize(pulse_inverse(c), "full") @ realize(c, "full")


def _validate_shots(shots: Shots) -> Shots:
    if shots == "exact" or shots is None:
        return "exact"
    if isinstance(shots, bool) or not isinstance(shots, (int, np.integer)) or shots <= 0:
        raise ValueError(f"shots must be a positive integer or 'exact', got {shots!r}")
    return int(shots)


def clamp_probabilities(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    excursion = np.max(np.maximum(p - 1.0, -p), initial=0.0)
    if excursion > CLAMP_TOLERANCE:
        raise NumericalError(f"survival probability outside [0, 1] by {excursion:.3g}")
    return np.clip(p, 0.0, 1.0)


def sample_survival(p: np.ndarray, shots: Shots, rng: np.random.Generator | None) -> np.ndarray:
    """Estimated survival frequencies (exact mode returns ``p`` unchanged)."""
    shots = _validate_shots(shots)
    p = clamp_probabilities(p)
    if shots == "exact":
        return p
    if rng is None:
        raise ValueError("shot mode needs an explicit random generator")
    return rng.binomial(shots, p) / shots


def report(r: Sequence[float], n: int, shots: Shots = "exact") -> EstimationReport:
    """Assemble the order-``n`` report from (estimated) survival values ``r[0..]``."""
    shots = _validate_shots(shots)
    coeffs = coefficients(n)
    r = [float(x) for x in r[: n + 1]]
    if len(r) != n + 1:
        raise DimensionError(f"need {n + 1} survival values, got {len(r)}")
    s = sigma_n(r, coeffs)
    if shots == "exact":
        var = 0.0
    else:
        var = float(sum(a * a * q * (1.0 - q) for a, q in zip(coeffs.a, r)) / shots)
    return EstimationReport(n, r, list(coeffs.a), s, -s / 2.0, var, shots)


def survival_series(
    cycle: np.ndarray,
    k_max: int,
    rho0: np.ndarray | None = None,
    spam: SpamModel | None = None,
    prep=None,
    meas=None,
) -> np.ndarray:
    """Exact ``R_k`` (or ``R'_k`` when SPAM wrappers are given) for k = 0 ... k_max."""
    if spam is None and prep is None:
        if rho0 is None:
            raise ValueError("need rho0 or SPAM wrappers")
        return survival_values(cycle, k_max, rho0)
    spam = spam or SpamModel()
    params = spam.clifford_params or ErrorParams()
    dim = cycle.shape[0]
    eye = np.eye(dim, dtype=complex)
    return spam_survival_values(
        eye if prep is None else prep,
        eye if meas is None else meas,
        cycle, k_max, spam.fiducial, spam.povm, params,
    )


def estimate(
    c: NoisyCircuit,
    n: int,
    rho0: np.ndarray | None = None,
    *,
    spam: SpamModel | None = None,
    prep=None,
    meas=None,
    shots: Shots = "exact",
    rng: np.random.Generator | None = None,
    cycle: np.ndarray | None = None,
) -> EstimationReport:
    """Order-``n`` estimate ``-sigma_n / 2`` of the incoherent infidelity of ``c``.

    Valid in the weak-error regime, which is not checked.  ``cycle`` may be
    passed to reuse a precomputed cycle superoperator.
    """
    shots = _validate_shots(shots)
    if cycle is None:
        cycle = cycle_superoperator(c)
    p = survival_series(cycle, n, rho0, spam, prep, meas)
    return report(sample_survival(p, shots, rng), n, shots)


def estimate_series(
    c: NoisyCircuit,
    rho0: np.ndarray | None = None,
    *,
    n_max: int = DEFAULT_N_MAX,
    precision: float | None = None,
    spam: SpamModel | None = None,
    shots: Shots = "exact",
    rng: np.random.Generator | None = None,
    cycle: np.ndarray | None = None,
) -> list:
    """Reports for n = 1, 2, ... sharing one set of measured ``R_k``.

    Stops after order ``n + 1`` once ``|sigma_{n+1} - sigma_n| < precision``.
    """
    shots = _validate_shots(shots)
    if cycle is None:
        cycle = cycle_superoperator(c)
    r = sample_survival(survival_series(cycle, n_max, rho0, spam), shots, rng)
    out = []
    for n in range(1, n_max + 1):
        out.append(report(r, n, shots))
        if precision is not None and n > 1 and abs(out[-1].sigma - out[-2].sigma) < precision:
            break
    return out


# -- Clifford-averaged estimate ---------------------------------------------------

@dataclass
class CliffordAverage:
    """Averages over random preparation Cliffords, per estimator order."""

    orders: list
    mean_estimate: dict
    single_shot_std: dict
    oracle_incoherent: float
    oracle_total: float
    per_preparation: dict
    prep_indices: list

    def as_tuple(self, n: int):
        return self.mean_estimate[n], self.single_shot_std[n], self.oracle_incoherent


def clifford_averaged_estimate(
    target: NoisyCircuit,
    M: int,
    n: int | Sequence[int],
    params: ErrorParams,
    rng: np.random.Generator,
    spam: SpamModel | None = None,
    shots: Shots = "exact",
    shot_rngs: Sequence[np.random.Generator] | None = None,
) -> CliffordAverage:
    """Average ``-sigma'_n / 2`` over ``M`` random two-qubit Clifford preparations.

    Measurement Cliffords are the realized inverse sequences of the
    preparations.  SPAM Cliffords use ``params`` unless ``spam`` overrides
    them.  The oracles average incoherent and total infidelity over the ideal
    prepared states, without any SPAM error.  The single-shot standard
    deviation is that of the average when each circuit is measured once.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if target.n_qubits != 2:
        raise DimensionError("Clifford averaging is defined for two-qubit targets")
    orders = [n] if isinstance(n, (int, np.integer)) else list(n)
    k_max = max(orders)
    shots = _validate_shots(shots)
    spam = spam or SpamModel()
    if spam.clifford_params is None:
        spam = SpamModel(spam.fiducial, spam.povm, params)
    table = default_table()
    cycle = cycle_superoperator(target)
    noisy = realize(target, "noise_only")
    full = realize(target, "full")
    U = ideal_unitary(target)

    per = {k: [] for k in orders}
    var = {k: 0.0 for k in orders}
    inc, tot, indices = [], [], []
    for m in range(M):
        idx = int(rng.integers(len(table)))
        indices.append(idx)
        prep = table[idx]
        meas = inverse_sequence(prep)
        p = clamp_probabilities(
            spam_survival_values(prep, meas, cycle, k_max, spam.fiducial, spam.povm,
                                 spam.clifford_params)
        )
        if shots != "exact":
            r = sample_survival(p, shots, shot_rngs[m] if shot_rngs is not None else rng)
        else:
            r = p
        for k in orders:
            rep = report(r, k, shots)
            per[k].append(rep.estimate)
            var[k] += sum(a * a * q * (1.0 - q) for a, q in zip(rep.coefficients, p))
        psi0 = prep.net_ideal[:, 0]
        rho0 = pure_state_vector(psi0)
        ideal_out = pure_state_vector(U @ psi0)
        inc.append(1.0 - fidelity(ideal_out, noisy @ rho0))
        tot.append(1.0 - fidelity(ideal_out, full @ rho0))

    return CliffordAverage(
        orders=orders,
        mean_estimate={k: float(np.mean(per[k])) for k in orders},
        single_shot_std={k: math.sqrt(var[k]) / (2 * M) for k in orders},
        oracle_incoherent=float(np.mean(inc)),
        oracle_total=float(np.mean(tot)),
        per_preparation={k: per[k] for k in orders},
        prep_indices=indices,
    )
