"""Interleaved randomized benchmarking: sequences, decay curves, fits and the r estimate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import least_squares

from .circuits import (
    ZERO_ERRORS,
    CliffordTable,
    ErrorParams,
    default_table,
    find_inverting_clifford,
)
from .estimator import Shots, _validate_shots, clamp_probabilities
from .exceptions import FitError, ValidationError
from .liouville import ground_state_vector
from .propagation import NoisyCircuit, compose, ideal_unitary, realize
from .spam import SpamModel, fiducial_state, measurement_functional


def default_lengths() -> list:
    return [3 + 15 * k for k in range(21)]


@dataclass(frozen=True)
class RbConfig:
    lengths: tuple = tuple(default_lengths())
    samples_per_length: int = 60
    shots: Shots = "exact"

    def __post_init__(self):
        lengths = tuple(int(l) for l in self.lengths)
        if not lengths or lengths[0] < 1 or any(b <= a for a, b in zip(lengths, lengths[1:])):
            raise ValidationError("lengths must be strictly increasing and >= 1")
        if self.samples_per_length < 1:
            raise ValidationError("samples_per_length must be >= 1")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "shots", _validate_shots(self.shots))


@dataclass(frozen=True, eq=False)
class GateChannel:
    """Ideal unitary of a gate together with the superoperator that realizes it."""

    ideal: np.ndarray
    superop: np.ndarray

    @classmethod
    def from_circuit(cls, c: NoisyCircuit) -> "GateChannel":
        return cls(ideal_unitary(c), realize(c, "full"))


def depolarizing_superoperator(p: float, n: int) -> np.ndarray:
    """``rho -> (1 - p) rho + p Tr(rho) I / d`` in the row-major Liouville basis."""
    d = 2**n
    vec_i = np.eye(d, dtype=complex).reshape(-1)
    return (1 - p) * np.eye(d * d, dtype=complex) + p * np.outer(vec_i, vec_i) / d


def rb_sequence_elements(l: int, rng: np.random.Generator, interleave_ideal=None,
                         table: CliffordTable | None = None) -> list:
    """Table indices of ``l`` random Cliffords followed by the inverting one."""
    if l < 1:
        raise ValueError("sequence length must be >= 1")
    table = table or default_table()
    idx = [int(i) for i in rng.integers(len(table), size=l)]
    net = np.eye(4, dtype=complex)
    for i in idx:
        net = table[i].net_ideal @ net
        if interleave_ideal is not None:
            net = interleave_ideal @ net
    idx.append(table.lookup(net.conj().T))
    return idx


def rb_sequence(
    l: int,
    interleave: NoisyCircuit | None,
    rng: np.random.Generator,
    params: ErrorParams = ZERO_ERRORS,
    table: CliffordTable | None = None,
) -> NoisyCircuit:
    """Noisy circuit of ``l`` random Cliffords (each followed by ``interleave``) and the inverse."""
    table = table or default_table()
    target_ideal = None if interleave is None else ideal_unitary(interleave)
    idx = rb_sequence_elements(l, rng, target_ideal, table)
    parts = []
    for j, i in enumerate(idx):
        parts.append(table[i].circuit(params))
        if interleave is not None and j < l:
            parts.append(interleave)
    return compose(parts, n_qubits=2)


def decay_curve(
    cfg: RbConfig,
    interleave: NoisyCircuit | GateChannel | None,
    params: ErrorParams,
    rng: np.random.Generator,
    spam: SpamModel | None = None,
    clifford_superop: Callable | None = None,
    table: CliffordTable | None = None,
) -> list:
    """Mean survival ``F_l`` over ``cfg.samples_per_length`` random sequences per length.

    Clifford realizations default to the noisy compiled sequences under
    ``params``; ``clifford_superop`` maps a Clifford element to a custom
    realization instead.  With ``spam`` the sequences start from the fiducial
    state and end with the noisy POVM.
    """
    table = table or default_table()
    if isinstance(interleave, NoisyCircuit):
        interleave = GateChannel.from_circuit(interleave)
    realize_clifford = clifford_superop or (lambda e: e.superoperator(params))
    cache = {}

    def superop(i):
        if i not in cache:
            cache[i] = realize_clifford(table[i])
        return cache[i]

    if spam is None:
        rho = ground_state_vector(2)
        row = rho.conj()
    else:
        rho = fiducial_state(spam.fiducial, 2)
        row = measurement_functional(spam.povm, 2)

    target_ideal = None if interleave is None else interleave.ideal
    out = []
    for l in cfg.lengths:
        probs = np.empty(cfg.samples_per_length)
        for s in range(cfg.samples_per_length):
            idx = rb_sequence_elements(l, rng, target_ideal, table)
            v = rho
            for j, i in enumerate(idx):
                v = superop(i) @ v
                if interleave is not None and j < l:
                    v = interleave.superop @ v
            probs[s] = np.real(row @ v)
        probs = clamp_probabilities(probs)
        if cfg.shots != "exact":
            probs = rng.binomial(cfg.shots, probs) / cfg.shots
        out.append((l, float(np.mean(probs))))
    return out


@dataclass
class DecayFit:
    """Fit of ``F_l = A alpha**l + B``."""

    A: float
    B: float
    alpha: float
    alpha_err: float
    A_err: float = 0.0
    B_err: float = 0.0
    rms: float = 0.0
    degenerate: bool = False
    nfev: int = 0

    def predict(self, l) -> np.ndarray:
        return self.A * self.alpha ** np.asarray(l, dtype=float) + self.B


def _initial_guess(l: np.ndarray, F: np.ndarray):
    B0 = float(F.min())
    A0 = float(F[0] - B0)
    mask = F - B0 > 0
    if mask.sum() >= 2:
        slope = np.polyfit(l[mask], np.log(F[mask] - B0), 1)[0]
        alpha0 = float(np.clip(math.exp(slope), 1e-6, 1.0))
    else:
        alpha0 = 0.99
    return np.array([A0, B0, alpha0])


def fit_decay(points: Sequence, max_nfev: int = 2000) -> DecayFit:
    """Levenberg-Marquardt fit of ``A alpha**l + B`` to ``(l, F_l)`` points.

    Parameter errors come from ``s**2 (J^T J)^-1`` at the optimum with
    ``s**2 = SSR / (m - 3)``.  A flat curve has no identifiable decay and is
    returned flagged as degenerate with ``alpha = 1``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4:
        raise ValueError("fit_decay needs at least four (l, F) points")
    l, F = pts[:, 0], pts[:, 1]
    if np.any(F < 0) or np.any(F > 1.05):
        raise ValueError("survival values must lie in [0, 1.05]")
    if np.ptp(F) < 1e-12:
        return DecayFit(0.0, float(F.mean()), 1.0, math.inf, math.inf, math.inf, 0.0, True, 0)

    def resid(x):
        A, B, a = x
        return A * np.sign(a) * np.abs(a) ** l + B - F

    x0 = _initial_guess(l, F)
    res = least_squares(resid, x0, method="lm", max_nfev=max_nfev, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if res.status <= 0:
        raise FitError("decay fit did not converge",
                       {"status": int(res.status), "nfev": int(res.nfev), "x": res.x.tolist(),
                        "message": res.message})
    A, B, alpha = (float(v) for v in res.x)
    m = len(F)
    ssr = float(np.sum(res.fun**2))
    s2 = ssr / (m - 3) if m > 3 else 0.0
    JtJ = res.jac.T @ res.jac
    try:
        cov = s2 * np.linalg.inv(JtJ)
        errs = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        errs = np.full(3, math.inf)
    return DecayFit(A, B, alpha, float(errs[2]), float(errs[0]), float(errs[1]),
                    math.sqrt(ssr / m), False, int(res.nfev))


@dataclass
class InterleavedEstimate:
    r: float
    r_err: float
    r_ave_reference: float
    r_ave_interleaved: float

    def __iter__(self):
        return iter((self.r, self.r_err))


def average_error_rate(alpha: float, n_qubits: int) -> float:
    d = 2**n_qubits
    return (d - 1) / d * (1 - alpha)


def interleaved_estimate(fit_ref: DecayFit, fit_int: DecayFit, n_qubits: int = 2) -> InterleavedEstimate:
    """``r = (d-1)/d (1 - alpha_int/alpha_ref)`` with first-order error propagation."""
    a, da = fit_ref.alpha, fit_ref.alpha_err
    b, db = fit_int.alpha, fit_int.alpha_err
    if a <= 0 or b <= 0:
        raise ValueError("decay parameters must be positive")
    d = 2**n_qubits
    r = (d - 1) / d * (1 - b / a)
    r_err = (d - 1) / d * math.sqrt(b * b * da * da + a * a * db * db) / (a * a)
    return InterleavedEstimate(r, r_err, average_error_rate(a, n_qubits),
                               average_error_rate(b, n_qubits))


@dataclass
class IrbResult:
    reference_curve: list
    interleaved_curve: list
    reference_fit: DecayFit
    interleaved_fit: DecayFit
    estimate: InterleavedEstimate


def run_interleaved(
    target: NoisyCircuit,
    params: ErrorParams,
    cfg: RbConfig,
    rng: np.random.Generator,
    spam: SpamModel | None = None,
) -> IrbResult:
    """Reference and interleaved curves, their fits and the interleaved error rate."""
    table = default_table()
    ref_rng, int_rng = rng.spawn(2)
    ref = decay_curve(cfg, None, params, ref_rng, spam, table=table)
    inter = decay_curve(cfg, target, params, int_rng, spam, table=table)
    f_ref, f_int = fit_decay(ref), fit_decay(inter)
    return IrbResult(ref, inter, f_ref, f_int, interleaved_estimate(f_ref, f_int, target.n_qubits))
