"""Piecewise-constant noisy circuits: exact propagation, pulse inverse, first Magnus term."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence, Union

import numpy as np

from .exceptions import DimensionError, NumericalError, ValidationError
from .liouville import (
    DEFAULT_ATOL,
    apply_unitary_left,
    conjugate_by_unitary,
    identity_superoperator,
    is_hermitian,
    is_unitary,
    liouville_hamiltonian,
    num_qubits,
)

DEFAULT_QUADRATURE_ORDER = 16

# Higham (2005) backward-error thresholds for the diagonal Pade approximants.
_PADE_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}
_PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (
        17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0,
    ),
    13: (
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
        33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0,
    ),
}


def _pade(A: np.ndarray, m: int) -> np.ndarray:
    b = _PADE_COEFFS[m]
    ident = np.eye(A.shape[0], dtype=A.dtype)
    A2 = A @ A
    if m == 13:
        A4 = A2 @ A2
        A6 = A2 @ A4
        U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
                 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
        V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
             + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    else:
        powers = [ident, A2]
        for _ in range(2, (m + 1) // 2):
            powers.append(powers[-1] @ A2)
        U = A @ sum(b[2 * j + 1] * powers[j] for j in range((m + 1) // 2))
        V = sum(b[2 * j] * powers[j] for j in range((m + 1) // 2))
    return np.linalg.solve(V - U, V + U)


def matrix_exp(G: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with diagonal Pade approximants.

    Follows Higham's 2005 algorithm: the lowest Pade degree in {3, 5, 7, 9, 13}
    whose backward-error threshold covers the 1-norm is used, otherwise the
    matrix is scaled by 2**-s to fit degree 13 and the result squared s times.
    """
    G = np.asarray(G)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DimensionError(f"matrix_exp needs a square matrix, got {G.shape}")
    if not np.all(np.isfinite(G)):
        raise NumericalError("matrix_exp received non-finite entries")
    G = G.astype(complex, copy=False)
    norm = np.linalg.norm(G, 1)
    if norm == 0.0:
        return np.eye(G.shape[0], dtype=complex)
    for m in (3, 5, 7, 9):
        if norm <= _PADE_THETA[m]:
            return _pade(G, m)
    s = max(0, int(math.ceil(math.log2(norm / _PADE_THETA[13]))))
    F = _pade(G / 2.0**s, 13)
    for _ in range(s):
        F = F @ F
    return F


def hermitian_evolution(H: np.ndarray, t: float) -> np.ndarray:
    """Hilbert-space ``exp(-i H t)`` for Hermitian ``H`` via its eigendecomposition."""
    w, v = np.linalg.eigh(H)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


class CoherentInversion(str, enum.Enum):
    """What happens to a segment's coherent error under the pulse inverse."""

    UNCHANGED = "unchanged"
    SIGN_FLIPPED = "sign-flipped"


class Mode(str, enum.Enum):
    FULL = "full"
    IDEAL = "ideal"
    NOISE_ONLY = "noise_only"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=complex).view()
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ContinuousSegment:
    """Constant drive ``hamiltonian`` with coherent error and dissipator, for ``duration``."""

    hamiltonian: np.ndarray
    coherent_error: np.ndarray
    dissipator: np.ndarray
    duration: float
    coherent_inversion: CoherentInversion = CoherentInversion.UNCHANGED
    label: str = ""

    def __post_init__(self):
        H = _frozen(self.hamiltonian)
        dH = _frozen(self.coherent_error)
        L = _frozen(self.dissipator)
        object.__setattr__(self, "hamiltonian", H)
        object.__setattr__(self, "coherent_error", dH)
        object.__setattr__(self, "dissipator", L)
        object.__setattr__(self, "coherent_inversion", CoherentInversion(self.coherent_inversion))
        N = H.shape[0]
        num_qubits(N)
        if H.shape != (N, N) or dH.shape != (N, N):
            raise DimensionError("hamiltonian and coherent_error must share an N x N shape")
        if L.shape != (N * N, N * N):
            raise DimensionError(f"dissipator must be {N * N} x {N * N}, got {L.shape}")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ValidationError(f"segment duration must be positive, got {self.duration}")
        if not is_hermitian(H) or not is_hermitian(dH):
            raise ValidationError("segment hamiltonian and coherent error must be Hermitian")

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def generator(self, mode: Mode | str = Mode.FULL) -> np.ndarray:
        """Liouville generator whose exponential (times duration) realizes the segment."""
        mode = Mode(mode)
        H = self.hamiltonian + self.coherent_error if mode is Mode.FULL else self.hamiltonian
        G = -1j * liouville_hamiltonian(H, check=False)
        if mode is not Mode.IDEAL:
            G = G + self.dissipator
        return G

    def inverted(self) -> "ContinuousSegment":
        dH = self.coherent_error
        if self.coherent_inversion is CoherentInversion.SIGN_FLIPPED:
            dH = -dH
        return ContinuousSegment(
            hamiltonian=-self.hamiltonian,
            coherent_error=dH,
            dissipator=self.dissipator,
            duration=self.duration,
            coherent_inversion=self.coherent_inversion,
            label=_inverse_label(self.label),
        )


@dataclass(frozen=True, eq=False)
class InstantGate:
    """Instantaneous unitary with separate ideal and (erroneous) real forward/inverse forms."""

    forward_ideal: np.ndarray
    forward_real: np.ndarray
    inverse_real: np.ndarray
    label: str = ""

    def __post_init__(self):
        for name in ("forward_ideal", "forward_real", "inverse_real"):
            U = _frozen(getattr(self, name))
            if U.ndim != 2 or U.shape != self.forward_ideal.shape:
                raise DimensionError("instant gate unitaries must share one square shape")
            if not is_unitary(U, DEFAULT_ATOL):
                raise ValidationError(f"{name} is not unitary")
            object.__setattr__(self, name, U)
        num_qubits(self.forward_ideal.shape[0])

    @classmethod
    def ideal(cls, U: np.ndarray, label: str = "") -> "InstantGate":
        U = np.asarray(U, dtype=complex)
        return cls(U, U, U.conj().T, label)

    @property
    def dim(self) -> int:
        return self.forward_ideal.shape[0]

    def inverted(self) -> "InstantGate":
        return InstantGate(
            forward_ideal=self.forward_ideal.conj().T,
            forward_real=self.inverse_real,
            inverse_real=self.forward_real,
            label=_inverse_label(self.label),
        )


def _inverse_label(label: str) -> str:
    if not label:
        return ""
    return label[:-4] if label.endswith("^inv") else label + "^inv"


Element = Union[ContinuousSegment, InstantGate]


@dataclass(frozen=True, eq=False)
class NoisyCircuit:
    """Ordered circuit elements; the first element acts first."""

    elements: tuple
    n_qubits: int

    def __post_init__(self):
        elements = tuple(self.elements)
        object.__setattr__(self, "elements", elements)
        dim = 2**self.n_qubits
        for el in elements:
            if not isinstance(el, (ContinuousSegment, InstantGate)):
                raise TypeError(f"unsupported circuit element {type(el).__name__}")
            if el.dim != dim:
                raise DimensionError(
                    f"element of dimension {el.dim} in a {self.n_qubits}-qubit circuit"
                )

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def duration(self) -> float:
        return sum(el.duration for el in self.elements if isinstance(el, ContinuousSegment))

    @property
    def segments(self) -> list:
        return [el for el in self.elements if isinstance(el, ContinuousSegment)]

    def then(self, other: "NoisyCircuit") -> "NoisyCircuit":
        """This circuit followed by ``other``."""
        if other.n_qubits != self.n_qubits:
            raise DimensionError("cannot compose circuits on different registers")
        return NoisyCircuit(self.elements + other.elements, self.n_qubits)

    def __len__(self):
        return len(self.elements)


def compose(circuits: Iterable[NoisyCircuit], n_qubits: int | None = None) -> NoisyCircuit:
    """Concatenate circuits in time order."""
    circuits = list(circuits)
    if not circuits:
        if n_qubits is None:
            raise ValueError("n_qubits is required to compose an empty list")
        return NoisyCircuit((), n_qubits)
    out = circuits[0]
    for c in circuits[1:]:
        out = out.then(c)
    return out


def segment_propagator(seg: ContinuousSegment, mode: Mode | str = Mode.FULL) -> np.ndarray:
    """Superoperator of a single segment in the given mode."""
    mode = Mode(mode)
    if mode is Mode.IDEAL:
        U = hermitian_evolution(seg.hamiltonian, seg.duration)
        return np.kron(U, U.conj())
    return matrix_exp(seg.generator(mode) * seg.duration)


def realize(c: NoisyCircuit, mode: Mode | str = Mode.FULL) -> np.ndarray:
    """Superoperator of the whole circuit (later elements multiply from the left).

    ``full`` includes coherent errors and dissipators, ``ideal`` neither, and
    ``noise_only`` keeps the dissipators but drops every coherent error
    (instant gates use their ideal forward unitary).
    """
    mode = Mode(mode)
    M = identity_superoperator(c.dim)
    for el in c.elements:
        if isinstance(el, InstantGate):
            U = el.forward_real if mode is Mode.FULL else el.forward_ideal
            M = apply_unitary_left(U, M)
        elif mode is Mode.IDEAL:
            M = apply_unitary_left(hermitian_evolution(el.hamiltonian, el.duration), M)
        else:
            M = segment_propagator(el, mode) @ M
    return M


def propagate(c: NoisyCircuit, state: np.ndarray, mode: Mode | str = Mode.FULL) -> np.ndarray:
    """Apply the circuit to a density vector without forming the full product."""
    mode = Mode(mode)
    v = np.asarray(state, dtype=complex).reshape(-1)
    for el in c.elements:
        if isinstance(el, InstantGate):
            U = el.forward_real if mode is Mode.FULL else el.forward_ideal
            v = apply_unitary_left(U, v)
        elif mode is Mode.IDEAL:
            v = apply_unitary_left(hermitian_evolution(el.hamiltonian, el.duration), v)
        else:
            v = segment_propagator(el, mode) @ v
    return v


def ideal_unitary(c: NoisyCircuit) -> np.ndarray:
    """Hilbert-space unitary of the error-free circuit."""
    U = np.eye(c.dim, dtype=complex)
    for el in c.elements:
        if isinstance(el, InstantGate):
            U = el.forward_ideal @ U
        else:
            U = hermitian_evolution(el.hamiltonian, el.duration) @ U
    return U


def pulse_inverse(c: NoisyCircuit) -> NoisyCircuit:
    """Reverse the element order and invert each element.

    Segments flip the sign of the drive and keep their dissipator; coherent
    errors follow each segment's inversion policy.  Instant gates swap to their
    realized inverse.
    """
    return NoisyCircuit(tuple(el.inverted() for el in reversed(c.elements)), c.n_qubits)


def cycle_circuit(c: NoisyCircuit) -> NoisyCircuit:
    """The composite cycle: ``c`` followed by its pulse inverse."""
    return c.then(pulse_inverse(c))


@lru_cache(maxsize=8)
def _gauss_legendre(order: int):
    return np.polynomial.legendre.leggauss(order)


def _segment_nodes(duration: float, order: int):
    x, w = _gauss_legendre(order)
    return 0.5 * duration * (x + 1.0), 0.5 * duration * w


def _frame_integral(c: NoisyCircuit, integrand, order: int):
    """Sum over segments of the Gauss-Legendre integral of ``integrand(seg, frame)``.

    ``frame`` is the Hilbert-space ideal cumulative unitary at the node.
    """
    u = np.eye(c.dim, dtype=complex)
    total = None
    for el in c.elements:
        if isinstance(el, InstantGate):
            u = el.forward_ideal @ u
            continue
        w_h, v_h = np.linalg.eigh(el.hamiltonian)
        nodes, weights = _segment_nodes(el.duration, order)
        for s, w in zip(nodes, weights):
            frame = ((v_h * np.exp(-1j * w_h * s)) @ v_h.conj().T) @ u
            term = w * integrand(el, frame)
            total = term if total is None else total + term
        u = hermitian_evolution(el.hamiltonian, el.duration) @ u
    return total


def first_magnus_term(c: NoisyCircuit, order: int = DEFAULT_QUADRATURE_ORDER) -> np.ndarray:
    """Interaction-picture integral of the dissipators over the circuit duration."""
    out = _frame_integral(c, lambda seg, u: conjugate_by_unitary(seg.dissipator, u), order)
    if out is None:
        return np.zeros((c.dim**2, c.dim**2), dtype=complex)
    return out


def magnus_expectation(
    c: NoisyCircuit, rho0: np.ndarray, order: int = DEFAULT_QUADRATURE_ORDER
) -> float:
    """``<<rho0|Omega_1|rho0>>`` from state trajectories, without the full matrix."""
    rho0 = np.asarray(rho0, dtype=complex).reshape(-1)

    def integrand(seg, u):
        r = apply_unitary_left(u, rho0)
        return np.vdot(r, seg.dissipator @ r)

    out = _frame_integral(c, integrand, order)
    return 0.0 if out is None else float(np.real(out))


def accumulated_coherent_error(
    c: NoisyCircuit, order: int = DEFAULT_QUADRATURE_ORDER
) -> np.ndarray:
    """Hilbert-space integral of ``U^dag(t) dH(t) U(t)`` over the circuit.

    Applied to a composite cycle this is the accumulated coherent error Theta.
    Errors carried by instant gates are not part of it.
    """
    out = _frame_integral(c, lambda seg, u: u.conj().T @ seg.coherent_error @ u, order)
    if out is None:
        return np.zeros((c.dim, c.dim), dtype=complex)
    return out


def coherent_magnus_term(c: NoisyCircuit, order: int = DEFAULT_QUADRATURE_ORDER) -> np.ndarray:
    """Liouville image Theta_L of :func:`accumulated_coherent_error`."""
    theta = accumulated_coherent_error(c, order)
    return liouville_hamiltonian(0.5 * (theta + theta.conj().T), check=False)


def cycle_generator(c: NoisyCircuit, order: int = DEFAULT_QUADRATURE_ORDER) -> np.ndarray:
    """First Magnus term ``2 Omega_1 - i Theta_L`` of the composite cycle of ``c``."""
    cyc = cycle_circuit(c)
    return first_magnus_term(cyc, order) - 1j * coherent_magnus_term(cyc, order)
