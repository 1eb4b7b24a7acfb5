"""Gate and experiment library: cross-resonance CNOT, GHZ preparation, two-qubit Cliffords."""

from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import CliffordLookupError, ValidationError
from .liouville import (
    I2,
    SIGMA_MINUS,
    X,
    Y,
    Z,
    apply_unitary_left,
    embed,
    identity_superoperator,
    lindblad_dissipator,
)
from .propagation import (
    ContinuousSegment,
    InstantGate,
    NoisyCircuit,
    compose,
    pulse_inverse,
    realize,
)

CR_DURATION = math.pi / 4
GHZ_QUBITS = 5
MAX_SEQUENCE_LENGTH = 40

_PAULI_1Q = {"I": I2, "X": X, "Y": Y, "Z": Z}


def rotation(W: str, angle: float) -> np.ndarray:
    """``R_W(angle) = exp(-i angle W / 2)`` for ``W`` in X, Y, Z."""
    P = _PAULI_1Q[W.upper()]
    return math.cos(angle / 2) * I2 - 1j * math.sin(angle / 2) * P


def z_phase(theta: float) -> np.ndarray:
    """``exp(-i theta Z)``."""
    return np.diag([np.exp(-1j * theta), np.exp(1j * theta)])


HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


@dataclass(frozen=True)
class ErrorParams:
    """Error strengths; ``eta`` and ``xi`` are rates (per unit time).

    ``noise_weights`` are the (dephasing, amplitude damping) weights of the
    dissipator ``xi * (w_D * D + w_A * A)``.
    """

    eta: float = 0.0
    xi: float = 0.0
    theta: float = 0.0
    noise_weights: tuple = (0.5, 0.5)

    def __post_init__(self):
        object.__setattr__(self, "noise_weights", tuple(float(w) for w in self.noise_weights))
        if len(self.noise_weights) != 2:
            raise ValidationError("noise_weights must be a (dephasing, damping) pair")
        for name in ("eta", "xi", "theta"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValidationError(f"{name} must be finite and >= 0, got {v}")
            object.__setattr__(self, name, float(v))
        if min(self.noise_weights) < 0:
            raise ValidationError("noise weights must be >= 0")

    @classmethod
    def from_products(cls, eta_T=0.0, xi_T=0.0, theta=0.0, noise_weights=(0.5, 0.5)):
        """Build from the dimensionless products eta*T and xi*T of a CNOT pulse."""
        return cls(eta_T / CR_DURATION, xi_T / CR_DURATION, theta, noise_weights)

    def scaled(self, s: float) -> "ErrorParams":
        return ErrorParams(self.eta * s, self.xi * s, self.theta * s, self.noise_weights)


ZERO_ERRORS = ErrorParams()


# -- noise superoperators ---------------------------------------------------

@lru_cache(maxsize=16)
def _noise_basis(n: int, support: tuple):
    dim = 2**n
    deph = lindblad_dissipator([embed(Z, [q], n) for q in support], dim=dim)
    damp = lindblad_dissipator([embed(SIGMA_MINUS, [q], n) for q in support], dim=dim)
    for m in (deph, damp):
        m.flags.writeable = False
    return deph, damp


def dephasing_superoperator(n: int, support: Sequence[int] | None = None) -> np.ndarray:
    """Sum over ``support`` of ``Z_i (x) Z_i - I_L``."""
    support = tuple(range(n)) if support is None else tuple(support)
    return _noise_basis(n, support)[0]


def damping_superoperator(n: int, support: Sequence[int] | None = None) -> np.ndarray:
    """Sum over ``support`` of the amplitude-damping Lindblad terms."""
    support = tuple(range(n)) if support is None else tuple(support)
    return _noise_basis(n, support)[1]


def noise_superoperator(n: int, p: ErrorParams, support: Sequence[int] | None = None) -> np.ndarray:
    support = tuple(range(n)) if support is None else tuple(support)
    deph, damp = _noise_basis(n, support)
    w_d, w_a = p.noise_weights
    return p.xi * (w_d * deph + w_a * damp)


# -- elementary gates --------------------------------------------------------

def erroneous_rotation(W: str, sign: int, theta: float) -> InstantGate:
    """Single-qubit ``R_W(sign * pi/2)`` with a Z-error of angle ``theta``.

    The realized ``R_W(+pi/2)`` is ``exp(-i theta Z) R_W(pi/2)`` and the realized
    ``R_W(-pi/2)`` is ``R_W(-pi/2) exp(i theta Z)``.  The realized inverse of a
    gate is the realized gate of opposite sign, so the errors do not cancel.
    """
    W = W.upper()
    if W not in ("X", "Y"):
        raise ValueError(f"rotation axis must be X or Y, got {W!r}")
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")

    def real(s):
        if s > 0:
            return z_phase(theta) @ rotation(W, math.pi / 2)
        return rotation(W, -math.pi / 2) @ z_phase(-theta)

    label = f"r{W.lower()}{'+' if sign > 0 else '-'}"
    return InstantGate(rotation(W, sign * math.pi / 2), real(sign), real(-sign), label)


def _embedded_gate(g: InstantGate, targets, n: int) -> InstantGate:
    return InstantGate(
        embed(g.forward_ideal, targets, n),
        embed(g.forward_real, targets, n),
        embed(g.inverse_real, targets, n),
        g.label,
    )


@lru_cache(maxsize=64)
def cnot_circuit(
    control: int,
    target: int,
    n: int,
    p: ErrorParams = ZERO_ERRORS,
    noise_support: tuple | None = None,
) -> NoisyCircuit:
    """Cross-resonance CNOT: ``R_Z(-pi/2)`` on control, CR pulse, ``R_X(-pi/2)`` on target.

    The CR segment drives ``Z_c X_t`` for ``T = pi/4`` with ZZ crosstalk
    ``eta Z_c Z_t`` and dissipator ``xi (w_D D + w_A A)`` on ``noise_support``
    (default: every qubit).  The target ``R_X(-pi/2)`` carries the theta error,
    the ``R_Z`` is error-free.  The ideal unitary is CNOT up to a global phase.
    """
    if control == target:
        raise ValueError("control and target must differ")
    for q in (control, target):
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} out of range for {n} qubits")
    support = tuple(range(n)) if noise_support is None else tuple(noise_support)
    rz = InstantGate.ideal(embed(rotation("Z", -math.pi / 2), [control], n), "rz-")
    zx = np.kron(Z, X)
    zz = np.kron(Z, Z)
    seg = ContinuousSegment(
        hamiltonian=embed(zx, [control, target], n),
        coherent_error=p.eta * embed(zz, [control, target], n),
        dissipator=noise_superoperator(n, p, support),
        duration=CR_DURATION,
        label=f"cr{control}{target}",
    )
    rx = _embedded_gate(erroneous_rotation("X", -1, p.theta), [target], n)
    return NoisyCircuit((rz, seg, rx), n)


def hadamard_gate(q: int, n: int) -> InstantGate:
    return InstantGate.ideal(embed(HADAMARD, [q], n), f"h{q}")


def ghz_circuit(p: ErrorParams = ZERO_ERRORS) -> NoisyCircuit:
    """Five-qubit GHZ preparation: error-free Hadamard on qubit 0, then a CNOT chain."""
    n = GHZ_QUBITS
    h = NoisyCircuit((hadamard_gate(0, n),), n)
    return compose([h] + [cnot_circuit(q, q + 1, n, p) for q in range(n - 1)])


def ghz_state(n: int = GHZ_QUBITS) -> np.ndarray:
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = psi[-1] = 1 / math.sqrt(2)
    return psi


def phase_distance(A: np.ndarray, B: np.ndarray) -> float:
    """``min_phi ||A - exp(i phi) B||_F``."""
    A = np.asarray(A)
    B = np.asarray(B)
    overlap = np.vdot(B, A)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.linalg.norm(A - phase * B))


# -- gate specifications -----------------------------------------------------

GATE_KINDS = ("rx", "ry", "rz", "hadamard", "cross_resonance_cnot")


@dataclass(frozen=True)
class GateSpec:
    """One compiled gate.  ``inverted`` marks a CNOT realized by its pulse inverse."""

    kind: str
    targets: tuple
    angle: float = 0.0
    inverted: bool = False

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.kind == "cross_resonance_cnot":
            if len(self.targets) != 2 or self.targets[0] == self.targets[1]:
                raise ValueError("cross_resonance_cnot needs distinct (control, target)")
        elif len(self.targets) != 1:
            raise ValueError(f"{self.kind} acts on exactly one qubit")

    @property
    def token(self) -> str:
        if self.kind == "cross_resonance_cnot":
            return f"cx{self.targets[0]}{self.targets[1]}" + ("~" if self.inverted else "")
        if self.kind in ("rx", "ry") and abs(abs(self.angle) - math.pi / 2) < 1e-12:
            return f"{self.kind[1]}{'+' if self.angle > 0 else '-'}{self.targets[0]}"
        return f"{self.kind}({self.angle:.17g}){self.targets[0]}"

    @classmethod
    def from_token(cls, token: str) -> "GateSpec":
        if token.startswith("cx"):
            inverted = token.endswith("~")
            digits = token[2:4]
            return cls("cross_resonance_cnot", (int(digits[0]), int(digits[1])), 0.0, inverted)
        if len(token) == 3 and token[0] in "xy" and token[1] in "+-":
            angle = math.pi / 2 if token[1] == "+" else -math.pi / 2
            return cls("r" + token[0], (int(token[2]),), angle)
        raise ValueError(f"unrecognized gate token {token!r}")

    def ideal_unitary(self, n: int = 2) -> np.ndarray:
        if self.kind == "cross_resonance_cnot":
            return embed(CNOT, list(self.targets), n)
        if self.kind == "hadamard":
            return embed(HADAMARD, list(self.targets), n)
        return embed(rotation(self.kind[1], self.angle), list(self.targets), n)

    def inverse(self) -> "GateSpec":
        if self.kind == "cross_resonance_cnot":
            return GateSpec(self.kind, self.targets, 0.0, not self.inverted)
        if self.kind == "hadamard":
            return self
        return GateSpec(self.kind, self.targets, -self.angle)

    def circuit(self, n: int, p: ErrorParams) -> NoisyCircuit:
        """Noisy realization on an ``n``-qubit register."""
        if self.kind == "cross_resonance_cnot":
            c = cnot_circuit(self.targets[0], self.targets[1], n, p)
            return pulse_inverse(c) if self.inverted else c
        if self.kind == "hadamard":
            return NoisyCircuit((hadamard_gate(self.targets[0], n),), n)
        if self.kind == "rz":
            U = embed(rotation("Z", self.angle), list(self.targets), n)
            return NoisyCircuit((InstantGate.ideal(U, self.token),), n)
        if abs(abs(self.angle) - math.pi / 2) > 1e-12:
            raise ValueError("only R_X/R_Y(+-pi/2) carry the theta error model")
        g = erroneous_rotation(self.kind[1], 1 if self.angle > 0 else -1, p.theta)
        return NoisyCircuit((_embedded_gate(g, list(self.targets), n),), n)


@lru_cache(maxsize=4096)
def gate_superoperator(spec: GateSpec, p: ErrorParams, n: int = 2) -> np.ndarray:
    """Cached full realization of a single gate (read-only)."""
    m = realize(spec.circuit(n, p), "full")
    m.flags.writeable = False
    return m


# -- Clifford group ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CliffordElement:
    """A two-qubit Clifford compiled to R_X/R_Y(+-pi/2) and CNOT gates (time order)."""

    sequence: tuple
    net_ideal: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        seq = tuple(self.sequence)
        object.__setattr__(self, "sequence", seq)
        if len(seq) > MAX_SEQUENCE_LENGTH:
            raise ValidationError(f"sequence of {len(seq)} gates exceeds {MAX_SEQUENCE_LENGTH}")
        U = np.eye(4, dtype=complex)
        for g in seq:
            U = g.ideal_unitary(2) @ U
        if self.net_ideal is not None and phase_distance(U, self.net_ideal) > 1e-10:
            raise ValidationError("net_ideal does not match the compiled sequence")
        U.flags.writeable = False
        object.__setattr__(self, "net_ideal", U)

    @property
    def tokens(self) -> tuple:
        return tuple(g.token for g in self.sequence)

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> "CliffordElement":
        return cls(tuple(GateSpec.from_token(t) for t in tokens))

    def circuit(self, p: ErrorParams = ZERO_ERRORS) -> NoisyCircuit:
        return compose((g.circuit(2, p) for g in self.sequence), n_qubits=2)

    def superoperator(self, p: ErrorParams = ZERO_ERRORS) -> np.ndarray:
        """Full noisy realization, assembled from cached gate superoperators."""
        M = identity_superoperator(4)
        for g in self.sequence:
            M = gate_superoperator(g, p) @ M
        return M


def inverse_sequence(c: CliffordElement) -> CliffordElement:
    """Reversed sequence of realized inverse gates (CNOTs by pulse inverse)."""
    return CliffordElement(tuple(g.inverse() for g in reversed(c.sequence)))


_PAULI_LABELS = [a + b for a in "IXYZ" for b in "IXYZ"]
_PAULI_2Q = np.array([np.kron(_PAULI_1Q[a], _PAULI_1Q[b]) for a, b in _PAULI_LABELS])


def pauli_fingerprint(U: np.ndarray, atol: float = 1e-8) -> tuple:
    """Conjugation action on the 15 nontrivial Paulis as (image index, sign) pairs.

    Global phases drop out.  Raises :class:`CliffordLookupError` if ``U`` is
    not a two-qubit Clifford.
    """
    return tuple(_fingerprints(np.asarray(U, dtype=complex)[None], atol)[0])


def _fingerprints(Us: np.ndarray, atol: float = 1e-8) -> np.ndarray:
    P = _PAULI_2Q[1:]
    images = np.einsum("mab,pbc,mdc->mpad", Us, P, Us.conj())
    coeffs = np.einsum("qba,mpab->mpq", _PAULI_2Q, images).real / 4.0
    idx = np.argmax(np.abs(coeffs), axis=2)
    best = np.take_along_axis(coeffs, idx[..., None], axis=2)[..., 0]
    if np.any(np.abs(np.abs(best) - 1.0) > atol):
        raise CliffordLookupError("operator is not a two-qubit Clifford (up to phase)")
    return idx * 2 + (best < 0)


def single_qubit_cliffords() -> list:
    """The 24 single-qubit Cliffords as shortest words in x+-, y+- (breadth-first)."""
    gens = [("x+", rotation("X", math.pi / 2)), ("x-", rotation("X", -math.pi / 2)),
            ("y+", rotation("Y", math.pi / 2)), ("y-", rotation("Y", -math.pi / 2))]

    def key(U):
        return tuple(_fingerprints(np.kron(U, I2)[None])[0][[3, 7, 11]])

    found = {key(I2): ((), I2)}
    queue = deque([((), I2)])
    while queue:
        word, U = queue.popleft()
        for tok, g in gens:
            V = g @ U
            k = key(V)
            if k not in found:
                found[k] = (word + (tok,), V)
                queue.append((word + (tok,), V))
    words = [w for w, _ in found.values()]
    assert len(words) == 24
    return words


# S1: the cyclic subgroup permuting X -> Y -> Z (up to signs).
_S1 = [(), ("y+", "x+"), ("x-", "y-")]


def _class_words():
    c1 = single_qubit_cliffords()

    def local(w0, w1):
        return [t + "0" for t in w0] + [t + "1" for t in w1]

    words = []
    for a, b in itertools.product(c1, c1):
        words.append(local(a, b))
    for a, b in itertools.product(c1, c1):
        for s, t in itertools.product(_S1, _S1):
            words.append(local(a, b) + ["cx01"] + local(s, t))
    for a, b in itertools.product(c1, c1):
        for s, t in itertools.product(_S1, _S1):
            words.append(local(a, b) + ["cx01", "cx10"] + local(s, t))
    for a, b in itertools.product(c1, c1):
        words.append(local(a, b) + ["cx01", "cx10", "cx01"])
    return words


CLASS_SIZES = {"single": 576, "cnot": 5184, "iswap": 5184, "swap": 576}
TABLE_FORMAT = "incoherent-infidelity/two-qubit-clifford-table"
TABLE_VERSION = 1


class CliffordTable:
    """All 11,520 two-qubit Cliffords, keyed by their Pauli fingerprint.

    Elements are ordered by class (single-qubit, CNOT-like, iSWAP-like,
    SWAP-like), so uniform sampling over indices weights classes by size.
    """

    def __init__(self, token_words: Sequence[Sequence[str]]):
        self.elements = [CliffordElement.from_tokens(w) for w in token_words]
        nets = np.array([e.net_ideal for e in self.elements])
        keys = [tuple(f) for f in _fingerprints(nets)]
        self.index = {k: i for i, k in enumerate(keys)}
        if len(self.index) != len(self.elements):
            raise ValidationError("Clifford fingerprints collide; the table is not a group")
        self._identity = self.index[tuple(_fingerprints(np.eye(4)[None])[0])]

    def __len__(self):
        return len(self.elements)

    def __getitem__(self, i) -> CliffordElement:
        return self.elements[i]

    @property
    def identity(self) -> CliffordElement:
        return self.elements[self._identity]

    def lookup(self, U: np.ndarray) -> int:
        key = pauli_fingerprint(U)
        try:
            return self.index[key]
        except KeyError:
            raise CliffordLookupError("unitary not found in the Clifford table") from None

    @classmethod
    def build(cls) -> "CliffordTable":
        return cls(_class_words())

    def to_json(self) -> str:
        doc = {"format": TABLE_FORMAT, "version": TABLE_VERSION,
               "elements": [list(e.tokens) for e in self.elements]}
        return json.dumps(doc, separators=(",", ":"))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "CliffordTable":
        doc = json.loads(Path(path).read_text())
        if doc.get("format") != TABLE_FORMAT or doc.get("version") != TABLE_VERSION:
            raise ValidationError(f"{path}: not a version {TABLE_VERSION} Clifford table")
        table = cls(doc["elements"])
        if len(table) != sum(CLASS_SIZES.values()):
            raise ValidationError(f"{path}: table has {len(table)} elements")
        return table

    @classmethod
    def load_or_build(cls, path) -> "CliffordTable":
        """Load the cache at ``path``, rebuilding and rewriting it if absent or invalid."""
        path = Path(path)
        if path.exists():
            try:
                return cls.load(path)
            except (ValueError, KeyError, json.JSONDecodeError):
                pass
        table = cls.build()
        path.parent.mkdir(parents=True, exist_ok=True)
        table.save(path)
        return table


@lru_cache(maxsize=1)
def default_table() -> CliffordTable:
    return CliffordTable.build()


def sample_two_qubit_clifford(rng: np.random.Generator, table: CliffordTable | None = None) -> CliffordElement:
    """Uniformly random two-qubit Clifford."""
    table = table or default_table()
    return table[int(rng.integers(len(table)))]


def find_inverting_clifford(net: np.ndarray, table: CliffordTable | None = None) -> CliffordElement:
    """Table element whose ideal unitary is ``net^dagger`` up to phase."""
    table = table or default_table()
    return table[table.lookup(np.asarray(net).conj().T)]
