"""Liouville-space conventions and superoperator constructors.

Density matrices are vectorized ROW-major: entry ``i * N + j`` of
``vectorize(rho)`` is ``rho[i, j]``.  With this convention

    vec(A @ rho @ B) == kron(A, B.T) @ vec(rho)

so the commutator generator is ``kron(H, I) - kron(I, H.T)`` and a unitary
channel is ``kron(U, U.conj())``.

Qubit 0 is the leftmost tensor factor, i.e. the most significant bit of a
computational-basis index.
"""

from __future__ import annotations

import math
import warnings
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DimensionError, ValidationError

DEFAULT_ATOL = 1e-10
MAX_QUBITS = 6

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
# annihilation operator: |1> -> |0>
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.conj().T
PAULIS = (I2, X, Y, Z)


def _square(op: np.ndarray, name: str = "operator") -> np.ndarray:
    op = np.asarray(op, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {op.shape}")
    return op


def num_qubits(dim: int) -> int:
    """Number of qubits for Hilbert dimension ``dim``; raises unless dim = 2**n, n >= 1."""
    n = int(round(math.log2(dim))) if dim > 0 else 0
    if n < 1 or 2**n != dim:
        raise DimensionError(f"Hilbert dimension {dim} is not a power of two >= 2")
    if n > MAX_QUBITS:
        raise DimensionError(f"{n} qubits exceeds the dense-storage limit of {MAX_QUBITS}")
    return n


def is_hermitian(op: np.ndarray, atol: float = DEFAULT_ATOL) -> bool:
    op = np.asarray(op)
    return bool(np.allclose(op, op.conj().T, rtol=0.0, atol=atol))


def is_unitary(op: np.ndarray, atol: float = DEFAULT_ATOL) -> bool:
    op = np.asarray(op)
    return bool(np.allclose(op @ op.conj().T, np.eye(op.shape[0]), rtol=0.0, atol=atol))


def vectorize(rho: np.ndarray) -> np.ndarray:
    """Row-major flattening of an N x N matrix into a length N**2 density vector."""
    rho = _square(rho, "rho")
    return rho.reshape(-1).copy()


def devectorize(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex).reshape(-1)
    dim = math.isqrt(vec.size)
    if dim * dim != vec.size:
        raise DimensionError(f"vector length {vec.size} is not a perfect square")
    return vec.reshape(dim, dim).copy()


def identity_superoperator(dim: int) -> np.ndarray:
    """I_L for Hilbert dimension ``dim``."""
    return np.eye(dim * dim, dtype=complex)


def liouville_hamiltonian(
    H: np.ndarray, check: bool | str = True, atol: float = DEFAULT_ATOL
) -> np.ndarray:
    """Return ``H (x) I - I (x) H^T``, the generator of ``[H, rho]``.

    Args:
        H: Hilbert-space Hamiltonian.
        check: ``True`` raises on a non-Hermitian ``H``, ``"warn"`` only warns,
            ``False`` skips the check.
        atol: absolute tolerance of the hermiticity check.
    """
    H = _square(H, "H")
    if check and not is_hermitian(H, atol):
        msg = "Hamiltonian is not Hermitian"
        if check == "warn":
            warnings.warn(msg, stacklevel=2)
        else:
            raise ValidationError(msg)
    eye = np.eye(H.shape[0], dtype=complex)
    return np.kron(H, eye) - np.kron(eye, H.T)


def unitary_superoperator(U: np.ndarray, atol: float = DEFAULT_ATOL) -> np.ndarray:
    """Return ``U (x) conj(U)``, which maps vec(rho) to vec(U rho U^dagger)."""
    U = _square(U, "U")
    if not is_unitary(U, atol):
        raise ValidationError("operator is not unitary")
    return np.kron(U, U.conj())


def inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Hilbert-Schmidt product <<a|b>> = Tr[A^dagger B] (conjugate-linear in ``a``)."""
    a = np.asarray(a).reshape(-1)
    b = np.asarray(b).reshape(-1)
    if a.size != b.size:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    return complex(np.vdot(a, b))


def purity(vec: np.ndarray) -> float:
    return float(np.real(inner(vec, vec)))


def fidelity(pure_ideal: np.ndarray, state: np.ndarray, atol: float = DEFAULT_ATOL) -> float:
    """Fidelity <<ideal|state>> between a pure reference state and an arbitrary state."""
    if abs(purity(pure_ideal) - 1.0) > atol:
        raise ValidationError("reference state is not pure")
    return float(np.real(inner(pure_ideal, state)))


def lindblad_dissipator(jumps: Sequence[np.ndarray] | Iterable[np.ndarray], dim: int | None = None) -> np.ndarray:
    """Liouville matrix of D[rho] = sum_J (J rho J^dag - {J^dag J, rho}/2).

    ``dim`` sizes the zero matrix returned for an empty jump list; without it
    an empty list gives a 0 x 0 array.
    """
    jumps = [_square(J, "jump operator") for J in jumps]
    if not jumps:
        d = dim or 0
        return np.zeros((d * d, d * d), dtype=complex)
    dim = jumps[0].shape[0] if dim is None else dim
    if any(J.shape[0] != dim for J in jumps):
        raise DimensionError("jump operators have different dimensions")
    eye = np.eye(dim, dtype=complex)
    out = np.zeros((dim * dim, dim * dim), dtype=complex)
    for J in jumps:
        JdJ = J.conj().T @ J
        out += np.kron(J, J.conj()) - 0.5 * np.kron(JdJ, eye) - 0.5 * np.kron(eye, JdJ.T)
    return out


def embed(op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Tensor-embed ``op`` on qubits ``targets`` of an ``n``-qubit register.

    The first tensor factor of ``op`` acts on ``targets[0]``, and so on.
    """
    op = _square(op, "op")
    targets = [int(t) for t in targets]
    k = len(targets)
    if op.shape[0] != 2**k:
        raise DimensionError(f"operator of dimension {op.shape[0]} cannot act on {k} qubits")
    if len(set(targets)) != k:
        raise ValueError(f"duplicate target qubits {targets}")
    if any(t < 0 or t >= n for t in targets):
        raise IndexError(f"target qubits {targets} out of range for {n} qubits")
    rest = [q for q in range(n) if q not in targets]
    full = np.kron(op, np.eye(2 ** (n - k), dtype=complex))
    order = targets + rest  # tensor axis p of `full` belongs to qubit order[p]
    pos = {q: p for p, q in enumerate(order)}
    axes = [pos[q] for q in range(n)] + [n + pos[q] for q in range(n)]
    return full.reshape((2,) * (2 * n)).transpose(axes).reshape(2**n, 2**n)


def apply_unitary_left(U: np.ndarray, M: np.ndarray) -> np.ndarray:
    """``kron(U, conj(U)) @ M`` without forming the N**2 x N**2 Kronecker product."""
    N = U.shape[0]
    mt = M.reshape(N, N, -1)
    out = np.tensordot(U, mt, axes=(1, 0))  # (i, l, m)
    out = np.tensordot(U.conj(), out, axes=(1, 1))  # (k, i, m)
    return out.transpose(1, 0, 2).reshape(M.shape)


def conjugate_by_unitary(M: np.ndarray, U: np.ndarray) -> np.ndarray:
    """``S^dagger @ M @ S`` with ``S = kron(U, conj(U))``, via tensor contractions."""
    N = U.shape[0]
    t = M.reshape(N, N, N, N)  # t[i, j, p, q]
    t = np.tensordot(t, U, axes=(2, 0))  # [i, j, q, m]
    t = np.tensordot(t, U.conj(), axes=(2, 0))  # [i, j, m, n]
    t = np.tensordot(U.conj(), t, axes=(0, 0))  # [k, j, m, n]
    t = np.tensordot(U, t, axes=(0, 1))  # [l, k, m, n]
    return t.transpose(1, 0, 2, 3).reshape(N * N, N * N)


def ket(bits: str | Sequence[int]) -> np.ndarray:
    """Computational-basis ket for a bit string, qubit 0 first."""
    bits = [int(b) for b in bits]
    idx = 0
    for b in bits:
        idx = 2 * idx + b
    out = np.zeros(2 ** len(bits), dtype=complex)
    out[idx] = 1.0
    return out


def pure_state_vector(psi: np.ndarray) -> np.ndarray:
    """Density vector of the pure state ``|psi><psi|``."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return vectorize(np.outer(psi, psi.conj()))


def ground_state_vector(n: int) -> np.ndarray:
    return pure_state_vector(ket([0] * n))
