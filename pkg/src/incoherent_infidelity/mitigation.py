"""Local readout-error mitigation with tensor-product detector matrices."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .exceptions import DimensionError, ValidationError
from .spam import PovmSpec, detector_block


@dataclass(frozen=True, eq=False)
class DetectorMatrix:
    """Per-qubit column-stochastic blocks; ``blocks[k]`` acts on qubit ``qubits[k]``."""

    blocks: tuple
    qubits: tuple = ()

    def __post_init__(self):
        blocks = tuple(np.array(b, dtype=float) for b in self.blocks)
        for b in blocks:
            if b.ndim != 2 or b.shape[0] != b.shape[1]:
                raise DimensionError("detector blocks must be square")
            if np.any(b < -1e-12) or not np.allclose(b.sum(axis=0), 1.0, rtol=0, atol=1e-12):
                raise ValidationError("detector block is not column-stochastic")
            if abs(np.linalg.det(b)) <= 1e-9:
                raise ValidationError("detector block is singular")
            b.flags.writeable = False
        qubits = tuple(self.qubits) or tuple(range(len(blocks)))
        if len(qubits) != len(blocks):
            raise DimensionError("one qubit label per block")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "qubits", qubits)

    @property
    def n_outcomes(self) -> int:
        return int(np.prod([b.shape[0] for b in self.blocks]))

    def full(self) -> np.ndarray:
        """Explicit tensor product (first block is the most significant index)."""
        return reduce(np.kron, self.blocks)

    def to_json(self) -> str:
        return json.dumps({"qubits": list(self.qubits),
                           "blocks": [b.tolist() for b in self.blocks]})

    @classmethod
    def from_json(cls, text: str) -> "DetectorMatrix":
        doc = json.loads(text)
        return cls(tuple(doc["blocks"]), tuple(doc["qubits"]))


def calibrate(source, n: int) -> DetectorMatrix:
    """Detector blocks from a POVM model or from calibration counts.

    ``source`` is a :class:`PovmSpec` (analytic blocks) or a pair
    ``(counts_zeros, counts_ones)`` of per-qubit outcome-0 frequencies and shot
    number after preparing all-zeros and all-ones:
    ``((zeros_hits, ones_hits), shots)`` with arrays of length ``n``.
    """
    if isinstance(source, PovmSpec):
        return DetectorMatrix(tuple(detector_block(source) for _ in range(n)))
    (zero_hits, one_hits), shots = source
    zero_hits = np.asarray(zero_hits, dtype=float)
    one_hits = np.asarray(one_hits, dtype=float)
    if zero_hits.shape != (n,) or one_hits.shape != (n,):
        raise DimensionError(f"need per-qubit counts for {n} qubits")
    blocks = []
    for q in range(n):
        p00 = zero_hits[q] / shots  # P(read 0 | prepared 0)
        p01 = one_hits[q] / shots  # P(read 0 | prepared 1)
        blocks.append(np.array([[p00, p01], [1 - p00, 1 - p01]]))
    return DetectorMatrix(tuple(blocks))


def simulate_calibration_counts(povm: PovmSpec, n: int, shots: int, rng: np.random.Generator):
    """Sampled outcome-0 counts per qubit for all-zeros and all-ones preparations."""
    D = detector_block(povm)
    zeros = rng.binomial(shots, D[0, 0], size=n)
    ones = rng.binomial(shots, D[0, 1], size=n)
    return (zeros, ones), shots


def _apply_per_axis(mats: Sequence[np.ndarray], q: np.ndarray) -> np.ndarray:
    dims = [m.shape[0] for m in mats]
    t = q.reshape(dims)
    for axis, m in enumerate(mats):
        t = np.moveaxis(np.tensordot(m, t, axes=(1, axis)), 0, axis)
    return t.reshape(-1)


def apply_detector(D: DetectorMatrix, p: np.ndarray) -> np.ndarray:
    """Noisy outcome distribution ``D p``."""
    p = np.asarray(p, dtype=float)
    if p.size != D.n_outcomes:
        raise DimensionError(f"distribution of length {p.size} for {D.n_outcomes} outcomes")
    return _apply_per_axis(D.blocks, p)


def mitigate(q: np.ndarray, D: DetectorMatrix) -> np.ndarray:
    """``p = D^-1 q`` applied block by block; negative entries are kept as they are."""
    q = np.asarray(q, dtype=float)
    if q.size != D.n_outcomes:
        raise DimensionError(f"distribution of length {q.size} for {D.n_outcomes} outcomes")
    if abs(q.sum() - 1.0) > 1e-9:
        raise ValidationError("input probabilities must sum to 1")
    return _apply_per_axis([np.linalg.inv(b) for b in D.blocks], q)
