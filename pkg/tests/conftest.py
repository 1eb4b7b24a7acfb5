import numpy as np
import pytest

from incoherent_infidelity.circuits import ErrorParams, ghz_circuit
from incoherent_infidelity.estimator import cycle_superoperator, exact_incoherent_infidelity
from incoherent_infidelity.liouville import embed, ground_state_vector, lindblad_dissipator, SIGMA_MINUS, Z
from incoherent_infidelity.propagation import ContinuousSegment, InstantGate, NoisyCircuit

STRONG_NOISE = dict(eta_T=0.0312, xi_T=0.0035)
WEAK_NOISE = dict(eta_T=0.02, xi_T=0.000351)


def random_hermitian(rng, dim, scale=1.0):
    A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (A + A.conj().T) / 2


def random_unitary(rng, dim):
    Q, R = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    return Q * (np.diag(R) / abs(np.diag(R)))


def random_pure_state(rng, dim):
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return psi / np.linalg.norm(psi)


def local_noise(n, xi):
    """Equal-weight dephasing plus amplitude damping on every qubit."""
    jumps = [embed(Z, [q], n) for q in range(n)] + [embed(SIGMA_MINUS, [q], n) for q in range(n)]
    return xi * 0.5 * lindblad_dissipator(jumps)


def random_circuit(rng, n, xi=0.0, coherent=0.0, segments=3, gates=True):
    """Random piecewise-constant circuit with optional instant gates between segments."""
    dim = 2**n
    L = local_noise(n, xi)
    els = []
    for _ in range(segments):
        if gates:
            els.append(InstantGate.ideal(random_unitary(rng, dim)))
        els.append(ContinuousSegment(random_hermitian(rng, dim), random_hermitian(rng, dim, coherent),
                                     L, float(rng.uniform(0.2, 1.0))))
    return NoisyCircuit(tuple(els), n)


@pytest.fixture(scope="session")
def ghz_strong_noise():
    """Strong-noise GHZ circuit with its cycle superoperator and oracle value."""
    c = ghz_circuit(ErrorParams.from_products(**STRONG_NOISE))
    rho0 = ground_state_vector(5)
    return {"circuit": c, "rho0": rho0, "cycle": cycle_superoperator(c),
            "oracle": exact_incoherent_infidelity(c, rho0)}
