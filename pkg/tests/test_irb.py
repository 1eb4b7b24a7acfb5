import math

import numpy as np
import pytest

from incoherent_infidelity.circuits import CNOT, ErrorParams, cnot_circuit, default_table, phase_distance
from incoherent_infidelity.exceptions import FitError, ValidationError
from incoherent_infidelity.irb import (
    DecayFit,
    GateChannel,
    RbConfig,
    average_error_rate,
    decay_curve,
    default_lengths,
    depolarizing_superoperator,
    fit_decay,
    interleaved_estimate,
    rb_sequence,
    rb_sequence_elements,
    run_interleaved,
)
from incoherent_infidelity.liouville import ground_state_vector, unitary_superoperator
from incoherent_infidelity.propagation import ideal_unitary, realize
from incoherent_infidelity.spam import SpamModel

SHORT = RbConfig(lengths=tuple(3 + 15 * k for k in range(11)), samples_per_length=20)


def synthetic(A, B, alpha, lengths=default_lengths()):
    return [(l, A * alpha**l + B) for l in lengths]


def depolarized_clifford(p):
    D = depolarizing_superoperator(p, 2)
    return lambda e: D @ unitary_superoperator(e.net_ideal)


def test_default_lengths_and_config():
    assert default_lengths()[:3] == [3, 18, 33] and len(default_lengths()) == 21
    cfg = RbConfig()
    assert cfg.samples_per_length == 60 and cfg.shots == "exact"
    with pytest.raises(ValidationError):
        RbConfig(lengths=(3, 3))
    with pytest.raises(ValidationError):
        RbConfig(lengths=(0, 5))
    with pytest.raises(ValueError):
        RbConfig(shots=-5)


def test_depolarizing_superoperator():
    D = depolarizing_superoperator(0.2, 2)
    rho = ground_state_vector(2)
    out = (D @ rho).reshape(4, 4)
    np.testing.assert_allclose(out, 0.8 * np.diag([1, 0, 0, 0]) + 0.2 * np.eye(4) / 4, atol=1e-15)


def test_sequence_structure():
    rng = np.random.default_rng(0)
    assert len(rb_sequence_elements(1, rng)) == 2
    with pytest.raises(ValueError):
        rb_sequence_elements(0, rng)
    for l in (1, 4):
        c = rb_sequence(l, None, rng)
        assert phase_distance(ideal_unitary(c), np.eye(4)) < 1e-10


def test_interleaved_net_includes_target():
    table = default_table()
    idx = rb_sequence_elements(3, np.random.default_rng(1), CNOT)
    net = np.eye(4)
    for j, i in enumerate(idx):
        net = table[i].net_ideal @ net
        if j < 3:
            net = CNOT @ net
    assert phase_distance(net, np.eye(4)) < 1e-10
    c = rb_sequence(3, cnot_circuit(0, 1, 2), np.random.default_rng(1))
    assert phase_distance(ideal_unitary(c), np.eye(4)) < 1e-10


def test_error_free_curve_is_flat():
    cfg = RbConfig(lengths=(1, 5, 10), samples_per_length=5)
    curve = decay_curve(cfg, cnot_circuit(0, 1, 2), ErrorParams(), np.random.default_rng(2))
    np.testing.assert_allclose([F for _, F in curve], 1.0, atol=1e-10)


def test_depolarizing_curve_brute_force():
    p = 0.03
    cfg = RbConfig(lengths=(1, 2, 3, 4, 5), samples_per_length=3)
    curve = decay_curve(cfg, None, ErrorParams(), np.random.default_rng(3),
                        clifford_superop=depolarized_clifford(p))
    D = depolarizing_superoperator(p, 2)
    rng = np.random.default_rng(4)
    for l, F in curve:
        # every Clifford, including the inverting one, carries the channel
        assert F == pytest.approx(0.75 * (1 - p) ** (l + 1) + 0.25, abs=1e-12)
        c = rb_sequence(l, None, rng)
        K = np.linalg.matrix_power(D, l + 1) @ realize(c, "ideal")
        rho = ground_state_vector(2)
        assert np.real(rho.conj() @ K @ rho) == pytest.approx(F, abs=1e-12)


def test_fit_round_trip():
    fit = fit_decay(synthetic(0.72, 0.25, 0.97))
    assert abs(fit.A - 0.72) < 1e-9 and abs(fit.B - 0.25) < 1e-9 and abs(fit.alpha - 0.97) < 1e-9
    assert fit.rms < 1e-12 and fit.alpha_err >= 0
    np.testing.assert_allclose(fit.predict([3, 18]), [0.72 * 0.97**3 + 0.25, 0.72 * 0.97**18 + 0.25])


def test_degenerate_fit():
    fit = fit_decay([(l, 1.0) for l in default_lengths()])
    assert fit.degenerate and fit.alpha == 1.0 and math.isinf(fit.alpha_err)


def test_fit_input_checks():
    with pytest.raises(ValueError):
        fit_decay([(1, 0.9), (2, 0.8), (3, 0.7)])
    with pytest.raises(ValueError):
        fit_decay([(1, 0.9), (2, 0.8), (3, 1.2), (4, 0.6)])


def test_fit_non_convergence_raises():
    with pytest.raises(FitError) as info:
        fit_decay(synthetic(0.72, 0.25, 0.97), max_nfev=1)
    assert "nfev" in info.value.diagnostics


def test_noisy_fit_coverage():
    rng = np.random.default_rng(5)
    truth = synthetic(0.72, 0.25, 0.97)
    shots = 60 * 1000
    hits = 0
    trials = 40
    for _ in range(trials):
        pts = [(l, rng.binomial(shots, F) / shots) for l, F in truth]
        fit = fit_decay(pts)
        hits += abs(fit.alpha - 0.97) < 3 * fit.alpha_err
    assert hits >= 0.9 * trials


def test_interleaved_arithmetic():
    def fit(alpha, err=0.0):
        return DecayFit(0.75, 0.25, alpha, err)

    assert interleaved_estimate(fit(0.98), fit(0.98)).r == 0.0
    r, r_err = interleaved_estimate(fit(1.0), fit(1.0 - 0.01))
    assert r == pytest.approx(0.0075, abs=1e-15) and r_err == 0.0
    est = interleaved_estimate(fit(0.98, 1e-3), fit(0.96, 2e-3))
    expected = 0.75 * math.sqrt(0.96**2 * 1e-6 + 0.98**2 * 4e-6) / 0.98**2
    assert est.r_err == pytest.approx(expected, rel=1e-12)
    assert est.r_ave_reference == pytest.approx(average_error_rate(0.98, 2))
    with pytest.raises(ValueError):
        interleaved_estimate(fit(0.0), fit(0.5))


def test_depolarizing_oracle():
    pC, pT = 0.01, 0.02
    target = GateChannel(CNOT, depolarizing_superoperator(pT, 2) @ unitary_superoperator(CNOT))
    rng = np.random.default_rng(6)
    ref = decay_curve(SHORT, None, ErrorParams(), rng, clifford_superop=depolarized_clifford(pC))
    inter = decay_curve(SHORT, target, ErrorParams(), rng, clifford_superop=depolarized_clifford(pC))
    r, _ = interleaved_estimate(fit_decay(ref), fit_decay(inter))
    assert r == pytest.approx(0.75 * pT, rel=0.1)


def test_noisy_cnot_decay_fits_well():
    p = ErrorParams.from_products(0.04, 0.001, 0.05, (1.0, 0.1))
    res = run_interleaved(cnot_circuit(0, 1, 2, p, noise_support=(0, 1)), p, SHORT,
                          np.random.default_rng(7), SpamModel.reference())
    for curve, fit in ((res.reference_curve, res.reference_fit), (res.interleaved_curve, res.interleaved_fit)):
        F = [v for _, v in curve]
        assert F[0] > F[-1]
        assert fit.rms < 0.02 and 0 < fit.alpha < 1
    assert res.estimate.r > 0
