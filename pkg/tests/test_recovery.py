import json
import math

import numpy as np
import pytest

from markov_recovery.entropies import cmi, conditional_entropy, fidelity
from markov_recovery.errors import BudgetZero, DimMismatch, NonUnitaryParams, NotCP
from markov_recovery.linalg import kron, partial_trace
from markov_recovery.recovery import (
    QuantumChannel,
    RotatedPetzParams,
    apply_channel,
    channel_from_choi,
    choi,
    classical_reconstruction_channel,
    depolarizing_channel,
    identity_channel,
    optimize_recovery,
    petz_map,
    random_channel,
    random_subchannel,
    recovered_state,
    recovery_fidelity,
    rotated_petz_map,
)
from markov_recovery.states import (
    MultipartiteState,
    build_qcq,
    canonical_state,
    haar_unitary,
    random_density,
    random_qcq_spec,
)


def total_gram(ch):
    return sum(k.conj().T @ k for k in ch.kraus)


def test_channel_validation():
    with pytest.raises(NotCP):
        QuantumChannel([2 * np.eye(2)], 2, 2)
    with pytest.raises(DimMismatch):
        QuantumChannel([np.eye(3)], 2, 2)
    with pytest.raises(DimMismatch):
        QuantumChannel([], 2, 2)
    assert not random_subchannel(3, seed=0).trace_preserving
    assert random_channel(2, 3, seed=1).trace_preserving


def test_apply_identity_and_depolarizing():
    s = random_density([2, 3], seed=2, labels=["A", "B"])
    assert np.allclose(apply_channel(identity_channel(3), s).matrix, s.matrix)
    out = apply_channel(depolarizing_channel(3), s)
    assert np.allclose(out.matrix, np.kron(s.marginal(["A"]).matrix, np.eye(3) / 3))


def test_apply_random_channel_valid():
    s = random_density([2, 2, 2], seed=3)
    out = apply_channel(random_channel(2, 4, 2, seed=4, out_dims=(2, 2), out_labels=("B", "X")), s)
    assert out.dims.labels == ("A", "B", "X", "C")
    assert out.trace == pytest.approx(1.0, abs=1e-9)
    assert np.linalg.eigvalsh(out.matrix).min() >= -1e-12


def test_choi_identity_and_roundtrip():
    j = choi(identity_channel(2))
    phi = np.array([1, 0, 0, 1]) / math.sqrt(2)
    assert np.allclose(j, np.outer(phi, phi))
    ch = random_channel(3, 2, 3, seed=5)
    j = choi(ch)
    assert np.allclose(partial_trace(j, [3, 2], [0]), np.eye(3) / 3, atol=1e-12)
    back = channel_from_choi(j, 3, 2)
    assert np.max(np.abs(choi(back) - j)) <= 1e-9
    x = random_density(3, seed=6).matrix
    assert np.allclose(back(x), ch(x))
    with pytest.raises(NotCP):
        channel_from_choi(np.diag([1.0, -0.5, 0.25, 0.25]), 2, 2)


def test_petz_product_case():
    rb = random_density(2, seed=7).matrix
    rc = random_density(3, seed=8).matrix
    ch = petz_map(np.kron(rb, rc), [2, 3])
    x = random_density(2, seed=9).matrix
    assert np.allclose(ch(x), np.kron(x, rc), atol=1e-10)


def test_petz_trace_preserving_with_kernel():
    # rank-deficient rho_B exercises the off-support completion
    rho_bc = np.kron(np.diag([1.0, 0.0]), random_density(2, seed=10).matrix)
    ch = petz_map(rho_bc, [2, 2])
    assert np.max(np.abs(total_gram(ch) - np.eye(2))) <= 1e-8


def test_rotated_petz_identity_equals_petz():
    rho_bc = random_density(4, seed=11).matrix
    a = choi(petz_map(rho_bc, [2, 2]))
    b = choi(rotated_petz_map(rho_bc, RotatedPetzParams.identity(2, 2), [2, 2]))
    assert np.max(np.abs(a - b)) <= 1e-9


def test_rotated_petz_trace_preserving():
    rng = np.random.default_rng(12)
    for _ in range(10):
        rho_bc = random_density(6, rank=int(rng.integers(1, 7)), seed=rng).matrix
        params = RotatedPetzParams(haar_unitary(2, rng), haar_unitary(6, rng))
        ch = rotated_petz_map(rho_bc, params, [2, 3])
        assert np.max(np.abs(total_gram(ch) - np.eye(2))) <= 1e-7


def test_rotated_petz_commuting_v_keeps_marginal():
    # a V that commutes with rho_BC leaves the recovered state of rho_B unchanged
    rho_bc = random_density(4, seed=13).matrix
    w, vec = np.linalg.eigh(rho_bc)
    v = vec @ np.diag(np.exp(1j * np.arange(4))) @ vec.conj().T
    rho_b = partial_trace(rho_bc, [2, 2], [0])
    plain = petz_map(rho_bc, [2, 2])(rho_b)
    rotated = rotated_petz_map(rho_bc, RotatedPetzParams(np.eye(2), v), [2, 2])(rho_b)
    assert np.allclose(plain, rho_bc, atol=1e-9)
    assert np.allclose(rotated, rho_bc, atol=1e-9)


def test_nonunitary_params():
    with pytest.raises(NonUnitaryParams):
        RotatedPetzParams(np.eye(2) * 2, np.eye(4))


def test_petz_fixed_point_marginal():
    rng = np.random.default_rng(14)
    for _ in range(10):
        rho_bc = random_density(4, rank=int(rng.integers(1, 5)), seed=rng).matrix
        rho_b = partial_trace(rho_bc, [2, 2], [0])
        sigma_bc = petz_map(rho_bc, [2, 2])(rho_b)
        sigma_b = partial_trace(sigma_bc, [2, 2], [0])
        assert np.linalg.eigvalsh(rho_b - sigma_b).min() >= -1e-8


def test_product_and_markov_recover_exactly():
    prod = MultipartiteState(kron(*(random_density(2, seed=s).matrix for s in (15, 16, 17))), [2, 2, 2])
    assert recovery_fidelity(prod, petz_map(prod.marginal([1, 2]))) == pytest.approx(1.0, abs=1e-8)
    spec = random_qcq_spec(3, seed=18, markov=True)
    rho = build_qcq(spec)
    assert recovery_fidelity(rho, classical_reconstruction_channel(spec)) == pytest.approx(1.0, abs=1e-8)
    assert recovery_fidelity(rho, petz_map(rho.marginal([1, 2]))) == pytest.approx(1.0, abs=1e-8)


def test_random_petz_output_valid():
    rho = random_density([2, 2, 2], seed=19)
    sigma = recovered_state(rho, petz_map(rho.marginal([1, 2])))
    assert sigma.trace == pytest.approx(1.0, abs=1e-9)
    assert np.linalg.eigvalsh(sigma.matrix).min() >= -1e-10
    assert 0 <= recovery_fidelity(rho, petz_map(rho.marginal([1, 2]))) <= 1 + 1e-9


def test_optimize_ghz():
    res = optimize_recovery(canonical_state("ghz"), restarts=3, iterations=100, seed=1)
    assert res.certificate.cmi_bits == pytest.approx(1.0, abs=1e-9)
    assert res.achieved_fidelity >= 2 ** -0.5 - 1e-6
    assert res.achieved_fidelity >= res.petz_fidelity - 1e-9
    rec = json.loads(res.certificate.to_json())
    assert list(rec) == ["cmi_bits", "target_fidelity", "achieved_fidelity", "slack", "restarts", "seed"]


def test_optimize_small_budget_and_converse():
    rho = random_density([2, 2, 2], seed=20)
    res = optimize_recovery(rho, restarts=2, iterations=60, seed=3)
    assert res.certificate.slack >= -1e-6
    sigma = recovered_state(rho, res.channel(rho))
    # data processing: I(A:C|B) <= H(A|BC)_sigma - H(A|BC)_rho
    gap = conditional_entropy(sigma, ["A"], ["B", "C"]) - conditional_entropy(rho, ["A"], ["B", "C"])
    assert cmi(rho).cmi <= gap + 1e-6
    assert fidelity(rho.matrix, sigma.matrix) == pytest.approx(res.achieved_fidelity, abs=1e-9)


def test_optimize_deterministic_and_budget():
    rho = random_density([2, 2, 2], seed=21)
    a = optimize_recovery(rho, restarts=2, iterations=20, seed=5)
    b = optimize_recovery(rho, restarts=2, iterations=20, seed=5)
    assert a.achieved_fidelity == b.achieved_fidelity
    with pytest.raises(BudgetZero):
        optimize_recovery(rho, restarts=0)
