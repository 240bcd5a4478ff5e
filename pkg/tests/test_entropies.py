import math

import numpy as np
import pytest

from markov_recovery.entropies import (
    cmi,
    conditional_entropy,
    conditional_mutual_information,
    converse_bounds,
    dmap_bound,
    fidelity,
    relative_entropy,
    renyi_half_divergence,
    trace_distance,
    trace_distance_positive_part,
    uhlmann_partner,
    von_neumann_entropy,
)
from markov_recovery.errors import DimMismatch, OutOfRange, SingularInput
from markov_recovery.linalg import kron
from markov_recovery.states import canonical_state, haar_unitary, random_density

P0 = np.diag([1.0, 0.0])
P1 = np.diag([0.0, 1.0])


def scalar_entropy(p):
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def test_entropy_examples():
    assert von_neumann_entropy(np.eye(2) / 2) == pytest.approx(1.0)
    assert von_neumann_entropy(random_density(3, rank=1, seed=0)) == pytest.approx(0.0, abs=1e-9)
    assert von_neumann_entropy(np.diag([0.9, 0.1])) == pytest.approx(scalar_entropy([0.9, 0.1]), abs=1e-12)
    assert von_neumann_entropy(np.diag([0.9, 0.1])) == pytest.approx(0.4690, abs=1e-3)


def test_entropy_unitary_invariance():
    rho = random_density(4, seed=1).matrix
    u = haar_unitary(4, seed=2)
    assert von_neumann_entropy(u @ rho @ u.conj().T) == pytest.approx(von_neumann_entropy(rho), abs=1e-10)


def test_cmi_report():
    prod = kron(*(random_density(2, seed=s).matrix for s in (3, 4, 5)))
    assert cmi(prod, [2, 2, 2]).cmi == pytest.approx(0.0, abs=1e-9)
    rep = cmi(canonical_state("ghz"))
    assert rep.cmi == pytest.approx(1.0, abs=1e-9)
    d = rep.as_dict()
    assert d["cmi"] == pytest.approx(d["H_AB"] + d["H_BC"] - d["H_B"] - d["H_ABC"], abs=1e-12)
    with pytest.raises(DimMismatch):
        cmi(np.eye(4) / 4, [2, 2])
    with pytest.raises(ValueError):
        cmi(np.eye(8) / 8)


def test_chain_rule():
    rng = np.random.default_rng(6)
    for _ in range(10):
        s = random_density([2, 2, 2, 2], seed=rng, labels=["A1", "A2", "B", "C"])
        lhs = conditional_mutual_information(s, ["A1", "A2"], ["C"], ["B"])
        rhs = conditional_mutual_information(s, ["A1"], ["C"], ["B"]) + conditional_mutual_information(
            s, ["A2"], ["C"], ["B", "A1"]
        )
        assert lhs == pytest.approx(rhs, abs=1e-8)


def test_conditional_entropy_of_singlet_is_negative():
    assert conditional_entropy(canonical_state("singlet"), ["A"], ["C"]) == pytest.approx(-1.0, abs=1e-9)


def test_relative_entropy_examples():
    rho = random_density(3, seed=7).matrix
    assert relative_entropy(rho, rho) == pytest.approx(0.0, abs=1e-9)
    assert relative_entropy(P0, P1) == math.inf
    expected = 0.5 * math.log2(0.5 / 0.75) + 0.5 * math.log2(0.5 / 0.25)
    assert relative_entropy(np.diag([0.5, 0.5]), np.diag([0.75, 0.25])) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.2075, abs=1e-3)


def test_relative_entropy_prefactor():
    # D(c rho || sigma) includes 1/tr(rho): scaling rho by c shifts by log2 c
    rho, sigma = random_density(2, seed=8).matrix, random_density(2, seed=9).matrix
    assert relative_entropy(0.5 * rho, sigma) == pytest.approx(relative_entropy(rho, sigma) - 1.0, abs=1e-10)


def test_fidelity_examples():
    rho = random_density(3, seed=10).matrix
    assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-9)
    assert fidelity(0.4 * rho, 0.4 * rho) == pytest.approx(0.4, abs=1e-9)
    assert fidelity(P0, P1) == pytest.approx(0.0, abs=1e-12)
    assert fidelity(P0, np.eye(2) / 2) == pytest.approx(1 / math.sqrt(2), abs=1e-9)


def test_fidelity_symmetric_and_bounded():
    rng = np.random.default_rng(11)
    for _ in range(20):
        r = random_density(4, rank=int(rng.integers(1, 5)), seed=rng).matrix
        s = random_density(4, rank=int(rng.integers(1, 5)), seed=rng).matrix
        f = fidelity(r, s)
        assert f == pytest.approx(fidelity(s, r), abs=1e-9)
        assert -1e-12 <= f <= 1 + 1e-9


def test_trace_distance_examples():
    rho = random_density(3, seed=12).matrix
    assert trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-12)
    assert trace_distance(P0, P1) == pytest.approx(1.0)
    rng = np.random.default_rng(13)
    for _ in range(20):
        r = rng.uniform(0.3, 1) * random_density(3, seed=rng).matrix
        s = rng.uniform(0.3, 1) * random_density(3, seed=rng).matrix
        assert trace_distance(r, s) == pytest.approx(trace_distance_positive_part(r, s), abs=1e-10)


def test_trace_distance_variational_form():
    # sup over 0 <= Q <= 1 of |tr Q(rho - sigma)| is attained by a spectral projector
    rng = np.random.default_rng(14)
    r = 0.8 * random_density(3, seed=rng).matrix
    s = random_density(3, seed=rng).matrix
    w, v = np.linalg.eigh(r - s)
    best = max(abs(np.trace(q @ (r - s)).real) for q in (v[:, w > 0] @ v[:, w > 0].conj().T, v[:, w < 0] @ v[:, w < 0].conj().T))
    assert trace_distance(r, s) == pytest.approx(best, abs=1e-10)
    for _ in range(50):
        g = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        q = g @ g.conj().T
        q /= np.linalg.eigvalsh(q)[-1]
        assert abs(np.trace(q @ (r - s)).real) <= trace_distance(r, s) + 1e-10


def test_renyi_half():
    rho = random_density(3, seed=15).matrix
    assert renyi_half_divergence(rho, rho) == pytest.approx(0.0, abs=1e-8)
    assert renyi_half_divergence(P0, P1) == math.inf
    rng = np.random.default_rng(16)
    for _ in range(100):
        r, s = random_density(3, seed=rng).matrix, random_density(3, seed=rng).matrix
        assert renyi_half_divergence(r, s) <= relative_entropy(r, s) + 1e-9


def test_dmap_bound_projector_compressions():
    rng = np.random.default_rng(17)
    for _ in range(30):
        rho = random_density(4, seed=rng).matrix
        sigma = random_density(4, seed=rng).matrix
        u = haar_unitary(4, rng)
        k = int(rng.integers(1, 4))
        p = u[:, :k] @ u[:, :k].conj().T
        lhs, rhs = dmap_bound(rho, sigma, p @ rho @ p, p @ sigma @ p)
        assert lhs <= rhs + 1e-9


def test_converse_examples():
    b = converse_bounds(0.0, 0.0, 2)
    assert b.af_bound == pytest.approx(0.0) and b.simplified_bound == pytest.approx(0.0)
    b = converse_bounds(0.1, 1 / 11, 2)
    assert b.simplified_bound == pytest.approx(7 * math.sqrt(1 / 11), abs=1e-12)
    assert b.simplified_bound == pytest.approx(2.1106, abs=1e-4)
    assert not converse_bounds(0.1, 0.2, 2).simplified_applicable
    # continuous extension at delta = 1/2
    assert converse_bounds(0.0, 0.5, 2).af_bound == pytest.approx(4.0)
    with pytest.raises(OutOfRange):
        converse_bounds(0.0, 0.6, 2)
    with pytest.raises(OutOfRange):
        converse_bounds(0.0, -0.1, 2)


def test_converse_af_matches_displayed_formula():
    for delta in (0.01, 0.1, 0.3):
        la = math.log2(3)
        expected = 8 * delta * la - 4 * delta * math.log2(2 * delta) - 2 * (1 - 2 * delta) * math.log2(1 - 2 * delta)
        assert converse_bounds(0.0, delta, 3).af_bound == pytest.approx(expected, abs=1e-12)


def _purify(rho, rng):
    w, v = np.linalg.eigh(rho)
    d = rho.shape[0]
    psi = (v * np.sqrt(np.clip(w, 0, None))) @ haar_unitary(d, rng).T
    return psi.reshape(-1)


def test_uhlmann_same_state():
    rng = np.random.default_rng(18)
    rho = random_density(3, seed=rng).matrix
    psi = _purify(rho, rng)
    phi = uhlmann_partner(rho, rho, psi)
    assert abs(np.vdot(psi, phi)) == pytest.approx(1.0, abs=1e-9)


def test_uhlmann_qubit_fidelity():
    rng = np.random.default_rng(19)
    for _ in range(10):
        rho, sigma = random_density(2, seed=rng).matrix, random_density(2, seed=rng).matrix
        psi = _purify(rho, rng)
        phi = uhlmann_partner(rho, sigma, psi)
        big = phi.reshape(2, 2)
        assert np.max(np.abs(big @ big.conj().T - sigma)) <= 1e-7
        assert abs(np.vdot(psi, phi)) == pytest.approx(fidelity(rho, sigma), abs=1e-7)


def test_uhlmann_swap_invariance():
    rng = np.random.default_rng(20)
    # permutation-invariant rho, sigma on D^2 with D = C^2: mix products and their swaps
    swap = np.eye(4)[[0, 2, 1, 3]]

    def sym(m):
        return (m + swap @ m @ swap) / 2

    rho = sym(random_density(4, seed=rng).matrix)
    sigma = sym(random_density(4, seed=rng).matrix)
    # symmetric purification on (D R)^2: purify with R = D^2 and swap both factors
    w, v = np.linalg.eigh(rho)
    psi = ((v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T).reshape(-1)  # sqrt(rho) as vector
    phi = uhlmann_partner(rho, sigma, psi)
    full_swap = np.kron(swap, swap)
    assert np.max(np.abs(full_swap @ phi - phi)) <= 1e-7
    assert abs(np.vdot(psi, phi)) == pytest.approx(fidelity(rho, sigma), abs=1e-7)


def test_uhlmann_errors():
    rho = random_density(2, seed=21).matrix
    with pytest.raises(SingularInput):
        uhlmann_partner(rho, rho, np.ones(3))
    with pytest.raises(SingularInput):
        uhlmann_partner(rho, rho, np.array([1.0, 0, 0, 0]))
