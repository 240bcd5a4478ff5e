"""Permutation operators, exact Haar twirls by Weingarten calculus, and de Finetti witnesses."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import DimMismatch, TooLarge
from .linalg import kron, matrix_function, min_eigenvalue, partial_trace, permutation_unitary, permute_systems
from .oneshot import max_divergence
from .states import SeedLike, as_rng, haar_unitary

MAX_DIM = 4096
MAX_TWIRL_N = 4


def compose(sigma: Sequence[int], pi: Sequence[int]) -> tuple:
    """(sigma o pi)(k) = sigma(pi(k))."""
    return tuple(sigma[p] for p in pi)


def inverse(pi: Sequence[int]) -> tuple:
    inv = [0] * len(pi)
    for k, p in enumerate(pi):
        inv[p] = k
    return tuple(inv)


def cycle_count(pi: Sequence[int]) -> int:
    seen = [False] * len(pi)
    cycles = 0
    for start in range(len(pi)):
        if not seen[start]:
            cycles += 1
            k = start
            while not seen[k]:
                seen[k] = True
                k = pi[k]
    return cycles


@dataclass(frozen=True)
class PermOperator:
    """P_pi on (C^d)^{(x)n}, moving tensor slot k to slot pi(k); P_s P_p = P_{s o p}."""

    perm: tuple
    d: int

    @property
    def n(self) -> int:
        return len(self.perm)

    def matrix(self) -> np.ndarray:
        if self.d**self.n > MAX_DIM:
            raise TooLarge(f"d^n = {self.d ** self.n} exceeds {MAX_DIM}")
        # new slot i holds old slot pi^{-1}(i)
        return permutation_unitary([self.d] * self.n, inverse(self.perm)).real

    def __matmul__(self, other: "PermOperator") -> "PermOperator":
        return PermOperator(compose(self.perm, other.perm), self.d)


def all_permutations(n: int) -> list[tuple]:
    return list(itertools.permutations(range(n)))


@dataclass(frozen=True)
class WeingartenTable:
    """Gram matrix d^{#cycles(s^-1 p)} of the permutation operators and its (pseudo-)inverse."""

    n: int
    d: int

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise DimMismatch("n and d must be positive")
        if self.n > MAX_TWIRL_N:
            raise TooLarge(f"twirls are limited to n <= {MAX_TWIRL_N}")

    @cached_property
    def perms(self) -> list[tuple]:
        return all_permutations(self.n)

    @cached_property
    def gram(self) -> np.ndarray:
        ps = self.perms
        g = np.empty((len(ps), len(ps)))
        for i, s in enumerate(ps):
            s_inv = inverse(s)
            for j, p in enumerate(ps):
                g[i, j] = float(self.d) ** cycle_count(compose(s_inv, p))
        return g

    @cached_property
    def inverse_gram(self) -> np.ndarray:
        # singular when d < n; the pseudo-inverse still yields the orthogonal projection
        return np.linalg.pinv(self.gram, rcond=1e-12, hermitian=True)

    @property
    def invertible(self) -> bool:
        return self.d >= self.n

    @cached_property
    def matrices(self) -> np.ndarray:
        return np.stack([PermOperator(p, self.d).matrix() for p in self.perms])


def sym_dimension(d: int, n: int) -> int:
    return math.comb(n + d - 1, n)


def sym_projector(d: int, n: int) -> np.ndarray:
    """(1/n!) sum_pi P_pi, the projector onto Sym^n(C^d)."""
    if d**n > MAX_DIM:
        raise TooLarge(f"d^n = {d ** n} exceeds {MAX_DIM}")
    ps = all_permutations(n)
    acc = sum(PermOperator(p, d).matrix() for p in ps)
    return acc / len(ps)


def haar_twirl(x, table: WeingartenTable) -> np.ndarray:
    """Integral of U^{(x)n} X U^{(x)n dagger} dU as the projection onto span{P_pi}."""
    x = np.asarray(x, dtype=complex)
    dim = table.d**table.n
    if x.shape != (dim, dim):
        raise DimMismatch(f"X has shape {x.shape}, expected ({dim}, {dim})")
    mats = table.matrices
    # b_s = tr(P_s^dagger X); P_s is real orthogonal
    b = np.einsum("sij,ij->s", mats, x)
    c = table.inverse_gram @ b
    return np.einsum("p,pij->ij", c, mats)


def interleaved_to_block(n: int, n_factors: int = 2) -> list[int]:
    """Axis order taking (F1_1 .. Fk_1, ..., F1_n .. Fk_n) to (F1_1..F1_n, ..., Fk_1..Fk_n)."""
    return [slot * n_factors + f for f in range(n_factors) for slot in range(n)]


def bystander_twirl(x, d_d: int, d_e: int, n: int, table: Optional[WeingartenTable] = None) -> np.ndarray:
    """Twirl the E factors of X on (D (x) E)^{(x)n} (interleaved order) with identity on D^n.

    The result is sum_pi C_pi (x) P_pi with C_pi = sum_s G^+[pi, s] tr_E(X (I (x) P_s^dagger)).
    """
    x = np.asarray(x, dtype=complex)
    if table is None:
        table = WeingartenTable(n, d_e)
    if table.n != n or table.d != d_e:
        raise DimMismatch("Weingarten table does not match (n, dim E)")
    big_d, big_e = d_d**n, d_e**n
    if x.shape != (big_d * big_e, big_d * big_e):
        raise DimMismatch(f"X has shape {x.shape}, expected {big_d * big_e} square")
    dims = [d_d, d_e] * n
    order = interleaved_to_block(n)
    xb = permute_systems(x, dims, order).reshape(big_d, big_e, big_d, big_e)
    mats = table.matrices
    # B_s[a, b] = sum_{e, g} P_s^dagger[e, g] X[(a, g), (b, e)]
    b = np.einsum("seg,agbe->sab", mats.transpose(0, 2, 1), xb)
    c = np.einsum("ps,sab->pab", table.inverse_gram, b)
    out = np.einsum("pab,pef->aebf", c, mats).reshape(big_d * big_e, big_d * big_e)
    block_dims = [d_d] * n + [d_e] * n
    return permute_systems(out, block_dims, _inverse_list(order))


def _inverse_list(order: Sequence[int]) -> list[int]:
    inv = [0] * len(order)
    for i, o in enumerate(order):
        inv[o] = i
    return inv


# -- de Finetti witnesses ---------------------------------------------------------------


def theta_vector(d_d: int, d_e: int) -> np.ndarray:
    """Unnormalized sum_i |i>_D |i>_E over i < min(d_D, d_E)."""
    v = np.zeros(d_d * d_e, dtype=complex)
    for i in range(min(d_d, d_e)):
        v[i * d_e + i] = 1.0
    return v


def vector_power(v: np.ndarray, n: int) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for _ in range(n):
        out = np.kron(out, v)
    return out


def postselection_operator(sigma_d, d_e: int, n: int, table: Optional[WeingartenTable] = None) -> np.ndarray:
    """tau = (sigma^{1/2} (x) I)^{(x)n} T (sigma^{1/2} (x) I)^{(x)n}, T the E-twirl of |theta><theta|^{(x)n}."""
    sigma_d = np.asarray(sigma_d, dtype=complex)
    d_d = sigma_d.shape[0]
    if (d_d * d_e) ** n > MAX_DIM:
        raise TooLarge(f"(d_D d_E)^n = {(d_d * d_e) ** n} exceeds {MAX_DIM}")
    th = vector_power(theta_vector(d_d, d_e), n)
    t = bystander_twirl(np.outer(th, th.conj()), d_d, d_e, n, table)
    root = kron(*([np.kron(matrix_function(sigma_d, "sqrt"), np.eye(d_e))] * n))
    return root @ t @ root


def symmetric_generator(d_e: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Random Hermitian operator on E^{(x)n} that commutes with every permutation."""
    g = rng.standard_normal((d_e**n, d_e**n)) + 1j * rng.standard_normal((d_e**n, d_e**n))
    h = (g + g.conj().T) / 2
    perms = all_permutations(n)
    mats = [PermOperator(p, d_e).matrix() for p in perms]
    return sum(p @ h @ p.T for p in mats) / len(mats)


@dataclass(frozen=True)
class WitnessRow:
    trial: int
    min_eigenvalue: float
    bound_constant: float
    n: int
    d: int
    required_constant: float  # smallest lambda with rho <= lambda tau


@dataclass(frozen=True)
class WitnessReport:
    rows: tuple
    sym_dimension: int

    @property
    def holds(self) -> bool:
        return all(r.min_eigenvalue >= -1e-8 for r in self.rows)

    @property
    def worst(self) -> float:
        return min(r.min_eigenvalue for r in self.rows)


def _entangling_unitary(d_e: int, n: int, rng) -> np.ndarray:
    return matrix_function(symmetric_generator(d_e, n, rng), lambda w: np.exp(1j * w))


def _pure_witness(sigma_d, d_e: int, n: int, v: np.ndarray, w: Optional[np.ndarray]) -> np.ndarray:
    """|Psi> = ((sigma^{1/2} (x) V)|theta>)^{(x)n}, optionally followed by a symmetric W on E^n."""
    d_d = sigma_d.shape[0]
    single = np.kron(matrix_function(sigma_d, "sqrt"), v) @ theta_vector(d_d, d_e)
    psi = vector_power(single, n)
    if w is not None:
        dims = [d_d, d_e] * n
        order = interleaved_to_block(n)
        block = _apply_perm_vector(psi, dims, order)
        block = (np.kron(np.eye(d_d**n), w) @ block)
        psi = _apply_perm_vector(block, [dims[o] for o in order], _inverse_list(order))
    return psi


def _apply_perm_vector(psi, dims, order):
    return np.asarray(psi).reshape(dims).transpose(order).reshape(-1)


def definetti_witness(
    sigma_d,
    n: int,
    seed: SeedLike = 0,
    trials: int = 1,
    entangle: bool = False,
    identity_v: bool = False,
) -> WitnessReport:
    """Check rho <= (n+1)^{d^2-1} tau for permutation-invariant purifications rho of sigma_D^{(x)n}.

    Each trial draws a Haar V on E (d_E = d_D = d) and uses the product purification
    |Psi_V> = ((sigma^{1/2} (x) V)|theta>)^{(x)n}; with ``entangle`` the E^n part is further
    rotated by exp(iH) with H permutation-symmetric, which keeps rho a permutation-invariant
    purification but makes it entangled across copies.
    """
    sigma_d = np.asarray(sigma_d, dtype=complex)
    d = sigma_d.shape[0]
    if (d * d) ** n > MAX_DIM:
        raise TooLarge(f"(d^2)^n = {(d * d) ** n} exceeds {MAX_DIM}")
    rng = as_rng(seed)
    table = WeingartenTable(n, d)
    tau = postselection_operator(sigma_d, d, n, table)
    constant = float((n + 1) ** (d * d - 1))
    rows = []
    for trial in range(trials):
        v = np.eye(d) if identity_v else haar_unitary(d, rng)
        w = _entangling_unitary(d, n, rng) if entangle else None
        psi = _pure_witness(sigma_d, d, n, v, w)
        rho = np.outer(psi, psi.conj())
        rows.append(
            WitnessRow(trial, min_eigenvalue(constant * tau - rho), constant, n, d, 2.0 ** max_divergence(rho, tau))
        )
    return WitnessReport(tuple(rows), sym_dimension(d * d, n))


def mixed_postselection_operator(sigma_d, d_e: int, n: int) -> np.ndarray:
    """tr_{R^n} of the pure-case tau with E replaced by E (x) R, dim R = d_D d_E."""
    sigma_d = np.asarray(sigma_d, dtype=complex)
    d_d = sigma_d.shape[0]
    d_r = d_d * d_e
    tau = postselection_operator(sigma_d, d_e * d_r, n)
    dims = [d_d, d_e, d_r] * n
    keep = [i for i in range(3 * n) if i % 3 != 2]
    return partial_trace(tau, dims, keep)


def mixed_extension_witness(
    sigma_d,
    n: int,
    seed: SeedLike = 0,
    trials: int = 1,
    d_e: Optional[int] = None,
    entangle: bool = True,
    rho: Optional[np.ndarray] = None,
) -> WitnessReport:
    """Check rho_{D^n E^n} <= (n+1)^{d^2-1} tr_R(tau) with d = dim(D) dim(E)^2.

    Mixed extensions are produced as R^n-marginals of pure permutation-invariant witnesses on
    D (x) (E (x) R); a fixed ``rho`` can be supplied instead (then ``trials`` is ignored).
    """
    sigma_d = np.asarray(sigma_d, dtype=complex)
    d_d = sigma_d.shape[0]
    d_e = d_d if d_e is None else d_e
    d_r = d_d * d_e
    d_big = d_e * d_r
    if (d_d * d_big) ** n > MAX_DIM:
        raise TooLarge(f"(d_D d_E d_R)^n = {(d_d * d_big) ** n} exceeds {MAX_DIM}")
    rng = as_rng(seed)
    tau = mixed_postselection_operator(sigma_d, d_e, n)
    d_const = d_d * d_e**2
    constant = float((n + 1) ** (d_const**2 - 1))
    dims = [d_d, d_e, d_r] * n
    keep = [i for i in range(3 * n) if i % 3 != 2]
    states = []
    if rho is not None:
        states.append(np.asarray(rho, dtype=complex))
    else:
        for _ in range(trials):
            v = haar_unitary(d_big, rng)
            w = _entangling_unitary(d_big, n, rng) if entangle else None
            psi = _pure_witness(sigma_d, d_big, n, v, w)
            states.append(partial_trace(np.outer(psi, psi.conj()), dims, keep))
    rows = []
    for trial, r in enumerate(states):
        gap = min_eigenvalue(constant * tau - r)
        rows.append(WitnessRow(trial, gap, constant, n, d_const, 2.0 ** max_divergence(r, tau)))
    return WitnessReport(tuple(rows), sym_dimension(d_const * d_const, n))
