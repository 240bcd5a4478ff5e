"""Entropies, divergences, fidelity and trace distance (all logarithms base 2)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimMismatch, InvalidState, OutOfRange, SingularInput
from .linalg import (
    SUPPORT_CUTOFF,
    as_dims,
    hermitian_eig,
    matrix_function,
    partial_trace,
    trace_norm,
)
from .states import MultipartiteState

SUPPORT_MASS_TOL = 1e-9


def _mat(x) -> np.ndarray:
    if isinstance(x, MultipartiteState):
        return x.matrix
    return np.asarray(x, dtype=complex)


def _nonneg_spectrum(m, what: str = "operator") -> np.ndarray:
    try:
        w = hermitian_eig(m).eigenvalues
    except Exception as exc:
        raise InvalidState(f"{what}: {exc}") from None
    scale = max(np.max(np.abs(w), initial=0.0), 1e-300)
    if w.size and w[-1] < -1e-9 * max(scale, 1.0):
        raise InvalidState(f"{what} has negative eigenvalue {w[-1]:.3e}")
    return np.clip(w, 0.0, None)


def _xlogx(w: np.ndarray) -> float:
    w = w[w > SUPPORT_CUTOFF * max(np.max(w, initial=0.0), 1e-300)]
    return float(np.sum(w * np.log2(w)))


def von_neumann_entropy(rho) -> float:
    """-tr(rho log2 rho) over eigenvalues above the support cutoff."""
    w = _nonneg_spectrum(_mat(rho), "state")
    return max(-_xlogx(w), 0.0) if w.size else 0.0


def marginal_entropy(m, dims, keep) -> float:
    if len(list(keep)) == 0:
        return 0.0
    return von_neumann_entropy(partial_trace(m, dims, keep))


@dataclass(frozen=True)
class EntropyReport:
    H_ABC: float
    H_AB: float
    H_BC: float
    H_B: float

    @property
    def cmi(self) -> float:
        return self.H_AB + self.H_BC - self.H_B - self.H_ABC

    def as_dict(self) -> dict:
        return {
            "H_ABC": self.H_ABC,
            "H_AB": self.H_AB,
            "H_BC": self.H_BC,
            "H_B": self.H_B,
            "cmi": self.cmi,
        }


def _resolve(state, dims):
    if isinstance(state, MultipartiteState):
        return state.matrix, state.dims
    if dims is None:
        raise ValueError("dims are required for a bare matrix")
    return np.asarray(state, dtype=complex), as_dims(dims)


def cmi(state, dims=None) -> EntropyReport:
    """Entropy report and I(A:C|B) of a tripartite state, systems in A, B, C order."""
    m, dims = _resolve(state, dims)
    if len(dims) != 3:
        raise DimMismatch(f"expected three subsystems, got {len(dims)}")
    return EntropyReport(
        H_ABC=von_neumann_entropy(m),
        H_AB=marginal_entropy(m, dims, [0, 1]),
        H_BC=marginal_entropy(m, dims, [1, 2]),
        H_B=marginal_entropy(m, dims, [1]),
    )


def conditional_mutual_information(state, a, c, b=(), dims=None) -> float:
    """I(a:c|b) for arbitrary disjoint groups of subsystems (labels or indices)."""
    m, dims = _resolve(state, dims)
    a, b, c = (dims.indices(x) for x in (a, b, c))
    return (
        marginal_entropy(m, dims, a + b)
        + marginal_entropy(m, dims, b + c)
        - marginal_entropy(m, dims, b)
        - marginal_entropy(m, dims, a + b + c)
    )


def conditional_entropy(state, a, b, dims=None) -> float:
    """H(a|b) = H(ab) - H(b)."""
    m, dims = _resolve(state, dims)
    a, b = dims.indices(a), dims.indices(b)
    return marginal_entropy(m, dims, a + b) - marginal_entropy(m, dims, b)


def relative_entropy(rho, sigma) -> float:
    """(1/tr rho) tr(rho (log2 rho - log2 sigma)); +inf when supp(rho) is not inside supp(sigma)."""
    rho, sigma = _mat(rho), _mat(sigma)
    w_rho = _nonneg_spectrum(rho, "rho")
    tr_rho = float(np.sum(w_rho))
    if tr_rho <= 0:
        raise InvalidState("rho must be non-zero")
    dec = hermitian_eig(sigma)
    w_sig = dec.eigenvalues
    cut = SUPPORT_CUTOFF * max(np.max(np.abs(w_sig), initial=0.0), 1e-300)
    v = dec.eigenvectors
    # diagonal of rho in the eigenbasis of sigma
    weights = np.real(np.einsum("ij,ik,kj->j", v.conj(), rho, v))
    on = w_sig > cut
    if np.sum(weights[~on]) > SUPPORT_MASS_TOL * tr_rho:
        return math.inf
    cross = float(np.sum(weights[on] * np.log2(w_sig[on])))
    return (_xlogx(w_rho) - cross) / tr_rho


def fidelity(rho, sigma) -> float:
    """||sqrt(rho) sqrt(sigma)||_1 as the sum of singular values of sqrt(rho) sqrt(sigma).

    Singular values carry absolute error ~eps, whereas square roots of the eigenvalues of
    sqrt(rho) sigma sqrt(rho) turn eps-sized noise on a kernel into ~sqrt(eps).
    """
    rho, sigma = _mat(rho), _mat(sigma)
    roots = []
    for name, m in (("rho", rho), ("sigma", sigma)):
        _nonneg_spectrum(m, name)
        try:
            roots.append(matrix_function(m, "sqrt", support_cutoff=1e-9))
        except Exception as exc:
            raise InvalidState(f"{name}: {exc}") from None
    return float(np.sum(np.linalg.svd(roots[0] @ roots[1], compute_uv=False)))


def trace_distance(rho, sigma) -> float:
    """Generalized trace distance 1/2 ||rho - sigma||_1 + 1/2 |tr(rho - sigma)|."""
    diff = _mat(rho) - _mat(sigma)
    return 0.5 * trace_norm(diff) + 0.5 * abs(float(np.trace(diff).real))


def trace_distance_positive_part(rho, sigma) -> float:
    """max(tr Y+, tr Y-) for rho - sigma = Y+ - Y-; equals trace_distance."""
    w = hermitian_eig(_mat(rho) - _mat(sigma)).eigenvalues
    return float(max(np.sum(w[w > 0]), -np.sum(w[w < 0])))


def renyi_half_divergence(rho, sigma) -> float:
    """-2 log2(F(rho, sigma) / tr rho); +inf for orthogonal supports."""
    f = fidelity(rho, sigma)
    tr_rho = float(np.trace(_mat(rho)).real)
    if f <= 0:
        return math.inf
    return -2.0 * math.log2(f / tr_rho)


def dmap_bound(rho, sigma, w_rho, w_sigma, tr_sigma: Optional[float] = None):
    """Both sides of (1-eps) D(W(rho)||W(sigma)) <= D(rho||sigma) + eps log2(tr sigma / eps).

    ``w_rho`` and ``w_sigma`` are the images under a trace non-increasing map W and
    eps = 1 - tr W(rho). Returns (lhs, rhs).
    """
    eps = 1.0 - float(np.trace(_mat(w_rho)).real)
    eps = max(eps, 0.0)
    ts = float(np.trace(_mat(sigma)).real) if tr_sigma is None else tr_sigma
    lhs = (1.0 - eps) * relative_entropy(w_rho, w_sigma) if eps < 1 else 0.0
    rhs = relative_entropy(rho, sigma) + (eps * math.log2(ts / eps) if eps > 0 else 0.0)
    return lhs, rhs


# -- converse bounds ----------------------------------------------------------------


def _xlog2x(x: float) -> float:
    return x * math.log2(x) if x > 0 else 0.0


@dataclass(frozen=True)
class ConverseBounds:
    cmi: float
    delta: float
    af_bound: float
    simplified_bound: Optional[float]  # None when delta > 1/11

    @property
    def simplified_applicable(self) -> bool:
        return self.simplified_bound is not None

    def holds(self, tol: float = 1e-6) -> bool:
        ok = self.cmi <= self.af_bound + tol
        if self.simplified_bound is not None:
            ok = ok and self.cmi <= self.simplified_bound + tol
        return ok


def converse_bounds(cmi_value: float, delta: float, dim_a: int) -> ConverseBounds:
    """Alicki-Fannes type upper bounds on I(A:C|B) in terms of the distance to a recovered state."""
    if not 0.0 <= delta <= 0.5:
        raise OutOfRange(f"delta={delta} outside [0, 1/2]")
    la = math.log2(dim_a)
    # 4 delta log2(2 delta) = 2 * (2 delta) log2(2 delta)
    af = 8 * delta * la - 2 * _xlog2x(2 * delta) - 2 * _xlog2x(1 - 2 * delta)
    simplified = 7 * la * math.sqrt(delta) if delta <= 1 / 11 else None
    return ConverseBounds(float(cmi_value), float(delta), af, simplified)


# -- Uhlmann partner -------------------------------------------------------------------


def uhlmann_partner(rho, sigma, psi) -> np.ndarray:
    """A purification of ``sigma`` with maximal overlap against the purification ``psi`` of ``rho``.

    ``psi`` is a vector on D (x) R with D first (dimension of ``rho``). Write the D x R matrix
    of ``psi`` as sqrt(rho) W with W the unitary factor of its polar decomposition and take the
    SVD sqrt(rho) sqrt(sigma) = A S B^dagger. The partner is sqrt(sigma) B A^dagger W, so that
    <psi|partner> = tr S = F(rho, sigma). No inverse of rho is formed. Permutation covariance of
    the construction keeps the partner permutation-invariant whenever the inputs are.
    """
    rho, sigma = _mat(rho), _mat(sigma)
    d = rho.shape[0]
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.size % d:
        raise SingularInput("purification size is not a multiple of dim(rho)")
    big_psi = psi.reshape(d, psi.size // d)
    if np.max(np.abs(big_psi @ big_psi.conj().T - rho)) > 1e-7:
        raise SingularInput("psi does not purify rho")
    x, _, yh = np.linalg.svd(big_psi, full_matrices=False)
    polar = x @ yh
    a, _, bh = np.linalg.svd(matrix_function(rho, "sqrt") @ matrix_function(sigma, "sqrt"))
    phi = matrix_function(sigma, "sqrt") @ bh.conj().T @ a.conj().T @ polar
    if np.max(np.abs(phi @ phi.conj().T - sigma)) > 1e-7:
        raise SingularInput("rho is rank deficient on the purifying system; partner is not unique")
    return phi.reshape(-1)
