"""Quantum channels, (rotated) Petz recovery maps and the fidelity-of-recovery optimizer."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .entropies import cmi as cmi_report
from .entropies import fidelity
from .errors import BudgetZero, DimMismatch, InvalidState, NonUnitaryParams, NotCP
from .linalg import (
    SystemDims,
    as_dims,
    hermitian_eig,
    is_unitary,
    matrix_function,
    partial_trace,
)
from .states import MultipartiteState, QcqSpec, SeedLike, as_rng, ginibre, haar_unitary

CHANNEL_TOL = 1e-8
KRAUS_CUTOFF = 1e-12


@dataclass(frozen=True)
class QuantumChannel:
    """Completely positive map X -> sum_k K_k X K_k^dagger.

    ``out_dims``/``out_labels`` describe how the output factorizes; they replace the
    target subsystem when the channel is applied to part of a multipartite state.
    """

    kraus: tuple
    dim_in: int
    dim_out: int
    out_dims: tuple = ()
    out_labels: Optional[tuple] = None
    trace_preserving: bool = field(init=False, default=True)

    def __post_init__(self):
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ks:
            raise DimMismatch("a channel needs at least one Kraus operator")
        for k in ks:
            if k.shape != (self.dim_out, self.dim_in):
                raise DimMismatch(f"Kraus shape {k.shape} != ({self.dim_out}, {self.dim_in})")
        out_dims = tuple(self.out_dims) if self.out_dims else (self.dim_out,)
        if math.prod(out_dims) != self.dim_out:
            raise DimMismatch(f"out_dims {out_dims} do not multiply to {self.dim_out}")
        if self.out_labels is not None and len(self.out_labels) != len(out_dims):
            raise DimMismatch("out_labels must match out_dims")
        gram = sum(k.conj().T @ k for k in ks)
        top = np.linalg.eigvalsh((gram + gram.conj().T) / 2)[-1]
        if top > 1 + CHANNEL_TOL:
            raise NotCP(f"sum K^dagger K has eigenvalue {top:.6g} > 1")
        tp = bool(np.max(np.abs(gram - np.eye(self.dim_in))) <= CHANNEL_TOL)
        object.__setattr__(self, "kraus", ks)
        object.__setattr__(self, "out_dims", out_dims)
        if self.out_labels is not None:
            object.__setattr__(self, "out_labels", tuple(self.out_labels))
        object.__setattr__(self, "trace_preserving", tp)

    @property
    def kraus_array(self) -> np.ndarray:
        return np.stack(self.kraus)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        return sum(k @ x @ k.conj().T for k in self.kraus)


def apply_channel(ch: QuantumChannel, rho, dims=None, target="B") -> MultipartiteState:
    """(id (x) ch)(rho) acting on subsystem ``target``; the output factors take its place."""
    if isinstance(rho, MultipartiteState):
        m, dims, normalized = rho.matrix, rho.dims, rho.normalized
    else:
        m, dims, normalized = np.asarray(rho, dtype=complex), as_dims(dims), True
    t = dims.index(target)
    if dims.dims[t] != ch.dim_in:
        raise DimMismatch(f"channel input {ch.dim_in} != dim({dims.labels[t]}) = {dims.dims[t]}")
    pre = math.prod(dims.dims[:t])
    post = math.prod(dims.dims[t + 1 :])
    x = m.reshape(pre, ch.dim_in, post, pre, ch.dim_in, post)
    k = ch.kraus_array
    out = np.einsum("kab,pbqscr,kdc->paqsdr", k, x, k.conj(), optimize=True)
    d = pre * ch.dim_out * post
    if ch.out_labels is not None:
        new_labels = ch.out_labels
    elif len(ch.out_dims) == 1:
        new_labels = (dims.labels[t],)
    else:
        new_labels = tuple(f"{dims.labels[t]}{i}" for i in range(len(ch.out_dims)))
    out_dims = SystemDims(
        dims.dims[:t] + ch.out_dims + dims.dims[t + 1 :],
        dims.labels[:t] + new_labels + dims.labels[t + 1 :],
    )
    return MultipartiteState(out.reshape(d, d), out_dims, normalized and ch.trace_preserving)


# -- simple channels ----------------------------------------------------------------


def identity_channel(d: int) -> QuantumChannel:
    return QuantumChannel([np.eye(d)], d, d)


def depolarizing_channel(d: int) -> QuantumChannel:
    """The fully depolarizing channel X -> tr(X) I/d."""
    ks = []
    for i in range(d):
        for j in range(d):
            k = np.zeros((d, d))
            k[i, j] = 1 / math.sqrt(d)
            ks.append(k)
    return QuantumChannel(ks, d, d)


def random_channel(
    d_in: int, d_out: int, n_kraus: int = 2, seed: SeedLike = None, out_dims=None, out_labels=None
) -> QuantumChannel:
    """Random trace-preserving channel from a Haar-like random isometry (QR of a Gaussian)."""
    if d_out * n_kraus < d_in:
        raise DimMismatch(f"an isometry needs n_kraus * d_out >= d_in, got {n_kraus} * {d_out} < {d_in}")
    g = ginibre(d_out * n_kraus, d_in, as_rng(seed))
    q, _ = np.linalg.qr(g)
    ks = [q[i * d_out : (i + 1) * d_out, :] for i in range(n_kraus)]
    return QuantumChannel(ks, d_in, d_out, tuple(out_dims or ()), out_labels)


def random_subchannel(d: int, n_kraus: int = 2, shrink: float = 0.7, seed: SeedLike = None) -> QuantumChannel:
    """Random trace non-increasing map: a random channel followed by a contraction."""
    rng = as_rng(seed)
    ch = random_channel(d, d, n_kraus, rng)
    c = ginibre(d, d, rng)
    c = shrink * c / np.linalg.norm(c, 2)
    return QuantumChannel([c @ k for k in ch.kraus], d, d)


def classical_reconstruction_channel(spec: QcqSpec) -> QuantumChannel:
    """B -> BC map |b><b'| -> delta_{bb'} |b><b| (x) rho_{C,b}, exact for qcq Markov chains."""
    db, dc = spec.dim_b, spec.dim_c
    ks = []
    for b, r in enumerate(spec.rho_ac):
        rc = partial_trace(r, [spec.dim_a, dc], [1])
        dec = hermitian_eig(rc)
        for lam, w in zip(dec.eigenvalues, dec.eigenvectors.T):
            if lam <= KRAUS_CUTOFF:
                continue
            k = np.zeros((db * dc, db), dtype=complex)
            k[b * dc : (b + 1) * dc, b] = math.sqrt(lam) * w
            ks.append(k)
    return QuantumChannel(ks, db, db * dc, (db, dc), ("B", "C"))


# -- Choi isomorphism ----------------------------------------------------------------


def choi(ch: QuantumChannel) -> np.ndarray:
    """J = (1/d_in) sum_ij |i><j| (x) ch(|i><j|); input factor first, tr J = 1 for channels."""
    vecs = [k.T.reshape(-1) for k in ch.kraus]  # entry (i, a) = K[a, i]
    j = sum(np.outer(v, v.conj()) for v in vecs)
    return j / ch.dim_in


def channel_from_choi(m, dim_in: int, dim_out: Optional[int] = None, out_dims=None, out_labels=None) -> QuantumChannel:
    """Inverse of :func:`choi` via the eigendecomposition of the Choi matrix."""
    m = np.asarray(m, dtype=complex)
    if dim_out is None:
        dim_out = m.shape[0] // dim_in
    if m.shape != (dim_in * dim_out, dim_in * dim_out):
        raise DimMismatch(f"Choi shape {m.shape} incompatible with {dim_in} -> {dim_out}")
    dec = hermitian_eig(m)
    w, v = dec.eigenvalues, dec.eigenvectors
    scale = max(np.max(np.abs(w)), 1e-300)
    if w[-1] < -1e-9 * scale:
        raise NotCP(f"Choi matrix has negative eigenvalue {w[-1]:.3e}")
    ks = [
        math.sqrt(lam * dim_in) * v[:, i].reshape(dim_in, dim_out).T
        for i, lam in enumerate(w)
        if lam > KRAUS_CUTOFF * scale
    ]
    return QuantumChannel(ks, dim_in, dim_out, tuple(out_dims or ()), out_labels)


# -- Petz-type maps -----------------------------------------------------------------


@dataclass(frozen=True)
class RotatedPetzParams:
    U: np.ndarray  # unitary on B
    V: np.ndarray  # unitary on B (x) C

    def __post_init__(self):
        u = np.asarray(self.U, dtype=complex)
        v = np.asarray(self.V, dtype=complex)
        if not (is_unitary(u) and is_unitary(v)):
            raise NonUnitaryParams("U and V must be unitary")
        object.__setattr__(self, "U", u)
        object.__setattr__(self, "V", v)

    @classmethod
    def identity(cls, d_b: int, d_c: int) -> "RotatedPetzParams":
        return cls(np.eye(d_b), np.eye(d_b * d_c))


def _bc_input(rho_bc, dims_bc):
    if isinstance(rho_bc, MultipartiteState):
        m, dims = rho_bc.matrix, rho_bc.dims
    else:
        m = np.asarray(rho_bc, dtype=complex)
        dims = SystemDims(dims_bc if dims_bc is not None else [], ["B", "C"])
    if len(dims) != 2:
        raise DimMismatch("rho_BC must have exactly two subsystems")
    try:
        MultipartiteState(m, dims, normalized=False)
    except Exception as exc:
        raise InvalidState(str(exc)) from None
    if np.trace(m).real <= 0:
        raise InvalidState("rho_BC must be non-zero")
    return m, dims


def _petz_operator(m, dims, u, v):
    """M = V rho_BC^{1/2} (rho_B^{-1/2} U (x) I_C) and the support projector of rho_B."""
    db, dc = dims.dims
    rho_b = partial_trace(m, dims, [0])
    left = matrix_function(rho_b, "inv_sqrt") @ u
    big = v @ matrix_function(m, "sqrt") @ np.kron(left, np.eye(dc))
    w, vec = np.linalg.eigh((rho_b + rho_b.conj().T) / 2)
    keep = w > 1e-12 * max(w.max(), 1e-300)
    pi_b = vec[:, keep] @ vec[:, keep].conj().T
    return big, pi_b


def rotated_petz_map(rho_bc, params: Optional[RotatedPetzParams] = None, dims_bc=None) -> QuantumChannel:
    """X -> V rho_BC^{1/2} (rho_B^{-1/2} U X U^dagger rho_B^{-1/2} (x) I_C) rho_BC^{1/2} V^dagger.

    Kraus operators are read off directly as K_c = M (I_B (x) |c>). Input outside
    U^dagger supp(rho_B) U is sent to rho_BC / tr(rho_BC), which makes the map trace-preserving.
    """
    m, dims = _bc_input(rho_bc, dims_bc)
    db, dc = dims.dims
    if params is None:
        params = RotatedPetzParams.identity(db, dc)
    if params.U.shape != (db, db) or params.V.shape != (db * dc, db * dc):
        raise DimMismatch("parameter shapes do not match rho_BC")
    big, pi_b = _petz_operator(m, dims, params.U, params.V)
    ks = [big[:, c::dc] for c in range(dc)]
    # off-support completion X -> tr(P X) omega
    p = np.eye(db) - params.U.conj().T @ pi_b @ params.U
    pw, pv = np.linalg.eigh((p + p.conj().T) / 2)
    omega = m / np.trace(m).real
    ow, ov = np.linalg.eigh((omega + omega.conj().T) / 2)
    for i in np.nonzero(pw > 0.5)[0]:
        for j in np.nonzero(ow > KRAUS_CUTOFF)[0]:
            ks.append(math.sqrt(ow[j]) * np.outer(ov[:, j], pv[:, i].conj()))
    return QuantumChannel(ks, db, db * dc, (db, dc), tuple(dims.labels))


def petz_map(rho_bc, dims_bc=None) -> QuantumChannel:
    return rotated_petz_map(rho_bc, None, dims_bc)


def _abc(state, dims=None) -> MultipartiteState:
    if isinstance(state, MultipartiteState):
        s = state
    else:
        s = MultipartiteState(state, SystemDims(dims, ["A", "B", "C"]))
    if len(s.dims) != 3:
        raise DimMismatch("expected a tripartite state")
    return s


def recovered_state(rho_abc, ch: QuantumChannel, dims=None) -> MultipartiteState:
    """(id_A (x) ch)(rho_AB) with output systems relabelled to match rho_ABC."""
    s = _abc(rho_abc, dims)
    la, lb, lc = s.dims.labels
    if ch.out_dims != (s.dims.dims[1], s.dims.dims[2]):
        raise DimMismatch(f"channel output {ch.out_dims} does not match B, C dims")
    ch = QuantumChannel(ch.kraus, ch.dim_in, ch.dim_out, ch.out_dims, (lb, lc))
    return apply_channel(ch, s.marginal([la, lb]), target=lb)


def recovery_fidelity(rho_abc, ch: QuantumChannel, dims=None) -> float:
    s = _abc(rho_abc, dims)
    return fidelity(s.matrix, recovered_state(s, ch).matrix)


# -- optimizer ------------------------------------------------------------------------


def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal basis (Hilbert-Schmidt) of d x d Hermitian matrices, shape (d*d, d, d)."""
    basis = []
    for j in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[j, j] = 1.0
        basis.append(e)
    s = 1 / math.sqrt(2)
    for j in range(d):
        for k in range(j + 1, d):
            e = np.zeros((d, d), dtype=complex)
            e[j, k] = e[k, j] = s
            basis.append(e)
            e = np.zeros((d, d), dtype=complex)
            e[j, k] = -1j * s
            e[k, j] = 1j * s
            basis.append(e)
    return np.stack(basis)


def _expm_i_batch(h: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * w)[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)


class _FidelityModel:
    """Batched evaluation of F(rho_ABC, sigma(U, V)) for the rotated Petz family."""

    def __init__(self, s: MultipartiteState):
        self.da, self.db, self.dc = s.dims.dims
        da, db = self.da, self.db
        m = s.matrix
        self.sqrt_rho = matrix_function(m, "sqrt")
        rho_ab = partial_trace(m, s.dims, [0, 1])
        rho_bc = partial_trace(m, s.dims, [1, 2])
        rho_b = partial_trace(m, s.dims, [1])
        self.rho_ab4 = rho_ab.reshape(da, db, da, db)
        self.inv_sqrt_b = matrix_function(rho_b, "inv_sqrt")
        self.sqrt_bc = matrix_function(rho_bc, "sqrt")
        w, vec = np.linalg.eigh((rho_b + rho_b.conj().T) / 2)
        keep = w > 1e-12 * max(w.max(), 1e-300)
        self.pi_b = vec[:, keep] @ vec[:, keep].conj().T
        self.full_support = bool(np.all(keep))
        self.omega = rho_bc / np.trace(rho_bc).real

    def sigma(self, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        """Recovered states for stacks of U (n, dB, dB) and V (n, dBC, dBC)."""
        da, db, dc = self.da, self.db, self.dc
        n = max(us.shape[0], vs.shape[0])
        left = self.inv_sqrt_b @ us
        x = np.einsum("nbc,acde,nfe->nabdf", left, self.rho_ab4, left.conj(), optimize=True)
        x = np.broadcast_to(x, (n,) + x.shape[1:])
        w = (vs @ self.sqrt_bc).reshape(-1, db, dc, db, dc)
        out = np.einsum("nbcxy,naxdz,nfgzy->nabcdfg", np.broadcast_to(w, (n,) + w.shape[1:]), x,
                        np.broadcast_to(w.conj(), (n,) + w.shape[1:]), optimize=True)
        d = da * db * dc
        out = out.reshape(n, d, d)
        if not self.full_support:
            p = np.eye(db) - np.swapaxes(us.conj(), -1, -2) @ self.pi_b @ us
            ya = np.einsum("nbc,acdb->nad", np.broadcast_to(p, (n, db, db)), self.rho_ab4)
            out = out + np.einsum("nad,xy->naxdy", ya, self.omega).reshape(n, d, d)
        return out

    def fidelity(self, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        sig = self.sigma(us, vs)
        k = self.sqrt_rho @ sig @ self.sqrt_rho
        k = (k + np.swapaxes(k.conj(), -1, -2)) / 2
        w = np.linalg.eigvalsh(k)
        return np.sum(np.sqrt(np.clip(w, 0.0, None)), axis=-1)


@dataclass(frozen=True)
class Certificate:
    cmi_bits: float
    target_fidelity: float
    achieved_fidelity: float
    slack: float
    restarts: int
    seed: int

    def as_dict(self) -> dict:
        return {
            "cmi_bits": self.cmi_bits,
            "target_fidelity": self.target_fidelity,
            "achieved_fidelity": self.achieved_fidelity,
            "slack": self.slack,
            "restarts": self.restarts,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=False)


@dataclass(frozen=True)
class OptimizationResult:
    params: RotatedPetzParams
    achieved_fidelity: float
    certificate: Certificate
    petz_fidelity: float
    iterations: int

    def channel(self, rho_abc) -> QuantumChannel:
        s = _abc(rho_abc)
        return rotated_petz_map(s.marginal([1, 2]), self.params)


def _ascend(model: _FidelityModel, u0, v0, iterations: int, fd_step: float, tol: float):
    """Local ascent in the coordinates (U, V) = (exp(iH_U) U0, exp(iH_V) V0).

    The gradient is a central finite difference along a Hermitian basis. Steps come from
    L-BFGS-B (quasi-Newton direction, backtracking line search); it stops once the relative
    gain of an iteration drops below ``tol`` or after ``iterations`` iterations.
    """
    db, dbc = u0.shape[0], v0.shape[0]
    bu, bv = hermitian_basis(db), hermitian_basis(dbc)
    nu, nv = len(bu), len(bv)

    def generators(x):
        return np.tensordot(x[:nu], bu, axes=1), np.tensordot(x[nu:], bv, axes=1)

    def unitaries(x):
        hu, hv = generators(x)
        return _expm_i_batch(hu) @ u0, _expm_i_batch(hv) @ v0

    def loss(x):
        u, v = unitaries(x)
        return -float(model.fidelity(u[None], v[None])[0])

    def loss_grad(x):
        hu, hv = generators(x)
        us = _expm_i_batch(np.concatenate([hu + fd_step * bu, hu - fd_step * bu])) @ u0
        vs = _expm_i_batch(np.concatenate([hv + fd_step * bv, hv - fd_step * bv])) @ v0
        u, v = unitaries(x)
        fu = model.fidelity(us, v[None])
        fv = model.fidelity(u[None], vs)
        return -np.concatenate([fu[:nu] - fu[nu:], fv[:nv] - fv[nv:]]) / (2 * fd_step)

    res = minimize(
        loss,
        np.zeros(nu + nv),
        jac=loss_grad,
        method="L-BFGS-B",
        options={"maxiter": iterations, "ftol": tol, "gtol": 1e-10},
    )
    x = res.x
    f = -loss(x)
    f0 = -loss(np.zeros(nu + nv))
    if f0 > f:
        x, f = np.zeros(nu + nv), f0
    u, v = unitaries(x)
    return u, v, f, int(res.nit)


def optimize_recovery(
    rho_abc,
    restarts: int = 20,
    iterations: int = 500,
    seed: int = 0,
    dims=None,
    fd_step: float = 1e-5,
    tol: float = 1e-9,
) -> OptimizationResult:
    """Search rotated Petz maps for the largest fidelity of recovery.

    Restart 0 starts at the plain Petz map (U = V = I); the others start at Haar-random
    (U0, V0) drawn from independent children of ``seed``. Each restart ascends in the
    Lie-algebra coordinates U = exp(iH) U0 (see :func:`_ascend`); the best restart wins.
    """
    if restarts < 1:
        raise BudgetZero("at least one restart is required")
    s = _abc(rho_abc, dims)
    _, db, dc = s.dims.dims
    model = _FidelityModel(s)
    children = np.random.SeedSequence(seed).spawn(restarts)
    petz_f = float(model.fidelity(np.eye(db)[None], np.eye(db * dc)[None])[0])
    best = None
    total_iters = 0
    for r in range(restarts):
        if r == 0:
            u0, v0 = np.eye(db, dtype=complex), np.eye(db * dc, dtype=complex)
        else:
            rng = np.random.default_rng(children[r])
            u0, v0 = haar_unitary(db, rng), haar_unitary(db * dc, rng)
        u, v, f, used = _ascend(model, u0, v0, iterations, fd_step, tol)
        total_iters += used
        if best is None or f > best[2]:
            best = (u, v, f)
    u, v, f = best
    # re-unitarize against drift from repeated products
    u = _polar_unitary(u)
    v = _polar_unitary(v)
    params = RotatedPetzParams(u, v)
    f = recovery_fidelity(s, rotated_petz_map(s.marginal([1, 2]), params))
    info = cmi_report(s)
    target = 2.0 ** (-0.5 * info.cmi)
    cert = Certificate(info.cmi, target, f, f - target, restarts, int(seed))
    return OptimizationResult(params, f, cert, petz_f, total_iters)


def _polar_unitary(m: np.ndarray) -> np.ndarray:
    a, _, bh = np.linalg.svd(m)
    return a @ bh
