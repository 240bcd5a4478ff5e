"""Dense complex linear algebra: Hermitian spectra, matrix functions, tensor bookkeeping, norms.

Composite indices are row-major over the subsystem order (first subsystem slowest),
which matches ``np.kron``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence, Union

import numpy as np

from .errors import DimMismatch, NegativeEigenvalue, NonFinite, NotHermitian

SUPPORT_CUTOFF = 1e-12
HERMITIAN_TOL = 1e-9

_DEFAULT_LABELS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


class SpectralDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # real, descending
    eigenvectors: np.ndarray  # unitary, columns

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


@dataclass(frozen=True)
class SystemDims:
    """Ordered subsystem dimensions with distinct labels."""

    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __init__(self, dims: Sequence[int], labels: Sequence[str] | None = None):
        dims = tuple(int(d) for d in dims)
        if labels is None:
            if len(dims) > len(_DEFAULT_LABELS):
                raise DimMismatch("too many subsystems for default labels")
            labels = tuple(_DEFAULT_LABELS[: len(dims)])
        labels = tuple(str(s) for s in labels)
        if len(labels) != len(dims):
            raise DimMismatch(f"{len(dims)} dims but {len(labels)} labels")
        if len(set(labels)) != len(labels):
            raise DimMismatch(f"labels must be distinct: {labels}")
        if any(d < 1 for d in dims):
            raise DimMismatch(f"dimensions must be positive: {dims}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.dims)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.dims else 1

    def index(self, system: Union[str, int]) -> int:
        if isinstance(system, (int, np.integer)):
            if not 0 <= system < len(self.dims):
                raise DimMismatch(f"subsystem index {system} out of range")
            return int(system)
        try:
            return self.labels.index(system)
        except ValueError:
            raise DimMismatch(f"unknown subsystem label {system!r}; have {self.labels}") from None

    def indices(self, systems: Iterable[Union[str, int]]) -> list[int]:
        if isinstance(systems, (str, int, np.integer)):
            systems = [systems]
        return [self.index(s) for s in systems]

    def dim_of(self, system: Union[str, int]) -> int:
        return self.dims[self.index(system)]

    def select(self, systems: Iterable[Union[str, int]]) -> "SystemDims":
        """Sub-dims for ``systems``, kept in their original order."""
        idx = sorted(set(self.indices(systems)))
        return SystemDims([self.dims[i] for i in idx], [self.labels[i] for i in idx])

    def permuted(self, perm: Sequence[int]) -> "SystemDims":
        return SystemDims([self.dims[p] for p in perm], [self.labels[p] for p in perm])

    def relabeled(self, mapping: dict[str, str]) -> "SystemDims":
        return SystemDims(self.dims, [mapping.get(s, s) for s in self.labels])


def as_dims(dims: Union[SystemDims, Sequence[int]]) -> SystemDims:
    return dims if isinstance(dims, SystemDims) else SystemDims(dims)


def check_finite(m: np.ndarray) -> None:
    if not np.all(np.isfinite(m)):
        raise NonFinite("matrix contains NaN or Inf")


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def _square(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimMismatch(f"expected a square matrix, got shape {m.shape}")
    return m


def hermitian_eig(m, tol: float = HERMITIAN_TOL) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian matrix with eigenvalues in descending order.

    The input is symmetrized before decomposition; asymmetry larger than
    ``tol * ||m||`` raises :class:`NotHermitian`.
    """
    m = _square(m)
    check_finite(m)
    scale = np.linalg.norm(m, 2) if m.size else 0.0
    if np.max(np.abs(m - m.conj().T), initial=0.0) > tol * max(scale, 1e-300):
        raise NotHermitian("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh(hermitian_part(m))
    return SpectralDecomposition(w[::-1].copy(), v[:, ::-1].copy())


def _named_function(name: str):
    # returns (scalar function, needs_nonnegative, support_only)
    table = {
        "identity": (lambda x: x, False, False),
        "sqrt": (np.sqrt, True, False),
        "inv_sqrt": (lambda x: 1.0 / np.sqrt(x), True, True),
        "inv": (lambda x: 1.0 / x, False, True),
        "log2": (np.log2, True, True),
        "log": (np.log, True, True),
        "exp": (np.exp, False, False),
    }
    try:
        return table[name]
    except KeyError:
        raise ValueError(f"unknown matrix function {name!r}") from None


def matrix_function(
    m,
    f: Union[str, Callable[[np.ndarray], np.ndarray]],
    support_cutoff: float = SUPPORT_CUTOFF,
) -> np.ndarray:
    """Apply ``f`` eigenvalue-wise to a Hermitian matrix.

    Named functions ``inv``, ``inv_sqrt``, ``log``, ``log2`` act on the support
    only: eigenvalues with magnitude at most ``support_cutoff * max|eig|`` are
    treated as kernel and mapped to 0. ``sqrt`` and the logarithms require
    non-negativity; eigenvalues below ``-support_cutoff * max|eig|`` raise
    :class:`NegativeEigenvalue`, smaller negatives are clamped to 0.
    A callable ``f`` is applied to every eigenvalue.
    """
    w, v = hermitian_eig(m)
    if callable(f):
        fw = np.asarray(f(w))
        return (v * fw) @ v.conj().T
    func, nonneg, support_only = _named_function(f)
    threshold = support_cutoff * (np.max(np.abs(w)) if w.size else 0.0)
    if nonneg:
        if w.size and w.min() < -threshold:
            raise NegativeEigenvalue(f"eigenvalue {w.min():.3e} below tolerance for {f}")
        w = np.where(w < 0, 0.0, w)
    if support_only:
        keep = np.abs(w) > threshold
        fw = np.zeros_like(w)
        fw[keep] = func(w[keep])
    else:
        fw = func(w)
    return (v * fw) @ v.conj().T


def sqrtm_psd(m) -> np.ndarray:
    return matrix_function(m, "sqrt")


def inv_sqrtm(m, support_cutoff: float = SUPPORT_CUTOFF) -> np.ndarray:
    return matrix_function(m, "inv_sqrt", support_cutoff)


def support_projector(m, support_cutoff: float = SUPPORT_CUTOFF) -> np.ndarray:
    w, v = hermitian_eig(m)
    threshold = support_cutoff * (np.max(np.abs(w)) if w.size else 0.0)
    vs = v[:, w > threshold]
    return vs @ vs.conj().T


def expm_hermitian(h, scale: complex = 1j) -> np.ndarray:
    """``exp(scale * h)`` for Hermitian ``h``; with the default this is a unitary."""
    w, v = np.linalg.eigh(hermitian_part(np.asarray(h, dtype=complex)))
    return (v * np.exp(scale * w)) @ v.conj().T


# -- tensor algebra ---------------------------------------------------------------


def kron(*ops) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def _check_dims(m: np.ndarray, dims: SystemDims) -> None:
    if m.shape != (dims.total, dims.total):
        raise DimMismatch(f"matrix shape {m.shape} does not match dims {dims.dims}")


def partial_trace(m, dims, keep) -> np.ndarray:
    """Trace out every subsystem not in ``keep``; kept systems stay in original order."""
    m = _square(m)
    dims = as_dims(dims)
    _check_dims(m, dims)
    keep_idx = sorted(set(dims.indices(keep)))
    n = len(dims)
    t = m.reshape(dims.dims + dims.dims)
    letters = [chr(ord("a") + i) for i in range(2 * n)]
    row = letters[:n]
    col = letters[n:]
    for i in range(n):
        if i not in keep_idx:
            col[i] = row[i]
    out = "".join(row[i] for i in keep_idx) + "".join(col[i] for i in keep_idx)
    t = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    d = int(np.prod([dims.dims[i] for i in keep_idx], dtype=np.int64)) if keep_idx else 1
    return t.reshape(d, d)


def permute_systems(m, dims, perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: new position ``i`` holds old subsystem ``perm[i]``."""
    m = _square(m)
    dims = as_dims(dims)
    _check_dims(m, dims)
    n = len(dims)
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(n)):
        raise DimMismatch(f"{perm} is not a permutation of {n} systems")
    t = m.reshape(dims.dims + dims.dims)
    t = t.transpose(perm + [n + p for p in perm])
    return t.reshape(m.shape)


def permute_vector(psi, dims, perm: Sequence[int]) -> np.ndarray:
    dims = as_dims(dims)
    psi = np.asarray(psi, dtype=complex).reshape(dims.dims)
    return psi.transpose([int(p) for p in perm]).reshape(-1)


def permutation_unitary(dims, perm: Sequence[int]) -> np.ndarray:
    """The unitary ``P`` with ``P m P^dagger == permute_systems(m, dims, perm)``."""
    dims = as_dims(dims)
    eye = np.eye(dims.total, dtype=complex)
    cols = [permute_vector(eye[:, j], dims, perm) for j in range(dims.total)]
    return np.stack(cols, axis=1)


# -- norms ---------------------------------------------------------------------


def trace_norm(m) -> float:
    m = np.asarray(m, dtype=complex)
    check_finite(m)
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def operator_norm(m) -> float:
    m = np.asarray(m, dtype=complex)
    check_finite(m)
    return float(np.linalg.norm(m, 2))


def min_eigenvalue(m) -> float:
    m = _square(m)
    check_finite(m)
    return float(np.linalg.eigvalsh(hermitian_part(m))[0])


def is_unitary(u, tol: float = 1e-8) -> bool:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])), initial=0.0) <= tol)
