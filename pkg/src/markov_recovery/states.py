"""Multipartite states: validation, random generation, qcq constructions, canonical examples, JSON I/O."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import (
    BadRank,
    DimMismatch,
    InvalidState,
    ParseError,
    SchemaViolation,
    UnknownName,
)
from .linalg import (
    SystemDims,
    as_dims,
    check_finite,
    hermitian_part,
    kron,
    partial_trace,
    permute_systems,
)

STATE_TOL = 1e-9

SeedLike = Union[int, np.random.Generator, np.random.SeedSequence, None]


def as_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    """Independent child seeds, stable for a given parent seed."""
    return np.random.SeedSequence(seed).spawn(count)


@dataclass(frozen=True)
class MultipartiteState:
    """Non-negative operator with labelled tensor factors.

    ``normalized`` marks density operators (unit trace); otherwise any
    non-negative operator is allowed.
    """

    matrix: np.ndarray
    dims: SystemDims
    normalized: bool = True

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        dims = as_dims(self.dims)
        if m.ndim != 2 or m.shape != (dims.total, dims.total):
            raise DimMismatch(f"matrix shape {m.shape} inconsistent with dims {dims.dims}")
        check_finite(m)
        scale = max(np.max(np.abs(m), initial=0.0), 1.0)
        if np.max(np.abs(m - m.conj().T), initial=0.0) > STATE_TOL * scale:
            raise InvalidState("state is not Hermitian")
        m = hermitian_part(m)
        w = np.linalg.eigvalsh(m)
        if w.size and w[0] < -STATE_TOL * max(np.max(np.abs(w)), 1.0):
            raise InvalidState(f"negative eigenvalue {w[0]:.3e}")
        if self.normalized and abs(np.trace(m).real - 1.0) > STATE_TOL:
            raise InvalidState(f"trace {np.trace(m).real:.12g} is not 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.dims.total

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def marginal(self, keep) -> "MultipartiteState":
        sub = self.dims.select(keep)
        return MultipartiteState(partial_trace(self.matrix, self.dims, keep), sub, self.normalized)

    def reordered(self, labels: Sequence[str]) -> "MultipartiteState":
        perm = self.dims.indices(labels)
        if sorted(perm) != list(range(len(self.dims))):
            raise DimMismatch(f"{labels} is not a reordering of {self.dims.labels}")
        m = permute_systems(self.matrix, self.dims, perm)
        return MultipartiteState(m, self.dims.permuted(perm), self.normalized)

    def relabeled(self, labels: Sequence[str]) -> "MultipartiteState":
        return MultipartiteState(self.matrix, SystemDims(self.dims.dims, labels), self.normalized)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


def density(matrix, dims=None, labels=None) -> MultipartiteState:
    """Convenience wrapper: a normalized state, single system if ``dims`` is omitted."""
    matrix = np.asarray(matrix, dtype=complex)
    if dims is None:
        dims = [matrix.shape[0]]
    return MultipartiteState(matrix, SystemDims(dims, labels))


def pure_state(psi, dims=None, labels=None) -> MultipartiteState:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    return density(np.outer(psi, psi.conj()), dims if dims is not None else [psi.size], labels)


# -- random generation ----------------------------------------------------------


def ginibre(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def random_density(dim, rank=None, seed: SeedLike = None, labels=None) -> MultipartiteState:
    """Ginibre-induced random density operator ``G G^dagger / tr``.

    ``dim`` is either a total dimension or a list of subsystem dimensions.
    """
    dims = SystemDims([dim] if np.isscalar(dim) else list(dim), labels)
    d = dims.total
    rank = d if rank is None else int(rank)
    if not 1 <= rank <= d:
        raise BadRank(f"rank {rank} outside [1, {d}]")
    g = ginibre(d, rank, as_rng(seed))
    m = g @ g.conj().T
    return MultipartiteState(m / np.trace(m).real, dims)


def random_pure_vector(dim: int, seed: SeedLike = None) -> np.ndarray:
    v = ginibre(dim, 1, as_rng(seed))[:, 0]
    return v / np.linalg.norm(v)


def haar_unitary(dim: int, seed: SeedLike = None) -> np.ndarray:
    """Haar-random unitary: QR of a complex Gaussian matrix with the phases of diag(R) removed."""
    if dim < 1:
        raise DimMismatch("dimension must be positive")
    q, r = np.linalg.qr(ginibre(dim, dim, as_rng(seed)))
    diag = np.diagonal(r)
    phases = np.where(np.abs(diag) > 0, diag / np.abs(diag), 1.0)
    return q * phases


# -- classical-quantum-classical states ----------------------------------------------


@dataclass(frozen=True)
class QcqSpec:
    """Weights ``p_b`` over a classical B register and states on A (x) C for each symbol."""

    p_b: np.ndarray
    rho_ac: tuple
    dim_a: int
    dim_c: int

    def __init__(self, p_b, rho_ac, dim_a: int, dim_c: int):
        p = np.asarray(p_b, dtype=float).reshape(-1)
        blocks = tuple(np.asarray(r, dtype=complex) for r in rho_ac)
        if len(blocks) != p.size:
            raise DimMismatch(f"{p.size} weights but {len(blocks)} conditional states")
        if np.any(p < 0) or abs(p.sum() - 1.0) > STATE_TOL:
            raise InvalidState("p_b must be a probability vector")
        for r in blocks:
            if r.shape != (dim_a * dim_c, dim_a * dim_c):
                raise DimMismatch(f"conditional state shape {r.shape} != ({dim_a * dim_c},)*2")
            MultipartiteState(r, SystemDims([dim_a, dim_c], ["A", "C"]))
        object.__setattr__(self, "p_b", p)
        object.__setattr__(self, "rho_ac", blocks)
        object.__setattr__(self, "dim_a", int(dim_a))
        object.__setattr__(self, "dim_c", int(dim_c))

    @property
    def dim_b(self) -> int:
        return self.p_b.size


def _qcq_dims(spec: QcqSpec) -> SystemDims:
    return SystemDims([spec.dim_a, spec.dim_b, spec.dim_c], ["A", "B", "C"])


def _with_classical_b(spec: QcqSpec, blocks) -> MultipartiteState:
    dims = _qcq_dims(spec)
    acb = SystemDims([spec.dim_a, spec.dim_c, spec.dim_b], ["A", "C", "B"])
    m = np.zeros((dims.total, dims.total), dtype=complex)
    for b, (p, block) in enumerate(zip(spec.p_b, blocks)):
        proj = np.zeros((spec.dim_b, spec.dim_b))
        proj[b, b] = 1.0
        m += p * kron(block, proj)
    return MultipartiteState(permute_systems(m, acb, [0, 2, 1]), dims)


def build_qcq(spec: QcqSpec) -> MultipartiteState:
    return _with_classical_b(spec, spec.rho_ac)


def qcq_markov_reconstruction(spec: QcqSpec) -> MultipartiteState:
    """The Markov chain sum_b p_b rho_{A,b} (x) |b><b| (x) rho_{C,b} built from the conditional marginals."""
    ac = [spec.dim_a, spec.dim_c]
    blocks = [
        kron(partial_trace(r, ac, [0]), partial_trace(r, ac, [1])) for r in spec.rho_ac
    ]
    return _with_classical_b(spec, blocks)


def random_qcq_spec(
    n_symbols: int, dim_a: int = 2, dim_c: int = 2, seed: SeedLike = None, markov: bool = False
) -> QcqSpec:
    rng = as_rng(seed)
    p = rng.dirichlet(np.ones(n_symbols))
    blocks = []
    for _ in range(n_symbols):
        if markov:
            ra = random_density(dim_a, seed=rng).matrix
            rc = random_density(dim_c, seed=rng).matrix
            blocks.append(kron(ra, rc))
        else:
            blocks.append(random_density(dim_a * dim_c, seed=rng).matrix)
    return QcqSpec(p, blocks, dim_a, dim_c)


# -- canonical states -----------------------------------------------------------------


def antisymmetric_projector(d: int) -> np.ndarray:
    eye = np.eye(d * d)
    swap = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            swap[j * d + i, i * d + j] = 1.0
    return (eye - swap) / 2


def _labels(count: int) -> list[str]:
    return ["A", "B", "C"] if count == 3 else list(SystemDims([1] * count).labels)


def canonical_state(name: str, d: int = 2, parties: int = 3, dims=None) -> MultipartiteState:
    """Named example states.

    ``ghz`` and ``w`` live on ``parties`` systems of local dimension ``d`` (W uses qubits
    when d=2 and single-excitation superpositions otherwise). ``antisymmetric`` and
    ``singlet`` are bipartite A (x) C. ``maximally_mixed`` and ``product`` use ``dims`` if
    given, else a single system of dimension ``d``; ``product`` is |0...0><0...0|.
    """
    key = name.lower().replace("-", "_")
    if key == "ghz":
        dims_ = SystemDims([d] * parties, _labels(parties))
        psi = np.zeros(dims_.total, dtype=complex)
        for i in range(d):
            psi[sum(i * d**k for k in range(parties))] = 1.0
        return pure_state(psi, dims_.dims, dims_.labels)
    if key == "w":
        dims_ = SystemDims([d] * parties, _labels(parties))
        psi = np.zeros(dims_.total, dtype=complex)
        for k in range(parties):
            psi[d ** (parties - 1 - k)] = 1.0
        return pure_state(psi, dims_.dims, dims_.labels)
    if key == "maximally_mixed":
        dims_ = SystemDims(dims if dims is not None else [d])
        return MultipartiteState(np.eye(dims_.total) / dims_.total, dims_)
    if key == "antisymmetric":
        if d < 2:
            raise DimMismatch("antisymmetric state needs d >= 2")
        p = antisymmetric_projector(d)
        return MultipartiteState(p / np.trace(p), SystemDims([d, d], ["A", "C"]))
    if key == "singlet":
        psi = np.array([0, 1, -1, 0], dtype=complex)
        return pure_state(psi, [2, 2], ["A", "C"])
    if key in ("product", "embezzling_free_product"):
        dims_ = SystemDims(dims if dims is not None else [d])
        m = np.zeros((dims_.total, dims_.total), dtype=complex)
        m[0, 0] = 1.0
        return MultipartiteState(m, dims_)
    raise UnknownName(f"unknown canonical state {name!r}")


# -- serialization -----------------------------------------------------------------


def state_to_dict(state: MultipartiteState) -> dict:
    m = state.matrix
    return {
        "dims": list(state.dims.dims),
        "labels": list(state.dims.labels),
        "normalized": bool(state.normalized),
        "matrix": {"re": m.real.tolist(), "im": m.imag.tolist()},
    }


def write_state(state: MultipartiteState, path) -> None:
    # json emits floats via repr, which round-trips exactly
    Path(path).write_text(json.dumps(state_to_dict(state)) + "\n", encoding="utf-8")


def state_from_dict(data) -> MultipartiteState:
    if not isinstance(data, dict):
        raise SchemaViolation("state file must hold a JSON object")
    for key in ("dims", "matrix"):
        if key not in data:
            raise SchemaViolation(f"missing field {key!r}")
    try:
        dims = [int(x) for x in data["dims"]]
        re = np.asarray(data["matrix"]["re"], dtype=float)
        im = np.asarray(data["matrix"].get("im", np.zeros_like(re)), dtype=float)
    except (TypeError, ValueError, KeyError) as exc:
        raise SchemaViolation(f"malformed dims or matrix: {exc}") from None
    if re.shape != im.shape or re.ndim != 2:
        raise SchemaViolation("re/im must be matrices of equal shape")
    if any(x < 1 for x in dims):
        raise SchemaViolation("dims must be positive")
    total = math.prod(dims)
    if re.shape != (total, total):
        raise SchemaViolation(f"matrix shape {re.shape} does not match dims product {total}")
    labels = data.get("labels")
    normalized = bool(data.get("normalized", True))
    try:
        return MultipartiteState(re + 1j * im, SystemDims(dims, labels), normalized)
    except (InvalidState, DimMismatch) as exc:
        raise SchemaViolation(str(exc)) from None


def read_state(path) -> MultipartiteState:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return state_from_dict(data)
