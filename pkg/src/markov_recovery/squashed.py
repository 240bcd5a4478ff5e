"""Iterated recovery, k-extendible approximations and squashed-entanglement distance bounds."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .entropies import conditional_mutual_information, trace_distance
from .errors import DimMismatch, MarginalMismatch, OutOfRange, TooLarge
from .linalg import SystemDims, partial_trace, permute_systems
from .recovery import QuantumChannel, apply_channel, optimize_recovery, petz_map
from .states import MultipartiteState, SeedLike, antisymmetric_projector, as_rng, random_density

MAX_DIM = 4096
MARGINAL_TOL = 1e-7
LN2 = math.log(2.0)


def _ace(rho_ace, dims=None) -> MultipartiteState:
    if isinstance(rho_ace, MultipartiteState):
        if len(rho_ace.dims) != 3:
            raise DimMismatch("expected a state on A, C, E")
        return rho_ace.relabeled(["A", "C", "E"])
    if dims is None or len(dims) != 3:
        raise DimMismatch("dims (dA, dC, dE) are required")
    return MultipartiteState(np.asarray(rho_ace, dtype=complex), SystemDims(dims, ["A", "C", "E"]))


def cmi_given_e(rho_ace, dims=None) -> float:
    """I(A:C|E) for a state ordered A, C, E."""
    s = _ace(rho_ace, dims)
    return conditional_mutual_information(s, "A", "C", "E")


def reconstruction_delta(cmi_bits: float) -> float:
    """delta = sqrt(ln 2 * I(A:C|E))."""
    return math.sqrt(LN2 * max(cmi_bits, 0.0))


def ladder_recovery(rho_ace, dims=None, restarts: int = 20, iterations: int = 500, seed: int = 0):
    """Recovery E -> E (x) C for rho_ACE: optimized rotated Petz, or plain Petz when restarts == 0.

    The state is viewed as A, B=E, C so the recovery module applies unchanged; the
    returned channel therefore outputs (E, C) in that order. Returns (channel, result or None).
    """
    s = _ace(rho_ace, dims)
    aec = s.reordered(["A", "E", "C"])
    if restarts == 0:
        return petz_map(aec.marginal(["E", "C"])), None
    res = optimize_recovery(aec, restarts=restarts, iterations=iterations, seed=seed)
    return res.channel(aec), res


@dataclass(frozen=True)
class ExtensionLadder:
    """States rho^i on A C_1 .. C_i E for i = 1..k; rho^1 is the input."""

    states: tuple
    dims: tuple  # (dA, dC, dE)
    recovery: QuantumChannel
    step_distances: tuple  # Delta(rho^i_{A C_i E}, rho^{i+1}_{A C_{i+1} E})
    cmi_bits: float
    delta: float

    @property
    def k(self) -> int:
        return len(self.states)

    def state_dims(self, i: int) -> list[int]:
        d_a, d_c, d_e = self.dims
        return [d_a] + [d_c] * i + [d_e]

    def ac_marginal(self, j: int, i: Optional[int] = None) -> np.ndarray:
        """rho^i_{A C_j} (default i = k); it does not depend on i >= j."""
        i = self.k if i is None else i
        return partial_trace(self.states[i - 1], self.state_dims(i), [0, j])

    def telescoping_distances(self) -> list[float]:
        """Delta(rho_AC, rho^j_{A C_j}) for j = 1..k."""
        ref = self.ac_marginal(1, 1)
        return [trace_distance(ref, self.ac_marginal(j, j)) for j in range(1, self.k + 1)]

    @property
    def max_step(self) -> float:
        return max(self.step_distances, default=0.0)


def build_extension_ladder(rho_ace, dims, k: int, recovery: QuantumChannel) -> ExtensionLadder:
    """rho^{i+1} = (id (x) T_{E -> C_{i+1} E})(rho^i), starting from rho^1 = rho_ACE.

    ``recovery`` outputs (E, C) in that order, as returned by :func:`ladder_recovery`.
    """
    s = _ace(rho_ace, dims)
    d_a, d_c, d_e = s.dims.dims
    if k < 1:
        raise OutOfRange("k must be at least 1")
    if d_a * d_c**k * d_e > MAX_DIM:
        raise TooLarge(f"dim(A) dim(C)^k dim(E) = {d_a * d_c ** k * d_e} exceeds {MAX_DIM}")
    if recovery.dim_in != d_e or tuple(recovery.out_dims) != (d_e, d_c):
        raise DimMismatch("recovery must map E to E (x) C")
    states = [s.matrix.copy()]
    steps = []
    for i in range(1, k):
        dims_i = [d_a] + [d_c] * i + [d_e]
        labels = [f"S{j}" for j in range(len(dims_i))]
        ch = QuantumChannel(recovery.kraus, d_e, d_e * d_c, (d_e, d_c), ("E", "Cnew"))
        out = apply_channel(ch, MultipartiteState(states[-1], SystemDims(dims_i, labels)), target=labels[-1])
        # out is A C_1..C_i E C_{i+1}; move C_{i+1} in front of E
        n = len(dims_i) + 1
        order = list(range(n - 2)) + [n - 1, n - 2]
        nxt = permute_systems(out.matrix, out.dims.dims, order)
        new_dims = [d_a] + [d_c] * (i + 1) + [d_e]
        before = partial_trace(states[-1], dims_i, [0, i, i + 1])
        after = partial_trace(nxt, new_dims, [0, i + 1, i + 2])
        steps.append(trace_distance(before, after))
        states.append(nxt)
    info = cmi_given_e(s)
    return ExtensionLadder(tuple(states), (d_a, d_c, d_e), recovery, tuple(steps), info, reconstruction_delta(info))


def symmetrized_extension(ladder: ExtensionLadder):
    """(omega_AC, omega_bar) with omega_bar = (1/k!) sum_pi rho^k_{A C_pi(1) .. C_pi(k)}."""
    k = ladder.k
    d_a, d_c, _ = ladder.dims
    dims = [d_a] + [d_c] * k
    rho_ac = partial_trace(ladder.states[-1], ladder.state_dims(k), list(range(k + 1)))
    perms = list(itertools.permutations(range(1, k + 1)))
    bar = sum(permute_systems(rho_ac, dims, [0] + list(p)) for p in perms) / len(perms)
    bar = (bar + bar.conj().T) / 2
    omega = partial_trace(bar, dims, [0, 1])
    return omega, bar


def extension_marginals(bar: np.ndarray, d_a: int, d_c: int, k: int) -> list[np.ndarray]:
    dims = [d_a] + [d_c] * k
    return [partial_trace(bar, dims, [0, j]) for j in range(1, k + 1)]


# -- squashed entanglement ------------------------------------------------------------


@dataclass(frozen=True)
class SquashedBound:
    value: float  # min over extensions of I(A:C|E)/2, in bits
    values: tuple  # per extension, the trivial one first
    best_index: int


def squashed_upper_bound(rho_ac, dims_ac, extensions: Sequence = ()) -> SquashedBound:
    """Upper bound on E_sq from explicit extensions (matrix, (dA, dC, dE)) of rho_AC.

    The trivial extension (E one-dimensional) is always included, giving I(A:C)/2.
    """
    rho_ac = np.asarray(rho_ac, dtype=complex)
    d_a, d_c = dims_ac
    vals = [0.5 * cmi_given_e(rho_ac, (d_a, d_c, 1))]
    for ext in extensions:
        m, dims = ext
        if tuple(dims[:2]) != (d_a, d_c):
            raise DimMismatch("extension dims do not match rho_AC")
        marg = partial_trace(m, dims, [0, 1])
        if np.max(np.abs(marg - rho_ac)) > MARGINAL_TOL:
            raise MarginalMismatch("extension does not reduce to rho_AC")
        vals.append(0.5 * cmi_given_e(m, dims))
    best = int(np.argmin(vals))
    return SquashedBound(float(vals[best]), tuple(vals), best)


def extendibility_distance_bound(e_sq: float, k: int) -> float:
    """(k - 1) sqrt(ln2 / 2 * E_sq)."""
    if e_sq < 0:
        raise OutOfRange("E_sq must be non-negative")
    if k < 1:
        raise OutOfRange("k must be at least 1")
    return (k - 1) * math.sqrt(LN2 / 2 * e_sq)


@dataclass(frozen=True)
class SeparabilityBound:
    bound: float  # 2 dim(C) (2 ln2 E_sq)^{1/4}
    capped: float  # min(bound, 1)
    k_used: Optional[int]  # None means exact separability (E_sq = 0)
    combined: float  # (k-1) sqrt(ln2/2 E_sq) + 2 dim(C)^2 / k at k_used
    exact_separable: bool


def separability_distance_bound(e_sq: float, dim_c: int) -> SeparabilityBound:
    """Distance to the separable set from the k-extendible bound plus 2 dim(C)^2 / k."""
    if e_sq < 0:
        raise OutOfRange("E_sq must be non-negative")
    if e_sq == 0:
        return SeparabilityBound(0.0, 0.0, None, 0.0, True)
    bound = 2 * dim_c * (2 * LN2 * e_sq) ** 0.25
    k = math.ceil((8 / (LN2 * e_sq)) ** 0.25 * dim_c)
    combined = extendibility_distance_bound(e_sq, k) + 2 * dim_c**2 / k
    return SeparabilityBound(bound, min(bound, 1.0), k, combined, False)


# -- antisymmetric state -------------------------------------------------------------


@dataclass(frozen=True)
class AntisymmetricReport:
    d: int
    trials: int
    max_overlap: float
    lower_bound: float  # (1 - max_overlap) / 2

    @property
    def holds(self) -> bool:
        return self.max_overlap <= 0.5 + 1e-9 and self.lower_bound >= 0.25 - 1e-9


def antisymmetric_overlap(sigma_a, sigma_c, proj: Optional[np.ndarray] = None) -> float:
    sigma_a = np.asarray(sigma_a, dtype=complex)
    d = sigma_a.shape[0]
    proj = antisymmetric_projector(d) if proj is None else proj
    return float(np.real(np.trace(np.kron(sigma_a, sigma_c) @ proj)))


def antisymmetric_check(d: int, trials: int, seed: SeedLike) -> AntisymmetricReport:
    """Max of tr((sigma_A (x) sigma_C) Pi_as) over random product states (half pure, half mixed)."""
    if d < 2:
        raise OutOfRange("d must be at least 2")
    if d**4 > MAX_DIM:
        raise TooLarge(f"d^4 = {d ** 4} exceeds {MAX_DIM}")
    rng = as_rng(seed)
    proj = antisymmetric_projector(d)
    best = -math.inf
    for t in range(trials):
        rank = 1 if t % 2 == 0 else None
        a = random_density(d, rank=rank, seed=rng).matrix
        c = random_density(d, rank=rank, seed=rng).matrix
        best = max(best, antisymmetric_overlap(a, c, proj))
    return AntisymmetricReport(d, trials, best, 0.5 * (1 - best))


# -- campaign ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SquashedRow:
    seed: int
    k: int
    cmi_bits: float
    delta: float
    ladder_max_step: float
    final_distance: float
    bound: float
    holds: bool
    extendible_error: float  # max deviation between the k marginals of omega_bar


def squashed_trial(rho_ace, dims, ks: Sequence[int], seed: int, restarts: int, iterations: int) -> list[SquashedRow]:
    """One recovery, ladders for each k, and the chain Delta(rho_AC, omega_AC) <= (k-1)/2 delta."""
    s = _ace(rho_ace, dims)
    d_a, d_c, _ = s.dims.dims
    ch, _ = ladder_recovery(s, restarts=restarts, iterations=iterations, seed=seed)
    rho_ac = s.marginal(["A", "C"]).matrix
    rows = []
    for k in ks:
        ladder = build_extension_ladder(s, None, k, ch)
        omega, bar = symmetrized_extension(ladder)
        margs = extension_marginals(bar, d_a, d_c, k)
        ext_err = max(float(np.max(np.abs(m - margs[0]))) for m in margs)
        dist = trace_distance(rho_ac, omega)
        bound = (k - 1) / 2 * ladder.delta
        rows.append(
            SquashedRow(seed, k, ladder.cmi_bits, ladder.delta, ladder.max_step, dist, bound, dist <= bound + 1e-6, ext_err)
        )
    return rows


def squashed_campaign(
    trials: int,
    ks: Sequence[int] = (2, 3),
    seed: int = 0,
    dims: Sequence[int] = (2, 2, 2),
    restarts: int = 20,
    iterations: int = 500,
) -> list[SquashedRow]:
    children = np.random.SeedSequence(seed).spawn(trials)
    rows = []
    for child in children:
        trial_seed = int(child.generate_state(1)[0])
        rho = random_density(list(dims), seed=trial_seed, labels=["A", "C", "E"])
        rows.extend(squashed_trial(rho, None, ks, trial_seed, restarts, iterations))
    return rows
