"""Spectra of tensor powers via type classes: masses, typical sets and eigenvalue counts.

Nothing here builds a d^n-dimensional operator; everything is indexed by compositions
(n_r) of n over the distinct non-zero eigenvalues r of rho.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import MarginalMismatch, OutOfRange, TooManyTypes
from .linalg import SUPPORT_CUTOFF, hermitian_eig, partial_trace

GROUP_TOL = 1e-9
MAX_TYPES = 10_000_000
LN2 = math.log(2.0)


def group_values(values: Sequence[float], rel_tol: float = GROUP_TOL):
    """Merge numerically equal positive values; returns (distinct values desc, multiplicities)."""
    v = np.sort(np.asarray(values, dtype=float))[::-1]
    v = v[v > SUPPORT_CUTOFF * max(v.max(initial=0.0), 1e-300)]
    distinct: list[float] = []
    mult: list[int] = []
    for x in v:
        if distinct and abs(distinct[-1] - x) <= rel_tol * distinct[-1]:
            # keep a running mean so the representative does not drift to one end
            k = mult[-1]
            distinct[-1] = (distinct[-1] * k + x) / (k + 1)
            mult[-1] = k + 1
        else:
            distinct.append(float(x))
            mult.append(1)
    return np.array(distinct), np.array(mult, dtype=np.int64)


def distinct_spectrum(rho, rel_tol: float = GROUP_TOL):
    w = hermitian_eig(np.asarray(rho, dtype=complex)).eigenvalues
    return group_values(np.clip(w, 0.0, None), rel_tol)


def type_count(n: int, k: int) -> int:
    return math.comb(n + k - 1, n) if k > 0 else 0


def compositions(n: int, k: int) -> np.ndarray:
    """All (n_1, ..., n_k) with non-negative entries summing to n, lexicographically descending."""
    if k <= 0:
        return np.zeros((0, 0), dtype=np.int64)
    count = type_count(n, k)
    if count > MAX_TYPES:
        raise TooManyTypes(f"{count} type classes exceed the limit of {MAX_TYPES}")
    if k == 1:
        return np.array([[n]], dtype=np.int64)
    # level-by-level construction: rows are partial compositions with their remainders
    rows = np.array([[a] for a in range(n, -1, -1)], dtype=np.int64)
    for _ in range(k - 2):
        rem = n - rows.sum(axis=1)
        reps = rem + 1
        base = np.repeat(rows, reps, axis=0)
        # for each parent, next entry runs rem, rem-1, ..., 0
        offsets = np.concatenate([np.arange(r, -1, -1) for r in rem])
        rows = np.column_stack([base, offsets])
    last = n - rows.sum(axis=1)
    return np.column_stack([rows, last])


def log_multinomial(counts: np.ndarray) -> np.ndarray:
    counts = np.atleast_2d(counts)
    n = counts.sum(axis=1)
    return gammaln(n + 1) - gammaln(counts + 1).sum(axis=1)


@dataclass(frozen=True)
class TypeClass:
    """Composition of n over distinct eigenvalues r with multiplicities d_r."""

    counts: tuple
    values: tuple
    multiplicities: tuple

    @property
    def n(self) -> int:
        return int(sum(self.counts))

    @property
    def log2_eigenvalue(self) -> float:
        return float(sum(c * math.log2(r) for c, r in zip(self.counts, self.values)))

    @property
    def eigenvalue(self) -> float:
        return 2.0 ** self.log2_eigenvalue

    @property
    def log_mass(self) -> float:
        c = np.array(self.counts)
        lm = float(log_multinomial(c)[0])
        return lm + float(sum(k * math.log(d * r) for k, d, r in zip(self.counts, self.multiplicities, self.values)))

    @property
    def mass(self) -> float:
        return math.exp(self.log_mass)


@dataclass(frozen=True)
class TypeTable:
    """Vectorized description of all type classes of rho^{(x)n}."""

    n: int
    values: np.ndarray
    multiplicities: np.ndarray
    counts: np.ndarray  # (N, k)
    log_eig: np.ndarray  # natural log of prod r^{n_r}
    log_mass: np.ndarray  # natural log of multinomial * prod (d_r r)^{n_r}

    def __len__(self) -> int:
        return self.counts.shape[0]

    @property
    def log2_eig(self) -> np.ndarray:
        return self.log_eig / LN2

    def classes(self) -> list[TypeClass]:
        vals, mults = tuple(self.values.tolist()), tuple(int(m) for m in self.multiplicities)
        return [TypeClass(tuple(int(x) for x in row), vals, mults) for row in self.counts]


def type_table(values, multiplicities, n: int) -> TypeTable:
    if n < 1:
        raise OutOfRange("n must be at least 1")
    values = np.asarray(values, dtype=float)
    multiplicities = np.asarray(multiplicities, dtype=np.int64)
    counts = compositions(n, values.size)
    log_eig = counts @ np.log(values)
    log_mass = log_multinomial(counts) + counts @ np.log(multiplicities * values)
    return TypeTable(n, values, multiplicities, counts, log_eig, log_mass)


def spectrum_type_table(rho, n: int) -> TypeTable:
    values, mults = distinct_spectrum(rho)
    return type_table(values, mults, n)


def spectrum_types(rho, n: int) -> list[TypeClass]:
    """Every type class of rho^{(x)n}, i.e. every eigenvalue block prod r^{n_r}."""
    return spectrum_type_table(rho, n).classes()


def total_log_mass(table: TypeTable) -> float:
    return float(logsumexp(table.log_mass))


def _entropy_bits(values, mults) -> float:
    p = values * mults
    s = p.sum()
    # entropy of the normalized spectrum
    return float(-np.sum(mults * (values / s) * np.log2(values / s)))


@dataclass(frozen=True)
class TypicalMass:
    n: int
    delta: float
    mass: float
    complement_log2: float  # log2 of the atypical mass, -inf if none


def typical_mass_report(rho, n: int, delta: float, rel_tol: float = 1e-12) -> TypicalMass:
    """Mass of rho^{(x)n} on eigenvalues in [2^{-n(H+delta)}, 2^{-n(H-delta)}] (closed interval).

    The atypical mass is summed directly in log space so that tiny complements survive.
    """
    if delta <= 0:
        raise OutOfRange("delta must be positive")
    values, mults = distinct_spectrum(rho)
    table = type_table(values, mults, n)
    h = _entropy_bits(values, mults)
    lo, hi = -n * (h + delta), -n * (h - delta)
    slack = rel_tol * max(1.0, n * (h + delta))
    le = table.log2_eig
    inside = (le >= lo - slack) & (le <= hi + slack)
    mass = float(np.exp(logsumexp(table.log_mass[inside]))) if inside.any() else 0.0
    if (~inside).any():
        comp = float(logsumexp(table.log_mass[~inside]) / LN2)
    else:
        comp = -math.inf
    return TypicalMass(n, float(delta), mass, comp)


def typical_mass(rho, n: int, delta: float) -> float:
    return typical_mass_report(rho, n, delta).mass


def distinct_eigenvalue_count(rho, n: int, rel_tol: float = 1e-12) -> int:
    """|S_n|: number of distinct eigenvalues of rho^{(x)n} after relative merging."""
    table = spectrum_type_table(rho, n)
    le = np.sort(table.log_eig)
    if le.size == 0:
        return 0
    # equal products accumulate rounding proportional to n |log r|
    tol = max(rel_tol, 4e-16 * n * float(np.max(np.abs(np.log(table.values)), initial=1.0)))
    return int(1 + np.count_nonzero(np.diff(le) > tol))


def rank_bound(rho, n: int) -> int:
    """(n+1)^rank(rho)."""
    _, mults = distinct_spectrum(rho)
    return (n + 1) ** int(mults.sum())


@dataclass(frozen=True)
class DecayFit:
    ns: tuple
    complement_log2: tuple
    kappa: float  # largest rate with 1 - mass(n) <= 2^{-kappa n} at every n
    slope: float  # least-squares slope of log2(1 - mass) against n


def complement_decay(rho, delta: float, ns: Iterable[int] = (50, 100, 200, 400)) -> DecayFit:
    ns = tuple(int(n) for n in ns)
    comps = tuple(typical_mass_report(rho, n, delta).complement_log2 for n in ns)
    rates = [-c / n for c, n in zip(comps, ns)]
    kappa = float(min(rates))
    if all(math.isfinite(c) for c in comps) and len(ns) > 1:
        slope = float(np.polyfit(np.array(ns, float), np.array(comps), 1)[0])
    else:
        slope = -math.inf
    return DecayFit(ns, comps, kappa, slope)


@dataclass(frozen=True)
class PairMasses:
    n: int
    mass_b: float
    mass_bc: float
    n_min: Optional[int]  # smallest n with both masses >= 1 - eta (None if not found)


def projector_pair_masses(
    rho_b,
    rho_bc,
    dims,
    n: int,
    delta_b: float,
    delta_bc: float,
    eta: Optional[float] = None,
    n_max: int = 400,
) -> PairMasses:
    """Typical masses of rho_B^{(x)n} and rho_BC^{(x)n}; optionally the first n where both reach 1 - eta."""
    rho_b = np.asarray(rho_b, dtype=complex)
    rho_bc = np.asarray(rho_bc, dtype=complex)
    if np.max(np.abs(partial_trace(rho_bc, dims, [0]) - rho_b)) > 1e-8:
        raise MarginalMismatch("rho_B is not the B marginal of rho_BC")
    mb = typical_mass(rho_b, n, delta_b)
    mbc = typical_mass(rho_bc, n, delta_bc)
    n_min = None
    if eta is not None:
        for m in range(1, n_max + 1):
            if typical_mass(rho_b, m, delta_b) >= 1 - eta and typical_mass(rho_bc, m, delta_bc) >= 1 - eta:
                n_min = m
                break
    return PairMasses(n, mb, mbc, n_min)
