"""One-shot relative entropies: hypothesis testing divergence, max-divergence and classical smoothing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .entropies import relative_entropy, trace_distance
from .errors import EpsilonOutOfRange, NotApplicable, OutOfRange, PreconditionViolated, TooLarge
from .linalg import SUPPORT_CUTOFF, hermitian_eig, kron, min_eigenvalue
from .typicality import LN2, compositions, log_multinomial

MAX_DIM = 4096
COMMUTE_TOL = 1e-10


def _mat(x) -> np.ndarray:
    m = getattr(x, "matrix", x)
    return np.asarray(m, dtype=complex)


@dataclass(frozen=True)
class HypothesisTestResult:
    value_bits: float
    Q: np.ndarray
    dual_mu: float
    dual_Y: np.ndarray
    duality_gap: float  # (primal - dual) / primal on the 2^{-D} scale
    primal: float  # tr(Q sigma) / eps
    dual: float  # mu (1 - tr(Y) / eps)
    epsilon: float


def _positive_projector(m: np.ndarray, tol: float) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    vp = v[:, w > tol]
    return vp @ vp.conj().T


def _dual_value(mu: float, rho, sigma, eps: float):
    """mu (1 - tr(Y)/eps) with the optimal Y = (rho - sigma/mu)_+ for this mu."""
    if mu <= 0:
        return 0.0, np.zeros_like(rho)
    w, v = np.linalg.eigh((rho - sigma / mu + (rho - sigma / mu).conj().T) / 2)
    pos = w > 0
    y = (v[:, pos] * w[pos]) @ v[:, pos].conj().T
    return mu * (1.0 - float(np.sum(w[pos])) / eps), y


def hypothesis_divergence(rho, sigma, eps: float, rel_tol: float = 1e-13) -> HypothesisTestResult:
    """D_H^eps(rho||sigma) with 2^{-D} = min tr(Q sigma)/eps over 0 <= Q <= I, tr(Q rho) >= eps.

    The optimal test has Neyman-Pearson form built from projectors P_+(mu rho - sigma). The
    threshold mu is bisected until tr(Q rho) = eps is met by mixing the projectors at the two
    bracket ends; the bracket ends also give feasible points of the dual program, so the
    reported gap certifies the value.
    """
    rho, sigma = _mat(rho), _mat(sigma)
    tr_rho = float(np.trace(rho).real)
    if not (0 < eps <= tr_rho * (1 + 1e-12)):
        raise EpsilonOutOfRange(f"eps={eps} outside (0, tr rho = {tr_rho}]")
    if np.max(np.abs(sigma)) == 0:
        raise OutOfRange("sigma must be non-zero")
    d = rho.shape[0]
    scale = max(np.linalg.norm(rho, 2), np.linalg.norm(sigma, 2))
    tol = SUPPORT_CUTOFF * scale

    # tests that never see sigma
    ws, vs = np.linalg.eigh((sigma + sigma.conj().T) / 2)
    ker = vs[:, ws <= tol * 1e3]
    if ker.shape[1]:
        k_proj = ker @ ker.conj().T
        k_mass = float(np.trace(k_proj @ rho).real)
        if k_mass >= eps * (1 - 1e-12):
            q = (eps / k_mass) * k_proj
            return HypothesisTestResult(math.inf, q, 0.0, np.zeros_like(rho), 0.0, 0.0, 0.0, eps)

    def accepted_mass(mu):
        p = _positive_projector(mu * rho - sigma, tol * max(mu, 1.0))
        return float(np.trace(p @ rho).real), p

    lo, hi = 0.0, 1.0
    f_hi, p_hi = accepted_mass(hi)
    p_lo = np.zeros((d, d), dtype=complex)
    f_lo = 0.0
    grow = 0
    while f_hi < eps and grow < 2000:
        lo, f_lo, p_lo = hi, f_hi, p_hi
        hi *= 2.0
        f_hi, p_hi = accepted_mass(hi)
        grow += 1
    if f_hi < eps:
        # eps equals tr(rho) up to rounding: the support projector of rho is optimal
        wr, vr = np.linalg.eigh((rho + rho.conj().T) / 2)
        vp = vr[:, wr > tol]
        q = vp @ vp.conj().T
        primal = float(np.trace(q @ sigma).real) / eps
        dual, y = _dual_value(hi, rho, sigma, eps)
        gap = (primal - dual) / primal if primal > 0 else 0.0
        return HypothesisTestResult(-math.log2(primal), q, hi, y, gap, primal, dual, eps)
    for _ in range(400):
        if hi - lo <= rel_tol * hi:
            break
        mid = 0.5 * (lo + hi)
        f_mid, p_mid = accepted_mass(mid)
        if f_mid >= eps:
            hi, f_hi, p_hi = mid, f_mid, p_mid
        else:
            lo, f_lo, p_lo = mid, f_mid, p_mid
    # mix the two bracket tests so that tr(Q rho) = eps exactly
    t = 1.0 if f_hi - f_lo <= 0 else (eps - f_lo) / (f_hi - f_lo)
    t = min(max(t, 0.0), 1.0)
    q = (1 - t) * p_lo + t * p_hi
    primal = float(np.trace(q @ sigma).real) / eps
    d_lo, y_lo = _dual_value(lo, rho, sigma, eps)
    d_hi, y_hi = _dual_value(hi, rho, sigma, eps)
    if d_lo >= d_hi:
        dual, mu, y = d_lo, lo, y_lo
    else:
        dual, mu, y = d_hi, hi, y_hi
    if primal <= 0:
        return HypothesisTestResult(math.inf, q, mu, y, 0.0, 0.0, dual, eps)
    gap = (primal - dual) / primal
    return HypothesisTestResult(-math.log2(primal), q, mu, y, gap, primal, dual, eps)


def max_divergence(rho, sigma) -> float:
    """log2 min{lambda : rho <= lambda sigma}; +inf if supp(rho) is not inside supp(sigma)."""
    rho, sigma = _mat(rho), _mat(sigma)
    dec = hermitian_eig(sigma)
    w, v = dec.eigenvalues, dec.eigenvectors
    cut = SUPPORT_CUTOFF * max(np.max(np.abs(w), initial=0.0), 1e-300)
    on = w > cut
    off = v[:, ~on]
    if off.size and np.linalg.norm(off.conj().T @ rho @ off, 2) > 1e-9 * max(np.linalg.norm(rho, 2), 1e-300):
        return math.inf
    vs = v[:, on] / np.sqrt(w[on])
    m = vs.conj().T @ rho @ vs
    top = float(np.linalg.eigvalsh((m + m.conj().T) / 2)[-1])
    if top <= 0:
        return -math.inf
    return math.log2(top)


# -- classical smoothing ---------------------------------------------------------------


def _waterfill_fidelity(log_lam: float, log_p, log_q, log_mult) -> float:
    """max sum_i m_i sqrt(r_i p_i) over 0 <= r_i <= lam q_i with sum_i m_i r_i <= 1.

    The maximizer is r_i = min(c p_i, lam q_i); the level c >= 1 is fixed by the
    normalization. Entry i saturates once c exceeds lam q_i / p_i.
    """
    log_cap = log_lam + log_q - log_p
    order = np.argsort(log_cap)
    lc = log_cap[order]
    lp = log_p[order] + log_mult[order]
    lq = log_q[order] + log_mult[order] + log_lam
    n = lc.size
    # with the j lowest caps saturated: c_j = (1 - sum_{i<j} m lam q) / sum_{i>=j} m p
    capped = np.concatenate([[-np.inf], np.logaddexp.accumulate(lq)])
    free = np.concatenate([np.logaddexp.accumulate(lp[::-1])[::-1], [-np.inf]])
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        cap_mass = np.exp(capped)
        c_log = np.log1p(-np.minimum(cap_mass, 1.0)) - free
    c_log[n] = np.inf
    valid = c_log[:n] <= lc
    j = int(np.argmax(valid)) if valid.any() else n
    level = max(float(c_log[j]), 0.0)
    terms = []
    if j < n:
        terms.append(0.5 * level + logsumexp(lp[j:]))
    if j > 0:
        idx = order[:j]
        terms.append(logsumexp(log_mult[idx] + 0.5 * (log_lam + log_q[idx] + log_p[idx])))
    return float(math.exp(logsumexp(terms)))


def _smooth_dmax_log(log_p, log_q, log_mult, eps: float) -> float:
    if not 0.0 <= eps < 1.0:
        raise EpsilonOutOfRange("eps must lie in [0, 1)")
    finite_q = np.isfinite(log_q)
    if eps == 0.0:
        if not finite_q.all():
            return math.inf
        return float(np.max(log_p - log_q)) / LN2
    if not finite_q.any():
        return math.inf
    target = math.sqrt(1.0 - eps * eps)
    # entries with q = 0 must be dropped from r; the rest of p may still be close enough
    reachable = math.exp(0.5 * float(logsumexp(log_p[finite_q] + log_mult[finite_q])))
    if reachable < target:
        return math.inf
    hi = float(np.max(log_p[finite_q] - log_q[finite_q]))
    step = 1.0
    while _waterfill_fidelity(hi, log_p, log_q, log_mult) < target:
        hi += step
        step *= 2
    lo = hi - 1.0
    while _waterfill_fidelity(lo, log_p, log_q, log_mult) >= target:
        lo -= 2 * (hi - lo)
        if lo < -1e4:
            return -math.inf
    for _ in range(200):
        if hi - lo <= 1e-13 * max(1.0, abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if _waterfill_fidelity(mid, log_p, log_q, log_mult) >= target:
            hi = mid
        else:
            lo = mid
    return hi / LN2


def _diagonal(x) -> Optional[np.ndarray]:
    m = np.asarray(getattr(x, "matrix", x))
    if m.ndim == 1:
        return m.astype(float)
    if np.max(np.abs(m - np.diag(np.diag(m)))) > COMMUTE_TOL:
        return None
    return np.real(np.diag(m)).astype(float)


def smooth_max_divergence_classical(p, q, eps: float) -> float:
    """D_max^eps(p||q) for commuting (diagonal) inputs.

    2^{-D} = sup mu subject to mu r <= q, sum r <= 1, sum sqrt(r p) >= sqrt(1 - eps^2); the optimal
    r is a water-filling min(c p, lambda q) and lambda = 1/mu is bisected.
    """
    pv, qv = _diagonal(p), _diagonal(q)
    if pv is None or qv is None:
        raise NotApplicable("smooth max-divergence is only solved exactly for diagonal inputs")
    keep = pv > 0
    with np.errstate(divide="ignore"):
        log_p = np.log(pv[keep])
        log_q = np.log(qv[keep])
    return _smooth_dmax_log(log_p, log_q, np.zeros(log_p.size), eps)


def _joint_diagonal(rho, sigma):
    """Common eigenbasis weights (p_i, q_i) of commuting Hermitian rho and sigma, else None."""
    rho, sigma = _mat(rho), _mat(sigma)
    if np.max(np.abs(rho @ sigma - sigma @ rho)) > COMMUTE_TOL * max(1.0, np.linalg.norm(sigma, 2)):
        return None
    mix = rho + (math.sqrt(5) - 1) / 2 * sigma
    _, v = np.linalg.eigh((mix + mix.conj().T) / 2)
    pr = v.conj().T @ rho @ v
    sg = v.conj().T @ sigma @ v
    off = max(np.max(np.abs(pr - np.diag(np.diag(pr)))), np.max(np.abs(sg - np.diag(np.diag(sg)))))
    if off > 1e-9:
        return None
    return np.real(np.diag(pr)), np.real(np.diag(sg))


def _letters(p: np.ndarray, q: np.ndarray):
    """Group equal (p_i, q_i) pairs into letters with multiplicities."""
    pairs: dict = {}
    for a, b in zip(p, q):
        if a <= SUPPORT_CUTOFF and b <= SUPPORT_CUTOFF:
            continue
        key = (round(float(a), 12), round(float(b), 12))
        pairs[key] = pairs.get(key, 0) + 1
    items = sorted(pairs.items(), reverse=True)
    pa = np.array([k[0] for k, _ in items])
    qa = np.array([k[1] for k, _ in items])
    ma = np.array([m for _, m in items], dtype=np.int64)
    return pa, qa, ma


def _product_types(p: np.ndarray, q: np.ndarray, n: int):
    """Type classes of (p^{(x)n}, q^{(x)n}): per-element log p, log q and log multiplicity."""
    pa, qa, ma = _letters(p, q)
    counts = compositions(n, pa.size)
    with np.errstate(divide="ignore"):
        lpa, lqa = np.log(pa), np.log(qa)
    log_mult = log_multinomial(counts) + counts @ np.log(ma.astype(float))
    lp = _safe_dot(counts, lpa)
    lq = _safe_dot(counts, lqa)
    return lp, lq, log_mult


def _safe_dot(counts, logs):
    # 0 * log 0 counts as 0
    out = np.zeros(counts.shape[0])
    for j, lv in enumerate(logs):
        c = counts[:, j]
        if np.isfinite(lv):
            out += c * lv
        else:
            out = np.where(c > 0, -np.inf, out)
    return out


def classical_hypothesis_divergence_types(p, q, n: int, eps: float) -> float:
    """D_H^eps(p^{(x)n} || q^{(x)n}) by Neyman-Pearson on type classes (no d^n arrays)."""
    p, q = np.asarray(p, float), np.asarray(q, float)
    lp, lq, lm = _product_types(p, q, n)
    keep = np.isfinite(lp)
    lp, lq, lm = lp[keep], lq[keep], lm[keep]
    ratio = lp - lq
    order = np.argsort(-ratio, kind="stable")
    mass = np.exp(lm[order] + lp[order])
    cum = np.cumsum(mass)
    j = int(np.searchsorted(cum, eps * (1 - 1e-15)))
    j = min(j, mass.size - 1)
    before = cum[j - 1] if j > 0 else 0.0
    frac = (eps - before) / mass[j]
    frac = min(max(frac, 0.0), 1.0)
    lq_sorted = lm[order] + lq[order]
    parts = []
    if j > 0:
        parts.append(logsumexp(lq_sorted[:j]))
    if frac > 0 and np.isfinite(lq_sorted[j]):
        parts.append(math.log(frac) + lq_sorted[j])
    if not parts:
        return math.inf
    log_beta = logsumexp(parts)
    if not np.isfinite(log_beta):
        return math.inf
    return float(-(log_beta - math.log(eps)) / LN2)


def smooth_max_divergence_product(p, q, n: int, eps: float) -> float:
    """D_max^eps(p^{(x)n} || q^{(x)n}) for diagonal p, q, solved on type classes."""
    p, q = np.asarray(p, float), np.asarray(q, float)
    lp, lq, lm = _product_types(p, q, n)
    keep = np.isfinite(lp)
    return _smooth_dmax_log(lp[keep], lq[keep], lm[keep], eps)


# -- lemma checks ------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool


def dh_upper_bound_check(rho, rho_bar, sigma, lam: float, eps: float) -> BoundCheck:
    """D_H^eps(rho||sigma) <= log2(lam) - log2(1 - Delta(rho, rho_bar)/eps) whenever rho_bar <= lam sigma."""
    rho, rho_bar, sigma = _mat(rho), _mat(rho_bar), _mat(sigma)
    if lam <= 0 or min_eigenvalue(lam * sigma - rho_bar) < -1e-8:
        raise PreconditionViolated("rho_bar <= lam * sigma does not hold")
    delta = trace_distance(rho, rho_bar)
    if delta >= eps:
        raise PreconditionViolated(f"Delta(rho, rho_bar) = {delta:.6g} is not below eps")
    lhs = hypothesis_divergence(rho, sigma, eps).value_bits
    rhs = math.log2(lam) - math.log2(1.0 - delta / eps)
    return BoundCheck(lhs, rhs, bool(lhs <= rhs + 1e-8))


def dh_dmax_check(p, q, eps: float, eps_prime: float) -> BoundCheck:
    """D_H^eps(p||q) <= D_max^{eps'}(p||q) + log2(eps/(eps - eps')) for diagonal inputs."""
    if not 0 <= eps_prime < eps:
        raise PreconditionViolated("need eps > eps' >= 0")
    p, q = np.asarray(p, float), np.asarray(q, float)
    lhs = hypothesis_divergence(np.diag(p), np.diag(q), eps).value_bits
    rhs = smooth_max_divergence_classical(p, q, eps_prime) + math.log2(eps / (eps - eps_prime))
    return BoundCheck(lhs, rhs, bool(lhs <= rhs + 1e-8))


# -- asymptotics ------------------------------------------------------------------------


@dataclass(frozen=True)
class AepRow:
    n: int
    value_bits: float  # D_H^eps(rho^{(x)n} || sigma^{(x)n}) / n
    d_limit: float  # D(rho||sigma)
    epsilon: float


def tensor_power(m, n: int) -> np.ndarray:
    return kron(*([m] * n))


def aep_trace(rho, sigma, eps: float, n_list: Iterable[int]) -> list[AepRow]:
    """Normalized D_H^eps of tensor powers for each n.

    Commuting pairs use type classes (n up to ~1e4); otherwise explicit tensor powers are
    formed, which requires d^n <= 4096.
    """
    rho, sigma = _mat(rho), _mat(sigma)
    limit = relative_entropy(rho, sigma)
    joint = _joint_diagonal(rho, sigma)
    rows = []
    for n in n_list:
        n = int(n)
        if joint is not None:
            v = classical_hypothesis_divergence_types(joint[0], joint[1], n, eps)
        else:
            if rho.shape[0] ** n > MAX_DIM:
                raise TooLarge(f"d^n = {rho.shape[0]}^{n} exceeds {MAX_DIM}")
            v = hypothesis_divergence(tensor_power(rho, n), tensor_power(sigma, n), eps).value_bits
        rows.append(AepRow(n, v / n, limit, float(eps)))
    return rows


@dataclass(frozen=True)
class DaepCheck:
    c: float  # fitted at n_fit
    d_limit: float
    rows: tuple  # (n, normalized D_max^eps, bound, holds)

    @property
    def holds(self) -> bool:
        return all(r[3] for r in self.rows)


def daep_check(p, q, eps: float, n_fit: int = 100, n_verify: Sequence[int] = (400, 1600, 6400)) -> DaepCheck:
    """Fit c in (1/n) D_max^eps <= D + c sqrt(log2(2/eps^2)/n) at n_fit and test it at larger n."""
    p, q = np.asarray(p, float), np.asarray(q, float)
    limit = relative_entropy(np.diag(p), np.diag(q))
    shape = math.log2(2.0 / eps**2)

    def normalized(n):
        return smooth_max_divergence_product(p, q, n, eps) / n

    c = (normalized(n_fit) - limit) / math.sqrt(shape / n_fit)
    rows = []
    for n in n_verify:
        v = normalized(n)
        bound = limit + c * math.sqrt(shape / n)
        rows.append((int(n), v, bound, bool(v <= bound + 1e-12)))
    return DaepCheck(float(c), limit, tuple(rows))
