"""Scenario certificates and horizon-extension formulas."""
from __future__ import annotations

import heapq
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import gammaln, logsumexp

from .salca import Salca, WindowSet
from .sampler import Dataset


class NumericError(RuntimeError):
    """Root finding did not bracket or converge."""


def _log_binom(n, k):
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def _bisect(f, lo, hi, rtol, max_iter=400):
    """Bisection on ``[lo, hi]`` (in log-violation space) assuming a sign change."""
    flo, fhi = f(lo), f(hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0:
        raise NumericError(f"root not bracketed: f({lo})={flo}, f({hi})={fhi}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        # width in log space equals relative width of the violation level
        if hi - lo <= rtol:
            return 0.5 * (lo + hi)
    raise NumericError("bisection did not converge")


def epsilon(k: int, beta: float, N: int, method: str = "one_sided", rtol: float = 1e-9) -> float:
    """Violation level guaranteed with confidence ``1 - beta`` for complexity ``k`` out of ``N``.

    ``one_sided``: ``1 - t`` where ``t`` solves
    ``beta/N * sum_{i=k}^{N-1} C(i,k) t^(i-k) = C(N,k) t^(N-k)``.
    ``two_sided``: the upper end of the complexity-risk interval, i.e. ``1 - t``
    for the smaller root of ``beta/(2N) sum_{i=k}^{N-1} C(i,k) t^(i-k)
    + beta/(6N) sum_{i=N+1}^{4N} C(i,k) t^(i-k) = C(N,k) t^(N-k)``.
    """
    k, N = int(k), int(N)
    if N < 1 or not 0 <= k <= N:
        raise ValueError(f"need 0 <= k <= N, got k={k}, N={N}")
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if k == N:
        return 1.0
    if method == "one_sided":
        i = np.arange(k, N, dtype=np.float64)
        c = _log_binom(i, k) + math.log(beta / N)
    elif method == "two_sided":
        i1 = np.arange(k, N, dtype=np.float64)
        i2 = np.arange(N + 1, 4 * N + 1, dtype=np.float64)
        i = np.concatenate([i1, i2])
        c = np.concatenate([_log_binom(i1, k) + math.log(beta / (2 * N)),
                            _log_binom(i2, k) + math.log(beta / (6 * N))])
    else:
        raise ValueError(f"unknown method {method!r}")
    power = i - k
    rhs0 = float(_log_binom(float(N), k))

    def g(log_eps):
        log_t = math.log1p(-math.exp(log_eps))
        return float(logsumexp(c + power * log_t)) - (rhs0 + (N - k) * log_t)

    lo, hi = math.log(1e-300), math.log1p(-1e-16)
    if method == "one_sided":
        return math.exp(_bisect(g, lo, hi, rtol))
    # two roots; find an interior point where the balance is negative
    grid = np.linspace(math.log(max(k, 1) / N) - 5, math.log(0.999), 40)
    vals = np.array([g(s) for s in grid])
    j = int(np.argmin(vals))
    if vals[j] >= 0:
        raise NumericError("two-sided equation has no interior root")
    return math.exp(_bisect(g, grid[j], hi, rtol))


def greedy_cover(w: WindowSet) -> np.ndarray:
    """Record ids of a greedy cover of the window set, in selection order.

    Each step takes the record adding the most uncovered windows; ties go to
    the lowest record id. Lazy evaluation is exact because gains only shrink.
    """
    if not w.has_provenance:
        raise ValueError("window set carries no provenance")
    inc = w.incidence
    n_w = len(w)
    covered = np.zeros(n_w + 1, dtype=bool)
    covered[n_w] = True
    gains = (inc < n_w).sum(axis=1)
    heap = list(zip((-gains).tolist(), w.behavior_first_id.tolist(), range(len(inc))))
    heapq.heapify(heap)
    chosen = []
    n_cov = 0
    while n_cov < n_w:
        neg, rid, b = heapq.heappop(heap)
        row = inc[b]
        gain = int(np.count_nonzero(~covered[row]))
        if gain < -neg:
            if gain:
                heapq.heappush(heap, (-gain, rid, b))
            continue
        covered[row] = True
        n_cov += gain
        chosen.append(rid)
    return np.array(chosen, dtype=np.int64)


def complexity_greedy(w: WindowSet, N: int | None = None) -> int:
    """Upper bound on the complexity: size of the greedy cover."""
    s = len(greedy_cover(w))
    if N is not None and s > N:
        raise ValueError("cover larger than the sample count")
    return s


@dataclass
class PacCertificate:
    N: int
    beta: float
    ell: int
    H: int
    s_star: int
    eps: float
    u_card: int
    eps_bar: float
    horizon: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PacCertificate":
        return cls(**d)


def inflate(eps: float, u_card: int, H: int) -> float:
    """Bound over all input sequences: ``min(1, eps * |U|^H)``."""
    return min(1.0, eps * float(u_card) ** H)


def certify(w: WindowSet, N: int, beta: float, u_card: int, H: int,
            method: str = "one_sided") -> PacCertificate:
    s = complexity_greedy(w, N)
    e = epsilon(s, beta, N, method=method)
    return PacCertificate(N=int(N), beta=float(beta), ell=w.ell, H=int(H), s_star=s, eps=e,
                          u_card=int(u_card), eps_bar=inflate(e, u_card, H),
                          horizon={"H": int(H), "method": "sampled"},
                          provenance={"eps_method": method, "eps_rtol": 1e-9})


def empirical_violation(a: Salca, fresh: Dataset) -> float:
    """Fraction of fresh behaviors that the abstraction does not contain."""
    if fresh.N == 0:
        return 0.0
    return float(1.0 - a.contains_batch(fresh.outputs, fresh.inputs).mean())


@dataclass(frozen=True)
class LipschitzConstants:
    """``m_X``: lower (inverse) Lipschitz constant; ``l_X``, ``l_U``: contraction and input constants;
    ``c``, ``q``: norm-equivalence factors; ``n``: state dimension."""

    m_X: float
    l_X: float
    l_U: float
    n: int
    c: float = 1.0
    q: float = 1.0

    @classmethod
    def linear(cls, A, B) -> "LipschitzConstants":
        """Constants of ``x+ = A x + B u`` in the Euclidean norm."""
        sv = np.linalg.svd(np.asarray(A, float), compute_uv=False)
        lu = np.linalg.svd(np.asarray(B, float).reshape(len(sv), -1), compute_uv=False)[0]
        return cls(m_X=float(sv[-1]), l_X=float(sv[0]), l_U=float(lu), n=len(sv))


def lambda_of(consts: LipschitzConstants, u_card: int) -> float:
    if consts.m_X <= 0:
        raise ValueError("m_X must be positive")
    return u_card * (consts.c * consts.q / consts.m_X) ** consts.n


def nu_factor(lam: float, H: int, T: int) -> float:
    """Growth factor of the violation bound when extending an ``H`` certificate by ``T`` steps."""
    if lam <= 0 or H < 1 or T < 1:
        raise ValueError("need lam > 0, H >= 1, T >= 1")
    tau = -(-(H + T + 1) // (H + 1)) - 1
    if lam >= 1:
        return 1.0 + lam ** T * sum(lam ** (-i * (H + 1)) for i in range(tau))
    return lam ** T + sum(lam ** (i * (H + 1)) for i in range(tau))


def _ceil(x: float, tol: float = 1e-9) -> int:
    r = round(x)
    return int(r) if abs(x - r) <= tol * max(1.0, abs(x)) else math.ceil(x)


def contraction_offset(l_X: float, l_U: float, u_sup: float) -> float:
    return l_U / (1.0 - l_X) * u_sup


def contracting_horizon(l_X: float, l_U: float, psi: float, r: float, u_sup: float) -> int:
    """Steps after which every trajectory stays in the ball of radius ``r`` around the fixed point."""
    if not 0 < l_X < 1:
        raise ValueError("l_X must lie in (0, 1)")
    rho = contraction_offset(l_X, l_U, u_sup)
    if r <= rho:
        raise ValueError(f"ball too small: r={r} <= rho={rho}")
    lg = math.log(l_X)
    return _ceil(math.log(r - rho) / lg - math.log(psi) / lg)


def extend_nu(cert: PacCertificate, lam: float, T: int) -> PacCertificate:
    nu = nu_factor(lam, cert.H, T)
    return replace(cert, eps_bar=min(1.0, nu * cert.eps_bar),
                   horizon={"H": cert.H + T, "method": "nu", "nu": nu, "lambda": lam, "T": T})


def extend_contracting(cert: PacCertificate, consts: LipschitzConstants, psi: float,
                       r: float, u_sup: float) -> tuple[PacCertificate, int]:
    kbar = contracting_horizon(consts.l_X, consts.l_U, psi, r, u_sup)
    note = {"method": "contracting", "kbar": kbar, "r": r, "u_sup": u_sup, "psi": psi,
            "rho": contraction_offset(consts.l_X, consts.l_U, u_sup)}
    if cert.H >= kbar:
        note.update(H="unbounded", valid=True)
    else:
        note.update(H=cert.H, valid=False, resample_H=kbar)
    return replace(cert, horizon=note), kbar
