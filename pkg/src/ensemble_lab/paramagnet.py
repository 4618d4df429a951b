"""Exact computations for the discrete paramagnet.

States are spin configurations in {-1,+1}^N.  The fixed-magnetization
ensemble is the uniform measure on S_m = {phi : sum phi_x = m N}; the
fluctuating-magnetization ensemble is the i.i.d. product measure with
single-site weights proportional to e^{-mu phi_x}.  Everything here is
exact combinatorics: partition functions via log-gamma (with a big-integer
fallback used as a test oracle), local expectations via the hypergeometric
restriction of the uniform measure, relative entropy in closed form, the
explicit spin-flip optimal coupling, and the fixed-energy split of the
Curie-Weiss Hamiltonian into fixed-magnetization components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product as iter_product

import numpy as np

from .coupling import LocalObservable
from .errors import CapacityError, DomainError

__all__ = [
    "ParamagnetParams",
    "CurieWeissParams",
    "snap_magnetization",
    "log_z_mc",
    "log_z_mc_exact",
    "canonical_scalars",
    "CanonicalScalars",
    "mc_local_expectation",
    "c_local_expectation",
    "specific_relative_entropy",
    "F_of",
    "pinsker_bound",
    "sample_optimal_coupling",
    "energy_split",
    "EnergySplit",
]

_SNAP_TOL = 1e-9
_MAX_LOCAL = 20


@dataclass(frozen=True)
class ParamagnetParams:
    N: int
    m: float
    mu: float = 0.0

    def __post_init__(self):
        if self.N < 1:
            raise DomainError("N must be a positive integer")
        object.__setattr__(self, "m", snap_magnetization(self.m, self.N))


@dataclass(frozen=True)
class CurieWeissParams:
    """Mean-field Hamiltonian data H[phi] = -(J/2N) M^2 - h M."""

    J: float
    h: float = 0.0

    def __post_init__(self):
        if self.J <= 0:
            raise DomainError("J must be positive")


def snap_magnetization(m: float, N: int) -> float:
    """Snap m onto the admissible grid {-1 + 2k/N : k = 0..N} or fail.

    Values within 1e-9 of a grid point are snapped; anything further off is
    rejected with the nearest admissible density named in the message.
    """
    k = (1.0 + m) * N / 2.0
    k_round = round(k)
    if k_round < 0 or k_round > N or abs(k - k_round) > _SNAP_TOL * max(1, N):
        nearest = 2.0 * min(max(k_round, 0), N) / N - 1.0
        raise DomainError(
            f"m={m} not an admissible magnetization density for N={N}; "
            f"nearest admissible value is {nearest}"
        )
    return 2.0 * k_round / N - 1.0


def _k_plus(m: float, N: int) -> int:
    return round((1.0 + snap_magnetization(m, N)) * N / 2.0)


def log_z_mc(m: float, N: int) -> float:
    """ln of the fixed-magnetization partition function binom(N, (1+m)N/2)."""
    k = _k_plus(m, N)
    return math.lgamma(N + 1) - math.lgamma(k + 1) - math.lgamma(N - k + 1)


def log_z_mc_exact(m: float, N: int) -> float:
    """Big-integer evaluation of the same quantity; test oracle for N <= 64."""
    if N > 64:
        raise CapacityError("exact big-integer route is reserved for N <= 64")
    return math.log(math.comb(N, _k_plus(m, N)))


@dataclass(frozen=True)
class CanonicalScalars:
    log_Z_C: float
    f_C: float
    mean_mdensity: float
    sigma_mdensity: float


def canonical_scalars(mu: float, N: int) -> CanonicalScalars:
    """Partition function, free energy density and magnetization statistics
    of the product ensemble with potential mu."""
    log2cosh = math.log(2.0) + math.log(math.cosh(mu)) if abs(mu) < 350 else abs(mu) + math.log1p(math.exp(-2 * abs(mu)))
    t = math.tanh(mu)
    return CanonicalScalars(
        log_Z_C=N * log2cosh,
        f_C=-log2cosh,
        mean_mdensity=-t,
        sigma_mdensity=math.sqrt(1.0 - t * t) / math.sqrt(N),
    )


def _pattern_iter(n: int):
    return iter_product((1, -1), repeat=n)


def mc_local_expectation(f: LocalObservable, m: float, N: int) -> float:
    """Exact expectation of a local observable under the uniform measure on S_m.

    The restriction of the uniform fixed-magnetization measure to n = |I|
    sites puts hypergeometric weight C(K+, k) C(N-K+, n-k) / C(N, n) on the
    event of k positive spins, shared equally among the C(n, k) sign
    patterns.  The sum over the 2^n patterns is carried out in exact rational
    arithmetic so the result is correct to rounding.
    """
    n = f.size
    if n > _MAX_LOCAL:
        raise CapacityError(f"|I|={n} exceeds the 2^{_MAX_LOCAL} enumeration capacity")
    if n > N:
        raise DomainError("|I| cannot exceed N")
    kp = _k_plus(m, N)
    # weight of one specific pattern with k plusses
    pattern_weight = {}
    for k in range(n + 1):
        num = Fraction(math.comb(kp, k) * math.comb(N - kp, n - k), math.comb(N, n))
        pattern_weight[k] = num / math.comb(n, k)
    total = 0.0
    for pattern in _pattern_iter(n):
        k = sum(1 for s in pattern if s == 1)
        w = pattern_weight[k]
        if w:
            total += float(w) * f(np.array(pattern, dtype=float))
    return total


def c_local_expectation(f: LocalObservable, mu: float) -> float:
    """Exact expectation under the product measure P(phi_x = +1) = e^{-mu}/(2 cosh mu)."""
    n = f.size
    if n > _MAX_LOCAL:
        raise CapacityError(f"|I|={n} exceeds the 2^{_MAX_LOCAL} enumeration capacity")
    p_plus = math.exp(-mu) / (2.0 * math.cosh(mu))
    p_minus = 1.0 - p_plus
    total = 0.0
    for pattern in _pattern_iter(n):
        w = 1.0
        for s in pattern:
            w *= p_plus if s == 1 else p_minus
        total += w * f(np.array(pattern, dtype=float))
    return total


def specific_relative_entropy(m: float, mu: float, N: int) -> float:
    """Relative entropy per site of the fixed-magnetization measure w.r.t.
    the product measure: H/N = mu m + ln(2 cosh mu) - (1/N) ln Z_MC."""
    m = snap_magnetization(m, N)
    if abs(m) == 1.0:
        raise DomainError("m = +-1 is a degenerate (single-point) ensemble")
    log2cosh = math.log(2.0 * math.cosh(mu))
    return mu * m + log2cosh - log_z_mc(m, N) / N


def _xlogx(x: float) -> float:
    return 0.0 if x == 0.0 else x * math.log(x)


def F_of(m: float, mu: float) -> float:
    """Large-N limit of the specific relative entropy.

    F(m, mu) = ln 2 + ln cosh mu + mu m + sum over signs of
    ((1 +- m)/2) ln((1 +- m)/2), with the 0 ln 0 := 0 convention; F >= 0
    with equality exactly at mu = atanh(-m).
    """
    if not -1.0 <= m <= 1.0:
        raise DomainError("m must lie in [-1, 1]")
    return (
        math.log(2.0)
        + math.log(math.cosh(mu))
        + mu * m
        + _xlogx((1.0 + m) / 2.0)
        + _xlogx((1.0 - m) / 2.0)
    )


def pinsker_bound(f: LocalObservable, m: float, mu: float, N: int) -> float:
    """Total-variation route: sqrt(2 |I|) sup|f| sqrt(H/N)."""
    if f.sup_bound is None:
        raise DomainError("pinsker_bound requires a bounded observable")
    hn = specific_relative_entropy(m, mu, N)
    return math.sqrt(2.0 * f.size) * f.sup_bound * math.sqrt(max(hn, 0.0))


def sample_optimal_coupling(
    m: float, m_prime: float, N: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw one pair from the explicit optimal 1-norm coupling.

    phi is uniform on S_m; phi' is obtained by flipping Delta = |K+' - K+|
    uniformly chosen opposite-sign spins towards the target magnetization,
    so that the per-site cost (1/N)||phi - phi'||_1 equals |m' - m| for
    every draw and the second marginal is uniform on S_{m'}.
    """
    kp = _k_plus(m, N)
    kp2 = _k_plus(m_prime, N)
    phi = -np.ones(N)
    plus_sites = rng.choice(N, size=kp, replace=False)
    phi[plus_sites] = 1.0
    phi2 = phi.copy()
    if kp2 > kp:
        minus_sites = np.flatnonzero(phi < 0)
        assert minus_sites.size >= kp2 - kp
        flip = rng.choice(minus_sites, size=kp2 - kp, replace=False)
        phi2[flip] = 1.0
    elif kp2 < kp:
        assert plus_sites.size >= kp - kp2
        flip = rng.choice(plus_sites, size=kp - kp2, replace=False)
        phi2[flip] = -1.0
    return phi, phi2


@dataclass(frozen=True)
class EnergySplit:
    m_plus: float
    m_minus: float
    weight_plus: float
    weight_minus: float


def energy_split(epsilon: float, cw: CurieWeissParams, N: int) -> EnergySplit:
    """Decompose the fixed-energy ensemble into fixed-magnetization parts.

    The energy constraint -(J/2) m^2 - h m = eps has the two roots
    m_pm = -h/J +- sqrt(h^2/J^2 - 2 eps/J); each carries weight
    |S_{m_pm}| / (|S_{m_+}| + |S_{m_-}|), with weight zero for a root that
    misses the admissible grid (and an equal split when the roots collide).
    """
    disc = cw.h**2 / cw.J**2 - 2.0 * epsilon / cw.J
    if disc < -_SNAP_TOL:
        raise DomainError(f"epsilon={epsilon} exceeds h^2/(2J): no real magnetization roots")
    root = math.sqrt(max(disc, 0.0))
    m_p = -cw.h / cw.J + root
    m_n = -cw.h / cw.J - root

    def count(mv: float) -> int:
        try:
            return math.comb(N, _k_plus(mv, N))
        except DomainError:
            return 0

    if root <= _SNAP_TOL:
        # coincident roots: convention of an even split of identical parts
        if count(m_p) == 0:
            raise DomainError("degenerate root is not an admissible magnetization")
        return EnergySplit(m_p, m_n, 0.5, 0.5)
    c_p, c_n = count(m_p), count(m_n)
    if c_p + c_n == 0:
        raise DomainError(
            f"epsilon={epsilon} is not attainable on the N={N} magnetization grid"
        )
    w_p = c_p / (c_p + c_n)
    return EnergySplit(m_p, m_n, w_p, 1.0 - w_p)
