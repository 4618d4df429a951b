"""Mean-field spherical model: ensembles, sampling, quadrature, couplings.

Field configurations are real vectors phi in R^N constrained (or biased) by
the particle density sum phi_x^2 = rho N and the magnetization sum
phi_x = m N.  The Hamiltonian is H[phi] = -(J/2N) M^2 - h M with
M = sum phi_x.  Implemented here:

* the orthogonal change of variables U with (U phi)_1 = (1/sqrt N) sum phi_x,
  realized as a Householder reflection applied in O(N);
* exact sampling of the fixed-(m, rho) ensemble (uniform measure on an
  (N-2)-sphere in the hyperplane), its single-site marginal density, and its
  closed-form low moments;
* the fixed-energy ensemble as a log-space-weighted convex combination of
  the two magnetization branches, including the dominance ratio for h != 0;
* fluctuating-magnetization and fluctuating-energy ensembles by adaptive
  quadrature with endpoint-regularizing substitutions (m = sqrt(rho) tanh u
  and eps = -(rho J / 2) sin^2 theta);
* Gaussian grand-canonical ensembles (product, energy-variant, and the
  symmetric two-component mixture), their exact site moments, and the direct
  transport maps onto the fixed-constraint ensemble with Monte Carlo cost
  estimates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .coupling import CouplingReport, transport_cost_estimate
from .errors import DegenerateEnsembleError, DomainError, QuadratureError

__all__ = [
    "SphericalModel",
    "MagnetizationEnsemble",
    "EnergyEnsemble",
    "BranchCase",
    "GrandCanonicalParams",
    "apply_U",
    "apply_U_inverse",
    "sample_aux_mc",
    "mc_marginal_density",
    "mc_site_moments",
    "mc_site_function_expectation",
    "m_branches",
    "branch_weights",
    "subdominant_weight_ratio",
    "energy_ensemble_expectation",
    "aux_canonical_expectation",
    "aux_canonical_stats",
    "canonical_energy_expectation",
    "psi_mag",
    "psi_energy",
    "m_star",
    "epsilon_star",
    "gc_sample_and_moments",
    "GcMoments",
    "transport_cost_mag",
    "transport_cost_energy",
    "direct_coupling_cost_gc_mc",
    "direct_coupling_cost_gc_mc_energy",
]

_TOL = 1e-9


def _quiet_quad(fn, a, b, **kw):
    """quad with roundoff chatter silenced: numerators of normalized ratios
    can be arbitrarily close to zero, which trips the roundoff warning."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(fn, a, b, **kw)


@dataclass(frozen=True)
class SphericalModel:
    N: int
    J: float = 1.0
    h: float = 0.0
    rho: float = 1.0

    def __post_init__(self):
        if self.N < 5:
            raise DomainError("N >= 5 required (marginal-density exponent (N-4)/2)")
        if self.J <= 0:
            raise DomainError("J must be positive")
        if self.rho <= 0:
            raise DomainError("rho must be positive")


@dataclass(frozen=True)
class MagnetizationEnsemble:
    model: SphericalModel
    m: float

    def __post_init__(self):
        if self.m**2 >= self.model.rho:
            raise DegenerateEnsembleError(
                f"m^2={self.m**2} must be strictly below rho={self.model.rho}"
            )


class BranchCase(Enum):
    TWO_BRANCH = "two_branch"
    SINGLE_BRANCH = "single_branch"
    DEGENERATE_TOP = "degenerate_top"


# ---------------------------------------------------------------------------
# Orthogonal change of variables


def apply_U(x: np.ndarray) -> np.ndarray:
    """Apply the Householder reflection U with (Ux)_1 = (1/sqrt N) sum x_i.

    U maps e_1 to (1, ..., 1)/sqrt(N); it is symmetric and an involution, so
    it serves as its own inverse.  Works on batches along the last axis.
    """
    x = np.asarray(x, dtype=float)
    N = x.shape[-1]
    if N == 1:
        return x.copy()
    # v = e_1 - u with u = ones/sqrt(N); U = I - 2 v v^T / |v|^2
    u1 = 1.0 / math.sqrt(N)
    v = np.full(N, -u1)
    v[0] += 1.0
    vv = v @ v
    coef = 2.0 * (x @ v) / vv
    return x - np.multiply.outer(coef, v).reshape(x.shape)


def apply_U_inverse(x: np.ndarray) -> np.ndarray:
    """Inverse change of variables (the reflection is an involution)."""
    return apply_U(x)


# ---------------------------------------------------------------------------
# Fixed-magnetization ensemble


def sample_aux_mc(
    ens: MagnetizationEnsemble, rng: np.random.Generator, size: int = 1
) -> np.ndarray:
    """Exact draws from the uniform measure with both constraints sharp.

    In U-coordinates the constraint set is the sphere of radius
    sqrt(N (rho - m^2)) inside the hyperplane y_1 = m sqrt(N); a uniform
    point on it is a normalized (N-1)-dimensional Gaussian.  Returns a
    (size, N) array; every row satisfies sum phi = mN and sum phi^2 = rho N
    up to rounding.
    """
    model = ens.model
    N, m, rho = model.N, ens.m, model.rho
    radius = math.sqrt(N * (rho - m * m))
    y = np.empty((size, N))
    y[:, 0] = m * math.sqrt(N)
    g = rng.standard_normal((size, N - 1))
    norms = np.linalg.norm(g, axis=1)
    while np.any(norms == 0.0):  # probability-zero guard: redraw
        bad = norms == 0.0
        g[bad] = rng.standard_normal((int(bad.sum()), N - 1))
        norms = np.linalg.norm(g, axis=1)
    y[:, 1:] = radius * g / norms[:, None]
    return apply_U_inverse(y)


def _marginal_log_norm(ens: MagnetizationEnsemble) -> float:
    """log of the normalization of the single-site marginal density."""
    N = ens.model.N
    s2 = ens.model.rho - ens.m**2
    half_width = math.sqrt(s2 * (N - 1))
    a = (N - 4) / 2.0
    # int_{-1}^{1} (1 - t^2)^a dt = sqrt(pi) Gamma(a+1) / Gamma(a+3/2),
    # used as a cross-check; the returned constant comes from quadrature to
    # honour the density's stated contract.
    val, err = integrate.quad(
        lambda t: (1.0 - t * t) ** a, -1.0, 1.0, epsabs=0, epsrel=1e-12, limit=200
    )
    return math.log(val * half_width)


def mc_marginal_density(ens: MagnetizationEnsemble, value) -> np.ndarray | float:
    """Single-site marginal density of the fixed-(m, rho) ensemble.

    Proportional to (1 - (v-m)^2 / ((rho-m^2)(N-1)))^{(N-4)/2} on the
    support disk and zero outside; converges to the N(m, rho-m^2) density.
    """
    v = np.asarray(value, dtype=float)
    N = ens.model.N
    s2 = ens.model.rho - ens.m**2
    t2 = (v - ens.m) ** 2 / (s2 * (N - 1))
    inside = t2 < 1.0
    log_norm = _marginal_log_norm(ens)
    out = np.zeros_like(v, dtype=float)
    a = (N - 4) / 2.0
    with np.errstate(divide="ignore"):
        out = np.where(inside, np.exp(a * np.log1p(-np.where(inside, t2, 0.0)) - log_norm), 0.0)
    if np.isscalar(value):
        return float(out)
    return out


def mc_site_moments(ens: MagnetizationEnsemble) -> dict[str, float]:
    """Closed-form low moments of the fixed-(m, rho) ensemble.

    Exact consequences of exchangeability and the two sharp constraints:
    <phi_1> = m, <phi_1^2> = rho, and for distinct sites
    <phi_1 phi_2> = m^2 - (rho - m^2)/(N - 1).
    """
    N = ens.model.N
    m, rho = ens.m, ens.model.rho
    return {
        "site_mean": m,
        "site_second": rho,
        "site_var": rho - m * m,
        "pair": m * m - (rho - m * m) / (N - 1),
    }


def mc_site_function_expectation(
    ens: MagnetizationEnsemble, g: Callable[[np.ndarray], np.ndarray]
) -> float:
    """Expectation of a single-site function by quadrature against the marginal."""
    N = ens.model.N
    s2 = ens.model.rho - ens.m**2
    half_width = math.sqrt(s2 * (N - 1))
    a = (N - 4) / 2.0

    def integrand(t):
        v = ens.m + half_width * t
        return np.asarray(g(np.asarray(v))) * (1.0 - t * t) ** a

    num, _ = integrate.quad(integrand, -1.0, 1.0, epsabs=0, epsrel=1e-10, limit=300)
    den, _ = integrate.quad(lambda t: (1.0 - t * t) ** a, -1.0, 1.0, epsabs=0, epsrel=1e-12, limit=200)
    return num / den


# ---------------------------------------------------------------------------
# Fixed-energy ensemble


def m_branches(epsilon: float, model: SphericalModel) -> tuple[float, float]:
    """Magnetization roots of -(J/2) m^2 - h m = eps: m_pm = -h/J +- sqrt(disc)."""
    disc = model.h**2 / model.J**2 - 2.0 * epsilon / model.J
    if disc < 0:
        raise DomainError(f"epsilon={epsilon} exceeds h^2/(2J): no real roots")
    root = math.sqrt(disc)
    return -model.h / model.J + root, -model.h / model.J - root


@dataclass(frozen=True)
class EnergyEnsemble:
    model: SphericalModel
    epsilon: float

    def __post_init__(self):
        model, eps = self.model, self.epsilon
        m_p, m_n = m_branches(eps, model)  # raises above h^2/(2J)
        # admissibility: the smaller-|m| branch must live strictly inside the
        # sphere, i.e. | |h|/J - sqrt(disc) | < sqrt(rho)
        small = min(abs(m_p), abs(m_n))
        if small * small >= model.rho:
            raise DegenerateEnsembleError(
                f"epsilon={eps} outside the admissible energy window: every "
                f"magnetization branch has m^2 >= rho={model.rho}"
            )

    @property
    def branches(self) -> tuple[float, float]:
        return m_branches(self.epsilon, self.model)

    @property
    def branch_case(self) -> BranchCase:
        m_p, m_n = self.branches
        if abs(m_p - m_n) <= _TOL:
            return BranchCase.DEGENERATE_TOP
        rho = self.model.rho
        if m_p * m_p < rho and m_n * m_n < rho:
            return BranchCase.TWO_BRANCH
        return BranchCase.SINGLE_BRANCH


def branch_weights(ee: EnergyEnsemble) -> tuple[float, float]:
    """Mixture weights of (m_+, m_-) computed in log-space.

    Each admissible branch carries weight proportional to its surface
    partition function (rho - m^2)^{(N-3)/2}; an inadmissible branch
    (m^2 >= rho) gets weight zero, and the coincident-root case splits
    evenly between the two identical components.
    """
    model = ee.model
    m_p, m_n = ee.branches
    if ee.branch_case is BranchCase.DEGENERATE_TOP:
        return 0.5, 0.5
    exponent = (model.N - 3) / 2.0
    logs = []
    for mv in (m_p, m_n):
        if mv * mv < model.rho:
            logs.append(exponent * math.log(model.rho - mv * mv))
        else:
            logs.append(-math.inf)
    shift = max(logs)
    w = [math.exp(lg - shift) if lg > -math.inf else 0.0 for lg in logs]
    total = w[0] + w[1]
    return w[0] / total, w[1] / total


def subdominant_weight_ratio(ee: EnergyEnsemble) -> float:
    """Closed-form weight ratio of the larger-|m| branch to the smaller one.

    Equals ((rho - m_big^2)/(rho - m_small^2))^{(N-3)/2}; the sub-dominant
    weight itself is r/(1+r).  Requires two admissible branches.
    """
    model = ee.model
    m_p, m_n = ee.branches
    if ee.branch_case is not BranchCase.TWO_BRANCH:
        return 0.0
    m_small, m_big = sorted((m_p, m_n), key=abs)
    exponent = (model.N - 3) / 2.0
    return math.exp(
        exponent
        * (math.log(model.rho - m_big**2) - math.log(model.rho - m_small**2))
    )


def energy_ensemble_expectation(
    inner: Callable[[MagnetizationEnsemble], float], ee: EnergyEnsemble
) -> float:
    """Weighted-branch expectation for the fixed-energy ensemble.

    ``inner`` evaluates the observable under a fixed-magnetization ensemble
    (exact moments, marginal quadrature, or a seeded sampler average — the
    caller chooses); this routine supplies the log-space branch weights.
    """
    m_p, m_n = ee.branches
    w_p, w_n = branch_weights(ee)
    total = 0.0
    for mv, w in ((m_p, w_p), (m_n, w_n)):
        if w > 0.0:
            total += w * inner(MagnetizationEnsemble(ee.model, mv))
    return total


# ---------------------------------------------------------------------------
# Fluctuating ensembles by quadrature


def psi_mag(m, mu: float, rho: float):
    """Rate function of the fluctuating-magnetization ensemble."""
    return mu * m - 0.5 * np.log(rho - np.square(m))


def m_star(mu: float, rho: float) -> float:
    """Minimizer of psi_mag: 1/(2 mu) - sgn(mu) sqrt(1/(4 mu^2) + rho)."""
    if mu == 0.0:
        return 0.0
    return 1.0 / (2.0 * mu) - math.copysign(math.sqrt(1.0 / (4.0 * mu * mu) + rho), mu)


def psi_energy(eps, beta: float, rho: float, J: float):
    """Rate function of the fluctuating-energy ensemble (h = 0)."""
    return beta * eps - 0.5 * np.log(rho + 2.0 * np.asarray(eps) / J)


def epsilon_star(beta: float, rho: float, J: float) -> float:
    """Minimizer of psi_energy over (-rho J/2, 0] for beta >= 1/(J rho);
    the boundary value 0 is the effective location below that."""
    val = -(J * rho / 2.0) * (1.0 - 1.0 / (beta * J * rho)) if beta > 0 else 0.0
    return min(val, 0.0) if beta * J * rho >= 1.0 else 0.0


def _laplace_quadrature(log_f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float):
    """Integrate exp(log_f) over (lo, hi) with a peak-centred shift.

    Locates the maximum of log_f, shrinks the window to where the integrand
    is above exp(-60) of its peak, and applies adaptive quadrature there.
    Returns (log of the integral, shifted integrand, window) so ratios of
    integrals computed with the same shift are well conditioned.
    """
    grid = np.linspace(lo, hi, 513)[1:-1]
    vals = log_f(grid)
    i0 = int(np.argmax(vals))
    res = optimize.minimize_scalar(
        lambda u: -log_f(np.array([u]))[0],
        bounds=(grid[max(i0 - 1, 0)], grid[min(i0 + 1, len(grid) - 1)]),
        method="bounded",
    )
    peak_x = float(res.x)
    peak = float(log_f(np.array([peak_x]))[0])
    drop = vals - peak
    above = np.flatnonzero(drop > -60.0)
    w_lo = lo if above[0] == 0 else grid[above[0] - 1]
    w_hi = hi if above[-1] == len(grid) - 1 else grid[above[-1] + 1]

    def shifted(u):
        return np.exp(log_f(np.atleast_1d(np.asarray(u, dtype=float))) - peak)

    val, err = integrate.quad(
        lambda u: float(shifted(u)[0]), w_lo, w_hi, epsabs=0, epsrel=1e-11, limit=400,
        points=[peak_x] if w_lo < peak_x < w_hi else None,
    )
    if val <= 0 or err > 1e-7 * val:
        raise QuadratureError(
            "quadrature failed to converge",
            best_estimate=val,
            achieved_tolerance=err / val if val else math.inf,
        )
    return peak + math.log(val), shifted, (w_lo, w_hi)


def aux_canonical_expectation(
    inner: Callable[[np.ndarray], np.ndarray],
    mu: float,
    rho: float,
    N: int,
    J: float = 1.0,
) -> float:
    """Fluctuating-magnetization expectation by 1D quadrature.

    ``inner(m)`` must return the fixed-magnetization expectation of the
    observable as a (vectorized) function of m — e.g. ``lambda m: m`` for
    the magnetization density itself, or a pair-moment formula.  The m
    integral carries weight e^{-N psi_mag(m)} (rho - m^2)^{-3/2}; the
    substitution m = sqrt(rho) tanh(u) removes both endpoint singularities,
    leaving the smooth log-integrand -N(mu sqrt(rho) tanh u + ln cosh u)
    + ln cosh u + const.
    """
    if N < 5:
        raise DomainError("N >= 5 required")
    sq = math.sqrt(rho)

    # log of the u-space weight (Jacobian included); the multiplicative
    # constant 1/rho cancels in the normalized ratio.
    def lw(u):
        u = np.asarray(u, dtype=float)
        lc = np.abs(u) + np.log1p(np.exp(-2.0 * np.abs(u))) - math.log(2.0)
        return -N * (mu * sq * np.tanh(u) + lc) + lc

    span = 60.0 / max(math.sqrt(N), 1.0) + 30.0
    log_z, shifted, window = _laplace_quadrature(lw, -span, span)

    def num_integrand(u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return float((shifted(u) * inner(sq * np.tanh(u)))[0])

    num, _ = _quiet_quad(
        num_integrand, window[0], window[1], epsabs=0, epsrel=1e-10, limit=400
    )
    den, _ = integrate.quad(
        lambda u: float(shifted(np.array([u]))[0]),
        window[0], window[1], epsabs=0, epsrel=1e-10, limit=400,
    )
    return num / den


def aux_canonical_stats(mu: float, rho: float, N: int) -> tuple[float, float]:
    """Mean and standard deviation of the magnetization density M/N."""
    mean = aux_canonical_expectation(lambda m: m, mu, rho, N)
    second = aux_canonical_expectation(lambda m: np.square(m), mu, rho, N)
    return mean, math.sqrt(max(second - mean * mean, 0.0))


def canonical_energy_expectation(
    inner: Callable[[np.ndarray], np.ndarray],
    beta: float,
    rho: float,
    N: int,
    J: float = 1.0,
    h: float = 0.0,
) -> float:
    """Fluctuating-energy expectation by 1D quadrature (h = 0 only).

    ``inner(eps)`` is the fixed-energy expectation as a vectorized function
    of the energy density — e.g. ``lambda e: e`` for H/N.  The eps integral
    over (-rho J/2, 0) carries weight e^{-N psi_energy} (-2 eps/J)^{-1/2}
    (rho + 2 eps/J)^{-3/2}; the substitution eps = -(rho J/2) sin^2 theta
    turns it into a smooth integrand that vanishes like cos^{N-2} at the
    right endpoint.
    """
    if h != 0.0:
        raise DomainError("fluctuating-energy ensemble is implemented for h = 0 only")
    if N < 5:
        raise DomainError("N >= 5 required")
    half = rho * J / 2.0

    def eps_of(theta):
        return -half * np.square(np.sin(theta))

    def lw(theta):
        theta = np.asarray(theta, dtype=float)
        c = np.cos(theta)
        # log integrand: -N(beta*eps - 0.5 log(rho c^2)) - 2 log c + const
        with np.errstate(divide="ignore"):
            lc = np.log(np.maximum(c, 1e-300))
        return -N * (beta * eps_of(theta) - 0.5 * math.log(rho) - lc) - 2.0 * lc

    log_z, shifted, window = _laplace_quadrature(lw, 0.0, math.pi / 2.0)

    def num_integrand(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return float((shifted(t) * inner(eps_of(t)))[0])

    num, _ = _quiet_quad(
        num_integrand, window[0], window[1], epsabs=0, epsrel=1e-10, limit=400
    )
    den, _ = integrate.quad(
        lambda t: float(shifted(np.array([t]))[0]),
        window[0], window[1], epsabs=0, epsrel=1e-10, limit=400,
    )
    return num / den


# ---------------------------------------------------------------------------
# Grand-canonical ensembles


@dataclass(frozen=True)
class GcMoments:
    site_mean: float
    site_var: float


@dataclass(frozen=True)
class GrandCanonicalParams:
    """Parameters for one of the three Gaussian ensembles.

    variant "aux_mag": i.i.d. sites, mean -mu/(2 eta), variance 1/(2 eta).
    variant "energy": mean-coordinate Gaussian of variance 1/(2(mu - beta J/2))
    and N-1 i.i.d. Gaussians of variance 1/(2 mu), mapped back through the
    orthogonal change of variables.
    variant "alternate": even mixture of the +-mu_bar product ensembles.
    """

    variant: str
    mu: float = 0.0
    eta: float = 0.0
    beta: float = 0.0
    mu_bar: float = 0.0
    J: float = 1.0

    def __post_init__(self):
        if self.variant not in ("aux_mag", "energy", "alternate"):
            raise DomainError(f"unknown grand-canonical variant {self.variant!r}")
        if self.variant == "aux_mag" and self.eta <= 0:
            raise DomainError("aux_mag variant requires eta > 0")
        if self.variant == "energy":
            if self.mu <= 0:
                raise DomainError("energy variant requires mu > 0")
            if self.beta >= 2.0 * self.mu / self.J:
                raise DomainError("energy variant requires beta < 2 mu / J")
        if self.variant == "alternate":
            if self.mu_bar < 0 or self.eta <= 0:
                raise DomainError("alternate variant requires mu_bar >= 0 and eta > 0")

    @classmethod
    def matched_to_mag(cls, m: float, rho: float) -> "GrandCanonicalParams":
        """Product ensemble whose site mean/variance match (m, rho - m^2)."""
        if m * m >= rho:
            raise DegenerateEnsembleError("m^2 must be < rho")
        eta = 1.0 / (2.0 * (rho - m * m))
        return cls("aux_mag", mu=-2.0 * eta * m, eta=eta)


def gc_sample_and_moments(
    params: GrandCanonicalParams, N: int
) -> tuple[Callable[[np.random.Generator, int], np.ndarray], GcMoments]:
    """Return (sampler, exact single-site moments) for a Gaussian ensemble.

    The sampler takes (rng, batch) and returns a (batch, N) array.
    """
    if params.variant == "aux_mag":
        mean = -params.mu / (2.0 * params.eta)
        var = 1.0 / (2.0 * params.eta)

        def sampler(rng, batch):
            return mean + math.sqrt(var) * rng.standard_normal((batch, N))

        return sampler, GcMoments(mean, var)

    if params.variant == "energy":
        var_z = 1.0 / (2.0 * (params.mu - params.beta * params.J / 2.0))
        var_rest = 1.0 / (2.0 * params.mu)

        def sampler(rng, batch):
            y = rng.standard_normal((batch, N))
            y[:, 0] *= math.sqrt(var_z)
            y[:, 1:] *= math.sqrt(var_rest)
            return apply_U_inverse(y)

        # site variance: diag of U diag(var_z, var_rest, ...) U^T; every
        # diagonal entry is var_rest + (var_z - var_rest)/N by symmetry of U's
        # first column entries (each of squared size 1/N).
        site_var = var_rest + (var_z - var_rest) / N
        return sampler, GcMoments(0.0, site_var)

    # alternate: even mixture of +-mu_bar product ensembles
    mean_amp = params.mu_bar / (2.0 * params.eta)
    var = 1.0 / (2.0 * params.eta)

    def sampler(rng, batch):
        signs = rng.choice((-1.0, 1.0), size=(batch, 1))
        return signs * mean_amp + math.sqrt(var) * rng.standard_normal((batch, N))

    return sampler, GcMoments(0.0, var + mean_amp * mean_amp)


# ---------------------------------------------------------------------------
# Transport costs


def transport_cost_mag(m: float, m_prime: float, rho: float) -> float:
    """Deterministic cost of the fixed-magnetization transport map.

    Moving the sphere for (m, rho) onto the one for (m', rho) shifts the
    mean coordinate and rescales the radius, so every point pays exactly
    sqrt((m - m')^2 + (sqrt(rho - m^2) - sqrt(rho - m'^2))^2).
    """
    if m * m >= rho or m_prime * m_prime >= rho:
        raise DomainError("both magnetizations must satisfy m^2 < rho")
    dr = math.sqrt(rho - m * m) - math.sqrt(rho - m_prime * m_prime)
    return math.hypot(m - m_prime, dr)


def transport_cost_energy(
    epsilon: float, epsilon_prime: float, rho: float, J: float
) -> float:
    """Deterministic two-branch transport cost between fixed-energy
    ensembles at h = 0.

    cost^2 = (sqrt(-2 eps/J) - sqrt(-2 eps'/J))^2
           + (sqrt(rho + 2 eps/J) - sqrt(rho + 2 eps'/J))^2.
    """
    for e in (epsilon, epsilon_prime):
        if not (-rho * J / 2.0 < e <= 0.0):
            raise DomainError(f"energy density {e} outside (-rho J/2, 0]")
    a = math.sqrt(-2.0 * epsilon / J) - math.sqrt(-2.0 * epsilon_prime / J)
    b = math.sqrt(rho + 2.0 * epsilon / J) - math.sqrt(rho + 2.0 * epsilon_prime / J)
    return math.hypot(a, b)


def _snap_map(m: float, rho: float, N: int) -> Callable[[np.ndarray], np.ndarray]:
    """Transport map pushing any configuration onto the (m, rho) constraint set.

    In U-coordinates: pin the mean coordinate to m sqrt(N) and rescale the
    orthogonal complement to radius sqrt(N (rho - m^2)).
    """
    radius = math.sqrt(N * (rho - m * m))

    def T(phi):
        y = apply_U(phi)
        y[..., 0] = m * math.sqrt(N)
        rest = y[..., 1:]
        norms = np.linalg.norm(rest, axis=-1, keepdims=True)
        y[..., 1:] = radius * rest / np.maximum(norms, 1e-300)
        return apply_U_inverse(y)

    return T


def direct_coupling_cost_gc_mc(
    m: float, rho: float, N: int, seed: int, samples: int
) -> CouplingReport:
    """Monte Carlo cost of the direct product-Gaussian-to-sphere coupling.

    Samples the matched product ensemble, transports each draw onto the
    (m, rho) constraint set, and reports the mean squared per-site cost with
    its standard error.  ``bound`` carries the reference value
    1/((rho - m^2) N); ``extras['z_cost_exact']`` the exact mean-coordinate
    contribution (rho - m^2)/N.
    """
    params = GrandCanonicalParams.matched_to_mag(m, rho)
    sampler, _ = gc_sample_and_moments(params, N)
    report = transport_cost_estimate(
        sampler,
        _snap_map(m, rho, N),
        p=2.0,
        N=N,
        samples=samples,
        seed=seed,
        chunk_size=max(1, min(samples, 2**22 // N + 1)),
    )
    report.bound = 1.0 / ((rho - m * m) * N)
    report.extras["z_cost_exact"] = (rho - m * m) / N
    return report


def direct_coupling_cost_gc_mc_energy(
    beta: float, mu: float, N: int, seed: int, samples: int, J: float = 1.0
) -> CouplingReport:
    """Direct coupling of the energy-variant Gaussian ensemble onto the
    zero-energy constraint set (h = 0, eps = 0, rho = 1/(2 mu)).

    ``bound`` carries (1/N)(rho/(1 - rho beta J) + 2 rho).
    """
    params = GrandCanonicalParams("energy", mu=mu, beta=beta, J=J)
    rho = 1.0 / (2.0 * mu)
    sampler, _ = gc_sample_and_moments(params, N)
    report = transport_cost_estimate(
        sampler,
        _snap_map(0.0, rho, N),
        p=2.0,
        N=N,
        samples=samples,
        seed=seed,
        chunk_size=max(1, min(samples, 2**22 // N + 1)),
    )
    report.bound = (rho / (1.0 - rho * beta * J) + 2.0 * rho) / N
    return report
