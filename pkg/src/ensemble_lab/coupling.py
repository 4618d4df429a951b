"""Permutation-invariant Wasserstein machinery.

The central quantity is the specific p-norm fluctuation distance

    w_p(mu1, mu2; N) = inf_gamma ( E_gamma[ (1/N) sum_i |x_i - y_i|^p ] )^(1/p),

the infimum running over couplings of two permutation-invariant measures on
R^N.  For local observables (functions of a fixed label subset I) this
distance controls the expectation gap between the two measures, which is what
the error-bound helpers below compute.  For small discrete marginals the
infimum itself is computed exactly by linear programming, providing the
independent oracle the rest of the package is validated against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from .errors import DomainError, SampleError

__all__ = [
    "LocalObservable",
    "MomentIndex",
    "DiscreteMeasure",
    "DiscreteJointDistribution",
    "CouplingReport",
    "lipschitz_error_bound",
    "moment_error_bound",
    "free_energy_bound",
    "wp_bruteforce",
    "optimal_coupling",
    "transport_cost_estimate",
    "exchangeability_spot_check",
]

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class LocalObservable:
    """A function of a fixed label subset with declared regularity.

    ``index_set`` holds distinct labels (0-based) into [N]; ``fn`` maps a
    point of dimension ``len(index_set)`` to a real.  ``lipschitz_constant``
    is declared w.r.t. the ``p_norm``-norm; ``sup_bound`` may be ``None`` for
    unbounded observables.
    """

    index_set: tuple[int, ...]
    fn: Callable[[np.ndarray], float]
    lipschitz_constant: float = 1.0
    p_norm: float = 2.0
    sup_bound: float | None = 1.0

    def __post_init__(self):
        if len(self.index_set) < 1:
            raise DomainError("index_set must contain at least one label")
        if len(set(self.index_set)) != len(self.index_set):
            raise DomainError("index_set labels must be distinct")
        if self.lipschitz_constant < 0:
            raise DomainError("lipschitz_constant must be >= 0")
        if self.sup_bound is not None and self.sup_bound < 0:
            raise DomainError("sup_bound must be >= 0 or None")

    @property
    def size(self) -> int:
        return len(self.index_set)

    def __call__(self, point) -> float:
        return float(self.fn(np.asarray(point, dtype=float)))

    def evaluate_on_config(self, config) -> float:
        config = np.asarray(config, dtype=float)
        return float(self.fn(config[..., list(self.index_set)]))


@dataclass(frozen=True)
class MomentIndex:
    """A finite label sequence (repetitions allowed) defining x^J."""

    labels: tuple[int, ...]

    def __post_init__(self):
        if len(self.labels) < 1:
            raise DomainError("moment index must contain at least one label")

    @property
    def length(self) -> int:
        return len(self.labels)

    @property
    def distinct(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.labels)))

    def power(self, config) -> float:
        config = np.asarray(config, dtype=float)
        out = np.ones(config.shape[:-1])
        for lab in self.labels:
            out = out * config[..., lab]
        return out


class DiscreteMeasure:
    """Finite discrete probability measure on points of R^N."""

    def __init__(self, points, weights):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        weights = np.asarray(weights, dtype=float)
        if points.shape[0] != weights.shape[0]:
            raise DomainError("points and weights must have matching lengths")
        if np.any(weights < -_WEIGHT_TOL):
            raise DomainError("weights must be nonnegative")
        total = weights.sum()
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"weights must sum to 1 (got {total})")
        self.points = points
        self.weights = np.clip(weights, 0.0, None) / total

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def support_size(self) -> int:
        return self.points.shape[0]

    def expectation(self, fn) -> float:
        vals = np.array([fn(x) for x in self.points])
        return float(np.dot(self.weights, vals))

    def local_expectation(self, obs: LocalObservable) -> float:
        idx = list(obs.index_set)
        vals = np.array([obs(x[idx]) for x in self.points])
        return float(np.dot(self.weights, vals))

    def moment(self, J: MomentIndex) -> float:
        return float(np.dot(self.weights, J.power(self.points)))

    def abs_site_moment(self, label: int, order: float) -> float:
        return float(np.dot(self.weights, np.abs(self.points[:, label]) ** order))


@dataclass
class DiscreteJointDistribution:
    """Joint weight matrix whose marginals match two discrete measures."""

    weights: np.ndarray
    marginal1: DiscreteMeasure
    marginal2: DiscreteMeasure

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < -1e-9):
            raise DomainError("joint weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise DomainError("joint weights must sum to 1")
        row = w.sum(axis=1)
        col = w.sum(axis=0)
        if np.max(np.abs(row - self.marginal1.weights)) > 1e-9:
            raise DomainError("row marginals do not match first measure")
        if np.max(np.abs(col - self.marginal2.weights)) > 1e-9:
            raise DomainError("column marginals do not match second measure")
        self.weights = w


@dataclass
class CouplingReport:
    """Monte Carlo transport-cost estimate with delta-method error bar."""

    estimate: float
    standard_error: float
    mean_pth_power: float
    se_pth_power: float
    samples: int
    seed: int
    p: float
    bound: float | None = None
    extras: dict = field(default_factory=dict)


def lipschitz_error_bound(size_I: int, N: int, p: float, wp_value: float) -> float:
    """Bound on the local-expectation gap of a bounded 1-Lipschitz observable.

    Returns (|I| / (1 - |I|/N))^(1/p) * w_p for permutation-invariant
    marginals; requires |I| < N.
    """
    if size_I < 1 or N < 1:
        raise DomainError("size_I and N must be positive")
    if size_I >= N:
        raise DomainError(f"size_I={size_I} must be < N={N} (denominator nonpositive)")
    if p < 1:
        raise DomainError("p must be >= 1")
    if wp_value < 0:
        raise DomainError("wp_value must be >= 0")
    return (size_I / (1.0 - size_I / N)) ** (1.0 / p) * wp_value


def moment_error_bound(
    J: MomentIndex,
    p: float,
    p0: float,
    M: float,
    wp_value: float,
    N: int,
) -> float:
    """Bound on the gap of the mixed moment x^J between exchangeable measures.

    ``M`` is the caller-supplied moment constant M(J, p): the max over labels
    of the q(n_J - 1)-th absolute moment root under either marginal, with
    q = p/(p-1).  Requires the admissibility condition n_J <= p0 + 1 - p0/p.
    """
    if p <= 1:
        raise DomainError("p must be > 1 for the moment bound")
    if p0 < p:
        raise DomainError("p0 must be >= p")
    n_J = J.length
    if n_J > p0 + 1.0 - p0 / p + 1e-12:
        raise DomainError(
            f"admissibility violated: n_J={n_J} exceeds p0 + 1 - p0/p = {p0 + 1 - p0 / p}"
        )
    if M < 0:
        raise DomainError("moment constant M must be >= 0")
    size_I = len(J.distinct)
    prefac = n_J * M ** (n_J - 1)
    return prefac * lipschitz_error_bound(size_I, N, p, wp_value)


def free_energy_bound(
    C: float,
    size_I: int,
    N: int,
    p: float,
    sigma_HdN: float,
    mismatch: float,
) -> float:
    """Bound from the free-energy method.

    ``sigma_HdN`` is the canonical standard deviation of the energy density
    and ``mismatch`` the offset |eps - <H>/N|; the bound reads
    C * (|I| / (1 - |I|/N))^(1/p) * (sigma + mismatch).
    """
    if C < 0 or sigma_HdN < 0 or mismatch < 0:
        raise DomainError("C, sigma_HdN and mismatch must be >= 0")
    return C * lipschitz_error_bound(size_I, N, p, sigma_HdN + mismatch)


def _cost_matrix(points1: np.ndarray, points2: np.ndarray, p: float) -> np.ndarray:
    diff = np.abs(points1[:, None, :] - points2[None, :, :]) ** p
    return diff.mean(axis=2)


def optimal_coupling(
    mu1: DiscreteMeasure, mu2: DiscreteMeasure, p: float
) -> tuple[float, DiscreteJointDistribution]:
    """Exact w_p and a minimizing coupling via linear programming.

    Solves min <gamma, c> over the transportation polytope with per-site
    averaged cost c(x, y) = (1/N) sum_i |x_i - y_i|^p.  Only the optimal
    value is contractual; ties may be broken arbitrarily by the solver.
    """
    if p < 1:
        raise DomainError("p must be >= 1")
    if mu1.dimension != mu2.dimension:
        raise DomainError("marginals must live on the same R^N")
    n1, n2 = mu1.support_size, mu2.support_size
    if n1 * n2 > 1_000_000:
        raise DomainError("support product exceeds the brute-force capacity")
    cost = _cost_matrix(mu1.points, mu2.points, p)
    # Sparse transportation constraints.  The final column constraint is
    # implied by the others (total mass is fixed), and keeping it makes the
    # system rank-deficient, which HiGHS's presolve can misread as infeasible
    # when some weights sit near zero — so it is dropped.
    n_vars = n1 * n2
    rows_idx = []
    cols_idx = []
    for i in range(n1):
        rows_idx.extend([i] * n2)
        cols_idx.extend(range(i * n2, (i + 1) * n2))
    for j in range(n2 - 1):
        rows_idx.extend([n1 + j] * n1)
        cols_idx.extend(range(j, n_vars, n2))
    a_eq = coo_matrix(
        (np.ones(len(rows_idx)), (rows_idx, cols_idx)),
        shape=(n1 + n2 - 1, n_vars),
    )
    b_eq = np.concatenate([mu1.weights, mu2.weights[:-1]])
    res = linprog(
        cost.ravel(),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    # Repair the solver's ~1e-8 constraint slack so the joint is nonnegative
    # and matches the marginals to rounding: shrink the (clipped, normalized)
    # solution by the smallest factor that leaves every marginal deficit
    # nonnegative, then ship the residual mass through an independent
    # coupling of the deficits.  Only the optimal value is contractual, and
    # it is taken from the LP objective, not from the repaired matrix.
    gamma = np.clip(res.x.reshape(n1, n2), 0.0, None)
    gamma /= gamma.sum()
    p_row = gamma.sum(axis=1)
    p_col = gamma.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.concatenate(
            [
                np.where(p_row > 0, mu1.weights / p_row, np.inf),
                np.where(p_col > 0, mu2.weights / p_col, np.inf),
            ]
        )
    delta = min(max(1.0 - float(np.min(ratios)), 0.0), 1.0)
    if delta == 0.0:
        repaired = gamma
    elif delta == 1.0:
        repaired = np.outer(mu1.weights, mu2.weights)
    else:
        r = mu1.weights - (1.0 - delta) * p_row
        c = mu2.weights - (1.0 - delta) * p_col
        repaired = (1.0 - delta) * gamma + np.outer(r, c) / delta
    joint = DiscreteJointDistribution(repaired, mu1, mu2)
    value = float(max(res.fun, 0.0)) ** (1.0 / p)
    return value, joint


def wp_bruteforce(mu1: DiscreteMeasure, mu2: DiscreteMeasure, p: float) -> float:
    """Exact specific p-norm fluctuation distance between finite measures."""
    value, _ = optimal_coupling(mu1, mu2, p)
    return value


def transport_cost_estimate(
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    transport_map: Callable[[np.ndarray], np.ndarray],
    p: float,
    N: int,
    samples: int,
    seed: int,
    chunk_size: int | None = None,
) -> CouplingReport:
    """Monte Carlo estimate of the transport-map coupling cost.

    Draws x ~ mu1 from ``sampler`` (which receives a Generator and a batch
    size and returns a (batch, N) array), applies ``transport_map`` and
    averages (1/N) ||x - T(x)||_p^p.  The p-th root's standard error is
    propagated by the delta method.  Chunks are evaluated with sub-seeds
    spawned from ``seed`` so results are reproducible for a fixed
    (seed, chunk layout) pair.
    """
    if samples < 2:
        raise DomainError("samples must be >= 2")
    if chunk_size is None:
        chunk_size = samples
    layout = []
    left = samples
    while left > 0:
        take = min(chunk_size, left)
        layout.append(take)
        left -= take
    seeds = np.random.SeedSequence(seed).spawn(len(layout))
    total = 0.0
    total_sq = 0.0
    done = 0
    for take, ss in zip(layout, seeds):
        rng = np.random.default_rng(ss)
        x = np.atleast_2d(sampler(rng, take))
        y = np.atleast_2d(transport_map(x))
        costs = np.mean(np.abs(x - y) ** p, axis=1)
        if not np.all(np.isfinite(costs)):
            bad = int(np.argmax(~np.isfinite(costs)))
            raise SampleError("non-finite transport cost", draw_index=done + bad)
        total += costs.sum()
        total_sq += np.square(costs).sum()
        done += take
    mean = total / samples
    var = max(total_sq / samples - mean**2, 0.0) * samples / (samples - 1)
    se_mean = math.sqrt(var / samples)
    if mean == 0.0:
        estimate, se = 0.0, 0.0
    else:
        estimate = mean ** (1.0 / p)
        se = (1.0 / p) * mean ** (1.0 / p - 1.0) * se_mean
    return CouplingReport(
        estimate=estimate,
        standard_error=se,
        mean_pth_power=mean,
        se_pth_power=se_mean,
        samples=samples,
        seed=seed,
        p=p,
    )


def exchangeability_spot_check(
    measure: DiscreteMeasure,
    rng: np.random.Generator,
    observable: LocalObservable,
    max_pairs: int = 100,
    tol: float = 1e-9,
) -> bool:
    """Spot-check permutation invariance by swapping random label pairs.

    Full verification is exponential; this compares the observable's
    expectation before and after at most ``max_pairs`` random transpositions
    of the index set's labels with fresh labels.
    """
    N = measure.dimension
    base = measure.local_expectation(observable)
    for _ in range(max_pairs):
        labels = list(observable.index_set)
        pos = int(rng.integers(len(labels)))
        candidates = [j for j in range(N) if j not in labels]
        if not candidates:
            return True
        labels[pos] = int(rng.choice(candidates))
        swapped = LocalObservable(
            tuple(labels),
            observable.fn,
            observable.lipschitz_constant,
            observable.p_norm,
            observable.sup_bound,
        )
        if abs(measure.local_expectation(swapped) - base) > tol:
            return False
    return True
