"""Experiment drivers composing the model modules into rate studies.

Each experiment produces a table of per-N rows (gap, bounds, standard error,
wall time) plus a fitted log-log slope, and can serialize the table to CSV
and the summary to JSON.  All randomness flows from the plan seed through
spawned sub-seeds, so re-running a plan reproduces the table bit for bit.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import coupling, laplace, paramagnet, spherical
from .coupling import DiscreteMeasure, LocalObservable, MomentIndex
from .errors import DomainError, EnsembleLabError

__all__ = [
    "EXPERIMENT_IDS",
    "ExperimentPlan",
    "ResultRow",
    "ExperimentResult",
    "run",
    "fit_rate",
    "write_csv",
    "write_summary",
]

EXPERIMENT_IDS = (
    "paramagnet_converge",
    "bound_compare",
    "spherical_mag_converge",
    "spherical_energy_converge",
    "gc_direct_coupling",
    "dominance_decay",
    "laplace_check",
    "ot_oracle_check",
)

_GAP_FLOOR = 10 * 1e-12

CSV_COLUMNS = ("N", "gap", "bound_coupling", "bound_relent", "se", "runtime_ms")


@dataclass
class ExperimentPlan:
    experiment_id: str
    N_grid: tuple[int, ...] = ()
    params: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    out: str | None = None
    summary_out: str | None = None

    def __post_init__(self):
        if self.experiment_id not in EXPERIMENT_IDS:
            raise DomainError(f"unknown experiment_id {self.experiment_id!r}")
        grid = tuple(int(n) for n in self.N_grid) or _default_grid(self.experiment_id)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise DomainError("N_grid must be strictly increasing")
        self.N_grid = grid


@dataclass
class ResultRow:
    N: int
    gap: float
    bound_coupling: float
    bound_relent: float
    se: float
    runtime_ms: float

    def __post_init__(self):
        if self.se < 0:
            raise DomainError("standard error must be nonnegative")


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    rows: list[ResultRow]
    slope: float | None
    slope_stderr: float | None
    passed: bool
    notes: str = ""


def _default_grid(experiment_id: str) -> tuple[int, ...]:
    return {
        "paramagnet_converge": (100, 1000, 10_000, 100_000),
        "bound_compare": (100, 1000, 10_000, 100_000, 1_000_000),
        "spherical_mag_converge": (100, 1000, 10_000),
        "spherical_energy_converge": (100, 1000, 10_000),
        "gc_direct_coupling": (100, 1000, 10_000),
        "dominance_decay": (50, 100, 200),
        "laplace_check": (10, 100, 1000, 10_000),
        "ot_oracle_check": (4, 5, 6),
    }[experiment_id]


def fit_rate(rows: list[ResultRow]) -> tuple[float, float]:
    """Least-squares slope of log(gap) vs log(N) with its residual stderr.

    Rows whose gap sits at the numerical floor (below 1e-11) or within
    3 standard errors of zero are excluded; at least 3 usable rows required.
    """
    usable = [
        r for r in rows if r.gap > _GAP_FLOOR and r.gap > 3.0 * r.se
    ]
    if len(usable) < 3:
        raise DomainError(f"need >= 3 usable rows for a rate fit, got {len(usable)}")
    x = np.log([r.N for r in usable])
    y = np.log([r.gap for r in usable])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    dof = len(usable) - 2
    if dof > 0 and res.size:
        s2 = float(res[0]) / dof
        stderr = math.sqrt(s2 / float(np.sum((x - x.mean()) ** 2)))
    else:
        stderr = 0.0
    return slope, stderr


def _map_ordered(fn, items, threads: int):
    """Map preserving order; fans out over a thread pool when threads > 1.

    Work items must be independent (they are: each derives its own inputs),
    so the result is identical regardless of the thread count.
    """
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Observables used across paramagnet experiments


def _pair_observable() -> LocalObservable:
    return LocalObservable((0, 1), lambda v: v[0] * v[1], lipschitz_constant=1.0,
                           p_norm=1.0, sup_bound=1.0)


# ---------------------------------------------------------------------------
# Individual experiments; each returns (rows, passed, notes)


def _run_paramagnet_converge(plan: ExperimentPlan):
    m = plan.params.get("m", 0.5)
    obs = _pair_observable()

    def one(N: int) -> ResultRow:
        t0 = time.perf_counter()
        m_snap = paramagnet.snap_magnetization(m, N)
        mu = math.atanh(-m_snap)
        gap = abs(
            paramagnet.mc_local_expectation(obs, m_snap, N)
            - paramagnet.c_local_expectation(obs, mu)
        )
        scal = paramagnet.canonical_scalars(mu, N)
        mismatch = abs(m_snap - scal.mean_mdensity)
        bound_c = coupling.free_energy_bound(1.0, obs.size, N, 1.0,
                                             scal.sigma_mdensity, mismatch)
        bound_r = paramagnet.pinsker_bound(obs, m_snap, mu, N)
        return ResultRow(N, gap, bound_c, bound_r, 0.0,
                         (time.perf_counter() - t0) * 1e3)

    rows = _map_ordered(one, plan.N_grid, plan.threads)
    slope, stderr = fit_rate(rows)
    dominated = all(r.gap <= r.bound_coupling for r in rows)
    passed = dominated and abs(slope + 0.5) <= 0.1
    notes = f"dominated={dominated}"
    return rows, slope, stderr, passed, notes


def _run_bound_compare(plan: ExperimentPlan):
    m = plan.params.get("m", 0.5)
    obs = _pair_observable()
    rows = []
    for N in plan.N_grid:
        t0 = time.perf_counter()
        m_snap = paramagnet.snap_magnetization(m, N)
        mu = math.atanh(-m_snap)
        gap = abs(
            paramagnet.mc_local_expectation(obs, m_snap, N)
            - paramagnet.c_local_expectation(obs, mu)
        )
        scal = paramagnet.canonical_scalars(mu, N)
        bound_c = coupling.free_energy_bound(1.0, obs.size, N, 1.0,
                                             scal.sigma_mdensity, 0.0)
        bound_r = paramagnet.pinsker_bound(obs, m_snap, mu, N)
        rows.append(ResultRow(N, gap, bound_c, bound_r, 0.0,
                              (time.perf_counter() - t0) * 1e3))
    ratios = [r.bound_relent / r.bound_coupling for r in rows]
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    passed = increasing and ratios[-1] >= 1.5 * ratios[0]
    try:
        slope, stderr = fit_rate(rows)
    except DomainError:
        slope = stderr = None
    return rows, slope, stderr, passed, f"ratios={['%.4f' % r for r in ratios]}"


def _run_spherical_mag_converge(plan: ExperimentPlan):
    mu = plan.params.get("mu", 1.0)
    rho = plan.params.get("rho", 1.0)
    mstar = spherical.m_star(mu, rho)
    rows = []
    for N in plan.N_grid:
        t0 = time.perf_counter()
        mean, sigma = spherical.aux_canonical_stats(mu, rho, N)
        gap = abs(mean - mstar)

        def cost_sq(mv):
            mv = np.asarray(mv)
            dr = np.sqrt(rho - np.square(mv)) - math.sqrt(rho - mstar**2)
            return np.square(mv - mstar) + np.square(dr)

        w2_sq = spherical.aux_canonical_expectation(cost_sq, mu, rho, N)
        bound = coupling.lipschitz_error_bound(1, N, 2.0, math.sqrt(max(w2_sq, 0.0)))
        rows.append(ResultRow(N, gap, bound, math.nan, 0.0,
                              (time.perf_counter() - t0) * 1e3))
    slope, stderr = fit_rate(rows)
    dominated = all(r.gap <= r.bound_coupling for r in rows)
    passed = dominated and slope <= -0.4
    return rows, slope, stderr, passed, f"m_star={mstar:.6f}"


def _run_spherical_energy_converge(plan: ExperimentPlan):
    beta = plan.params.get("beta", 2.0)
    rho = plan.params.get("rho", 1.0)
    J = plan.params.get("J", 1.0)
    estar = spherical.epsilon_star(beta, rho, J)
    rows = []
    for N in plan.N_grid:
        t0 = time.perf_counter()
        e_mean = spherical.canonical_energy_expectation(lambda e: e, beta, rho, N, J=J)
        gap = abs(e_mean - estar)

        def cost_sq(ev):
            ev = np.asarray(ev)
            a = np.sqrt(-2.0 * ev / J) - math.sqrt(-2.0 * estar / J)
            b = np.sqrt(rho + 2.0 * ev / J) - math.sqrt(rho + 2.0 * estar / J)
            return np.square(a) + np.square(b)

        w2_sq = spherical.canonical_energy_expectation(cost_sq, beta, rho, N, J=J)
        bound = coupling.lipschitz_error_bound(1, N, 2.0, math.sqrt(max(w2_sq, 0.0)))
        rows.append(ResultRow(N, gap, bound, math.nan, 0.0,
                              (time.perf_counter() - t0) * 1e3))
    slope, stderr = fit_rate(rows)
    dominated = all(r.gap <= r.bound_coupling for r in rows)
    passed = dominated and slope <= -0.4
    return rows, slope, stderr, passed, f"epsilon_star={estar:.6f}"


def _run_gc_direct_coupling(plan: ExperimentPlan):
    m = plan.params.get("m", 0.0)
    rho = plan.params.get("rho", 1.0)
    samples = int(plan.params.get("samples", 4000))
    budget_cap = float(plan.params.get("budget_cap", 2e9))
    seeds = np.random.SeedSequence(plan.seed).spawn(len(plan.N_grid))
    rows = []
    notes = ""
    for N, ss in zip(plan.N_grid, seeds):
        if samples * N > budget_cap:
            notes = f"budget cap reached at N={N}; partial table"
            break
        t0 = time.perf_counter()
        rep = spherical.direct_coupling_cost_gc_mc(
            m, rho, N, seed=int(ss.generate_state(1)[0]), samples=samples
        )
        # the fitted quantity is the squared cost, which decays like 1/N
        rows.append(ResultRow(N, rep.mean_pth_power, rep.bound, math.nan,
                              rep.se_pth_power, (time.perf_counter() - t0) * 1e3))
    slope, stderr = fit_rate(rows)
    within = all(r.gap <= r.bound_coupling + 3.0 * r.se for r in rows)
    passed = within and abs(slope + 1.0) <= 0.1
    return rows, slope, stderr, passed, notes or f"within_bound={within}"


def _run_dominance_decay(plan: ExperimentPlan):
    h = plan.params.get("h", 1.0)
    J = plan.params.get("J", 1.0)
    rho = plan.params.get("rho", 1.0)
    eps = plan.params.get("epsilon", -0.25)
    rows = []
    for N in plan.N_grid:
        t0 = time.perf_counter()
        model = spherical.SphericalModel(N=N, J=J, h=h, rho=rho)
        ee = spherical.EnergyEnsemble(model, eps)
        m_p, m_n = ee.branches
        ratio = spherical.subdominant_weight_ratio(ee)
        w_sub = ratio / (1.0 + ratio)
        # exact phi_1 gap between the mixed ensemble and its dominant branch
        gap = w_sub * abs(m_p - m_n)
        rows.append(ResultRow(N, gap, ratio * abs(m_p - m_n), math.nan, 0.0,
                              (time.perf_counter() - t0) * 1e3))
    decays = [
        a.gap / b.gap if b.gap > 0 else math.inf
        for a, b in zip(rows, rows[1:])
        if 2 * a.N == b.N
    ]
    geometric = all(d >= 10.0 for d in decays) if decays else rows[-1].gap == 0.0
    try:
        slope, stderr = fit_rate(rows)
    except DomainError:
        slope = stderr = None
    return rows, slope, stderr, geometric, f"per_doubling_factors={decays}"


def _run_laplace_check(plan: ExperimentPlan):
    rows = []
    ok = True
    for prob in laplace.REGISTERED_PROBLEMS:
        for lam in plan.N_grid:
            t0 = time.perf_counter()
            ref = laplace.quadrature_reference(prob, float(lam))
            lead = laplace.leading_term(prob, float(lam))
            gap = abs(ref / lead - 1.0)
            bound = 5.0 * float(lam) ** (-1.0 / prob.mu_exp)
            ok = ok and gap <= bound
            rows.append(ResultRow(int(lam), gap, bound, math.nan, 0.0,
                                  (time.perf_counter() - t0) * 1e3))
    try:
        slope, stderr = fit_rate(rows)
    except DomainError:
        slope = stderr = None
    return rows, slope, stderr, ok, "lambda grid reused as the N column"


def _random_exchangeable_measure(rng: np.random.Generator, N: int) -> DiscreteMeasure:
    """Random mixture of i.i.d.-site measures on a two-letter alphabet.

    Mixtures of product measures are exchangeable by construction, which
    sidesteps the factorial cost of symmetrizing an arbitrary support.
    """
    letters = rng.normal(0.0, 1.0, size=2)
    n_comp = int(rng.integers(1, 4))
    comp_w = rng.dirichlet(np.ones(n_comp))
    comp_p = rng.uniform(0.05, 0.95, size=n_comp)
    patterns = np.array(
        [[(i >> b) & 1 for b in range(N)] for i in range(2**N)], dtype=int
    )
    points = letters[patterns]
    counts = patterns.sum(axis=1)
    weights = np.zeros(2**N)
    for w, p in zip(comp_w, comp_p):
        weights += w * p**counts * (1 - p) ** (N - counts)
    return DiscreteMeasure(points, weights)


def _clipped_lipschitz(rng: np.random.Generator, n: int, p: float) -> LocalObservable:
    a = rng.normal(size=n)
    q = p / (p - 1.0) if p > 1 else math.inf
    norm = np.sum(np.abs(a) ** q) ** (1 / q) if q < math.inf else np.max(np.abs(a))
    a = a / max(norm, 1e-12)  # unit dual norm => 1-Lipschitz w.r.t. the p-norm
    b = float(rng.normal())
    return LocalObservable(tuple(range(n)), lambda v: float(np.clip(a @ v + b, -1, 1)),
                           lipschitz_constant=1.0, p_norm=p, sup_bound=1.0)


def _run_ot_oracle_check(plan: ExperimentPlan):
    trials = int(plan.params.get("trials", 100))
    p = float(plan.params.get("p", 2.0))
    rng = np.random.default_rng(plan.seed)
    rows = []
    failures = 0
    for t in range(trials):
        t0 = time.perf_counter()
        N = int(rng.choice(plan.N_grid))
        mu1 = _random_exchangeable_measure(rng, N)
        mu2 = _random_exchangeable_measure(rng, N)
        wp = coupling.wp_bruteforce(mu1, mu2, p)
        size_I = int(rng.integers(1, N))
        obs = _clipped_lipschitz(rng, size_I, p)
        gap = abs(mu1.local_expectation(obs) - mu2.local_expectation(obs))
        bound = coupling.lipschitz_error_bound(size_I, N, p, wp)
        # moment route on the same pair
        J = MomentIndex(tuple(int(x) for x in rng.integers(0, N, size=2)))
        q = p / (p - 1.0)
        order = q * (J.length - 1)
        M = max(
            max(mu1.abs_site_moment(lab, order), mu2.abs_site_moment(lab, order))
            ** (1.0 / order)
            for lab in J.distinct
        )
        mgap = abs(mu1.moment(J) - mu2.moment(J))
        mbound = coupling.moment_error_bound(J, p, p0=4.0, M=M, wp_value=wp, N=N)
        tol = 1e-9
        if gap > bound + tol or mgap > mbound + tol:
            failures += 1
        rows.append(ResultRow(N, gap, bound, mbound, 0.0,
                              (time.perf_counter() - t0) * 1e3))
    passed = failures == 0
    return rows, None, None, passed, f"failures={failures}/{trials}"


_RUNNERS = {
    "paramagnet_converge": _run_paramagnet_converge,
    "bound_compare": _run_bound_compare,
    "spherical_mag_converge": _run_spherical_mag_converge,
    "spherical_energy_converge": _run_spherical_energy_converge,
    "gc_direct_coupling": _run_gc_direct_coupling,
    "dominance_decay": _run_dominance_decay,
    "laplace_check": _run_laplace_check,
    "ot_oracle_check": _run_ot_oracle_check,
}


def run(plan: ExperimentPlan) -> ExperimentResult:
    """Execute a plan; deterministic for a fixed (plan, seed)."""
    try:
        rows, slope, stderr, passed, notes = _RUNNERS[plan.experiment_id](plan)
    except EnsembleLabError as exc:
        raise type(exc)(f"[{plan.experiment_id}] {exc}") from exc
    result = ExperimentResult(plan, rows, slope, stderr, passed, notes)
    if plan.out:
        write_csv(result, plan.out)
    if plan.summary_out:
        write_summary(result, plan.summary_out)
    return result


def write_csv(result: ExperimentResult, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in result.rows:
            writer.writerow([r.N, repr(r.gap), repr(r.bound_coupling),
                             repr(r.bound_relent), repr(r.se), f"{r.runtime_ms:.3f}"])


def write_summary(result: ExperimentResult, path: str) -> None:
    payload = {
        "experiment_id": result.plan.experiment_id,
        "params": {"N_grid": list(result.plan.N_grid),
                   "seed": result.plan.seed, **result.plan.params},
        "slope": None if result.slope is None else float(result.slope),
        "slope_stderr": None if result.slope_stderr is None else float(result.slope_stderr),
        "pass": bool(result.passed),
        "notes": result.notes,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
