import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ensemble_lab.coupling import (
    CouplingReport,
    DiscreteJointDistribution,
    DiscreteMeasure,
    LocalObservable,
    MomentIndex,
    exchangeability_spot_check,
    free_energy_bound,
    lipschitz_error_bound,
    moment_error_bound,
    optimal_coupling,
    transport_cost_estimate,
    wp_bruteforce,
)
from ensemble_lab.errors import DomainError, SampleError


# ---------------------------------------------------------------------------
# error-bound formulas


def test_lipschitz_bound_simple_values():
    assert lipschitz_error_bound(1, 2, 1.0, 0.5) == pytest.approx(1.0)
    assert lipschitz_error_bound(2, 4, 2.0, 0.0) == 0.0
    # large-N limit: the correction factor goes to |I|^{1/p}
    val = lipschitz_error_bound(1, 10**6, 2.0, 1.0)
    assert val == pytest.approx(1.0000005, abs=1e-9)


def test_lipschitz_bound_domain_errors():
    with pytest.raises(DomainError):
        lipschitz_error_bound(2, 2, 1.0, 0.5)
    with pytest.raises(DomainError):
        lipschitz_error_bound(3, 2, 1.0, 0.5)
    with pytest.raises(DomainError):
        lipschitz_error_bound(1, 4, 0.5, 0.5)
    with pytest.raises(DomainError):
        lipschitz_error_bound(1, 4, 1.0, -0.1)


@given(
    st.integers(1, 20),
    st.integers(21, 5000),
    st.floats(1.0, 8.0),
    st.floats(0.0, 10.0),
)
def test_lipschitz_bound_monotone_in_wp(size_I, N, p, w):
    b1 = lipschitz_error_bound(size_I, N, p, w)
    b2 = lipschitz_error_bound(size_I, N, p, w + 1.0)
    assert 0.0 <= b1 < b2


def test_moment_bound_values():
    J1 = MomentIndex((3,))
    got = moment_error_bound(J1, 2.0, 4.0, 7.0, 0.1, 100)
    assert got == pytest.approx(0.1 * (1.0 / (1.0 - 0.01)) ** 0.5)
    J2 = MomentIndex((0, 5))
    got = moment_error_bound(J2, 2.0, 4.0, 1.0, 0.5, 8)
    assert got == pytest.approx(2.0 * (2.0 / (1.0 - 0.25)) ** 0.5 * 0.5)
    assert moment_error_bound(J2, 2.0, 4.0, 1.0, 0.0, 8) == 0.0


def test_moment_bound_admissibility():
    J = MomentIndex((0, 1, 2, 3, 4))  # n_J = 5 > 4 + 1 - 4/2 = 3
    with pytest.raises(DomainError, match="admissibility"):
        moment_error_bound(J, 2.0, 4.0, 1.0, 0.5, 100)
    with pytest.raises(DomainError):
        moment_error_bound(MomentIndex((0,)), 1.0, 4.0, 1.0, 0.5, 100)


def test_free_energy_bound_values():
    assert free_energy_bound(1.0, 1, 100, 1.0, 0.05, 0.0) == pytest.approx(0.05 / 0.99)
    assert free_energy_bound(2.0, 1, 100, 2.0, 0.0, 0.0) == 0.0
    with pytest.raises(DomainError):
        free_energy_bound(-1.0, 1, 100, 1.0, 0.05, 0.0)


# ---------------------------------------------------------------------------
# discrete measures and the LP oracle


def test_discrete_measure_validation():
    with pytest.raises(DomainError):
        DiscreteMeasure([[0.0], [1.0]], [0.7, 0.7])
    with pytest.raises(DomainError):
        DiscreteMeasure([[0.0], [1.0]], [1.5, -0.5])
    with pytest.raises(DomainError):
        DiscreteMeasure([[0.0], [1.0]], [1.0])


def _random_measure(rng, N, n_points):
    pts = rng.normal(size=(n_points, N))
    w = rng.dirichlet(np.ones(n_points))
    return DiscreteMeasure(pts, w)


def test_wp_identical_marginals_is_zero():
    rng = np.random.default_rng(3)
    mu = _random_measure(rng, 4, 6)
    assert wp_bruteforce(mu, mu, 2.0) == pytest.approx(0.0, abs=1e-9)


def test_wp_point_masses():
    x = np.array([1.0, -2.0, 0.5])
    y = np.array([0.0, 1.0, 1.5])
    mu1 = DiscreteMeasure([x], [1.0])
    mu2 = DiscreteMeasure([y], [1.0])
    for p in (1.0, 2.0, 3.0):
        expected = (np.mean(np.abs(x - y) ** p)) ** (1 / p)
        assert wp_bruteforce(mu1, mu2, p) == pytest.approx(expected, rel=1e-12)


def test_wp_symmetry_and_triangle():
    rng = np.random.default_rng(11)
    for _ in range(10):
        a = _random_measure(rng, 3, 4)
        b = _random_measure(rng, 3, 5)
        c = _random_measure(rng, 3, 3)
        dab = wp_bruteforce(a, b, 2.0)
        dba = wp_bruteforce(b, a, 2.0)
        assert dab == pytest.approx(dba, abs=1e-9)
        dac = wp_bruteforce(a, c, 2.0)
        dcb = wp_bruteforce(c, b, 2.0)
        assert dab <= dac + dcb + 1e-9


def test_wp_two_by_two_closed_form():
    # with 2-point supports the coupling has one free parameter; the optimum
    # sits at an endpoint of its interval, which gives an independent oracle
    rng = np.random.default_rng(5)
    for _ in range(25):
        pts1 = rng.normal(size=(2, 3))
        pts2 = rng.normal(size=(2, 3))
        a, b = rng.uniform(0.1, 0.9, size=2)
        mu1 = DiscreteMeasure(pts1, [a, 1 - a])
        mu2 = DiscreteMeasure(pts2, [b, 1 - b])
        cost = np.array(
            [[np.mean(np.abs(pts1[i] - pts2[j]) ** 2) for j in range(2)] for i in range(2)]
        )
        lo, hi = max(0.0, a + b - 1.0), min(a, b)
        best = math.inf
        for g11 in (lo, hi):
            gamma = np.array([[g11, a - g11], [b - g11, 1 - a - b + g11]])
            best = min(best, float(np.sum(gamma * cost)))
        assert wp_bruteforce(mu1, mu2, 2.0) == pytest.approx(best**0.5, abs=1e-9)


def test_optimal_coupling_returns_valid_joint():
    rng = np.random.default_rng(7)
    mu1 = _random_measure(rng, 3, 5)
    mu2 = _random_measure(rng, 3, 4)
    value, joint = optimal_coupling(mu1, mu2, 2.0)
    assert isinstance(joint, DiscreteJointDistribution)
    assert value >= 0.0
    # marginal consistency is enforced in the constructor; just sanity-check sums
    assert joint.weights.sum() == pytest.approx(1.0, abs=1e-9)


def test_joint_distribution_rejects_marginal_mismatch():
    mu1 = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    mu2 = DiscreteMeasure([[0.0], [1.0]], [0.3, 0.7])
    bad = np.array([[0.5, 0.0], [0.0, 0.5]])  # columns give (0.5, 0.5) != (0.3, 0.7)
    with pytest.raises(DomainError):
        DiscreteJointDistribution(bad, mu1, mu2)


# ---------------------------------------------------------------------------
# Monte Carlo transport-cost estimation


def test_transport_cost_identity_map():
    rep = transport_cost_estimate(
        lambda rng, n: rng.normal(size=(n, 6)), lambda x: x, 2.0, 6, 100, seed=1
    )
    assert rep.estimate == 0.0
    assert rep.standard_error == 0.0


def test_transport_cost_deterministic_map():
    # constant-shift map: cost is Omega-independent, so the SE vanishes
    shift = 0.75

    rep = transport_cost_estimate(
        lambda rng, n: rng.normal(size=(n, 4)),
        lambda x: x + shift,
        2.0,
        4,
        500,
        seed=9,
    )
    assert rep.estimate == pytest.approx(shift, rel=1e-12)
    assert rep.se_pth_power == pytest.approx(0.0, abs=1e-12)


def test_transport_cost_reproducible_for_fixed_seed_and_chunks():
    def sampler(rng, n):
        return rng.normal(size=(n, 5))

    def tmap(x):
        return 0.5 * x

    a = transport_cost_estimate(sampler, tmap, 2.0, 5, 1000, seed=42, chunk_size=100)
    b = transport_cost_estimate(sampler, tmap, 2.0, 5, 1000, seed=42, chunk_size=100)
    assert a.estimate == b.estimate
    assert a.standard_error == b.standard_error


def test_transport_cost_nonfinite_draw_reported():
    def bad_map(x):
        y = x.copy()
        y[..., 0] = np.nan
        return y

    with pytest.raises(SampleError) as err:
        transport_cost_estimate(
            lambda rng, n: rng.normal(size=(n, 3)), bad_map, 2.0, 3, 10, seed=0
        )
    assert err.value.draw_index is not None


def test_transport_cost_requires_two_samples():
    with pytest.raises(DomainError):
        transport_cost_estimate(
            lambda rng, n: rng.normal(size=(n, 3)), lambda x: x, 2.0, 3, 1, seed=0
        )


def test_transport_map_cost_dominates_lp_value():
    # any explicit coupling upper-bounds the LP infimum
    rng = np.random.default_rng(13)
    pts = rng.normal(size=(4, 3))
    mu1 = DiscreteMeasure(pts, np.full(4, 0.25))
    shifted = DiscreteMeasure(pts + 1.0, np.full(4, 0.25))
    lp = wp_bruteforce(mu1, shifted, 2.0)
    map_cost = 1.0  # the shift map moves every coordinate by exactly 1
    assert lp <= map_cost + 1e-9


# ---------------------------------------------------------------------------
# observables and the exchangeability helper


def test_local_observable_validation():
    with pytest.raises(DomainError):
        LocalObservable((), lambda v: 0.0)
    with pytest.raises(DomainError):
        LocalObservable((1, 1), lambda v: 0.0)
    obs = LocalObservable((2, 0), lambda v: float(v[0] - v[1]))
    assert obs.size == 2
    assert obs.evaluate_on_config(np.array([1.0, 5.0, 3.0])) == pytest.approx(2.0)


def test_exchangeability_spot_check():
    rng = np.random.default_rng(21)
    # i.i.d. product measure on {0, 1}^4: exchangeable
    pats = np.array([[(i >> b) & 1 for b in range(4)] for i in range(16)], dtype=float)
    p = 0.3
    w = p ** pats.sum(axis=1) * (1 - p) ** (4 - pats.sum(axis=1))
    exch = DiscreteMeasure(pats, w)
    obs = LocalObservable((0,), lambda v: float(v[0]))
    assert exchangeability_spot_check(exch, rng, obs)
    # a point mass at a non-constant vector is not exchangeable
    lump = DiscreteMeasure([[1.0, 0.0, 0.0, 0.0]], [1.0])
    assert not exchangeability_spot_check(lump, rng, obs, tol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_moment_index_power(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=5)
    J = MomentIndex((0, 0, 3))
    assert J.power(x) == pytest.approx(x[0] * x[0] * x[3])
    assert J.length == 3
    assert J.distinct == (0, 3)
