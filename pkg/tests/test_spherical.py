import math

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import gammaln

from ensemble_lab.errors import DegenerateEnsembleError, DomainError
from ensemble_lab import spherical as sp


def _model(N=64, J=1.0, h=0.0, rho=1.0):
    return sp.SphericalModel(N=N, J=J, h=h, rho=rho)


# ---------------------------------------------------------------------------
# change of variables


def test_U_maps_constant_vector_to_first_axis():
    for N in (5, 16, 100):
        x = np.ones(N)
        y = sp.apply_U(x)
        assert y[0] == pytest.approx(math.sqrt(N), rel=1e-12)
        assert np.max(np.abs(y[1:])) < 1e-10


def test_U_kills_mean_free_vectors():
    x = np.zeros(16)
    x[0], x[1] = 1.0, -1.0
    assert sp.apply_U(x)[0] == pytest.approx(0.0, abs=1e-12)


def test_U_round_trip_and_isometry():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(7, 16))
    y = sp.apply_U(x)
    assert np.linalg.norm(y, axis=1) == pytest.approx(np.linalg.norm(x, axis=1), rel=1e-10)
    assert sp.apply_U_inverse(y) == pytest.approx(x, rel=1e-10, abs=1e-12)
    assert y[:, 0] == pytest.approx(x.sum(axis=1) / 4.0, rel=1e-10)


def test_model_validation():
    with pytest.raises(DomainError):
        sp.SphericalModel(N=4)
    with pytest.raises(DomainError):
        sp.SphericalModel(N=10, J=-1.0)
    with pytest.raises(DegenerateEnsembleError):
        sp.MagnetizationEnsemble(_model(), 1.0)  # m^2 = rho


# ---------------------------------------------------------------------------
# fixed-(m, rho) sampling and marginal


def test_sample_constraints_exact():
    rng = np.random.default_rng(0)
    ens = sp.MagnetizationEnsemble(_model(N=64), 0.3)
    s = sp.sample_aux_mc(ens, rng, size=200)
    assert s.shape == (200, 64)
    assert np.max(np.abs(s.sum(axis=1) / 64 - 0.3)) < 1e-8
    assert np.max(np.abs((s**2).sum(axis=1) / 64 - 1.0)) < 1e-8


def test_sample_permutation_spot_check():
    # exchangeability: swapping two labels leaves <phi_i phi_j> unchanged
    rng = np.random.default_rng(1)
    ens = sp.MagnetizationEnsemble(_model(N=32), 0.2)
    s = sp.sample_aux_mc(ens, rng, size=20000)
    a = np.mean(s[:, 0] * s[:, 1])
    b = np.mean(s[:, 5] * s[:, 17])
    se = np.std(s[:, 0] * s[:, 1]) / math.sqrt(len(s))
    assert abs(a - b) < 3 * se + 3 * se


def test_marginal_density_normalization_against_beta_oracle():
    # closed form: int (1-t^2)^a dt = sqrt(pi) Gamma(a+1)/Gamma(a+3/2)
    for N in (5, 8, 50, 400):
        ens = sp.MagnetizationEnsemble(_model(N=N), 0.25)
        a = (N - 4) / 2
        closed = 0.5 * math.log(math.pi) + gammaln(a + 1) - gammaln(a + 1.5)
        closed += 0.5 * math.log((1 - 0.25**2) * (N - 1))
        assert sp._marginal_log_norm(ens) == pytest.approx(closed, abs=1e-9)


def test_marginal_density_properties():
    ens = sp.MagnetizationEnsemble(_model(N=20), 0.3)
    # zero outside the support disk
    edge = math.sqrt((1 - 0.09) * 19)
    assert sp.mc_marginal_density(ens, 0.3 + edge + 0.1) == 0.0
    # even around m
    for t in (0.1, 0.5, 1.2):
        assert sp.mc_marginal_density(ens, 0.3 + t) == pytest.approx(
            sp.mc_marginal_density(ens, 0.3 - t), rel=1e-12
        )
    # integrates to one
    total, _ = integrate.quad(lambda v: sp.mc_marginal_density(ens, v), 0.3 - edge, 0.3 + edge)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_marginal_density_gaussian_limit():
    # sup distance to N(m, rho - m^2) decreases along the N grid
    grid = np.linspace(-4, 4, 801)
    target = stats.norm.pdf(grid, 0.0, 1.0)
    sups = []
    for N in (10, 100, 1000, 10**4):
        ens = sp.MagnetizationEnsemble(_model(N=N), 0.0)
        sups.append(np.max(np.abs(sp.mc_marginal_density(ens, grid) - target)))
    assert all(b < a for a, b in zip(sups, sups[1:]))
    assert sups[-1] < 1e-3


def test_mc_site_moments_match_samples():
    rng = np.random.default_rng(10)
    ens = sp.MagnetizationEnsemble(_model(N=50), 0.4)
    mom = sp.mc_site_moments(ens)
    s = sp.sample_aux_mc(ens, rng, size=40000)
    assert np.mean(s[:, 3]) == pytest.approx(mom["site_mean"], abs=4 * np.std(s[:, 3]) / 200)
    assert np.mean(s[:, 3] ** 2) == pytest.approx(mom["site_second"], rel=0.02)
    assert np.mean(s[:, 0] * s[:, 1]) == pytest.approx(mom["pair"], abs=0.02)


def test_mc_site_function_expectation_matches_moments():
    ens = sp.MagnetizationEnsemble(_model(N=80), 0.25)
    mom = sp.mc_site_moments(ens)
    assert sp.mc_site_function_expectation(ens, lambda v: v) == pytest.approx(
        mom["site_mean"], abs=1e-9
    )
    assert sp.mc_site_function_expectation(ens, lambda v: v**2) == pytest.approx(
        mom["site_second"], rel=1e-8
    )


def test_mc_moment_boundedness():
    # even site moments up to order 8 stay bounded along the N grid
    for k in (2, 4, 6, 8):
        vals = []
        for N in (10, 100, 1000, 10**4):
            ens = sp.MagnetizationEnsemble(_model(N=N), 0.3)
            vals.append(sp.mc_site_function_expectation(ens, lambda v: v**k))
        assert max(vals) < 10 ** (k / 2 + 1)
        assert min(vals) > 0


# ---------------------------------------------------------------------------
# fixed-energy ensemble


def test_m_branches_examples():
    model = _model(N=10, J=1.0, h=0.0)
    assert sp.m_branches(-0.5, model) == pytest.approx((1.0, -1.0))
    model = sp.SphericalModel(N=10, J=1.0, h=1.0, rho=4.0)
    assert sp.m_branches(0.0, model) == pytest.approx((0.0, -2.0))
    assert sp.m_branches(0.5, model) == pytest.approx((-1.0, -1.0))
    with pytest.raises(DomainError):
        sp.m_branches(1.0, model)


def test_energy_window_membership():
    model = _model(N=10)  # h=0, J=1, rho=1: admissible (-1/2, 0]
    sp.EnergyEnsemble(model, -0.25)
    sp.EnergyEnsemble(model, 0.0)
    with pytest.raises(DomainError):
        sp.EnergyEnsemble(model, -0.5)  # left endpoint excluded
    with pytest.raises(DomainError):
        sp.EnergyEnsemble(model, -0.7)


def test_branch_cases():
    ee = sp.EnergyEnsemble(_model(N=10), -0.25)
    assert ee.branch_case is sp.BranchCase.TWO_BRANCH
    ee = sp.EnergyEnsemble(_model(N=10), 0.0)
    assert ee.branch_case is sp.BranchCase.DEGENERATE_TOP
    ee = sp.EnergyEnsemble(sp.SphericalModel(N=10, J=1.0, h=1.0), -0.25)
    assert ee.branch_case is sp.BranchCase.SINGLE_BRANCH


def test_branch_weights_h0_even():
    ee = sp.EnergyEnsemble(_model(N=33), -0.3)
    assert sp.branch_weights(ee) == pytest.approx((0.5, 0.5))


def test_dominance_ratio_two_branch_case():
    # genuine two-branch geometry with a small field
    for N in (50, 100, 200):
        model = sp.SphericalModel(N=N, J=1.0, h=0.1, rho=1.0)
        ee = sp.EnergyEnsemble(model, -0.2)
        m_p, m_n = ee.branches
        assert ee.branch_case is sp.BranchCase.TWO_BRANCH
        r = sp.subdominant_weight_ratio(ee)
        w_p, w_n = sp.branch_weights(ee)
        w_small, w_big = (w_p, w_n) if abs(m_p) < abs(m_n) else (w_n, w_p)
        # log-space agreement of the weight ratio with the closed form
        assert math.log(w_big / w_small) == pytest.approx(math.log(r), abs=1e-12)
    # the sub-dominant weight decays geometrically in N
    rs = [
        sp.subdominant_weight_ratio(
            sp.EnergyEnsemble(sp.SphericalModel(N=N, J=1.0, h=0.1, rho=1.0), -0.2)
        )
        for N in (50, 100, 200)
    ]
    assert rs[1] / rs[0] < 0.2 and rs[2] / rs[1] < 0.2


def test_energy_ensemble_expectation_combines_branches():
    model = sp.SphericalModel(N=40, J=1.0, h=0.1, rho=1.0)
    ee = sp.EnergyEnsemble(model, -0.2)
    got = sp.energy_ensemble_expectation(lambda e: e.m, ee)
    w_p, w_n = sp.branch_weights(ee)
    m_p, m_n = ee.branches
    assert got == pytest.approx(w_p * m_p + w_n * m_n, rel=1e-12)


# ---------------------------------------------------------------------------
# fluctuating ensembles by quadrature


def test_aux_canonical_odd_symmetry():
    assert sp.aux_canonical_expectation(lambda m: m, 0.0, 1.0, 200) == pytest.approx(
        0.0, abs=1e-9
    )


def test_aux_canonical_mean_approaches_m_star():
    mstar = sp.m_star(1.0, 1.0)
    for N in (100, 1000):
        mean, sigma = sp.aux_canonical_stats(1.0, 1.0, N)
        assert abs(mean - mstar) < 5.0 / math.sqrt(N)
        assert 0.1 < sigma * math.sqrt(N) < 10.0


def test_aux_canonical_variance_matches_quadratic_minimum():
    # leading order: Var(M/N) ~ 1/(N psi''(m*)) with
    # psi''(m) = (rho + m^2)/(rho - m^2)^2
    mu, rho, N = 1.0, 1.0, 2000
    mstar = sp.m_star(mu, rho)
    psi2 = (rho + mstar**2) / (rho - mstar**2) ** 2
    mean, sigma = sp.aux_canonical_stats(mu, rho, N)
    assert sigma**2 == pytest.approx(1.0 / (N * psi2), rel=0.1)


def test_m_star_solves_stationarity():
    for mu in (-2.0, -0.5, 0.5, 1.0, 3.0):
        m = sp.m_star(mu, 1.0)
        assert abs(m) < 1.0
        # psi'(m) = mu + m/(rho - m^2) = 0
        assert mu + m / (1.0 - m * m) == pytest.approx(0.0, abs=1e-10)


def test_canonical_energy_mean():
    # beta above the transition: <H/N> -> epsilon_star at rate 1/N
    beta, rho, J = 2.0, 1.0, 1.0
    estar = sp.epsilon_star(beta, rho, J)
    assert estar == pytest.approx(-0.25)
    for N in (100, 1000):
        got = sp.canonical_energy_expectation(lambda e: e, beta, rho, N, J=J)
        assert abs(got - estar) < 5.0 / math.sqrt(N)


def test_canonical_energy_subcritical_scaling():
    # beta below 1/(J rho): |<H/N>| = O(1/N)
    beta = 0.5
    vals = []
    for N in (100, 1000, 10**4):
        vals.append(abs(sp.canonical_energy_expectation(lambda e: e, beta, 1.0, N)) * N)
    assert max(vals) < 10 * vals[0]


def test_epsilon_star_edges():
    assert sp.epsilon_star(1.0, 1.0, 1.0) == 0.0  # beta = 1/(J rho)
    assert sp.epsilon_star(1e9, 1.0, 1.0) == pytest.approx(-0.5, rel=1e-6)


def test_canonical_energy_rejects_field():
    with pytest.raises(DomainError):
        sp.canonical_energy_expectation(lambda e: e, 1.0, 1.0, 100, h=0.5)


# ---------------------------------------------------------------------------
# grand-canonical ensembles


def test_gc_aux_mag_moments():
    params = sp.GrandCanonicalParams("aux_mag", mu=0.0, eta=0.5)
    sampler, mom = sp.gc_sample_and_moments(params, 32)
    assert mom.site_mean == 0.0
    assert mom.site_var == pytest.approx(1.0)
    rng = np.random.default_rng(3)
    s = sampler(rng, 20000)
    assert np.mean(s) == pytest.approx(0.0, abs=3 * 1.0 / math.sqrt(20000 * 32))
    assert np.var(s) == pytest.approx(1.0, rel=0.03)


def test_gc_matched_parameters():
    m, rho = 0.4, 1.0
    params = sp.GrandCanonicalParams.matched_to_mag(m, rho)
    sampler, mom = sp.gc_sample_and_moments(params, 16)
    assert mom.site_mean == pytest.approx(m)
    assert mom.site_var == pytest.approx(rho - m * m)


def test_gc_energy_variant():
    params = sp.GrandCanonicalParams("energy", mu=0.5, beta=0.25, J=1.0)
    sampler, mom = sp.gc_sample_and_moments(params, 64)
    rng = np.random.default_rng(5)
    s = sampler(rng, 20000)
    assert mom.site_mean == 0.0
    assert np.mean(s[:, 0]) == pytest.approx(0.0, abs=0.05)
    assert np.var(s) == pytest.approx(mom.site_var, rel=0.05)
    with pytest.raises(DomainError):
        sp.GrandCanonicalParams("energy", mu=0.5, beta=1.0, J=1.0)


def test_gc_alternate_variant():
    params = sp.GrandCanonicalParams("alternate", mu_bar=0.8, eta=0.5)
    sampler, mom = sp.gc_sample_and_moments(params, 16)
    assert mom.site_mean == 0.0
    rng = np.random.default_rng(6)
    s = sampler(rng, 40000)
    assert np.mean(s) == pytest.approx(0.0, abs=0.05)
    assert np.var(s) == pytest.approx(mom.site_var, rel=0.05)


# ---------------------------------------------------------------------------
# transport costs


def test_transport_cost_mag_values():
    assert sp.transport_cost_mag(0.3, 0.3, 1.0) == 0.0
    expected = math.sqrt(0.25 + (1.0 - math.sqrt(0.75)) ** 2)
    assert sp.transport_cost_mag(0.0, 0.5, 1.0) == pytest.approx(expected)
    with pytest.raises(DomainError):
        sp.transport_cost_mag(1.0, 0.5, 1.0)


def test_transport_cost_mag_sandwich():
    for m in (-0.8, -0.3, 0.0, 0.4, 0.7):
        for mp in (-0.6, 0.1, 0.5, 0.9):
            c = sp.transport_cost_mag(m, mp, 1.0)
            assert c >= abs(m - mp) - 1e-12
            lip = 1.0 + 2.0 / math.sqrt(1.0 - m * m)
            assert c <= lip * abs(m - mp) + 1e-12


def test_transport_cost_energy_values():
    assert sp.transport_cost_energy(-0.2, -0.2, 1.0, 1.0) == 0.0
    assert sp.transport_cost_energy(0.0, -0.01, 1.0, 1.0) <= 2.0 * 0.1
    with pytest.raises(DomainError):
        sp.transport_cost_energy(-0.6, -0.2, 1.0, 1.0)
    with pytest.raises(DomainError):
        sp.transport_cost_energy(-0.2, 0.1, 1.0, 1.0)


def test_transport_cost_energy_interior_lipschitz():
    J = rho = 1.0
    for eps in (-0.05, -0.15, -0.3, -0.45):
        for d in (1e-4, 1e-3):
            eps2 = eps + d
            c = sp.transport_cost_energy(eps, eps2, rho, J)
            lip = (2.0 / J) * (-2 * eps / J) ** -0.5 * (1.0 - (-2 * eps / (J * rho))) ** -0.5
            assert c / d <= lip * 1.01


def test_direct_coupling_z_cost_exact():
    rep = sp.direct_coupling_cost_gc_mc(0.5, 1.0, 100, seed=7, samples=500)
    assert rep.extras["z_cost_exact"] == pytest.approx(0.75 / 100)
    assert rep.bound == pytest.approx(1.0 / (0.75 * 100))
    # the mean-coordinate part of the cost alone reproduces (rho-m^2)/N:
    # check the full estimate is of that order
    assert rep.mean_pth_power == pytest.approx(1.5 * 0.75 / 100, rel=0.2)


def test_direct_coupling_energy_bound_beta_zero():
    rep = sp.direct_coupling_cost_gc_mc_energy(0.0, 0.5, 200, seed=8, samples=500)
    rho = 1.0
    assert rep.bound == pytest.approx(3.0 * rho / 200)
    assert rep.mean_pth_power <= rep.bound + 3 * rep.se_pth_power
