import math

import numpy as np
import pytest
import scipy.linalg as la
from scipy.integrate import quad

from oufield.exceptions import DataError
from oufield.grid import Grid
from oufield.operators import assemble_advection, assemble_diffusion
from oufield.sulfate import SulfateModel, Theta, REFERENCE_THETA

from helpers import KM, line_grid, random_wind, square_grid, uniform_wind


def build_model(grid, theta, X, wind=None, rng=None):
    D = assemble_diffusion(grid)
    if wind is None:
        wind = uniform_wind(grid)
    C = assemble_advection(grid, wind)
    return SulfateModel(grid, D, C, X, theta)


def single_cell_model(a=2.0, sigma2=1.0, T=1.0, x=0.0, eta=1.0, beta=1.0):
    grid = Grid(nx=1, ny=1, dx=1.0, dy=1.0, origin=(0.0, 0.0), km_per_deg_lon=KM)
    theta = Theta(gamma=0.0, alpha=0.0, eta=eta, beta=beta, sigma2=sigma2,
                  delta=a, T=T)
    return build_model(grid, theta, np.array([x]))


class TestTheta:
    def test_positivity_enforced(self):
        with pytest.raises(ValueError):
            Theta(gamma=-1, alpha=0, eta=1, beta=1, sigma2=1)
        with pytest.raises(ValueError):
            Theta(gamma=1, alpha=0, eta=0.0, beta=1, sigma2=1)
        with pytest.raises(ValueError):
            Theta(gamma=1, alpha=0, eta=1, beta=1, sigma2=-2)

    def test_free_value_round_trip(self):
        t = REFERENCE_THETA
        t2 = t.with_free_values(t.free_values())
        assert t2 == t
        assert t2.delta == 50.0 and t2.T == 1.0


class TestSteadyState:
    def test_diagonal_limit(self):
        grid = square_grid(3, 3)
        X = np.arange(9.0)
        theta = Theta(gamma=0.0, alpha=0.0, eta=2.0, beta=3.0, sigma2=1.0, delta=5.0)
        model = build_model(grid, theta, X)
        assert np.allclose(model.so2_steady_state(), (3.0 / 2.0) * X, rtol=1e-12)

    def test_zero_emissions(self):
        model = build_model(square_grid(3, 3),
                            Theta(gamma=1, alpha=0, eta=1, beta=1, sigma2=1, delta=2),
                            np.zeros(9))
        assert np.array_equal(model.so2_steady_state(), np.zeros(9))

    def test_line_grid_hand_solve(self):
        grid = line_grid(3)
        theta = Theta(gamma=1.0, alpha=0.0, eta=1.0, beta=1.0, sigma2=1.0, delta=1.0)
        model = build_model(grid, theta, np.array([0.0, 1.0, 0.0]))
        assert np.allclose(model.so2_steady_state(), [0.25, 0.5, 0.25], rtol=1e-12)


class TestMean:
    def test_cascaded_diagonal(self):
        grid = square_grid(3, 3)
        X = np.linspace(0, 4, 9)
        theta = Theta(gamma=0.0, alpha=0.0, eta=0.5, beta=2.0, sigma2=1.0, delta=4.0)
        model = build_model(grid, theta, X)
        assert np.allclose(model.so4_mean(), theta.beta * X / theta.delta, rtol=1e-12)

    def test_zero_emissions(self):
        model = build_model(square_grid(3, 3),
                            Theta(gamma=1, alpha=0.5, eta=1, beta=1, sigma2=1, delta=2),
                            np.zeros(9),
                            wind=uniform_wind(square_grid(3, 3), u=1.0))
        assert np.allclose(model.so4_mean(), 0.0)

    def test_linearity_in_beta(self):
        rng = np.random.default_rng(4)
        grid = square_grid(5, 5)
        X = rng.uniform(0, 10, grid.n)
        base = Theta(gamma=2.0, alpha=0.7, eta=0.8, beta=1.3, sigma2=1.0, delta=3.0)
        model = build_model(grid, base, X, wind=random_wind(grid, rng))
        mu1 = model.so4_mean()
        model.set_theta(base.replace(beta=2 * base.beta))
        mu2 = model.so4_mean()
        assert np.allclose(mu2, 2 * mu1, rtol=1e-12)

    def test_monotone_in_emissions(self):
        rng = np.random.default_rng(17)
        for trial in range(5):
            grid = square_grid(5, 5)
            X = rng.uniform(0, 10, grid.n)
            theta = Theta(gamma=rng.uniform(0.5, 3), alpha=rng.uniform(0, 1),
                          eta=rng.uniform(0.2, 2), beta=1.0, sigma2=1.0, delta=2.0)
            model = build_model(grid, theta, X, wind=random_wind(grid, rng))
            mu = model.so4_mean()
            X2 = X.copy()
            X2[rng.integers(grid.n)] += 5.0
            model2 = build_model(grid, theta, X2, wind=None)
            # same operators: reuse via model.so4_mean(X=...)
            mu2 = model.so4_mean(X=X2) / theta.beta * theta.beta
            assert np.all(mu2 >= mu - 1e-12 * np.abs(mu).max())


class TestLikelihood:
    def test_scalar_value_against_dense_oracle(self):
        model = single_cell_model(a=2.0, sigma2=1.0, T=1.0, x=0.0)
        got = model.log_likelihood(np.array([0.0]))
        # oracle: scalar Gaussian with mean 0 and variance sigma2/(T a^2) = 0.25
        var = 0.25
        expect = -0.5 * math.log(2 * math.pi * var)
        assert got == pytest.approx(expect, abs=1e-12)
        assert got == pytest.approx(-0.225791, abs=1e-6)

    def test_mode_at_mean(self):
        rng = np.random.default_rng(3)
        grid = square_grid(3, 3)
        X = rng.uniform(0, 5, grid.n)
        theta = Theta(gamma=1.0, alpha=0.3, eta=0.7, beta=2.0, sigma2=0.5, delta=2.0)
        model = build_model(grid, theta, X, wind=random_wind(grid, rng))
        mu = model.so4_mean()
        at_mu = model.log_likelihood(mu)
        for _ in range(10):
            v = mu + rng.normal(0, 0.1, grid.n)
            assert model.log_likelihood(v) < at_mu

    def test_dense_oracle_4x4(self):
        rng = np.random.default_rng(11)
        grid = square_grid(4, 4)
        X = rng.uniform(0, 5, grid.n)
        theta = Theta(gamma=1.2, alpha=0.4, eta=0.6, beta=1.5, sigma2=0.8, delta=2.5)
        model = build_model(grid, theta, X, wind=random_wind(grid, rng))
        A = model.A_y().toarray()
        mu = model.so4_mean()
        cov = (theta.sigma2 / theta.T) * la.inv(A.T @ A)
        for _ in range(5):
            v = mu + rng.normal(0, 0.3, grid.n)
            resid = v - mu
            expect = (-0.5 * grid.n * math.log(2 * math.pi)
                      - 0.5 * np.linalg.slogdet(cov)[1]
                      - 0.5 * resid @ la.solve(cov, resid))
            assert model.log_likelihood(v) == pytest.approx(expect, abs=1e-8)

    def test_single_cell_density_integrates_to_one(self):
        model = single_cell_model(a=1.5, sigma2=0.7, T=2.0, x=3.0)
        total, err = quad(lambda v: math.exp(model.log_likelihood(np.array([v]))),
                          -10, 10, limit=200)
        assert total == pytest.approx(1.0, rel=1e-6)

    def test_empty_mask_is_flat(self):
        model = single_cell_model()
        mask = np.zeros(1, dtype=bool)
        assert model.log_likelihood(np.array([123.0]), mask) == 0.0
        model.set_theta(model.theta.replace(delta=7.0))
        assert model.log_likelihood(np.array([123.0]), mask) == 0.0

    def test_nonfinite_in_valid_cell_rejected(self):
        model = single_cell_model()
        with pytest.raises(DataError):
            model.log_likelihood(np.array([np.nan]))
        # masked-out nonfinite entries are fine
        assert np.isfinite(model.log_likelihood(np.array([np.nan]),
                                                np.zeros(1, dtype=bool)))

    def test_masked_drops_rows(self):
        rng = np.random.default_rng(23)
        grid = square_grid(4, 4)
        X = rng.uniform(0, 5, grid.n)
        theta = Theta(gamma=1.0, alpha=0.0, eta=0.6, beta=1.5, sigma2=0.8, delta=2.5)
        model = build_model(grid, theta, X)
        mu = model.so4_mean()
        v = mu + rng.normal(0, 0.3, grid.n)
        mask = np.ones(grid.n, dtype=bool)
        mask[[0, 5]] = False
        got = model.log_likelihood(v, mask)
        # oracle: same formula assembled by hand
        A = model.A_y().toarray()
        v_filled = np.where(mask, v, mu)
        r = A @ v_filled - theta.eta * model.so2_steady_state()
        expect = (0.5 * mask.sum() * math.log(theta.T / (2 * math.pi * theta.sigma2))
                  + np.linalg.slogdet(A)[1]
                  - 0.5 * (theta.T / theta.sigma2) * (r[mask] @ r[mask]))
        assert got == pytest.approx(expect, rel=1e-12)

    def test_logdet_matches_dense(self):
        rng = np.random.default_rng(31)
        for nx, ny in ((3, 3), (10, 10)):
            grid = square_grid(nx, ny)
            theta = Theta(gamma=1.1, alpha=0.5, eta=0.4, beta=1.0, sigma2=1.0,
                          delta=1.5)
            model = build_model(grid, theta, np.zeros(grid.n),
                                wind=random_wind(grid, rng))
            _, _, logdet = model._y_ops()
            sign, dense = np.linalg.slogdet(model.A_y().toarray())
            assert sign == 1.0
            assert logdet == pytest.approx(dense, abs=1e-8)


class TestSampleField:
    def test_degenerate_noise_returns_mean(self):
        grid = square_grid(3, 3)
        X = np.ones(grid.n)
        theta = Theta(gamma=1.0, alpha=0.0, eta=1.0, beta=1.0, sigma2=1e-20, delta=2.0)
        model = build_model(grid, theta, X)
        draw = model.sample_field(np.random.default_rng(0))
        assert np.allclose(draw, model.so4_mean(), atol=1e-8)

    def test_seed_contract(self):
        model = single_cell_model(x=1.0)
        d1 = model.sample_field(np.random.default_rng(5))
        d2 = model.sample_field(np.random.default_rng(5))
        d3 = model.sample_field(np.random.default_rng(6))
        assert np.array_equal(d1, d2)
        assert not np.array_equal(d1, d3)

    def test_empirical_covariance(self):
        rng = np.random.default_rng(2)
        grid = square_grid(3, 3)
        X = rng.uniform(0, 3, grid.n)
        theta = Theta(gamma=0.8, alpha=0.3, eta=0.5, beta=1.0, sigma2=1.0, delta=2.0)
        model = build_model(grid, theta, X, wind=random_wind(grid, rng))
        draws = np.array([model.sample_field(rng) for _ in range(50_000)])
        emp = np.cov(draws.T)
        A = model.A_y().toarray()
        target = (theta.sigma2 / theta.T) * la.inv(A.T @ A)
        rel = la.norm(emp - target, "fro") / la.norm(target, "fro")
        assert rel < 0.05


class TestCaching:
    def test_beta_sigma_reuse_factorizations(self):
        model = single_cell_model()
        lu_y1 = model._y_ops()[1]
        lu_z1 = model._z_ops()[1]
        model.set_theta(model.theta.replace(beta=9.0, sigma2=3.0))
        assert model._y_ops()[1] is lu_y1
        assert model._z_ops()[1] is lu_z1

    def test_eta_invalidates_only_so2_operator(self):
        model = single_cell_model()
        lu_y1 = model._y_ops()[1]
        lu_z1 = model._z_ops()[1]
        model.set_theta(model.theta.replace(eta=0.9))
        assert model._y_ops()[1] is lu_y1
        assert model._z_ops()[1] is not lu_z1

    def test_clone_isolated(self):
        model = single_cell_model()
        clone = model.clone()
        clone.set_theta(model.theta.replace(delta=9.0))
        assert model.theta.delta == 2.0
