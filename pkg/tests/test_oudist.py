import math

import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp

from oufield.exceptions import NumericalError, StabilityError, UnsupportedSizeError
from oufield.operators import (
    SparseOperator,
    assemble_advection,
    assemble_diffusion,
    assemble_transport,
)
from oufield.oudist import (
    GaussianField,
    OUSystem,
    expm_action,
    phi_error_bound,
    slu_logdet,
    solve_lyapunov,
    stationary,
    time_avg_exact,
    time_avg_sar,
    transient,
)
from oufield.simulate import SimConfig, simulate_ensemble

from helpers import (
    line_grid,
    psi_by_quadrature,
    random_stable_dense,
    random_wind,
    scalar_operator,
    square_grid,
    uniform_wind,
    wind_system,
)


def scalar_system(a, m=0.0, sigma2=1.0):
    return OUSystem(A=scalar_operator(a), m=[m], sigma2=sigma2)


class TestLyapunov:
    def test_scalar(self):
        assert solve_lyapunov(np.array([[2.0]]), np.array([[1.0]]))[0, 0] == \
            pytest.approx(0.25)

    def test_symmetric_shortcut_matches_bartels_stewart(self):
        grid = line_grid(3)
        A = assemble_diffusion(grid).toarray() + np.eye(3)
        X_fast = solve_lyapunov(A, np.eye(3))
        X_bs = la.solve_continuous_lyapunov(A, np.eye(3))
        assert np.allclose(X_fast, X_bs, rtol=1e-10)
        assert np.allclose(X_fast, 0.5 * la.inv(A), rtol=1e-12)

    def test_random_residuals(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            n = rng.integers(2, 31)
            A = random_stable_dense(rng, n)
            B = rng.normal(size=(n, n))
            Q = B @ B.T
            X = solve_lyapunov(A, Q)
            resid = la.norm(A @ X + X @ A.T - Q, "fro")
            assert resid <= 1e-8 * la.norm(Q, "fro")

    def test_unstable_rejected(self):
        A = np.diag([1.0, -0.5])
        with pytest.raises(StabilityError):
            solve_lyapunov(A, np.eye(2))

    def test_size_gate(self):
        with pytest.raises(UnsupportedSizeError):
            solve_lyapunov(np.eye(10), np.eye(10), threshold=5)


class TestTransient:
    def test_time_zero(self):
        sys = wind_system()
        y0 = np.linspace(0, 1, sys.n)
        fld = transient(sys, y0, 0.0)
        assert np.allclose(fld.mean, y0)
        assert np.abs(fld.cov).max() == 0.0

    def test_long_time_reaches_stationary(self):
        sys = wind_system()
        lam = la.eigvals(sys.A.toarray()).real.min()
        t = 50.0 / lam
        fld = transient(sys, np.zeros(sys.n), t)
        stat = stationary(sys)
        assert np.allclose(fld.mean, stat.mean, rtol=1e-6)
        assert np.allclose(fld.cov, stat.cov, rtol=1e-6,
                           atol=1e-6 * np.abs(stat.cov).max())

    def test_scalar_closed_form(self):
        fld = transient(scalar_system(1.0), [3.0], 1.0)
        assert fld.mean[0] == pytest.approx(3 * math.exp(-1), abs=1e-10)
        assert fld.cov[0, 0] == pytest.approx((1 - math.exp(-2)) / 2, abs=1e-10)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            transient(scalar_system(1.0), [0.0], -0.5)

    def test_covariance_psd(self):
        sys = wind_system(seed=3)
        for t in (0.01, 0.3, 2.0, 20.0):
            fld = transient(sys, np.zeros(sys.n), t)
            w = la.eigvalsh(fld.cov)
            assert w.min() >= -1e-9 * max(np.trace(fld.cov), 1e-300)

    def test_semigroup_mean(self):
        sys = wind_system(seed=5)
        y0 = np.linspace(-1, 1, sys.n)
        s, t = 0.4, 0.9
        mid = transient(sys, y0, s).mean
        two_step = transient(sys, mid, t).mean
        one_step = transient(sys, y0, s + t).mean
        assert np.allclose(two_step, one_step, rtol=1e-9, atol=1e-12)


class TestStationary:
    def test_scalar(self):
        fld = stationary(OUSystem(A=scalar_operator(2.0), m=[4.0], sigma2=1.0))
        assert fld.mean[0] == pytest.approx(2.0)
        assert fld.precision is not None
        assert fld.precision[0, 0] == pytest.approx(4.0)  # var = 1/4

    def test_constant_mode(self):
        grid = line_grid(3)
        A = assemble_transport(assemble_diffusion(grid),
                               assemble_advection(grid, uniform_wind(grid)), 1.0, 0.0, 1.0)
        fld = stationary(OUSystem(A=A, m=np.ones(3), sigma2=1.0))
        assert np.allclose(fld.mean, 1.0, rtol=1e-12)

    def test_symmetric_precision_matches_lyapunov(self):
        grid = square_grid(4, 3)
        A = assemble_transport(assemble_diffusion(grid),
                               assemble_advection(grid, uniform_wind(grid)), 2.0, 0.0, 0.8)
        sigma2 = 1.7
        sys = OUSystem(A=A, m=np.zeros(grid.n), sigma2=sigma2)
        fld = stationary(sys)
        S = solve_lyapunov(A.toarray(), sigma2 * np.eye(grid.n))
        prod = S @ ((2.0 / sigma2) * A.toarray())
        assert la.norm(prod - np.eye(grid.n), "fro") <= 1e-8 * math.sqrt(grid.n)
        assert fld.precision is not None

    def test_nonsymmetric_matches_ensemble(self):
        # long-run Euler-Maruyama ensemble vs the Lyapunov covariance
        sys = wind_system(nx=4, ny=4, delta=2.0, seed=7)
        fld = stationary(sys)
        rng = np.random.default_rng(99)
        cfg = SimConfig(dt=0.005, T=6.0, n_paths=20_000, initial="zero")
        ens = simulate_ensemble(sys, cfg, rng)
        emp_cov = np.cov(ens.T)
        rel = la.norm(emp_cov - fld.cov, "fro") / la.norm(fld.cov, "fro")
        assert rel < 0.10
        assert np.allclose(ens.mean(axis=0), fld.mean,
                           atol=5 * np.sqrt(np.diag(fld.cov) / cfg.n_paths).max())


class TestTimeAveraged:
    def test_scalar_psi(self):
        fld = time_avg_exact(scalar_system(2.0), 1.0)
        phi = 0.25
        tail = 2 * 0.25 * (1 - math.exp(-2)) / 4
        assert fld.cov[0, 0] == pytest.approx(phi - tail, abs=1e-12)
        assert fld.cov[0, 0] == pytest.approx(0.141917, abs=1e-6)

    def test_long_window_shrinks(self):
        sys = wind_system(seed=2)
        small = time_avg_exact(sys, 1.0)
        big = time_avg_exact(sys, 2000.0)
        assert np.abs(big.cov).max() < np.abs(small.cov).max() / 500
        assert np.allclose(big.mean, small.mean, rtol=1e-10)

    def test_quadrature_oracle_symmetric(self):
        grid = square_grid(3, 3)
        A = assemble_transport(assemble_diffusion(grid),
                               assemble_advection(grid, uniform_wind(grid)), 1.0, 0.0, 1.5)
        sys = OUSystem(A=A, m=np.zeros(grid.n), sigma2=1.0)
        T = 1.0
        fld = time_avg_exact(sys, T)
        Ad = A.toarray()
        S = solve_lyapunov(Ad, np.eye(grid.n))
        quad = psi_by_quadrature(Ad, S, T, nodes=400)
        rel = la.norm(quad - fld.cov, "fro") / la.norm(fld.cov, "fro")
        assert rel < 1e-4

    def test_quadrature_oracle_with_wind(self):
        sys = wind_system(nx=3, ny=3, seed=21)
        T = 0.8
        fld = time_avg_exact(sys, T)
        Ad = sys.A.toarray()
        S = solve_lyapunov(Ad, sys.noise_cov())
        quad = psi_by_quadrature(Ad, S, T, nodes=500)
        rel = la.norm(quad - fld.cov, "fro") / la.norm(fld.cov, "fro")
        assert rel < 1e-4

    def test_nonpositive_window_rejected(self):
        with pytest.raises(ValueError):
            time_avg_exact(scalar_system(1.0), 0.0)
        with pytest.raises(ValueError):
            time_avg_sar(scalar_system(1.0), -1.0)


class TestSAR:
    def test_scalar_variance(self):
        fld = time_avg_sar(scalar_system(2.0), 1.0)
        assert fld.precision[0, 0] == pytest.approx(4.0)

    def test_gap_at_delta_t_50(self):
        grid = square_grid(4, 4)
        A = assemble_transport(assemble_diffusion(grid),
                               assemble_advection(grid, uniform_wind(grid)), 1.0, 0.0, 50.0)
        sys = OUSystem(A=A, m=np.zeros(grid.n), sigma2=1.0)
        psi = time_avg_exact(sys, 1.0).cov
        phi = time_avg_sar(sys, 1.0).covariance_dense()
        gap = la.norm(psi - phi, 2)
        assert gap <= 8.0e-6

    def test_requires_identity_noise(self):
        sys = OUSystem(A=scalar_operator(2.0), m=[0.0], sigma2=1.0, B=np.array([[2.0]]))
        with pytest.raises(ValueError):
            time_avg_sar(sys, 1.0)

    def test_large_grid_precision_factorizes(self):
        # reference parameter point on the full-size analysis grid
        rng = np.random.default_rng(0)
        grid = square_grid(116, 70, dx=14.2, dy=14.2)
        D = assemble_diffusion(grid)
        C = assemble_advection(grid, random_wind(grid, rng, scale=3.0))
        A = assemble_transport(D, C, 1510.0, 0.53, 50.0)
        sys = OUSystem(A=A, m=np.zeros(grid.n), sigma2=24_000.0)
        fld = time_avg_sar(sys, 1.0)
        assert fld.precision_factor is not None
        assert fld.n == 8120
        x = rng.normal(size=grid.n)
        assert x @ (fld.precision @ x) > 0


class TestErrorBound:
    def test_direct_value(self):
        assert phi_error_bound(50.0, 1.0) == pytest.approx(8.0e-6, rel=1e-4)
        assert phi_error_bound(50.0, 1.0) == pytest.approx(
            (1 - math.exp(-50.0)) / 50.0**3)

    def test_monotone_in_window(self):
        assert phi_error_bound(1.0, 0.01) > phi_error_bound(1.0, 0.1)

    def test_domain(self):
        for bad in ((0.0, 1.0), (1.0, 0.0), (-2.0, 1.0)):
            with pytest.raises(ValueError):
                phi_error_bound(*bad)

    @pytest.mark.parametrize("delta", [1.0, 5.0, 50.0])
    @pytest.mark.parametrize("T", [0.1, 1.0])
    def test_bound_holds_for_diffusion_family(self, delta, T):
        grid = square_grid(4, 4)
        A = assemble_transport(assemble_diffusion(grid),
                               assemble_advection(grid, uniform_wind(grid)), 1.0, 0.0, delta)
        sys = OUSystem(A=A, m=np.zeros(grid.n), sigma2=1.0)
        psi = time_avg_exact(sys, T).cov
        phi = time_avg_sar(sys, T).covariance_dense()
        assert la.norm(psi - phi, 2) <= phi_error_bound(delta, T) * (1 + 1e-10)


class TestExpmAction:
    def test_identity_at_zero(self):
        A = scalar_operator(3.0)
        V = np.array([[1.0], [2.0]]).T
        assert np.array_equal(expm_action(A, 0.0, V), V)

    def test_diagonal(self):
        A = np.diag([1.0, 2.0])
        out = expm_action(sp.csr_matrix(A), 1.0, np.eye(2))
        assert np.allclose(out, np.diag([math.exp(-1), math.exp(-2)]), rtol=1e-12)

    def test_triangular_closed_form(self):
        # A = I + N with N the shift; e^{-At} = e^{-t} (I - Nt + N^2 t^2/2)
        A = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]])
        t = 0.7
        expect = math.exp(-t) * np.array([
            [1.0, -t, t * t / 2], [0.0, 1.0, -t], [0.0, 0.0, 1.0]])
        dense = expm_action(SparseOperator(matrix=sp.csr_matrix(A)), t)
        assert np.allclose(dense, expect, rtol=0, atol=1e-12)
        action = expm_action(SparseOperator(matrix=sp.csr_matrix(A)), t, np.eye(3))
        assert np.allclose(action, expect, rtol=0, atol=1e-12)


class TestGaussianField:
    def test_asymmetric_cov_rejected(self):
        bad = np.array([[1.0, 0.5], [0.2, 1.0]])
        with pytest.raises(NumericalError):
            GaussianField(mean=np.zeros(2), cov=bad, kind="stationary")

    def test_indefinite_precision_rejected(self):
        Q = sp.csr_matrix(np.diag([1.0, -2.0]))
        with pytest.raises(NumericalError):
            GaussianField(mean=np.zeros(2), precision=Q, kind="stationary")

    def test_export(self, tmp_path):
        fld = stationary(OUSystem(A=scalar_operator(2.0), m=[4.0], sigma2=1.0))
        fld.export(tmp_path / "f")
        mean = np.loadtxt(tmp_path / "f_mean.txt")
        assert mean == pytest.approx(2.0)
        assert (tmp_path / "f_precision.mtx").exists()

    def test_slu_logdet_tracks_sign(self):
        rng = np.random.default_rng(8)
        M = rng.normal(size=(6, 6)) + 6 * np.eye(6)
        import scipy.sparse.linalg as spla

        lu = spla.splu(sp.csc_matrix(M))
        sign, logabs = slu_logdet(lu)
        det = la.det(M)
        assert sign == pytest.approx(np.sign(det))
        assert logabs == pytest.approx(math.log(abs(det)), rel=1e-10)
