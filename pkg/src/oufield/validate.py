"""Self-contained oracle suite behind `oufield validate`.

Runs the brute-force cross-checks on small built-in fixtures: Lyapunov
residuals, scalar closed forms, the Monte Carlo check of the time-averaged
covariance, the SAR error bound, and operator structure.  Everything is
seeded, so a pass is reproducible.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg as la

from .operators import (
    assemble_advection,
    assemble_diffusion,
    assemble_transport,
    min_real_eigenvalue,
)
from .grid import FaceWind, Grid
from .oudist import (
    OUSystem,
    phi_error_bound,
    solve_lyapunov,
    stationary,
    time_avg_exact,
    time_avg_sar,
    transient,
)
from .simulate import SimConfig, simulate_ensemble


def _grid(nx, ny, dx=1.0, dy=1.0):
    return Grid(nx=nx, ny=ny, dx=dx, dy=dy, origin=(0.0, 0.0), km_per_deg_lon=111.2)


def _wind(grid, rng, scale=1.0):
    return FaceWind(u_face=rng.normal(0, scale, (grid.nx + 1, grid.ny)),
                    v_face=rng.normal(0, scale, (grid.nx, grid.ny + 1)))


def _check_lyapunov(rng):
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 31))
        M = rng.normal(size=(n, n))
        M += (abs(la.eigvals(M).real.min()) + 1.0) * np.eye(n)
        B = rng.normal(size=(n, n))
        Q = B @ B.T
        X = solve_lyapunov(M, Q)
        worst = max(worst, la.norm(M @ X + X @ M.T - Q, "fro") / la.norm(Q, "fro"))
    return worst < 1e-8, f"max relative residual {worst:.2e}"


def _check_scalar_closed_forms():
    from .operators import SparseOperator
    import scipy.sparse as sp

    A = SparseOperator(matrix=sp.csr_matrix([[2.0]]), symmetric=True)
    stat = stationary(OUSystem(A=A, m=[4.0], sigma2=1.0))
    ok = abs(stat.mean[0] - 2.0) < 1e-12 and abs(stat.precision[0, 0] - 4.0) < 1e-12

    A1 = SparseOperator(matrix=sp.csr_matrix([[1.0]]), symmetric=True)
    tr = transient(OUSystem(A=A1, m=[0.0], sigma2=1.0), [3.0], 1.0)
    ok &= abs(tr.mean[0] - 3 * math.exp(-1)) < 1e-10
    ok &= abs(tr.cov[0, 0] - (1 - math.exp(-2)) / 2) < 1e-10

    avg = time_avg_exact(OUSystem(A=A, m=[0.0], sigma2=1.0), 1.0)
    ok &= abs(avg.cov[0, 0] - 0.141917) < 1e-6
    return ok, "stationary / transient / time-averaged scalar laws"


def _check_psi_monte_carlo(rng):
    grid = _grid(4, 4)
    D = assemble_diffusion(grid)
    C = assemble_advection(grid, _wind(grid, rng))
    A = assemble_transport(D, C, 0.3, 0.5, 2.0)
    sys = OUSystem(A=A, m=rng.uniform(0.5, 1.5, grid.n), sigma2=1.0)
    psi = time_avg_exact(sys, 1.0).cov
    cfg = SimConfig(dt=1e-3, T=1.0, n_paths=20_000, initial="stationary")
    ens = simulate_ensemble(sys, cfg, rng, time_average=True)
    rel = la.norm(np.cov(ens.T) - psi, "fro") / la.norm(psi, "fro")
    return rel < 0.10, f"ensemble vs exact covariance, relative gap {rel:.3f}"


def _check_appendix_bound():
    grid = _grid(4, 4)
    D = assemble_diffusion(grid)
    C = assemble_advection(grid, FaceWind(u_face=np.zeros((5, 4)),
                                          v_face=np.zeros((4, 5))))
    worst_margin = math.inf
    for delta in (1.0, 5.0, 50.0):
        A = assemble_transport(D, C, 1.0, 0.0, delta)
        sys = OUSystem(A=A, m=np.zeros(grid.n), sigma2=1.0)
        for T in (0.1, 1.0):
            gap = la.norm(time_avg_exact(sys, T).cov
                          - time_avg_sar(sys, T).covariance_dense(), 2)
            bound = phi_error_bound(delta, T)
            worst_margin = min(worst_margin, bound - gap)
    return worst_margin >= -1e-12, f"worst bound margin {worst_margin:.2e}"


def _check_operator_structure(rng):
    grid = _grid(8, 6, dx=1.4, dy=2.0)
    D = assemble_diffusion(grid)
    C = assemble_advection(grid, _wind(grid, rng, scale=3.0))
    delta = 1.7
    A = assemble_transport(D, C, 1.2, 0.8, delta)
    ones_defect = float(np.abs(D.matrix @ np.ones(grid.n)).max())
    M = 1.2 * D.matrix + 0.8 * C.matrix
    col_defect = float(np.abs(np.asarray(M.sum(axis=0)).ravel()).max())
    off = A.toarray() - np.diag(A.matrix.diagonal())
    ok = (ones_defect < 1e-12 and col_defect < 1e-10 * np.abs(M).max()
          and off.max() <= 0 and A.matrix.diagonal().min() > 0
          and min_real_eigenvalue(A) >= delta - 1e-8)
    return ok, (f"|D 1| {ones_defect:.1e}, column defect {col_defect:.1e}, "
                "M-matrix + eigenvalue floor")


def run_validation(seed: int = 0):
    """Returns [(name, passed, detail)] for the full oracle suite."""
    rng = np.random.default_rng(seed)
    report = []
    for name, fn in (
        ("lyapunov-residual", lambda: _check_lyapunov(rng)),
        ("scalar-closed-forms", _check_scalar_closed_forms),
        ("operator-structure", lambda: _check_operator_structure(rng)),
        ("appendix-bound", _check_appendix_bound),
        ("psi-vs-monte-carlo", lambda: _check_psi_monte_carlo(rng)),
    ):
        ok, detail = fn()
        report.append((name, bool(ok), detail))
    return report
