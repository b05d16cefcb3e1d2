"""Shared fixtures-by-hand and independent oracles used across test modules.

Everything here deliberately avoids the library code paths it is used to
check (quadrature instead of the closed form, hand bilinear instead of the
interpolator, dense brute force instead of sparse shortcuts).
"""

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from oufield.grid import Grid, FaceWind
from oufield.operators import SparseOperator, assemble_advection, assemble_diffusion

KM = 111.2


def line_grid(n, dx=1.0):
    """Degenerate 1-d grid (ny = 1), handy for hand-checkable operators."""
    return Grid(nx=n, ny=1, dx=dx, dy=1.0, origin=(0.0, 0.0), km_per_deg_lon=KM)


def square_grid(nx, ny=None, dx=1.0, dy=None):
    ny = nx if ny is None else ny
    dy = dx if dy is None else dy
    return Grid(nx=nx, ny=ny, dx=dx, dy=dy, origin=(0.0, 0.0), km_per_deg_lon=KM)


def uniform_wind(grid, u=0.0, v=0.0):
    return FaceWind(u_face=np.full((grid.nx + 1, grid.ny), float(u)),
                    v_face=np.full((grid.nx, grid.ny + 1), float(v)))


def random_wind(grid, rng, scale=1.0):
    return FaceWind(u_face=rng.normal(0, scale, (grid.nx + 1, grid.ny)),
                    v_face=rng.normal(0, scale, (grid.nx, grid.ny + 1)))


def wind_system(nx=4, ny=4, gamma=0.3, alpha=0.5, delta=2.0, sigma2=1.0,
                m_scale=1.0, seed=7):
    """Small nonsymmetric test system A = gamma*D + alpha*C + delta*I."""
    from oufield.operators import assemble_transport
    from oufield.oudist import OUSystem

    grid = square_grid(nx, ny)
    rng = np.random.default_rng(seed)
    D = assemble_diffusion(grid)
    C = assemble_advection(grid, random_wind(grid, rng))
    A = assemble_transport(D, C, gamma, alpha, delta)
    m = m_scale * rng.uniform(0.5, 1.5, grid.n)
    return OUSystem(A=A, m=m, sigma2=sigma2)


def scalar_operator(a, symmetric=True):
    return SparseOperator(matrix=sp.csr_matrix(np.array([[float(a)]])),
                          symmetric=symmetric)


def random_stable_dense(rng, n):
    """Random dense matrix with spectrum shifted into the right half plane."""
    M = rng.normal(size=(n, n))
    shift = abs(la.eigvals(M).real.min()) + rng.uniform(0.5, 2.0)
    return M + shift * np.eye(n)


def bilinear_eval(corners, values, x, y):
    """Textbook bilinear interpolation on one rectangle.

    corners = (x0, x1, y0, y1); values = (f00, f10, f01, f11) with fij the
    value at (x_i, y_j).
    """
    x0, x1, y0, y1 = corners
    f00, f10, f01, f11 = values
    tx = (x - x0) / (x1 - x0)
    ty = (y - y0) / (y1 - y0)
    return (f00 * (1 - tx) * (1 - ty) + f10 * tx * (1 - ty)
            + f01 * (1 - tx) * ty + f11 * tx * ty)


def psi_by_quadrature(Ad, S, T, nodes=400):
    """Trapezoid double quadrature of the stationary OU autocovariance kernel.

    k(s, t) = S e^{-A'(t-s)} for s < t and its transpose for s > t; the
    time-averaged covariance is the double integral over [0, T]^2 divided by
    T^2.  On a uniform grid only |t - s| matters, so the kernel is evaluated
    once per lag and weighted by the trapezoid coefficient mass at that lag.
    """
    n = Ad.shape[0]
    h = T / (nodes - 1)
    w = np.ones(nodes)
    w[0] = w[-1] = 0.5
    # a[k] = sum of w_i * w_j over pairs with j - i = k  (k >= 0)
    a = np.correlate(w, w, mode="full")[nodes - 1:]
    Eh = la.expm(-h * Ad)
    total = a[0] * S.copy()
    Ek = np.eye(n)
    for k in range(1, nodes):
        Ek = Ek @ Eh
        M = S @ Ek.T
        total += a[k] * (M + M.T)
    return total * (h / T) ** 2
