"""Finite-volume transport operators on a rectangular grid.

Sign convention: the process drift is -A y with A = gamma*D + alpha*C + r*I,
so D is the (positive semidefinite) graph Laplacian of the grid and C is the
sign-flipped donor-cell upwind advection operator.  Zero-flux boundaries:
nothing crosses the domain edge, which makes column sums of D and C vanish
(total mass is conserved by transport alone).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .exceptions import DataError, StabilityError, UnsupportedSizeError
from .grid import FaceWind, Grid

DENSE_EIG_THRESHOLD = 3000


@dataclass(frozen=True)
class SparseOperator:
    """A square sparse matrix plus a symmetry tag for solver dispatch."""

    matrix: sp.csr_matrix
    symmetric: bool = False

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise DataError(f"operator must be square, got {m.shape}")
        if not np.all(np.isfinite(m.data)):
            raise DataError("operator contains nonfinite entries")
        object.__setattr__(self, "matrix", m)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def assemble_diffusion(grid: Grid) -> SparseOperator:
    """Zero-flux graph Laplacian with 1/dx^2, 1/dy^2 edge weights.

    Interior rows carry the 5-point stencil (-1/dx^2, -1/dy^2 off-diagonal,
    diagonal = sum of present neighbor weights); boundary rows simply drop
    the missing neighbor, which is the zero-flux closure.  D*1 = 0.
    """
    nx, ny = grid.nx, grid.ny
    wx, wy = 1.0 / grid.dx**2, 1.0 / grid.dy**2
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    k = (j * nx + i).ravel()
    i, j = i.ravel(), j.ravel()

    rows, cols, vals = [], [], []
    diag = np.zeros(grid.n)

    def add_edges(exists, neighbor_k, w):
        rows.append(k[exists])
        cols.append(neighbor_k[exists])
        vals.append(np.full(exists.sum(), -w))
        diag[k[exists]] += w

    add_edges(i > 0, k - 1, wx)
    add_edges(i < nx - 1, k + 1, wx)
    add_edges(j > 0, k - nx, wy)
    add_edges(j < ny - 1, k + nx, wy)

    all_k = np.arange(grid.n)  # diag is indexed by linear cell index
    rows.append(all_k)
    cols.append(all_k)
    vals.append(diag)
    D = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(grid.n, grid.n)).tocsr()
    return SparseOperator(matrix=D, symmetric=True)


def assemble_advection(grid: Grid, face_wind: FaceWind) -> SparseOperator:
    """Donor-cell upwind advection operator from face velocities.

    For cell P with west/east face velocities v_l, v_r (and the south/north
    analog), the row entries are

        C[P, W] = -max(v_l, 0)/dx      C[P, E] = -max(-v_r, 0)/dx
        C[P, P] = (max(v_r, 0) + max(-v_l, 0))/dx  (+ y analog)

    i.e. outflow leaves P at the face speed and inflow arrives from the
    donor (upwind) neighbor.  Boundary faces are zero-flux: their velocities
    are ignored (treated as zero), so column sums vanish exactly.
    """
    if not face_wind.matches(grid):
        raise DataError(
            f"face wind shaped u{face_wind.u_face.shape}/v{face_wind.v_face.shape} "
            f"does not match grid ({grid.nx}, {grid.ny})")
    for name, arr in (("u_face", face_wind.u_face), ("v_face", face_wind.v_face)):
        bad = np.argwhere(np.isnan(arr))
        if bad.size:
            fi, fj = bad[0]
            raise DataError(f"NaN velocity at {name}[{fi}, {fj}]")

    nx, ny = grid.nx, grid.ny
    u = face_wind.u_face.copy()
    v = face_wind.v_face.copy()
    u[0, :] = 0.0
    u[nx, :] = 0.0
    v[:, 0] = 0.0
    v[:, ny] = 0.0

    # per-cell face velocities, shape (nx, ny)
    v_l, v_r = u[:-1, :], u[1:, :]
    v_b, v_t = v[:, :-1], v[:, 1:]

    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    k = (j * nx + i).ravel()

    diag = ((np.maximum(v_r, 0) + np.maximum(-v_l, 0)) / grid.dx +
            (np.maximum(v_t, 0) + np.maximum(-v_b, 0)) / grid.dy).ravel()
    west = (-np.maximum(v_l, 0) / grid.dx).ravel()
    east = (-np.maximum(-v_r, 0) / grid.dx).ravel()
    south = (-np.maximum(v_b, 0) / grid.dy).ravel()
    north = (-np.maximum(-v_t, 0) / grid.dy).ravel()

    ii = i.ravel()
    jj = j.ravel()
    rows = [k]
    cols = [k]
    vals = [diag]
    for offset, val, exists in ((-1, west, ii > 0), (1, east, ii < nx - 1),
                                (-nx, south, jj > 0), (nx, north, jj < ny - 1)):
        rows.append(k[exists])
        cols.append(k[exists] + offset)
        vals.append(val[exists])
    C = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(grid.n, grid.n)).tocsr()
    return SparseOperator(matrix=C, symmetric=False)


def assemble_transport(D: SparseOperator, C: SparseOperator, gamma: float,
                       alpha: float, r: float) -> SparseOperator:
    """A = gamma*D + alpha*C + r*I.

    r > 0 is required (it is the spectral floor that makes -A stable); the
    result is an M-matrix for gamma, alpha >= 0.
    """
    if gamma < 0 or alpha < 0:
        raise ValueError(f"gamma and alpha must be nonnegative, got {gamma}, {alpha}")
    if r <= 0:
        raise StabilityError(f"diagonal rate r must be positive, got {r}")
    if D.n != C.n:
        raise DataError(f"operator sizes differ: {D.n} vs {C.n}")
    A = (gamma * D.matrix + alpha * C.matrix + r * sp.identity(D.n, format="csr")).tocsr()
    return SparseOperator(matrix=A, symmetric=(alpha == 0.0 or C.matrix.nnz == 0))


def min_real_eigenvalue(A: SparseOperator | np.ndarray,
                        threshold: int = DENSE_EIG_THRESHOLD) -> float:
    """Minimum real part of the spectrum, via dense eigensolve (small n only)."""
    M = A.toarray() if isinstance(A, SparseOperator) else np.asarray(A)
    if M.shape[0] > threshold:
        raise UnsupportedSizeError(
            f"dense eigensolve limited to n <= {threshold}, got {M.shape[0]}")
    return float(np.linalg.eigvals(M).real.min())


def gershgorin_min_real(A: SparseOperator) -> float:
    """Column-disc Gershgorin lower bound on the real parts of A's spectrum.

    For A = gamma*D + alpha*C + r*I with zero column sums of the transport
    part and nonpositive off-diagonals, this bound equals r exactly.
    """
    M = A.matrix.tocsc()
    diag = M.diagonal()
    radii = np.abs(M).sum(axis=0).A1 - np.abs(diag)
    return float((diag.real - radii).min())


def column_sum_defect(*ops) -> float:
    """max |column sum| of the summed operators (mass-conservation defect)."""
    total = sum(op.matrix for op in ops)
    return float(np.abs(np.asarray(total.sum(axis=0)).ravel()).max())


def to_matrix_market(op: SparseOperator | sp.spmatrix, path) -> None:
    """Debug export in MatrixMarket coordinate format (general symmetry)."""
    m = op.matrix if isinstance(op, SparseOperator) else op
    scipy.io.mmwrite(str(path), sp.coo_matrix(m), symmetry="general")
