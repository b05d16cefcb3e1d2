"""Mechanistic spatial modeling of transported pollution fields.

Linear advection-diffusion-deposition dynamics are approximated by a
multivariate Ornstein-Uhlenbeck process on a rectangular grid; the implied
Gaussian laws for snapshot and time-averaged observations drive model
fitting (MCMC) and emissions-intervention forecasting.
"""

__version__ = "0.1.0"

from .grid import Facility, FaceWind, Grid, build_grid, grid_from_degrees
from .operators import (
    SparseOperator,
    assemble_advection,
    assemble_diffusion,
    assemble_transport,
)
from .oudist import (
    GaussianField,
    OUSystem,
    phi_error_bound,
    solve_lyapunov,
    stationary,
    time_avg_exact,
    time_avg_sar,
    transient,
)
from .sulfate import REFERENCE_THETA, SulfateModel, Theta

__all__ = [
    "Facility", "FaceWind", "Grid", "build_grid", "grid_from_degrees",
    "SparseOperator", "assemble_advection", "assemble_diffusion",
    "assemble_transport", "GaussianField", "OUSystem", "phi_error_bound",
    "solve_lyapunov", "stationary", "time_avg_exact", "time_avg_sar",
    "transient", "REFERENCE_THETA", "SulfateModel", "Theta", "__version__",
]
