"""Coupled SO2 -> SO4 field model on a grid.

The SO2 concentration z settles at the steady state of a deterministic
transport equation forced by emissions; the SO4 field y is an OU process
forced by eta*z.  Time-averaged observations of y are Gaussian with mean
mu = A_y^{-1}(eta Z) and sparse SAR precision (T/sigma2) A_y' A_y, which is
what the log likelihood below evaluates.

    A_y = gamma*D + alpha*C + delta*I      (SO4 transport + deposition)
    A_z = gamma*D + alpha*C + eta*I        (SO2 transport + conversion)
    Z   = A_z^{-1} (beta X)
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse.linalg as spla

from .exceptions import DataError, NumericalError, StabilityError
from .grid import Grid
from .operators import SparseOperator, assemble_transport
from .oudist import slu_logdet

PARAM_NAMES = ("gamma", "alpha", "eta", "beta", "sigma2")


@dataclass(frozen=True)
class Theta:
    """Model parameters; delta and T are fixed during inference."""

    gamma: float
    alpha: float
    eta: float
    beta: float
    sigma2: float
    delta: float = 50.0
    T: float = 1.0

    def __post_init__(self):
        if self.gamma < 0 or self.alpha < 0:
            raise ValueError(f"gamma/alpha must be nonnegative: {self.gamma}, {self.alpha}")
        for name in ("eta", "beta", "sigma2", "delta", "T"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    def free_values(self) -> np.ndarray:
        return np.array([getattr(self, p) for p in PARAM_NAMES])

    def with_free_values(self, values) -> "Theta":
        return replace(self, **dict(zip(PARAM_NAMES, map(float, values))))

    def replace(self, **kw) -> "Theta":
        return replace(self, **kw)


# reference point: central estimates from the original annual-sulfate analysis,
# kept as documentation defaults (not reproducible at desk scale)
REFERENCE_THETA = Theta(gamma=1510.0, alpha=0.53, eta=0.50, beta=3.45,
                        sigma2=24_000.0, delta=50.0, T=1.0)


class SulfateModel:
    """Transport operators + emissions + parameters, with factorization caches.

    Caches are keyed by the parameter values entering each operator, so
    proposals that change only beta or sigma2 reuse both factorizations and a
    change to eta invalidates only the SO2 operator.  Mutation goes through
    set_theta; use one model instance per thread/chain.
    """

    def __init__(self, grid: Grid, D: SparseOperator, C: SparseOperator,
                 X: np.ndarray, theta: Theta, cache_size: int = 8):
        if D.n != grid.n or C.n != grid.n:
            raise DataError(f"operators sized {D.n}/{C.n} do not match grid n={grid.n}")
        X = np.asarray(X, dtype=float).ravel()
        if X.size != grid.n:
            raise DataError(f"emissions vector has length {X.size}, grid n={grid.n}")
        if np.any(X < 0) or not np.all(np.isfinite(X)):
            raise DataError("emissions vector must be finite and nonnegative")
        self.grid = grid
        self.D = D
        self.C = C
        self.X = X
        self._theta = theta
        self._cache_size = cache_size
        self._ycache: OrderedDict = OrderedDict()
        self._zcache: OrderedDict = OrderedDict()

    @property
    def theta(self) -> Theta:
        return self._theta

    def set_theta(self, theta: Theta) -> None:
        self._theta = theta

    def clone(self) -> "SulfateModel":
        """Fresh instance sharing the immutable grid/operators/emissions."""
        return SulfateModel(self.grid, self.D, self.C, self.X, self._theta,
                            self._cache_size)

    # -- cached operator factorizations -------------------------------------

    def _lookup(self, cache, key, build):
        hit = cache.get(key)
        if hit is None:
            hit = build()
            cache[key] = hit
            if len(cache) > self._cache_size:
                cache.popitem(last=False)
        else:
            cache.move_to_end(key)
        return hit

    def _y_ops(self):
        t = self._theta
        key = (t.gamma, t.alpha, t.delta)

        def build():
            A = assemble_transport(self.D, self.C, t.gamma, t.alpha, t.delta)
            try:
                lu = spla.splu(A.matrix.tocsc())
            except RuntimeError as exc:
                raise StabilityError(f"SO4 operator factorization failed: {exc}") from exc
            sign, logdet = slu_logdet(lu)
            if sign <= 0:
                raise NumericalError(
                    "det(A_y) <= 0; eigenvalues should pair with positive real parts")
            return A, lu, logdet

        return self._lookup(self._ycache, key, build)

    def _z_ops(self):
        t = self._theta
        key = (t.gamma, t.alpha, t.eta)

        def build():
            A = assemble_transport(self.D, self.C, t.gamma, t.alpha, t.eta)
            try:
                lu = spla.splu(A.matrix.tocsc())
            except RuntimeError as exc:
                raise StabilityError(f"SO2 operator factorization failed: {exc}") from exc
            u = lu.solve(self.X)
            return A, lu, u

        return self._lookup(self._zcache, key, build)

    def A_y(self) -> SparseOperator:
        return self._y_ops()[0]

    def A_z(self) -> SparseOperator:
        return self._z_ops()[0]

    # -- model quantities ----------------------------------------------------

    def so2_steady_state(self) -> np.ndarray:
        """Z = A_z^{-1} (beta X), checked for residual and sign."""
        A, _, u = self._z_ops()
        Z = self._theta.beta * u
        rhs = self._theta.beta * self.X
        rhs_norm = np.linalg.norm(rhs)
        resid = np.linalg.norm(A.matrix @ Z - rhs)
        if resid > 1e-10 * max(rhs_norm, 1e-300):
            raise NumericalError(
                f"SO2 steady-state residual {resid:.3e} exceeds 1e-10 * ||beta X||")
        floor = -1e-12 * max(1.0, np.abs(Z).max())
        if Z.min() < floor:
            raise NumericalError(
                f"SO2 steady state has negative entry {Z.min():.3e}; "
                "M-matrix inverse should be nonnegative")
        return Z

    def so4_mean(self, X: np.ndarray | None = None) -> np.ndarray:
        """mu = A_y^{-1} (eta Z); optionally for an alternative emissions vector."""
        _, lu_y, _ = self._y_ops()
        if X is None:
            Z = self.so2_steady_state()
        else:
            Z = self._solve_so2_for(np.asarray(X, dtype=float).ravel())
        mu = lu_y.solve(self._theta.eta * Z)
        floor = -1e-12 * max(1.0, np.abs(mu).max())
        if mu.min() < floor:
            raise NumericalError(
                f"SO4 mean has negative entry {mu.min():.3e}")
        return mu

    def _solve_so2_for(self, X: np.ndarray) -> np.ndarray:
        if X.size != self.grid.n:
            raise DataError(f"emissions vector has length {X.size}, grid n={self.grid.n}")
        _, lu_z, _ = self._z_ops()
        return self._theta.beta * lu_z.solve(X)

    def log_likelihood(self, v_obs: np.ndarray, mask: np.ndarray | None = None) -> float:
        """Gaussian log density of the time-averaged observation.

        Uses the identity A_y (v - mu) = A_y v - eta Z, so no solve for mu is
        needed on the fully observed path.  Cells outside the mask are
        dropped from the whitened residual (and filled with mu when they feed
        a valid neighbor through A_y); an all-invalid mask contributes zero,
        so a no-data chain samples the prior.
        """
        t = self._theta
        v = np.asarray(v_obs, dtype=float).ravel()
        if v.size != self.grid.n:
            raise DataError(f"observation vector has length {v.size}, grid n={self.grid.n}")
        if mask is None:
            mask = np.ones(self.grid.n, dtype=bool)
        else:
            mask = np.asarray(mask, dtype=bool).ravel()
            if mask.size != self.grid.n:
                raise DataError("mask length does not match grid")
        if not np.all(np.isfinite(v[mask])):
            raise DataError("nonfinite observation in a valid cell")
        n_valid = int(mask.sum())
        if n_valid == 0:
            return 0.0

        A, _, logdet = self._y_ops()
        _, _, u = self._z_ops()
        eta_z = t.eta * t.beta * u
        if n_valid == self.grid.n:
            r = A.matrix @ v - eta_z
        else:
            _, lu_y, _ = self._y_ops()
            mu = lu_y.solve(eta_z)
            v_filled = np.where(mask, v, mu)
            r = A.matrix @ v_filled - eta_z
        quad = float(np.dot(r[mask], r[mask]))
        return (0.5 * n_valid * math.log(t.T / (2.0 * math.pi * t.sigma2))
                + logdet - 0.5 * (t.T / t.sigma2) * quad)

    def sample_field(self, rng: np.random.Generator,
                     X: np.ndarray | None = None) -> np.ndarray:
        """Exact draw from N(mu, (sigma2/T)(A_y' A_y)^{-1}): mu + A_y^{-1} w."""
        t = self._theta
        _, lu_y, _ = self._y_ops()
        mu = self.so4_mean(X)
        w = rng.normal(scale=math.sqrt(t.sigma2 / t.T), size=self.grid.n)
        return mu + lu_y.solve(w)
