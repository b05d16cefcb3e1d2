"""Gaussian distributions implied by the linear SDE dy = (-A y + m)dt + sigma*B dW.

Three laws are exposed: the transient law at a finite time, the stationary
(time-limiting) law, and the law of the path average over a window [0, T].
Each comes back as a GaussianField carrying either a dense covariance or a
sparse precision matrix.  Dense O(n^3) paths are gated at DENSE_THRESHOLD;
the production-scale representation is the sparse SAR precision (T/sigma^2)*A'A
of the time-averaged field, whose distance from the exact covariance is
controlled by phi_error_bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import NumericalError, StabilityError, UnsupportedSizeError
from .operators import SparseOperator

DENSE_THRESHOLD = 3000

TRANSIENT = "transient"
STATIONARY = "stationary"
TIME_AVERAGED_EXACT = "time-averaged-exact"
TIME_AVERAGED_SAR = "time-averaged-sar"


def permutation_sign(perm: np.ndarray) -> float:
    """Sign of a permutation given as an index array."""
    perm = np.asarray(perm)
    seen = np.zeros(perm.size, dtype=bool)
    sign = 1.0
    for start in range(perm.size):
        if seen[start]:
            continue
        length = 0
        k = start
        while not seen[k]:
            seen[k] = True
            k = perm[k]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def slu_logdet(lu) -> tuple[float, float]:
    """(sign, log|det|) of the matrix behind a scipy SuperLU factorization."""
    diag = lu.U.diagonal()
    if np.any(diag == 0):
        return 0.0, -np.inf
    sign = permutation_sign(lu.perm_r) * permutation_sign(lu.perm_c)
    sign *= float(np.prod(np.sign(diag)))
    return sign, float(np.sum(np.log(np.abs(diag))))


@dataclass
class GaussianField:
    """Multivariate Gaussian over grid cells.

    Exactly one of `cov` (dense covariance) or `precision` (sparse precision)
    is set.  The precision path keeps a cached sparse LU factorization.
    """

    mean: np.ndarray
    kind: str
    cov: np.ndarray | None = None
    precision: sp.csr_matrix | None = None
    precision_factor: object = field(default=None, repr=False)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).ravel()
        if not np.all(np.isfinite(self.mean)):
            raise NumericalError("field mean contains nonfinite entries")
        if (self.cov is None) == (self.precision is None):
            raise ValueError("exactly one of cov/precision must be given")
        if self.cov is not None:
            c = np.asarray(self.cov, dtype=float)
            defect = np.abs(c - c.T).max()
            scale = max(np.abs(c).max(), 1e-300)
            if defect > 1e-10 * scale:
                raise NumericalError(
                    f"covariance asymmetry {defect:.3e} exceeds 1e-10 relative")
            self.cov = 0.5 * (c + c.T)
        else:
            q = sp.csr_matrix(self.precision)
            defect = abs(q - q.T).max()
            scale = max(abs(q).max(), 1e-300)
            if defect > 1e-10 * scale:
                raise NumericalError("precision matrix is not symmetric")
            self.precision = q
            if self.precision_factor is None:
                try:
                    self.precision_factor = spla.splu(q.tocsc())
                except RuntimeError as exc:
                    raise NumericalError(f"precision factorization failed: {exc}") from exc
            sign, _ = slu_logdet(self.precision_factor)
            if sign <= 0:
                raise NumericalError("precision matrix is not positive definite")

    @property
    def n(self) -> int:
        return self.mean.size

    def covariance_dense(self, threshold: int = DENSE_THRESHOLD) -> np.ndarray:
        """Materialize the covariance (inverts the precision on that path)."""
        if self.cov is not None:
            return self.cov
        if self.n > threshold:
            raise UnsupportedSizeError(
                f"dense covariance limited to n <= {threshold}, got {self.n}")
        cov = self.precision_factor.solve(np.eye(self.n))
        return 0.5 * (cov + cov.T)

    def export(self, prefix) -> None:
        """Write mean as plain text and the second moment as MatrixMarket."""
        import scipy.io

        np.savetxt(f"{prefix}_mean.txt", self.mean)
        if self.cov is not None:
            scipy.io.mmwrite(f"{prefix}_cov.mtx", sp.coo_matrix(self.cov))
        else:
            scipy.io.mmwrite(f"{prefix}_precision.mtx", sp.coo_matrix(self.precision))


@dataclass
class OUSystem:
    """State for dy = (-A y + m) dt + sqrt(sigma2) * B dW."""

    A: SparseOperator
    m: np.ndarray
    sigma2: float
    B: np.ndarray | None = None  # None encodes the identity

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=float).ravel()
        if self.m.size != self.A.n:
            raise ValueError(f"m has length {self.m.size}, A is {self.A.n}x{self.A.n}")
        if self.sigma2 <= 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if self.B is not None:
            self.B = np.asarray(self.B, dtype=float)
            if self.B.shape != (self.A.n, self.A.n):
                raise ValueError(f"B must be {self.A.n}x{self.A.n}, got {self.B.shape}")

    @property
    def n(self) -> int:
        return self.A.n

    def noise_cov(self) -> np.ndarray:
        """Q = sigma2 * B B' as a dense matrix."""
        if self.B is None:
            return self.sigma2 * np.eye(self.n)
        return self.sigma2 * (self.B @ self.B.T)

    def identity_noise(self) -> bool:
        return self.B is None


def _as_dense(A) -> np.ndarray:
    if isinstance(A, SparseOperator):
        return A.matrix.toarray()
    if sp.issparse(A):
        return A.toarray()
    return np.asarray(A, dtype=float)


def _check_stable_dense(Ad: np.ndarray) -> None:
    lam = np.linalg.eigvals(Ad)
    worst = lam.real.min()
    if worst <= 0:
        raise StabilityError(
            f"A has an eigenvalue with real part {worst:.3e} <= 0; "
            "the process has no stationary law")


def solve_lyapunov(A, Q, threshold: int = DENSE_THRESHOLD) -> np.ndarray:
    """Solve A X + X A' = Q for the stationary covariance X.

    Uses the Bartels-Stewart algorithm (real Schur form); when A is symmetric
    and Q = q*I the solution collapses to (q/2) * inv(A).  The residual is
    verified against 1e-8 * ||Q||_F.
    """
    Ad = _as_dense(A)
    n = Ad.shape[0]
    if n > threshold:
        raise UnsupportedSizeError(f"Lyapunov solve limited to n <= {threshold}, got {n}")
    Qd = _as_dense(Q)
    _check_stable_dense(Ad)

    symmetric = np.allclose(Ad, Ad.T, rtol=0, atol=1e-14 * max(1.0, np.abs(Ad).max()))
    scaled_identity = np.count_nonzero(Qd - np.diag(np.diag(Qd))) == 0 and \
        np.allclose(np.diag(Qd), Qd[0, 0])
    if symmetric and scaled_identity:
        X = 0.5 * Qd[0, 0] * la.inv(Ad)
    else:
        X = la.solve_continuous_lyapunov(Ad, Qd)
    X = 0.5 * (X + X.T)

    residual = la.norm(Ad @ X + X @ Ad.T - Qd, "fro")
    qnorm = la.norm(Qd, "fro")
    if residual > 1e-8 * max(qnorm, 1e-300):
        raise NumericalError(
            f"Lyapunov residual {residual:.3e} exceeds 1e-8 * ||Q||_F = {1e-8 * qnorm:.3e}")
    return X


def expm_action(A, t: float, V: np.ndarray | None = None,
                threshold: int = DENSE_THRESHOLD) -> np.ndarray:
    """Evaluate expm(-A t) (V is None) or its action expm(-A t) @ V.

    The full matrix path is dense and size-gated; the action path works at
    any size via scipy's scaling-and-squaring action algorithm.
    """
    n = A.n if isinstance(A, SparseOperator) else A.shape[0]
    if V is None:
        if n > threshold:
            raise UnsupportedSizeError(
                f"full matrix exponential limited to n <= {threshold}, got {n}")
        out = la.expm(-t * _as_dense(A))
    else:
        V = np.asarray(V, dtype=float)
        if t == 0:
            return V.copy()
        M = A.matrix if isinstance(A, SparseOperator) else sp.csr_matrix(A)
        out = spla.expm_multiply((-t) * M.tocsc(), V)
    if not np.all(np.isfinite(out)):
        raise NumericalError("matrix exponential overflowed (nonfinite entries)")
    return out


def transient(system: OUSystem, y0: np.ndarray, t: float,
              threshold: int = DENSE_THRESHOLD) -> GaussianField:
    """Law of y_t given y_0.

    mean = e^{-At} y0 + (I - e^{-At}) A^{-1} m
    cov  = S - e^{-At} S e^{-A't}   with  A S + S A' = sigma2 * B B'

    The covariance identity is the closed form of the Ito-integral covariance
    (differentiate both sides in t to see they satisfy the same ODE from 0).
    """
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    y0 = np.asarray(y0, dtype=float).ravel()
    if y0.size != system.n:
        raise ValueError(f"y0 has length {y0.size}, system is {system.n}")
    if system.n > threshold:
        raise UnsupportedSizeError(
            f"transient law is a dense path, limited to n <= {threshold}")
    Ad = _as_dense(system.A)
    S = solve_lyapunov(Ad, system.noise_cov(), threshold)
    E = la.expm(-t * Ad)
    mean = E @ y0 + (np.eye(system.n) - E) @ la.solve(Ad, system.m)
    cov = S - E @ S @ E.T
    return GaussianField(mean=mean, cov=cov, kind=TRANSIENT)


def stationary(system: OUSystem, threshold: int = DENSE_THRESHOLD) -> GaussianField:
    """Time-limiting law N(A^{-1} m, S).

    With identity noise and symmetric A the covariance is (sigma2/2) A^{-1},
    so the field is returned in sparse precision form (2/sigma2) A and scales
    to any n.  Otherwise S solves the Lyapunov equation (dense, gated).
    """
    if system.identity_noise() and system.A.symmetric:
        M = system.A.matrix.tocsc()
        if system.n <= threshold:
            _check_stable_dense(M.toarray())
        else:
            from .operators import gershgorin_min_real
            if gershgorin_min_real(system.A) <= 0:
                raise StabilityError(
                    "cannot certify stability above the dense threshold: "
                    "Gershgorin bound is nonpositive")
        factor = spla.splu(M)
        mean = factor.solve(system.m)
        precision = (2.0 / system.sigma2) * system.A.matrix
        return GaussianField(mean=mean, precision=precision, kind=STATIONARY)

    if system.n > threshold:
        raise UnsupportedSizeError(
            "nonsymmetric/general-noise stationary law is dense, "
            f"limited to n <= {threshold}")
    Ad = _as_dense(system.A)
    S = solve_lyapunov(Ad, system.noise_cov(), threshold)
    mean = la.solve(Ad, system.m)
    return GaussianField(mean=mean, cov=S, kind=STATIONARY)


def time_avg_exact(system: OUSystem, T: float,
                   threshold: int = DENSE_THRESHOLD) -> GaussianField:
    """Exact law of (1/T) * integral of y over [0, T], started at stationarity.

    cov = (1/T)(S A^{-T} + A^{-1} S)
        - (1/T^2)[S (I - e^{-A'T})(A')^{-2} + (I - e^{-AT}) A^{-2} S]

    The leading term equals (sigma2/T)(A'(BB')^{-1}A)^{-1} by the Lyapunov
    identity but needs no inverse of BB'.  The two tail terms are transposes
    of each other, so the assembled matrix is symmetric; the numerical
    asymmetry defect is asserted below 1e-8 relative before symmetrizing.
    """
    if T <= 0:
        raise ValueError(f"averaging window must be positive, got {T}")
    if system.n > threshold:
        raise UnsupportedSizeError(
            f"exact time-averaged law is dense, limited to n <= {threshold}")
    Ad = _as_dense(system.A)
    S = solve_lyapunov(Ad, system.noise_cov(), threshold)
    Ainv = la.inv(Ad)
    E = la.expm(-T * Ad)
    eye = np.eye(system.n)
    lead = (S @ Ainv.T + Ainv @ S) / T
    A2inv = Ainv @ Ainv
    tail = S @ (eye - E.T) @ A2inv.T + (eye - E) @ A2inv @ S
    psi = lead - tail / T**2

    defect = np.abs(psi - psi.T).max()
    scale = max(np.abs(psi).max(), 1e-300)
    if defect > 1e-8 * scale:
        raise NumericalError(
            f"time-averaged covariance asymmetry {defect:.3e} exceeds 1e-8 relative")
    psi = 0.5 * (psi + psi.T)
    mean = la.solve(Ad, system.m)
    return GaussianField(mean=mean, cov=psi, kind=TIME_AVERAGED_EXACT)


def time_avg_sar(system: OUSystem, T: float) -> GaussianField:
    """Sparse approximation of the time-averaged law: precision (T/sigma2) A'A.

    Requires identity noise.  Valid whenever the window T is long relative to
    the system's turnover time; the spectral-norm gap from the exact
    covariance is bounded by phi_error_bound for diffusion-plus-decay A.
    """
    if not system.identity_noise():
        raise ValueError("the SAR form requires identity driving noise (B = I)")
    if T <= 0:
        raise ValueError(f"averaging window must be positive, got {T}")
    A = system.A.matrix
    factor_A = spla.splu(A.tocsc())
    sign, _ = slu_logdet(factor_A)
    if sign <= 0:
        raise StabilityError("A has nonpositive determinant; SAR precision is singular")
    mean = factor_A.solve(system.m)
    Q = (T / system.sigma2) * (A.T @ A)
    return GaussianField(mean=mean, precision=Q.tocsr(), kind=TIME_AVERAGED_SAR)


def phi_error_bound(delta: float, T: float) -> float:
    """Spectral-norm bound (1 - e^{-delta*T}) / (T^2 delta^3) on the gap
    between the exact and SAR time-averaged covariances.

    Holds for A = gamma*D + delta*I with D symmetric PSD and unit process
    variance; for general sigma2 the gap scales by sigma2.
    """
    if delta <= 0 or T <= 0:
        raise ValueError(f"delta and T must be positive, got {delta}, {T}")
    return (1.0 - math.exp(-delta * T)) / (T**2 * delta**3)
