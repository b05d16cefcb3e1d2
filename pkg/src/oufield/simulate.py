"""Euler-Maruyama simulation of the linear SDE and of the coupled
SO2 -> SO4 system.

This module is the brute-force check on every distributional claim made by
`oudist` and `sulfate`: it never touches matrix exponentials or Lyapunov
solvers, only explicit time stepping, so the two code paths share no failure
mode.  Ensembles are vectorized across paths (one state matrix stepped in
lock step), which is what makes the 1e5-path oracle runs affordable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, NumericalError
from .oudist import OUSystem, solve_lyapunov

BLOWUP_LIMIT = 1e12


@dataclass
class SimConfig:
    """Time stepping configuration.

    initial: 'zero', 'stationary' (a draw from the stationary law), or an
    explicit state vector.
    """

    dt: float
    T: float
    n_paths: int = 1
    initial: object = "zero"
    store_every: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.dt > self.T:
            raise ConfigError(f"dt={self.dt} exceeds horizon T={self.T}")
        if self.n_paths < 1:
            raise ConfigError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.store_every < 1:
            raise ConfigError(f"store_every must be >= 1, got {self.store_every}")

    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


def _check_stability(A_diag_max: float, dt: float) -> None:
    if dt * A_diag_max >= 0.5:
        raise ConfigError(
            f"explicit step unstable: dt * max diag(A) = {dt * A_diag_max:.3g} >= 0.5")


def _initial_state(system: OUSystem, config: SimConfig, rng: np.random.Generator,
                   n_paths: int) -> np.ndarray:
    if isinstance(config.initial, str):
        if config.initial == "zero":
            return np.zeros((n_paths, system.n))
        if config.initial == "stationary":
            S = solve_lyapunov(system.A, system.noise_cov())
            L = np.linalg.cholesky(S + 1e-14 * np.trace(S) / system.n * np.eye(system.n))
            mean = np.linalg.solve(system.A.toarray(), system.m)
            return mean + rng.standard_normal((n_paths, system.n)) @ L.T
        raise ConfigError(f"unknown initial condition {config.initial!r}")
    y0 = np.asarray(config.initial, dtype=float).ravel()
    if y0.size != system.n:
        raise ConfigError(f"initial state has length {y0.size}, system is {system.n}")
    return np.tile(y0, (n_paths, 1))


def simulate_path(system: OUSystem, config: SimConfig,
                  rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """One Euler-Maruyama path.

    Returns (times, states) with states[k] the state at times[k]; thinning
    via config.store_every keeps every s-th step (endpoints always kept).
    """
    A = system.A.matrix.tocsr()
    _check_stability(A.diagonal().max(), config.dt)
    n_steps = config.n_steps()
    y = _initial_state(system, config, rng, 1)[0]
    sig = np.sqrt(system.sigma2 * config.dt)

    stored = [y.copy()]
    times = [0.0]
    for k in range(n_steps):
        noise = rng.standard_normal(system.n)
        if system.B is not None:
            noise = system.B @ noise
        y = y + (system.m - A @ y) * config.dt + sig * noise
        if np.abs(y).max() > BLOWUP_LIMIT:
            raise NumericalError(f"path blew up at step {k + 1}")
        if (k + 1) % config.store_every == 0 or k + 1 == n_steps:
            stored.append(y.copy())
            times.append((k + 1) * config.dt)
    return np.asarray(times), np.asarray(stored)


def time_average_path(path: np.ndarray, times: np.ndarray | None = None) -> np.ndarray:
    """Trapezoidal time average of a stored path over its full span."""
    path = np.asarray(path, dtype=float)
    if path.size == 0:
        raise ValueError("cannot average an empty path")
    if path.shape[0] == 1:
        return path[0].copy()
    if times is None:
        times = np.arange(path.shape[0], dtype=float)
    span = times[-1] - times[0]
    return np.trapezoid(path, x=times, axis=0) / span


def simulate_ensemble(system: OUSystem, config: SimConfig, rng: np.random.Generator,
                      time_average: bool = False) -> np.ndarray:
    """Endpoints (or trapezoidal time averages) of n_paths paths, shape
    (n_paths, n).  All paths are stepped in lock step on one state matrix."""
    _check_stability(system.A.matrix.diagonal().max(), config.dt)
    # right-multiplying the (n_paths, n) state block; dense A wins below ~1k
    if system.n <= 1024:
        At = np.ascontiguousarray(system.A.matrix.toarray().T)
    else:
        At = system.A.matrix.tocsr().T
    n_steps = config.n_steps()
    Y = _initial_state(system, config, rng, config.n_paths)
    sig = np.sqrt(system.sigma2 * config.dt)
    Bt = None if system.B is None else system.B.T
    m_dt = system.m * config.dt

    acc = 0.5 * Y if time_average else None
    drift = np.empty_like(Y)
    for k in range(n_steps):
        noise = rng.standard_normal(Y.shape)
        if Bt is not None:
            noise = noise @ Bt
        if isinstance(At, np.ndarray):
            np.matmul(Y, At, out=drift)
        else:
            drift = Y @ At
        drift *= -config.dt
        drift += m_dt
        noise *= sig
        Y += drift
        Y += noise
        if k % 256 == 0 and (not np.isfinite(Y).all()
                             or np.abs(Y).max() > BLOWUP_LIMIT):
            raise NumericalError(f"ensemble blew up at step {k + 1}")
        if time_average:
            acc += 0.5 * Y if k == n_steps - 1 else Y
    if not np.isfinite(Y).all():
        raise NumericalError("ensemble blew up before the final step")
    if time_average:
        return acc / n_steps
    return Y


def simulate_coupled(model, config: SimConfig,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coupled system: deterministic SO2 path driving a noisy SO4 path.

        z' = -A_z z + beta X          (no noise)
        dy = (-A_y y + eta z) dt + sigma dW

    z starts at its steady state unless config.initial says otherwise (the
    averaged-data model assumes the driver has settled); y starts per config.
    Returns (times, y_path, z_path).
    """
    theta = model.theta
    A_y = model.A_y().matrix.tocsr()
    A_z = model.A_z().matrix.tocsr()
    _check_stability(max(A_y.diagonal().max(), A_z.diagonal().max()), config.dt)

    bx = theta.beta * model.X
    z = model.so2_steady_state()
    if isinstance(config.initial, str) and config.initial == "zero":
        y = np.zeros(model.grid.n)
    else:
        y = _initial_state_sulfate(model, config, rng)
    sig = np.sqrt(theta.sigma2 * config.dt)

    n_steps = config.n_steps()
    times = [0.0]
    y_path = [y.copy()]
    z_path = [z.copy()]
    for k in range(n_steps):
        y = y + (theta.eta * z - A_y @ y) * config.dt + sig * rng.standard_normal(y.size)
        z = z + (bx - A_z @ z) * config.dt
        if max(np.abs(y).max(), np.abs(z).max()) > BLOWUP_LIMIT:
            raise NumericalError(f"coupled path blew up at step {k + 1}")
        if (k + 1) % config.store_every == 0 or k + 1 == n_steps:
            times.append((k + 1) * config.dt)
            y_path.append(y.copy())
            z_path.append(z.copy())
    return np.asarray(times), np.asarray(y_path), np.asarray(z_path)


def _initial_state_sulfate(model, config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    if isinstance(config.initial, str):
        if config.initial == "zero":
            return np.zeros(model.grid.n)
        if config.initial == "stationary":
            # stationary SO4 given the settled SO2 driver
            z = model.so2_steady_state()
            from .oudist import OUSystem as _S, stationary

            sys_y = _S(A=model.A_y(), m=model.theta.eta * z, sigma2=model.theta.sigma2)
            fld = stationary(sys_y)
            cov = fld.covariance_dense()
            L = np.linalg.cholesky(cov + 1e-14 * np.trace(cov) / cov.shape[0] *
                                   np.eye(cov.shape[0]))
            return fld.mean + L @ rng.standard_normal(cov.shape[0])
        raise ConfigError(f"unknown initial condition {config.initial!r}")
    y0 = np.asarray(config.initial, dtype=float).ravel()
    if y0.size != model.grid.n:
        raise ConfigError(f"initial state has length {y0.size}, grid is {model.grid.n}")
    return y0


def export_path_csv(path_file, times: np.ndarray, states: np.ndarray) -> None:
    """One row per stored step: t, then the state vector."""
    data = np.column_stack([times, states])
    header = "t," + ",".join(f"y{k}" for k in range(states.shape[1]))
    np.savetxt(path_file, data, delimiter=",", header=header, comments="")
