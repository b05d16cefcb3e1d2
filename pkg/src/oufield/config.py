"""Run configuration: JSON schema, validation, hashing, and input loading."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataio import read_emissions_csv, read_raster
from .exceptions import ConfigError, DataError
from .grid import (
    EmissionsInventory,
    FaceWind,
    Grid,
    build_grid,
    grid_from_degrees,
    interpolate_wind,
    rasterize_emissions,
)
from .inference import MCMCConfig, PriorSpec

REQUIRED_FILES = ("emissions_csv", "wind_u_raster", "wind_v_raster",
                  "sulfate_raster", "population_raster")
OPTIONAL_FILES = ("mask_raster",)


@dataclass
class RunConfig:
    grid_spec: dict
    files: dict
    delta: float = 50.0
    T: float = 1.0
    priors: PriorSpec = field(default_factory=PriorSpec)
    mcmc: dict = field(default_factory=dict)
    forecast: dict = field(default_factory=dict)
    config_hash: str = ""

    def mcmc_config(self, threads: int = 1) -> MCMCConfig:
        m = self.mcmc
        return MCMCConfig(n_chains=m.get("chains", 5),
                          iterations=m.get("iterations", 150_000),
                          burn_in=m.get("burn_in", 25_000),
                          prior=self.priors, threads=threads)

    def seeds(self, override: int | None = None) -> list[int]:
        base = self.mcmc.get("seed", 0) if override is None else override
        n = self.mcmc.get("chains", 5)
        return [base + k for k in range(n)]

    def build_grid(self) -> Grid:
        g = self.grid_spec
        origin = (g["origin_lon"], g["origin_lat"])
        if "cellsize_deg" in g:
            return grid_from_degrees(g["nx"], g["ny"], origin, g["cellsize_deg"])
        return build_grid(g["nx"], g["ny"], origin, g["dx_km"], g["dy_km"])


def config_hash_of(raw: dict) -> str:
    return hashlib.sha256(
        json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()).hexdigest()[:16]


def load_run_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc

    if "grid" not in raw:
        raise ConfigError("config missing field: grid")
    g = raw["grid"]
    for key in ("nx", "ny", "origin_lon", "origin_lat"):
        if key not in g:
            raise ConfigError(f"config missing field: grid.{key}")
    if "cellsize_deg" not in g and not ("dx_km" in g and "dy_km" in g):
        raise ConfigError("config missing field: grid.cellsize_deg (or dx_km/dy_km)")
    if g["nx"] < 2 or g["ny"] < 2:
        raise ConfigError(f"grid.nx/ny must be >= 2, got {g['nx']}x{g['ny']}")

    files = raw.get("files", {})
    for key in REQUIRED_FILES:
        if key not in files:
            raise ConfigError(f"config missing field: files.{key}")
        if not Path(files[key]).exists():
            raise ConfigError(f"files.{key} does not exist: {files[key]}")
    for key in OPTIONAL_FILES:
        if key in files and not Path(files[key]).exists():
            raise ConfigError(f"files.{key} does not exist: {files[key]}")

    delta = raw.get("delta", 50.0)
    T = raw.get("T", 1.0)
    if delta <= 0:
        raise ConfigError(f"delta must be positive, got {delta}")
    if T <= 0:
        raise ConfigError(f"T must be positive, got {T}")

    prior_raw = raw.get("priors", {})
    for key, value in prior_raw.items():
        if value <= 0:
            raise ConfigError(f"priors.{key} must be positive, got {value}")
    try:
        priors = PriorSpec(**prior_raw)
    except TypeError as exc:
        raise ConfigError(f"unknown prior field: {exc}") from exc

    mcmc = dict(raw.get("mcmc", {}))
    mcmc.setdefault("chains", 5)
    mcmc.setdefault("iterations", 150_000)
    mcmc.setdefault("burn_in", 25_000)
    mcmc.setdefault("seed", 0)
    if mcmc["burn_in"] >= mcmc["iterations"]:
        raise ConfigError(
            f"mcmc.burn_in ({mcmc['burn_in']}) must be below mcmc.iterations "
            f"({mcmc['iterations']})")
    if mcmc["chains"] < 1:
        raise ConfigError("mcmc.chains must be >= 1")

    forecast = dict(raw.get("forecast", {}))
    forecast.setdefault("fraction", 0.8)
    forecast.setdefault("n_draws", 2000)
    forecast.setdefault("seed", 0)
    if not (0.0 <= forecast["fraction"] <= 1.0):
        raise ConfigError(f"forecast.fraction must lie in [0, 1], got "
                          f"{forecast['fraction']}")
    if forecast["n_draws"] < 1:
        raise ConfigError("forecast.n_draws must be >= 1")

    return RunConfig(grid_spec=g, files=files, delta=delta, T=T, priors=priors,
                     mcmc=mcmc, forecast=forecast, config_hash=config_hash_of(raw))


@dataclass
class LoadedInputs:
    grid: Grid
    inventory: EmissionsInventory
    face_wind: FaceWind
    v_obs: np.ndarray
    mask: np.ndarray
    population: np.ndarray


def load_inputs(config: RunConfig) -> LoadedInputs:
    """Read and cross-validate every input file referenced by the config."""
    grid = config.build_grid()
    inventory = rasterize_emissions(read_emissions_csv(config.files["emissions_csv"]),
                                    grid)

    u_raster = read_raster(config.files["wind_u_raster"])
    v_raster = read_raster(config.files["wind_v_raster"])
    if (u_raster.ncols, u_raster.nrows) != (v_raster.ncols, v_raster.nrows):
        raise DataError("wind u/v rasters have different shapes")
    u_pts = u_raster.sample_points()
    v_pts = v_raster.sample_points()
    if u_pts.shape != v_pts.shape or not np.allclose(u_pts[:, :2], v_pts[:, :2]):
        raise DataError("wind u/v rasters sample different locations")
    samples = np.column_stack([u_pts[:, :2], u_pts[:, 2], v_pts[:, 2]])
    face_wind = interpolate_wind(samples, grid)

    sulfate = read_raster(config.files["sulfate_raster"])
    v_obs, mask = sulfate.to_vector(grid)
    if "mask_raster" in config.files:
        extra, _ = read_raster(config.files["mask_raster"]).to_vector(grid)
        mask = mask & np.nan_to_num(extra, nan=0.0).astype(bool)
    v_obs = np.nan_to_num(v_obs, nan=0.0)

    pop_vec, pop_mask = read_raster(config.files["population_raster"]).to_vector(grid)
    population = np.where(pop_mask, pop_vec, 0.0)
    if np.any(population < 0):
        raise DataError("population raster contains negative values")

    return LoadedInputs(grid=grid, inventory=inventory, face_wind=face_wind,
                        v_obs=v_obs, mask=mask, population=population)
