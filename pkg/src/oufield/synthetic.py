"""Synthetic ground-truth cases for validation, demos, and end-to-end tests.

The generated inputs use the same file formats as a real analysis (facility
CSV, ESRI ASCII rasters, JSON run config), with the observed field drawn
from the model itself at a known parameter point, so fits can be checked for
coverage and forecasts for sign and ordering.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import Raster, raster_from_vector, write_emissions_csv, write_raster
from .grid import Facility, Grid, grid_from_degrees, interpolate_wind, rasterize_emissions
from .operators import assemble_advection, assemble_diffusion
from .sulfate import SulfateModel, Theta

# scaled-down analysis defaults: same cell size as the full analysis grid
DEFAULT_CELLSIZE_DEG = 0.1277  # about 14.2 km per cell
DEFAULT_THETA = Theta(gamma=1510.0, alpha=0.53, eta=0.50, beta=3.45,
                      sigma2=24_000.0, delta=50.0, T=1.0)


@dataclass
class SyntheticCase:
    grid: Grid
    facilities: list[Facility]
    inventory: object
    face_wind: object
    population: np.ndarray
    v_obs: np.ndarray
    theta: Theta
    model: SulfateModel


def default_facilities(grid: Grid) -> list[Facility]:
    """Five point sources; one dominant emitter sits upwind (west) of the
    population mass so that targeting it wins the exposure ranking."""
    lon = lambda fx: grid.origin[0] + fx * grid.width_deg
    lat = lambda fy: grid.origin[1] + fy * grid.height_deg
    return [
        Facility("big_west", "Big West", lon(0.25), lat(0.52), 120_000.0),
        Facility("mid_north", "Mid North", lon(0.55), lat(0.80), 60_000.0),
        Facility("mid_south", "Mid South", lon(0.55), lat(0.22), 60_000.0),
        Facility("east_edge", "East Edge", lon(0.85), lat(0.50), 55_000.0),
        Facility("small_mid", "Small Mid", lon(0.45), lat(0.48), 30_000.0),
    ]


def synthetic_wind_samples(grid: Grid, u0=3.0, v0=0.5, swirl=0.8, n=8):
    """Smooth eastward-dominant wind field sampled on a coarse lattice."""
    lons = np.linspace(grid.origin[0], grid.origin[0] + grid.width_deg, n)
    lats = np.linspace(grid.origin[1], grid.origin[1] + grid.height_deg, n)
    samples = []
    for lo in lons:
        for la in lats:
            fx = (lo - grid.origin[0]) / grid.width_deg
            fy = (la - grid.origin[1]) / grid.height_deg
            samples.append((lo, la,
                            u0 + swirl * np.sin(2 * np.pi * fy),
                            v0 * np.cos(2 * np.pi * fx)))
    return samples


def synthetic_population(grid: Grid, center=(0.65, 0.5), spread=0.18,
                         total=1.0e6) -> np.ndarray:
    """Population blob east of the emitters (downwind)."""
    lon, lat = grid.cell_centers_lonlat()
    fx = (lon - grid.origin[0]) / grid.width_deg
    fy = (lat - grid.origin[1]) / grid.height_deg
    dens = np.exp(-((fx - center[0]) ** 2 + (fy - center[1]) ** 2) / (2 * spread**2))
    return total * dens / dens.sum()


def make_case(nx=12, ny=12, theta: Theta = DEFAULT_THETA, seed=0,
              origin=(-98.0, 35.0), cellsize_deg=DEFAULT_CELLSIZE_DEG,
              facilities=None) -> SyntheticCase:
    grid = grid_from_degrees(nx, ny, origin, cellsize_deg)
    facilities = facilities if facilities is not None else default_facilities(grid)
    inventory = rasterize_emissions(facilities, grid)
    face_wind = interpolate_wind(synthetic_wind_samples(grid), grid)
    population = synthetic_population(grid)

    D = assemble_diffusion(grid)
    C = assemble_advection(grid, face_wind)
    model = SulfateModel(grid, D, C, inventory.X, theta)
    v_obs = model.sample_field(np.random.default_rng(seed))
    return SyntheticCase(grid=grid, facilities=facilities, inventory=inventory,
                         face_wind=face_wind, population=population,
                         v_obs=v_obs, theta=theta, model=model)


def write_case(case: SyntheticCase, out_dir, mcmc=None, forecast=None) -> Path:
    """Write the case as CSV/raster inputs plus a run config; returns the
    config path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = case.grid
    cell = grid.width_deg / grid.nx

    write_emissions_csv(out / "emissions.csv", case.facilities)

    def wind_raster(component) -> Raster:
        # sample the interpolated field back at cell centers for the raster
        samples = synthetic_wind_samples(grid)
        arr = np.asarray(samples)
        from scipy.interpolate import LinearNDInterpolator

        lon, lat = grid.cell_centers_lonlat()
        col = 2 if component == "u" else 3
        interp = LinearNDInterpolator(arr[:, :2], arr[:, col])
        return raster_from_vector(grid, interp(np.column_stack([lon, lat])), cell)

    write_raster(out / "wind_u.asc", wind_raster("u"))
    write_raster(out / "wind_v.asc", wind_raster("v"))
    write_raster(out / "population.asc",
                 raster_from_vector(grid, case.population, cell))
    write_raster(out / "sulfate.asc", raster_from_vector(grid, case.v_obs, cell))

    config = {
        "grid": {"nx": grid.nx, "ny": grid.ny, "origin_lon": grid.origin[0],
                 "origin_lat": grid.origin[1], "cellsize_deg": cell},
        "files": {
            "emissions_csv": str(out / "emissions.csv"),
            "wind_u_raster": str(out / "wind_u.asc"),
            "wind_v_raster": str(out / "wind_v.asc"),
            "sulfate_raster": str(out / "sulfate.asc"),
            "population_raster": str(out / "population.asc"),
        },
        "delta": case.theta.delta,
        "T": case.theta.T,
        "mcmc": mcmc or {"chains": 2, "iterations": 2000, "burn_in": 500,
                         "seed": 1234},
        "forecast": forecast or {"fraction": 0.8, "n_draws": 200, "seed": 99},
    }
    config_path = out / "config.json"
    with open(config_path, "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return config_path
