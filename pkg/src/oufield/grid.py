"""Rectangular spatial discretization and mapping of geographic data onto it.

Cells are indexed by (i, j) with i running east (0..nx-1) and j running
north (0..ny-1); the linear index is k = j*nx + i.  Geographic coordinates
are mapped with an equirectangular approximation: one degree of latitude is
KM_PER_DEG_LAT km, one degree of longitude is KM_PER_DEG_LAT*cos(mid_lat) km.
Both scale constants are recorded on the Grid so the mapping is reproducible.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import (
    LinearNDInterpolator,
    NearestNDInterpolator,
    RegularGridInterpolator,
)

from .exceptions import ConfigError, DataError

KM_PER_DEG_LAT = 111.2


@dataclass(frozen=True)
class Grid:
    """Regular rectangular grid over a lon/lat bounding box.

    nx, ny    -- cell counts east-west / north-south
    dx, dy    -- cell edge lengths in km
    origin    -- (lon, lat) of the lower-left corner
    km_per_deg_lon, km_per_deg_lat -- equirectangular scale constants
    """

    nx: int
    ny: int
    dx: float
    dy: float
    origin: tuple[float, float]
    km_per_deg_lon: float
    km_per_deg_lat: float = KM_PER_DEG_LAT

    @property
    def n(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area_km2(self) -> float:
        return self.dx * self.dy

    @property
    def width_deg(self) -> float:
        return self.nx * self.dx / self.km_per_deg_lon

    @property
    def height_deg(self) -> float:
        return self.ny * self.dy / self.km_per_deg_lat

    def to_linear(self, i, j):
        return np.asarray(j) * self.nx + np.asarray(i)

    def from_linear(self, k):
        k = np.asarray(k)
        return k % self.nx, k // self.nx

    def km_xy(self, lon, lat):
        """Map lon/lat to km east/north of the origin."""
        x = (np.asarray(lon, dtype=float) - self.origin[0]) * self.km_per_deg_lon
        y = (np.asarray(lat, dtype=float) - self.origin[1]) * self.km_per_deg_lat
        return x, y

    def lonlat(self, x_km, y_km):
        lon = self.origin[0] + np.asarray(x_km, dtype=float) / self.km_per_deg_lon
        lat = self.origin[1] + np.asarray(y_km, dtype=float) / self.km_per_deg_lat
        return lon, lat

    def cell_of_lonlat(self, lon: float, lat: float) -> int | None:
        """Linear cell index containing (lon, lat), or None if out of domain.

        Cells own the half-open box [x_left, x_right) x [y_bottom, y_top), so
        points on a shared edge assign deterministically to the cell on the
        east/north side.
        """
        x, y = self.km_xy(lon, lat)
        i = math.floor(x / self.dx)
        j = math.floor(y / self.dy)
        if 0 <= i < self.nx and 0 <= j < self.ny:
            return int(j * self.nx + i)
        return None

    def cell_centers_lonlat(self):
        """(lon, lat) arrays of all cell centers, in linear-index order."""
        i = np.arange(self.nx)
        j = np.arange(self.ny)
        xc = (i + 0.5) * self.dx
        yc = (j + 0.5) * self.dy
        lon = self.origin[0] + xc / self.km_per_deg_lon
        lat = self.origin[1] + yc / self.km_per_deg_lat
        lon2, lat2 = np.meshgrid(lon, lat)  # shape (ny, nx)
        return lon2.ravel(), lat2.ravel()

    def u_face_midpoints(self):
        """lon/lat of west-east face midpoints, arrays of shape (nx+1, ny)."""
        x = np.arange(self.nx + 1) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        X, Y = np.meshgrid(x, y, indexing="ij")
        return self.lonlat(X, Y)

    def v_face_midpoints(self):
        """lon/lat of south-north face midpoints, arrays of shape (nx, ny+1)."""
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = np.arange(self.ny + 1) * self.dy
        X, Y = np.meshgrid(x, y, indexing="ij")
        return self.lonlat(X, Y)


def build_grid(nx: int, ny: int, origin: tuple[float, float], dx: float, dy: float) -> Grid:
    """Construct a Grid with dx, dy in km.

    The longitude scale constant is evaluated at the mid-latitude of the
    domain so that the recorded mapping is self-consistent.
    """
    if nx < 2 or ny < 2:
        raise ConfigError(f"grid needs at least 2 cells per axis, got nx={nx}, ny={ny}")
    if dx <= 0 or dy <= 0:
        raise ConfigError(f"cell spacing must be positive, got dx={dx}, dy={dy}")
    mid_lat = origin[1] + 0.5 * ny * dy / KM_PER_DEG_LAT
    km_per_deg_lon = KM_PER_DEG_LAT * math.cos(math.radians(mid_lat))
    if km_per_deg_lon <= 0:
        raise ConfigError(f"domain mid-latitude {mid_lat} is outside (-90, 90)")
    return Grid(nx=int(nx), ny=int(ny), dx=float(dx), dy=float(dy),
                origin=(float(origin[0]), float(origin[1])),
                km_per_deg_lon=km_per_deg_lon)


def grid_from_degrees(nx: int, ny: int, origin: tuple[float, float], cellsize_deg: float) -> Grid:
    """Construct a Grid whose cells are square in degrees (raster-aligned).

    dx/dy in km follow from the equirectangular scales, so the grid lines up
    exactly with an ESRI ASCII raster of the same corner and cellsize.
    """
    if cellsize_deg <= 0:
        raise ConfigError(f"cellsize_deg must be positive, got {cellsize_deg}")
    mid_lat = origin[1] + 0.5 * ny * cellsize_deg
    km_per_deg_lon = KM_PER_DEG_LAT * math.cos(math.radians(mid_lat))
    if km_per_deg_lon <= 0:
        raise ConfigError(f"domain mid-latitude {mid_lat} is outside (-90, 90)")
    if nx < 2 or ny < 2:
        raise ConfigError(f"grid needs at least 2 cells per axis, got nx={nx}, ny={ny}")
    return Grid(nx=int(nx), ny=int(ny),
                dx=cellsize_deg * km_per_deg_lon, dy=cellsize_deg * KM_PER_DEG_LAT,
                origin=(float(origin[0]), float(origin[1])),
                km_per_deg_lon=km_per_deg_lon)


@dataclass(frozen=True)
class Facility:
    facility_id: str
    name: str
    lon: float
    lat: float
    so2_tons: float


@dataclass(frozen=True)
class EmissionsInventory:
    """Per-cell aggregation of facility SO2 tonnage.

    X[k] holds the summed annual tonnage of all in-domain facilities in cell
    k; facilities outside the grid bounding box are kept in `out_of_domain`
    rather than silently dropped.
    """

    facilities: tuple[Facility, ...]
    X: np.ndarray
    cell_of: dict[str, int] = field(default_factory=dict)
    out_of_domain: tuple[str, ...] = ()

    def facility(self, facility_id: str) -> Facility:
        for f in self.facilities:
            if f.facility_id == facility_id:
                return f
        raise DataError(f"unknown facility id: {facility_id!r}")


@dataclass(frozen=True)
class PopulationGrid:
    pop: np.ndarray

    def __post_init__(self):
        pop = np.asarray(self.pop, dtype=float)
        if np.any(~np.isfinite(pop)) or np.any(pop < 0):
            raise DataError("population must be finite and nonnegative")
        object.__setattr__(self, "pop", pop)


def rasterize_emissions(facilities, grid: Grid) -> EmissionsInventory:
    """Aggregate facility tonnage onto grid cells.

    Facilities whose coordinates fall outside the bounding box are reported
    in the inventory's out_of_domain list.  An empty facility list yields a
    valid all-zero inventory with a warning.
    """
    facilities = tuple(facilities)
    if not facilities:
        warnings.warn("empty facility list: emissions inventory is all zero")
    X = np.zeros(grid.n)
    cell_of: dict[str, int] = {}
    out = []
    seen = set()
    for f in facilities:
        if f.facility_id in seen:
            raise DataError(f"duplicate facility id: {f.facility_id!r}")
        seen.add(f.facility_id)
        if not (np.isfinite(f.lon) and np.isfinite(f.lat) and np.isfinite(f.so2_tons)):
            raise DataError(f"facility {f.facility_id!r} has nonfinite fields")
        if f.so2_tons < 0:
            raise DataError(f"facility {f.facility_id!r} has negative tonnage")
        k = grid.cell_of_lonlat(f.lon, f.lat)
        if k is None:
            out.append(f.facility_id)
        else:
            X[k] += f.so2_tons
            cell_of[f.facility_id] = k
    return EmissionsInventory(facilities=facilities, X=X, cell_of=cell_of,
                              out_of_domain=tuple(out))


@dataclass(frozen=True)
class FaceWind:
    """Wind velocities at cell-face midpoints (Arakawa-C staggering).

    u_face -- (nx+1, ny), m/s, positive eastward; u_face[i, j] sits between
              cells (i-1, j) and (i, j); i = 0 and i = nx are domain edges.
    v_face -- (nx, ny+1), m/s, positive northward, staggered analogously.
    """

    u_face: np.ndarray
    v_face: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u_face, dtype=float)
        v = np.asarray(self.v_face, dtype=float)
        if u.ndim != 2 or v.ndim != 2:
            raise DataError("face winds must be 2-d arrays")
        nx = u.shape[0] - 1
        ny = u.shape[1]
        if v.shape != (nx, ny + 1):
            raise DataError(
                f"inconsistent face dimensions: u_face {u.shape} implies grid "
                f"({nx}, {ny}) but v_face is {v.shape}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise DataError("face wind values must be finite")
        object.__setattr__(self, "u_face", u)
        object.__setattr__(self, "v_face", v)

    def matches(self, grid: Grid) -> bool:
        return self.u_face.shape == (grid.nx + 1, grid.ny) and \
            self.v_face.shape == (grid.nx, grid.ny + 1)


def _component_interpolator(lon, lat, values):
    """Interpolator for one wind component over scattered or gridded samples.

    Samples forming a complete rectilinear lon/lat lattice get true bilinear
    interpolation; anything else falls back to piecewise-linear on a Delaunay
    triangulation.  Queries outside the sample hull use the nearest sample.
    """
    pts = np.column_stack([lon, lat])
    ulon, ulat = np.unique(lon), np.unique(lat)
    if ulon.size >= 2 and ulat.size >= 2 and ulon.size * ulat.size == len(lon):
        order = np.lexsort((lat, lon))
        if np.array_equal(pts[order], np.column_stack(
                [np.repeat(ulon, ulat.size), np.tile(ulat, ulon.size)])):
            vgrid = np.asarray(values)[order].reshape(ulon.size, ulat.size)
            lin = RegularGridInterpolator((ulon, ulat), vgrid, method="linear",
                                          bounds_error=False, fill_value=np.nan)
            near = RegularGridInterpolator((ulon, ulat), vgrid, method="nearest",
                                           bounds_error=False, fill_value=None)

            def interp(q):
                out = lin(q)
                bad = ~np.isfinite(out)
                if np.any(bad):
                    out[bad] = near(q[bad])
                return out

            return interp

    lin = LinearNDInterpolator(pts, values)
    near = NearestNDInterpolator(pts, values)

    def interp(q):
        out = lin(q)
        bad = ~np.isfinite(out)
        if np.any(bad):
            out[bad] = near(q[bad])
        return out

    return interp


def interpolate_wind(raw_wind_samples, grid: Grid) -> FaceWind:
    """Interpolate (lon, lat, u, v) samples to face midpoints.

    Requires at least 4 non-collinear sample locations.
    """
    samples = np.asarray(raw_wind_samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 4:
        raise DataError("wind samples must be rows of (lon, lat, u, v)")
    if not np.all(np.isfinite(samples)):
        raise DataError("wind samples must be finite")
    if samples.shape[0] < 4:
        raise DataError("wind interpolation needs at least 4 samples")
    lon, lat, u, v = samples.T
    centered = np.column_stack([lon - lon.mean(), lat - lat.mean()])
    if np.linalg.matrix_rank(centered, tol=1e-10 * max(1.0, np.abs(centered).max())) < 2:
        raise DataError("wind samples are collinear; cannot interpolate a plane")

    u_interp = _component_interpolator(lon, lat, u)
    v_interp = _component_interpolator(lon, lat, v)

    ulon, ulat = grid.u_face_midpoints()
    uq = np.column_stack([ulon.ravel(), ulat.ravel()])
    u_face = u_interp(uq).reshape(grid.nx + 1, grid.ny)

    vlon, vlat = grid.v_face_midpoints()
    vq = np.column_stack([vlon.ravel(), vlat.ravel()])
    v_face = v_interp(vq).reshape(grid.nx, grid.ny + 1)

    return FaceWind(u_face=u_face, v_face=v_face)
