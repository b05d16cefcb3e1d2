"""File formats: ESRI ASCII rasters and the emissions facility CSV.

Rasters are the exchange format for wind samples, population, observed
sulfate, and validity masks.  Values are stored row-major with the north
row first; loading flips to the package's south-origin cell ordering.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DataError
from .grid import Facility, Grid

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


@dataclass(frozen=True)
class Raster:
    """An ESRI ASCII grid: values[j, i] with j=0 the SOUTH row (flipped on load)."""

    ncols: int
    nrows: int
    xllcorner: float
    yllcorner: float
    cellsize: float
    nodata_value: float
    values: np.ndarray  # shape (nrows, ncols), NODATA cells hold nan

    @property
    def mask(self) -> np.ndarray:
        """True where a value is present (not NODATA)."""
        return np.isfinite(self.values)

    def to_vector(self, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        """Flatten onto grid cells (k = j*nx + i); returns (values, valid_mask)."""
        if (self.ncols, self.nrows) != (grid.nx, grid.ny):
            raise DataError(
                f"raster is {self.ncols}x{self.nrows} but grid is {grid.nx}x{grid.ny}")
        if abs(self.xllcorner - grid.origin[0]) > 1e-6 or \
           abs(self.yllcorner - grid.origin[1]) > 1e-6:
            raise DataError(
                f"raster corner ({self.xllcorner}, {self.yllcorner}) does not match "
                f"grid origin {grid.origin}")
        return self.values.ravel(), self.mask.ravel()

    def sample_points(self) -> np.ndarray:
        """(lon, lat, value) rows for every non-NODATA cell center."""
        lon = self.xllcorner + (np.arange(self.ncols) + 0.5) * self.cellsize
        lat = self.yllcorner + (np.arange(self.nrows) + 0.5) * self.cellsize
        LON, LAT = np.meshgrid(lon, lat)
        ok = self.mask.ravel()
        return np.column_stack([LON.ravel()[ok], LAT.ravel()[ok], self.values.ravel()[ok]])


def read_raster(path) -> Raster:
    path = Path(path)
    if not path.exists():
        raise DataError(f"raster file not found: {path}")
    header: dict[str, float] = {}
    rows: list[list[float]] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            key = parts[0].lower()
            if key in _HEADER_KEYS and len(parts) == 2:
                header[key] = float(parts[1])
            else:
                try:
                    rows.append([float(p) for p in parts])
                except ValueError as exc:
                    raise DataError(f"bad raster line in {path}: {line!r}") from exc
    for key in ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize"):
        if key not in header:
            raise DataError(f"raster {path} missing header field {key}")
    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    nodata = header.get("nodata_value", -9999.0)
    flat = [v for row in rows for v in row]
    if len(flat) != ncols * nrows:
        raise DataError(
            f"raster {path}: expected {ncols * nrows} values, found {len(flat)}")
    values = np.asarray(flat, dtype=float).reshape(nrows, ncols)
    values = values[::-1].copy()  # file stores the north row first
    values[values == nodata] = np.nan
    return Raster(ncols=ncols, nrows=nrows, xllcorner=header["xllcorner"],
                  yllcorner=header["yllcorner"], cellsize=header["cellsize"],
                  nodata_value=nodata, values=values)


def write_raster(path, raster: Raster) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"ncols {raster.ncols}\n")
        fh.write(f"nrows {raster.nrows}\n")
        fh.write(f"xllcorner {raster.xllcorner!r}\n")
        fh.write(f"yllcorner {raster.yllcorner!r}\n")
        fh.write(f"cellsize {raster.cellsize!r}\n")
        fh.write(f"NODATA_value {raster.nodata_value!r}\n")
        vals = raster.values[::-1]  # back to north row first
        for row in vals:
            out = [repr(raster.nodata_value) if not np.isfinite(v) else repr(float(v))
                   for v in row]
            fh.write(" ".join(out) + "\n")


def raster_from_vector(grid: Grid, vec: np.ndarray, cellsize_deg: float,
                       mask: np.ndarray | None = None,
                       nodata: float = -9999.0) -> Raster:
    """Package a per-cell vector as a Raster aligned with the grid."""
    values = np.asarray(vec, dtype=float).reshape(grid.ny, grid.nx).copy()
    if mask is not None:
        values[~np.asarray(mask, dtype=bool).reshape(grid.ny, grid.nx)] = np.nan
    return Raster(ncols=grid.nx, nrows=grid.ny, xllcorner=grid.origin[0],
                  yllcorner=grid.origin[1], cellsize=cellsize_deg,
                  nodata_value=nodata, values=values)


EMISSIONS_HEADER = ["facility_id", "name", "lon", "lat", "so2_tons"]


def read_emissions_csv(path) -> list[Facility]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"emissions file not found: {path}")
    facilities = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(EMISSIONS_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise DataError(f"emissions CSV {path} missing columns: {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                facilities.append(Facility(
                    facility_id=row["facility_id"].strip(),
                    name=row["name"].strip(),
                    lon=float(row["lon"]),
                    lat=float(row["lat"]),
                    so2_tons=float(row["so2_tons"]),
                ))
            except (TypeError, ValueError) as exc:
                raise DataError(f"bad emissions row at {path}:{lineno}") from exc
    return facilities


def write_emissions_csv(path, facilities) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EMISSIONS_HEADER)
        for f in facilities:
            writer.writerow([f.facility_id, f.name, repr(f.lon), repr(f.lat),
                             repr(f.so2_tons)])
