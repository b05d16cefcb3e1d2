"""HTTP JSON API for interactive scenario exploration against a fitted model.

The service is read-only over a ModelBundle: grid + facilities + population
+ pooled posterior trace + precomputed per-facility unit responses.  Preview
requests are answered from the unit responses (the field mean is linear in
removed emissions); full requests run the posterior-predictive sampler.
Responses are serialized with sorted keys so identical (request, seed) pairs
produce byte-identical bodies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response

from .config import LoadedInputs, RunConfig
from .exceptions import DataError, NumericalError, OUFieldError, StabilityError
from .forecast import (
    Scenario,
    forecast_exposure,
    population_exposure,
    rank_facilities,
    reduced_inventory,
)
from .grid import EmissionsInventory, Facility, Grid, rasterize_emissions
from .inference import pool_post_burn
from .operators import assemble_advection, assemble_diffusion
from .grid import FaceWind
from .sulfate import PARAM_NAMES, REFERENCE_THETA, SulfateModel, Theta


@dataclass
class ModelBundle:
    grid: Grid
    facilities: tuple
    population: np.ndarray
    u_face: np.ndarray
    v_face: np.ndarray
    pooled: np.ndarray           # post-burn-in samples, (rows, 5)
    delta: float
    T: float
    theta_mean: np.ndarray       # (5,)
    ci95: np.ndarray             # (5, 2)
    baseline_mean_field: np.ndarray
    unit_ids: list               # in-domain facility ids, sorted
    unit_fields: np.ndarray      # (n_fac, n): mean field per removed ton, theta mean
    unit_exposure: np.ndarray    # (n_fac, n_sub): exposure per removed ton
    sub_rows: np.ndarray         # trace rows behind unit_exposure columns
    config_hash: str = ""

    def inventory(self) -> EmissionsInventory:
        return rasterize_emissions(self.facilities, self.grid)

    def theta(self) -> Theta:
        return Theta(**dict(zip(PARAM_NAMES, self.theta_mean)),
                     delta=self.delta, T=self.T)


def build_bundle_from_fit(config: RunConfig, inputs: LoadedInputs, traces,
                          n_sub: int = 400, sub_seed: int = 0) -> ModelBundle:
    pooled = pool_post_burn(traces)
    delta, T = traces[0].delta, traces[0].T
    theta_mean = pooled.mean(axis=0)
    ci95 = np.percentile(pooled, [2.5, 97.5], axis=0).T

    grid = inputs.grid
    inventory = inputs.inventory
    D = assemble_diffusion(grid)
    C = assemble_advection(grid, inputs.face_wind)
    theta_hat = Theta(**dict(zip(PARAM_NAMES, theta_mean)), delta=delta, T=T)
    model = SulfateModel(grid, D, C, inventory.X, theta_hat)
    baseline = model.so4_mean()

    unit_ids = sorted(inventory.cell_of)
    cells = [inventory.cell_of[fid] for fid in unit_ids]
    unit_fields = np.empty((len(unit_ids), grid.n))
    for row, cell in enumerate(cells):
        e = np.zeros(grid.n)
        e[cell] = 1.0
        unit_fields[row] = model.so4_mean(X=e)

    # exposure response per removed ton, per posterior draw: one pair of
    # transpose solves gives the response at every cell at once
    rng = np.random.default_rng(sub_seed)
    n_sub = min(n_sub, pooled.shape[0])
    sub_rows = np.sort(rng.choice(pooled.shape[0], size=n_sub, replace=False))
    pop_w = inputs.population / inputs.population.sum()
    unit_exposure = np.empty((len(unit_ids), n_sub))
    for col, row_idx in enumerate(sub_rows):
        theta_k = theta_hat.with_free_values(pooled[row_idx])
        model.set_theta(theta_k)
        _, lu_y, _ = model._y_ops()
        _, lu_z, _ = model._z_ops()
        g = lu_z.solve(lu_y.solve(pop_w, trans="T"), trans="T")
        unit_exposure[:, col] = theta_k.beta * theta_k.eta * g[cells]
    model.set_theta(theta_hat)

    return ModelBundle(grid=grid, facilities=tuple(inventory.facilities),
                       population=np.asarray(inputs.population, float),
                       u_face=inputs.face_wind.u_face,
                       v_face=inputs.face_wind.v_face, pooled=pooled,
                       delta=delta, T=T, theta_mean=theta_mean, ci95=ci95,
                       baseline_mean_field=baseline, unit_ids=unit_ids,
                       unit_fields=unit_fields, unit_exposure=unit_exposure,
                       sub_rows=sub_rows, config_hash=config.config_hash)


def save_bundle(path, bundle: ModelBundle) -> None:
    meta = {
        "grid": {"nx": bundle.grid.nx, "ny": bundle.grid.ny,
                 "dx": bundle.grid.dx, "dy": bundle.grid.dy,
                 "origin": list(bundle.grid.origin),
                 "km_per_deg_lon": bundle.grid.km_per_deg_lon,
                 "km_per_deg_lat": bundle.grid.km_per_deg_lat},
        "facilities": [[f.facility_id, f.name, f.lon, f.lat, f.so2_tons]
                       for f in bundle.facilities],
        "delta": bundle.delta, "T": bundle.T,
        "unit_ids": bundle.unit_ids, "config_hash": bundle.config_hash,
    }
    np.savez(path, meta=np.array(json.dumps(meta)), population=bundle.population,
             u_face=bundle.u_face, v_face=bundle.v_face, pooled=bundle.pooled,
             theta_mean=bundle.theta_mean, ci95=bundle.ci95,
             baseline=bundle.baseline_mean_field, unit_fields=bundle.unit_fields,
             unit_exposure=bundle.unit_exposure, sub_rows=bundle.sub_rows)


def load_bundle(path) -> ModelBundle:
    path = Path(path)
    if not path.exists():
        raise DataError(f"bundle file not found: {path}")
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        g = meta["grid"]
        grid = Grid(nx=g["nx"], ny=g["ny"], dx=g["dx"], dy=g["dy"],
                    origin=tuple(g["origin"]),
                    km_per_deg_lon=g["km_per_deg_lon"],
                    km_per_deg_lat=g["km_per_deg_lat"])
        facilities = tuple(Facility(fid, name, lon, lat, tons)
                           for fid, name, lon, lat, tons in meta["facilities"])
        return ModelBundle(grid=grid, facilities=facilities,
                           population=data["population"], u_face=data["u_face"],
                           v_face=data["v_face"], pooled=data["pooled"],
                           delta=meta["delta"], T=meta["T"],
                           theta_mean=data["theta_mean"], ci95=data["ci95"],
                           baseline_mean_field=data["baseline"],
                           unit_ids=list(meta["unit_ids"]),
                           unit_fields=data["unit_fields"],
                           unit_exposure=data["unit_exposure"],
                           sub_rows=data["sub_rows"],
                           config_hash=meta["config_hash"])


def _json_response(payload, status: int = 200) -> Response:
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return Response(content=body, status_code=status,
                    media_type="application/json")


def _error(status: int, code: str, message: str) -> Response:
    return _json_response({"error": {"code": code, "message": message}}, status)


def _validate_forecast_request(body, known_ids):
    if not isinstance(body, dict):
        raise DataError("request body must be a JSON object")
    reductions = body.get("reductions", {})
    if not isinstance(reductions, dict):
        raise DataError("reductions must be an object of id -> fraction")
    for fid, frac in reductions.items():
        if fid not in known_ids:
            raise DataError(f"unknown facility id: {fid!r}")
        if not isinstance(frac, (int, float)) or not (0.0 <= frac <= 1.0):
            raise DataError(f"fraction for {fid!r} must lie in [0, 1]")
    n_draws = body.get("n_draws", 200)
    if not isinstance(n_draws, int) or n_draws < 1:
        raise DataError("n_draws must be a positive integer")
    seed = body.get("seed", 0)
    if not isinstance(seed, int):
        raise DataError("seed must be an integer")
    mode = body.get("mode", "preview")
    if mode not in ("preview", "full"):
        raise DataError("mode must be 'preview' or 'full'")
    fraction_default = body.get("fraction_default", 0.8)
    if not isinstance(fraction_default, (int, float)) or \
            not (0.0 <= fraction_default <= 1.0):
        raise DataError("fraction_default must lie in [0, 1]")
    rank = body.get("rank")
    if rank is not None:
        if not isinstance(rank, list) or not all(isinstance(r, str) for r in rank):
            raise DataError("rank must be a list of facility ids")
        for fid in rank:
            if fid not in known_ids:
                raise DataError(f"unknown facility id in rank: {fid!r}")
    return reductions, n_draws, seed, mode, float(fraction_default), rank


class _ServiceState:
    """Read-only shared model state derived from the bundle once."""

    def __init__(self, bundle: ModelBundle):
        self.bundle = bundle
        self.inventory = bundle.inventory()
        self.D = assemble_diffusion(bundle.grid)
        self.C = assemble_advection(bundle.grid, FaceWind(u_face=bundle.u_face,
                                                          v_face=bundle.v_face))
        self.known_ids = {f.facility_id for f in bundle.facilities}
        self.tons = {f.facility_id: f.so2_tons for f in bundle.facilities}
        self.unit_index = {fid: k for k, fid in enumerate(bundle.unit_ids)}

    def model(self) -> SulfateModel:
        return SulfateModel(self.bundle.grid, self.D, self.C, self.inventory.X,
                            self.bundle.theta())

    def removed_tons(self, reductions) -> dict:
        return {fid: frac * self.tons[fid] for fid, frac in reductions.items()
                if fid in self.unit_index}

    def preview_field(self, reductions) -> np.ndarray:
        field = np.zeros(self.bundle.grid.n)
        for fid, tons in self.removed_tons(reductions).items():
            field += tons * self.bundle.unit_fields[self.unit_index[fid]]
        return field

    def preview_exposure_draws(self, reductions) -> np.ndarray:
        draws = np.zeros(self.bundle.unit_exposure.shape[1])
        for fid, tons in self.removed_tons(reductions).items():
            draws = draws + tons * self.bundle.unit_exposure[self.unit_index[fid]]
        return draws


def create_app(bundle: ModelBundle | None) -> FastAPI:
    app = FastAPI(title="oufield scenario service", docs_url=None, redoc_url=None)
    state = _ServiceState(bundle) if bundle is not None else None

    @app.exception_handler(Exception)
    async def handle_any(request, exc):  # pragma: no cover - safety net
        if isinstance(exc, (NumericalError, StabilityError)):
            return _error(500, "numerical_failure", str(exc))
        if isinstance(exc, DataError):
            return _error(400, "bad_request", str(exc))
        if isinstance(exc, OUFieldError):
            return _error(400, "bad_request", str(exc))
        return _error(500, "internal_error", str(exc))

    def no_model() -> Response:
        return _error(409, "no_model", "no model bundle is loaded")

    @app.get("/api/facilities")
    def facilities():
        if state is None:
            return no_model()
        payload = [{"id": f.facility_id, "name": f.name, "lon": f.lon,
                    "lat": f.lat, "so2_tons": f.so2_tons}
                   for f in sorted(state.bundle.facilities,
                                   key=lambda f: f.facility_id)]
        return _json_response(payload)

    @app.get("/api/model")
    def model_info():
        if state is None:
            return no_model()
        b = state.bundle
        payload = {
            "theta_posterior_mean": dict(zip(PARAM_NAMES, map(float, b.theta_mean))),
            "ci95": {name: [float(b.ci95[i, 0]), float(b.ci95[i, 1])]
                     for i, name in enumerate(PARAM_NAMES)},
            "grid": {"nx": b.grid.nx, "ny": b.grid.ny,
                     "origin": [b.grid.origin[0], b.grid.origin[1]],
                     "dx": b.grid.dx, "dy": b.grid.dy},
            "delta": b.delta, "T": b.T, "n_trace": int(b.pooled.shape[0]),
        }
        return _json_response(payload)

    @app.get("/api/field/mean")
    def field_mean():
        if state is None:
            return no_model()
        return _json_response(
            {"mean_field": [float(x) for x in state.bundle.baseline_mean_field]})

    @app.post("/api/forecast")
    async def forecast(request: Request):
        if state is None:
            return no_model()
        try:
            body = await request.json()
        except Exception:
            return _error(400, "bad_request", "request body is not valid JSON")
        try:
            reductions, n_draws, seed, mode, fraction_default, rank = \
                _validate_forecast_request(body, state.known_ids)
        except DataError as exc:
            return _error(400, "bad_request", str(exc))

        try:
            if mode == "preview":
                mean_field = state.preview_field(reductions)
                draws = state.preview_exposure_draws(reductions)
                lo, hi = np.percentile(draws, [2.5, 97.5])
                exposure = {"mean": float(draws.mean()), "lo": float(lo),
                            "hi": float(hi)}
                ranking = None
                if rank is not None:
                    ranking = _preview_ranking(state, rank, reductions,
                                               fraction_default)
            else:
                model = state.model()
                scenario = Scenario.create(state.inventory, reductions,
                                           label="request")
                rng = np.random.default_rng(seed)
                summary, mean_field = forecast_exposure(
                    model, state.inventory, state.bundle.pooled, scenario,
                    n_draws, state.bundle.population, rng)
                exposure = {"mean": summary.mean, "lo": summary.lo,
                            "hi": summary.hi}
                ranking = None
                if rank is not None:
                    ranked = rank_facilities(
                        model, state.inventory, state.bundle.pooled, rank,
                        fraction_default, n_draws, state.bundle.population,
                        np.random.default_rng(seed + 1), committed=reductions)
                    ranking = [{"id": s.facility_id, "mean": s.mean,
                                "lo": s.lo, "hi": s.hi} for s in ranked]
        except DataError as exc:
            return _error(400, "bad_request", str(exc))
        except (NumericalError, StabilityError) as exc:
            return _error(500, "numerical_failure", str(exc))

        payload = {"mean_field": [float(x) for x in mean_field],
                   "exposure": exposure}
        if ranking is not None:
            payload["ranking"] = ranking
        return _json_response(payload)

    return app


def _preview_ranking(state: _ServiceState, rank_ids, committed,
                     fraction_default: float):
    rows = []
    for fid in sorted(set(rank_ids)):
        remaining = state.tons[fid] * (1.0 - committed.get(fid, 0.0))
        removable = fraction_default * remaining
        if fid in state.unit_index:
            draws = removable * state.bundle.unit_exposure[state.unit_index[fid]]
        else:  # out-of-domain facility: no response
            draws = np.zeros(state.bundle.unit_exposure.shape[1])
        lo, hi = np.percentile(draws, [2.5, 97.5])
        rows.append({"id": fid, "mean": float(draws.mean()), "lo": float(lo),
                     "hi": float(hi)})
    rows.sort(key=lambda r: (-r["mean"], r["id"]))
    return rows
