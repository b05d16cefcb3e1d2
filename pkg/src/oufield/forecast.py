"""Emissions-intervention scenarios and posterior-predictive exposure forecasts.

A scenario removes a fraction of each named facility's SO2; the forecast
draws parameter rows from the pooled posterior trace and samples reduction
surfaces driven by the removed emissions.  Because the field mean is linear
in the emissions vector, reduction surfaces scale with the fraction and add
across facilities, which is what makes the preview/ranking machinery cheap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError
from .grid import EmissionsInventory, Facility
from .sulfate import SulfateModel, Theta


@dataclass(frozen=True)
class Scenario:
    """Map facility_id -> fraction of that facility's SO2 removed."""

    reductions: dict[str, float]
    label: str = ""

    def __post_init__(self):
        for fid, frac in self.reductions.items():
            if not (0.0 <= frac <= 1.0):
                raise DataError(
                    f"reduction fraction for {fid!r} must lie in [0, 1], got {frac}")

    @classmethod
    def create(cls, inventory: EmissionsInventory, reductions: dict[str, float],
               label: str = "") -> "Scenario":
        known = {f.facility_id for f in inventory.facilities}
        unknown = set(reductions) - known
        if unknown:
            raise DataError(f"unknown facility ids: {sorted(unknown)}")
        return cls(reductions=dict(reductions), label=label)


@dataclass(frozen=True)
class ExposureSummary:
    label: str
    mean: float
    lo: float
    hi: float
    per_draw: np.ndarray
    n_draws: int
    facility_id: str | None = None

    def __post_init__(self):
        if self.n_draws < 1:
            raise DataError("exposure summary needs at least one draw")
        if self.lo > self.hi:
            raise DataError("interval bounds out of order")


def apply_scenario(inventory: EmissionsInventory, scenario: Scenario) -> np.ndarray:
    """Per-cell vector of removed emissions X*; the post-intervention
    inventory is X - X*.  Unknown facility ids raise; facilities outside the
    domain contribute nothing (they are not part of X either)."""
    known = {f.facility_id: f for f in inventory.facilities}
    X_star = np.zeros_like(inventory.X)
    for fid, frac in scenario.reductions.items():
        fac = known.get(fid)
        if fac is None:
            raise DataError(f"unknown facility id: {fid!r}")
        cell = inventory.cell_of.get(fid)
        if cell is not None:
            X_star[cell] += frac * fac.so2_tons
    return X_star


def reduced_inventory(inventory: EmissionsInventory,
                      committed: dict[str, float]) -> EmissionsInventory:
    """Inventory left after committing a reductions map (sequential mode)."""
    if not committed:
        return inventory
    scenario = Scenario.create(inventory, committed, label="committed")
    X_star = apply_scenario(inventory, scenario)
    new_facs = tuple(
        Facility(f.facility_id, f.name, f.lon, f.lat,
                 f.so2_tons * (1.0 - committed.get(f.facility_id, 0.0)))
        for f in inventory.facilities)
    return EmissionsInventory(facilities=new_facs, X=inventory.X - X_star,
                              cell_of=dict(inventory.cell_of),
                              out_of_domain=inventory.out_of_domain)


def forecast_reduction(model: SulfateModel, inventory: EmissionsInventory,
                       pooled_trace: np.ndarray, scenario: Scenario,
                       n_draws: int, rng: np.random.Generator,
                       include_noise: bool = True) -> np.ndarray:
    """(n_draws, n) reduction surfaces.

    Each draw picks a parameter row uniformly (with replacement) from the
    pooled post-burn-in trace, then samples the field driven by the removed
    emissions X*.  include_noise=False returns the mean surfaces only.
    """
    pooled = np.asarray(pooled_trace, dtype=float)
    if pooled.ndim != 2 or pooled.shape[0] == 0:
        raise DataError("empty trace: nothing to forecast from")
    if n_draws < 1:
        raise DataError(f"n_draws must be >= 1, got {n_draws}")
    X_star = apply_scenario(inventory, scenario)
    base = model.theta
    fields = np.empty((n_draws, model.grid.n))
    for k in range(n_draws):
        row = pooled[rng.integers(pooled.shape[0])]
        model.set_theta(base.with_free_values(row))
        if include_noise:
            fields[k] = model.sample_field(rng, X=X_star)
        else:
            fields[k] = model.so4_mean(X=X_star)
    model.set_theta(base)
    return fields


def population_exposure(field: np.ndarray, population: np.ndarray) -> float:
    """Population-weighted average of a concentration field."""
    f = np.asarray(field, dtype=float).ravel()
    p = np.asarray(population, dtype=float).ravel()
    if f.size != p.size:
        raise DataError(f"field ({f.size}) and population ({p.size}) sizes differ")
    total = p.sum()
    if total <= 0:
        raise DataError("population weights are all zero")
    return float(np.dot(p, f) / total)


def summarize_exposure(per_draw: np.ndarray, label: str,
                       facility_id: str | None = None) -> ExposureSummary:
    per_draw = np.asarray(per_draw, dtype=float)
    lo, hi = np.percentile(per_draw, [2.5, 97.5])
    return ExposureSummary(label=label, mean=float(per_draw.mean()),
                           lo=float(lo), hi=float(hi), per_draw=per_draw,
                           n_draws=per_draw.size, facility_id=facility_id)


def forecast_exposure(model: SulfateModel, inventory: EmissionsInventory,
                      pooled_trace: np.ndarray, scenario: Scenario,
                      n_draws: int, population: np.ndarray,
                      rng: np.random.Generator,
                      include_noise: bool = True) -> tuple[ExposureSummary, np.ndarray]:
    """(exposure summary, mean reduction field) for one scenario."""
    fields = forecast_reduction(model, inventory, pooled_trace, scenario,
                                n_draws, rng, include_noise)
    per_draw = np.array([population_exposure(f, population) for f in fields])
    return summarize_exposure(per_draw, scenario.label), fields.mean(axis=0)


def rank_facilities(model: SulfateModel, inventory: EmissionsInventory,
                    pooled_trace: np.ndarray, candidate_ids, fraction: float,
                    n_draws: int, population: np.ndarray,
                    rng: np.random.Generator,
                    committed: dict[str, float] | None = None,
                    include_noise: bool = True) -> list[ExposureSummary]:
    """One single-facility scenario per candidate, sorted by mean
    population-weighted reduction (descending; ties broken by facility id).

    With a committed reductions map, candidates are evaluated against the
    already-reduced inventory, which is the sequential decision loop.
    """
    candidates = sorted(set(candidate_ids))
    if not candidates:
        raise DataError("no candidate facilities to rank")
    inv = reduced_inventory(inventory, committed or {})
    summaries = []
    for fid in candidates:
        scenario = Scenario.create(inv, {fid: fraction}, label=fid)
        summary, _ = forecast_exposure(model, inv, pooled_trace, scenario,
                                       n_draws, population, rng, include_noise)
        summaries.append(ExposureSummary(
            label=summary.label, mean=summary.mean, lo=summary.lo, hi=summary.hi,
            per_draw=summary.per_draw, n_draws=summary.n_draws, facility_id=fid))
    summaries.sort(key=lambda s: (-s.mean, s.facility_id))
    return summaries


def forecast_to_json(scenario: Scenario, n_draws: int, mean_field: np.ndarray,
                     summary: ExposureSummary, seed: int | None = None,
                     config_hash: str = "") -> str:
    doc = {
        "scenario": {"label": scenario.label,
                     "reductions": dict(sorted(scenario.reductions.items()))},
        "n_draws": n_draws,
        "mean_field": [float(x) for x in np.asarray(mean_field).ravel()],
        "exposure": {"mean": summary.mean, "lo": summary.lo, "hi": summary.hi},
        "per_draw_exposures": [float(x) for x in summary.per_draw],
        "seed": seed,
        "config_hash": config_hash,
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"
