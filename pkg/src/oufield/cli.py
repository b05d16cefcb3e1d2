"""Command-line surface: check, fit, forecast, simulate, validate, serve.

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 numerical
failure.  Every artifact written embeds the config hash and the seed so a
rerun with identical inputs is byte-identical.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import LoadedInputs, RunConfig, load_inputs, load_run_config
from .exceptions import (
    ConfigError,
    DataError,
    NumericalError,
    OUFieldError,
    StabilityError,
    UnsupportedSizeError,
)
from .forecast import Scenario, forecast_exposure, forecast_to_json, rank_facilities
from .inference import diagnostics, load_trace, pool_post_burn, run_chains, save_trace
from .operators import (
    assemble_advection,
    assemble_diffusion,
    assemble_transport,
    column_sum_defect,
    gershgorin_min_real,
    min_real_eigenvalue,
)
from .sulfate import PARAM_NAMES, REFERENCE_THETA, SulfateModel, Theta

INTERPRETATIONS = {
    "gamma": "sub-annual wind transport",
    "alpha": "annual wind advection",
    "eta": "SO2 to SO4 conversion",
    "beta": "SO2 emission scaling",
    "sigma2": "process noise variance",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="oufield", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--config", required=True, help="run config JSON")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=None)

    p_check = sub.add_parser("check", help="operator diagnostics")
    common(p_check)

    p_fit = sub.add_parser("fit", help="run MCMC and write traces + summary")
    common(p_fit)

    p_fc = sub.add_parser("forecast", help="scenario forecast from saved traces")
    common(p_fc)
    p_fc.add_argument("--traces", required=True, help="directory with fit output")
    p_fc.add_argument("--facility", action="append", default=[],
                      help="facility id to scrub (repeatable)")
    p_fc.add_argument("--fraction", type=float, default=None)
    p_fc.add_argument("--n-draws", type=int, default=None)
    p_fc.add_argument("--rank", action="store_true",
                      help="also rank all in-domain facilities")

    p_sim = sub.add_parser("simulate", help="Euler-Maruyama runs / posterior fields")
    common(p_sim)
    p_sim.add_argument("--traces", default=None,
                       help="fit output directory for posterior-predictive fields")
    p_sim.add_argument("--n-paths", type=int, default=1)
    p_sim.add_argument("--dt", type=float, default=None)
    p_sim.add_argument("--horizon", type=float, default=1.0)

    p_val = sub.add_parser("validate", help="run the oracle suite on small grids")
    p_val.add_argument("--seed", type=int, default=0)

    p_srv = sub.add_parser("serve", help="start the HTTP scenario service")
    p_srv.add_argument("--config", default=None)
    p_srv.add_argument("--traces", default=None)
    p_srv.add_argument("--bundle", default=None, help="saved model bundle (.npz)")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.add_argument("--threads", type=int, default=None)
    return parser


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get("OUFIELD_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"OUFIELD_THREADS is not an integer: {env!r}") from exc
    return 1


def _build_model(config: RunConfig, inputs: LoadedInputs,
                 theta: Theta | None = None) -> SulfateModel:
    D = assemble_diffusion(inputs.grid)
    C = assemble_advection(inputs.grid, inputs.face_wind)
    if theta is None:
        theta = REFERENCE_THETA.replace(delta=config.delta, T=config.T)
    return SulfateModel(inputs.grid, D, C, inputs.inventory.X, theta)


# -- subcommands ---------------------------------------------------------------

def cmd_check(args) -> int:
    config = load_run_config(args.config)
    inputs = load_inputs(config)
    D = assemble_diffusion(inputs.grid)
    C = assemble_advection(inputs.grid, inputs.face_wind)
    theta = REFERENCE_THETA.replace(delta=config.delta, T=config.T)

    ones_defect = float(np.abs(D.matrix @ np.ones(inputs.grid.n)).max())
    M = theta.gamma * D.matrix + theta.alpha * C.matrix
    col_defect = float(np.abs(np.asarray(M.sum(axis=0)).ravel()).max())
    norm_inf = float(np.abs(M).sum(axis=1).max())
    A = assemble_transport(D, C, theta.gamma, theta.alpha, theta.delta)
    off = A.matrix - __import__("scipy.sparse", fromlist=["sparse"]).diags(
        A.matrix.diagonal())
    m_matrix_ok = bool(off.nnz == 0 or off.max() <= 0) and \
        bool(A.matrix.diagonal().min() > 0)
    gersh = gershgorin_min_real(A)

    print(f"grid: {inputs.grid.nx} x {inputs.grid.ny} ({inputs.grid.n} cells)")
    print(f"facilities in domain: {len(inputs.inventory.cell_of)}"
          f" (out of domain: {len(inputs.inventory.out_of_domain)})")
    print(f"diffusion nullspace defect |D 1|_max: {ones_defect:.3e}")
    print(f"transport column-sum defect: {col_defect:.3e} (limit "
          f"{1e-10 * norm_inf:.3e})")
    print(f"M-matrix sign pattern: {'ok' if m_matrix_ok else 'VIOLATED'}")
    print(f"Gershgorin eigenvalue floor: {gersh:.6g} (delta = {theta.delta})")
    if inputs.grid.n <= 3000:
        lam = min_real_eigenvalue(A)
        print(f"min real eigenvalue: {lam:.6g}")
    if col_defect > 1e-10 * norm_inf or not m_matrix_ok:
        print("check FAILED")
        return 3
    print("check passed")
    return 0


def _summary_rows(traces):
    pooled = pool_post_burn(traces)
    try:
        diag = diagnostics(traces)
    except DataError:
        diag = {"rhat": {p: math.nan for p in PARAM_NAMES},
                "ess": {p: math.nan for p in PARAM_NAMES}}
    rows = []
    for idx, name in enumerate(PARAM_NAMES):
        col = pooled[:, idx]
        lo, hi = np.percentile(col, [2.5, 97.5])
        rows.append((name, INTERPRETATIONS[name], col.mean(), lo, hi,
                     diag["rhat"][name], diag["ess"][name]))
    return rows


def write_summary_table(traces, delta: float, T: float) -> str:
    """Posterior mean, equal-tailed 95% interval, R-hat and ESS per parameter."""
    lines = [f"{'Parameter':<10} {'Interpretation':<28} {'mean':>12} "
             f"{'95% CI':>28} {'Rhat':>8} {'ESS':>10}"]
    for name, interp, mean, lo, hi, rhat, ess in _summary_rows(traces):
        ci = f"({lo:.6g}, {hi:.6g})"
        lines.append(f"{name:<10} {interp:<28} {mean:>12.6g} {ci:>28} "
                     f"{rhat:>8.3f} {ess:>10.1f}")
    lines.append(f"{'delta':<10} {'SO4 deposition (fixed)':<28} {delta:>12.6g}")
    lines.append(f"{'T':<10} {'averaging window (fixed)':<28} {T:>12.6g}")
    return "\n".join(lines) + "\n"


def cmd_fit(args) -> int:
    config = load_run_config(args.config)
    inputs = load_inputs(config)
    model = _build_model(config, inputs)
    mcmc = config.mcmc_config(threads=_threads(args))
    seeds = config.seeds(args.seed)

    traces = run_chains(model, inputs.v_obs, inputs.mask, mcmc, seeds)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for trace in traces:
        save_trace(trace, out / f"trace_chain{trace.chain_id}.csv",
                   out / f"trace_chain{trace.chain_id}.json",
                   config_hash=config.config_hash)
    table = write_summary_table(traces, config.delta, config.T)
    (out / "summary.txt").write_text(
        f"config_hash: {config.config_hash}\nseeds: {seeds}\n\n{table}",
        encoding="utf-8")
    print(table, end="")
    print(f"wrote {len(traces)} chains to {out}")
    return 0


def _load_traces(trace_dir) -> list:
    trace_dir = Path(trace_dir)
    csvs = sorted(trace_dir.glob("trace_chain*.csv"))
    if not csvs:
        raise DataError(f"no trace_chain*.csv files in {trace_dir}")
    return [load_trace(c, c.with_suffix(".json")) for c in csvs]


def cmd_forecast(args) -> int:
    config = load_run_config(args.config)
    inputs = load_inputs(config)
    traces = _load_traces(args.traces)
    pooled = pool_post_burn(traces)
    delta = traces[0].delta
    T = traces[0].T
    model = _build_model(config, inputs,
                         theta=REFERENCE_THETA.replace(delta=delta, T=T))

    fraction = args.fraction if args.fraction is not None else \
        config.forecast["fraction"]
    n_draws = args.n_draws if args.n_draws is not None else config.forecast["n_draws"]
    seed = args.seed if args.seed is not None else config.forecast["seed"]

    facility_ids = args.facility or sorted(inputs.inventory.cell_of)
    if not facility_ids:
        raise DataError("no in-domain facilities to forecast")
    scenario = Scenario.create(inputs.inventory,
                               {fid: fraction for fid in facility_ids},
                               label="+".join(facility_ids))
    rng = np.random.default_rng(seed)
    summary, mean_field = forecast_exposure(model, inputs.inventory, pooled,
                                            scenario, n_draws,
                                            inputs.population, rng)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = forecast_to_json(scenario, n_draws, mean_field, summary, seed=seed,
                           config_hash=config.config_hash)
    (out / "forecast.json").write_text(doc, encoding="utf-8")
    print(f"scenario {scenario.label}: mean exposure reduction "
          f"{summary.mean:.6g} ({summary.lo:.6g}, {summary.hi:.6g})")

    if args.rank:
        ranking = rank_facilities(model, inputs.inventory, pooled,
                                  sorted(inputs.inventory.cell_of), fraction,
                                  n_draws, inputs.population,
                                  np.random.default_rng(seed + 1))
        rank_doc = {"fraction": fraction, "n_draws": n_draws, "seed": seed,
                    "config_hash": config.config_hash,
                    "ranking": [{"id": s.facility_id, "mean": s.mean,
                                 "lo": s.lo, "hi": s.hi} for s in ranking]}
        (out / "ranking.json").write_text(
            json.dumps(rank_doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        for s in ranking:
            print(f"  {s.facility_id:<12} {s.mean:.6g} ({s.lo:.6g}, {s.hi:.6g})")
    return 0


def cmd_simulate(args) -> int:
    from .simulate import SimConfig, export_path_csv, simulate_coupled

    config = load_run_config(args.config)
    inputs = load_inputs(config)
    seed = args.seed if args.seed is not None else 0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.traces:
        # posterior-predictive time-averaged fields
        traces = _load_traces(args.traces)
        pooled = pool_post_burn(traces)
        model = _build_model(config, inputs)
        rng = np.random.default_rng(seed)
        base = model.theta
        fields = []
        for k in range(args.n_paths):
            row = pooled[rng.integers(pooled.shape[0])]
            model.set_theta(base.with_free_values(row))
            fields.append(model.sample_field(rng))
        arr = np.asarray(fields)
        header = ",".join(f"cell{k}" for k in range(arr.shape[1]))
        np.savetxt(out / "posterior_fields.csv", arr, delimiter=",",
                   header=header, comments="")
        print(f"wrote {arr.shape[0]} posterior-predictive fields "
              f"({arr.shape[1]} cells) to {out / 'posterior_fields.csv'}")
        return 0

    model = _build_model(config, inputs)
    a_max = float(model.A_y().matrix.diagonal().max())
    dt = args.dt if args.dt is not None else 0.25 / a_max
    sim = SimConfig(dt=dt, T=args.horizon, initial="zero",
                    store_every=max(1, int(round(args.horizon / dt / 200))))
    times, y_path, z_path = simulate_coupled(model, sim,
                                             np.random.default_rng(seed))
    export_path_csv(out / "so4_path.csv", times, y_path)
    export_path_csv(out / "so2_path.csv", times, z_path)
    print(f"simulated {len(times)} stored steps (dt={dt:.3g}) to {out}")
    return 0


def cmd_validate(args) -> int:
    from .validate import run_validation

    report = run_validation(seed=args.seed)
    for name, ok, detail in report:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    if all(ok for _, ok, _ in report):
        print("validation suite passed")
        return 0
    print("validation suite FAILED")
    return 3


def cmd_serve(args) -> int:
    import uvicorn

    from .service import build_bundle_from_fit, create_app, load_bundle

    if args.bundle:
        bundle = load_bundle(args.bundle)
    elif args.config and args.traces:
        config = load_run_config(args.config)
        inputs = load_inputs(config)
        traces = _load_traces(args.traces)
        bundle = build_bundle_from_fit(config, inputs, traces)
    else:
        raise ConfigError("serve needs either --bundle or --config with --traces")
    app = create_app(bundle)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


COMMANDS = {
    "check": cmd_check,
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "serve": cmd_serve,
}


def cli_dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, StabilityError, UnsupportedSizeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OUFieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    try:
        return cli_dispatch(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:  # argparse --help/--version
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
