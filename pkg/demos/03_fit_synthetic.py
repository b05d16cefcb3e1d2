"""Fit the coupled SO2 -> SO4 model to synthetic data with known truth.

Generates a 10x10 case at the reference parameter point, runs two short
MCMC chains, and prints the posterior summary table next to the truth.
Expect a couple of minutes of sampling.
"""

import numpy as np

from oufield import synthetic
from oufield.cli import write_summary_table
from oufield.inference import MCMCConfig, diagnostics, dic, model_loglik_fn, \
    run_chains
from oufield.sulfate import PARAM_NAMES

case = synthetic.make_case(nx=10, ny=10, seed=7)
truth = case.theta
print("synthetic truth:",
      {name: getattr(truth, name) for name in PARAM_NAMES})

cfg = MCMCConfig(n_chains=2, iterations=4000, burn_in=1000)
traces = run_chains(case.model.clone(), case.v_obs, None, cfg, seeds=[1, 2])

print()
print(write_summary_table(traces, delta=truth.delta, T=truth.T))

diag = diagnostics(traces)
print("acceptance rates (chain 0):",
      {k: round(v, 3) for k, v in traces[0].acceptance.items()})

loglik = model_loglik_fn(case.model.clone(), case.v_obs)
print(f"DIC of the coupled model on this data: {dic(traces, loglik, thin=20):.1f}")
print("(reference full-data values: coupled -47790, uncoupled -47370, "
      "snapshot -43140; not reproducible at desk scale)")
