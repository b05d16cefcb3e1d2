"""Drive the whole pipeline through the CLI against generated input files.

Writes a synthetic case (emissions CSV + ESRI ASCII rasters + JSON config)
to ./demo_run/, then runs: check -> fit -> forecast -> simulate, exactly as
one would against real data.
"""

from pathlib import Path

from oufield import synthetic
from oufield.cli import main

root = Path("demo_run")
case = synthetic.make_case(nx=8, ny=8, seed=1)
config = synthetic.write_case(case, root / "inputs",
                              mcmc={"chains": 2, "iterations": 800,
                                    "burn_in": 200, "seed": 11},
                              forecast={"fraction": 0.8, "n_draws": 200,
                                        "seed": 4})
print(f"inputs written under {root / 'inputs'} (config: {config})\n")

for argv in (
    ["check", "--config", str(config), "--out", str(root / "out")],
    ["fit", "--config", str(config), "--out", str(root / "fit")],
    ["forecast", "--config", str(config), "--traces", str(root / "fit"),
     "--out", str(root / "forecast"), "--facility", "big_west", "--rank"],
    ["simulate", "--config", str(config), "--out", str(root / "sim"),
     "--horizon", "0.2"],
    ["validate"],
):
    print(f"\n$ oufield {' '.join(argv)}")
    rc = main(argv)
    print(f"(exit {rc})")
    assert rc == 0

print("\nto explore interactively:")
print(f"  oufield serve --config {config} --traces {root / 'fit'} --port 8000")
print("  then open frontend/ (see frontend/README.md)")
