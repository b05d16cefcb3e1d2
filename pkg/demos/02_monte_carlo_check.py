"""Cross-check the analytic laws against brute-force Euler-Maruyama.

The simulator shares no code with the distribution formulas (no matrix
exponentials, no Lyapunov solves), so agreement here is a real test.
"""

import numpy as np
import scipy.linalg as la

from oufield import OUSystem, assemble_advection, assemble_diffusion, \
    assemble_transport, build_grid, stationary, time_avg_exact
from oufield.grid import FaceWind
from oufield.simulate import SimConfig, simulate_ensemble, simulate_path, \
    time_average_path

rng = np.random.default_rng(42)

grid = build_grid(4, 4, origin=(0.0, 0.0), dx=1.0, dy=1.0)
wind = FaceWind(u_face=rng.normal(0, 1, (5, 4)), v_face=rng.normal(0, 1, (4, 5)))
A = assemble_transport(assemble_diffusion(grid),
                       assemble_advection(grid, wind), 0.3, 0.5, 2.0)
system = OUSystem(A=A, m=rng.uniform(0.5, 1.5, grid.n), sigma2=1.0)

print("one path, thinned:")
times, path = simulate_path(system, SimConfig(dt=1e-3, T=2.0, store_every=200),
                            rng)
for t, y in zip(times, path):
    print(f"  t={t:5.2f}  |y|={la.norm(y):7.4f}")
print(f"trapezoid time average of that path: first 4 cells "
      f"{np.round(time_average_path(path, times)[:4], 3)}")

print("\nensemble vs analytic stationary covariance:")
S = stationary(system).cov
ens = simulate_ensemble(system, SimConfig(dt=0.005, T=6.0, n_paths=20_000), rng)
rel = la.norm(np.cov(ens.T) - S, "fro") / la.norm(S, "fro")
print(f"  20k end states, relative Frobenius gap: {rel:.3f}")

print("\nensemble of time averages vs the analytic averaged law:")
psi = time_avg_exact(system, 1.0).cov
avg = simulate_ensemble(system, SimConfig(dt=1e-3, T=1.0, n_paths=20_000,
                                          initial="stationary"), rng,
                        time_average=True)
rel = la.norm(np.cov(avg.T) - psi, "fro") / la.norm(psi, "fro")
print(f"  20k averaged paths, relative Frobenius gap: {rel:.3f}")
print("  (the acceptance suite pushes this to 100k paths and 5%)")
