"""A round sphere under the H^rho flow, numerically and exactly.

The lower cap of a sphere resting on the origin is evolved on a small box
whose edges follow the exact cap. Halving dx should cut the error by
about four.

    python3 demos/shrinking_sphere.py
"""

import numpy as np

from convexflow import FlowParams, SphereSolution, run, sphere_cap_graph

rho, n, r0 = 1.0, 2, 2.0
sphere = SphereSolution.resting_on_origin(r0, rho, n)
t_end = 0.1
print(f"rho={rho}, n={n}: extinction at t*={sphere.extinction_time:.4f}, r({t_end})={sphere.radius(t_end):.6f}")

previous = None
for dx in (0.05, 0.025, 0.0125):
    p = FlowParams(rho=rho, n=n, L=0.5, dx=dx, t_end=t_end, boundary="barrier", barrier=sphere)
    traj = run(sphere_cap_graph(sphere, 0.0, p.grid), p)
    err = np.max(np.abs(traj.snapshots[-1].values - sphere_cap_graph(sphere, t_end, p.grid).values))
    ratio = "" if previous is None else f"  (ratio {previous / err:.2f})"
    print(f"dx={dx:<7} steps={len(traj.records):<6} max error={err:.3e}{ratio}")
    previous = err
