"""Speed ratios at a fixed normal against (t1/t2)^(rho/(rho+1)).

On a shrinking sphere every normal sees the same speed. On the paraboloid
the vertex normal (0, -1) is tracked between t1 = 0.01 and t2 = 0.04.

    python3 demos/harnack.py
"""

from convexflow import FlowParams, SphereSolution, harnack_check, run, scenario
from convexflow.diagnostics import harnack_sphere

for rho in (0.5, 1.0, 2.0):
    s = SphereSolution.resting_on_origin(1.0, rho, 2)
    t1, t2 = 0.2 * s.extinction_time, 0.8 * s.extinction_time
    rec = harnack_sphere(s, t1, t2)
    print(f"sphere      rho={rho}: ratio {rec.ratio:.4f} >= bound {rec.bound:.4f}")

for rho in (0.5, 1.0, 2.0):
    p = FlowParams(rho=rho, n=1, L=2.0, dx=0.01, t_end=0.04)
    traj = run(scenario("paraboloid", p.grid), p, snapshot_times=[0.01])
    rec = harnack_check(traj, (0.0, -1.0), 0.01, 0.04)
    print(f"paraboloid  rho={rho}: ratio {rec.ratio:.4f} >= bound {rec.bound:.4f}  passed={rec.passed}")
