"""Normal oscillation far out: a paraboloid against a smoothed cone.

For the paraboloid the largest normal jump between nearby points outside
a ball of radius r shrinks as r grows. The smoothed cone keeps its edges,
so the oscillation stays near one at every radius.

    python3 demos/nu_condition.py
"""

from convexflow import GridSpec, nu_profile, scenario

para = nu_profile(scenario("paraboloid", GridSpec(1, 4.0, 0.01)), (2.0, 5.0, 10.0))
print("paraboloid     r:", para.radii, " eps:", para.eps_of_r.round(5), " decays:", para.decays())

cone = nu_profile(scenario("smoothed_cone", GridSpec(2, 4.0, 0.05), mu=0.05), (1.0, 2.0, 3.0, 4.0, 5.0))
print("smoothed cone  r:", cone.radii, " eps:", cone.eps_of_r.round(5), " decays:", cone.decays())
