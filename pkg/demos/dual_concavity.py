"""The matrix behind the Harnack estimate is positive semidefinite.

Samples principal curvatures log-uniformly, assembles the matrix and
compares its leading minors with their closed form. The closed form that
divides by the cubed product, instead of multiplying, only agrees at
lambda = (1, 1); its error is shown for contrast.

    python3 demos/dual_concavity.py
"""

import numpy as np

from convexflow import dual_concavity_check
from convexflow.diagnostics import dual_matrix

rng = np.random.default_rng(0)
print("lambda = (1, 1), rho = 1:\n", dual_matrix([1.0, 1.0], 1.0))
for rho in (0.5, 1.0, 2.0, 5.0):
    lam = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), size=(1000, 2)))
    rep = dual_concavity_check(rho, lam)
    print(
        f"rho={rho}: min eig/norm {rep.worst_eig_ratio:+.1e}, minor error {rep.worst_minor_error:.1e}, "
        f"fd error {rep.worst_fd_error:.1e}, divided-form error {rep.printed_minor_error:.2f}"
    )
