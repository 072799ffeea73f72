"""
Rank tests on a model with a switching right-hand side
======================================================

The state obeys ``x' = max(0, 1 - exp(-(x - p0)))`` with ``x(0) = p1`` and
``y = x``.  At the reference point ``p = (1, 1)`` the state starts exactly on
the switching surface and stays there, so the output reacts differently to
perturbations of ``p0`` in the two directions.
"""

import numpy as np

from ldserc.lserc import AlgoConfig, algorithm1, format_report, probe
from ldserc.modelkit import builtin, riot_closed_form
from ldserc.sensint import Grid, integrate_reference, integrate_sensitivity

spec = builtin("riot")
grid = Grid(spec.t0, spec.tf, 1e-3)

# The numeric reference solution agrees with the closed form.
times, x = integrate_reference(spec, grid, theta=[0.0, 1.0])
exact = np.array([riot_closed_form([0.0, 1.0], t) for t in times])
print("max |x - closed form| at p=(0,1):", np.max(np.abs(x[:, 0] - exact)))

# Probing along +e1 pushes p0 up, the state sits below the threshold and
# never moves: the sensitivity row is [0, 0, 1] throughout.
up = integrate_sensitivity(spec, grid, [1.0, 0.0])
print("d=+e1, Y(1) =", up.Y_star[-1, 0])

# Along -e1 the state starts to grow and picks up an exponential sensitivity.
down = integrate_sensitivity(spec, grid, [-1.0, 0.0])
print("d=-e1, Y(1) =", down.Y_star[-1, 0], " e^1 =", np.e)

# Sampling at t = 0 and t = 0.5 gives the rank test for each direction.
cfg = AlgoConfig.for_model(spec, sample_times=[0.0, 0.5])
for d in ([1.0, 0.0], [-1.0, 0.0]):
    p = probe(spec, d, cfg)
    print(f"d={d}: rank {p.rank}\n{np.round(p.matrix.entries, 6)}")

# The full three-stage run: primary and twin directions, then a step along
# the null space of the deficient matrices, one level deep.
cfg = AlgoConfig.for_model(spec, eps_twin=0.01, eps_sing=0.01, q=1)
print(format_report(algorithm1(spec, cfg)))
