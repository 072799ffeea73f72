"""
First-order approximation of a nonsmooth function
=================================================

For ``f(x, y) = |x^2 - y^2|`` at ``(1, 1)`` the ordinary gradient does not
exist, but the L-derivative along ``[d I]`` still gives an approximant whose
error vanishes faster than the step.
"""

import numpy as np

from ldserc.ldcore import taylor_approx, taylor_decay_ok, taylor_residual_profile
from ldserc.modelkit import vector_function

f = vector_function(["(abs (- (* x0 x0) (* x1 x1)))"], 2)
x0 = np.array([1.0, 1.0])
scales = np.logspace(-1, -5, 5)

for angle in (0.0, 0.25 * np.pi, 0.6 * np.pi, np.pi):
    d = np.array([np.cos(angle), np.sin(angle)])
    r = taylor_residual_profile(f, x0, d, scales)
    ok = taylor_decay_ok(scales, r)
    print(f"angle {angle:.3f}: " + " ".join(f"{v:.2e}" for v in r), "PASS" if ok else "FAIL")

# Along +e1 the approximant is f(x0) + 2h; the true value is (1 + h)^2 - 1.
for h in (0.1, 0.01):
    print(f"h={h}: approx {taylor_approx(f, x0, [h, 0.0])[0]:.6f}, exact {(1 + h) ** 2 - 1:.6f}")
