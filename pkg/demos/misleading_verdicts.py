"""
When a single reference point misleads
======================================

Two static outputs show how a rank test at one point can err in both
directions.

``y = max(p^3, p^5)`` has a vanishing sensitivity at ``p = 0`` although the
output determines ``p`` near zero.  Stepping off the point along the null
space recovers full rank.

``y = |p|`` has a unit sensitivity in both directions at ``p = 0`` and
passes every natural test, yet ``p`` and ``-p`` give the same output.
"""

from ldserc.lserc import AlgoConfig, algorithm1, format_report
from ldserc.modelkit import builtin

spec = builtin("maxpoly")
cfg = AlgoConfig.for_model(spec, eps_sing=0.01, q=1)
report = algorithm1(spec, cfg)
print(format_report(report))
print("sigma_1 at p=0:", report.probes[0].matrix.singular_values[0])

spec = builtin("abs_toy")
report = algorithm1(spec, AlgoConfig.for_model(spec))
print(format_report(report))
for p in report.probes:
    print(f"d={p.d.tolist()}: matrix column {p.matrix.entries[:, 0].tolist()}")
