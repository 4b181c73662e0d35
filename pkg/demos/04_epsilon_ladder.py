"""Cauchy trend of the regularization ladder.

Identical initial data run across decreasing regularization strengths; the
final-state distances between successive rungs shrink, the desk-scale shadow
of the vanishing-regularization limit.
"""

from chemofluid.verify import epsilon_ladder, scenario_library

lib = scenario_library(cells=(32, 32))
params, initial = lib["bump_n"].build(seed=0, T=0.1)
report = epsilon_ladder(params, initial, [0.4, 0.2, 0.1, 0.05])

print("eps ladder:", report.eps_list)
for d in report.distances:
    a, b = d["pair"]
    print(
        f"  dist(eps={a:4}, eps={b:4}):  n {d['n']:.3e}  c {d['c']:.3e}  "
        f"u {d['u']:.3e}  total {d['total']:.3e}"
    )
print(f"monotone: {report.monotone} (inversions beyond 10%: {report.inversions})")
