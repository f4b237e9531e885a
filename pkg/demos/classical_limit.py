"""Walk-through: from quantum kernels to phase space and back to classical flows.

Shows a coherent state's Wigner function, Weyl averages of an irrational torus
flow and the shrinking/growing volumes of a squeezing flow.

Run with ``python3 demos/classical_limit.py``.
"""
import numpy as np

from contspec.classical import FlowSpec, canonical_from_microcanonical, equidistribution_test
from contspec.localization import linear_flow, localization_verdict, track_volumes
from contspec.wigner import make_phase_grid, oscillator_state, pure_state, wigner_transform

hbar = 0.1
grid = make_phase_grid(4.0, 257, 3.0, 121, hbar)
w = wigner_transform(pure_state(oscillator_state(grid.q_nodes, hbar, 0, 0.5, -0.2), grid.dq), grid)
q, p = grid.mesh()
print(f"coherent state: norm {w.norm:.12f}, <q> {np.sum(w.values * q) * grid.dq * grid.dp:.6f}")

flow = FlowSpec(["1", "sqrt2"])
rep = equidistribution_test(flow, [[1, -1], [2, 1]], 1e3, 100_000)
for row in rep.weyl_averages:
    print(f"mode {row['mode']}: |Weyl average| {row['weyl_avg']:.2e} <= bound {row['bound']:.2e}")

fit = canonical_from_microcanonical(100)
print(f"bath exponent 100 -> fitted beta {fit.beta:.1f}")

pts = np.random.default_rng(0).normal(size=(4000, 2))
track = track_volumes(pts, linear_flow(np.diag([-1.0, 1.0])), [0], np.linspace(0, 2, 11))
v = localization_verdict(track)
print(f"squeeze: observed slope {v['slope_observed']:+.3f}, unobserved {v['slope_unobserved']:+.3f}, "
      f"localizes={v['localizes']}")
