"""Walk-through: a coherent energy wavepacket loses its off-diagonal signal,
and a thermal state satisfies the KMS boundary identity.

Run with ``python3 demos/decoherence_and_thermal.py``.
"""
import numpy as np

from contspec.algebra import Observable, SeparableKernel, hamiltonian, pair
from contspec.evolution import decoherence_curve, gaussian_coherence_state
from contspec.spectral import build_grid
from contspec.thermal import build_kms_state, kms_correlators, solve_thermal_params, verify_kms

grid = build_grid("gauss-legendre", 96, 12.0)

# A Gaussian energy profile with full coherence between energies.
rho = gaussian_coherence_state(grid, center=5.0, sigma=1.0)
ones = np.ones(grid.size)
probe = Observable(grid, np.zeros((1, 1)), np.zeros((grid.size, 1, 1)), cc_full=SeparableKernel.outer(ones, ones))

times = np.linspace(0.0, 3.0, 7)
curve = decoherence_curve(rho, probe, times)
print("t      |<O>(t) - <O>_*|   (Gaussian profile -> 2 sqrt(pi) exp(-t^2))")
for t, r in zip(times, curve.residuals):
    print(f"{t:4.1f}   {r:.3e}          {2 * np.sqrt(np.pi) * np.exp(-t * t):.3e}")

# Maximum-entropy state at mean energy 2 on [0, 30] and its KMS check.
grid = build_grid("gauss-legendre", 64, 30.0)
params = solve_thermal_params(grid, 2.0)
state = build_kms_state(grid, params)
print(f"\nbeta solving <H> = 2: {params.beta:.12f}  (state mean energy {pair(state, hamiltonian(grid)):.12f})")

g1 = np.exp(-((grid.nodes - 2.0) ** 2) / 2)
g2 = np.exp(-((grid.nodes - 3.5) ** 2) / 2)
zero = np.zeros((grid.size, 1, 1))
a = Observable(grid, np.zeros((1, 1)), zero, cc_full=SeparableKernel.outer(g1, g1))
b = Observable(grid, np.zeros((1, 1)), zero, cc_full=SeparableKernel.outer(g2, g2))
corr = kms_correlators(a, b, params, np.linspace(-2, 2, 41))
report = verify_kms(corr, params)
print(f"KMS boundary residual (relative): {report['boundary_residual_relative']:.2e}")
