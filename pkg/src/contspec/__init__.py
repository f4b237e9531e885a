"""Numerical laboratory for continuous-spectrum quantum systems.

Modules by topic:

* :mod:`~contspec.spectral` -- quadrature grids and commuting-set labels
* :mod:`~contspec.algebra` -- observables, state functionals, pairing, traces
* :mod:`~contspec.evolution` -- free evolution and decoherence diagnostics
* :mod:`~contspec.pointer` -- pointer bases and observables
* :mod:`~contspec.thermal` -- maximum-entropy states and the KMS condition
* :mod:`~contspec.wigner` -- Wigner transforms and classical densities
* :mod:`~contspec.classical` -- torus flows, ergodicity, classical equilibria
* :mod:`~contspec.localization` -- phase-space volume bookkeeping
"""
from .algebra import (Observable, SeparableKernel, StateFunctional, compose, make_identity, op_trace, pair,
                      pair_complex, validate)
from .errors import DomainTooSmall, InfeasibleTarget, InvalidState, SolverFailure
from .evolution import decoherence_curve, evolve
from .spectral import CscoSpec, SpectrumGrid, build_grid, integrate

__version__ = "0.1.0"

__all__ = [
    "CscoSpec", "DomainTooSmall", "InfeasibleTarget", "InvalidState", "Observable", "SeparableKernel",
    "SolverFailure", "SpectrumGrid", "StateFunctional", "build_grid", "compose", "decoherence_curve", "evolve",
    "integrate", "make_identity", "op_trace", "pair", "pair_complex", "validate",
]
