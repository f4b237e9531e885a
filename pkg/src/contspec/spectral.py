"""Discretization of the energy spectrum.

The continuous part of the spectrum, ``0 <= omega < inf``, is truncated at
``omega_max`` and replaced by a quadrature rule.  An optional bound state
``omega_0 < 0`` and a set of discrete degeneracy labels ``m`` complete the
description of the commuting set of observables.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial.laguerre import laggauss
from numpy.polynomial.legendre import leggauss

SCHEMES = ("uniform-trapezoid", "gauss-legendre", "gauss-laguerre-mapped")
FINITE_SCHEMES = ("uniform-trapezoid", "gauss-legendre")


@dataclass(frozen=True, eq=False)
class SpectrumGrid:
    """Quadrature nodes and weights on ``[0, omega_max]``."""

    omega_max: float
    nodes: np.ndarray
    weights: np.ndarray
    scheme: str

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.nodes)

    def same_as(self, other: "SpectrumGrid") -> bool:
        return (
            self is other
            or (
                self.scheme == other.scheme
                and self.omega_max == other.omega_max
                and np.array_equal(self.nodes, other.nodes)
                and np.array_equal(self.weights, other.weights)
            )
        )

    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    def revival_time(self) -> float:
        """Recurrence time ``2 pi / max(d omega)`` of phase sums on this grid.

        The widest node gap sets the earliest aliasing of ``exp(i omega t)``,
        so this is the conservative horizon.
        """
        return 2.0 * np.pi / float(np.max(self.spacing()))

    def truncation_bound(self, beta: float) -> float:
        """Bound ``exp(-beta omega_max) / beta`` on the neglected Boltzmann tail."""
        if beta <= 0:
            return np.inf
        return float(np.exp(-beta * self.omega_max) / beta)

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "nodes": self.size, "omega_max": self.omega_max}


@dataclass(frozen=True)
class CscoSpec:
    """Labels of the commuting set: bound energy, degeneracy M, counts N and A.

    ``n_isolating`` is the number of global constants ``A + 1``
    (energy included), so ``1 <= n_isolating <= n_momenta + 1``.
    """

    bound_energy: Optional[float] = None
    degeneracy: int = 1
    n_momenta: int = 0
    n_isolating: int = 1

    def __post_init__(self):
        if self.bound_energy is not None and not self.bound_energy < 0:
            raise ValueError("bound_energy must be strictly negative")
        if int(self.degeneracy) != self.degeneracy or self.degeneracy < 1:
            raise ValueError("degeneracy must be an integer >= 1")
        if self.n_momenta < 0:
            raise ValueError("n_momenta must be >= 0")
        if not 1 <= self.n_isolating <= self.n_momenta + 1:
            raise ValueError("n_isolating must satisfy 1 <= A+1 <= N+1")

    @property
    def has_bound(self) -> bool:
        return self.bound_energy is not None

    @property
    def n_nonisolating(self) -> int:
        return self.n_momenta + 1 - self.n_isolating


def build_grid(scheme: str, node_count: int, omega_max: float) -> SpectrumGrid:
    """Build a quadrature grid for the continuum.

    Parameters
    ----------
    scheme : {"uniform-trapezoid", "gauss-legendre", "gauss-laguerre-mapped"}
        ``uniform-trapezoid`` includes the endpoint ``omega = 0``.
        ``gauss-laguerre-mapped`` integrates over the whole half-line, with
        nodes scaled so the largest one sits at ``omega_max``.
    node_count : int
        Number of nodes, at least 2.
    omega_max : float
        Energy cutoff, positive.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if int(node_count) != node_count or node_count < 2:
        raise ValueError("node_count must be an integer >= 2")
    if not np.isfinite(omega_max) or omega_max <= 0:
        raise ValueError("omega_max must be positive")
    n = int(node_count)
    omega_max = float(omega_max)

    if scheme == "uniform-trapezoid":
        nodes = np.linspace(0.0, omega_max, n)
        h = omega_max / (n - 1)
        weights = np.full(n, h)
        weights[0] = weights[-1] = 0.5 * h
    elif scheme == "gauss-legendre":
        x, w = leggauss(n)
        nodes = 0.5 * omega_max * (x + 1.0)
        weights = 0.5 * omega_max * w
    else:
        x, w = laggauss(n)
        scale = omega_max / x[-1]
        nodes = scale * x
        # exp(x) * w overflows past ~700; the weights there underflow anyway
        with np.errstate(over="ignore", under="ignore"):
            weights = scale * np.exp(np.log(w) + x)
        weights = np.where(np.isfinite(weights), weights, 0.0)
        if np.any(weights <= 0):
            raise ValueError("gauss-laguerre weights underflow; use fewer nodes")
    return SpectrumGrid(omega_max, nodes, weights, scheme)


def integrate(grid: SpectrumGrid, f) -> complex | float:
    """Quadrature sum ``sum_k w_k f(omega_k)``.

    ``f`` is sampled at the nodes; extra trailing axes are summed over the
    first axis only, so matrix-valued profiles return matrices.
    """
    f = np.asarray(f)
    if f.shape[:1] != (grid.size,):
        raise ValueError(f"expected {grid.size} samples, got shape {f.shape}")
    return np.tensordot(grid.weights, f, axes=(0, 0))[()]
