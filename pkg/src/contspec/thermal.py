"""Maximum-entropy equilibrium states and the KMS boundary condition.

The canonical state on a :class:`SpectrumGrid` is ``exp(-beta omega) / Z`` with
``Z = sum_k w_k exp(-beta omega_k)`` (times the label multiplicity).  Labels
of the pointer observables may carry extra multipliers ``gamma_i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .algebra import Observable, StateFunctional, _Blocks, kernel_trace
from .errors import InfeasibleTarget, SolverFailure
from .pointer import label_values
from .spectral import SpectrumGrid


@dataclass(frozen=True)
class ThermalParams:
    beta: float
    z: float
    gammas: tuple = ()
    label_shape: Optional[tuple] = None
    residual: float = 0.0

    def __post_init__(self):
        if not self.z > 0:
            raise ValueError("z must be positive")


def _log_moments(points, weights, lam):
    """log Z, mean and variance of ``points`` under ``weights * exp(-lam * x)``."""
    a = -lam * points
    shift = a.max()
    p = weights * np.exp(a - shift)
    z = p.sum()
    mean = np.dot(p, points) / z
    var = np.dot(p, (points - mean) ** 2) / z
    return np.log(z) + shift, mean, var


def solve_multiplier(points, weights, target, tol=1e-12, max_iter=200):
    """Multiplier ``lam`` with ``<x>_lam = target`` for the family ``w exp(-lam x)``.

    Safeguarded Newton on the strictly decreasing map ``lam -> <x>``, falling
    back to bisection when a step leaves the current bracket.
    """
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float)
    lo_x, hi_x = points.min(), points.max()
    if not lo_x < target < hi_x:
        raise InfeasibleTarget(f"target {target!r} outside the attainable range ({lo_x:g}, {hi_x:g})")
    scale = max(hi_x - lo_x, 1e-300)

    def resid(lam):
        return _log_moments(points, weights, lam)[1] - target

    # bracket: mean decreases with lam
    lo, hi = -1.0 / scale, 1.0 / scale
    while resid(lo) < 0:
        lo *= 2.0
        if abs(lo) > 1e300:
            raise SolverFailure("could not bracket multiplier", resid(lo))
    while resid(hi) > 0:
        hi *= 2.0
        if abs(hi) > 1e300:
            raise SolverFailure("could not bracket multiplier", resid(hi))
    lam = 0.0 if lo < 0.0 < hi else 0.5 * (lo + hi)
    for _ in range(max_iter):
        _, mean, var = _log_moments(points, weights, lam)
        r = mean - target
        if abs(r) <= tol * max(abs(target), scale * 1e-3, 1e-300):
            return lam, abs(r)
        if r > 0:
            lo = lam
        else:
            hi = lam
        step = lam + r / var if var > 0 else np.nan
        lam = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 4 * np.finfo(float).eps * max(abs(lo), abs(hi), 1.0):
            return lam, abs(resid(lam))
    raise SolverFailure(f"multiplier solve did not converge in {max_iter} iterations", abs(resid(lam)))


def canonical_density(grid: SpectrumGrid, beta: float) -> np.ndarray:
    """``exp(-beta omega) / Z`` at the nodes (unit integral on the grid)."""
    logz, _, _ = _log_moments(grid.nodes, grid.weights, beta)
    return np.exp(-beta * grid.nodes - logz)


def log_partition(grid: SpectrumGrid, beta: float) -> float:
    return _log_moments(grid.nodes, grid.weights, beta)[0]


def mean_energy(grid: SpectrumGrid, beta: float) -> float:
    return _log_moments(grid.nodes, grid.weights, beta)[1]


def _label_weights(gammas, label_shape, degeneracy=None):
    if not gammas:
        m = 1 if degeneracy is None else degeneracy
        return np.ones(m)
    labels = label_values(int(np.prod(label_shape)), label_shape)
    return np.exp(-labels @ np.asarray(gammas, dtype=float))


def solve_thermal_params(grid: SpectrumGrid, energy: float, momentum_means: Sequence[float] = (),
                         label_shape: Optional[Sequence[int]] = None, tol: float = 1e-12) -> ThermalParams:
    """Lagrange multipliers reproducing a mean energy (and mean pointer labels).

    Energy and labels factorize, so each multiplier is a one-dimensional
    solve.  Label ``i`` runs over ``0..label_shape[i]-1``.
    """
    beta, res = solve_multiplier(grid.nodes, grid.weights, energy, tol=tol)
    gammas = []
    if momentum_means:
        if label_shape is None or len(label_shape) != len(momentum_means):
            raise ValueError("label_shape must give one range per momentum target")
        for target, n in zip(momentum_means, label_shape):
            g, r = solve_multiplier(np.arange(n, dtype=float), np.ones(n), target, tol=tol)
            gammas.append(g)
            res = max(res, r)
    z = np.exp(log_partition(grid, beta)) * float(np.sum(_label_weights(gammas, label_shape)))
    return ThermalParams(beta, z, tuple(gammas), None if label_shape is None else tuple(label_shape), res)


def shannon_entropy(grid: SpectrumGrid, density) -> float:
    """``-int rho log rho`` with ``0 log 0 = 0``."""
    rho = np.asarray(density, dtype=float)
    if rho.shape != (grid.size,):
        raise ValueError("density must have one value per node")
    if np.any(rho < 0):
        raise ValueError("density must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(rho > 0, rho * np.log(np.where(rho > 0, rho, 1.0)), 0.0)
    return float(-np.dot(grid.weights, terms))


def build_kms_state(grid: SpectrumGrid, params: ThermalParams, degeneracy: Optional[int] = None) -> StateFunctional:
    """Diagonal canonical (or grand-canonical) state ``Z^-1 (I| exp(-beta H - gamma.P)``."""
    lw = _label_weights(params.gammas, params.label_shape, degeneracy)
    m = len(lw)
    if degeneracy is not None and degeneracy != m:
        raise ValueError("degeneracy does not match the label shape")
    dens = canonical_density(grid, params.beta)
    lw = lw / lw.sum()
    diag = dens[:, None, None] * np.diag(lw)[None]
    return StateFunctional(grid, np.zeros((m, m)), diag)


def thermal_functional(a: _Blocks, params: ThermalParams, include_regular: bool = False) -> float:
    """``w_beta[A] = (I| exp(-beta H) A) / (I| exp(-beta H))``.

    The trace sees only the energy-diagonal block, as in the pairing with
    the canonical state.  ``include_regular`` also integrates the regular
    kernel along its diagonal ``omega = omega'``, which is the trace used
    by the thermal correlation functions.
    """
    if not params.beta > 0:
        raise ValueError("beta must be positive (the Boltzmann trace diverges otherwise)")
    grid = a.grid
    lw = _label_weights(params.gammas, params.label_shape, a.degeneracy)
    boltz = np.exp(-params.beta * grid.nodes)
    weighted_diag = np.einsum("kmm,m->k", a.cc_diag, lw)
    num = np.dot(grid.weights * boltz, weighted_diag)
    if include_regular and a.cc_full is not None:
        num += kernel_trace(_only_full(a), boltz) if not params.gammas else _weighted_full_trace(a, boltz, lw)
    den = np.dot(grid.weights, boltz) * lw.sum()
    return float(np.real(num / den))


def _only_full(a):
    return Observable(a.grid, np.zeros_like(a.bb), np.zeros_like(a.cc_diag), cc_full=a.cc_full)


def _weighted_full_trace(a, boltz, lw):
    full = a.dense_full()
    diag = np.einsum("iimm,m->i", full, lw)
    return np.dot(a.grid.weights * boltz, diag)


@dataclass
class KmsCorrelators:
    t_grid: np.ndarray
    gamma_grid: np.ndarray
    F_values: np.ndarray   # F(t) on the real line (gamma = 0 boundary)
    G_values: np.ndarray   # G(t) = w[alpha_t(A) B]
    strip_samples: np.ndarray  # F(t + i gamma), shape (len(gamma_grid), len(t_grid))
    F_top: np.ndarray      # F(t + i beta), boundary value
    beta: float
    scale: float


def _kernel_blocks(a: _Blocks):
    return a.cc_diag, (None if a.cc_full is None else a.dense_full())


def _correlator_terms(a: _Blocks, b: _Blocks):
    """Node matrices for the double-integral form of the correlators.

    Returns ``T[i, j] = w_i w_j tr B(i,j) A(j,i)`` (regular-regular) and the
    diagonal-node contribution ``d[i] = w_i tr(...)`` gathering the pieces
    that pair a delta block with anything.
    """
    w = a.grid.weights
    ad, af = _kernel_blocks(a)
    bd, bf = _kernel_blocks(b)
    k = a.grid.size
    t = np.zeros((k, k), dtype=complex)
    if af is not None and bf is not None:
        t = np.einsum("i,j,ijmn,jinm->ij", w, w, bf, af)
    d = np.einsum("imn,inm->i", bd, ad)
    if af is not None:
        d = d + np.einsum("imn,iinm->i", bd, af)
    if bf is not None:
        d = d + np.einsum("iimn,inm->i", bf, ad)
    return t, w * d


def _f_values(terms, nodes, beta, t, gamma):
    """``Z F(t + i gamma)`` for arrays ``t`` (any shape) at a fixed ``gamma``."""
    tmat, dvec = terms
    # exponent on omega' (index j): i omega' t - gamma omega'
    # exponent on omega  (index i): -i omega t - (beta - gamma) omega
    ej = np.exp(np.multiply.outer(1j * t - gamma, nodes))
    ei = np.exp(np.multiply.outer(-1j * t - (beta - gamma), nodes))
    reg = np.einsum("...i,ij,...j->...", ei, tmat, ej)
    return reg + np.exp(-beta * nodes) @ dvec


def _g_values(terms, nodes, beta, t):
    """``Z G(t)`` with ``G(t) = w[alpha_t(A) B]``.

    ``Z G = sum_ij w_i w_j exp(-beta omega_i) e^{i omega_i t} tr A(i,j) B(j,i) e^{-i omega_j t}``;
    with the shared node matrices this is the transpose pairing of ``T``.
    """
    tmat, dvec = terms
    ei = np.exp(np.multiply.outer(1j * t, nodes) - beta * nodes)
    ej = np.exp(np.multiply.outer(-1j * t, nodes))
    reg = np.einsum("...i,ji,...j->...", ei, tmat, ej)
    return reg + np.exp(-beta * nodes) @ dvec


def kms_correlators(a: _Blocks, b: _Blocks, params: ThermalParams, t_grid, gamma_grid=()) -> KmsCorrelators:
    """Thermal correlators ``F(z) = w[B alpha_z(A)]`` and ``G(t) = w[alpha_t(A) B]``.

    ``F`` is evaluated on the real line, on the strip lattice ``t_grid x
    gamma_grid`` (every ``gamma`` strictly inside ``(0, beta)``) and on the
    upper boundary ``gamma = beta``.
    """
    if not a.grid.same_as(b.grid):
        raise ValueError("grid mismatch")
    if a.has_cross or b.has_cross:
        raise ValueError("correlators are defined for continuum observables only")
    beta = float(params.beta)
    if not beta > 0:
        raise ValueError("beta must be positive")
    gammas = np.asarray(gamma_grid, dtype=float)
    if np.any((gammas <= 0) | (gammas >= beta)):
        raise ValueError("strip samples need 0 < gamma < beta")
    t = np.asarray(t_grid, dtype=float)
    nodes = a.grid.nodes
    terms = _correlator_terms(a, b)
    z = np.dot(a.grid.weights, np.exp(-beta * nodes)) * a.degeneracy
    f_real = _f_values(terms, nodes, beta, t, 0.0) / z
    g = _g_values(terms, nodes, beta, t) / z
    f_top = _f_values(terms, nodes, beta, t, beta) / z
    strip = np.array([_f_values(terms, nodes, beta, t, gm) / z for gm in gammas]).reshape(len(gammas), len(t))
    scale = float(max(np.max(np.abs(g), initial=0.0), np.max(np.abs(f_real), initial=0.0), 1e-300))
    return KmsCorrelators(t, gammas, f_real, g, strip, f_top, beta, scale)


def cauchy_riemann_defect(corr: KmsCorrelators) -> np.ndarray:
    """Central-difference ``dF/dt + i dF/dgamma`` on interior lattice points.

    Zero for an analytic ``F(t + i gamma)``; for spacing ``h`` the stencil
    error is ``O(h^2)``.
    """
    f = corr.strip_samples
    t, g = corr.t_grid, corr.gamma_grid
    if f.shape[0] < 3 or f.shape[1] < 3:
        raise ValueError("need at least a 3 x 3 strip lattice")
    dt = (f[1:-1, 2:] - f[1:-1, :-2]) / (t[2:] - t[:-2])[None, :]
    dg = (f[2:, 1:-1] - f[:-2, 1:-1]) / (g[2:] - g[:-2])[:, None]
    return np.abs(dt + 1j * dg)


def verify_kms(corr: KmsCorrelators, params: ThermalParams) -> dict:
    """Boundary identity ``G(t) = F(t + i beta)`` and strip analyticity residuals."""
    if abs(corr.beta - params.beta) > 1e-14 * max(1.0, abs(params.beta)):
        raise ValueError("correlators were computed at a different beta")
    if corr.G_values.shape != corr.F_top.shape:
        raise ValueError("mismatched correlator grids")
    boundary = float(np.max(np.abs(corr.G_values - corr.F_top), initial=0.0))
    out = {
        "boundary_residual": boundary,
        "boundary_residual_relative": boundary / corr.scale,
        "analyticity_residual": np.nan,
    }
    if corr.strip_samples.shape[0] >= 3 and corr.strip_samples.shape[1] >= 3:
        out["analyticity_residual"] = float(np.max(cauchy_riemann_defect(corr)))
    return out


def strip_lattice(beta: float, rows: int, t_max: float, t_steps: int):
    """Uniform ``t`` grid on ``[-t_max, t_max]`` and ``rows`` interior strip heights."""
    t = np.linspace(-t_max, t_max, t_steps)
    gammas = beta * np.arange(1, rows + 1) / (rows + 1)
    return t, gammas


def constrained_competitors(grid: SpectrumGrid, density, rng, count: int = 200, modes: int = 8) -> np.ndarray:
    """Random densities with the same normalization and mean energy as ``density``.

    Each is ``density * (1 + eps h)`` with ``h`` a random smooth profile made
    orthogonal to ``1`` and ``omega`` in the ``density``-weighted inner
    product, and ``eps`` small enough to keep the result positive.
    """
    rho = np.asarray(density, dtype=float)
    x = grid.nodes / grid.omega_max
    basis = np.cos(np.pi * np.outer(np.arange(1, modes + 1), x))  # (modes, K)
    cons = np.vstack([np.ones_like(x), grid.nodes])  # constraints to preserve
    wr = grid.weights * rho
    # orthonormalize the constraints in <f, g> = sum w rho f g
    gram = (cons * wr) @ cons.T
    out = np.empty((count, grid.size))
    for i in range(count):
        h = rng.normal(size=modes) @ basis + 0.1 * rng.normal(size=grid.size)
        coef = np.linalg.solve(gram, (cons * wr) @ h)
        h = h - coef @ cons
        eps = rng.uniform(0.05, 0.9) / np.max(np.abs(h))
        out[i] = rho * (1 + eps * h)
    return out


def dlogz_dbeta(grid: SpectrumGrid, beta: float, step: float = 1e-5) -> float:
    """Central-difference derivative of ``log Z`` in ``beta``."""
    return (log_partition(grid, beta + step) - log_partition(grid, beta - step)) / (2 * step)


def cr_halving_ratio(a: _Blocks, b: _Blocks, params: ThermalParams, t_max: float, t_steps: int,
                     rows: int) -> dict:
    """Cauchy-Riemann defect on a strip lattice and on the lattice with half the spacing.

    The refined lattice contains every coarse point, so the two defects are
    compared on the shared interior points; for an ``O(h^2)`` stencil error
    the ratio of their maxima tends to 4.
    """
    t, g = strip_lattice(params.beta, rows, t_max, t_steps)
    t2, g2 = strip_lattice(params.beta, 2 * rows + 1, t_max, 2 * t_steps - 1)
    coarse = cauchy_riemann_defect(kms_correlators(a, b, params, t, g))
    fine = cauchy_riemann_defect(kms_correlators(a, b, params, t2, g2))
    # coarse interior (gamma i, t k) sits at fine interior (2i + 2, 2k + 1)
    shared = fine[2::2, 1::2][: coarse.shape[0], : coarse.shape[1]]
    return {"coarse": float(coarse.max()), "fine": float(shared.max()),
            "ratio": float(coarse.max() / shared.max())}
