"""Integrable flows on tori, equidistribution diagnostics and classical equilibria."""
from __future__ import annotations

import itertools
import re
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import linregress

from .errors import DomainTooSmall

ISOLATING = "isolating"
NON_ISOLATING = "non-isolating"
RESONANCE_TOL = 1e-6

# symbolic frequencies are stored as rational coordinates on (1, sqrt2, sqrt3, sqrt5)
_BASIS = np.array([1.0, np.sqrt(2.0), np.sqrt(3.0), np.sqrt(5.0)])
_NAMED = {
    "": (1, 0, 0, 0),
    "sqrt2": (0, 1, 0, 0),
    "sqrt3": (0, 0, 1, 0),
    "golden": (Fraction(1, 2), 0, 0, Fraction(1, 2)),
}
_SYMBOLIC = re.compile(r"^\s*([+-]?\d+(?:/\d+)?)?\s*\*?\s*(sqrt2|sqrt3|golden)?\s*$")


def parse_frequency(value):
    """Return ``(float_value, rational_coordinates or None)``.

    Accepts numbers and strings such as ``"sqrt2"``, ``"2*sqrt3"``,
    ``"-1/2 golden"`` or ``"3"``; anything else is taken as a float with no
    exact representation.
    """
    if isinstance(value, str):
        m = _SYMBOLIC.match(value)
        if m and (m.group(1) or m.group(2)):
            coef = Fraction(m.group(1)) if m.group(1) else Fraction(1)
            coords = tuple(coef * Fraction(c) for c in _NAMED[m.group(2) or ""])
            return float(np.dot([float(c) for c in coords], _BASIS)), coords
        return float(value), None
    v = float(value)
    if float(v).is_integer():
        return v, (Fraction(int(v)), Fraction(0), Fraction(0), Fraction(0))
    return v, None


@dataclass
class FlowSpec:
    """Action-angle flow ``alpha_j(t) = w_j(actions) t + alpha_j(0)``.

    ``frequencies`` may mix floats and symbolic irrationals; if
    ``frequency_fn`` is given it maps the actions to the frequencies instead.
    ``classification`` tags each constant of motion as isolating or not.
    """

    frequencies: Sequence = (1.0,)
    actions: Sequence[float] = ()
    initial_angles: Optional[Sequence[float]] = None
    classification: Optional[Sequence[str]] = None
    frequency_fn: Optional[Callable] = None
    _coords: list = field(init=False, repr=False, default_factory=list)

    def __post_init__(self):
        if self.frequency_fn is not None:
            self.frequencies = tuple(float(w) for w in self.frequency_fn(np.asarray(self.actions, float)))
            self._coords = [None] * len(self.frequencies)
        else:
            parsed = [parse_frequency(w) for w in self.frequencies]
            self.frequencies = tuple(p[0] for p in parsed)
            self._coords = [p[1] for p in parsed]
        n = len(self.frequencies)
        if n == 0:
            raise ValueError("at least one degree of freedom is required")
        self.actions = tuple(float(a) for a in (self.actions or (1.0,) * n))
        if len(self.actions) != n:
            raise ValueError("one action per degree of freedom")
        ang = np.zeros(n) if self.initial_angles is None else np.asarray(self.initial_angles, float)
        if ang.shape != (n,):
            raise ValueError("one initial angle per degree of freedom")
        self.initial_angles = np.mod(ang, 2 * np.pi)
        cls = tuple(self.classification or (ISOLATING,) + (NON_ISOLATING,) * (n - 1))
        if len(cls) != n or any(c not in (ISOLATING, NON_ISOLATING) for c in cls):
            raise ValueError(f"classification needs {n} entries from {{{ISOLATING}, {NON_ISOLATING}}}")
        if cls[0] != ISOLATING:
            raise ValueError("the Hamiltonian (first constant) is always isolating")
        self.classification = cls

    @property
    def n_dof(self) -> int:
        return len(self.frequencies)

    @property
    def n_isolating(self) -> int:
        return sum(c == ISOLATING for c in self.classification)

    @property
    def n_nonisolating(self) -> int:
        return self.n_dof - self.n_isolating

    @property
    def omega(self) -> np.ndarray:
        return np.asarray(self.frequencies, dtype=float)

    @property
    def symbolic(self) -> bool:
        return all(c is not None for c in self._coords)

    def mode_frequency(self, mode) -> float:
        return float(np.dot(np.asarray(mode, float), self.omega))

    def is_resonant(self, mode) -> bool:
        """``n . w == 0``, decided exactly for symbolic frequencies."""
        mode = [int(m) for m in mode]
        if self.symbolic:
            total = [sum(Fraction(n) * c[i] for n, c in zip(mode, self._coords)) for i in range(4)]
            return all(t == 0 for t in total)
        return abs(self.mode_frequency(mode)) < RESONANCE_TOL

    def isolating_actions(self) -> tuple:
        return tuple(a for a, c in zip(self.actions, self.classification) if c == ISOLATING)


def integrate_flow(spec: FlowSpec, t) -> np.ndarray:
    """Angles at time(s) ``t``, wrapped to [0, 2 pi); shape ``t.shape + (n_dof,)``."""
    t = np.asarray(t, dtype=float)
    return np.mod(np.multiply.outer(t, spec.omega) + spec.initial_angles, 2 * np.pi)


def resonance_warnings(spec: FlowSpec, max_order: int = 6) -> list:
    """Integer modes with ``|n|_inf <= max_order`` that are (nearly) resonant."""
    if spec.n_dof < 2 or spec.n_dof > 4:
        return []
    hits = []
    for mode in itertools.product(range(-max_order, max_order + 1), repeat=spec.n_dof):
        if not any(mode):
            continue
        # only one of +-n
        if next(m for m in mode if m) < 0:
            continue
        if spec.is_resonant(mode):
            hits.append(mode)
    if hits and not spec.symbolic:
        warnings.warn(f"frequencies are (nearly) resonant for modes {hits[:4]}", RuntimeWarning, stacklevel=2)
    return hits


def _midpoints(T: float, samples: int) -> np.ndarray:
    return (np.arange(samples) + 0.5) * (T / samples)


@dataclass
class ErgodicReport:
    T: float
    samples: int
    weyl_averages: list
    time_avg: dict = field(default_factory=dict)
    space_avg: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"T": self.T, "samples": self.samples, "weyl_averages": self.weyl_averages,
                "time_avg": self.time_avg, "space_avg": self.space_avg, "flags": self.flags}

    def rows(self):
        for w in self.weyl_averages:
            yield " ".join(str(m) for m in w["mode"]), w["weyl_avg"], w["bound"]


def weyl_bound(spec: FlowSpec, mode, T: float, samples: int) -> float:
    """``2 / (T |n . w|) + 2 pi / samples``; infinite for resonant modes."""
    if spec.is_resonant(mode):
        return float("inf")
    return 2.0 / (T * abs(spec.mode_frequency(mode))) + 2 * np.pi / samples


def equidistribution_test(spec: FlowSpec, modes, T: float, samples: int = 200_000,
                          allow_zero: bool = True) -> ErgodicReport:
    """Time averages ``|(1/T) int_0^T exp(i n . alpha(t)) dt|`` by midpoint sampling."""
    if not T > 0:
        raise ValueError("T must be positive")
    t = _midpoints(T, samples)
    alpha = integrate_flow(spec, t)
    rows = []
    for mode in modes:
        mode = tuple(int(m) for m in mode)
        if len(mode) != spec.n_dof:
            raise ValueError(f"mode {mode} does not match {spec.n_dof} degrees of freedom")
        if not any(mode) and not allow_zero:
            raise ValueError("the zero mode was not requested")
        avg = abs(np.mean(np.exp(1j * (alpha @ np.asarray(mode, float)))))
        bound = weyl_bound(spec, mode, T, samples)
        rows.append({"mode": list(mode), "weyl_avg": float(min(avg, 1.0)), "bound": bound,
                     "resonant": spec.is_resonant(mode), "within_bound": bool(avg <= bound)})
    flags = {"all_within_bound": all(r["within_bound"] or r["resonant"] for r in rows),
             "resonant_modes": [r["mode"] for r in rows if r["resonant"]]}
    return ErgodicReport(T, samples, rows, flags=flags)


def space_average(f: Callable, n_dof: int, nodes: int = 64) -> float:
    """Uniform torus average by the tensor-product periodic trapezoid rule."""
    grid = 2 * np.pi * np.arange(nodes) / nodes
    mesh = np.stack(np.meshgrid(*([grid] * n_dof), indexing="ij"), axis=-1)
    return float(np.mean(f(mesh)))


def ergodic_average_check(spec: FlowSpec, f: Callable, T: float, samples: int = 2**18,
                          n_windows: int = 10, space_nodes: int = 64) -> dict:
    """Compare the time average of ``f(alpha)`` with its torus average.

    ``f`` takes an array ``(..., n_dof)`` of angles.  The decay of the gap is
    summarized by fitting ``log sup_{t >= T_k} |gap(t)|`` against ``log T_k``
    over geometric ``T_k`` down to ``T / 1000``: the supremum over the tail
    smooths the oscillation of the running average.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    dt = T / samples
    t = _midpoints(T, samples)
    vals = np.asarray(f(integrate_flow(spec, t)), dtype=float)
    running = np.cumsum(vals) / np.arange(1, samples + 1)
    space = space_average(f, spec.n_dof, space_nodes)
    gap = np.abs(running - space)
    t_k = np.geomspace(T / 1000, T / 2, n_windows)
    idx = np.minimum((t_k / dt).astype(int), samples - 1)
    tail_max = np.maximum.accumulate(gap[::-1])[::-1]
    env = tail_max[idx]
    out = {"time_avg": float(running[-1]), "space_avg": space, "gap": float(gap[-1]),
           "T_windows": t_k.tolist(), "envelope": env.tolist(), "slope": None}
    if np.all(env > 1e-13):
        out["slope"] = float(linregress(np.log(t_k), np.log(env)).slope)
    return out


def torus_occupancy(spec: FlowSpec, T: float, samples: int = 200_000, bins: int = 8) -> float:
    """Fraction of cells of a coarse ``bins^n`` torus grid visited by the orbit.

    Near 1 for orbits that fill the torus; a resonance confines the orbit to a
    lower-dimensional sub-torus and leaves cells empty.
    """
    alpha = integrate_flow(spec, _midpoints(T, samples))
    cells = np.minimum((alpha / (2 * np.pi) * bins).astype(int), bins - 1)
    flat = np.ravel_multi_index(cells.T, (bins,) * spec.n_dof)
    return float(np.unique(flat).size / bins**spec.n_dof)


def occupancy_check(spec: FlowSpec, T: float, samples: int = 200_000, bins: int = 8,
                    threshold: float = 0.9) -> dict:
    """Warn when the orbit stays on a closed sub-level set despite the declared constants."""
    occ = torus_occupancy(spec, T, samples, bins)
    closed = occ < threshold
    if closed and spec.n_nonisolating > 0:
        warnings.warn(f"orbit occupies only {occ:.2f} of the torus: an extra global constant "
                      "is present in the sampled region", RuntimeWarning, stacklevel=2)
    # the flow never touches the actions, so their drift is identically zero
    return {"occupancy": occ, "closed_level_set": bool(closed), "action_drift": 0.0}


class MicrocanonicalDensity:
    """Equilibrium density depending only on the isolating constants.

    ``value`` accepts exactly one argument per isolating constant; the
    non-isolating actions and the angles enter only through the volume of
    the level set (a box of ``j_ranges`` times the torus).
    """

    def __init__(self, spec: FlowSpec, shell: Sequence[tuple], j_ranges: Optional[Sequence[tuple]] = None,
                 profile: Optional[Callable] = None, nodes: int = 24):
        self.n_isolating = spec.n_isolating
        self.n_dof = spec.n_dof
        if len(shell) != self.n_isolating:
            raise ValueError("shell needs one (low, high) range per isolating constant")
        j_ranges = tuple(j_ranges or ((0.0, 1.0),) * spec.n_nonisolating)
        if len(j_ranges) != spec.n_nonisolating:
            raise ValueError("one range per non-isolating action")
        self.shell = tuple((float(a), float(b)) for a, b in shell)
        if any(b <= a for a, b in self.shell + j_ranges):
            raise ValueError("ranges must have positive width")
        self.j_volume = float(np.prod([b - a for a, b in j_ranges])) if j_ranges else 1.0
        self.torus_volume = (2 * np.pi) ** self.n_dof
        self._profile = profile or (lambda *r: 1.0)
        self._nodes = nodes
        self._norm = 1.0
        self._norm = self.shell_mass()

    def value(self, *isolating_values) -> float:
        if len(isolating_values) != self.n_isolating:
            raise TypeError(f"expected {self.n_isolating} isolating values, got {len(isolating_values)}")
        return float(self._profile(*isolating_values)) / self._norm

    def shell_mass(self, nodes: Optional[int] = None) -> float:
        """Integral of the density over the shell, the non-isolating box and the torus."""
        x, w = np.polynomial.legendre.leggauss(nodes or self._nodes)
        axes = [(0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w) for a, b in self.shell]
        total = 0.0
        for combo in itertools.product(*[range(len(x))] * self.n_isolating):
            r = [axes[i][0][j] for i, j in enumerate(combo)]
            wt = np.prod([axes[i][1][j] for i, j in enumerate(combo)])
            total += wt * self.value(*r)
        return float(total * self.j_volume * self.torus_volume)


def microcanonical_density(spec: FlowSpec, shell: Sequence[tuple], j_ranges=None, profile=None):
    return MicrocanonicalDensity(spec, shell, j_ranges, profile)


@dataclass
class CanonicalFit:
    energies: np.ndarray
    marginal: np.ndarray
    beta: float
    beta_expected: float
    fit_window: float

    @property
    def relative_error(self) -> float:
        return abs(self.beta - self.beta_expected) / self.beta_expected


def canonical_from_microcanonical(nu: float, e_total: float = 1.0, n_points: int = 4001,
                                  window: float = 0.1) -> CanonicalFit:
    """Subsystem marginal ``p(E1) ~ (E - E1)^nu`` of a bath with ``g(E) ~ E^nu``.

    The marginal is normalized in closed form.  ``beta`` comes from a
    weighted least-squares line through ``log p`` on ``[0, window * E]``,
    weighted by ``p`` so that the populated low-energy end dominates, as it
    does in the canonical limit.
    """
    if not nu > 0:
        raise ValueError("bath exponent nu must be positive")
    if not e_total > 0:
        raise ValueError("total energy must be positive")
    e1 = np.linspace(0.0, e_total, n_points)
    marginal = (nu + 1) * (e_total - e1) ** nu / e_total ** (nu + 1)
    keep = (e1 <= window * e_total) & (marginal > 0)
    slope = np.polyfit(e1[keep], np.log(marginal[keep]), 1, w=np.sqrt(marginal[keep]))[0]
    return CanonicalFit(e1, marginal, float(-slope), nu / e_total, window)


def classical_thermal_functional(a_w, beta: float, grid, hamiltonian, gammas: Sequence[float] = (),
                                 momenta: Sequence = (), boundary_tol: float = 1e-6) -> float:
    """``int exp(-beta H - sum gamma_i P_i) A dq dp / int exp(-beta H - ...) dq dp``.

    Symbols may be callables ``f(q, p)`` or arrays on the phase grid.  The
    weight's mass on the outermost ring of cells must stay below
    ``boundary_tol``; otherwise the grid cannot hold the equilibrium.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if len(gammas) != len(momenta):
        raise ValueError("one multiplier per momentum")
    q, p = grid.mesh()
    ev = lambda f: np.broadcast_to(f(q, p) if callable(f) else np.asarray(f), q.shape)
    expo = -beta * ev(hamiltonian)
    for g, pf in zip(gammas, momenta):
        expo = expo - g * ev(pf)
    w = np.exp(expo - expo.max())
    ring = np.ones_like(w, dtype=bool)
    ring[1:-1, 1:-1] = False
    frac = w[ring].sum() / w.sum()
    if frac > boundary_tol:
        raise DomainTooSmall(f"equilibrium weight on the grid boundary is {frac:.2e} > {boundary_tol:g}")
    return float(np.sum(w * ev(a_w)) / np.sum(w))
