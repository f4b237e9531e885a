"""Wigner transforms between position kernels and phase-space functions.

Conventions (with ``hbar`` the effective Planck constant, ``rho(x, x') = <x|rho|x'>``)::

    O^W(q, p)  = int dl  O(q - l/2, q + l/2) exp(i l p / hbar)
    rho^W(q, p) = 1/(pi hbar) int dl rho(q - l, q + l) exp(2 i l p / hbar)

so that ``int rho^W = Tr rho`` and ``int rho^W O^W = Tr(rho O)``.

Kernels live on a uniform position grid with an odd number of nodes and
spacing ``dq``; operator kernels carry ``1/dq`` on the diagonal for delta
functions and compose as ``K1 @ K2 * dq``.  Separations are taken
periodically, so kernels should be small near the grid edges (or
translation invariant).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import linregress

from .spectral import SpectrumGrid


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    """Uniform, zero-symmetric ``q`` and ``p`` nodes plus ``hbar_eff``."""

    q_nodes: np.ndarray
    p_nodes: np.ndarray
    hbar_eff: float = 1.0

    def __post_init__(self):
        if self.hbar_eff <= 0:
            raise ValueError("hbar_eff must be positive")
        for name in ("q_nodes", "p_nodes"):
            x = np.asarray(getattr(self, name), dtype=float)
            if x.ndim != 1 or x.size < 2 or not np.allclose(np.diff(x), x[1] - x[0], rtol=1e-9, atol=0):
                raise ValueError(f"{name} must be a uniform 1-D grid")
            object.__setattr__(self, name, x)

    @property
    def dq(self) -> float:
        return float(self.q_nodes[1] - self.q_nodes[0])

    @property
    def dp(self) -> float:
        return float(self.p_nodes[1] - self.p_nodes[0])

    @property
    def nq(self) -> int:
        return self.q_nodes.size

    @property
    def resolves_hbar(self) -> bool:
        return self.dq * self.dp <= self.hbar_eff / 4

    def mesh(self):
        return np.meshgrid(self.q_nodes, self.p_nodes, indexing="ij")

    def header(self) -> dict:
        return {"shape": [self.q_nodes.size, self.p_nodes.size], "dq": self.dq, "dp": self.dp,
                "q0": float(self.q_nodes[0]), "p0": float(self.p_nodes[0]), "hbar_eff": self.hbar_eff}


def centered_nodes(extent: float, n: int) -> np.ndarray:
    """``n`` uniform nodes symmetric about 0 with half-width ``extent``."""
    return (np.arange(n) - (n - 1) / 2) * (2.0 * extent / n)


def make_phase_grid(q_extent: float, nq: int, p_extent: float, np_: int, hbar_eff: float = 1.0) -> PhaseGrid:
    return PhaseGrid(centered_nodes(q_extent, nq), centered_nodes(p_extent, np_), hbar_eff)


def adapted_grid(hbar: float, q_extent: float, p_extent: float, np_: int = 257, margin: float = 2.0) -> PhaseGrid:
    """Position grid fine enough that momenta up to ``margin * p_extent`` are resolved."""
    dq = np.pi * hbar / (margin * p_extent)
    nq = int(np.ceil(2 * q_extent / dq))
    nq += 1 - nq % 2  # odd: a node at q = 0 and no unpaired Nyquist mode
    return PhaseGrid(centered_nodes(q_extent, nq), np.linspace(-p_extent, p_extent, np_), hbar)


@dataclass
class WignerDensity:
    values: np.ndarray
    grid: PhaseGrid
    imag_residual: float = 0.0
    metadata: dict = field(default_factory=dict)

    @property
    def norm(self) -> float:
        return float(np.sum(self.values) * self.grid.dq * self.grid.dp)


def _taper(lags: np.ndarray, jmax: float, fraction: float) -> np.ndarray:
    """Cosine roll-off over the outer ``fraction`` of the lag window."""
    if fraction <= 0:
        return np.ones(lags.shape)
    edge = (1.0 - fraction) * jmax
    x = np.clip((np.abs(lags) - edge) / max(jmax - edge, 1e-300), 0.0, 1.0)
    return np.cos(0.5 * np.pi * x) ** 2


def lag_diagonals(kernel: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Kernel values by (periodic lag, grid centre).

    Row ``d`` holds ``K(q_i - d dq/2, q_i + d dq/2)`` for every node ``q_i``.
    Even lags are read off the grid; odd lags have half-grid centres and are
    shifted half a node along the centre direction by Fourier interpolation.
    Multiplication operators (lag 0 only) and translation-invariant kernels
    (constant along the centre) are therefore handled exactly.
    """
    n = kernel.shape[0]
    if n % 2 == 0:
        raise ValueError("the q grid must have an odd number of nodes")
    half = n // 2
    lags = np.arange(-half, half + 1)
    idx = np.arange(n)
    # start index a so that the centre a + d/2 is i (even d) or i - 1/2 (odd d)
    start = (idx[None, :] - (lags[:, None] + 1) // 2) % n
    seq = kernel[start, (start + lags[:, None]) % n]
    odd = lags % 2 == 1
    k = np.fft.fftfreq(n) * n
    shift = np.exp(-1j * np.pi * k / n)  # delay by -1/2 node: centre i - 1/2 -> i
    seq = seq.astype(complex)
    seq[odd] = np.fft.ifft(np.fft.fft(seq[odd], axis=1) * np.conj(shift)[None, :], axis=1)
    return lags, seq


def _weyl_sum(kernel: np.ndarray, grid: PhaseGrid, taper: float) -> np.ndarray:
    """``dq sum_d K(q - d dq/2, q + d dq/2) exp(i d dq p / hbar)`` on the phase grid."""
    lags, seq = lag_diagonals(np.asarray(kernel))
    w = _taper(lags, lags.max(), taper)
    phase = np.exp(1j * (grid.dq / grid.hbar_eff) * np.multiply.outer(lags, grid.p_nodes))
    return grid.dq * (seq.T * w[None, :]) @ phase


def wigner_transform(kernel, grid: PhaseGrid, kind: str = "state", taper: Optional[float] = None,
                     real: Optional[bool] = None):
    """Phase-space function of a position kernel.

    ``kind="state"`` returns a :class:`WignerDensity` (normalized like the
    kernel's trace); ``kind="observable"`` returns the Weyl symbol as an
    array over ``(q, p)``.  ``taper`` is the fraction of the lag window
    rolled off by a cosine (default 0.1 for states, 0 for observables).
    Output is real when the kernel is Hermitian; pass ``real=False`` to keep
    the complex values of a non-Hermitian one.
    """
    kernel = np.asarray(kernel)
    if kernel.shape != (grid.nq, grid.nq):
        raise ValueError(f"kernel shape {kernel.shape} does not match the q grid ({grid.nq})")
    if kind not in ("state", "observable"):
        raise ValueError("kind must be 'state' or 'observable'")
    if taper is None:
        taper = 0.1 if kind == "state" else 0.0
    raw = _weyl_sum(kernel, grid, taper)
    if kind == "state":
        raw = raw / (2 * np.pi * grid.hbar_eff)
    hermitian = np.allclose(kernel, kernel.conj().T, atol=1e-12 * max(1.0, np.abs(kernel).max()))
    keep_real = hermitian if real is None else real
    imag = float(np.max(np.abs(raw.imag)))
    out = raw.real if keep_real else raw
    if kind == "state":
        return WignerDensity(out, grid, imag, {"taper_fraction": taper, "lag_window": "periodic"})
    return out


def weyl_quantize(symbol: Callable, grid: PhaseGrid) -> np.ndarray:
    """Kernel of the Weyl-ordered operator with symbol ``symbol(q, p)``.

    ``K(x_a, x_b) = (1 / (N dq)) sum_l f((x_a + x_b)/2, p_l) exp(-i (x_b - x_a) p_l / hbar)``
    over the discrete momenta ``p_l = 2 pi hbar l / (N dq)``, with ``x_b - x_a``
    taken as the shortest periodic separation.  ``nq`` must be odd.
    """
    x = grid.q_nodes
    n, dq, hbar = x.size, grid.dq, grid.hbar_eff
    if n % 2 == 0:
        raise ValueError("weyl_quantize needs an odd number of q nodes")
    k = np.fft.fftfreq(n) * n
    p_l = 2 * np.pi * hbar * k / (n * dq)
    half = n // 2
    lags = np.arange(-half, half + 1)  # b - a, shortest periodic separation
    # centres x_a + lag dq / 2 all sit on the half-grid x_0 + h dq / 2
    h_idx = np.arange(-half, 2 * (n - 1) + half + 1)
    f = symbol((x[0] + 0.5 * dq * h_idx)[:, None], p_l[None, :])
    f = np.broadcast_to(f, (h_idx.size, n))
    g = f @ np.exp(-2j * np.pi * np.outer(k, lags) / n)  # (centre, lag)
    a = np.arange(n)[:, None]
    b = np.arange(n)[None, :]
    lag = (b - a + half) % n - half
    return g[2 * a + lag + half, lag + half] / (n * dq)


def momentum_nodes(grid: PhaseGrid) -> np.ndarray:
    """Discrete momenta conjugate to the position grid."""
    return grid.hbar_eff * 2 * np.pi * np.fft.fftfreq(grid.nq, d=grid.dq)


def compose_kernels(a: np.ndarray, b: np.ndarray, dq: float) -> np.ndarray:
    return a @ b * dq


def kernel_trace(a: np.ndarray, dq: float) -> complex:
    return complex(np.trace(a) * dq)


def quantum_mean(rho: np.ndarray, obs: np.ndarray, dq: float) -> complex:
    """``Tr(rho O)`` for position kernels."""
    return complex(np.einsum("ab,ba->", rho, obs) * dq * dq)


def pure_state(psi: np.ndarray, dq: float) -> np.ndarray:
    """Normalized projector kernel ``psi(x) conj(psi(x'))``."""
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.sqrt(np.sum(np.abs(psi) ** 2) * dq)
    return np.outer(psi, psi.conj())


def oscillator_state(x: np.ndarray, hbar: float, n: int = 0, q0: float = 0.0, p0: float = 0.0) -> np.ndarray:
    """Harmonic-oscillator eigenfunction ``n`` (0 or 1), displaced to ``(q0, p0)``."""
    y = x - q0
    base = (np.pi * hbar) ** -0.25 * np.exp(-y**2 / (2 * hbar)) * np.exp(1j * p0 * x / hbar)
    if n == 0:
        return base
    if n == 1:
        return np.sqrt(2.0 / hbar) * y * base
    raise ValueError("only n = 0 and n = 1 are provided")


def classical_mean(rho_w: WignerDensity, ow) -> float:
    """``int rho^W O^W dq dp`` on the shared grid."""
    g = rho_w.grid
    ow = np.asarray(ow)
    if ow.shape != rho_w.values.shape:
        raise ValueError("phase-space function does not match the density grid")
    return complex(np.sum(rho_w.values * ow) * g.dq * g.dp).real


def sample_symbol(symbol: Callable, grid: PhaseGrid) -> np.ndarray:
    q, p = grid.mesh()
    return np.broadcast_to(symbol(q, p), q.shape).astype(complex if np.iscomplexobj(symbol(q, p)) else float)


def spectral_derivative(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """FFT derivative along ``axis`` for data decaying at both ends."""
    n = f.shape[axis]
    k = 2 * np.pi * np.fft.fftfreq(n, d=h)
    shape = [1] * f.ndim
    shape[axis] = n
    k = k.reshape(shape)
    if n % 2 == 0:
        k = np.where(np.abs(k) == np.abs(k).max(), 0.0, k)
    out = np.fft.ifft(1j * k * np.fft.fft(f, axis=axis), axis=axis)
    return out.real if np.isrealobj(f) else out


def poisson_bracket(h_symbol: Callable, rho_w: np.ndarray, grid: PhaseGrid, step: float = 1e-6) -> np.ndarray:
    """``{H, rho} = dH/dq drho/dp - dH/dp drho/dq`` with numerical derivatives."""
    q, p = grid.mesh()
    dh_dq = (h_symbol(q + step, p) - h_symbol(q - step, p)) / (2 * step)
    dh_dp = (h_symbol(q, p + step) - h_symbol(q, p - step)) / (2 * step)
    drho_dq = spectral_derivative(rho_w, grid.dq, 0)
    drho_dp = spectral_derivative(rho_w, grid.dp, 1)
    return dh_dq * drho_dp - dh_dp * drho_dq


def smooth_window(x, inner: float = 0.6, outer: float = 0.95):
    """C-infinity window: 1 for ``|x| <= inner``, 0 for ``|x| >= outer``."""
    s = np.clip((np.abs(x) - inner) / (outer - inner), 0.0, 1.0)

    def psi(t):
        return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)

    return psi(1.0 - s) / (psi(1.0 - s) + psi(s))


@dataclass
class CorrespondenceModel:
    """A product ``O1 O2``, a Hamiltonian and a state family for the hbar sweep.

    ``o1``, ``o2`` and ``hamiltonian`` are phase-space symbols ``f(q, p)``;
    ``state(x, hbar)`` returns a wavefunction.  Symbols are windowed to
    ``window`` (half-widths in q and p) before quantization and errors are
    measured inside ``region``.
    """

    name: str
    o1: Callable
    o2: Callable
    hamiltonian: Callable
    state: Callable
    q_extent: float = 5.0
    p_extent: float = 3.0
    region: tuple = (1.0, 1.0)


def _windowed(f, qext, pext):
    """Window ``f`` in each variable it actually depends on.

    Pure functions of ``q`` (or ``p``) stay pure so that commuting products
    remain exactly commuting after windowing.
    """
    q = np.linspace(-qext, qext, 7)[:, None]
    p = np.linspace(-pext, pext, 5)[None, :]
    vals = np.broadcast_to(f(q, p), (7, 5))
    uses_q = not np.allclose(vals, vals[3:4, :])
    uses_p = not np.allclose(vals, vals[:, 2:3])

    def g(q, p):
        out = f(q, p)
        if uses_q:
            out = out * smooth_window(q / qext)
        if uses_p:
            out = out * smooth_window(p / pext)
        return out

    return g


def product_rule_error(model: CorrespondenceModel, hbar: float) -> float:
    """``max |(O1 O2)^W - O1^W O2^W|`` inside the model's region."""
    grid = adapted_grid(hbar, model.q_extent, model.p_extent)
    f1 = _windowed(model.o1, model.q_extent, model.p_extent)
    f2 = _windowed(model.o2, model.q_extent, model.p_extent)
    k1, k2 = weyl_quantize(f1, grid), weyl_quantize(f2, grid)
    prod = wigner_transform(compose_kernels(k1, k2, grid.dq), grid, "observable", taper=0.0, real=False)
    q, p = grid.mesh()
    err = np.abs(prod - f1(q, p) * f2(q, p))
    inside = (np.abs(q) <= model.region[0]) & (np.abs(p) <= model.region[1])
    return float(np.max(err[inside]))


def liouville_residual(model: CorrespondenceModel, hbar: float) -> float:
    """Relative L2 gap between ``{H^W, rho^W}`` and ``([H, rho] / i hbar)^W``."""
    grid = adapted_grid(hbar, model.q_extent, model.p_extent)
    rho = pure_state(model.state(grid.q_nodes, hbar), grid.dq)
    hk = weyl_quantize(model.hamiltonian, grid)
    comm = (compose_kernels(hk, rho, grid.dq) - compose_kernels(rho, hk, grid.dq)) / (1j * hbar)
    quantum = wigner_transform(comm, grid, "state").values
    rho_w = wigner_transform(rho, grid, "state").values
    classical = poisson_bracket(model.hamiltonian, rho_w, grid)
    return float(np.linalg.norm(quantum - classical) / np.linalg.norm(classical))


def _scaling_fit(hbars, errors, noise_floor):
    errors = np.asarray(errors, dtype=float)
    if np.all(errors <= noise_floor):
        return {"exact": True, "slope": None}
    fit = linregress(np.log(hbars), np.log(np.maximum(errors, 1e-300)))
    return {"exact": False, "slope": float(fit.slope), "intercept": float(fit.intercept)}


def correspondence_suite(models: Sequence[CorrespondenceModel], hbar_series: Sequence[float],
                         product_floor: float = 1e-8, liouville_floor: float = 1e-8) -> dict:
    """Errors of the product rule and the Liouville correspondence versus ``hbar``.

    A model whose errors all sit below the floors is reported as an exact
    correspondence rather than fitted.
    """
    hbars = np.asarray(hbar_series, dtype=float)
    if hbars.size < 4 or np.any(np.diff(hbars) >= 0):
        raise ValueError("hbar_series needs at least 4 strictly decreasing values")
    report = {}
    for m in models:
        prod = [product_rule_error(m, h) for h in hbars]
        liou = [liouville_residual(m, h) for h in hbars]
        report[m.name] = {
            "hbar": hbars.tolist(),
            "product_error": prod,
            "liouville_residual": liou,
            "product_fit": _scaling_fit(hbars, prod, product_floor),
            "liouville_fit": _scaling_fit(hbars, liou, liouville_floor),
        }
    return report


def mean_correspondence_gap(state: Callable, o1: Callable, o2: Callable, hbar: float,
                            q_extent: float = 5.0, p_extent: float = 3.0) -> float:
    """``|int rho^W o1 o2 - Tr(rho (O1 O2 + O2 O1) / 2)|`` for a state family.

    The classical side uses the plain product of symbols; the quantum side
    the symmetrized operator product.  For quadratic symbols (and ``o2 = 1``)
    the two agree exactly; otherwise they differ at ``O(hbar^2)``.
    """
    grid = adapted_grid(hbar, q_extent, p_extent)
    rho = pure_state(state(grid.q_nodes, hbar), grid.dq)
    k1, k2 = weyl_quantize(o1, grid), weyl_quantize(o2, grid)
    sym = 0.5 * (compose_kernels(k1, k2, grid.dq) + compose_kernels(k2, k1, grid.dq))
    q, p = grid.mesh()
    classical = classical_mean(wigner_transform(rho, grid, "state"), o1(q, p) * o2(q, p))
    return abs(classical - quantum_mean(rho, sym, grid.dq).real)


def quantum_thermal_mean(h_kernel: np.ndarray, o_kernel: np.ndarray, beta: float, dq: float) -> float:
    """``Tr(exp(-beta H) O) / Tr(exp(-beta H))`` for position kernels."""
    hm = 0.5 * (h_kernel + h_kernel.conj().T) * dq
    e, v = np.linalg.eigh(hm)
    b = np.exp(-beta * (e - e.min()))
    om = o_kernel * dq
    diag = np.einsum("an,ab,bn->n", v.conj(), om, v)
    return float(np.real(np.dot(b, diag) / b.sum()))


# --- classical equilibrium densities built from energy profiles ---------------------------------

def mollifier(x, eps: float):
    """Unit-mass Gaussian of width ``eps``."""
    return np.exp(-0.5 * (x / eps) ** 2) / (np.sqrt(2 * np.pi) * eps)


@dataclass
class ClassicalModel:
    """Phase-space Hamiltonian and (optional) pointer momenta, as symbols."""

    hamiltonian: Callable
    momenta: Sequence[Callable] = ()


@dataclass
class StarDensity:
    values: np.ndarray
    grid: PhaseGrid
    epsilon: float
    norm: float
    shell_volumes: np.ndarray

    def mass_near(self, h_values, omega, width) -> float:
        mask = np.abs(h_values - omega) < width
        return float(np.sum(self.values[mask]) * self.grid.dq * self.grid.dp)


def shell_density(grid: PhaseGrid, model: ClassicalModel, omega: float, labels: Sequence[float] = (),
                  epsilon: float = 0.05):
    """Mollified ``delta(H - omega) prod delta(P_i - r_i)``, normalized on the grid.

    Returns ``(values, volume)`` with ``volume`` the un-normalized mass.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    q, p = grid.mesh()
    vals = mollifier(model.hamiltonian(q, p) - omega, epsilon)
    for pf, r in zip(model.momenta, labels):
        vals = vals * mollifier(pf(q, p) - r, epsilon)
    vol = float(np.sum(vals) * grid.dq * grid.dp)
    if vol <= 0:
        raise ValueError(f"shell at omega = {omega} has no support on the phase grid")
    return vals / vol, vol


def build_classical_star_density(spectrum: SpectrumGrid, profiles, grid: PhaseGrid, model: ClassicalModel,
                                 epsilon: float, labels: Optional[np.ndarray] = None,
                                 min_weight: float = 0.0) -> StarDensity:
    """Superpose mollified shells weighted by the energy profiles ``rho_r(omega)``.

    ``profiles`` has shape (K,) or (K, R) with ``labels`` of shape (R, n_momenta).
    Shell weights ``w_k rho_r(omega_k)`` below ``min_weight`` are skipped.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    prof = np.asarray(profiles, dtype=float)
    if prof.ndim == 1:
        prof = prof[:, None]
    if np.any(prof < 0):
        raise ValueError("profiles must be non-negative")
    if labels is None:
        labels = np.zeros((prof.shape[1], 0))
    q, p = grid.mesh()
    hv = model.hamiltonian(q, p)
    mom = [pf(q, p) for pf in model.momenta]
    out = np.zeros_like(hv, dtype=float)
    vols = np.zeros(prof.shape)
    cell = grid.dq * grid.dp
    for k, omega in enumerate(spectrum.nodes):
        shell_h = mollifier(hv - omega, epsilon)
        for r in range(prof.shape[1]):
            wgt = spectrum.weights[k] * prof[k, r]
            if wgt <= min_weight:
                continue
            shell = shell_h
            for m, lab in zip(mom, labels[r]):
                shell = shell * mollifier(m - lab, epsilon)
            vol = np.sum(shell) * cell
            vols[k, r] = vol
            if vol > 0:
                out += wgt * shell / vol
    return StarDensity(out, grid, epsilon, float(np.sum(out) * cell), vols)


def moment_check(values: np.ndarray, grid: PhaseGrid, model: ClassicalModel, orders: Sequence[int]) -> dict:
    """``int rho (H^W)^n`` and ``int rho (P_i^W)^n`` for each order ``n``."""
    q, p = grid.mesh()
    cell = grid.dq * grid.dp
    hv = model.hamiltonian(q, p)
    out = {"H": {int(n): float(np.sum(values * hv**n) * cell) for n in orders}}
    for i, pf in enumerate(model.momenta, start=1):
        pv = pf(q, p)
        out[f"P{i}"] = {int(n): float(np.sum(values * pv**n) * cell) for n in orders}
    return out
