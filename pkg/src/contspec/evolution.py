"""Free evolution of state functionals and decoherence diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .algebra import SeparableKernel, StateFunctional, _Blocks, pair_complex


def _bound_energy(rho: _Blocks, omega0: Optional[float]) -> float:
    # cross blocks without a declared bound energy evolve as if omega_0 = 0
    return 0.0 if omega0 is None else float(omega0)


def evolve(rho: StateFunctional, t: float, omega0: Optional[float] = None) -> StateFunctional:
    """State at time ``t``.

    The pairing conjugates the stored coefficients, so the phases
    ``exp(i(omega - omega_0)t)`` etc. of the mean values appear here with
    the opposite sign.  Diagonal blocks are passed through untouched.
    """
    if t == 0:
        return rho
    w = rho.grid.nodes
    w0 = _bound_energy(rho, omega0)
    lo = None if rho.cross_lo is None else rho.cross_lo * np.exp(-1j * (w - w0) * t)[:, None, None]
    ol = None if rho.cross_ol is None else rho.cross_ol * np.exp(-1j * (w0 - w) * t)[:, None, None]
    full = rho.cc_full
    if isinstance(full, SeparableKernel):
        full = full.phased(np.exp(-1j * w * t), np.exp(1j * w * t))
    elif full is not None:
        phase = np.exp(-1j * np.subtract.outer(w, w) * t)
        full = full * phase[:, :, None, None]
    return replace(rho, cross_lo=lo, cross_ol=ol, cc_full=full)


def mean_at(rho: StateFunctional, obs: _Blocks, t: float, omega0: Optional[float] = None) -> float:
    """``(rho(t)|O)``, real part."""
    return mean_at_complex(rho, obs, t, omega0).real


def mean_at_complex(rho, obs, t, omega0=None) -> complex:
    return pair_complex(evolve(rho, t, omega0), obs)


def asymptotic_state(rho: StateFunctional) -> StateFunctional:
    """Weak limit: keep only the bound and energy-diagonal blocks."""
    return StateFunctional(rho.grid, rho.bb, rho.cc_diag)


def off_diagonal_magnitude(rho, obs, omega0=None) -> float:
    """``|(rho|O) - (rho_*|O)|`` at ``t = 0``."""
    return abs(pair_complex(rho, obs) - pair_complex(asymptotic_state(rho), obs))


@dataclass
class DecoherenceCurve:
    times: np.ndarray
    means: np.ndarray
    residuals: np.ndarray
    limit: float
    revival_horizon: float
    fitted_decay: Optional[dict] = None

    def rows(self):
        return zip(self.times, self.means, self.residuals)


def decoherence_curve(rho: StateFunctional, obs: _Blocks, times, omega0=None,
                      revival_override: bool = False, fit: bool = True) -> DecoherenceCurve:
    """Residuals ``|<O>(t) - <O>_*|`` along increasing ``times``.

    Refuses times past half the grid recurrence time unless
    ``revival_override`` is set, since a discrete grid revives where the
    continuum would not.
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ValueError("times must be non-empty")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    horizon = 0.5 * rho.grid.revival_time()
    if not revival_override and times[-1] > horizon:
        raise ValueError(
            f"t = {times[-1]:g} exceeds the revival horizon {horizon:g} of this grid; "
            "refine the grid or pass revival_override=True"
        )
    limit = pair_complex(asymptotic_state(rho), obs)
    means = np.array([mean_at_complex(rho, obs, t, omega0) for t in times])
    residuals = np.abs(means - limit)
    curve = DecoherenceCurve(times, means.real, residuals, limit.real, horizon)
    if fit:
        curve.fitted_decay = fit_decay(times, residuals)
    return curve


def fit_decay(times, residuals, floor: float = 1e-13) -> Optional[dict]:
    """Compare Gaussian ``a exp(-s t^2)`` and power-law ``a t^-p`` envelopes.

    Least squares on ``log residual``; only points above ``floor`` times the
    largest residual and with ``t > 0`` are used.  Diagnostic only.
    """
    times = np.asarray(times, dtype=float)
    r = np.asarray(residuals, dtype=float)
    if r.size == 0 or r.max() <= 0:
        return None
    keep = (r > floor * r.max()) & (times > 0)
    if keep.sum() < 3:
        return None
    t, y = times[keep], np.log(r[keep])
    out = {}
    a_g = np.polyfit(t**2, y, 1)
    out["gaussian"] = {"rate": float(-a_g[0]), "sse": float(np.sum((np.polyval(a_g, t**2) - y) ** 2))}
    a_p = np.polyfit(np.log(t), y, 1)
    out["power"] = {"exponent": float(-a_p[0]), "sse": float(np.sum((np.polyval(a_p, np.log(t)) - y) ** 2))}
    out["model"] = "gaussian" if out["gaussian"]["sse"] <= out["power"]["sse"] else "power"
    if out["model"] == "gaussian" and out["gaussian"]["rate"] > 0:
        out["half_life"] = float(np.sqrt(np.log(2) / out["gaussian"]["rate"]))
    return out


def gaussian_coherence_state(grid, center: float = 5.0, sigma: float = 1.0) -> StateFunctional:
    """Diagonal Gaussian energy profile plus the rank-one coherence ``g(omega) g(omega')``.

    ``g`` is normalized so the diagonal block is ``g^2`` with unit integral.
    """
    g = np.exp(-((grid.nodes - center) ** 2) / (2 * sigma**2))
    g = g / np.sqrt(np.dot(grid.weights, g**2))
    diag = (g**2)[:, None, None]
    return StateFunctional(grid, np.zeros((1, 1)), diag, cc_full=SeparableKernel.outer(g, g))
