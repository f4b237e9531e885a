"""Support-volume bookkeeping for evolving classical ensembles."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.spatial import ConvexHull
from scipy.stats import linregress

DEGENERATE_RTOL = 1e-12


def covariance_volume(points: np.ndarray) -> tuple[float, bool]:
    """``sqrt(det cov)`` of a point cloud ``(n, d)``.

    Returns ``(volume, degenerate)``; a rank-deficient covariance falls back
    to the product of its non-negligible eigenvalues (a pseudo-volume).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    cov = np.atleast_2d(np.cov(pts, rowvar=False))
    ev = np.linalg.eigvalsh(cov)
    cut = DEGENERATE_RTOL * max(ev.max(), 1e-300)
    if np.all(ev > cut):
        sign, logdet = np.linalg.slogdet(cov)
        return float(np.exp(0.5 * logdet)), False
    return float(np.sqrt(np.prod(ev[ev > cut]))), True


def hull_volume(points: np.ndarray) -> float:
    """Convex-hull volume, a cross-check for dimension <= 3."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1 or pts.shape[1] == 1:
        return float(np.ptp(pts))
    if pts.shape[1] > 3:
        raise ValueError("hull volumes are only provided up to dimension 3")
    return float(ConvexHull(pts).volume)


@dataclass
class VolumeTrack:
    times: np.ndarray
    v_total: np.ndarray
    v_observed: np.ndarray
    v_unobserved: np.ndarray
    band: tuple = (0.5, 2.0)
    degenerate: list = field(default_factory=list)

    @property
    def product_ratio(self) -> np.ndarray:
        return self.v_observed * self.v_unobserved / self.v_total

    @property
    def total_drift(self) -> float:
        return float(np.max(np.abs(self.v_total / self.v_total[0] - 1.0)))

    @property
    def out_of_band(self) -> np.ndarray:
        r = self.product_ratio
        return np.flatnonzero((r < self.band[0]) | (r > self.band[1]))

    def rows(self):
        return zip(self.times, self.v_total, self.v_observed, self.v_unobserved, self.product_ratio)


def shear_flow(points: np.ndarray, t: float) -> np.ndarray:
    """``(q, p) -> (q + p t, p)`` applied to the first two coordinates."""
    out = np.array(points, dtype=float, copy=True)
    out[:, 0] += t * out[:, 1]
    return out


def identity_flow(points: np.ndarray, t: float) -> np.ndarray:
    return np.array(points, dtype=float, copy=True)


def linear_flow(generator: np.ndarray) -> Callable:
    """Flow ``x -> expm(t A) x`` for a constant (Hamiltonian) generator ``A``."""
    a = np.asarray(generator, dtype=float)
    return lambda points, t: np.asarray(points) @ expm(t * a).T


def track_volumes(ensemble: np.ndarray, flow: Callable, observed: Sequence[int], times,
                  unobserved: Sequence[int] | None = None, band=(0.5, 2.0), min_size: int = 1000) -> VolumeTrack:
    """Covariance-volume proxies of the whole cloud and its observed/unobserved projections."""
    pts = np.asarray(ensemble, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < min_size:
        raise ValueError(f"ensemble must be (n >= {min_size}, d)")
    d = pts.shape[1]
    observed = sorted(int(i) for i in observed)
    unobserved = sorted(set(range(d)) - set(observed)) if unobserved is None else sorted(int(i) for i in unobserved)
    if not observed or not unobserved or sorted(observed + unobserved) != list(range(d)):
        raise ValueError("observed and unobserved indices must partition the coordinates")
    times = np.asarray(times, dtype=float)
    vt, vo, vu, flags = [], [], [], []
    for t in times:
        x = flow(pts, t)
        a, da = covariance_volume(x)
        b, db = covariance_volume(x[:, observed])
        c, dc = covariance_volume(x[:, unobserved])
        vt.append(a), vo.append(b), vu.append(c)
        if da or db or dc:
            flags.append(float(t))
    return VolumeTrack(times, np.array(vt), np.array(vo), np.array(vu), tuple(band), flags)


def localization_verdict(track: VolumeTrack, alpha: float = 0.05, drift_tol: float = 1e-6) -> dict:
    """Does the observed volume shrink, with the total conserved?

    ``localizes`` requires a negative slope of ``log v_observed`` against
    ``t`` at one-sided significance ``alpha`` and a total-volume drift below
    ``drift_tol``.
    """
    t = np.asarray(track.times, dtype=float)
    if t.size < 5:
        raise ValueError("at least 5 time samples are needed for a trend")

    def fit(y):
        y = np.log(y)
        if np.ptp(y) == 0:
            return 0.0, 1.0
        r = linregress(t, y)
        p_one = r.pvalue / 2 if r.slope < 0 else 1 - r.pvalue / 2
        return float(r.slope), float(p_one)

    so, po = fit(track.v_observed)
    su, _ = fit(track.v_unobserved)
    conserved = track.total_drift <= drift_tol
    return {"localizes": bool(so < 0 and po < alpha and conserved), "slope_observed": so,
            "slope_unobserved": su, "p_value": po, "total_conserved": bool(conserved),
            "total_drift": track.total_drift}
