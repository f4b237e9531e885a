"""Pointer basis: per-energy diagonalization of the time-independent blocks."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .algebra import Observable, StateFunctional, _Blocks, compose, pair_complex
from .errors import InvalidState
from .spectral import CscoSpec, SpectrumGrid

DEGENERACY_GAP = 1e-10


@dataclass
class PointerBasis:
    """Unitaries ``U(omega)`` whose columns are the pointer states at each node.

    ``eigenvalues[k, r]`` is ``rho_r(omega_k)``; ``U @ diag(eigenvalues) @ U^dagger``
    reproduces the diagonal block.
    """

    u_nodes: np.ndarray
    eigenvalues: np.ndarray
    u_bound: Optional[np.ndarray] = None
    bound_eigenvalues: Optional[np.ndarray] = None
    overlaps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    degenerate_nodes: list = field(default_factory=list)

    @property
    def degeneracy(self) -> int:
        return self.u_nodes.shape[1]

    def unitarity_residual(self) -> float:
        m = self.degeneracy
        uu = np.conj(np.swapaxes(self.u_nodes, 1, 2)) @ self.u_nodes
        res = np.max(np.abs(uu - np.eye(m)))
        if self.u_bound is not None:
            res = max(res, np.max(np.abs(self.u_bound.conj().T @ self.u_bound - np.eye(m))))
        return float(res)

    def report(self) -> dict:
        """Per-node summary for JSON export."""
        m = self.degeneracy
        uu = np.conj(np.swapaxes(self.u_nodes, 1, 2)) @ self.u_nodes
        unit = np.max(np.abs(uu - np.eye(m)), axis=(1, 2))
        overlaps = np.concatenate([[1.0], self.overlaps]) if len(self.overlaps) else np.ones(len(unit))
        return {
            "nodes": [
                {"eigenvalues": ev.tolist(), "unitarity_residual": float(r), "continuity_overlap": float(o)}
                for ev, r, o in zip(self.eigenvalues, unit, overlaps)
            ],
            "degenerate_nodes": list(self.degenerate_nodes),
        }


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    # largest-magnitude component of each column made real positive
    idx = np.argmax(np.abs(vecs), axis=0)
    lead = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(lead) / lead)[None, :]


def _sorted_eigh(block: np.ndarray):
    vals, vecs = np.linalg.eigh(block)
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    degenerate = bool(np.any(np.abs(np.diff(vals)) < DEGENERACY_GAP))
    if degenerate:
        # lexicographic tie-break on the (phase-fixed) eigenvector components
        vecs = _fix_phases(vecs)
        keys = [(-round(v, 10),) + tuple(np.round(np.abs(vecs[:, j]), 10)) for j, v in enumerate(vals)]
        order = sorted(range(len(vals)), key=lambda j: keys[j])
        vals, vecs = vals[order], vecs[:, order]
    return vals, vecs, degenerate


def _check_hermitian(block, tol=1e-10):
    if np.max(np.abs(block - np.conj(np.swapaxes(block, -1, -2))), initial=0.0) > tol * max(1.0, np.max(np.abs(block))):
        raise InvalidState("diagonal block is not Hermitian")


def diagonalize_sections(rho: _Blocks) -> PointerBasis:
    """Diagonalize ``rho(omega)_{mm'}`` node by node with continuous eigenvectors.

    The first node is sorted by descending eigenvalue.  Later nodes are
    matched column by column to the previous node by maximal overlap, so
    labels follow eigenvector continuity rather than eigenvalue order.
    Phases make the largest component of each column real positive.
    """
    _check_hermitian(rho.cc_diag)
    _check_hermitian(rho.bb)
    k, m = rho.cc_diag.shape[:2]
    u = np.empty((k, m, m), dtype=complex)
    ev = np.empty((k, m))
    overlaps = np.empty(max(k - 1, 0))
    degenerate_nodes = []
    prev = None
    for i in range(k):
        vals, vecs, degenerate = _sorted_eigh(rho.cc_diag[i])
        if degenerate:
            degenerate_nodes.append(i)
        if prev is not None and not degenerate:
            ov = np.abs(prev.conj().T @ vecs)
            perm = _match_columns(ov)
            vals, vecs = vals[perm], vecs[:, perm]
            overlaps[i - 1] = float(np.min(ov[np.arange(m), perm]))
        elif prev is not None:
            overlaps[i - 1] = float(np.min(np.max(np.abs(prev.conj().T @ vecs), axis=1)))
        vecs = _fix_phases(vecs)
        u[i], ev[i] = vecs, vals
        prev = vecs
    bvals, bvecs, _ = _sorted_eigh(rho.bb)
    return PointerBasis(u, ev, _fix_phases(bvecs), bvals, overlaps, degenerate_nodes)


def _match_columns(ov: np.ndarray) -> np.ndarray:
    """perm[r] = column of the new basis assigned to previous column r."""
    rows, cols = linear_sum_assignment(-ov)
    perm = np.empty(len(rows), dtype=int)
    perm[rows] = cols
    return perm


def to_pointer_frame(x: _Blocks, basis: PointerBasis) -> _Blocks:
    """Conjugate all blocks by the pointer unitaries: ``U^dagger X U``."""
    u = basis.u_nodes
    ud = np.conj(np.swapaxes(u, 1, 2))
    ub = np.eye(x.degeneracy) if basis.u_bound is None else basis.u_bound
    lo = None if x.cross_lo is None else ud @ x.cross_lo @ ub
    ol = None if x.cross_ol is None else ub.conj().T @ x.cross_ol @ u
    full = None
    if x.cc_full is not None:
        full = np.einsum("iam,ijmn,jnb->ijab", ud, x.dense_full(), u)
    return replace(x, bb=ub.conj().T @ x.bb @ ub, cc_diag=ud @ x.cc_diag @ u, cross_lo=lo, cross_ol=ol, cc_full=full)


def off_diagonal_residual(rho: _Blocks, basis: PointerBasis) -> float:
    """Largest off-diagonal entry of the transformed diagonal blocks."""
    t = to_pointer_frame(StateFunctional(rho.grid, rho.bb, rho.cc_diag), basis)
    m = rho.degeneracy
    mask = ~np.eye(m, dtype=bool)
    return float(max(np.max(np.abs(t.cc_diag[:, mask]), initial=0.0), np.max(np.abs(t.bb[mask]), initial=0.0)))


def label_values(degeneracy: int, label_shape: Optional[Sequence[int]] = None) -> np.ndarray:
    """Integer labels ``r_i`` of each pointer index, shape (M, n_labels)."""
    shape = (degeneracy,) if label_shape is None else tuple(label_shape)
    if int(np.prod(shape)) != degeneracy:
        raise ValueError(f"label shape {shape} does not factor degeneracy {degeneracy}")
    return np.array(np.unravel_index(np.arange(degeneracy), shape)).T.astype(float)


def pointer_observables(basis: PointerBasis, grid: SpectrumGrid, csco: CscoSpec | None = None,
                        label_shape: Optional[Sequence[int]] = None) -> list[Observable]:
    """Pointer observables ``P_i``, diagonal in the pointer basis with eigenvalue ``r_i``.

    Returned in the original ``m`` basis: ``P_i(omega) = U diag(r_i) U^dagger``.
    With the default label shape there is a single ``P`` with labels
    ``0..M-1``.
    """
    m = basis.degeneracy
    labels = label_values(m, label_shape)
    u = basis.u_nodes
    ud = np.conj(np.swapaxes(u, 1, 2))
    ub = np.eye(m) if basis.u_bound is None else basis.u_bound
    out = []
    for i in range(labels.shape[1]):
        d = np.diag(labels[:, i])
        diag = u @ d[None] @ ud
        bb = ub @ d @ ub.conj().T
        out.append(Observable(grid, bb, diag))
    return out


def commutator_mean_residual(rho_star: StateFunctional, p: Observable, testset: Sequence[Observable]) -> float:
    """``max_O |(rho_*|[P, O])|`` over the test observables."""
    worst = 0.0
    for o in testset:
        comm = compose(p, o) - compose(o, p)
        worst = max(worst, abs(pair_complex(rho_star, comm)))
    return float(worst)


def _partial_trace_blocks(arr: np.ndarray, m_r: int, m_m: int) -> np.ndarray:
    lead = arr.shape[:-2]
    a = arr.reshape(lead + (m_r, m_m, m_r, m_m))
    return np.einsum("...rmsm->...rs", a)


def trace_away_nonisolating(rho: StateFunctional, split: tuple[int, int]) -> StateFunctional:
    """Sum out the non-isolating labels: ``rho_{rr'} = sum_m rho_{rm, r'm}``.

    ``split = (M_r, M_m)`` with the composite label ``r * M_m + m``.
    """
    m_r, m_m = (int(s) for s in split)
    if m_r * m_m != rho.degeneracy or m_r < 1 or m_m < 1:
        raise ValueError(f"degeneracy {rho.degeneracy} does not factor as {m_r} x {m_m}")
    if m_m == 1:
        return rho
    pt = lambda a: None if a is None else _partial_trace_blocks(a, m_r, m_m)
    return StateFunctional(
        rho.grid,
        pt(rho.bb),
        pt(rho.cc_diag),
        pt(rho.cross_lo),
        pt(rho.cross_ol),
        None if rho.cc_full is None else pt(rho.dense_full()),
    )


def embed_restricted(obs: Observable, m_m: int) -> Observable:
    """Lift ``O_{rr'}`` to ``O_{rr'} delta_{mm'}`` on the composite label set."""
    eye = np.eye(m_m)
    kron = lambda a: None if a is None else np.einsum("...rs,mn->...rmsn", a, eye).reshape(
        a.shape[:-2] + (a.shape[-2] * m_m, a.shape[-1] * m_m))
    return Observable(
        obs.grid,
        kron(obs.bb),
        kron(obs.cc_diag),
        kron(obs.cross_lo),
        kron(obs.cross_ol),
        None if obs.cc_full is None else kron(obs.dense_full()),
    )
