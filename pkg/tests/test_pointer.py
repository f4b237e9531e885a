import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contspec.algebra import (Observable, StateFunctional, compose, normalized, pair, random_hermitian_blocks,
                              random_observable)
from contspec.errors import InvalidState
from contspec.pointer import (commutator_mean_residual, diagonalize_sections, embed_restricted, label_values,
                              off_diagonal_residual, pointer_observables, to_pointer_frame, trace_away_nonisolating)
from contspec.spectral import build_grid


def _rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def test_continuity_follows_eigenvectors_through_crossing():
    # oracle: rho(w) = R(w) diag(l1, l2) R(w)^T with eigenvalue curves that cross at w = 1
    grid = build_grid("uniform-trapezoid", 41, 2.0)
    w = grid.nodes
    l1, l2 = 1.0 + 0.5 * (w - 1.0), 1.0 - 0.5 * (w - 1.0)
    blocks = np.array([_rotation(0.3 * x) @ np.diag([a, b]) @ _rotation(0.3 * x).T for x, a, b in zip(w, l1, l2)])
    rho = StateFunctional(grid, np.eye(2) / 2, blocks)
    basis = diagonalize_sections(rho)
    keep = [i for i in range(grid.size) if i not in basis.degenerate_nodes]
    # label 0 starts on the larger eigenvalue (l2 for w < 1) and keeps following the same eigenvector
    assert np.allclose(basis.eigenvalues[keep, 0], l2[keep])
    assert np.allclose(basis.eigenvalues[keep, 1], l1[keep])
    for i in keep:
        expected = _rotation(0.3 * w[i])[:, 1]
        assert abs(abs(np.vdot(expected, basis.u_nodes[i][:, 0])) - 1) < 1e-10
    assert off_diagonal_residual(rho, basis) < 1e-12


def test_phase_convention_largest_component_real_positive(rng):
    grid = build_grid("gauss-legendre", 8, 1.0)
    rho = StateFunctional(grid, np.eye(3), random_hermitian_blocks(rng, 8, 3, psd=True))
    basis = diagonalize_sections(rho)
    for u in basis.u_nodes:
        lead = u[np.argmax(np.abs(u), axis=0), np.arange(3)]
        assert np.allclose(lead.imag, 0) and np.all(lead.real > 0)


def test_reconstruction_and_unitarity(rng):
    grid = build_grid("gauss-legendre", 10, 1.0)
    blocks = random_hermitian_blocks(rng, 10, 4, psd=True)
    basis = diagonalize_sections(StateFunctional(grid, np.eye(4), blocks))
    rebuilt = basis.u_nodes @ (basis.eigenvalues[:, :, None] * np.conj(np.swapaxes(basis.u_nodes, 1, 2)))
    assert np.allclose(rebuilt, blocks)
    assert basis.unitarity_residual() < 1e-12
    assert len(basis.report()["nodes"]) == 10


def test_degenerate_nodes_are_reported():
    grid = build_grid("gauss-legendre", 4, 1.0)
    basis = diagonalize_sections(StateFunctional(grid, np.eye(2), np.broadcast_to(np.eye(2), (4, 2, 2)).copy()))
    assert basis.degenerate_nodes == [0, 1, 2, 3]
    assert basis.unitarity_residual() < 1e-14


def test_non_hermitian_block_rejected():
    grid = build_grid("gauss-legendre", 2, 1.0)
    bad = np.array([[[1, 1], [0, 1]]] * 2, dtype=complex)
    with pytest.raises(InvalidState):
        diagonalize_sections(StateFunctional(grid, np.eye(2), bad))


def test_pointer_observables_are_diagonal_in_frame(rng):
    grid = build_grid("gauss-legendre", 6, 1.0)
    rho = StateFunctional(grid, np.eye(4) / 4, random_hermitian_blocks(rng, 6, 4, psd=True))
    basis = diagonalize_sections(rho)
    ps = pointer_observables(basis, grid, label_shape=(2, 2))
    assert len(ps) == 2
    for p in ps:
        t = to_pointer_frame(p, basis)
        off = t.cc_diag[:, ~np.eye(4, dtype=bool)]
        assert np.max(np.abs(off)) < 1e-12
    # the two labels are commuting observables
    comm = compose(ps[0], ps[1]) - compose(ps[1], ps[0])
    assert np.max(np.abs(comm.cc_diag)) < 1e-12


def test_label_values():
    assert label_values(3).tolist() == [[0.0], [1.0], [2.0]]
    assert label_values(4, (2, 2)).tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]
    with pytest.raises(ValueError):
        label_values(4, (3, 2))


def test_partial_trace_of_product_state(rng):
    # oracle: rho = a (x) b on the composite label r * M_m + m reduces to a * tr(b)
    grid = build_grid("gauss-legendre", 5, 1.0)
    a = random_hermitian_blocks(rng, 5, 2, psd=True)
    b = random_hermitian_blocks(rng, 1, 3, psd=True)[0]
    comp = np.einsum("krs,mn->krmsn", a, b).reshape(5, 6, 6)
    rho = StateFunctional(grid, np.kron(np.eye(2), b), comp)
    red = trace_away_nonisolating(rho, (2, 3))
    assert np.allclose(red.cc_diag, a * np.trace(b))
    assert np.allclose(red.bb, np.eye(2) * np.trace(b))
    with pytest.raises(ValueError):
        trace_away_nonisolating(rho, (4, 2))


def test_restricted_observable_means_agree(rng):
    grid = build_grid("gauss-legendre", 5, 1.0)
    rho = normalized(StateFunctional(grid, np.zeros((6, 6)), random_hermitian_blocks(rng, 5, 6, psd=True)))
    obs = random_observable(grid, 2, rng)
    obs = Observable(grid, obs.bb, obs.cc_diag)
    lifted = embed_restricted(obs, 3)
    assert pair(rho, lifted) == pytest.approx(pair(trace_away_nonisolating(rho, (2, 3)), obs))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_pointer_commutes_in_mean_with_everything(seed, m):
    rng = np.random.default_rng(seed)
    grid = build_grid("gauss-legendre", 6, 1.0)
    rho = normalized(StateFunctional(grid, np.zeros((m, m)), random_hermitian_blocks(rng, 6, m, psd=True)))
    basis = diagonalize_sections(rho)
    p = pointer_observables(basis, grid)[0]
    tests = [random_observable(grid, m, rng) for _ in range(3)]
    assert commutator_mean_residual(rho, p, tests) < 1e-10
