"""Observables, state functionals and the pairing between them.

Both objects are stored as five blocks sampled on a :class:`SpectrumGrid`:

=========  ===================  =====================================
block      shape                continuum meaning
=========  ===================  =====================================
bb         (M, M)               bound-bound, ``O(omega_0)_{mm'}``
cc_diag    (K, M, M)            energy-diagonal ``O(omega)_{mm'}``
cross_lo   (K, M, M)            ``O(omega, omega_0)_{mm'}``
cross_ol   (K, M, M)            ``O(omega_0, omega')_{mm'}``
cc_full    (K, K, M, M) or sep  regular kernel ``O(omega, omega')_{mm'}``
=========  ===================  =====================================

The regular kernel is either dense or a :class:`SeparableKernel`
``U(omega) @ V(omega')``.  The energy-diagonal block carries a
``delta(omega - omega')`` so it enters integrals once, while the regular
kernel is integrated over both energies.

States store the coefficient functions ``rho(...)``; the pairing uses their
complex conjugates, ``(rho|O) = sum conj(rho) * O`` block by block.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .errors import InvalidState
from .spectral import CscoSpec, SpectrumGrid


@dataclass(frozen=True, eq=False)
class SeparableKernel:
    """Low-rank matrix kernel ``K(omega, omega') = U(omega) @ V(omega')``.

    ``u`` has shape (K, M, R) and ``v`` has shape (K, R, M).
    """

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex)
        v = np.asarray(self.v, dtype=complex)
        if u.ndim != 3 or v.ndim != 3 or u.shape[0] != v.shape[0] or u.shape[2] != v.shape[1]:
            raise ValueError(f"incompatible separable factors {u.shape} and {v.shape}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def outer(cls, f, g, matrix=None):
        """Scalar-profile kernel ``f(omega) g(omega') * matrix``."""
        f = np.asarray(f, dtype=complex)
        g = np.asarray(g, dtype=complex)
        mat = np.eye(1) if matrix is None else np.asarray(matrix, dtype=complex)
        m = mat.shape[0]
        u = f[:, None, None] * mat[None, :, :]
        v = np.broadcast_to(g[:, None, None] * np.eye(m)[None, :, :], (len(g), m, m)).copy()
        return cls(u, v)

    @property
    def rank(self) -> int:
        return self.u.shape[2]

    def dense(self) -> np.ndarray:
        return np.einsum("imr,jrn->ijmn", self.u, self.v)

    def dagger_swap(self) -> "SeparableKernel":
        """Kernel ``K(omega', omega)^dagger`` as a separable kernel."""
        return SeparableKernel(np.conj(np.swapaxes(self.v, 1, 2)), np.conj(np.swapaxes(self.u, 1, 2)))

    def scaled(self, c) -> "SeparableKernel":
        return SeparableKernel(c * self.u, self.v)

    def phased(self, left, right) -> "SeparableKernel":
        """Multiply by ``left(omega) * right(omega')`` (scalar profiles)."""
        return SeparableKernel(self.u * left[:, None, None], self.v * right[:, None, None])


Kernel = Union[None, np.ndarray, SeparableKernel]


def _dense(kernel: Kernel) -> Optional[np.ndarray]:
    if kernel is None:
        return None
    if isinstance(kernel, SeparableKernel):
        return kernel.dense()
    return kernel


def _add_kernels(a: Kernel, b: Kernel) -> Kernel:
    if a is None:
        return b
    if b is None:
        return a
    if isinstance(a, SeparableKernel) and isinstance(b, SeparableKernel):
        return SeparableKernel(np.concatenate([a.u, b.u], axis=2), np.concatenate([a.v, b.v], axis=1))
    return _dense(a) + _dense(b)


def _scale_kernel(k: Kernel, c) -> Kernel:
    if k is None:
        return None
    if isinstance(k, SeparableKernel):
        return k.scaled(c)
    return c * k


@dataclass(frozen=True, eq=False)
class _Blocks:
    grid: SpectrumGrid
    bb: np.ndarray
    cc_diag: np.ndarray
    cross_lo: Optional[np.ndarray] = None
    cross_ol: Optional[np.ndarray] = None
    cc_full: Kernel = None

    def __post_init__(self):
        k = self.grid.size
        bb = np.asarray(self.bb, dtype=complex)
        m = bb.shape[0]
        if bb.shape != (m, m):
            raise ValueError("bb must be square")
        cd = np.asarray(self.cc_diag, dtype=complex)
        if cd.shape != (k, m, m):
            raise ValueError(f"cc_diag must have shape {(k, m, m)}, got {cd.shape}")
        object.__setattr__(self, "bb", bb)
        object.__setattr__(self, "cc_diag", cd)
        for name in ("cross_lo", "cross_ol"):
            val = getattr(self, name)
            if val is not None:
                val = np.asarray(val, dtype=complex)
                if val.shape != (k, m, m):
                    raise ValueError(f"{name} must have shape {(k, m, m)}")
                object.__setattr__(self, name, val)
        full = self.cc_full
        if full is not None and not isinstance(full, SeparableKernel):
            full = np.asarray(full, dtype=complex)
            if full.shape != (k, k, m, m):
                raise ValueError(f"dense cc_full must have shape {(k, k, m, m)}")
            object.__setattr__(self, "cc_full", full)
        elif isinstance(full, SeparableKernel) and (full.u.shape[:2] != (k, m) or full.v.shape[2] != m):
            raise ValueError("separable cc_full does not match grid/degeneracy")

    @property
    def degeneracy(self) -> int:
        return self.bb.shape[0]

    @property
    def has_cross(self) -> bool:
        return self.cross_lo is not None or self.cross_ol is not None

    @property
    def is_diagonal(self) -> bool:
        return not self.has_cross and self.cc_full is None

    def _zeros_k(self):
        return np.zeros_like(self.cc_diag)

    def lo(self):
        return self._zeros_k() if self.cross_lo is None else self.cross_lo

    def ol(self):
        return self._zeros_k() if self.cross_ol is None else self.cross_ol

    def dense_full(self) -> np.ndarray:
        full = _dense(self.cc_full)
        if full is None:
            k, m = self.grid.size, self.degeneracy
            return np.zeros((k, k, m, m), dtype=complex)
        return full

    def _check_compatible(self, other):
        if not self.grid.same_as(other.grid):
            raise ValueError("grid mismatch")
        if self.degeneracy != other.degeneracy:
            raise ValueError("degeneracy mismatch")

    def _combine(self, other, a, b):
        self._check_compatible(other)

        def lin(x, y):
            if x is None and y is None:
                return None
            x = self._zeros_k() if x is None else x
            y = self._zeros_k() if y is None else y
            return a * x + b * y

        return replace(
            self,
            bb=a * self.bb + b * other.bb,
            cc_diag=a * self.cc_diag + b * other.cc_diag,
            cross_lo=lin(self.cross_lo, other.cross_lo),
            cross_ol=lin(self.cross_ol, other.cross_ol),
            cc_full=_add_kernels(_scale_kernel(self.cc_full, a), _scale_kernel(other.cc_full, b)),
        )

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def scaled(self, c):
        return replace(
            self,
            bb=c * self.bb,
            cc_diag=c * self.cc_diag,
            cross_lo=None if self.cross_lo is None else c * self.cross_lo,
            cross_ol=None if self.cross_ol is None else c * self.cross_ol,
            cc_full=_scale_kernel(self.cc_full, c),
        )

    def __mul__(self, c):
        return self.scaled(c)

    __rmul__ = __mul__

    def hermiticity_residual(self) -> float:
        res = [
            np.max(np.abs(self.bb - self.bb.conj().T), initial=0.0),
            np.max(np.abs(self.cc_diag - np.conj(np.swapaxes(self.cc_diag, 1, 2))), initial=0.0),
            np.max(np.abs(self.ol() - np.conj(np.swapaxes(self.lo(), 1, 2))), initial=0.0),
        ]
        if self.cc_full is not None:
            full = self.dense_full()
            swapped = np.conj(np.transpose(full, (1, 0, 3, 2)))
            res.append(np.max(np.abs(full - swapped)))
        return float(max(res))


@dataclass(frozen=True, eq=False)
class Observable(_Blocks):
    """Self-adjoint element of the observable space, sampled on a grid."""


@dataclass(frozen=True, eq=False)
class StateFunctional(_Blocks):
    """Linear functional on observables with unit total probability."""

    def diagonal_profile(self) -> np.ndarray:
        """Real diagonal ``rho(omega)_{mm}``, shape (K, M)."""
        return np.real(np.diagonal(self.cc_diag, axis1=1, axis2=2))


def zeros(grid: SpectrumGrid, degeneracy: int = 1, cls=Observable):
    m = degeneracy
    return cls(grid, np.zeros((m, m)), np.zeros((grid.size, m, m)))


def make_identity(grid: SpectrumGrid, csco: CscoSpec | None = None) -> Observable:
    """Identity: unit bound block and unit energy-diagonal block at every node."""
    m = 1 if csco is None else csco.degeneracy
    eye = np.eye(m)
    return Observable(grid, eye, np.broadcast_to(eye, (grid.size, m, m)).copy())


def energy_function(grid: SpectrumGrid, csco: CscoSpec | None, f) -> Observable:
    """Observable ``f(H)``: diagonal with ``f(omega)`` on every label.

    The bound block gets ``f(omega_0)`` when the spectrum has a bound state
    and is zero otherwise.
    """
    m = 1 if csco is None else csco.degeneracy
    eye = np.eye(m)
    vals = np.asarray(f(grid.nodes), dtype=complex)
    bb = np.zeros((m, m))
    if csco is not None and csco.has_bound:
        bb = complex(f(np.array(csco.bound_energy))) * eye
    return Observable(grid, bb, vals[:, None, None] * eye[None])


def hamiltonian(grid: SpectrumGrid, csco: CscoSpec | None = None) -> Observable:
    return energy_function(grid, csco, lambda w: w)


def boltzmann_operator(grid: SpectrumGrid, csco: CscoSpec | None, beta: float) -> Observable:
    """``exp(-beta H)``."""
    return energy_function(grid, csco, lambda w: np.exp(-beta * w))


def pair_complex(rho: StateFunctional, obs: _Blocks) -> complex:
    """Full complex value of ``(rho|O)``."""
    rho._check_compatible(obs)
    w = rho.grid.weights
    total = np.sum(np.conj(rho.bb) * obs.bb)
    total += np.einsum("k,kmn,kmn->", w, np.conj(rho.cc_diag), obs.cc_diag)
    if rho.cross_lo is not None and obs.cross_lo is not None:
        total += np.einsum("k,kmn,kmn->", w, np.conj(rho.cross_lo), obs.cross_lo)
    if rho.cross_ol is not None and obs.cross_ol is not None:
        total += np.einsum("k,kmn,kmn->", w, np.conj(rho.cross_ol), obs.cross_ol)
    if rho.cc_full is not None and obs.cc_full is not None:
        total += _pair_full(w, rho.cc_full, obs.cc_full)
    return complex(total)


def _pair_full(w, a: Kernel, b: Kernel) -> complex:
    if isinstance(a, SeparableKernel) and isinstance(b, SeparableKernel):
        left = np.einsum("i,imr,ims->mrs", w, np.conj(a.u), b.u)
        right = np.einsum("j,jrn,jsn->nrs", w, np.conj(a.v), b.v)
        return np.einsum("mrs,nrs->", left, right)
    return np.einsum("i,j,ijmn,ijmn->", w, w, np.conj(_dense(a)), _dense(b))


def pair(rho: StateFunctional, obs: _Blocks) -> float:
    """Mean value ``(rho|O)``; the (tiny) imaginary residual is dropped.

    Use :func:`pair_complex` to inspect the residual.
    """
    return pair_complex(rho, obs).real


def compose(a: Observable, b: Observable) -> Observable:
    """Operator product ``A B`` on the continuum (plus the bound block).

    Cross blocks between the bound state and the continuum are not
    supported here and raise ``ValueError``.
    """
    a._check_compatible(b)
    if a.has_cross or b.has_cross:
        raise ValueError("compose does not support bound-continuum cross blocks")
    w = a.grid.weights
    bb = a.bb @ b.bb
    diag = a.cc_diag @ b.cc_diag
    fa, fb = a.cc_full, b.cc_full
    full: Kernel = None
    if fa is None and fb is None:
        full = None
    elif _all_separable(fa, fb):
        full = _compose_separable(w, a.cc_diag, fa, b.cc_diag, fb)
    else:
        da, db = _dense(fa), _dense(fb)
        full = 0
        if da is not None and db is not None:
            full = full + np.einsum("ijmn,j,jkno->ikmo", da, w, db)
        if db is not None:
            full = full + np.einsum("imn,ikno->ikmo", a.cc_diag, db)
        if da is not None:
            full = full + np.einsum("ikmn,kno->ikmo", da, b.cc_diag)
    return Observable(a.grid, bb, diag, cc_full=full)


def _all_separable(*ks) -> bool:
    return all(k is None or isinstance(k, SeparableKernel) for k in ks)


def _compose_separable(w, da, fa, db, fb) -> SeparableKernel:
    us, vs = [], []
    if fb is not None:
        left = da @ fb.u  # A_diag(omega) U_B(omega)
        if fa is not None:
            mid = np.einsum("j,jrm,jms->rs", w, fa.v, fb.u)
            left = left + fa.u @ mid
        us.append(left)
        vs.append(fb.v)
    if fa is not None:
        us.append(fa.u)
        vs.append(fa.v @ db)
    return SeparableKernel(np.concatenate(us, axis=2), np.concatenate(vs, axis=1))


def op_trace(a: _Blocks) -> complex:
    """Generalized trace ``(I|A) = sum_m A(omega_0)_mm + int sum_m A(omega)_mm``."""
    diag = np.trace(a.cc_diag, axis1=1, axis2=2)
    return complex(np.trace(a.bb) + np.dot(a.grid.weights, diag))


def kernel_trace(a: _Blocks, weight=None) -> complex:
    """Trace that also integrates the regular kernel along ``omega = omega'``.

    ``weight`` multiplies the integrand at each node (e.g. a Boltzmann
    factor).  The bound block is excluded.
    """
    w = a.grid.weights
    g = np.ones(a.grid.size) if weight is None else np.asarray(weight)
    total = np.dot(w * g, np.trace(a.cc_diag, axis1=1, axis2=2))
    if a.cc_full is not None:
        if isinstance(a.cc_full, SeparableKernel):
            diag = np.einsum("imr,irm->i", a.cc_full.u, a.cc_full.v)
        else:
            diag = np.einsum("iimm->i", a.cc_full)
        total += np.dot(w * g, diag)
    return complex(total)


@dataclass
class ValidationReport:
    hermiticity: float
    min_diagonal: float = np.nan
    normalization_deviation: float = np.nan
    min_eigenvalue: float = np.nan
    violations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "hermiticity": self.hermiticity,
            "min_diagonal": self.min_diagonal,
            "normalization_deviation": self.normalization_deviation,
            "min_eigenvalue": self.min_eigenvalue,
            "violations": list(self.violations),
            "warnings": list(self.warnings),
        }


def validate(x: _Blocks, tol: float = 1e-10) -> ValidationReport:
    """Invariant residuals of an observable or a state."""
    report = ValidationReport(hermiticity=x.hermiticity_residual())
    if report.hermiticity > tol:
        report.violations.append("hermiticity")
    if not isinstance(x, StateFunctional):
        return report
    diag = np.concatenate([np.diagonal(x.bb), np.diagonal(x.cc_diag, axis1=1, axis2=2).ravel()])
    report.min_diagonal = float(np.min(diag.real))
    if report.min_diagonal < -tol:
        report.violations.append("negative-diagonal")
    if np.max(np.abs(diag.imag)) > tol:
        report.violations.append("complex-diagonal")
    norm = pair(x, make_identity(x.grid, CscoSpec(degeneracy=x.degeneracy)))
    report.normalization_deviation = abs(norm - 1.0)
    if report.normalization_deviation > tol:
        report.violations.append("normalization")
    herm_diag = 0.5 * (x.cc_diag + np.conj(np.swapaxes(x.cc_diag, 1, 2)))
    eig = np.linalg.eigvalsh(herm_diag)
    eig_b = np.linalg.eigvalsh(0.5 * (x.bb + x.bb.conj().T))
    report.min_eigenvalue = float(min(eig.min(), eig_b.min()))
    if report.min_eigenvalue < -tol:
        report.warnings.append("diagonal block not positive semidefinite")
    return report


def as_state(obs: _Blocks) -> StateFunctional:
    return StateFunctional(obs.grid, obs.bb, obs.cc_diag, obs.cross_lo, obs.cross_ol, obs.cc_full)


def normalized(rho: StateFunctional) -> StateFunctional:
    norm = pair(rho, make_identity(rho.grid, CscoSpec(degeneracy=rho.degeneracy)))
    if norm <= 0:
        raise InvalidState("state has non-positive total probability")
    return rho.scaled(1.0 / norm)


def random_hermitian_blocks(rng, k, m, psd=False):
    """K Hermitian M x M matrices (positive semidefinite when ``psd``)."""
    z = rng.normal(size=(k, m, m)) + 1j * rng.normal(size=(k, m, m))
    if psd:
        return z @ np.conj(np.swapaxes(z, 1, 2))
    return 0.5 * (z + np.conj(np.swapaxes(z, 1, 2)))


def random_observable(grid: SpectrumGrid, degeneracy: int, rng, rank: int = 2, dense: bool = False) -> Observable:
    """Random self-adjoint observable with smooth separable regular kernel."""
    k, m = grid.size, degeneracy
    x = grid.nodes / grid.omega_max
    bb = random_hermitian_blocks(rng, 1, m)[0]
    base = random_hermitian_blocks(rng, 2, m)
    diag = base[0][None] + np.cos(np.pi * x)[:, None, None] * base[1][None]
    us = []
    for _ in range(rank):
        c = rng.normal(size=3) + 1j * rng.normal(size=3)
        prof = c[0] + c[1] * x + c[2] * np.sin(2 * np.pi * x)
        mat = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
        us.append(prof[:, None, None] * mat[None])
    u = np.stack(us, axis=-1).reshape(k, m, m * rank)  # (K, M, M*rank)
    v = np.conj(np.swapaxes(u, 1, 2))  # U(omega')^dagger
    full = SeparableKernel(u, v)
    return Observable(grid, bb, diag, cc_full=full.dense() if dense else full)
