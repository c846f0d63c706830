"""Periodic phase-space grids with Fourier-spectral calculus.

The hybrid coordinate space is a flat torus: one classical degree of
freedom z = (q, p) plus either a periodic quantum coordinate x
("continuum" mode) or a finite set of quantum levels ("finite_dim"
mode).  Arrays are laid out C-order with axes (q, p[, x]), the quantum
axis fastest; finite-dim wavefunctions carry the level index last and
matrix-valued fields carry two trailing level axes.

All derivatives are Fourier collocation on periodic axes.  The odd
derivative zeroes the Nyquist mode, which makes the real-space
differentiation matrix exactly antisymmetric; summation by parts and
vanishing bracket integrals then hold to rounding, not just to
truncation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

CONTINUUM = "continuum"
FINITE_DIM = "finite_dim"

_AXIS_INDEX = {"q": 0, "p": 1, "x": 2}

# scipy.fft worker count used by every transform; 1 keeps runs
# bit-reproducible by default, see set_num_threads().
_workers = 1


def set_num_threads(n: int) -> None:
    """Set FFT worker count (0 = all cores)."""
    global _workers
    import os

    _workers = os.cpu_count() if n == 0 else max(1, int(n))


def get_num_threads() -> int:
    return _workers


class GridError(ValueError):
    """Invalid grid construction or a field/grid mismatch."""


def _wavenumbers(n: int, length: float, zero_nyquist: bool) -> np.ndarray:
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)
    if zero_nyquist and n % 2 == 0:
        k[n // 2] = 0.0
    return k


@dataclass(frozen=True)
class PhaseGrid:
    """Discretized hybrid coordinate space (q, p[, x])."""

    nq: int
    np_: int
    nx: int  # quantum grid size (continuum) or number of levels (finite_dim)
    Lq: float = 2.0 * np.pi
    Lp: float = 4.0 * np.pi
    Lx: float = 2.0 * np.pi
    mode: str = FINITE_DIM
    _k: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.mode not in (CONTINUUM, FINITE_DIM):
            raise GridError(f"unknown mode {self.mode!r}")
        for name, n in (("nq", self.nq), ("np", self.np_)):
            if n < 4 or n % 2:
                raise GridError(f"{name}={n}: grid sizes must be even and >= 4")
        if self.mode == CONTINUUM and (self.nx < 4 or self.nx % 2):
            raise GridError(f"nx={self.nx}: grid sizes must be even and >= 4")
        if self.mode == FINITE_DIM and self.nx < 1:
            raise GridError(f"n_levels={self.nx}: need at least one level")
        lengths = [("Lq", self.Lq), ("Lp", self.Lp)]
        if self.mode == CONTINUUM:
            lengths.append(("Lx", self.Lx))
        for name, L in lengths:
            if not L > 0:
                raise GridError(f"{name}={L}: domain lengths must be positive")

    # -- coordinates ---------------------------------------------------

    @property
    def hq(self) -> float:
        return self.Lq / self.nq

    @property
    def hp(self) -> float:
        return self.Lp / self.np_

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def q(self) -> np.ndarray:
        return -0.5 * self.Lq + self.hq * np.arange(self.nq)

    @property
    def p(self) -> np.ndarray:
        return -0.5 * self.Lp + self.hp * np.arange(self.np_)

    @property
    def x(self) -> np.ndarray:
        if self.mode != CONTINUUM:
            raise GridError("x coordinate only exists in continuum mode")
        return -0.5 * self.Lx + self.hx * np.arange(self.nx)

    @property
    def grid_ndim(self) -> int:
        return 3 if self.mode == CONTINUUM else 2

    @property
    def field_shape(self) -> tuple:
        """Shape of a scalar field over the integration domain."""
        if self.mode == CONTINUUM:
            return (self.nq, self.np_, self.nx)
        return (self.nq, self.np_)

    @property
    def state_shape(self) -> tuple:
        """Shape of a hybrid wavefunction array."""
        return (self.nq, self.np_, self.nx)

    @property
    def cell_volume(self) -> float:
        w = self.hq * self.hp
        if self.mode == CONTINUUM:
            w *= self.hx
        return w

    def q_bc(self, ndim: int) -> np.ndarray:
        """q coordinate broadcast against an ndim-dimensional field."""
        return self.q.reshape((self.nq,) + (1,) * (ndim - 1))

    def p_bc(self, ndim: int) -> np.ndarray:
        return self.p.reshape((1, self.np_) + (1,) * (ndim - 2))

    def x_bc(self, ndim: int) -> np.ndarray:
        return self.x.reshape((1, 1, self.nx) + (1,) * (ndim - 3))

    # -- spectral calculus ---------------------------------------------

    def wavenumbers(self, axis: str, zero_nyquist: bool = True) -> np.ndarray:
        key = (axis, zero_nyquist)
        if key not in self._k:
            if axis == "q":
                k = _wavenumbers(self.nq, self.Lq, zero_nyquist)
            elif axis == "p":
                k = _wavenumbers(self.np_, self.Lp, zero_nyquist)
            elif axis == "x":
                if self.mode != CONTINUUM:
                    raise GridError("axis 'x' is not differentiable in finite_dim mode")
                k = _wavenumbers(self.nx, self.Lx, zero_nyquist)
            else:
                raise GridError(f"unknown axis {axis!r}")
            self._k[key] = k
        return self._k[key]

    def _check_field(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        if f.shape[0] != self.nq or f.ndim < 2 or f.shape[1] != self.np_:
            raise GridError(f"field shape {f.shape} does not match grid {self.field_shape}")
        return f

    def deriv(self, f: np.ndarray, axis: str) -> np.ndarray:
        """Fourier-collocation derivative along a named axis.

        Exact for resolved trigonometric modes.  Real input yields real
        output (the Nyquist mode of the odd-derivative multiplier is
        zeroed).
        """
        f = self._check_field(f)
        ax = _AXIS_INDEX[axis]
        if axis == "x" and self.mode != CONTINUUM:
            raise GridError("axis 'x' is not differentiable in finite_dim mode")
        k = self.wavenumbers(axis)
        mult = (1j * k).reshape((-1,) + (1,) * (f.ndim - 1 - ax))
        out = sfft.ifft(mult * sfft.fft(f, axis=ax, workers=_workers), axis=ax, workers=_workers)
        if not np.iscomplexobj(f):
            return out.real
        return out

    def laplace_x(self, f: np.ndarray) -> np.ndarray:
        """Second derivative along x via the -k^2 Fourier multiplier."""
        if self.mode != CONTINUUM:
            raise GridError("x-Laplacian requires continuum mode")
        f = self._check_field(f)
        k = self.wavenumbers("x", zero_nyquist=False)
        mult = (-(k**2)).reshape((-1,) + (1,) * (f.ndim - 3))
        out = sfft.ifft(mult * sfft.fft(f, axis=2, workers=_workers), axis=2, workers=_workers)
        if not np.iscomplexobj(f):
            return out.real
        return out

    # -- quadrature ----------------------------------------------------

    def integrate(self, f: np.ndarray):
        """Quadrature over the full grid (rectangle rule, spectrally
        accurate for periodic integrands).  Trailing non-grid axes are
        preserved, so matrix-valued fields integrate to matrices.
        Summation order is fixed by the C layout, making the reduction
        bit-reproducible.
        """
        f = self._check_field(f)
        axes = tuple(range(self.grid_ndim))
        return f.sum(axis=axes) * self.cell_volume

    def integrate_z(self, f: np.ndarray):
        """Quadrature over the classical (q, p) axes only."""
        f = self._check_field(f)
        return f.sum(axis=(0, 1)) * (self.hq * self.hp)

    def integrate_x(self, f: np.ndarray):
        """Quadrature over the quantum axis (continuum: weighted; finite
        levels: plain component sum)."""
        f = self._check_field(f)
        if self.mode == CONTINUUM:
            return f.sum(axis=2) * self.hx
        return f.sum(axis=2)

    def boundary_mass(self, f: np.ndarray) -> float:
        """Fraction of a nonnegative field's total mass sitting in the two
        outermost p-layers.  Large values flag states that violate the
        p-decay assumption behind the pointwise treatment of the
        non-periodic weight p."""
        f = self._check_field(f)
        total = float(f.sum())
        if total <= 0.0:
            return 0.0
        edge = float(f[:, 0].sum() + f[:, -1].sum())
        return edge / total

    # -- algebra ---------------------------------------------------------

    def poisson_bracket(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Canonical bracket {a, b} = dq(a) dp(b) - dp(a) dq(b).

        Pointwise products are matrix products when both operands carry
        trailing level axes, so the bracket of matrix-valued symbols is
        the noncommutative one.  For scalar operands the expression is
        exactly antisymmetric in floating point.
        """
        a = self._check_field(a)
        b = self._check_field(b)
        daq, dap = self.deriv(a, "q"), self.deriv(a, "p")
        dbq, dbp = self.deriv(b, "q"), self.deriv(b, "p")
        return self._mul(daq, dbp) - self._mul(dap, dbq)

    def _mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        nd = self.grid_ndim
        a_mat = a.ndim >= nd + 2
        b_mat = b.ndim >= nd + 2
        if a_mat and b_mat:
            return a @ b
        if a_mat and not b_mat:
            return a * b[..., None, None]
        if b_mat and not a_mat:
            return a[..., None, None] * b
        return a * b


def symplectic_matrix() -> np.ndarray:
    """2x2 matrix J with J @ (dq, dp) rotating covectors to vectors;
    J @ J = -I and Omega(e_q, e_p) = +1 in this orientation."""
    return np.array([[0.0, 1.0], [-1.0, 0.0]])


def canonical_one_form(grid: PhaseGrid):
    """Components (p, 0) of the canonical one-form on (q, p), broadcast
    against scalar fields."""
    nd = grid.grid_ndim
    return grid.p_bc(nd), np.zeros(())
