"""Fourier pseudo-spectral grids and constant-coefficient operators.

Fields are plain ``numpy`` arrays whose last ``dims`` axes are spatial and
stored with x fastest, i.e. a 3D field has shape ``(nz, ny, nx)``. Any
leading axes are treated as batch axes, so a vector field is an array of
shape ``(dims, *grid.shape)`` with component 0 along x.

Periodic axes use the collocation points ``x_j = j L / n``. No-flux axes use
the vertex points ``x_j = j L / (n - 1)`` (both walls included) and are
handled by mirror extension to a periodic domain of length ``2 L`` sampled
at ``2 n - 2`` points, so every operator runs through one FFT code path.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = ["BC", "Grid", "GridMismatchError"]


class BC(str, Enum):
    PERIODIC = "periodic"
    NOFLUX = "noflux"


class GridMismatchError(ValueError):
    """Raised when an array does not live on the grid it is combined with."""


@dataclass(frozen=True)
class Grid:
    """Rectangular collocation grid.

    Parameters
    ----------
    n : tuple of int
        Points per axis, ordered (x, y[, z]). Each must be even and >= 4.
    length : tuple of float
        Domain length per axis.
    bc : tuple of BC, optional
        Boundary condition per axis; periodic everywhere by default.
    dealias : bool
        Apply a 2/3-rule filter to the anisotropic flux before taking its
        divergence. Off by default.
    """

    n: tuple[int, ...]
    length: tuple[float, ...]
    bc: tuple[BC, ...] | None = None
    dealias: bool = False

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        length = tuple(float(v) for v in self.length)
        bc = self.bc if self.bc is not None else (BC.PERIODIC,) * len(n)
        bc = tuple(BC(b) for b in bc)
        if len(n) not in (2, 3):
            raise ValueError(f"grid must be 2D or 3D, got {len(n)} axes")
        if not len(n) == len(length) == len(bc):
            raise ValueError("n, length and bc must have one entry per axis")
        for a, (na, la) in enumerate(zip(n, length)):
            if na < 4 or na % 2:
                raise ValueError(f"n[{a}] must be even and >= 4, got {na}")
            if not la > 0:
                raise ValueError(f"length[{a}] must be positive, got {la}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "length", length)
        object.__setattr__(self, "bc", bc)

    # ------------------------------------------------------------------
    # geometry
    # ------------------------------------------------------------------
    @property
    def dims(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(reversed(self.n))

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @property
    def has_noflux(self) -> bool:
        return any(b is BC.NOFLUX for b in self.bc)

    @property
    def volume(self) -> float:
        return float(np.prod(self.length))

    def _array_axis(self, axis: int) -> int:
        """Negative array axis holding spatial axis ``axis`` (0 = x)."""
        if not 0 <= axis < self.dims:
            raise ValueError(f"axis {axis} out of range for a {self.dims}D grid")
        return -(axis + 1)

    def spacing(self, axis: int) -> float:
        if self.bc[axis] is BC.NOFLUX:
            return self.length[axis] / (self.n[axis] - 1)
        return self.length[axis] / self.n[axis]

    def coords(self, axis: int) -> np.ndarray:
        """1D coordinate array of ``axis``, shaped to broadcast against fields."""
        x = np.arange(self.n[axis]) * self.spacing(axis)
        shape = [1] * self.dims
        shape[self.dims - 1 - axis] = self.n[axis]
        return x.reshape(shape)

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Full coordinate arrays ``(X, Y[, Z])`` of field shape."""
        return tuple(np.broadcast_to(self.coords(a), self.shape) for a in range(self.dims))

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights; uniform cells on periodic axes, trapezoid on no-flux axes."""
        w = np.ones(self.shape)
        for a in range(self.dims):
            wa = np.full(self.n[a], self.spacing(a))
            if self.bc[a] is BC.NOFLUX:
                wa[0] *= 0.5
                wa[-1] *= 0.5
            shape = [1] * self.dims
            shape[self.dims - 1 - a] = self.n[a]
            w = w * wa.reshape(shape)
        return w

    def integrate(self, f: np.ndarray) -> np.ndarray | float:
        axes = tuple(range(-self.dims, 0))
        return np.sum(f * self.weights, axis=axes)

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(np.sum(f * g * self.weights))

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.inner(f, f)))

    def check(self, f: np.ndarray, name: str = "field") -> np.ndarray:
        if f.shape[-self.dims:] != self.shape:
            raise GridMismatchError(
                f"{name} has spatial shape {f.shape[-self.dims:]}, grid expects {self.shape}"
            )
        return f

    # ------------------------------------------------------------------
    # mirror extension
    # ------------------------------------------------------------------
    @cached_property
    def ext_shape(self) -> tuple[int, ...]:
        return tuple(
            2 * self.n[a] - 2 if self.bc[a] is BC.NOFLUX else self.n[a]
            for a in reversed(range(self.dims))
        )

    @staticmethod
    def _mirror(f: np.ndarray, ax: int, sign: float) -> np.ndarray:
        n = f.shape[ax]
        inner = np.flip(np.take(f, np.arange(1, n - 1), axis=ax), axis=ax)
        return np.concatenate([f, sign * inner], axis=ax)

    def _extend(self, f: np.ndarray, odd_axis: int | None = None) -> np.ndarray:
        if not self.has_noflux:
            return f
        for a in range(self.dims):
            if self.bc[a] is BC.NOFLUX:
                sign = -1.0 if a == odd_axis else 1.0
                f = self._mirror(f, self._array_axis(a), sign)
        return f

    def _restrict(self, f: np.ndarray) -> np.ndarray:
        if not self.has_noflux:
            return f
        index = [slice(None)] * f.ndim
        for a in range(self.dims):
            if self.bc[a] is BC.NOFLUX:
                index[f.ndim - 1 - a] = slice(0, self.n[a])
        return f[tuple(index)]

    def even_extend(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Mirror ``f`` evenly about both walls of no-flux ``axis``."""
        if self.bc[axis] is not BC.NOFLUX:
            raise ValueError(f"axis {axis} is periodic; even extension needs a no-flux axis")
        return self._mirror(self.check(f), self._array_axis(axis), 1.0)

    def restrict(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Inverse of :meth:`even_extend`: keep the original samples of ``axis``."""
        if self.bc[axis] is not BC.NOFLUX:
            raise ValueError(f"axis {axis} is periodic; nothing to restrict")
        ax = self._array_axis(axis)
        return np.take(f, np.arange(self.n[axis]), axis=ax)

    # ------------------------------------------------------------------
    # transforms and wavenumbers
    # ------------------------------------------------------------------
    @property
    def _fft_axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dims, 0))

    def fft(self, f: np.ndarray, odd_axis: int | None = None) -> np.ndarray:
        """Forward real FFT over the spatial axes (of the mirror extension)."""
        return sfft.rfftn(self._extend(f, odd_axis), axes=self._fft_axes)

    def ifft(self, fh: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`fft`, restricted back to the grid samples."""
        return self._restrict(sfft.irfftn(fh, s=self.ext_shape, axes=self._fft_axes))

    def _wavenumbers(self, zero_nyquist: bool) -> list[np.ndarray]:
        ks = []
        for a in range(self.dims):
            m = self.ext_shape[self.dims - 1 - a]
            period = 2 * self.length[a] if self.bc[a] is BC.NOFLUX else self.length[a]
            if a == 0:
                j = np.arange(m // 2 + 1, dtype=float)
            else:
                j = sfft.fftfreq(m, 1.0 / m)
            if zero_nyquist:
                j = np.where(np.abs(j) == m // 2, 0.0, j)
            shape = [1] * self.dims
            shape[self.dims - 1 - a] = j.size
            ks.append((2 * np.pi / period * j).reshape(shape))
        return ks

    @cached_property
    def k(self) -> list[np.ndarray]:
        """Wavenumbers per axis, broadcastable to the spectral array shape."""
        return self._wavenumbers(zero_nyquist=False)

    @cached_property
    def k_odd(self) -> list[np.ndarray]:
        """Wavenumbers used by first derivatives (Nyquist mode zeroed)."""
        return self._wavenumbers(zero_nyquist=True)

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(ka**2 for ka in self.k)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        mask = np.ones(1, dtype=bool)
        for a in range(self.dims):
            m = self.ext_shape[self.dims - 1 - a]
            period = 2 * self.length[a] if self.bc[a] is BC.NOFLUX else self.length[a]
            j = np.abs(self.k[a]) * period / (2 * np.pi)
            mask = mask & (j < m / 3.0)
        return mask

    # ------------------------------------------------------------------
    # differential operators
    # ------------------------------------------------------------------
    def gradient(self, f: np.ndarray) -> np.ndarray:
        """Spectral gradient; returns an array of shape ``(dims, *f.shape)``."""
        fh = self.fft(self.check(f))
        return np.stack([self.ifft(1j * self.k_odd[a] * fh) for a in range(self.dims)])

    def divergence(self, v: np.ndarray, dealias: bool | None = None) -> np.ndarray:
        """Spectral divergence of a vector field.

        On no-flux axes the normal component is odd about the walls, so it is
        mirrored with a sign flip along its own axis.
        """
        if v.shape[0] != self.dims:
            raise GridMismatchError(f"vector field has {v.shape[0]} components, grid is {self.dims}D")
        self.check(v, "vector field")
        acc = 0
        for a in range(self.dims):
            acc = acc + 1j * self.k_odd[a] * self.fft(v[a], odd_axis=a)
        if self.dealias if dealias is None else dealias:
            acc = acc * self.dealias_mask
        return self.ifft(acc)

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.ifft(-self.k2 * self.fft(self.check(f)))

    def solve_helmholtz(self, a: float, b: float, rhs: np.ndarray) -> np.ndarray:
        """Solve ``a f - b Laplacian(f) = rhs`` mode by mode."""
        if not a > 0:
            raise ValueError(f"helmholtz shift a must be positive, got {a}")
        if b < 0:
            raise ValueError(f"helmholtz coefficient b must be nonnegative, got {b}")
        return self.ifft(self.fft(self.check(rhs, "rhs")) / (a + b * self.k2))

    def h1_seminorm2(self, f: np.ndarray) -> float:
        """``<-Laplacian f, f>``, the discrete counterpart of ``||grad f||^2``."""
        return -self.inner(self.laplacian(f), f)
