"""Spectral inversion of the grid Laplacian ``D^* D`` and projection onto ``{D^* z = mu}``.

On a non-periodic axis the node Laplacian built from the staggered
differences is the Neumann matrix ``tridiag(-1, 2, -1)`` with ``1`` in both
corners. It is diagonalised by the orthonormal DCT-II (cosines even about
the half-sample boundary), eigenvalues ``2 - 2 cos(pi k / n)``. The periodic
angle axis uses the real FFT, eigenvalues ``2 - 2 cos(2 pi k / n)``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from .exceptions import IncompatibleDataError


class LaplacianSpectrum:
    """Precomputed eigenvalues of ``D^* D`` on one grid."""

    def __init__(self, grid):
        self.grid = grid
        dims = grid.dims
        self.fourier_axes = tuple(a for a in range(grid.ndim) if grid.periodic[a])
        self.cosine_axes = tuple(a for a in range(grid.ndim) if not grid.periodic[a])
        spectral_dims = list(dims)
        for a in self.fourier_axes:
            spectral_dims[a] = dims[a] // 2 + 1
        eig = np.zeros(spectral_dims)
        for a, n in enumerate(dims):
            k = np.arange(spectral_dims[a])
            if grid.periodic[a]:
                lam = 2.0 - 2.0 * np.cos(2.0 * np.pi * k / n)
            else:
                lam = 2.0 - 2.0 * np.cos(np.pi * k / n)
            shape = [1] * grid.ndim
            shape[a] = -1
            eig = eig + lam.reshape(shape)
        self.eigenvalues = eig
        inv = np.zeros_like(eig)
        nonzero = eig > 0
        inv[nonzero] = 1.0 / eig[nonzero]
        self.inverse = inv
        self.eigenvalues.setflags(write=False)
        self.inverse.setflags(write=False)

    def forward(self, u):
        v = sfft.dctn(u, type=2, axes=self.cosine_axes, norm="ortho")
        for a in self.fourier_axes:
            v = sfft.rfft(v, axis=a, norm="ortho")
        return v

    def inverse_transform(self, v):
        for a in self.fourier_axes:
            v = sfft.irfft(v, n=self.grid.dims[a], axis=a, norm="ortho")
        return sfft.idctn(v, type=2, axes=self.cosine_axes, norm="ortho")

    def apply_pinv(self, rhs):
        """Zero-mean solution of ``D^* D u = rhs`` (no compatibility check)."""
        return self.inverse_transform(self.forward(rhs) * self.inverse)


@lru_cache(maxsize=32)
def spectrum(grid):
    return LaplacianSpectrum(grid)


def _check_compatible(rhs, rtol=1e-9):
    total = float(rhs.sum())
    scale = float(np.abs(rhs).sum())
    if abs(total) > rtol * scale + 1e-300:
        raise IncompatibleDataError(
            f"right-hand side must have zero total mass; residual mass {total:.3e} "
            f"(tolerance {rtol * scale:.3e})"
        )


def solve_poisson(grid, rhs, check=True):
    """Return the zero-mean ``u`` with ``D^* D u = rhs``.

    Raises
    ------
    IncompatibleDataError
        If ``sum(rhs)`` exceeds ``1e-9 * ||rhs||_1``.
    """
    rhs = grid.check_nodes(rhs)
    if check:
        _check_compatible(rhs)
    return spectrum(grid).apply_pinv(rhs)


def project_divergence(grid, z, mu, check=True):
    """Euclidean projection of the edge field ``z`` onto ``{z : D^* z = mu}``.

    Computed as ``z + D (D^* D)^+ (mu - D^* z)``; the correction lies in
    the range of ``D``.
    """
    z = grid.check_edges(z)
    mu = grid.check_nodes(mu)
    if check:
        _check_compatible(mu)
    residual = mu - grid.div_adjoint(z)
    return z + grid.grad(spectrum(grid).apply_pinv(residual))


def feasible_field(grid, mu):
    """Minimum-norm edge field with ``D^* z = mu``."""
    return project_divergence(grid, grid.zeros_edges(), mu)


def project_range_grad(grid, w):
    """Orthogonal projection of an edge field onto ``range(D)``."""
    w = grid.check_edges(w)
    return grid.grad(spectrum(grid).apply_pinv(grid.div_adjoint(w)))
