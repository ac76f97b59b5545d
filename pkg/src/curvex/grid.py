"""Staggered grids and the discrete operators living on them.

Storage conventions
-------------------
* Node fields are plain arrays of shape ``grid.dims`` (row-major, the
  periodic angle axis, when present, innermost).
* Edge fields are flat 1D arrays of length ``grid.n_edges``: the axis-0
  block first, then axis 1, and so on. Use :meth:`Grid.split` to obtain
  per-axis views. The half-integer edge ``(i + 1/2, j)`` joining nodes
  ``(i, j)`` and ``(i + 1, j)`` is stored at integer index ``i`` of the
  axis-0 block. A non-periodic axis of length ``n`` carries ``n - 1`` edges;
  the periodic axis carries ``n`` edges, edge ``k`` joining ``k`` and
  ``k + 1 (mod n)``.
* Dual fields are arrays of shape ``(grid.ndim, *grid.dims)``.

Edges outside the domain are implicitly zero, which gives the no-flux
boundary condition for :meth:`Grid.div_adjoint`.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import ConvergenceError

AVERAGE = "average"
FORWARD = "forward"
A_MODES = (AVERAGE, FORWARD)


def _sl(axis, start, stop, ndim):
    idx = [slice(None)] * ndim
    idx[axis] = slice(start, stop)
    return tuple(idx)


@dataclass(frozen=True)
class Grid:
    """Rectangular node grid, optionally with a depth axis or a periodic angle axis.

    Parameters
    ----------
    n_rows, n_cols : int
        Planar dimensions (axis 0 and axis 1).
    n_depth : int, optional
        Third non-periodic axis (volume mode).
    n_angles : int, optional
        Third periodic axis (lifted roto-translation mode).
    """

    n_rows: int
    n_cols: int
    n_depth: int | None = None
    n_angles: int | None = None

    def __post_init__(self):
        if self.n_depth is not None and self.n_angles is not None:
            raise ValueError("a grid is either a volume or lifted, not both")
        for name in ("n_rows", "n_cols", "n_depth", "n_angles"):
            value = getattr(self, name)
            if value is None:
                continue
            if int(value) != value or value < 2:
                raise ValueError(f"{name} must be an integer >= 2, got {value!r}")

    @classmethod
    def from_dims(cls, dims, periodic_last=False):
        dims = tuple(int(d) for d in dims)
        if len(dims) == 2:
            if periodic_last:
                raise ValueError("a 2D grid has no periodic axis")
            return cls(*dims)
        if len(dims) == 3:
            if periodic_last:
                return cls(dims[0], dims[1], n_angles=dims[2])
            return cls(dims[0], dims[1], n_depth=dims[2])
        raise ValueError(f"grids are 2D or 3D, got dims={dims}")

    @property
    def dims(self):
        extra = self.n_depth if self.n_depth is not None else self.n_angles
        if extra is None:
            return (self.n_rows, self.n_cols)
        return (self.n_rows, self.n_cols, extra)

    @property
    def ndim(self):
        return len(self.dims)

    @property
    def lifted(self):
        return self.n_angles is not None

    @property
    def mode(self):
        if self.lifted:
            return "lifted"
        return "volume" if self.n_depth is not None else "planar"

    @property
    def periodic(self):
        return tuple(self.lifted and a == 2 for a in range(self.ndim))

    @property
    def planar(self):
        """The underlying image grid (drops depth/angle axis)."""
        return Grid(self.n_rows, self.n_cols)

    @property
    def n_nodes(self):
        return int(np.prod(self.dims))

    @cached_property
    def edge_shapes(self):
        shapes = []
        for a, n in enumerate(self.dims):
            shape = list(self.dims)
            shape[a] = n if self.periodic[a] else n - 1
            shapes.append(tuple(shape))
        return tuple(shapes)

    @cached_property
    def edge_offsets(self):
        sizes = [int(np.prod(s)) for s in self.edge_shapes]
        return tuple(np.concatenate([[0], np.cumsum(sizes)]).tolist())

    @property
    def n_edges(self):
        return self.edge_offsets[-1]

    # ------------------------------------------------------------------
    # field helpers

    def split(self, z):
        """Per-axis views into a flat edge field."""
        off = self.edge_offsets
        return [z[off[a]:off[a + 1]].reshape(self.edge_shapes[a]) for a in range(self.ndim)]

    def join(self, parts):
        return np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts])

    def zeros_nodes(self):
        return np.zeros(self.dims)

    def zeros_edges(self):
        return np.zeros(self.n_edges)

    def zeros_dual(self):
        return np.zeros((self.ndim,) + self.dims)

    def check_nodes(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != self.dims:
            raise ValueError(f"node field has shape {u.shape}, grid expects {self.dims}")
        return u

    def check_edges(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape != (self.n_edges,):
            raise ValueError(f"edge field has shape {z.shape}, grid expects ({self.n_edges},)")
        return z

    def check_dual(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape != (self.ndim,) + self.dims:
            raise ValueError(f"dual field has shape {p.shape}, grid expects {(self.ndim,) + self.dims}")
        return p

    # ------------------------------------------------------------------
    # differential operators

    def grad(self, u):
        """Forward differences ``D u`` on the staggered edges."""
        u = self.check_nodes(u)
        out = self.zeros_edges()
        nd = self.ndim
        for a, za in enumerate(self.split(out)):
            if self.periodic[a]:
                np.subtract(np.roll(u, -1, axis=a), u, out=za)
            else:
                np.subtract(u[_sl(a, 1, None, nd)], u[_sl(a, None, -1, nd)], out=za)
        return out

    def div_adjoint(self, z):
        """``D^* z``: minus the divergence, with zero flux through the boundary."""
        z = self.check_edges(z)
        out = self.zeros_nodes()
        nd = self.ndim
        for a, za in enumerate(self.split(z)):
            if self.periodic[a]:
                out += np.roll(za, 1, axis=a) - za
            else:
                out[_sl(a, None, -1, nd)] -= za
                out[_sl(a, 1, None, nd)] += za
        return out

    def average(self, z, mode=AVERAGE):
        """Node-centred vector field ``A z``.

        ``mode="average"`` takes, per axis, the mean of the two incident
        edges (missing boundary edges count as zero). ``mode="forward"``
        takes the edge ahead of the node, i.e. the forward stencil.
        """
        z = self.check_edges(z)
        out = self.zeros_dual()
        nd = self.ndim
        for a, za in enumerate(self.split(z)):
            pa = out[a]
            if mode == AVERAGE:
                if self.periodic[a]:
                    pa += 0.5 * (za + np.roll(za, 1, axis=a))
                else:
                    pa[_sl(a, None, -1, nd)] += 0.5 * za
                    pa[_sl(a, 1, None, nd)] += 0.5 * za
            elif mode == FORWARD:
                if self.periodic[a]:
                    pa[...] = za
                else:
                    pa[_sl(a, None, -1, nd)] = za
            else:
                raise ValueError(f"unknown averaging mode {mode!r}")
        return out

    def average_adjoint(self, p, mode=AVERAGE):
        """``A^* p``, the exact adjoint of :meth:`average`."""
        p = self.check_dual(p)
        out = self.zeros_edges()
        nd = self.ndim
        for a, za in enumerate(self.split(out)):
            pa = p[a]
            if mode == AVERAGE:
                if self.periodic[a]:
                    za[...] = 0.5 * (pa + np.roll(pa, -1, axis=a))
                else:
                    za[...] = 0.5 * (pa[_sl(a, None, -1, nd)] + pa[_sl(a, 1, None, nd)])
            elif mode == FORWARD:
                if self.periodic[a]:
                    za[...] = pa
                else:
                    za[...] = pa[_sl(a, None, -1, nd)]
            else:
                raise ValueError(f"unknown averaging mode {mode!r}")
        return out

    def operator_norm(self, mode=AVERAGE, margin=0.01, rtol=1e-6, max_iter=20000, seed=0):
        return operator_norm(self, mode, margin=margin, rtol=rtol, max_iter=max_iter, seed=seed)


def operator_norm(grid, mode=AVERAGE, margin=0.01, rtol=1e-6, max_iter=20000, seed=0):
    """Estimate ``||A||`` by power iteration on ``A^* A``.

    The Rayleigh quotient converges from below, so the returned value is
    inflated by ``margin`` (relative) to serve as a safe step-size bound.

    Raises
    ------
    ConvergenceError
        If the relative change of the estimate stays above ``rtol`` after
        ``max_iter`` iterations.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(grid.n_edges)
    x /= np.linalg.norm(x)
    estimate = 0.0
    for _ in range(max_iter):
        y = grid.average_adjoint(grid.average(x, mode), mode)
        new = float(np.dot(x, y))
        norm_y = np.linalg.norm(y)
        if norm_y == 0.0:
            return 0.0
        x = y / norm_y
        if abs(new - estimate) <= rtol * abs(new):
            return float(np.sqrt(new)) * (1.0 + margin)
        estimate = new
    raise ConvergenceError(
        f"power iteration for ||A|| ({mode}) did not reach rtol={rtol} in {max_iter} iterations; "
        f"last estimate {np.sqrt(estimate):.8g}"
    )
