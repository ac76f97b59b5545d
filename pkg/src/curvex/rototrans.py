"""Lifted position x orientation domain: Diracs, marginalisation and the lifted solve.

The lifted grid is ``N x M x K`` with a periodic angle axis, angle index
``k`` standing for ``theta_k = 2 pi k / K`` and the spatial direction
``(cos theta_k, sin theta_k)`` expressed in (axis 0, axis 1) components.
The lifted averaging operator averages the two incident edges on all three
axes, the angle axis included.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pdhg
from .diracs import DiracMass, dirac_field
from .energies import AVERAGE, AngleTable, EnergySpec
from .grid import Grid
from .tracing import trace_curves

DEFAULT_ANGLES = 30


def lifted_grid(n_rows, n_cols, n_angles=DEFAULT_ANGLES):
    if n_angles < 4:
        raise ValueError("at least 4 angles are required")
    return Grid(n_rows, n_cols, n_angles=n_angles)


def lifted_dirac(grid, x, k, sign):
    """Node field with ``sign`` at lifted node ``(x, k)``."""
    if not grid.lifted:
        raise ValueError("lifted_dirac needs a lifted grid")
    return dirac_field(grid, [(tuple(x) + (k,), sign)])


def marginalize(grid, z):
    """Sum the spatial components of a lifted edge field over the angle axis."""
    if not grid.lifted:
        raise ValueError("marginalize needs a lifted grid")
    parts = grid.split(grid.check_edges(z))
    planar = grid.planar
    return planar.join([parts[0].sum(axis=2), parts[1].sum(axis=2)])


def marginalize_nodes(u):
    return np.asarray(u).sum(axis=2)


@dataclass
class LiftedResult:
    grid: Grid
    state: pdhg.SolverState
    checkpoints: list
    planar_z: np.ndarray
    curves: list
    lifted_curves: list

    @property
    def energy(self):
        return self.checkpoints[-1].energy if self.checkpoints else float("nan")


def lifted_magnitude(grid, z):
    """``|A z|`` per lifted node (the voxel view of the lifted field)."""
    v = grid.average(z, AVERAGE)
    return np.sqrt(np.sum(v * v, axis=0))


def solve_lifted(spec, endpoints, n_angles=DEFAULT_ANGLES, config=None, warm=None, trace=True):
    """Solve a curvature-penalised problem with lifted endpoints.

    ``endpoints`` holds :class:`DiracMass` objects with an angle index, or
    ``((i, j, k), sign)`` pairs.
    """
    if not spec.family.is_roto:
        raise ValueError("solve_lifted needs a curvature energy (tac, trl, el)")
    n, m = spec.weight.shape
    grid = lifted_grid(n, m, n_angles)
    items = []
    for e in endpoints:
        if isinstance(e, DiracMass):
            if e.angle is None:
                raise ValueError("lifted endpoints need an angle index")
            items.append((e.node, e.sign))
        else:
            node, sign = e
            if len(node) != 3:
                raise ValueError(f"lifted endpoint {node} needs (i, j, k)")
            items.append((tuple(node), sign))
    mu = dirac_field(grid, items)
    state, cps = pdhg.solve(grid, spec, mu, config, warm)
    planar_z = marginalize(grid, state.z)
    lifted_curves = []
    curves = []
    if trace:
        lifted_curves, _ = trace_curves(grid, state.z, items)
        curves = lifted_curves
    return LiftedResult(grid, state, cps, planar_z, curves, lifted_curves)


def planar_spec(spec):
    return EnergySpec("l2a", spec.weight, gmax=spec.gmax)


def angle_of(direction, n_angles):
    return AngleTable(n_angles).nearest(direction)
