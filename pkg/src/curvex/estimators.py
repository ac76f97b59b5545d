"""Estimator front-ends with the familiar ``fit`` / ``transform`` / ``predict`` shape.

``X`` is always the potential ``g``. ``transform`` returns the node-wise
field magnitude ``|A z|`` of the fitted solution and ``predict`` the traced
curves.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import pdhg
from .diracs import DiracMass
from .endpoints import BilevelConfig, run_bilevel
from .energies import Energy, EnergySpec
from .grid import Grid
from .rototrans import DEFAULT_ANGLES, marginalize
from .tracing import trace_curves
from .validation import check_endpoints, check_potential


def _solver_config(est):
    return pdhg.SolverConfig(
        tau=est.tau, sigma=est.sigma, max_steps=est.max_steps, check_every=est.check_every,
        feas_tol=est.feas_tol, energy_rel_tol=est.energy_rel_tol, seed=est.seed,
    )


class _FieldMixin:
    def transform(self, X=None):
        check_is_fitted(self, "z_")
        grid, z = self.grid_, self.z_
        if grid.lifted:
            z, grid = marginalize(grid, z), grid.planar
        v = grid.average(z, self.spec_.a_mode)
        return np.sqrt(np.sum(v * v, axis=0))

    def predict(self, X=None):
        check_is_fitted(self, "curves_")
        return [c.planar_nodes() if self.grid_.lifted else list(c.nodes) for c in self.curves_]


class GeodesicExtractor(_FieldMixin, BaseEstimator):
    """Minimal-flow curves between given endpoints.

    Parameters
    ----------
    energy : {"l1", "l2f", "l2a", "tac", "trl", "el"}
    alpha : float, optional
        Curvature weight, required for ``tac``, ``trl`` and ``el``.
    n_angles : int
        Number of orientations in the lifted domain (curvature energies).
    max_steps, check_every, energy_rel_tol, feas_tol, tau, sigma, seed
        Solver settings, see :class:`curvex.pdhg.SolverConfig`.

    Attributes
    ----------
    z_ : ndarray
        Optimal edge field.
    energy_ : float
    curves_ : list of Curve
    checkpoints_ : list of Checkpoint
    """

    def __init__(self, energy="l2a", alpha=None, n_angles=DEFAULT_ANGLES, max_steps=5000,
                 check_every=50, energy_rel_tol=1e-7, feas_tol=1e-9, tau=None, sigma=None, seed=0):
        self.energy = energy
        self.alpha = alpha
        self.n_angles = n_angles
        self.max_steps = max_steps
        self.check_every = check_every
        self.energy_rel_tol = energy_rel_tol
        self.feas_tol = feas_tol
        self.tau = tau
        self.sigma = sigma
        self.seed = seed

    def fit(self, X, endpoints):
        """Solve with ``endpoints`` given as ``(node, sign)`` pairs or ``"i,j[,k]:+1"`` strings."""
        family = Energy(self.energy)
        g = check_potential(X, ndim=(2,) if family.is_roto else (2, 3))
        if family.is_roto:
            grid = Grid(*g.shape, n_angles=self.n_angles)
        else:
            grid = Grid.from_dims(g.shape)
        ends = check_endpoints(endpoints, grid.dims)
        spec = EnergySpec(family, g, alpha=self.alpha)
        state, cps = pdhg.solve(grid, spec, ends, _solver_config(self))
        self.spec_ = spec
        self.grid_ = grid
        self.state_ = state
        self.z_ = state.z
        self.checkpoints_ = cps
        self.energy_ = cps[-1].energy if cps else float("nan")
        self.curves_, _ = trace_curves(grid, state.z, ends)
        return self


class CurveExtractor(_FieldMixin, BaseEstimator):
    """Curves found automatically by moving random endpoint pairs (2D only).

    Attributes
    ----------
    masses_ : list of DiracMass
        Final endpoints.
    curves_ : list of Curve
    snapshots_ : list of dict
        One record per outer iteration.
    """

    def __init__(self, energy="l2a", alpha=None, n_angles=DEFAULT_ANGLES, n_pairs=15, gmax=0.5,
                 inner_steps=60, post_steps=5000, max_outer=500, seed=0, blur=None):
        self.energy = energy
        self.alpha = alpha
        self.n_angles = n_angles
        self.n_pairs = n_pairs
        self.gmax = gmax
        self.inner_steps = inner_steps
        self.post_steps = post_steps
        self.max_outer = max_outer
        self.seed = seed
        self.blur = blur

    def fit(self, X, y=None, masses=None):
        g = check_potential(X, ndim=(2,))
        if self.blur:
            from .io import normalize_potential

            g = normalize_potential(g, self.blur)
        config = BilevelConfig(
            n_pairs=self.n_pairs, gmax=self.gmax, inner_steps=self.inner_steps,
            post_steps=self.post_steps, max_outer=self.max_outer, seed=self.seed,
            n_angles=self.n_angles,
        )
        spec = EnergySpec(self.energy, g, alpha=self.alpha, gmax=self.gmax)
        if masses is not None:
            masses = [m if isinstance(m, DiracMass) else DiracMass(*m) for m in masses]
        result = run_bilevel(g, config, spec, masses=masses)
        self.spec_ = spec
        self.grid_ = result.grid
        self.state_ = result.state
        self.z_ = result.state.z
        self.masses_ = result.masses
        self.curves_ = result.curves
        self.snapshots_ = result.snapshots
        self.n_outer_ = result.n_outer
        return self
