"""Primal-dual hybrid gradient solver for ``min_{D^* z = mu} sum_n g_n ||(A z)_n||``.

Each step::

    p    <- Proj_dual(p + sigma A zbar)
    z'   <- Proj_{D^* z = mu}(z - tau A^* p)
    zbar <- 2 z' - z

The primal projection is exact (spectral), so every iterate is feasible.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .diracs import dirac_field
from .energies import AngleTable, dual_constraint_residual, primal_energy, project_dual_any
from .exceptions import NumericalError
from .grid import operator_norm
from .spectral import _check_compatible, project_divergence, project_range_grad, spectrum

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    """Step sizes and stopping rule.

    ``tau`` / ``sigma`` default to ``0.99 / (||A|| n^(1/4))`` and
    ``n^(1/4) / ||A||`` with ``n`` the number of nodes. Setting
    ``energy_rel_tol`` to 0 runs exactly ``max_steps`` steps.
    """

    tau: float | None = None
    sigma: float | None = None
    max_steps: int = 5000
    check_every: int = 50
    feas_tol: float = 1e-9
    energy_rel_tol: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if self.check_every < 1:
            raise ValueError("check_every must be >= 1")
        for name in ("tau", "sigma"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive")

    def step_sizes(self, grid, a_mode):
        norm = _cached_norm(grid, a_mode, self.seed)
        n4 = grid.n_nodes ** 0.25
        tau = self.tau if self.tau is not None else 0.99 / (norm * n4)
        sigma = self.sigma if self.sigma is not None else n4 / norm
        if tau * sigma * norm**2 > 1.0 + 1e-12:
            raise ValueError(
                f"tau * sigma * ||A||^2 = {tau * sigma * norm ** 2:.4f} exceeds 1; the iteration may diverge"
            )
        return tau, sigma


@lru_cache(maxsize=64)
def _cached_norm(grid, a_mode, seed):
    return operator_norm(grid, a_mode, seed=seed)


@dataclass
class Checkpoint:
    step: int
    energy: float
    feas: float
    gap: float
    wallclock_ms: float

    def line(self):
        return f"{self.step} {self.energy:.12g} {self.feas:.3e} {self.gap:.6g} {self.wallclock_ms:.1f}"


@dataclass
class SolverState:
    """Iterates of one (possibly warm-started) solve."""

    z: np.ndarray
    p: np.ndarray
    z_bar: np.ndarray
    z_avg: np.ndarray
    p_avg: np.ndarray
    k: int = 0
    n_avg: int = 0
    log: list = field(default_factory=list)

    def copy(self):
        return SolverState(
            self.z.copy(), self.p.copy(), self.z_bar.copy(), self.z_avg.copy(),
            self.p_avg.copy(), self.k, self.n_avg, list(self.log),
        )


def _as_mu(grid, mu):
    if isinstance(mu, np.ndarray) and mu.shape == grid.dims:
        return np.asarray(mu, dtype=float)
    return dirac_field(grid, mu)


def cold_state(grid, mu):
    z = project_divergence(grid, grid.zeros_edges(), mu)
    p = grid.zeros_dual()
    return SolverState(z, p, z.copy(), z.copy(), p.copy())


def gap_surrogate(state, grid, spec, mu):
    """Primal-dual gap surrogate on the averaged iterates.

    Returns ``(gap, defect)`` with ``gap = E(zavg) - <z_part, A^* pavg>``
    for the minimum-norm feasible ``z_part``, and ``defect`` the norm of the
    part of ``A^* pavg`` outside ``range(D)`` (zero at a saddle point).
    """
    mu = _as_mu(grid, mu)
    z_part = project_divergence(grid, grid.zeros_edges(), mu)
    w = grid.average_adjoint(state.p_avg, spec.a_mode)
    w_range = project_range_grad(grid, w)
    energy = primal_energy(state.z_avg, spec, grid, relaxed=spec.family.is_roto)
    return energy - float(np.dot(z_part, w)), float(np.linalg.norm(w - w_range))


def solve(grid, spec, mu, config=None, warm=None):
    """Run PDHG and return ``(state, checkpoints)``.

    ``mu`` is a node field or an iterable of Dirac masses. With ``warm``
    the previous iterates are reused: ``z`` is re-projected onto the new
    constraint, ``p`` is kept. Iteration stops after ``config.max_steps``
    steps, or earlier once the relative energy change between checkpoints
    is below ``energy_rel_tol`` and the feasibility residual below
    ``feas_tol``.

    Raises
    ------
    IncompatibleDataError
        If ``mu`` has non-zero total mass.
    NumericalError
        If a non-finite value appears; ``exc.step`` is the step index.
    """
    config = config or SolverConfig()
    spec.check_grid(grid)
    mu = _as_mu(grid, mu)
    _check_compatible(mu)
    tau, sigma = config.step_sizes(grid, spec.a_mode)
    mode = spec.a_mode
    angles = AngleTable(grid.n_angles) if grid.lifted else None
    pinv = spectrum(grid).apply_pinv

    if warm is None:
        state = cold_state(grid, mu)
    else:
        state = warm.copy()
        state.z = project_divergence(grid, state.z, mu)
        state.z_bar = state.z.copy()
        state.z_avg = state.z.copy()
        state.p_avg = state.p.copy()
        state.n_avg = 0
    state.log = list(state.log)
    checkpoints = []
    z, p, z_bar = state.z, state.p, state.z_bar
    z_sum = np.zeros_like(z)
    p_sum = np.zeros_like(p)
    t0 = time.perf_counter()
    prev_energy = None
    n_done = 0
    for it in range(1, config.max_steps + 1):
        p = project_dual_any(p + sigma * grid.average(z_bar, mode), spec, grid, angles)
        z_new = z - tau * grid.average_adjoint(p, mode)
        z_new += grid.grad(pinv(mu - grid.div_adjoint(z_new)))
        np.subtract(2.0 * z_new, z, out=z_bar)
        z = z_new
        z_sum += z
        p_sum += p
        n_done = it
        if not np.isfinite(z.sum()) or not np.isfinite(p.sum()):
            raise NumericalError(f"non-finite iterate at step {state.k + it}", step=state.k + it)
        if it % config.check_every == 0 or it == config.max_steps:
            state.z, state.p, state.z_bar = z, p, z_bar
            state.z_avg = z_sum / it
            state.p_avg = p_sum / it
            state.n_avg = it
            energy = primal_energy(z, spec, grid, relaxed=spec.family.is_roto)
            feas = float(np.max(np.abs(grid.div_adjoint(z) - mu)))
            gap, _ = gap_surrogate(state, grid, spec, mu)
            cp = Checkpoint(state.k + it, energy, feas, gap, 1000.0 * (time.perf_counter() - t0))
            checkpoints.append(cp)
            state.log.append(cp.line())
            if (
                config.energy_rel_tol > 0
                and prev_energy is not None
                and abs(energy - prev_energy) <= config.energy_rel_tol * max(abs(energy), 1e-300)
                and feas <= config.feas_tol
            ):
                break
            prev_energy = energy
    state.z, state.p, state.z_bar = z, p, z_bar
    if n_done:
        state.z_avg = z_sum / n_done
        state.p_avg = p_sum / n_done
        state.n_avg = n_done
    state.k += n_done
    log.debug("pdhg: %d steps, tau=%.3g sigma=%.3g", n_done, tau, sigma)
    return state, checkpoints


def dual_feasibility(state, grid, spec):
    return dual_constraint_residual(state.p, spec, grid)
