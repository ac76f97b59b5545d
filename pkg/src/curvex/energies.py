"""Energy families, primal energies and the per-node dual projections.

Planar families weight the node-averaged field ``A z`` by ``g`` and a norm:

* ``l1``  -- forward stencil, ``|x1| + |x2|`` (dual ball: box)
* ``l2f`` -- forward stencil, Euclidean norm
* ``l2a`` -- two-edge averaging stencil, Euclidean norm

Lifted families penalise curvature through the perspective ``hbar(s, t)``
of a curvature cost ``f``:

* ``tac`` -- ``f(t) = 1 + alpha |t|``
* ``trl`` -- ``f(t) = sqrt(1 + alpha^2 t^2)``
* ``el``  -- ``f(t) = 1 + alpha^2 t^2``

``hbar`` is the support function of a convex set ``C`` in the ``(a, b)``
plane (see :class:`HalfPlaneSet`), and the dual constraint at a lifted node
``(i, j, k)`` only restricts the component of ``p^x`` along the direction
``theta_k``; the orthogonal component is free.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError
from .grid import AVERAGE, FORWARD

COLLINEARITY_TOL = 1e-9


class Energy(str, enum.Enum):
    L1 = "l1"
    L2_FORWARD = "l2f"
    L2_AVERAGED = "l2a"
    TAC = "tac"
    TRL = "trl"
    EL = "el"

    @property
    def is_roto(self):
        return self in (Energy.TAC, Energy.TRL, Energy.EL)

    @property
    def a_mode(self):
        return FORWARD if self in (Energy.L1, Energy.L2_FORWARD) else AVERAGE


@dataclass
class EnergySpec:
    """Energy family, weight ``g`` and curvature parameter.

    ``weight`` is a node field on the image grid (2D or 3D). For lifted
    families it is the planar weight, broadcast over the angle axis.
    """

    family: Energy
    weight: np.ndarray
    alpha: float | None = None
    gmax: float | None = None

    def __post_init__(self):
        self.family = Energy(self.family)
        self.weight = np.asarray(self.weight, dtype=float)
        if self.weight.ndim not in (2, 3):
            raise ValueError("weight must be a 2D image or a 3D volume")
        if not np.all(np.isfinite(self.weight)):
            raise ValueError("weight contains non-finite values")
        if self.weight.min() < 0.0 or self.weight.max() > 1.0:
            raise ValueError("weight values must lie in [0, 1]")
        if self.family.is_roto:
            if self.alpha is None or not self.alpha > 0:
                raise ValueError(f"{self.family.value} needs alpha > 0")
            if self.weight.ndim != 2:
                raise ValueError("lifted energies take a 2D weight")
            self.alpha = float(self.alpha)
        elif self.alpha is not None:
            raise ValueError(f"alpha is only meaningful for curvature energies, not {self.family.value}")
        if self.gmax is not None and not 0.0 < self.gmax < 1.0:
            raise ValueError("gmax must lie in (0, 1)")

    @property
    def a_mode(self):
        return self.family.a_mode

    def node_weight(self, grid):
        """Weight as a node field on ``grid`` (broadcast over angles)."""
        g = self.weight
        if grid.lifted:
            if g.shape != grid.dims[:2]:
                raise ValueError(f"weight shape {g.shape} does not match lifted grid {grid.dims}")
            return np.broadcast_to(g[:, :, None], grid.dims)
        if g.shape != grid.dims:
            raise ValueError(f"weight shape {g.shape} does not match grid {grid.dims}")
        return g

    def check_grid(self, grid):
        if self.family.is_roto != grid.lifted:
            raise ValueError(
                f"energy {self.family.value} is incompatible with a {grid.mode} grid"
            )
        self.node_weight(grid)


# ----------------------------------------------------------------------
# curvature costs


def curvature_cost(family, alpha, t):
    """``f(t)`` for a lifted family."""
    family = Energy(family)
    t = np.asarray(t, dtype=float)
    if family is Energy.TAC:
        return 1.0 + alpha * np.abs(t)
    if family is Energy.TRL:
        return np.sqrt(1.0 + (alpha * t) ** 2)
    if family is Energy.EL:
        return 1.0 + (alpha * t) ** 2
    raise ValueError(f"{family.value} is not a curvature energy")


def recession(family, alpha, t):
    """``f^inf(t) = lim f(a t) / a`` as ``a -> inf``."""
    family = Energy(family)
    t = np.asarray(t, dtype=float)
    if family in (Energy.TAC, Energy.TRL):
        return alpha * np.abs(t)
    if family is Energy.EL:
        return np.where(t == 0.0, 0.0, np.inf)
    raise ValueError(f"{family.value} is not a curvature energy")


def perspective(family, alpha, s, t):
    """``hbar(s, t)``: ``s f(t/s)`` for ``s > 0``, ``f^inf(t)`` at 0, ``+inf`` below."""
    s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    out = np.full(s.shape, np.inf)
    pos = s > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out[pos] = s[pos] * curvature_cost(family, alpha, t[pos] / s[pos])
    zero = s == 0
    out[zero] = recession(family, alpha, t[zero])
    return out if out.ndim else float(out)


# ----------------------------------------------------------------------
# the sets C_hbar


@dataclass(frozen=True)
class HalfPlaneSet:
    """Convex set in the ``(a, b)`` plane whose support function is ``hbar``.

    * TAC: ``a <= 1, |b| <= alpha``
    * TRL: ``max(0, a)^2 + (b / alpha)^2 <= 1``
    * EL:  ``a + b^2 / (2 alpha)^2 <= 1``
    """

    family: Energy
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "family", Energy(self.family))
        if not self.family.is_roto:
            raise ValueError(f"{self.family.value} has no half-plane set")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    def residual(self, a, b):
        """Constraint value; ``<= 0`` exactly on the set."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        al = self.alpha
        if self.family is Energy.TAC:
            return np.maximum(a - 1.0, np.abs(b) - al)
        if self.family is Energy.TRL:
            return np.maximum(a, 0.0) ** 2 + (b / al) ** 2 - 1.0
        return a + b**2 / (4.0 * al * al) - 1.0

    def contains(self, a, b, tol=0.0):
        return self.residual(a, b) <= tol

    def support(self, s, t):
        return perspective(self.family, self.alpha, s, t)

    def project(self, a, b, tol=1e-12, max_iter=30):
        return project_halfplane_set((a, b), self, tol=tol, max_iter=max_iter)


def _newton_root(F, dF, hi, tol, max_iter):
    """Root of a convex decreasing ``F`` on ``[0, hi]`` with ``F(0) > 0``.

    Newton from 0 increases monotonically towards the root. Entries that
    miss ``tol`` after ``max_iter`` steps are finished by bisection.
    """
    lam = np.zeros_like(hi)
    done = np.zeros(hi.shape, dtype=bool)
    for _ in range(max_iter):
        f = F(lam)
        step = f / dF(lam)
        new = np.clip(lam - step, 0.0, hi)
        done = np.abs(new - lam) <= tol * (1.0 + new)
        lam = new
        if done.all():
            return lam
    todo = ~done
    if todo.any():
        lo = np.zeros_like(hi)
        up = hi.copy()
        for _ in range(64):
            mid = 0.5 * (lo + up)
            f = F(mid)
            lo = np.where(f > 0, mid, lo)
            up = np.where(f > 0, up, mid)
        lam = np.where(todo, up, lam)
    return lam


def project_halfplane_set(point, hset, tol=1e-12, max_iter=30):
    """Euclidean projection of ``point = (a, b)`` (arrays allowed) onto ``hset``.

    TAC is a box clamp. TRL is a radial projection for ``alpha == 1`` and a
    Newton solve of the ellipse KKT equation otherwise. EL solves the
    parabola KKT equation by Newton. Newton falls back to bisection.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a0 = np.asarray(point[0], dtype=float)
    b0 = np.asarray(point[1], dtype=float)
    a0, b0 = np.broadcast_arrays(a0, b0)
    al = hset.alpha
    a = a0.copy()
    b = b0.copy()
    if hset.family is Energy.TAC:
        a = np.minimum(a, 1.0)
        b = np.clip(b, -al, al)
    elif hset.family is Energy.TRL:
        strip = a0 <= 0.0
        b[strip] = np.clip(b0[strip], -al, al)
        out = ~strip & (a0**2 + (b0 / al) ** 2 > 1.0)
        if out.any():
            ao, bo = a0[out], b0[out]
            if al == 1.0:
                r = np.hypot(ao, bo)
                a[out], b[out] = ao / r, bo / r
            else:
                al2 = al * al

                def F(lam):
                    return (ao / (1.0 + lam)) ** 2 + al2 * (bo / (al2 + lam)) ** 2 - 1.0

                def dF(lam):
                    return -2.0 * ao**2 / (1.0 + lam) ** 3 - 2.0 * al2 * bo**2 / (al2 + lam) ** 3

                m = max(1.0, al2)
                hi = m * (np.sqrt(ao**2 + (bo / al) ** 2) - 1.0)
                lam = _newton_root(F, dF, hi, tol, max_iter)
                a[out] = ao / (1.0 + lam)
                b[out] = al2 * bo / (al2 + lam)
    else:
        c = 4.0 * al * al
        out = a0 + b0**2 / c > 1.0
        if out.any():
            ao, bo = a0[out], b0[out]

            def F(lam):
                return ao - lam - 1.0 + bo**2 / (c * (1.0 + 2.0 * lam / c) ** 2)

            def dF(lam):
                return -1.0 - 4.0 * bo**2 / (c * c * (1.0 + 2.0 * lam / c) ** 3)

            hi = ao - 1.0 + bo**2 / c
            lam = _newton_root(F, dF, hi, tol, max_iter)
            a[out] = ao - lam
            b[out] = bo / (1.0 + 2.0 * lam / c)
    bad = hset.residual(a, b) > 1e-10
    if np.any(bad):
        raise ConvergenceError(
            f"projection onto the {hset.family.value} set left {int(np.sum(bad))} point(s) infeasible"
        )
    if a.ndim == 0:
        return float(a), float(b)
    return a, b


# ----------------------------------------------------------------------
# projections of dual fields


def project_dual(p, spec, grid=None):
    """Project a planar/volume dual field onto ``{||p_n||_* <= g_n}``.

    ``l1`` clamps coordinates to ``[-g, g]``; ``l2*`` scales each node
    vector radially onto the ball of radius ``g``.
    """
    family = spec.family
    if family.is_roto:
        raise ValueError("use project_dual_roto for curvature energies")
    g = spec.weight
    p = np.asarray(p, dtype=float)
    if family is Energy.L1:
        return np.clip(p, -g, g)
    norm = np.sqrt(np.sum(p * p, axis=0))
    scale = np.ones_like(norm)
    big = norm > g
    scale[big] = g[big] / norm[big]
    return p * scale


class AngleTable:
    """Angles ``theta_k = 2 pi k / K`` and their unit vectors."""

    def __init__(self, n_angles):
        if int(n_angles) != n_angles or n_angles < 4:
            raise ValueError("at least 4 angles are required")
        self.K = int(n_angles)
        self.theta = 2.0 * np.pi * np.arange(self.K) / self.K
        self.cos = np.cos(self.theta)
        self.sin = np.sin(self.theta)

    def __len__(self):
        return self.K

    @property
    def vectors(self):
        return np.stack([self.cos, self.sin], axis=1)

    def nearest(self, direction):
        """Index of the angle closest to the direction of a 2-vector."""
        ang = np.arctan2(direction[1], direction[0]) % (2.0 * np.pi)
        return int(np.round(ang / (2.0 * np.pi / self.K))) % self.K


def project_dual_roto(p, spec, angles, tol=1e-12, max_iter=30):
    """Project a lifted dual field onto ``C_{g,h}`` node by node.

    At node ``(i, j, k)`` the pair ``(p^x . theta_k, p^theta) / g`` is
    projected onto the family's half-plane set and scaled back by ``g``;
    the tangential part of ``p^x`` and ``p^theta`` are replaced, the part of
    ``p^x`` orthogonal to ``theta_k`` is kept as is. Nodes with ``g = 0``
    are sent to zero.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 4 or p.shape[0] != 3:
        raise ValueError("lifted dual fields have shape (3, N, M, K)")
    K = p.shape[3]
    if len(angles) != K:
        raise ValueError("angle table does not match the dual field")
    hset = HalfPlaneSet(spec.family, spec.alpha)
    g = np.broadcast_to(spec.weight[:, :, None], p.shape[1:])
    c = angles.cos
    s = angles.sin
    tang = p[0] * c + p[1] * s
    q = np.zeros_like(p)
    live = g > 0
    gl = g[live]
    try:
        a, b = project_halfplane_set((tang[live] / gl, p[2][live] / gl), hset, tol=tol, max_iter=max_iter)
    except ConvergenceError as exc:
        a_try = tang / np.where(live, g, 1.0)
        b_try = p[2] / np.where(live, g, 1.0)
        nodes = [tuple(int(v) for v in ix) for ix in np.argwhere(live)]
        for node in nodes:
            try:
                project_halfplane_set((a_try[node], b_try[node]), hset, tol=tol, max_iter=max_iter)
            except ConvergenceError:
                raise ConvergenceError(f"{exc} (first failing node {node})") from exc
        raise
    shift = np.zeros_like(tang)
    shift[live] = a * gl - tang[live]
    cc = np.broadcast_to(c, tang.shape)
    ss = np.broadcast_to(s, tang.shape)
    q[0] = np.where(live, p[0] + shift * cc, 0.0)
    q[1] = np.where(live, p[1] + shift * ss, 0.0)
    q2 = np.zeros_like(tang)
    q2[live] = b * gl
    q[2] = q2
    return q


def dual_residual_roto(p, spec, angles):
    """Largest scaled constraint violation of a lifted dual field."""
    hset = HalfPlaneSet(spec.family, spec.alpha)
    g = np.broadcast_to(spec.weight[:, :, None], p.shape[1:])
    live = g > 0
    tang = p[0] * angles.cos + p[1] * angles.sin
    worst = 0.0
    if live.any():
        worst = float(np.max(hset.residual(tang[live] / g[live], p[2][live] / g[live])))
    dead = ~live
    if dead.any():
        worst = max(worst, float(np.max(np.abs(p[:, dead]))))
    return worst


# ----------------------------------------------------------------------
# primal energies


def primal_energy(z, spec, grid, relaxed=False):
    """Weighted energy ``sum_n g_n ||(A z)_n||`` of an edge field.

    For lifted families each node contributes ``g hbar(lam, v^theta)`` where
    ``v^x = lam theta_k``. With ``relaxed=False`` a node whose spatial part is
    not collinear with (and pointing along) ``theta_k`` up to a relative
    tolerance of 1e-9 makes the energy ``inf``. With ``relaxed=True`` the
    orthogonal part is dropped and ``|lam|`` is used, which gives a finite
    diagnostic for approximate solver output.
    """
    spec.check_grid(grid)
    v = grid.average(z, spec.a_mode)
    g = spec.node_weight(grid)
    if spec.family is Energy.L1:
        return float(np.sum(g * np.sum(np.abs(v), axis=0)))
    if not spec.family.is_roto:
        return float(np.sum(g * np.sqrt(np.sum(v * v, axis=0))))
    angles = AngleTable(grid.n_angles)
    lam = v[0] * angles.cos + v[1] * angles.sin
    orth = -v[0] * angles.sin + v[1] * angles.cos
    t = v[2]
    if relaxed:
        cost = perspective(spec.family, spec.alpha, np.abs(lam), t)
    else:
        scale = np.sqrt(v[0] ** 2 + v[1] ** 2)
        ok = (np.abs(orth) <= COLLINEARITY_TOL * scale) & (lam >= -COLLINEARITY_TOL * scale)
        cost = perspective(spec.family, spec.alpha, np.maximum(lam, 0.0), t)
        cost = np.where(ok, cost, np.inf)
    live = g > 0
    return float(np.sum(g[live] * cost[live]))


def collinearity_defect(z, grid):
    """Sum over lifted nodes of the spatial component orthogonal to ``theta_k``."""
    v = grid.average(z, AVERAGE)
    angles = AngleTable(grid.n_angles)
    orth = -v[0] * angles.sin + v[1] * angles.cos
    return float(np.sum(np.abs(orth)))


def dual_constraint_residual(p, spec, grid):
    """Largest violation of the dual constraint (0 when feasible)."""
    if spec.family.is_roto:
        return dual_residual_roto(p, spec, AngleTable(grid.n_angles))
    g = spec.node_weight(grid)
    if spec.family is Energy.L1:
        return float(np.max(np.abs(p) - g))
    return float(np.max(np.sqrt(np.sum(p * p, axis=0)) - g))


def project_dual_any(p, spec, grid, angles=None):
    if spec.family.is_roto:
        return project_dual_roto(p, spec, angles or AngleTable(grid.n_angles))
    return project_dual(p, spec, grid)
