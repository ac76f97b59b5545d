import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curvex.energies import (
    AngleTable, Energy, EnergySpec, HalfPlaneSet, collinearity_defect, curvature_cost,
    dual_constraint_residual, perspective, primal_energy, project_dual, project_dual_roto,
    project_halfplane_set, recession,
)
from curvex.grid import FORWARD, Grid

ROTO = ["tac", "trl", "el"]


def boundary_samples(hset, res=1e-4, reach=12.0):
    """Points on the boundary of the set, spaced at most ``res`` apart within ``reach``."""
    al = hset.alpha
    fam = hset.family.value
    if fam == "tac":
        a = np.arange(-reach, 1.0 + res, res)
        b = np.arange(-al, al + res, res)
        return np.concatenate([
            np.stack([a, np.full_like(a, al)], 1), np.stack([a, np.full_like(a, -al)], 1),
            np.stack([np.ones_like(b), b], 1),
        ])
    if fam == "trl":
        n = int(np.pi * max(1.0, al) / res) + 1
        phi = np.linspace(-np.pi / 2, np.pi / 2, n)
        a = np.arange(-reach, 0.0 + res, res)
        return np.concatenate([
            np.stack([np.cos(phi), al * np.sin(phi)], 1),
            np.stack([a, np.full_like(a, al)], 1), np.stack([a, np.full_like(a, -al)], 1),
        ])
    bmax = 2 * al * np.sqrt(1 + reach)
    b = np.arange(-bmax, bmax + res / 4, res / 4)
    return np.stack([1 - b**2 / (4 * al * al), b], 1)


def brute_force(hset, a0, b0):
    if hset.contains(a0, b0):
        return a0, b0
    pts = boundary_samples(hset)
    k = np.argmin((pts[:, 0] - a0) ** 2 + (pts[:, 1] - b0) ** 2)
    return tuple(pts[k])


class TestEnergySpec:
    def test_families(self):
        assert {e.value for e in Energy} == {"l1", "l2f", "l2a", "tac", "trl", "el"}
        assert Energy("l2f").a_mode == FORWARD
        assert Energy("el").is_roto and not Energy("l1").is_roto

    @pytest.mark.parametrize("kw", [
        dict(family="tac", weight=np.ones((4, 4))),
        dict(family="l2a", weight=np.ones((4, 4)), alpha=1.0),
        dict(family="el", weight=np.ones((4, 4, 3)), alpha=1.0),
        dict(family="l1", weight=np.full((4, 4), 1.5)),
        dict(family="l1", weight=np.full((4, 4), np.nan)),
        dict(family="l1", weight=np.ones((4, 4)), gmax=1.0),
        dict(family="bogus", weight=np.ones((4, 4))),
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            EnergySpec(**kw)

    def test_grid_compatibility(self):
        with pytest.raises(ValueError):
            EnergySpec("el", np.ones((4, 4)), alpha=1).check_grid(Grid(4, 4))
        with pytest.raises(ValueError):
            EnergySpec("l2a", np.ones((4, 4))).check_grid(Grid(4, 4, n_angles=4))
        with pytest.raises(ValueError):
            EnergySpec("l2a", np.ones((4, 5))).check_grid(Grid(4, 4))

    def test_node_weight_broadcast(self):
        spec = EnergySpec("trl", np.arange(12.0).reshape(3, 4) / 12, alpha=1)
        w = spec.node_weight(Grid(3, 4, n_angles=5))
        assert w.shape == (3, 4, 5) and np.all(w[..., 3] == spec.weight)


class TestCurvatureCosts:
    def test_values(self):
        assert curvature_cost("tac", 2.0, -1.5) == 4.0
        assert np.isclose(curvature_cost("trl", 2.0, 1.5), np.sqrt(10.0))
        assert curvature_cost("el", 2.0, 1.5) == 10.0

    @pytest.mark.parametrize("fam", ROTO)
    def test_recession_is_limit(self, fam):
        t = 0.7
        big = 1e7
        lim = curvature_cost(fam, 1.3, big * t) / big
        rec = recession(fam, 1.3, t)
        assert (np.isinf(rec) and lim > 1e5) or abs(lim - rec) < 1e-5

    @pytest.mark.parametrize("fam", ROTO)
    def test_perspective(self, fam):
        assert np.isclose(perspective(fam, 1.0, 2.0, 1.0), 2 * curvature_cost(fam, 1.0, 0.5))
        assert perspective(fam, 1.0, -1.0, 0.0) == np.inf
        assert perspective(fam, 1.0, 0.0, 0.0) == 0.0

    @pytest.mark.parametrize("fam", ROTO)
    @given(st.floats(0.05, 5), st.floats(-5, 5), st.floats(0.1, 3))
    def test_perspective_is_support_function(self, fam, s, t, alpha):
        # hbar(s, t) = sup_{(a, b) in C} a s + b t, checked on boundary samples of C
        h = HalfPlaneSet(fam, alpha)
        span = 2 * alpha**2 * abs(t) / s + 1
        bb = np.linspace(-2 * span, 2 * span, 40001)
        if fam == "tac":
            val = s + alpha * abs(t)
        elif fam == "trl":
            th = np.linspace(-np.pi / 2, np.pi / 2, 20001)
            val = np.max(np.cos(th) * s + alpha * np.sin(th) * t)
        else:
            val = np.max((1 - bb**2 / (4 * alpha**2)) * s + bb * t)
        assert np.isclose(h.support(s, t), val, rtol=1e-4, atol=1e-6)


class TestHalfPlaneProjection:
    @pytest.mark.parametrize("fam,alpha", [("trl", 0.5), ("trl", 2.0), ("trl", 1.0), ("el", 0.5), ("el", 1.0),
                                           ("el", 2.0), ("tac", 1.5)])
    def test_brute_force(self, fam, alpha, rng):
        h = HalfPlaneSet(fam, alpha)
        for a0, b0 in rng.uniform(-3, 3, size=(6, 2)):
            a, b = project_halfplane_set((a0, b0), h)
            ba, bb = brute_force(h, a0, b0)
            assert np.hypot(a - ba, b - bb) <= 2e-3 + 1e-9
            assert h.residual(a, b) <= 1e-10

    @pytest.mark.parametrize("fam", ROTO)
    @given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0.1, 10))
    def test_projection_properties(self, fam, a0, b0, alpha):
        h = HalfPlaneSet(fam, alpha)
        a, b = project_halfplane_set((a0, b0), h)
        assert h.residual(a, b) <= 1e-10
        if h.residual(a0, b0) <= 0:
            assert (a, b) == (a0, b0)
        a2, b2 = project_halfplane_set((a, b), h)
        assert np.hypot(a2 - a, b2 - b) <= 1e-9 * (1 + np.hypot(a, b))
        # variational inequality: <x0 - P, y - P> <= 0 for sampled y in the set
        r = np.random.default_rng(0)
        ys = r.uniform(-3, 3, size=(200, 2))
        ys = ys[h.contains(ys[:, 0], ys[:, 1])]
        ys = np.vstack([ys, [[-1.0, 0.0], [0.0, 0.0]]])
        inner = (a0 - a) * (ys[:, 0] - a) + (b0 - b) * (ys[:, 1] - b)
        assert np.all(inner <= 1e-7 * (1 + np.hypot(a0 - a, b0 - b)) * (1 + np.abs(ys).max()))

    def test_vectorized_matches_scalar(self, rng):
        h = HalfPlaneSet("el", 0.7)
        pts = rng.uniform(-4, 4, size=(50, 2))
        a, b = project_halfplane_set((pts[:, 0], pts[:, 1]), h)
        for k, (a0, b0) in enumerate(pts):
            sa, sb = project_halfplane_set((a0, b0), h)
            assert np.isclose(a[k], sa) and np.isclose(b[k], sb)

    def test_invalid(self):
        with pytest.raises(ValueError):
            HalfPlaneSet("l2a", 1.0)
        with pytest.raises(ValueError):
            HalfPlaneSet("el", 0.0)
        with pytest.raises(ValueError):
            project_halfplane_set((0.0, 0.0), HalfPlaneSet("el", 1.0), tol=0)

    def test_tac_clamp(self):
        assert project_halfplane_set((3.0, -5.0), HalfPlaneSet("tac", 2.0)) == (1.0, -2.0)

    def test_trl_strip(self):
        assert project_halfplane_set((-3.0, 5.0), HalfPlaneSet("trl", 2.0)) == (-3.0, 2.0)


class TestPlanarDualProjection:
    def test_l1_box(self, rng):
        g = rng.uniform(0, 1, (5, 5))
        p = rng.standard_normal((2, 5, 5)) * 2
        q = project_dual(p, EnergySpec("l1", g))
        assert np.all(np.abs(q) <= g + 1e-15)
        inside = np.abs(p) <= g
        assert np.array_equal(q[inside], p[inside])

    @pytest.mark.parametrize("fam", ["l2a", "l2f"])
    def test_l2_disc(self, fam, rng):
        g = rng.uniform(0, 1, (5, 5))
        p = rng.standard_normal((2, 5, 5)) * 2
        q = project_dual(p, EnergySpec(fam, g))
        n = np.sqrt((q**2).sum(0))
        assert np.all(n <= g + 1e-12)
        # radial: q parallel to p
        assert np.allclose(q[0] * p[1] - q[1] * p[0], 0, atol=1e-12)

    def test_volume(self, rng):
        g = rng.uniform(0, 1, (3, 4, 5))
        p = rng.standard_normal((3, 3, 4, 5))
        spec = EnergySpec("l2a", g)
        q = project_dual(p, spec)
        assert dual_constraint_residual(q, spec, Grid(3, 4, n_depth=5)) <= 1e-12


class TestRotoDualProjection:
    @pytest.mark.parametrize("fam", ROTO)
    def test_feasible_and_orthogonal_part_kept(self, fam, rng):
        K = 8
        angles = AngleTable(K)
        g = rng.uniform(0, 1, (4, 3))
        g[0, 0] = 0.0
        spec = EnergySpec(fam, g, alpha=1.7)
        p = rng.standard_normal((3, 4, 3, K)) * 3
        q = project_dual_roto(p, spec, angles)
        grid = Grid(4, 3, n_angles=K)
        assert dual_constraint_residual(q, spec, grid) <= 1e-10
        orth_p = -p[0] * angles.sin + p[1] * angles.cos
        orth_q = -q[0] * angles.sin + q[1] * angles.cos
        live = np.broadcast_to(g[:, :, None] > 0, orth_p.shape)
        assert np.max(np.abs(orth_p - orth_q)[live]) <= 1e-12
        assert np.all(q[:, 0, 0] == 0)

    def test_idempotent(self, rng):
        angles = AngleTable(6)
        spec = EnergySpec("el", rng.uniform(0.1, 1, (3, 3)), alpha=0.8)
        q = project_dual_roto(rng.standard_normal((3, 3, 3, 6)), spec, angles)
        assert np.allclose(project_dual_roto(q, spec, angles), q, atol=1e-12)

    def test_bad_shape(self):
        spec = EnergySpec("el", np.ones((3, 3)), alpha=1)
        with pytest.raises(ValueError):
            project_dual_roto(np.zeros((2, 3, 3, 4)), spec, AngleTable(4))
        with pytest.raises(ValueError):
            project_dual_roto(np.zeros((3, 3, 3, 4)), spec, AngleTable(6))

    def test_angle_table(self):
        t = AngleTable(8)
        assert t.nearest((1, 0)) == 0 and t.nearest((0, 1)) == 2 and t.nearest((1, -1)) == 7
        with pytest.raises(ValueError):
            AngleTable(3)


class TestPrimalEnergy:
    def test_planar_values(self):
        grid = Grid(5, 5)
        z = grid.zeros_edges()
        grid.split(z)[0][:, 2] = 1.0
        g = np.full((5, 5), 0.5)
        assert np.isclose(primal_energy(z, EnergySpec("l2a", g), grid), 0.5 * 4)
        assert np.isclose(primal_energy(z, EnergySpec("l1", g), grid), 0.5 * 4)
        assert np.isclose(primal_energy(z, EnergySpec("l2f", g), grid), 0.5 * 4)

    def test_l1_vs_l2_on_diagonal(self):
        grid = Grid(3, 3)
        z = grid.zeros_edges()
        zx, zy = grid.split(z)
        zx[0, 0] = 1.0
        zy[0, 0] = 1.0
        g = np.ones((3, 3))
        assert primal_energy(z, EnergySpec("l1", g), grid) == 2.0
        assert np.isclose(primal_energy(z, EnergySpec("l2f", g), grid), np.sqrt(2))

    def test_lifted_straight_and_strict(self):
        K = 4
        grid = Grid(6, 3, n_angles=K)
        z = grid.zeros_edges()
        grid.split(z)[0][:, 1, 0] = 1.0  # flow along +axis0 at angle 0
        spec = EnergySpec("el", np.ones((6, 3)), alpha=1.0)
        assert np.isclose(primal_energy(z, spec, grid), 5.0)
        assert collinearity_defect(z, grid) == 0.0
        z2 = z.copy()
        grid.split(z2)[1][2, 1, 0] = 0.3  # sideways component at angle 0
        assert primal_energy(z2, spec, grid) == np.inf
        assert np.isfinite(primal_energy(z2, spec, grid, relaxed=True))

    def test_lifted_backward_flow_is_infinite(self):
        grid = Grid(6, 3, n_angles=4)
        z = grid.zeros_edges()
        grid.split(z)[0][:, 1, 0] = -1.0
        spec = EnergySpec("tac", np.ones((6, 3)), alpha=1.0)
        assert primal_energy(z, spec, grid) == np.inf

    def test_pure_rotation(self):
        grid = Grid(3, 3, n_angles=4)
        z = grid.zeros_edges()
        grid.split(z)[2][1, 1, 0] = 1.0
        for fam, expected in (("tac", 2 * 0.5 * 2.0), ("trl", 2 * 0.5 * 2.0), ("el", np.inf)):
            e = primal_energy(z, EnergySpec(fam, np.ones((3, 3)), alpha=2.0), grid)
            assert e == expected
