import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curvex.exceptions import ConvergenceError
from curvex.grid import AVERAGE, FORWARD, Grid, operator_norm

GRIDS = [Grid(8, 8), Grid(33, 17), Grid(8, 8, n_depth=6), Grid(16, 16, n_angles=8), Grid(5, 3)]


def dense(op, n_in):
    cols = []
    for k in range(n_in):
        e = np.zeros(n_in)
        e[k] = 1.0
        cols.append(np.ravel(op(e)))
    return np.stack(cols, axis=1)


grid_strategy = st.one_of(
    st.builds(Grid, st.integers(2, 9), st.integers(2, 9)),
    st.builds(lambda a, b, c: Grid(a, b, n_depth=c), st.integers(2, 5), st.integers(2, 5), st.integers(2, 5)),
    st.builds(lambda a, b, c: Grid(a, b, n_angles=c), st.integers(2, 5), st.integers(2, 5), st.integers(2, 6)),
)


class TestGridShape:
    def test_modes(self):
        assert Grid(4, 5).mode == "planar"
        assert Grid(4, 5, n_depth=3).mode == "volume"
        assert Grid(4, 5, n_angles=6).mode == "lifted"
        assert Grid(4, 5, n_angles=6).periodic == (False, False, True)

    @pytest.mark.parametrize("kw", [dict(n_rows=1, n_cols=4), dict(n_rows=4, n_cols=4, n_depth=3, n_angles=4),
                                    dict(n_rows=4, n_cols=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            Grid(**kw)

    def test_edge_layout(self):
        g = Grid(4, 3)
        assert g.edge_shapes == ((3, 3), (4, 2))
        assert g.n_edges == 9 + 8
        lifted = Grid(4, 3, n_angles=5)
        assert lifted.edge_shapes[2] == (4, 3, 5)

    def test_split_join_roundtrip(self, rng):
        g = Grid(6, 5, n_angles=4)
        z = rng.standard_normal(g.n_edges)
        assert np.array_equal(g.join(g.split(z)), z)

    def test_from_dims(self):
        assert Grid.from_dims((4, 5, 6), periodic_last=True) == Grid(4, 5, n_angles=6)
        assert Grid.from_dims((4, 5, 6)) == Grid(4, 5, n_depth=6)

    def test_wrong_sizes_rejected(self):
        g = Grid(4, 4)
        with pytest.raises(ValueError):
            g.div_adjoint(np.zeros(5))
        with pytest.raises(ValueError):
            g.grad(np.zeros((3, 4)))


class TestGradient:
    def test_constant_field(self):
        g = Grid(4, 4)
        assert np.all(g.grad(np.full((4, 4), 5.0)) == 0)

    def test_ramp(self):
        g = Grid(3, 3)
        u = np.indices((3, 3))[0].astype(float)
        zx, zy = g.split(g.grad(u))
        assert np.all(zx == 1) and np.all(zy == 0)

    def test_periodic_wrap(self):
        g = Grid(2, 2, n_angles=4)
        u = np.zeros(g.dims)
        u[..., 0] = 1.0
        zt = g.split(g.grad(u))[2]
        # edge k+1/2 stored at k: u[k+1] - u[k]; the wrap edge (K-1)+1/2 is u[0] - u[K-1]
        assert np.allclose(zt[0, 0], [-1, 0, 0, 1])


class TestDivergence:
    def test_zero(self):
        g = Grid(3, 3)
        assert np.all(g.div_adjoint(g.zeros_edges()) == 0)

    def test_single_edge(self):
        g = Grid(3, 3)
        z = g.zeros_edges()
        g.split(z)[0][1, 1] = 1.0  # between (1,1) and (2,1)
        d = g.div_adjoint(z)
        assert d[1, 1] == -1.0 and d[2, 1] == 1.0
        assert np.count_nonzero(d) == 2 and d.sum() == 0

    @pytest.mark.parametrize("grid", GRIDS)
    def test_conservation(self, grid, rng):
        for _ in range(5):
            z = rng.standard_normal(grid.n_edges)
            assert abs(grid.div_adjoint(z).sum()) <= 1e-12 * (1 + np.abs(z).sum())


class TestAveraging:
    def test_zero(self):
        g = Grid(4, 4)
        assert np.all(g.average(g.zeros_edges()) == 0)
        assert np.all(g.average_adjoint(g.zeros_dual()) == 0)

    def test_full_row_flow(self):
        g = Grid(5, 5)
        z = g.zeros_edges()
        g.split(z)[0][:, 2] = 1.0
        v = g.average(z, AVERAGE)
        assert np.allclose(v[0][1:-1, 2], 1.0)
        assert v[0][0, 2] == 0.5 and v[0][-1, 2] == 0.5
        assert np.all(v[1] == 0)

    def test_delta_adjoint(self):
        g = Grid(5, 5)
        p = g.zeros_dual()
        p[0, 2, 2] = 1.0
        p[1, 2, 2] = 1.0
        zx, zy = g.split(g.average_adjoint(p))
        assert zx[1, 2] == 0.5 and zx[2, 2] == 0.5
        assert zy[2, 1] == 0.5 and zy[2, 2] == 0.5
        assert np.count_nonzero(zx) + np.count_nonzero(zy) == 4

    def test_forward_stencil(self):
        g = Grid(4, 4)
        z = np.arange(g.n_edges, dtype=float)
        zx, zy = g.split(z)
        v = g.average(z, FORWARD)
        assert np.array_equal(v[0][:3], zx) and np.all(v[0][3] == 0)
        assert np.array_equal(v[1][:, :3], zy) and np.all(v[1][:, 3] == 0)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            Grid(3, 3).average(np.zeros(12), "sideways")


@pytest.mark.parametrize("grid", GRIDS)
@pytest.mark.parametrize("mode", [AVERAGE, FORWARD])
def test_adjointness(grid, mode, rng):
    if mode == FORWARD and grid.ndim != 2:
        pytest.skip("forward stencil is planar")
    for _ in range(10):
        u = rng.standard_normal(grid.dims)
        z = rng.standard_normal(grid.n_edges)
        p = rng.standard_normal((grid.ndim,) + grid.dims)
        lhs, rhs = grid.grad(u) @ z, np.sum(u * grid.div_adjoint(z))
        assert abs(lhs - rhs) <= 1e-12 * (np.linalg.norm(u) * np.linalg.norm(z) + 1)
        lhs, rhs = np.sum(grid.average(z, mode) * p), z @ grid.average_adjoint(p, mode)
        assert abs(lhs - rhs) <= 1e-12 * (np.linalg.norm(z) * np.linalg.norm(p) + 1)


@given(grid_strategy, st.integers(0, 2**31 - 1))
def test_adjointness_property(grid, seed):
    r = np.random.default_rng(seed)
    u = r.standard_normal(grid.dims)
    z = r.standard_normal(grid.n_edges)
    p = r.standard_normal((grid.ndim,) + grid.dims)
    assert abs(grid.grad(u) @ z - np.sum(u * grid.div_adjoint(z))) <= 1e-12 * (
        np.linalg.norm(u) * np.linalg.norm(z) + 1)
    assert abs(np.sum(grid.average(z) * p) - z @ grid.average_adjoint(p)) <= 1e-12 * (
        np.linalg.norm(z) * np.linalg.norm(p) + 1)


@given(grid_strategy, st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(grid, seed, a, b):
    r = np.random.default_rng(seed)
    z1, z2 = r.standard_normal((2, grid.n_edges))
    u1, u2 = r.standard_normal((2,) + grid.dims)
    assert np.allclose(grid.div_adjoint(a * z1 + b * z2), a * grid.div_adjoint(z1) + b * grid.div_adjoint(z2))
    assert np.allclose(grid.grad(a * u1 + b * u2), a * grid.grad(u1) + b * grid.grad(u2))
    assert np.allclose(grid.average(a * z1 + b * z2), a * grid.average(z1) + b * grid.average(z2))


def test_dense_transposes():
    g = Grid(4, 3)
    G = dense(lambda u: g.grad(u.reshape(g.dims)), g.n_nodes)
    Dt = dense(g.div_adjoint, g.n_edges)
    assert np.allclose(G.T, Dt, atol=1e-15)
    A = dense(lambda z: g.average(z), g.n_edges)
    At = dense(lambda p: g.average_adjoint(p.reshape((2,) + g.dims)), 2 * g.n_nodes)
    assert np.allclose(A.T, At, atol=1e-15)


class TestOperatorNorm:
    @pytest.mark.parametrize("mode", [AVERAGE, FORWARD])
    def test_against_svd(self, mode):
        g = Grid(6, 6)
        A = dense(lambda z: g.average(z, mode), g.n_edges)
        exact = np.linalg.norm(A, 2)
        est = operator_norm(g, mode)
        assert exact <= est <= 1.01 * exact * (1 + 1e-5)
        assert est <= np.sqrt(2) + 0.02

    def test_average_in_unit_range(self):
        assert 0 < operator_norm(Grid(6, 6), AVERAGE) <= 1.01

    def test_identity_like(self):
        assert abs(operator_norm(Grid(6, 6), FORWARD, margin=0.0) - 1.0) <= 1e-6

    def test_lifted_and_volume(self):
        for g in (Grid(5, 4, n_angles=6), Grid(4, 4, n_depth=3)):
            A = dense(lambda z: g.average(z), g.n_edges)
            assert np.linalg.norm(A, 2) <= operator_norm(g) <= 1.02

    def test_non_convergence(self):
        with pytest.raises(ConvergenceError):
            operator_norm(Grid(20, 20), rtol=1e-15, max_iter=3)
