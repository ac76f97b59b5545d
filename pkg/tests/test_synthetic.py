import numpy as np
import pytest

from curvex import render, synthetic
from curvex.grid import Grid
from curvex.tracing import Curve
from curvex.diracs import DiracMass


@pytest.mark.parametrize("make", [
    lambda: synthetic.segment()[0], lambda: synthetic.quarter_circle()[0], lambda: synthetic.comma(64),
    lambda: synthetic.crossing_curves()[0], lambda: synthetic.chromosomes(80, count=6),
    lambda: synthetic.tube_volume((20, 20, 10))[0],
])
def test_range(make):
    g = make()
    assert g.min() >= 0 and g.max() <= 1 and np.isfinite(g).all()


def test_segment_ground_truth():
    g, (a, b) = synthetic.segment()
    assert g[a] == 0 and g[b] == 0 and (g == 0).sum() == b[0] - a[0] + 1


def test_quarter_circle_connected():
    from scipy import ndimage

    g, (a, b) = synthetic.quarter_circle()
    labels, n = ndimage.label(g < 0.5)
    assert n == 1 and g[a] == 0 and g[b] == 0


def test_crossing_pairs():
    g, pairs = synthetic.crossing_curves()
    assert g.shape == (40, 25)
    for (src, ts), (snk, tt) in pairs:
        assert g[src] < 0.5 and g[snk] < 0.5
        assert np.isclose(np.linalg.norm(ts), 1) and np.isclose(np.linalg.norm(tt), 1)


def test_comma_endpoints_dark():
    g = synthetic.comma(200)
    a, b = synthetic.comma_endpoints(200)
    assert g[a] < 0.5 and g[b] < 0.5


def test_render_layers():
    grid = Grid(6, 6)
    z = grid.zeros_edges()
    grid.split(z)[1][2, 0:5] = 1.0
    g = np.full((6, 6), 0.5)
    rgb = render.compose(g, render.field_magnitude(grid, z), [Curve([(2, 0), (2, 1)], 1.0)],
                         [DiracMass((2, 5), 1)])
    assert rgb.shape == (6, 6, 3) and rgb.dtype == np.uint8
    assert tuple(rgb[2, 0]) == render.CURVE_COLOR and tuple(rgb[2, 5]) == render.SINK_COLOR
    assert tuple(rgb[0, 0]) == (128, 128, 128)
    assert render.log_scale(np.zeros(3)).max() == 0
