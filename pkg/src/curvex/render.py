"""Inspection images: potential in gray, log field magnitude in red, curves and masses on top."""
from __future__ import annotations

import numpy as np
from PIL import Image

from .grid import AVERAGE

CURVE_COLOR = (40, 120, 255)
SOURCE_COLOR = (0, 200, 0)
SINK_COLOR = (255, 200, 0)


def field_magnitude(grid, z, mode=AVERAGE):
    v = grid.average(z, mode)
    return np.sqrt(np.sum(v * v, axis=0))


def log_scale(mag, floor=1e-4):
    """Map magnitudes to ``[0, 1]`` on a log scale; values below ``floor`` go to 0."""
    mag = np.asarray(mag, dtype=float)
    top = float(mag.max()) if mag.size else 0.0
    if top <= floor:
        return np.zeros_like(mag)
    out = (np.log10(np.maximum(mag, floor)) - np.log10(floor)) / (np.log10(top) - np.log10(floor))
    return np.clip(out, 0.0, 1.0)


def compose(g, magnitude=None, curves=(), masses=()):
    """RGB uint8 image of shape ``g.shape + (3,)``."""
    g = np.clip(np.asarray(g, dtype=float), 0, 1)
    rgb = np.repeat((255 * g)[..., None], 3, axis=2)
    if magnitude is not None:
        w = log_scale(magnitude)[..., None]
        rgb = (1 - w) * rgb + w * np.array([255.0, 0.0, 0.0])
    rgb = np.round(rgb).astype(np.uint8)
    n, m = g.shape
    for c in curves:
        for node in c.planar_nodes():
            rgb[node[0], node[1]] = CURVE_COLOR
    for mass in masses:
        i, j = mass.pos[:2]
        rgb[i, j] = SOURCE_COLOR if mass.sign < 0 else SINK_COLOR
    return rgb


def save_png(path, rgb):
    """Write an RGB (or gray) array; the format follows the suffix (``.png``, ``.ppm``)."""
    Image.fromarray(np.asarray(rgb, dtype=np.uint8)).save(path)


def render(path, g, grid=None, z=None, curves=(), masses=(), mode=AVERAGE):
    """Render a 2D result. Without a field or curves this is a gray copy of ``g``."""
    mag = None
    if z is not None:
        if grid.lifted:
            from .rototrans import marginalize

            z = marginalize(grid, z)
            grid = grid.planar
        mag = field_magnitude(grid, z, mode)
    rgb = compose(g, mag, curves, masses)
    if mag is None and not curves and not masses:
        rgb = rgb[..., 0]
    save_png(path, rgb)
    return rgb
