"""Synthetic potentials with known ground truth.

Every generator returns a potential in ``[0, 1]`` that is low on the
structures to extract and high elsewhere.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage


def _normalize(img):
    lo, hi = float(img.min()), float(img.max())
    if hi <= lo:
        return np.zeros_like(img, dtype=float)
    return (img - lo) / (hi - lo)


def _stroke(shape, points, width):
    """Boolean mask of pixels within ``width / 2`` of the polyline ``points``."""
    points = np.asarray(points, dtype=float)
    grids = np.indices(shape, dtype=float)
    coords = grids.reshape(len(shape), -1).T
    best = np.full(len(coords), np.inf)
    for a, b in zip(points[:-1], points[1:]):
        ab = b - a
        denom = float(ab @ ab)
        t = np.zeros(len(coords)) if denom == 0 else np.clip((coords - a) @ ab / denom, 0.0, 1.0)
        d = np.linalg.norm(coords - (a + t[:, None] * ab), axis=1)
        np.minimum(best, d, out=best)
    return (best <= width / 2.0 + 1e-9).reshape(shape)


def segment(shape=(32, 32), start=(6, 8), end=(25, 8), width=1.0, low=0.0, high=1.0):
    """Dark straight segment. Returns ``(g, (start, end))``."""
    mask = _stroke(shape, [start, end], width)
    g = np.where(mask, low, high).astype(float)
    return g, (tuple(start), tuple(end))


def arc_points(center, radius, theta0, theta1, n=None):
    n = n or max(int(abs(theta1 - theta0) * radius * 2), 8)
    t = np.linspace(theta0, theta1, n)
    return np.stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)], axis=1)


def quarter_circle(shape=(32, 32), center=(4, 4), radius=22.0, width=2.0, low=0.0, high=1.0):
    """Dark quarter circle band. Returns ``(g, (start, end))`` with the arc ends."""
    pts = arc_points(center, radius, 0.0, np.pi / 2)
    mask = _stroke(shape, pts, width)
    g = np.where(mask, low, high).astype(float)
    ends = tuple(tuple(int(round(v)) for v in pts[k]) for k in (0, -1))
    return g, ends


def comma_points(n=200):
    """Centre line of the comma: a spiral-like hook ending in a tail."""
    s = n / 200.0
    c = np.array([80.0, 100.0]) * s
    t = np.linspace(-0.25 * np.pi, 1.35 * np.pi, 160)
    r = (45.0 + 22.0 * t / np.pi) * s
    head = np.stack([c[0] + r * np.sin(t), c[1] - r * np.cos(t)], axis=1)
    return head


def comma(n=200, noise=0.15, width=None, seed=0, contrast=0.8):
    """Noisy comma-shaped dark curve on a light background."""
    rng = np.random.default_rng(seed)
    pts = comma_points(n)
    width = width if width is not None else max(2.0, 5.0 * n / 200.0)
    mask = _stroke((n, n), pts, width)
    img = 1.0 - contrast * mask
    img = img + noise * rng.standard_normal((n, n))
    return _normalize(ndimage.gaussian_filter(img, 0.7, mode="reflect"))


def comma_endpoints(n=200):
    pts = comma_points(n)
    return tuple(int(round(v)) for v in pts[0]), tuple(int(round(v)) for v in pts[-1])


def crossing_curves(shape=(40, 25), width=3.0, low=0.05, high=1.0, bend=0.0):
    """Two curves (straight by default) crossing once near the centre.

    Returns ``(g, pairs)`` with ``pairs[c] = (source, sink)`` the two ends
    of curve ``c`` (pixel indices) and their unit tangents.
    """
    n, m = shape
    t = np.linspace(0.0, 1.0, 60)
    a0, a1 = np.array([3.0, 4.0]), np.array([n - 4.0, m - 5.0])
    b0, b1 = np.array([n - 4.0, 4.0]), np.array([3.0, m - 5.0])
    curves = []
    for p0, p1 in ((a0, a1), (b0, b1)):
        d = p1 - p0
        normal = np.array([-d[1], d[0]]) / np.hypot(*d)
        pts = p0 + t[:, None] * d + bend * np.sin(np.pi * t)[:, None] * normal
        curves.append(pts)
    mask = _stroke(shape, curves[0], width) | _stroke(shape, curves[1], width)
    g = np.where(mask, low, high).astype(float)
    pairs = []
    for pts in curves:
        src = tuple(int(round(v)) for v in pts[0])
        snk = tuple(int(round(v)) for v in pts[-1])
        t_src = pts[3] - pts[0]
        t_snk = pts[-1] - pts[-4]
        pairs.append(((src, t_src / np.hypot(*t_src)), (snk, t_snk / np.hypot(*t_snk))))
    return g, pairs


def chromosomes(n=200, count=42, seed=0, noise=0.1, length=(14, 30), width=4.0):
    """Scattered short bent dark rods, loosely imitating a chromosome spread."""
    rng = np.random.default_rng(seed)
    img = np.ones((n, n))
    occupied = np.zeros((n, n), dtype=bool)
    placed = 0
    attempts = 0
    while placed < count and attempts < 50 * count:
        attempts += 1
        L = rng.uniform(*length)
        c = rng.uniform(L / 2 + 4, n - L / 2 - 4, size=2)
        ang = rng.uniform(0, np.pi)
        bend = rng.uniform(-0.4, 0.4)
        t = np.linspace(-0.5, 0.5, 20)
        d = np.array([np.cos(ang), np.sin(ang)])
        nrm = np.array([-d[1], d[0]])
        pts = c + (L * t)[:, None] * d + (bend * L * (t**2 - 0.25))[:, None] * nrm
        mask = _stroke((n, n), pts, width)
        halo = ndimage.binary_dilation(mask, iterations=3)
        if (halo & occupied).any():
            continue
        occupied |= mask
        img[mask] = 0.2
        placed += 1
    img = img + noise * rng.standard_normal((n, n))
    return _normalize(ndimage.gaussian_filter(img, 0.8, mode="reflect"))


def tube_volume(shape=(70, 70, 30), radius=2.5, low=0.05, high=1.0):
    """Volume with two dark helical tubes. Returns ``(g, endpoints)``."""
    n0, n1, n2 = shape
    t = np.linspace(0.0, 1.0, 80)
    c = np.array([n0, n1]) / 2.0
    r = 0.3 * min(n0, n1)
    tubes = []
    for phase in (0.0, np.pi):
        ang = phase + 1.5 * np.pi * t
        pts = np.stack(
            [c[0] + r * np.cos(ang), c[1] + r * np.sin(ang), 2.0 + (n2 - 5.0) * t], axis=1
        )
        tubes.append(pts)
    mask = _stroke(shape, tubes[0], 2 * radius) | _stroke(shape, tubes[1], 2 * radius)
    g = np.where(mask, low, high).astype(float)
    ends = [
        (tuple(int(round(v)) for v in pts[0]), tuple(int(round(v)) for v in pts[-1])) for pts in tubes
    ]
    return g, ends
