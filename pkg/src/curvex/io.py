"""Field dumps, JSON snapshots and potential ingestion.

Text dump::

    CFLD <ndim> <dims...> <component> [periodic:theta]
    v0 v1 v2 ...

``component`` is ``node``, ``edge`` or ``dual``; values follow in storage
order (edges: axis-0 block first). The binary variant is a raw
little-endian float64 file with a ``.json`` sidecar ``{dims, component,
mode}``.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .grid import Grid

NODE = "node"
EDGE = "edge"
DUAL = "dual"
COMPONENTS = (NODE, EDGE, DUAL)


def _flatten(grid, values, component):
    if component == NODE:
        return grid.check_nodes(values).ravel()
    if component == EDGE:
        return grid.check_edges(values)
    if component == DUAL:
        return grid.check_dual(values).ravel()
    raise ValueError(f"unknown component {component!r}; expected one of {COMPONENTS}")


def _unflatten(grid, flat, component):
    if component == NODE:
        expected, shape = grid.n_nodes, grid.dims
    elif component == EDGE:
        expected, shape = grid.n_edges, (grid.n_edges,)
    elif component == DUAL:
        expected, shape = grid.ndim * grid.n_nodes, (grid.ndim,) + grid.dims
    else:
        raise ValueError(f"unknown component {component!r}")
    if flat.size != expected:
        raise ValueError(f"{component} field on {grid.dims} needs {expected} values, found {flat.size}")
    return flat.reshape(shape)


def save_text(path, grid, values, component):
    flat = _flatten(grid, values, component)
    head = ["CFLD", str(grid.ndim), *map(str, grid.dims), component]
    if grid.lifted:
        head.append("periodic:theta")
    with open(path, "w") as fh:
        fh.write(" ".join(head) + "\n")
        fh.write("\n".join(repr(float(v)) for v in flat))
        fh.write("\n")


def load_text(path):
    """Return ``(grid, values, component)`` from a text dump."""
    with open(path) as fh:
        tokens = fh.readline().split()
        if len(tokens) < 3 or tokens[0] != "CFLD":
            raise ValueError(f"{path}: not a CFLD field dump")
        ndim = int(tokens[1])
        dims = tuple(int(t) for t in tokens[2:2 + ndim])
        component = tokens[2 + ndim]
        lifted = "periodic:theta" in tokens[3 + ndim:]
        flat = np.array(fh.read().split(), dtype=float)
    grid = Grid.from_dims(dims, periodic_last=lifted)
    return grid, _unflatten(grid, flat, component), component


def _sidecar(path):
    return Path(str(path) + ".json")


def save_binary(path, grid, values, component):
    flat = _flatten(grid, values, component)
    np.asarray(flat, dtype="<f8").tofile(path)
    meta = {"dims": list(grid.dims), "component": component, "mode": grid.mode}
    _sidecar(path).write_text(json.dumps(meta))


def load_binary(path):
    meta = json.loads(_sidecar(path).read_text())
    grid = Grid.from_dims(tuple(meta["dims"]), periodic_last=meta.get("mode") == "lifted")
    flat = np.fromfile(path, dtype="<f8")
    return grid, _unflatten(grid, flat, meta["component"]), meta["component"]


def save_field(path, grid, values, component, binary=False):
    (save_binary if binary else save_text)(path, grid, values, component)


def load_field(path):
    """Load a dump, choosing the binary reader when a sidecar exists."""
    return load_binary(path) if _sidecar(path).exists() else load_text(path)


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1))


def read_json(path):
    return json.loads(Path(path).read_text())


# ----------------------------------------------------------------------
# potentials


def _read_raw_volume(path):
    meta = json.loads(_sidecar(path).read_text())
    try:
        shape = (int(meta["nx"]), int(meta["ny"]), int(meta["nz"]))
    except KeyError as exc:
        raise ValueError(f"{path}: volume sidecar needs nx, ny, nz") from exc
    data = np.fromfile(path, dtype="<f4")
    if data.size != np.prod(shape):
        raise ValueError(f"{path}: expected {np.prod(shape)} float32 values, found {data.size}")
    return data.reshape(shape).astype(float)


def read_image(path):
    """Grayscale image (PGM/PNG/...) or raw float32 volume as a float array."""
    path = Path(path)
    if path.suffix.lower() in (".raw", ".f32"):
        return _read_raw_volume(path)
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "I", "I;16", "I;16B", "F"):
                im = im.convert("L")
            return np.asarray(im, dtype=float)
    except (OSError, ValueError) as exc:
        raise ValueError(f"cannot read image {path}: {exc}") from exc


def normalize_potential(img, blur=None):
    """Optionally blur (reflective boundary), then rescale min to 0 and max to 1."""
    img = np.asarray(img, dtype=float)
    if blur:
        img = ndimage.gaussian_filter(img, float(blur), mode="reflect")
    lo, hi = float(img.min()), float(img.max())
    if not hi > lo:
        raise ValueError("the image is constant; a potential needs some dynamic range")
    return (img - lo) / (hi - lo)


def ingest_potential(path, blur=None):
    """Potential ``g`` in ``[0, 1]`` from an image file; dark structures get low ``g``."""
    return normalize_potential(read_image(path), blur)


def save_potential_image(path, g):
    """Write a 2D potential as an 8-bit grayscale image."""
    g = np.asarray(g, dtype=float)
    Image.fromarray(np.round(255 * np.clip(g, 0, 1)).astype(np.uint8)).save(path)


def save_raw_volume(path, g):
    g = np.asarray(g)
    g.astype("<f4").tofile(path)
    nx, ny, nz = g.shape
    _sidecar(path).write_text(json.dumps({"nx": nx, "ny": ny, "nz": nz}))
