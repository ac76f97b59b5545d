"""Input checks shared by the estimators and the command line."""
from __future__ import annotations

import numpy as np

from .diracs import DiracMass, parse_endpoint


def check_potential(g, ndim=(2, 3)):
    """Return ``g`` as a float array after checking shape, finiteness and range."""
    g = np.asarray(g, dtype=float)
    if g.ndim not in ndim:
        raise ValueError(f"potential must have {' or '.join(map(str, ndim))} dimensions, got shape {g.shape}")
    if min(g.shape) < 2:
        raise ValueError(f"every grid dimension must be >= 2, got {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("potential contains NaN or infinite values")
    if g.min() < 0 or g.max() > 1:
        raise ValueError(f"potential must lie in [0, 1], found [{g.min():.3g}, {g.max():.3g}]")
    return g


def check_endpoints(endpoints, dims):
    """Normalize endpoints to ``(node, sign)`` pairs and check bounds and balance.

    Accepts strings ``"i,j[,k]:+1"``, :class:`DiracMass` objects or
    ``(node, sign)`` pairs.
    """
    out = []
    for e in endpoints:
        if isinstance(e, str):
            node, sign = parse_endpoint(e)
        elif isinstance(e, DiracMass):
            node, sign = e.node, e.sign
        else:
            node, sign = e
            node = tuple(int(v) for v in node)
            if sign not in (-1, 1):
                raise ValueError(f"endpoint sign must be +1 or -1, got {sign!r}")
        if len(node) != len(dims):
            raise ValueError(f"endpoint {node} needs {len(dims)} coordinates")
        for v, n in zip(node, dims):
            if not 0 <= v < n:
                raise ValueError(f"endpoint {node} is outside the grid {tuple(dims)}")
        out.append((tuple(node), int(sign)))
    if not out:
        raise ValueError("at least one endpoint pair is required")
    total = sum(s for _, s in out)
    if total != 0:
        raise ValueError(f"endpoint signs must sum to zero, got {total:+d}")
    return out
