"""Greedy decomposition of a divergence-feasible edge field into source-to-sink paths."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import TraceError

FLUX_EPS = 1e-6


@dataclass
class Curve:
    """A traced path: node indices from a source to a sink, and the flux it carries."""

    nodes: list
    flux: float
    complete: bool = True

    @property
    def source(self):
        return self.nodes[0]

    @property
    def sink(self):
        return self.nodes[-1]

    def planar_nodes(self):
        """Nodes with the angle coordinate dropped, consecutive repeats removed."""
        out = []
        for n in self.nodes:
            xy = tuple(n[:2])
            if not out or out[-1] != xy:
                out.append(xy)
        return out

    def to_record(self):
        return {"nodes": [list(map(int, n)) for n in self.nodes], "flux": float(self.flux)}

    @classmethod
    def from_record(cls, rec):
        return cls([tuple(n) for n in rec["nodes"]], float(rec["flux"]))


class _EdgeGraph:
    """Oriented view of an edge field: neighbours and signed edge access."""

    def __init__(self, grid, z):
        self.grid = grid
        self.parts = [part.copy() for part in grid.split(np.asarray(z, dtype=float))]
        self.dims = grid.dims

    def moves(self, node):
        """Yield ``(flux leaving node, axis, edge index, step sign, neighbour)``."""
        for a, n in enumerate(self.dims):
            part = self.parts[a]
            i = node[a]
            periodic = self.grid.periodic[a]
            # forward edge: node -> node + e_a, stored at index i
            if periodic or i < n - 1:
                e = node[:a] + (i,) + node[a + 1:]
                nb = node[:a] + ((i + 1) % n,) + node[a + 1:]
                yield part[e], a, e, 1, nb
            # backward edge: node -> node - e_a, stored at index i - 1
            if periodic or i > 0:
                j = (i - 1) % n
                e = node[:a] + (j,) + node[a + 1:]
                nb = node[:a] + (j,) + node[a + 1:]
                yield -part[e], a, e, -1, nb

    def best_move(self, node):
        best = None
        for move in self.moves(node):
            if best is None or move[0] > best[0]:
                best = move
        return best

    def push(self, a, e, direction, amount):
        self.parts[a][e] -= direction * amount

    def residual(self):
        return np.concatenate([p.ravel() for p in self.parts])


def trace_curves(grid, z, masses, eps=FLUX_EPS, max_paths_per_source=64):
    """Decompose ``z`` into paths from the ``-1`` masses to the ``+1`` masses.

    From each source the walk repeatedly follows the incident edge with the
    largest remaining outgoing flux until it reaches a sink with remaining
    demand (or the flux drops below ``eps``); the path bottleneck is then
    subtracted. Cycles met on the way are cancelled.

    ``masses`` is an iterable of :class:`~curvex.diracs.DiracMass` or of
    ``(node, sign)`` pairs, nodes given on ``grid``.

    Returns
    -------
    curves : list of Curve
    residual : ndarray
        The edge field left after removing all paths.
    """
    graph = _EdgeGraph(grid, z)
    supply = {}
    demand = {}
    for m in masses:
        node, sign = (m.node, m.sign) if hasattr(m, "node") else m
        node = tuple(int(v) for v in node)
        if sign < 0:
            supply[node] = supply.get(node, 0.0) + 1.0
        else:
            demand[node] = demand.get(node, 0.0) + 1.0
    curves = []
    max_len = grid.n_nodes + 1
    for src in sorted(supply):
        for _ in range(max_paths_per_source):
            if supply[src] <= eps:
                break
            path = [src]
            edges = []
            where = {src: 0}
            node = src
            steps = 0
            reached = False
            while True:
                if node != src and demand.get(node, 0.0) > eps:
                    reached = True
                    break
                move = graph.best_move(node)
                if move is None or move[0] <= eps:
                    break
                _, a, e, d, nb = move
                edges.append((a, e, d))
                steps += 1
                if steps > 4 * max_len:
                    raise TraceError(f"trace from {src} exceeded {4 * max_len} steps")
                if nb in where:
                    # cancel the cycle nb -> ... -> node -> nb
                    start = where[nb]
                    cyc = edges[start:]
                    amount = min(d_ * graph.parts[a_][e_] for a_, e_, d_ in cyc)
                    for a_, e_, d_ in cyc:
                        graph.push(a_, e_, d_, amount)
                    for n_ in path[start + 1:]:
                        where.pop(n_, None)
                    del path[start + 1:]
                    del edges[start:]
                    node = nb
                    continue
                where[nb] = len(path)
                path.append(nb)
                node = nb
            if not edges:
                break
            amount = min(d * graph.parts[a][e] for a, e, d in edges)
            amount = min(amount, supply[src])
            if reached:
                amount = min(amount, demand[node])
            if amount <= eps:
                break
            for a, e, d in edges:
                graph.push(a, e, d, amount)
            supply[src] -= amount
            if reached:
                demand[node] -= amount
            curves.append(Curve(path, float(amount), complete=reached))
    return curves, graph.residual()


def bundle_curves(curves, min_flux=0.0):
    """One curve per (source, sink) pair of planar endpoints.

    Parallel paths between the same endpoints are one curve carrying their
    summed flux; the nodes are those of the strongest path. Bundles below
    ``min_flux`` and incomplete paths are left out.
    """
    groups = {}
    for c in curves:
        if not c.complete:
            continue
        key = (tuple(c.source[:2]), tuple(c.sink[:2]))
        flux, best = groups.get(key, (0.0, c))
        groups[key] = (flux + c.flux, c if c.flux > best.flux else best)
    return [Curve(best.nodes, flux) for flux, best in groups.values() if flux >= min_flux]
