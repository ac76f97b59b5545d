"""Signed unit point masses (curve endpoints).

Sign convention: ``D^* z = mu`` with ``D^*`` minus the divergence, so a
curve carried from ``a`` to ``b`` has ``mu = delta_b - delta_a``. A ``-1``
mass is a source (flow leaves it), a ``+1`` mass a sink (flow arrives).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SOURCE = -1
SINK = +1

SHORTENING = "shortening"
LENGTHENING = "lengthening"


@dataclass
class DiracMass:
    """One endpoint. ``angle`` is the angle index in lifted mode."""

    pos: tuple
    sign: int
    angle: int | None = None
    visited: set = field(default_factory=set)
    stage: str = SHORTENING
    converged: bool = False

    def __post_init__(self):
        self.pos = tuple(int(v) for v in self.pos)
        if self.sign not in (-1, 1):
            raise ValueError(f"mass sign must be +1 or -1, got {self.sign!r}")
        self.visited.add(self.pos)

    @property
    def node(self):
        """Index of the mass on the grid it lives on."""
        if self.angle is None:
            return self.pos
        return self.pos + (int(self.angle),)

    def to_record(self):
        rec = {"i": self.pos[0], "j": self.pos[1], "sign": self.sign, "stage": self.stage}
        if len(self.pos) > 2:
            rec["l"] = self.pos[2]
        if self.angle is not None:
            rec["k"] = int(self.angle)
        return rec

    @classmethod
    def from_record(cls, rec):
        pos = (rec["i"], rec["j"]) + ((rec["l"],) if "l" in rec else ())
        m = cls(pos, int(rec["sign"]), rec.get("k"))
        m.stage = rec.get("stage", SHORTENING)
        return m


def total_mass(masses):
    return sum(m.sign for m in masses)


def dirac_field(grid, masses):
    """Node field ``mu`` accumulated from masses (or ``(node, sign)`` pairs)."""
    mu = grid.zeros_nodes()
    for m in masses:
        if isinstance(m, DiracMass):
            node, sign = m.node, m.sign
        else:
            node, sign = m
        node = tuple(int(v) for v in node)
        if len(node) != grid.ndim:
            raise ValueError(f"mass at {node} does not match a {grid.ndim}D grid")
        for v, n in zip(node, grid.dims):
            if not 0 <= v < n:
                raise IndexError(f"mass at {node} is outside the grid {grid.dims}")
        mu[node] += sign
    return mu


def parse_endpoint(text):
    """Parse ``"i,j[,k]:+1"`` into ``(node, sign)``."""
    try:
        coords, sign = text.split(":")
        node = tuple(int(c) for c in coords.split(","))
        sign = int(sign)
    except ValueError as exc:
        raise ValueError(f"cannot parse endpoint {text!r}; expected 'i,j[,k]:+1' or ':-1'") from exc
    if sign not in (-1, 1):
        raise ValueError(f"endpoint sign must be +1 or -1 in {text!r}")
    return node, sign


def check_balanced(endpoints):
    total = sum(s for _, s in endpoints)
    if total != 0:
        raise ValueError(f"endpoint signs must sum to zero, got {total:+d}")
    return np.array([s for _, s in endpoints])
