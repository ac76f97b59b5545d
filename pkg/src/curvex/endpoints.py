"""Automatic endpoint placement: move Dirac masses until the curves fill ``{g <= gmax}``.

Each outer iteration solves the convex problem for the current masses
(warm-started), then moves every mass by one pixel according to the first
applicable rule:

a. shortening -- ``g > gmax`` under the mass: step along the shortening
   direction;
b. lengthening along the curve -- lowest-``g`` unvisited pixel among the
   pixel opposite the shortening direction and its two 45 degree neighbours;
c. lengthening orthogonally -- same, among the two pixels at 90 degrees;
d. shifting -- same, among the two pixels at 45 degrees of the shortening
   direction.

Candidates in b-d need ``g <= gmax``. Opposite masses that end up in each
other's 3x3 neighbourhood are removed. In lifted mode the angle index of a
mass is nudged so that no angular flux crosses the endpoint.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import pdhg
from .diracs import LENGTHENING, SHORTENING, SINK, SOURCE, DiracMass, dirac_field, total_mass
from .energies import AngleTable, EnergySpec
from .grid import AVERAGE, Grid
from .rototrans import marginalize
from .spectral import project_divergence
from .tracing import bundle_curves, trace_curves

log = logging.getLogger(__name__)

# the eight neighbours, counter-clockwise from +axis0, 45 degrees apart
DIRECTIONS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))

CASE_SHORTEN = "a"
CASE_LENGTHEN = "b"
CASE_ORTHOGONAL = "c"
CASE_SHIFT = "d"
CONVERGED = "converged"
NO_ORIENTATION = "none"
MOVES = (CASE_SHORTEN, CASE_LENGTHEN, CASE_ORTHOGONAL, CASE_SHIFT)


@dataclass
class BilevelConfig:
    """Parameters of the endpoint search.

    ``inner_steps`` PDHG steps are run per outer iteration, ``post_steps``
    for the final solve after merging.
    """

    n_pairs: int = 15
    gmax: float = 0.5
    inner_steps: int = 60
    post_steps: int = 5000
    max_outer: int = 500
    seed: int = 0
    theta_flux_threshold: float = 0.1
    overlap_frac: float = 0.5
    angle_tol: float = 30.0
    n_angles: int = 30
    gradient_probe: bool = False
    pair_radius: int = 2

    def __post_init__(self):
        if not 0.0 < self.gmax < 1.0:
            raise ValueError("gmax must lie in (0, 1)")
        if self.n_pairs < 1:
            raise ValueError("n_pairs must be >= 1")
        if self.inner_steps < 1 or self.post_steps < 0 or self.max_outer < 0:
            raise ValueError("step counts must be non-negative (inner_steps >= 1)")


# ----------------------------------------------------------------------
# initialisation


def init_pairs(g, config, rng=None, n_angles=None):
    """Random (source, sink) pairs in the sublevel set ``{g <= gmax}``.

    The sink is drawn among sublevel pixels at Chebyshev distance exactly
    ``pair_radius`` from the source (falling back to any closer sublevel
    pixel, then to the lowest-``g`` 8-neighbour). In lifted mode both masses
    get the angle of the source-to-sink direction.
    """
    g = np.asarray(g, dtype=float)
    rng = np.random.default_rng(config.seed) if rng is None else rng
    low = g <= config.gmax
    cand = np.argwhere(low)
    if len(cand) == 0:
        raise ValueError(f"the sublevel set {{g <= {config.gmax}}} is empty")
    n, m = g.shape
    r = config.pair_radius
    masses = []
    for _ in range(config.n_pairs):
        i, j = (int(v) for v in cand[rng.integers(len(cand))])
        ring, inner = [], []
        for di in range(-r, r + 1):
            for dj in range(-r, r + 1):
                a, b = i + di, j + dj
                if (di, dj) == (0, 0) or not (0 <= a < n and 0 <= b < m) or not low[a, b]:
                    continue
                (ring if max(abs(di), abs(dj)) == r else inner).append((a, b))
        pool = ring or inner
        if pool:
            partner = pool[rng.integers(len(pool))]
        else:
            nbrs = [(i + di, j + dj) for di, dj in DIRECTIONS if 0 <= i + di < n and 0 <= j + dj < m]
            partner = min(nbrs, key=lambda q: (g[q], q))
        angle = None
        if n_angles is not None:
            d = (partner[0] - i, partner[1] - j)
            angle = AngleTable(n_angles).nearest(d)
        masses.append(DiracMass((i, j), SOURCE, angle))
        masses.append(DiracMass(partner, SINK, angle))
    return masses


# ----------------------------------------------------------------------
# orientation


def flow_direction(grid, z, pos, tol=1e-9):
    """Unit mean of the node-averaged field over the 3x3 window around ``pos``.

    Returns ``None`` when the mean is below ``tol`` in norm.
    """
    v = grid.average(z, AVERAGE)
    i, j = pos
    win = v[:, max(i - 1, 0):i + 2, max(j - 1, 0):j + 2]
    mean = win.reshape(2, -1).mean(axis=1)
    norm = float(np.hypot(mean[0], mean[1]))
    if norm < tol:
        return None
    return mean / norm


def estimate_orientation(grid, z, pos, tol=1e-9):
    """Alias of :func:`flow_direction` (the local curve orientation)."""
    return flow_direction(grid, z, pos, tol)


def shortening_direction(grid, z, mass, tol=1e-9):
    """Direction that moves ``mass`` back along its own curve.

    A sink (+1) receives flow, so the curve lies upstream: ``-v``. A source
    (-1) emits flow, so the curve lies downstream: ``+v``.
    """
    v = flow_direction(grid, z, mass.pos[:2], tol)
    if v is None:
        return None
    return -mass.sign * v


def direction_index(d):
    ang = np.arctan2(d[1], d[0])
    return int(np.round(ang / (np.pi / 4))) % 8


# ----------------------------------------------------------------------
# moves


def move_mass(mass, grid, z, g, gmax):
    """Apply the first matching move rule to ``mass`` in place; return the case label."""
    d = shortening_direction(grid, z, mass)
    if d is None:
        return NO_ORIENTATION
    s = direction_index(d)
    n, m = g.shape
    i, j = mass.pos

    def inside(q):
        return 0 <= q[0] < n and 0 <= q[1] < m

    def step(k):
        di, dj = DIRECTIONS[k % 8]
        return (i + di, j + dj)

    if g[i, j] > gmax:
        assert mass.stage == SHORTENING, "a lengthening mass may not return to shortening"
        q = step(s)
        if inside(q):
            mass.pos = q
            mass.visited.add(q)
            mass.converged = False
            return CASE_SHORTEN
        mass.converged = True
        return CONVERGED
    for case, offsets in (
        (CASE_LENGTHEN, (4, 3, 5)),
        (CASE_ORTHOGONAL, (2, 6)),
        (CASE_SHIFT, (1, 7)),
    ):
        options = [step(s + o) for o in offsets]
        options = [q for q in options if inside(q) and g[q] <= gmax and q not in mass.visited]
        if options:
            q = min(options, key=lambda q: (g[q], q))
            mass.pos = q
            mass.visited.add(q)
            mass.stage = LENGTHENING
            mass.converged = False
            return case
    mass.converged = True
    return CONVERGED


def merge_close_opposites(masses):
    """Remove ``(+1, -1)`` pairs lying in each other's 3x3 neighbourhood.

    Sinks are scanned in row-major order; each is paired with the
    row-major-first unmatched source within Chebyshev distance 1.
    """
    keep = list(masses)
    while True:
        sinks = sorted((m for m in keep if m.sign == SINK), key=lambda m: m.pos)
        sources = sorted((m for m in keep if m.sign == SOURCE), key=lambda m: m.pos)
        pair = None
        for t in sinks:
            for s in sources:
                if max(abs(a - b) for a, b in zip(s.pos, t.pos)) <= 1:
                    pair = (s, t)
                    break
            if pair:
                break
        if pair is None:
            return keep
        keep = [m for m in keep if m is not pair[0] and m is not pair[1]]


def update_theta(mass, grid, z, threshold=0.1):
    """New angle index for a lifted mass so that no angular flux crosses it.

    The angular component of the averaged field at the mass,
    ``(z[k - 1/2] + z[k + 1/2]) / 2``, tells which way the flow turns there.
    A source (flow leaving) moves towards it, a sink (flow entering) away
    from it. Nothing changes when its magnitude is below ``threshold``.
    """
    K = grid.n_angles
    parts = grid.split(z)
    i, j = mass.pos[:2]
    k = int(mass.angle)
    flux = 0.5 * (parts[2][i, j, (k - 1) % K] + parts[2][i, j, k])
    if abs(flux) <= threshold:
        return k
    return (k - mass.sign * int(np.sign(flux))) % K


# ----------------------------------------------------------------------
# post-processing


def _chebyshev(a, b):
    return max(abs(x - y) for x, y in zip(a, b))


def _overlap(short, other_set):
    hits = 0
    for n in short:
        i, j = n
        if any((i + di, j + dj) in other_set for di in (-1, 0, 1) for dj in (-1, 0, 1)):
            hits += 1
    return hits / max(len(short), 1)


def _axis_angle(a, b):
    """Unoriented angle (degrees, in [0, 90]) between chords a and b."""
    da = np.subtract(a[1], a[0])
    db = np.subtract(b[1], b[0])
    na, nb = np.hypot(*da), np.hypot(*db)
    if na == 0 or nb == 0:
        return 0.0
    c = abs(float(np.dot(da, db))) / (na * nb)
    return float(np.degrees(np.arccos(min(c, 1.0))))


def postprocess_merge(curves, masses, overlap_frac=0.5, angle_tol=30.0, min_flux=0.5):
    """Merge pairs whose curves superpose with the same orientation.

    Traced paths are grouped by their (source node, sink node) and the group
    claims one distinct mass at each end per unit of flux it carries, so
    pairs stacked on the same pixels become separate, identical curves.
    Two curves are merged when at least ``overlap_frac`` of the shorter
    one's nodes lie within one pixel of the other and their chords agree
    within ``angle_tol`` degrees. Of the two sources and two sinks, the
    source/sink pair farthest apart is kept and the other two masses are
    dropped. Groups carrying less than ``min_flux`` are ignored.
    """
    masses = list(masses)
    pools = {}
    for m in masses:
        pools.setdefault((m.pos[:2], m.sign), []).append(m)

    claims = {}

    def claim(node, sign):
        pool = pools.get((node, sign))
        if not pool:
            return None
        k = claims.get((node, sign), 0)
        claims[(node, sign)] = k + 1
        return pool[k % len(pool)]

    items = []
    for c in sorted(bundle_curves(curves, min_flux), key=lambda c: (c.source[:2], c.sink[:2])):
        nodes = c.planar_nodes()
        x, y = nodes[0], nodes[-1]
        if x == y:
            continue
        pool_x, pool_y = pools.get((x, SOURCE), []), pools.get((y, SINK), [])
        for _ in range(min(max(1, int(round(c.flux))), len(pool_x), len(pool_y))):
            items.append(_merge_item(nodes, claim(x, SOURCE), claim(y, SINK)))

    dropped = set()
    merged = True
    while merged:
        merged = False
        a = 0
        while a < len(items):
            b = a + 1
            while b < len(items):
                ca, cb = items[a], items[b]
                joined = _try_merge(ca, cb, overlap_frac, angle_tol)
                if joined is None:
                    b += 1
                    continue
                s, t = joined
                for m in (ca["src"], ca["snk"], cb["src"], cb["snk"]):
                    if m is not s and m is not t:
                        dropped.add(id(m))
                nodes = ca["nodes"] + [n for n in cb["nodes"] if n not in ca["set"]]
                items[a] = _merge_item(nodes, s, t)
                del items[b]
                # other curves may share a dropped mass; they now end at the kept one
                for it in items:
                    if id(it["src"]) in dropped:
                        it["src"] = s
                    if id(it["snk"]) in dropped:
                        it["snk"] = t
                merged = True
            a += 1
    return [m for m in masses if id(m) not in dropped]


def _merge_item(nodes, src, snk):
    arr = np.asarray(nodes)
    return {"nodes": nodes, "set": set(nodes), "src": src, "snk": snk,
            "box": (arr.min(axis=0) - 1, arr.max(axis=0) + 1)}


def _try_merge(ca, cb, overlap_frac, angle_tol):
    """The (source, sink) to keep when ``ca`` and ``cb`` should merge, else None."""
    if np.any(ca["box"][1] < cb["box"][0]) or np.any(cb["box"][1] < ca["box"][0]):
        return None
    srcs = {id(ca["src"]): ca["src"], id(cb["src"]): cb["src"]}
    snks = {id(ca["snk"]): ca["snk"], id(cb["snk"]): cb["snk"]}
    if len(srcs) != len(snks):
        return None
    short, other = (ca, cb) if len(ca["nodes"]) <= len(cb["nodes"]) else (cb, ca)
    if _overlap(short["nodes"], other["set"]) < overlap_frac:
        return None
    chord_a = (ca["src"].pos[:2], ca["snk"].pos[:2])
    chord_b = (cb["src"].pos[:2], cb["snk"].pos[:2])
    if _axis_angle(chord_a, chord_b) > angle_tol:
        return None
    return max(
        ((s, t) for s in srcs.values() for t in snks.values()),
        key=lambda st: (np.hypot(*np.subtract(st[0].pos[:2], st[1].pos[:2])), st[0].pos, st[1].pos),
    )


# ----------------------------------------------------------------------
# bi-level driver


def bilevel_objective(grid, z, spec):
    """``sum_n (g_n - gmax) |(A z)_n|`` on the image grid."""
    v = grid.average(z, spec.a_mode)
    return float(np.sum((spec.weight - spec.gmax) * np.sqrt(np.sum(v * v, axis=0))))


@dataclass
class BilevelResult:
    grid: Grid
    state: pdhg.SolverState
    masses: list
    curves: list
    snapshots: list = field(default_factory=list)
    n_outer: int = 0

    @property
    def planar_z(self):
        if self.grid.lifted:
            return marginalize(self.grid, self.state.z)
        return self.state.z


def _snapshot(it, masses, curves=None):
    snap = {"iteration": it, "masses": [m.to_record() for m in masses]}
    if curves is not None:
        snap["curves"] = [c.to_record() for c in curves]
    return snap


def _fixed(steps, seed):
    return pdhg.SolverConfig(max_steps=steps, check_every=max(steps, 1), energy_rel_tol=0.0, seed=seed)


def run_bilevel(g, config, spec=None, masses=None, callback=None):
    """Alternate PDHG solves and mass moves until no mass moves.

    Parameters
    ----------
    g : ndarray
        2D potential in ``[0, 1]``.
    config : BilevelConfig
    spec : EnergySpec, optional
        Energy to use; defaults to the averaged l2 energy on ``g``. A
        curvature energy switches to the lifted domain.
    masses : list of DiracMass, optional
        Initial masses (default: :func:`init_pairs`).
    callback : callable, optional
        Called with each snapshot dict.
    """
    g = np.asarray(g, dtype=float)
    if g.ndim != 2:
        raise ValueError("endpoint search is only defined for 2D images")
    spec = spec or EnergySpec("l2a", g)
    if spec.gmax is None:
        spec = EnergySpec(spec.family, spec.weight, spec.alpha, config.gmax)
    lifted = spec.family.is_roto
    n, m = g.shape
    grid = Grid(n, m, n_angles=config.n_angles) if lifted else Grid(n, m)
    planar = grid.planar
    rng = np.random.default_rng(config.seed)
    if masses is None:
        masses = init_pairs(g, config, rng, n_angles=config.n_angles if lifted else None)
    masses = merge_close_opposites(list(masses))
    inner = _fixed(config.inner_steps, config.seed)
    state = None
    snapshots = []
    it = 0
    for it in range(1, config.max_outer + 1):
        mu = dirac_field(grid, masses)
        state, _ = pdhg.solve(grid, spec, mu, inner, warm=state)
        zp = marginalize(grid, state.z) if lifted else state.z
        moved = False
        for mass in masses:
            case = move_mass(mass, planar, zp, g, config.gmax)
            moved |= case in MOVES
            if lifted:
                k = update_theta(mass, grid, state.z, config.theta_flux_threshold)
                if k != mass.angle:
                    mass.angle = k
                    moved = True
        masses = merge_close_opposites(masses)
        assert total_mass(masses) == 0
        snap = _snapshot(it, masses)
        snapshots.append(snap)
        if callback:
            callback(snap)
        log.info("outer %d: %d masses, moved=%s", it, len(masses), moved)
        if not moved or not masses:
            break

    mu = dirac_field(grid, masses)
    if state is None:
        state, _ = pdhg.solve(grid, spec, mu, inner)
    if config.gradient_probe and masses:
        state = _gradient_probe(grid, spec, g, masses, state, inner)
        mu = dirac_field(grid, masses)

    curves, _ = trace_curves(grid, project_divergence(grid, state.z, mu), masses)
    masses = postprocess_merge(curves, masses, config.overlap_frac, config.angle_tol)
    mu = dirac_field(grid, masses)
    state, _ = pdhg.solve(grid, spec, mu, _fixed(config.post_steps, config.seed), warm=state)
    curves, _ = trace_curves(grid, state.z, masses)
    final = _snapshot(it + 1, masses, curves)
    snapshots.append(final)
    if callback:
        callback(final)
    return BilevelResult(grid, state, masses, curves, snapshots, it)


def _gradient_probe(grid, spec, g, masses, state, inner):
    """Try shifting each mass one pixel down the gradient of ``g``; keep improvements."""
    gi, gj = np.gradient(g)
    planar = grid.planar

    def objective(st):
        z = marginalize(grid, st.z) if grid.lifted else st.z
        return bilevel_objective(planar, z, spec)

    best = objective(state)
    n, m = g.shape
    for mass in masses:
        i, j = mass.pos
        d = (-gi[i, j], -gj[i, j])
        if np.hypot(*d) == 0:
            continue
        di, dj = DIRECTIONS[direction_index(d)]
        q = (i + di, j + dj)
        if not (0 <= q[0] < n and 0 <= q[1] < m):
            continue
        old = mass.pos
        mass.pos = q
        trial, _ = pdhg.solve(grid, spec, dirac_field(grid, masses), inner, warm=state)
        value = objective(trial)
        if value < best:
            best, state = value, trial
            mass.visited.add(q)
        else:
            mass.pos = old
    return state
