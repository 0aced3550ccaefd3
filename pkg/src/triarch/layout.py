"""ForceAtlas2-style layout with an optional Barnes-Hut repulsion path.

Forces per node u with mass m_u = deg(u) + 1:

* attraction along every edge, linear in distance;
* repulsion from every other node v, k_r * m_u * m_v / d;
* gravity toward the origin, k_g * m_u.

Speed adapts per node from the swing (change in force between iterations)
and globally from the ratio of traction to swing, as in Gephi's ForceAtlas2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from xml.sax.saxutils import escape

import numpy as np

from triarch.errors import NumericalBlowup
from triarch.graph import Snapshot, Stance, degree_stats

STANCE_COLORS = {Stance.ANTI: "#d62728", Stance.PRO: "#1f77b4", Stance.NEUTRAL: "#2ca02c"}


@dataclass(frozen=True)
class LayoutParams:
    scaling: float = 2.0  # k_r
    gravity: float = 1.0  # k_g
    theta: float = 1.2
    jitter_tolerance: float = 1.0
    speed: float = 0.1  # k_s, local speed factor
    max_speed: float = 10.0  # cap on displacement length per step
    tolerance: float = 1e-3  # stop when mean displacement falls below this
    max_iter: int = 500
    barnes_hut: bool = False

    def __post_init__(self):
        if not self.scaling > 0:
            raise ValueError("scaling must be > 0")
        if self.gravity < 0:
            raise ValueError("gravity must be >= 0")
        if self.theta < 0:
            raise ValueError("theta must be >= 0")
        for name in ("jitter_tolerance", "speed", "max_speed", "tolerance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")


@dataclass
class LayoutState:
    ids: list[str]
    positions: np.ndarray
    prev_forces: np.ndarray
    global_speed: float | None = None
    iteration: int = 0
    seed: int = 0
    last_displacement: float = field(default=math.inf)

    def as_dict(self) -> dict[str, tuple[float, float]]:
        return {nid: (float(x), float(y)) for nid, (x, y) in zip(self.ids, self.positions)}


def init_layout(s: Snapshot, seed: int = 0) -> LayoutState:
    """Seeded, distinct starting positions inside the unit disc."""
    rng = np.random.default_rng(seed)
    n = s.n
    r = np.sqrt(rng.random(n))
    phi = 2.0 * np.pi * rng.random(n)
    pos = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    pos = _separate_duplicates(pos, np.random.default_rng([seed, 0xD0]))
    return LayoutState(list(s.ids), pos, np.zeros_like(pos), seed=seed)


def _separate_duplicates(pos: np.ndarray, rng, eps: float = 1e-6) -> np.ndarray:
    if len(pos) < 2:
        return pos
    while True:
        _, first, counts = np.unique(pos, axis=0, return_index=True, return_counts=True)
        if not (counts > 1).any():
            return pos
        dup = np.ones(len(pos), dtype=bool)
        dup[first] = False
        pos = pos.copy()
        pos[dup] += rng.uniform(-eps, eps, size=(int(dup.sum()), 2))


def exact_repulsion(pos: np.ndarray, mass: np.ndarray, k_r: float, block: int = 512) -> np.ndarray:
    """O(n^2) pairwise repulsion, processed in row blocks."""
    n = len(pos)
    out = np.zeros((n, 2))
    for a in range(0, n, block):
        b = min(a + block, n)
        diff = pos[a:b, None, :] - pos[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        # overflow surfaces as non-finite forces, which step() reports
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            w = np.where(d2 > 0, mass[a:b, None] * mass[None, :] / d2, 0.0)
            out[a:b] = k_r * np.einsum("ij,ijk->ik", w, diff)
    return out


# -- Barnes-Hut ---------------------------------------------------------------

_TREE_DEPTH = 24


def _spread_bits(v: np.ndarray) -> np.ndarray:
    v = v.astype(np.uint64) & np.uint64(0xFFFFFFFF)
    for shift, mask in ((16, 0x0000FFFF0000FFFF), (8, 0x00FF00FF00FF00FF), (4, 0x0F0F0F0F0F0F0F0F),
                        (2, 0x3333333333333333), (1, 0x5555555555555555)):
        v = (v | (v << np.uint64(shift))) & np.uint64(mask)
    return v


@dataclass
class QuadTree:
    order: np.ndarray  # sorted position -> point index
    rank: np.ndarray  # point index -> sorted position
    width: np.ndarray  # per cell side length
    start: np.ndarray
    count: np.ndarray
    child_first: np.ndarray
    child_count: np.ndarray
    mass: np.ndarray
    com: np.ndarray


def build_quadtree(pos: np.ndarray, mass: np.ndarray, depth: int = _TREE_DEPTH) -> QuadTree:
    """Quadtree over Morton-sorted points, built level by level.

    A cell is a maximal run of points sharing a key prefix. Cells with one
    point, or at full depth, are leaves.
    """
    n = len(pos)
    lo = pos.min(axis=0)
    span = float((pos.max(axis=0) - lo).max())
    if span <= 0:
        span = 1.0
    span *= 1.0 + 1e-9
    side = 1 << depth
    q = np.clip(np.floor((pos - lo) / span * side), 0, side - 1).astype(np.int64)
    keys = _spread_bits(q[:, 0]) | (_spread_bits(q[:, 1]) << np.uint64(1))
    order = np.argsort(keys, kind="stable")
    skeys = keys[order]
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    cm = np.concatenate([[0.0], np.cumsum(mass[order])])
    cmp = np.vstack([np.zeros((1, 2)), np.cumsum(pos[order] * mass[order, None], axis=0)])

    starts = [np.array([0])]
    counts = [np.array([n])]
    levels = [np.array([0])]
    parents = [np.array([-1])]
    next_id = 1
    lvl_count, lvl_ids = np.array([n]), np.array([0])
    owner_of_point = np.zeros(n, dtype=np.int64)  # index into current level, -1 once settled
    for level in range(1, depth + 1):
        internal = lvl_count > 1
        if not internal.any():
            break
        prefix = skeys >> np.uint64(2 * (depth - level))
        is_break = np.concatenate([[True], prefix[1:] != prefix[:-1]])
        g_start = np.flatnonzero(is_break)
        g_count = np.diff(np.concatenate([g_start, [n]]))
        owner = owner_of_point[g_start]
        keep = owner >= 0
        keep[keep] = internal[owner[keep]]
        new_index = np.full(len(g_start), -1, dtype=np.int64)
        new_index[keep] = np.arange(int(keep.sum()))
        owner_of_point = new_index[np.cumsum(is_break) - 1]
        g_start, g_count, owner = g_start[keep], g_count[keep], owner[keep]
        ids = np.arange(next_id, next_id + len(g_start))
        next_id += len(g_start)
        starts.append(g_start)
        counts.append(g_count)
        levels.append(np.full(len(g_start), level))
        parents.append(lvl_ids[owner])
        lvl_count, lvl_ids = g_count, ids

    start = np.concatenate(starts)
    count = np.concatenate(counts)
    level = np.concatenate(levels)
    parent = np.concatenate(parents)
    ncell = len(start)
    child_count = np.bincount(parent[1:], minlength=ncell) if ncell > 1 else np.zeros(1, dtype=np.int64)
    child_first = np.full(ncell, -1, dtype=np.int64)
    if ncell > 1:
        # children of a cell are created consecutively, in key order
        child_ids = np.arange(1, ncell)
        first_of_parent = np.flatnonzero(np.concatenate([[True], parent[2:] != parent[1:-1]]))
        child_first[parent[1:][first_of_parent]] = child_ids[first_of_parent]
    cmass = cm[start + count] - cm[start]
    com = (cmp[start + count] - cmp[start]) / cmass[:, None]
    # prefix-sum differences round; single-point cells take the point exactly
    one = count == 1
    cmass[one] = mass[order[start[one]]]
    com[one] = pos[order[start[one]]]
    return QuadTree(order, rank, span / (2.0 ** level), start, count, child_first, child_count, cmass, com)


def barnes_hut_repulsion(pos, degrees, theta: float, k_r: float, return_stats: bool = False):
    """Repulsion forces approximated with a quadtree.

    A cell is treated as a single body at its center of mass when the point
    lies outside it and width / distance < theta. ``degrees`` are node degrees;
    masses are degree + 1. With ``return_stats`` the number of body-body and
    body-cell interactions evaluated is also returned.
    """
    pos = np.asarray(pos, dtype=float)
    mass = np.asarray(degrees, dtype=float) + 1.0
    n = len(pos)
    force = np.zeros((n, 2))
    if n < 2:
        return (force, 0) if return_stats else force
    tree = build_quadtree(pos, mass)
    th2 = theta * theta
    pi = np.arange(n)
    pc = np.zeros(n, dtype=np.int64)
    interactions = 0
    while pi.size:
        start = tree.start[pc]
        r = tree.rank[pi]
        inside = (r >= start) & (r < start + tree.count[pc])
        dx = pos[pi] - tree.com[pc]
        d2 = np.einsum("ij,ij->i", dx, dx)
        leaf = tree.child_count[pc] == 0
        single = tree.count[pc] == 1
        w = tree.width[pc]
        far = ~inside & (w * w < th2 * d2)
        use = (far | (leaf & single & ~inside)) & (d2 > 0)
        if use.any():
            f = (k_r * mass[pi[use]] * tree.mass[pc[use]] / d2[use])[:, None] * dx[use]
            np.add.at(force, pi[use], f)
            interactions += int(use.sum())
        bucket = leaf & ~single & ~far
        if bucket.any():
            bi, bc = pi[bucket], pc[bucket]
            cnt = tree.count[bc]
            rows = np.repeat(bi, cnt)
            offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            cols = tree.order[np.repeat(tree.start[bc], cnt) + offs]
            ok = rows != cols
            rows, cols = rows[ok], cols[ok]
            ddx = pos[rows] - pos[cols]
            dd2 = np.einsum("ij,ij->i", ddx, ddx)
            nz = dd2 > 0
            f = (k_r * mass[rows[nz]] * mass[cols[nz]] / dd2[nz])[:, None] * ddx[nz]
            np.add.at(force, rows[nz], f)
            interactions += int(nz.sum())
        descend = ~leaf & ~far
        if not descend.any():
            break
        di, dc = pi[descend], pc[descend]
        cc = tree.child_count[dc]
        pi = np.repeat(di, cc)
        pc = np.repeat(tree.child_first[dc], cc) + (np.arange(cc.sum()) - np.repeat(np.cumsum(cc) - cc, cc))
    return (force, interactions) if return_stats else force


# -- iteration ----------------------------------------------------------------


def _degrees(s: Snapshot) -> np.ndarray:
    stats = degree_stats(s)
    return np.array([stats[nid].total for nid in s.ids], dtype=float)


def compute_forces(pos: np.ndarray, s: Snapshot, params: LayoutParams, degrees: np.ndarray | None = None) -> np.ndarray:
    if degrees is None:
        degrees = _degrees(s)
    mass = degrees + 1.0
    if params.barnes_hut:
        force = barnes_hut_repulsion(pos, degrees, params.theta, params.scaling)
    else:
        force = exact_repulsion(pos, mass, params.scaling)
    if s.edges:
        arr = s.edge_array
        diff = pos[arr[:, 1]] - pos[arr[:, 0]]
        np.add.at(force, arr[:, 0], diff)
        np.add.at(force, arr[:, 1], -diff)
    if params.gravity > 0:
        norm = np.sqrt(np.einsum("ij,ij->i", pos, pos))
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(norm > 0, params.gravity * mass / norm, 0.0)
        force -= g[:, None] * pos
    return force


def step(state: LayoutState, s: Snapshot, params: LayoutParams, degrees: np.ndarray | None = None) -> LayoutState:
    """One synchronous ForceAtlas2 update; returns a new state."""
    if degrees is None:
        degrees = _degrees(s)
    mass = degrees + 1.0
    if not np.isfinite(state.positions).all():
        bad = state.ids[int(np.flatnonzero(~np.isfinite(state.positions).all(axis=1))[0])]
        raise NumericalBlowup(f"non-finite position for node {bad!r} at iteration {state.iteration}")
    rng = np.random.default_rng([state.seed, state.iteration, 0x51])
    pos = _separate_duplicates(state.positions, rng)
    force = compute_forces(pos, s, params, degrees)
    if not np.isfinite(force).all():
        bad = state.ids[int(np.flatnonzero(~np.isfinite(force).all(axis=1))[0])]
        raise NumericalBlowup(f"non-finite force on node {bad!r} at iteration {state.iteration}")

    swing = np.linalg.norm(force - state.prev_forces, axis=1)
    traction = 0.5 * np.linalg.norm(force + state.prev_forces, axis=1)
    total_swing = float(mass @ swing)
    total_traction = float(mass @ traction)
    speed = state.global_speed
    if total_swing > 0:
        target = params.jitter_tolerance * total_traction / total_swing
        speed = target if speed is None else min(target, 1.5 * speed)
    elif speed is None:
        speed = 1.0

    local = params.speed * speed / (1.0 + speed * np.sqrt(swing))
    fnorm = np.linalg.norm(force, axis=1)
    with np.errstate(divide="ignore"):
        cap = np.where(fnorm > 0, params.max_speed / fnorm, np.inf)
    local = np.minimum(local, cap)
    disp = local[:, None] * force
    new_pos = pos + disp
    if not np.isfinite(new_pos).all():
        bad = state.ids[int(np.flatnonzero(~np.isfinite(new_pos).all(axis=1))[0])]
        raise NumericalBlowup(f"non-finite position for node {bad!r} at iteration {state.iteration}")
    mean_disp = float(np.linalg.norm(disp, axis=1).mean()) if len(disp) else 0.0
    return replace(
        state,
        positions=new_pos,
        prev_forces=force,
        global_speed=speed,
        iteration=state.iteration + 1,
        last_displacement=mean_disp,
    )


def run_layout_state(s: Snapshot, params: LayoutParams = LayoutParams(), seed: int = 0) -> LayoutState:
    state = init_layout(s, seed)
    if s.n == 0:
        return state
    degrees = _degrees(s)
    for _ in range(params.max_iter):
        state = step(state, s, params, degrees)
        if state.last_displacement < params.tolerance:
            break
    return state


def run_layout(s: Snapshot, params: LayoutParams = LayoutParams(), seed: int = 0) -> dict[str, tuple[float, float]]:
    """Iterate to ``max_iter`` or until mean displacement drops below ``tolerance``."""
    return run_layout_state(s, params, seed).as_dict()


def layout_rows(positions: dict[str, tuple[float, float]]):
    for nid in sorted(positions):
        x, y = positions[nid]
        yield nid, repr(x), repr(y)


def render_svg(s: Snapshot, positions, sizes=None, colors=None, margin: float = 50.0, canvas: float = 1000.0) -> str:
    """SVG with one line per edge, then one circle per node, each sorted by id."""
    colors = colors or {}
    sizes = sizes or {}
    if positions:
        xy = np.array([positions[nid] for nid in s.ids])
        lo = xy.min(axis=0)
        span = float((xy.max(axis=0) - lo).max()) or 1.0
    else:
        lo, span = np.zeros(2), 1.0
    scale = (canvas - 2 * margin) / span

    def tr(nid):
        x, y = positions[nid]
        return margin + (x - lo[0]) * scale, margin + (y - lo[1]) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{canvas:g}" height="{canvas:g}" '
           f'viewBox="0 0 {canvas:g} {canvas:g}">']
    for e in sorted(s.edges):
        (x1, y1), (x2, y2) = tr(e.source), tr(e.target)
        out.append(f'<line x1="{x1:.3f}" y1="{y1:.3f}" x2="{x2:.3f}" y2="{y2:.3f}" '
                   f'stroke="#999999" stroke-opacity="0.4" stroke-width="0.5"/>')
    for node in s.nodes:
        x, y = tr(node.id)
        fill = colors.get(node.id, STANCE_COLORS[node.stance])
        radius = sizes.get(node.id, 4.0) / 2.0
        out.append(f'<circle id="{escape(node.id, {chr(34): "&quot;"})}" cx="{x:.3f}" cy="{y:.3f}" '
                   f'r="{radius:.3f}" fill="{fill}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
