"""Lazy buffer allocation over a primitive plan.

The primitive plan is replayed step by step. Each buffered object collects
the poses it must avoid (its constraints); after every step the buffer
generator is asked for poses meeting all constraints, keeping old buffers
that still qualify. The first step where generation fails ends the replay.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CheckCounter, Disc, Pose, bounding_radius, collides, contained
from .model import _sample_positions
from .primitive import B2G, S2B, S2G

SAMPLE_BUDGET = 100
OPT_RESTARTS = 20
OPT_ITERS = 500
OPT_STEP = 0.05
OPT_TOL = 1e-7
OPT_MARGIN = 1e-6  # clearance demanded by the optimiser so strict predicates agree

SP, OPT = "SP", "OPT"


class UnsupportedShape(ValueError):
    pass


@dataclass
class AllocationResult:
    buffers: dict
    terminating_step: int | None  # None: every primitive action was instantiated

    @property
    def success(self) -> bool:
        return self.terminating_step is None


def _as_rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _clear(shape, pose, obstacles, counter) -> bool:
    return not any(collides(shape, pose, s, p, counter) for s, p in obstacles)


def _sample_one(shape, obstacles, inst, rng, counter, budget=SAMPLE_BUDGET):
    """First of ``budget`` uniform contained poses that avoids every obstacle."""
    xs, ys, ths = _sample_positions(rng, shape, inst.workspace, budget)
    if not obstacles:
        return Pose(float(xs[0]), float(ys[0]), float(ths[0]))
    ox = np.array([p.x for _, p in obstacles])
    oy = np.array([p.y for _, p in obstacles])
    d = np.hypot(xs[:, None] - ox[None, :], ys[:, None] - oy[None, :])
    if isinstance(shape, Disc) and all(isinstance(s, Disc) for s, _ in obstacles):
        rr = np.array([s.radius for s, _ in obstacles]) + shape.radius
        ok = np.all(d >= rr[None, :] - 1e-9, axis=1)
        idx = np.flatnonzero(ok)
        tried = int(idx[0]) + 1 if idx.size else budget
        if counter is not None:
            counter.add(tried * len(obstacles))
        if not idx.size:
            return None
        c = int(idx[0])
        return Pose(float(xs[c]), float(ys[c]), float(ths[c]))
    br = np.array([bounding_radius(s) for s, _ in obstacles]) + bounding_radius(shape)
    near = d < br[None, :]
    for c in range(budget):
        cand = Pose(float(xs[c]), float(ys[c]), float(ths[c]))
        if all(not collides(shape, cand, obstacles[k][0], obstacles[k][1], counter)
               for k in np.flatnonzero(near[c])):
            return cand
    return None


def _keep_valid(need, constraints, keep, inst, counter):
    """Old buffers that still satisfy their constraints and each other, in ``need`` order."""
    shapes = inst.shapes
    kept = {}
    for o in need:
        p = keep.get(o)
        if p is None or not contained(shapes[o], p, inst.workspace):
            continue
        obstacles = list(constraints.get(o, ())) + [(shapes[b], kept[b]) for b in kept]
        if _clear(shapes[o], p, obstacles, counter):
            kept[o] = p
    return kept


def sample_buffers(need, constraints, keep, inst, seed=None, counter: CheckCounter | None = None):
    """Sample buffer poses for ``need`` one object at a time.

    Returns (success, assignment for every id in ``need``). Still-valid
    buffers from ``keep`` are reused unchanged; the rest are sampled with
    earlier buffers acting as obstacles. If that fails while some buffers
    were kept, everything is resampled once from scratch so a kept buffer
    can make room.
    """
    rng = _as_rng(seed)
    need = list(need)
    if not need:
        return True, {}
    shapes = inst.shapes
    kept = _keep_valid(need, constraints, keep, inst, counter)
    attempts = [kept, {}] if kept else [{}]
    for base in attempts:
        result = dict(base)
        for o in need:
            if o in result:
                continue
            obstacles = list(constraints.get(o, ())) + [(shapes[b], result[b]) for b in result]
            p = _sample_one(shapes[o], obstacles, inst, rng, counter)
            if p is None:
                break
            result[o] = p
        else:
            return True, {o: result[o] for o in need}
    return False, {}


def _optimise(var_r, fixed, bounds, init, rng):
    """Projected gradient descent on squared overlap of discs.

    var_r: radii of the m free discs; fixed: per free disc, (k_i, 3) array of
    obstacle (x, y, r); bounds: (m, 4) lo_x, hi_x, lo_y, hi_y.
    Returns positions (m, 2) or None.
    """
    m = len(var_r)
    kmax = max((len(f) for f in fixed), default=0)
    ox = np.zeros((m, max(kmax, 1)))
    oy = np.zeros_like(ox)
    orr = np.zeros_like(ox)
    omask = np.zeros_like(ox, dtype=bool)
    for i, f in enumerate(fixed):
        if len(f):
            ox[i, :len(f)], oy[i, :len(f)], orr[i, :len(f)] = f[:, 0], f[:, 1], f[:, 2]
            omask[i, :len(f)] = True
    sep_fixed = orr + var_r[:, None] + OPT_MARGIN
    sep_pair = var_r[:, None] + var_r[None, :] + OPT_MARGIN
    upper = np.triu(np.ones((m, m), dtype=bool), 1)
    lo = bounds[:, [0, 2]]
    hi = bounds[:, [1, 3]]
    for restart in range(OPT_RESTARTS):
        if restart == 0 and init is not None:
            X = init.copy()
        else:
            X = lo + rng.random((m, 2)) * (hi - lo)
        for _ in range(OPT_ITERS):
            dx = X[:, 0:1] - ox
            dy = X[:, 1:2] - oy
            d = np.hypot(dx, dy)
            d = np.where(d < 1e-12, 1e-12, d)
            v = np.where(omask, np.maximum(0.0, sep_fixed - d), 0.0)
            gx = -2.0 * np.sum(v * dx / d, axis=1)
            gy = -2.0 * np.sum(v * dy / d, axis=1)
            worst = v.max() if v.size else 0.0
            if m > 1:
                px = X[:, 0:1] - X[:, 0][None, :]
                py = X[:, 1:2] - X[:, 1][None, :]
                pd = np.hypot(px, py)
                np.fill_diagonal(pd, np.inf)
                pd = np.where(pd < 1e-12, 1e-12, pd)
                pv = np.maximum(0.0, sep_pair - pd)
                np.fill_diagonal(pv, 0.0)
                gx -= 2.0 * np.sum(pv * px / pd, axis=1)
                gy -= 2.0 * np.sum(pv * py / pd, axis=1)
                worst = max(worst, float((pv * upper).max()))
            if worst < OPT_TOL:
                return X
            X = np.clip(X - OPT_STEP * np.stack([gx, gy], axis=1), lo, hi)
    return None


def optimize_buffers(need, constraints, keep, inst, seed=None, counter: CheckCounter | None = None):
    """Buffer poses for ``need`` from a penalised feasibility problem (discs only).

    Same contract as ``sample_buffers``.
    """
    rng = _as_rng(seed)
    need = list(need)
    if not need:
        return True, {}
    shapes = inst.shapes
    for o in need:
        if not isinstance(shapes[o], Disc):
            raise UnsupportedShape("optimisation back-end only handles discs")
        if any(not isinstance(s, Disc) for s, _ in constraints.get(o, ())):
            raise UnsupportedShape("optimisation back-end only handles disc obstacles")
    ws = inst.workspace
    kept = _keep_valid(need, constraints, keep, inst, counter)
    attempts = [kept, {}] if kept else [{}]
    for base in attempts:
        free = [o for o in need if o not in base]
        if not free:
            return True, {o: base[o] for o in need}
        r = np.array([shapes[o].radius for o in free])
        fixed = []
        for o in free:
            rows = [(p.x, p.y, s.radius) for s, p in constraints.get(o, ())]
            rows += [(p.x, p.y, shapes[b].radius) for b, p in base.items()]
            fixed.append(np.array(rows, dtype=float).reshape(-1, 3))
        bounds = np.array([[ri, ws.width - ri, ri, ws.height - ri] for ri in r])
        if np.any(bounds[:, 1] < bounds[:, 0]) or np.any(bounds[:, 3] < bounds[:, 2]):
            return False, {}
        init = None
        if all(o in keep for o in free):
            init = np.array([[keep[o].x, keep[o].y] for o in free])
            init = np.clip(init, bounds[:, [0, 2]], bounds[:, [1, 3]])
        X = _optimise(r, fixed, bounds, init, rng)
        if X is None:
            continue
        result = dict(base)
        for o, (x, y) in zip(free, X):
            result[o] = Pose(float(x), float(y), 0.0)
        # the strict predicates have the final word
        good = True
        for k, o in enumerate(free):
            obstacles = list(constraints.get(o, ())) + [
                (shapes[b], result[b]) for b in need if b != o and b in result]
            if not contained(shapes[o], result[o], ws) or not _clear(shapes[o], result[o], obstacles, counter):
                good = False
                break
        if good:
            return True, {o: result[o] for o in need}
    return False, {}


GENERATORS = {SP: sample_buffers, OPT: optimize_buffers}


def allocate(pi, frm, to, inst, backend: str = SP, seed=None, counter: CheckCounter | None = None,
             extra_constraints: dict | None = None) -> AllocationResult:
    """Replay primitive plan ``pi`` from ``frm`` toward ``to`` and fix buffer poses.

    On an s->b move the object's constraints become the current poses of
    every object not in a buffer; goal placements add the placed pose to
    every buffered object's constraints. When an object leaves its buffer,
    that buffer pose is added too, since the others shared the table with it.
    ``extra_constraints`` seeds additional obstacles per object.
    """
    rng = _as_rng(seed)
    generate = GENERATORS[backend]
    shapes = inst.shapes
    ws = inst.workspace
    actions = list(pi)
    cur = list(frm)
    buffered: dict[int, None] = {}
    constraints: dict[int, list] = {}
    B: dict[int, Pose] = {}
    # initial random buffers, feasibility not required
    for a in actions:
        if a.move == S2B and a.object not in B:
            xs, ys, ths = _sample_positions(rng, shapes[a.object], ws, 1)
            B[a.object] = Pose(float(xs[0]), float(ys[0]), float(ths[0]))
    for t, a in enumerate(actions):
        o = a.object
        if a.move == S2B:
            buffered[o] = None
            constraints[o] = [(shapes[k], cur[k]) for k in range(inst.n)
                              if k != o and k not in buffered]
            if extra_constraints and o in extra_constraints:
                constraints[o] += list(extra_constraints[o])
            need = list(buffered)
        elif a.move == B2G:
            for b in buffered:
                if b != o:
                    constraints[b].append((shapes[o], to[o]))
                    constraints[b].append((shapes[o], B[o]))
            need = [b for b in buffered if b != o]
        elif a.move == S2G:
            for b in buffered:
                constraints[b].append((shapes[o], to[o]))
            need = list(buffered)
        else:
            raise ValueError(f"unknown primitive move {a.move!r}")
        if need:
            ok, new = generate(need, constraints, B, inst, rng, counter)
            if not ok:
                return AllocationResult(B, t)
            B.update(new)
        if a.move == S2B:
            cur[o] = B[o]
        else:
            cur[o] = to[o]
            buffered.pop(o, None)
        for b in buffered:
            cur[b] = B[b]
    return AllocationResult(B, None)
