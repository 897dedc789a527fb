"""Arrangements, instances, plan checking, instance generators and file I/O."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .geometry import (
    CheckCounter, Disc, Pose, Rect, Shape, Workspace, bounding_radius, collides, contained,
    same_pose,
)

# an arrangement maps object id -> pose; ids are 0..n-1 so a tuple indexed by id suffices
Arrangement = tuple  # tuple[Pose, ...]

SG, SB, BG = "SG", "SB", "BG"
ACTION_KINDS = (SG, SB, BG)

DEFAULT_WORKSPACE = Workspace(10.0, 10.0)
DART_BUDGET = 1000      # failed darts for one object before the arrangement restarts
RESTART_BUDGET = 100    # restarts before giving up (10^5 darts in total)
LATTICE_GAP = 0.01      # in units of the object radius


class MalformedArrangement(ValueError):
    pass


class GenerationTimeout(RuntimeError):
    pass


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectSpec:
    id: int
    shape: Shape


@dataclass
class Instance:
    workspace: Workspace
    objects: list[ObjectSpec]
    start: Arrangement
    goal: Arrangement

    def __post_init__(self):
        self.start = tuple(self.start)
        self.goal = tuple(self.goal)
        if [o.id for o in self.objects] != list(range(len(self.objects))):
            raise SchemaError("object ids must be 0..n-1 in order")
        for arr in (self.start, self.goal):
            if len(arr) != len(self.objects):
                raise MalformedArrangement(
                    f"arrangement has {len(arr)} poses for {len(self.objects)} objects")

    @property
    def n(self) -> int:
        return len(self.objects)

    @property
    def shapes(self) -> list[Shape]:
        return [o.shape for o in self.objects]

    def density(self) -> float:
        return sum(o.shape.area for o in self.objects) / self.workspace.area

    def all_discs(self) -> bool:
        return all(isinstance(o.shape, Disc) for o in self.objects)


@dataclass(frozen=True)
class Action:
    object: int
    target: Pose
    kind: str

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ValueError(f"unknown action kind {self.kind!r}")


Plan = list  # list[Action]


@dataclass
class PlanReport:
    ok: bool
    index: int | None = None
    cause: str | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _check_cover(arr: Sequence, n: int) -> None:
    if len(arr) != n or any(p is None for p in arr):
        raise MalformedArrangement(f"arrangement must give a pose for each of {n} objects")


def is_feasible(arr: Arrangement, inst: Instance, counter: CheckCounter | None = None) -> bool:
    """Every footprint inside the workspace and no two footprints overlapping."""
    _check_cover(arr, inst.n)
    shapes = inst.shapes
    for i, p in enumerate(arr):
        if not contained(shapes[i], p, inst.workspace):
            return False
    for i in range(inst.n):
        for j in range(i + 1, inst.n):
            if collides(shapes[i], arr[i], shapes[j], arr[j], counter):
                return False
    return True


def arrangements_equal(a: Arrangement, b: Arrangement, shapes: Sequence[Shape],
                       tol: float = 1e-6) -> bool:
    return all(same_pose(s, p, q, tol) for s, p, q in zip(shapes, a, b))


def moved_objects(a: Arrangement, b: Arrangement, shapes: Sequence[Shape]) -> list[int]:
    return [i for i, s in enumerate(shapes) if not same_pose(s, a[i], b[i])]


def check_action(arr: Sequence[Pose], action: Action, inst: Instance,
                 counter: CheckCounter | None = None) -> str | None:
    """Cause string if applying ``action`` to ``arr`` is illegal, else None."""
    o = action.object
    if not 0 <= o < inst.n:
        return "bad-object"
    shapes = inst.shapes
    if not contained(shapes[o], action.target, inst.workspace):
        return "out-of-workspace"
    for j, p in enumerate(arr):
        if j != o and collides(shapes[o], action.target, shapes[j], p, counter):
            return "collision"
    return None


def execute(arr: Arrangement, plan: Iterable[Action]) -> Arrangement:
    """Apply actions without checking them."""
    poses = list(arr)
    for a in plan:
        poses[a.object] = a.target
    return tuple(poses)


def validate_plan(plan: Sequence[Action], inst: Instance, start: Arrangement | None = None,
                  goal: Arrangement | None = None) -> PlanReport:
    """Replay ``plan`` and report the first illegal action.

    ``start``/``goal`` default to the instance's own arrangements; passing them
    lets the same check run on partial plans between tree nodes.
    """
    start = inst.start if start is None else tuple(start)
    goal = inst.goal if goal is None else tuple(goal)
    _check_cover(start, inst.n)
    if not is_feasible(start, inst):
        return PlanReport(False, None, "infeasible-start", "initial arrangement is infeasible")
    poses = list(start)
    for k, action in enumerate(plan):
        cause = check_action(poses, action, inst)
        if cause is not None:
            return PlanReport(False, k, cause, f"object {action.object} -> {action.target}")
        poses[action.object] = action.target
    wrong = moved_objects(poses, goal, inst.shapes)
    if wrong:
        return PlanReport(False, len(plan), "wrong-final-pose", f"objects off goal: {wrong}")
    return PlanReport(True)


# ---------------------------------------------------------------------------
# generators

def _sample_positions(rng: np.random.Generator, shape: Shape, ws: Workspace, k: int):
    """k uniformly random contained poses as (xs, ys, thetas)."""
    if isinstance(shape, Disc):
        th = np.zeros(k)
        ex = np.full(k, shape.radius)
        ey = ex
    else:
        th = rng.uniform(0.0, 2.0 * math.pi, k)
        c, s = np.abs(np.cos(th)), np.abs(np.sin(th))
        hw, hh = 0.5 * shape.width, 0.5 * shape.height
        ex, ey = hw * c + hh * s, hw * s + hh * c
    u = rng.random(k)
    v = rng.random(k)
    xs = ex + u * (ws.width - 2 * ex)
    ys = ey + v * (ws.height - 2 * ey)
    return xs, ys, th


def _first_free(shape: Shape, xs, ys, ths, placed: list[Pose], shapes: list[Shape]) -> int | None:
    """Index of the first candidate overlapping none of ``placed``."""
    k = len(xs)
    if not placed:
        return 0 if k else None
    px = np.array([p.x for p in placed])
    py = np.array([p.y for p in placed])
    if isinstance(shape, Disc) and all(isinstance(s, Disc) for s in shapes):
        pr = np.array([s.radius for s in shapes])
        d = np.hypot(xs[:, None] - px[None, :], ys[:, None] - py[None, :])
        ok = np.all(d >= pr[None, :] + shape.radius - 1e-9, axis=1)
        idx = np.flatnonzero(ok)
        return int(idx[0]) if idx.size else None
    br = np.array([bounding_radius(s) for s in shapes]) + bounding_radius(shape)
    d = np.hypot(xs[:, None] - px[None, :], ys[:, None] - py[None, :])
    near = d < br[None, :]
    for c in range(k):
        cand = Pose(float(xs[c]), float(ys[c]), float(ths[c]))
        if not any(collides(shape, cand, shapes[j], placed[j]) for j in np.flatnonzero(near[c])):
            return c
    return None


def _free_grid_darts(rng: np.random.Generator, radius: float, ws: Workspace, placed: list[Pose],
                     radii: np.ndarray, k: int):
    """Darts drawn uniformly from grid cells whose centre is currently free."""
    h = radius / 8.0
    gx = np.arange(radius + 0.5 * h, ws.width - radius, h)
    gy = np.arange(radius + 0.5 * h, ws.height - radius, h)
    if gx.size == 0 or gy.size == 0:
        return None
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    X, Y = X.ravel(), Y.ravel()
    free = np.ones(X.size, dtype=bool)
    for p, r in zip(placed, radii):
        free &= (X - p.x) ** 2 + (Y - p.y) ** 2 >= (r + radius) ** 2
    idx = np.flatnonzero(free)
    if idx.size == 0:
        return None
    pick = idx[rng.integers(0, idx.size, k)]
    xs = np.clip(X[pick] + rng.uniform(-0.5 * h, 0.5 * h, k), radius, ws.width - radius)
    ys = np.clip(Y[pick] + rng.uniform(-0.5 * h, 0.5 * h, k), radius, ws.height - radius)
    # the cell centres themselves are valid fall-backs, appended after the jittered darts
    return np.concatenate([xs, X[pick]]), np.concatenate([ys, Y[pick]]), np.zeros(2 * k)


def sample_arrangement(shapes: list[Shape], ws: Workspace, rng: np.random.Generator) -> Arrangement:
    """Random feasible arrangement by sequential rejection sampling.

    Each object gets ``DART_BUDGET`` darts: a first tenth uniform over the
    workspace, the rest (discs only) aimed at free cells of a fine grid, which
    keeps dense packings reachable near the jamming limit.
    """
    uniform = DART_BUDGET // 10
    for _ in range(RESTART_BUDGET):
        placed: list[Pose] = []
        for shape in shapes:
            done = shapes[:len(placed)]
            xs, ys, ths = _sample_positions(rng, shape, ws, uniform)
            c = _first_free(shape, xs, ys, ths, placed, done)
            if c is None and isinstance(shape, Disc) and all(isinstance(s, Disc) for s in done):
                radii = np.array([s.radius for s in done])
                darts = _free_grid_darts(rng, shape.radius, ws, placed, radii,
                                         (DART_BUDGET - uniform) // 2)
                if darts is not None:
                    xs, ys, ths = darts
                    c = _first_free(shape, xs, ys, ths, placed, done)
            elif c is None:
                xs, ys, ths = _sample_positions(rng, shape, ws, DART_BUDGET - uniform)
                c = _first_free(shape, xs, ys, ths, placed, done)
            if c is None:
                break
            placed.append(Pose(float(xs[c]), float(ys[c]), float(ths[c])))
        else:
            return tuple(placed)
    raise GenerationTimeout(
        f"no feasible arrangement of {len(shapes)} objects after {RESTART_BUDGET * DART_BUDGET} darts")


def object_size(n: int, rho: float, shape_family: str, ws: Workspace, aspect: float = 2.0) -> Shape:
    """Equal-sized object giving total footprint area rho * |ws|."""
    area = rho * ws.area / n
    if shape_family == "disc":
        return Disc(math.sqrt(area / math.pi))
    if shape_family == "rect":
        h = math.sqrt(area / aspect)
        return Rect(aspect * h, h)
    raise ValueError(f"unknown shape family {shape_family!r}")


def gen_random(n: int, rho: float, shape_family: str = "disc", ws: Workspace = DEFAULT_WORKSPACE,
               seed: int | None = 0, aspect: float = 2.0) -> Instance:
    if n < 1:
        raise ValueError("need at least one object")
    if not 0.0 < rho < 1.0:
        raise ValueError("density must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    shape = object_size(n, rho, shape_family, ws, aspect)
    shapes = [shape] * n
    start = sample_arrangement(shapes, ws, rng)
    goal = sample_arrangement(shapes, ws, rng)
    objects = [ObjectSpec(i, shape) for i in range(n)]
    return Instance(ws, objects, start, goal)


def gen_dense_small(n: int, seed: int | None = 0) -> Instance:
    if not 5 <= n <= 8:
        raise ValueError("dense-small instances have 5 to 8 objects")
    return gen_random(n, 0.5, "disc", DEFAULT_WORKSPACE, seed)


def gen_lattice(rows: int, cols: int, seed: int | None = 0, radius: float = 1.0) -> Instance:
    """Discs on a square grid with 0.01 r gaps; goals are a random permutation of the cells.

    The workspace leaves one free ring of cells around the lattice so that
    buffers exist at all.
    """
    if rows * cols < 1:
        raise ValueError("lattice needs at least one cell")
    rng = np.random.default_rng(seed)
    pitch = (2.0 + LATTICE_GAP) * radius
    ws = Workspace((cols + 2) * pitch, (rows + 2) * pitch)
    cells = [Pose((c + 1.5) * pitch, (r + 1.5) * pitch) for r in range(rows) for c in range(cols)]
    n = len(cells)
    perm = rng.permutation(n)
    shape = Disc(radius)
    objects = [ObjectSpec(i, shape) for i in range(n)]
    return Instance(ws, objects, tuple(cells), tuple(cells[int(k)] for k in perm))


# ---------------------------------------------------------------------------
# file formats

def shape_to_json(shape: Shape) -> dict:
    if isinstance(shape, Disc):
        return {"type": "disc", "radius": shape.radius}
    return {"type": "rect", "width": shape.width, "height": shape.height}


def shape_from_json(d: dict) -> Shape:
    try:
        kind = d["type"]
        if kind == "disc":
            return Disc(float(d["radius"]))
        if kind == "rect":
            return Rect(float(d["width"]), float(d["height"]))
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"bad shape {d!r}: {e}") from e
    raise SchemaError(f"unknown shape type {kind!r}")


def _pose_from_json(v) -> Pose:
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise SchemaError(f"pose must be [x, y, theta], got {v!r}")
    return Pose(float(v[0]), float(v[1]), float(v[2]))


def _arrangement_to_json(arr: Arrangement) -> dict:
    return {str(i): p.as_list() for i, p in enumerate(arr)}


def _arrangement_from_json(d: dict, n: int) -> Arrangement:
    if not isinstance(d, dict):
        raise SchemaError("arrangement must be an object keyed by id")
    try:
        return tuple(_pose_from_json(d[str(i)]) for i in range(n))
    except KeyError as e:
        raise MalformedArrangement(f"arrangement misses object {e}") from e


def instance_to_json(inst: Instance) -> dict:
    return {
        "workspace": {"width": inst.workspace.width, "height": inst.workspace.height},
        "objects": [{"id": o.id, "shape": shape_to_json(o.shape)} for o in inst.objects],
        "start": _arrangement_to_json(inst.start),
        "goal": _arrangement_to_json(inst.goal),
    }


def instance_from_json(d: dict) -> Instance:
    try:
        ws = Workspace(float(d["workspace"]["width"]), float(d["workspace"]["height"]))
        objs = sorted(d["objects"], key=lambda o: int(o["id"]))
        objects = [ObjectSpec(int(o["id"]), shape_from_json(o["shape"])) for o in objs]
        n = len(objects)
        return Instance(ws, objects, _arrangement_from_json(d["start"], n),
                        _arrangement_from_json(d["goal"], n))
    except (KeyError, TypeError) as e:
        raise SchemaError(f"malformed instance: {e}") from e


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_json(inst), indent=1), encoding="utf-8")


def load_instance(path) -> Instance:
    return instance_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def plan_to_json(plan: Sequence[Action], stats: dict | None = None) -> dict:
    return {
        "actions": [{"object": a.object, "target": a.target.as_list(), "kind": a.kind} for a in plan],
        "stats": dict(stats or {"actions": len(plan)}),
    }


def plan_from_json(d: dict) -> tuple[list[Action], dict]:
    try:
        acts = [Action(int(a["object"]), _pose_from_json(a["target"]), a["kind"]) for a in d["actions"]]
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"malformed plan: {e}") from e
    return acts, dict(d.get("stats", {}))


def save_plan(plan: Sequence[Action], path, stats: dict | None = None) -> None:
    Path(path).write_text(json.dumps(plan_to_json(plan, stats), indent=1), encoding="utf-8")


def load_plan(path) -> tuple[list[Action], dict]:
    return plan_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
