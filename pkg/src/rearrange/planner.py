"""High-level planners built on lazy buffer allocation.

``lazy_rearrange`` is one attempt: dependency graph, primitive plan, buffer
allocation. When allocation fails part-way, the executed prefix still leads
to a feasible arrangement, which the tree planners keep as a new node.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import buffers as bufmod
from .depgraph import DependencyGraph, build, components, is_monotone, is_simple_cycle
from .geometry import CheckCounter, collides
from .model import (
    BG, SB, SG, Action, Instance, arrangements_equal, check_action, execute, moved_objects,
    validate_plan,
)
from .primitive import (
    B2G, DP_LIMIT, MOVE_KIND, S2B, S2G, PrimitiveAction, derive_plan, random_order, rbm, tbm,
    _popcounts,
)

log = logging.getLogger(__name__)

PRIMITIVES = ("RBM", "TBM", "RO")
BACKENDS = (bufmod.SP, bufmod.OPT)
FRAMEWORKS = ("OS", "ST", "BST")
OS_ATTEMPTS_PER_OBJECT = 30
PP_TRIES = [(False, 0), (True, 0), (False, 1), (True, 1), (False, 2), (True, 2)]


@dataclass
class SolverConfig:
    primitive: str = "RBM"
    backend: str = bufmod.SP
    framework: str = "BST"
    preprocess: bool = False
    max_time: float = 300.0
    seed: int = 0
    max_iterations: int | None = None  # optional deterministic budget on tree iterations / attempts

    def __post_init__(self):
        if self.primitive not in PRIMITIVES:
            raise ValueError(f"primitive must be one of {PRIMITIVES}")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        if self.framework not in FRAMEWORKS:
            raise ValueError(f"framework must be one of {FRAMEWORKS}")
        if not self.max_time > 0:
            raise ValueError("max_time must be positive")

    @classmethod
    def parse(cls, name: str, **kw) -> "SolverConfig":
        """Build from a dashed name such as ``RBM-SP-BST-PP``."""
        parts = name.upper().split("-")
        pp = parts[-1] == "PP"
        if pp:
            parts = parts[:-1]
        if len(parts) != 3:
            raise ValueError(f"config name must look like RBM-SP-BST[-PP], got {name!r}")
        return cls(parts[0], parts[1], parts[2], pp, **kw)

    @property
    def name(self) -> str:
        base = f"{self.primitive}-{self.backend}-{self.framework}"
        return base + "-PP" if self.preprocess else base

    def check(self, inst: Instance) -> None:
        if self.backend == bufmod.OPT and not inst.all_discs():
            raise ValueError("the OPT back-end needs disc-shaped objects")


@dataclass
class SolveOutcome:
    status: str
    plan: list | None
    stats: dict = field(default_factory=dict)

    @property
    def solved(self) -> bool:
        return self.status == "solved"


class SearchTree:
    """Arrangements connected by partial plans, each edge stored parent -> child."""

    def __init__(self, root):
        self.nodes = [tuple(root)]
        self.parent: list[int | None] = [None]
        self.edges: list[list[Action]] = [[]]

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def root(self):
        return self.nodes[0]

    def add(self, arr, parent: int, plan) -> int:
        self.nodes.append(tuple(arr))
        self.parent.append(parent)
        self.edges.append(list(plan))
        return len(self.nodes) - 1

    def path_plan(self, idx: int) -> list[Action]:
        """Concatenated edge plans from the root down to node ``idx``."""
        chunks = []
        while idx is not None and idx != 0:
            chunks.append(self.edges[idx])
            idx = self.parent[idx]
        out = []
        for c in reversed(chunks):
            out += c
        return out


def nearest_node(tree: SearchTree, target, shapes) -> int:
    """Node with the fewest mismatched poses; ties by summed centre distance, then age."""
    best, best_key = 0, None
    for k, arr in enumerate(tree.nodes):
        diff = moved_objects(arr, target, shapes)
        dist = sum(math.hypot(arr[i].x - target[i].x, arr[i].y - target[i].y) for i in diff)
        key = (len(diff), dist)
        if best_key is None or key < best_key:
            best, best_key = k, key
    return best


def reverse_plan(plan, frm) -> list[Action]:
    """The same arrangements visited backwards: undo each action, last first."""
    cur = list(frm)
    undo = []
    swap = {SB: BG, BG: SB, SG: SG}
    for a in plan:
        undo.append(Action(a.object, cur[a.object], swap[a.kind]))
        cur[a.object] = a.target
    return undo[::-1]


def _as_rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _order(g: DependencyGraph, cfg: SolverConfig, rng):
    if cfg.primitive == "RBM":
        return rbm(g, rng)
    if cfg.primitive == "TBM":
        return tbm(g, rng)
    return random_order(g.n, rng)


def _allocate(pi, frm, to, inst, cfg, rng, counter, extra=None):
    backend = cfg.backend
    if backend == bufmod.OPT and not inst.all_discs():
        backend = bufmod.SP
    return bufmod.allocate(pi, frm, to, inst, backend, rng, counter, extra)


def _instantiate(steps, to, B) -> list[Action]:
    out = []
    for a in steps:
        target = B[a.object] if a.move == S2B else to[a.object]
        out.append(Action(a.object, target, MOVE_KIND[a.move]))
    return out


def _replay_prefix(frm, plan, inst):
    """Longest legal prefix of ``plan`` and the arrangement it reaches."""
    cur = list(frm)
    for k, a in enumerate(plan):
        if check_action(cur, a, inst) is not None:
            log.warning("instantiated plan breaks at action %d; truncating", k)
            return tuple(cur), plan[:k]
        cur[a.object] = a.target
    return tuple(cur), list(plan)


def lazy_rearrange(frm, to, inst: Instance, cfg: SolverConfig, rng=None,
                   counter: CheckCounter | None = None):
    """One lazy-buffer attempt from ``frm`` toward ``to``.

    Returns ``(reached, partial_plan)``; ``reached`` equals ``to`` on success.
    """
    rng = _as_rng(rng)
    frm, to = tuple(frm), tuple(to)
    shapes = inst.shapes
    moving = set(moved_objects(frm, to, shapes))
    if not moving:
        return to, []
    g = build(frm, to, inst, counter)
    order = _order(g, cfg, rng)
    pi = [a for a in derive_plan(order.order, g) if a.object in moving]
    res = _allocate(pi, frm, to, inst, cfg, rng, counter)
    steps = pi if res.success else pi[: res.terminating_step]
    plan = _instantiate(steps, to, res.buffers)
    reached, plan = _replay_prefix(frm, plan, inst)
    if res.success and plan and len(plan) == len(steps):
        reached = to  # exact goal poses, not copies within tolerance
    return reached, plan


def _same(a, b, shapes) -> bool:
    return arrangements_equal(a, b, shapes)


def _out_of_time(deadline) -> bool:
    return deadline is not None and time.perf_counter() > deadline


def solve_os(inst: Instance, cfg: SolverConfig, counter: CheckCounter | None = None,
             start=None, rng=None, deadline=None) -> SolveOutcome:
    """Independent attempts from scratch, at most 30 per object."""
    rng = _as_rng(cfg.seed if rng is None else rng)
    counter = CheckCounter() if counter is None else counter
    deadline = time.perf_counter() + cfg.max_time if deadline is None else deadline
    start = inst.start if start is None else tuple(start)
    shapes = inst.shapes
    if _same(start, inst.goal, shapes):
        return SolveOutcome("solved", [], {"attempts": 0})
    limit = OS_ATTEMPTS_PER_OBJECT * inst.n
    if cfg.max_iterations is not None:
        limit = min(limit, cfg.max_iterations)
    for attempt in range(1, limit + 1):
        if _out_of_time(deadline):
            break
        reached, plan = lazy_rearrange(start, inst.goal, inst, cfg, rng, counter)
        if _same(reached, inst.goal, shapes):
            return SolveOutcome("solved", plan, {"attempts": attempt})
    return SolveOutcome("timeout", None, {"attempts": attempt if limit else 0})


def solve_st(inst: Instance, cfg: SolverConfig, counter: CheckCounter | None = None,
             start=None, rng=None, deadline=None) -> SolveOutcome:
    """Forward search tree: extend a uniformly random node toward the goal."""
    rng = _as_rng(cfg.seed if rng is None else rng)
    counter = CheckCounter() if counter is None else counter
    deadline = time.perf_counter() + cfg.max_time if deadline is None else deadline
    tree = SearchTree(inst.start if start is None else start)
    shapes = inst.shapes
    if _same(tree.root, inst.goal, shapes):
        return SolveOutcome("solved", [], {"tree_sizes": [1]})
    it = 0
    while not _out_of_time(deadline):
        if cfg.max_iterations is not None and it >= cfg.max_iterations:
            break
        it += 1
        k = int(rng.integers(len(tree)))
        reached, plan = lazy_rearrange(tree.nodes[k], inst.goal, inst, cfg, rng, counter)
        if not plan:
            continue
        idx = tree.add(reached, k, plan)
        if _same(reached, inst.goal, shapes):
            return SolveOutcome("solved", tree.path_plan(idx),
                                {"tree_sizes": [len(tree)], "iterations": it})
    return SolveOutcome("timeout", None, {"tree_sizes": [len(tree)], "iterations": it})


def solve_bst(inst: Instance, cfg: SolverConfig, counter: CheckCounter | None = None,
              start=None, rng=None, deadline=None) -> SolveOutcome:
    """Bidirectional search: trees from start and goal grown toward each other."""
    rng = _as_rng(cfg.seed if rng is None else rng)
    counter = CheckCounter() if counter is None else counter
    deadline = time.perf_counter() + cfg.max_time if deadline is None else deadline
    shapes = inst.shapes
    fwd = SearchTree(inst.start if start is None else start)
    bwd = SearchTree(inst.goal)
    t1, t2 = fwd, bwd

    def stitch(ta, ia, tb, ib):
        if ta is bwd:
            ta, ia, tb, ib = tb, ib, ta, ia
        meet = ta.nodes[ia]
        tail = reverse_plan(bwd.path_plan(ib), bwd.root)
        # the backward path runs goal -> meet; reversed it must start at meet
        assert _same(execute(bwd.root, bwd.path_plan(ib)), meet, shapes)
        plan = fwd.path_plan(ia) + tail
        report = validate_plan(plan, inst, fwd.root, inst.goal)
        if not report.ok:
            raise AssertionError(f"stitched plan fails validation: {report}")
        return SolveOutcome("solved", plan, {"tree_sizes": [len(fwd), len(bwd)], "iterations": it})

    if _same(fwd.root, bwd.root, shapes):
        return SolveOutcome("solved", [], {"tree_sizes": [1, 1], "iterations": 0})
    it = 0
    while not _out_of_time(deadline):
        if cfg.max_iterations is not None and it >= cfg.max_iterations:
            break
        it += 1
        k = int(rng.integers(len(t1)))
        new1, plan1 = lazy_rearrange(t1.nodes[k], t2.root, inst, cfg, rng, counter)
        i1 = t1.add(new1, k, plan1) if plan1 else k
        if _same(new1, t2.root, shapes):
            return stitch(t1, i1, t2, 0)
        near = nearest_node(t2, new1, shapes)
        new2, plan2 = lazy_rearrange(t2.nodes[near], new1, inst, cfg, rng, counter)
        i2 = t2.add(new2, near, plan2) if plan2 else near
        if _same(new2, new1, shapes):
            return stitch(t1, i1, t2, i2)
        t1, t2 = t2, t1
    return SolveOutcome("timeout", None, {"tree_sizes": [len(fwd), len(bwd)], "iterations": it})


# ---------------------------------------------------------------------------
# preprocessing: unlabeled rearrangement of hard components

def _slot_blockers(comp, frm, to, inst, counter):
    """blk[k]: local objects whose current footprint overlaps slot k (object comp[k]'s goal)."""
    shapes = inst.shapes
    blk = []
    for gk in comp:
        m = 0
        for b, o in enumerate(comp):
            if collides(shapes[gk], to[gk], shapes[o], frm[o], counter):
                m |= 1 << b
        blk.append(m)
    return blk


def _vacate_order(blk: list[int], rng) -> list[int]:
    """Order in which the blockers leave their starts, minimising peak buffer use.

    Objects are interchangeable within the component, so a vacated object can
    take any slot whose blockers have all left. With V the vacated set and
    F(V) those free slots, max(0, |V| - |F(V)|) objects must wait in buffers.
    Returns local ids of the blockers in vacating order.
    """
    k = len(blk)
    all_blk = 0
    for m in blk:
        all_blk |= m
    blockers = [b for b in range(k) if all_blk >> b & 1]
    m = len(blockers)
    pos = {b: i for i, b in enumerate(blockers)}

    def remap(mask):
        r = 0
        for b in range(k):
            if mask >> b & 1:
                r |= 1 << pos[b]
        return r

    slots = [remap(x) for x in blk]
    if m <= DP_LIMIT:
        subsets = np.arange(1 << m, dtype=np.int64)
        pc = _popcounts(m).astype(np.int64)
        free = np.zeros(1 << m, dtype=np.int64)
        for sm in slots:
            free += (subsets & sm) == sm
        waiting = np.maximum(0, pc - free)
        full = (1 << m) - 1
        rest = np.full(1 << m, 10 ** 6, dtype=np.int64)
        rest[full] = 0
        by_size = np.argsort(pc, kind="stable")
        bounds = np.searchsorted(pc[by_size], np.arange(m + 2))
        for p in range(m - 1, -1, -1):
            layer = subsets[by_size[bounds[p]: bounds[p + 1]]]
            for j in range(m):
                bit = 1 << j
                sel = layer[(layer & bit) == 0]
                T = sel | bit
                rest[sel] = np.minimum(rest[sel], np.maximum(waiting[T], rest[T]))
        best = int(rest[0])
        order = []
        V = 0
        while V != full:
            cands = range(m) if rng is None else [int(c) for c in rng.permutation(m)]
            pick = None
            for j in cands:
                T = V | (1 << j)
                if T == V or max(int(waiting[T]), int(rest[T])) > best:
                    continue
                key = (int(waiting[T]), -int(free[T]))
                if pick is None or key < pick[0]:
                    pick = (key, j)
            order.append(blockers[pick[1]])
            V |= 1 << pick[1]
        return order

    def n_free(V):
        return sum(1 for sm in slots if V & sm == sm)

    V = 0
    order = []
    remaining = list(range(m))
    while remaining:
        if rng is not None:
            remaining = [remaining[i] for i in rng.permutation(len(remaining))]
        best = None
        for j in remaining:
            T = V | (1 << j)
            f = n_free(T)
            key = (max(0, bin(T).count("1") - f), -f)
            if best is None or key < best[0]:
                best = (key, j)
        j = best[1]
        remaining.remove(j)
        V |= 1 << j
        order.append(blockers[j])
    return order


def _unlabeled_moves(comp, blk, vacate_order, fill_all: bool):
    """Concrete moves for a vacating order.

    Returns (primitive actions, object -> slot owner, objects left in buffers).
    A vacating object goes straight into a free slot when there is one,
    otherwise into a buffer; buffered objects move into slots as they free up.
    Slot owners are preferred so objects land on their own goals when possible.
    """
    k = len(comp)
    vacated = 0
    filled: set[int] = set()
    waiting: list[int] = []
    assign: dict[int, int] = {}
    actions = []

    def free_slots():
        return [g for g in range(k) if g not in filled and blk[g] & ~vacated == 0]

    def place(obj, move, open_):
        g = obj if obj in open_ else open_[0]
        filled.add(g)
        assign[comp[obj]] = comp[g]
        actions.append(PrimitiveAction(comp[obj], move))

    for x in vacate_order:
        vacated |= 1 << x
        open_ = free_slots()
        if open_:
            place(x, S2G, open_)
        else:
            actions.append(PrimitiveAction(comp[x], S2B))
            waiting.append(x)
        while waiting:
            open_ = free_slots()
            if not open_:
                break
            w = next((b for b in waiting if b in open_), waiting[0])
            waiting.remove(w)
            place(w, B2G, open_)
    if fill_all:
        while waiting:
            open_ = free_slots()
            w = waiting.pop(0)
            place(w, B2G, open_)
    return actions, assign, [comp[b] for b in waiting]


def _remainder_ok(g: DependencyGraph, comp) -> bool:
    vs = set(comp)
    pred = g.pred()
    return all(len(g.succ[v] & vs) <= 1 and len(pred[v] & vs) <= 1 for v in comp)


def preprocess(inst: Instance, cfg: SolverConfig, counter: CheckCounter | None = None, rng=None,
               start=None):
    """Unlabeled pre-rearrangement of every hard dependency component.

    A component is hard unless it is a single vertex, a single cycle or
    acyclic. Its blockers are moved off their starts into goal slots of the
    component (any object may take any slot of the same shape), parking the
    overflow in buffers. Afterwards each object is either on a slot, parked
    clear of every goal, or on a start that blocks nothing, so the remaining
    labelled problem has in- and out-degree at most one per component and
    needs at most one running buffer.

    Returns ``(mid, prefix_plan, info)``.
    """
    rng = _as_rng(cfg.seed if rng is None else rng)
    counter = CheckCounter() if counter is None else counter
    shapes = inst.shapes
    goal = inst.goal
    mid = tuple(inst.start if start is None else start)
    g0 = build(mid, goal, inst, counter)
    prefix: list[Action] = []
    info = {"pp_components": 0, "pp_skipped": 0, "pp_running_buffers": 0, "pp_fill_all": 0}
    goal_obstacles = [(shapes[i], goal[i]) for i in range(inst.n)]
    for comp in components(g0):
        if len(comp) == 1 or is_simple_cycle(g0, comp):
            continue
        sub, _ = g0.subgraph(comp)
        if is_monotone(sub):
            continue
        if len({shapes[v] for v in comp}) != 1:
            info["pp_skipped"] += 1
            continue
        info["pp_components"] += 1
        blk = _slot_blockers(comp, mid, goal, inst, counter)
        done = False
        for fill_all, attempt in PP_TRIES:
            order = _vacate_order(blk, None if attempt == 0 else rng)
            pi, assign, parked = _unlabeled_moves(comp, blk, order, fill_all)
            to = list(mid)
            for o, slot_owner in assign.items():
                to[o] = goal[slot_owner]
            extra = {o: goal_obstacles for o in parked}
            res = _allocate(pi, mid, tuple(to), inst, cfg, rng, counter, extra)
            if not res.success:
                continue
            plan = _instantiate(pi, to, res.buffers)
            reached, ok_plan = _replay_prefix(mid, plan, inst)
            if len(ok_plan) != len(plan):
                continue
            g1 = build(reached, goal, inst, counter)
            if not _remainder_ok(g1, comp):
                log.warning("preprocessed component %s keeps a high-degree vertex", comp)
                continue
            run = 0
            cur = 0
            for a in pi:
                cur += 1 if a.move == S2B else (-1 if a.move == B2G else 0)
                run = max(run, cur)
            info["pp_running_buffers"] = max(info["pp_running_buffers"], run)
            info["pp_fill_all"] += int(fill_all)
            mid = reached
            prefix += plan
            done = True
            break
        if not done:
            info["pp_skipped"] += 1
    info["pp_actions"] = len(prefix)
    return mid, prefix, info


# ---------------------------------------------------------------------------

def compress_plan(plan, start) -> list[Action]:
    """Merge back-to-back moves of one object and drop moves that change nothing."""
    out: list[Action] = []
    src: list = []  # pose each kept action picks the object up from
    cur = list(start)
    for a in plan:
        if out and out[-1].object == a.object:
            origin = src[-1]
            out.pop()
            src.pop()
        else:
            origin = cur[a.object]
        cur[a.object] = a.target
        if origin == a.target:
            continue
        out.append(a)
        src.append(origin)
    return out


def label_plan(plan, inst: Instance) -> list[Action]:
    """Kinds relative to the whole instance: goal placements from start (SG) or elsewhere (BG)."""
    shapes = inst.shapes
    cur = list(inst.start)
    out = []
    for a in plan:
        from_start = cur[a.object] == inst.start[a.object]
        if moved_objects([a.target], [inst.goal[a.object]], [shapes[a.object]]):
            kind = SB
        else:
            kind = SG if from_start else BG
        out.append(Action(a.object, a.target, kind))
        cur[a.object] = a.target
    return out


FRAMEWORK_FUNCS = {"OS": solve_os, "ST": solve_st, "BST": solve_bst}


def solve(inst: Instance, cfg: SolverConfig) -> SolveOutcome:
    """Optional preprocessing followed by the configured framework; stats cover all phases."""
    cfg.check(inst)
    t0 = time.perf_counter()
    deadline = t0 + cfg.max_time
    counter = CheckCounter()
    rng = np.random.default_rng(cfg.seed)
    mid, prefix, info = inst.start, [], {}
    if cfg.preprocess:
        mid, prefix, info = preprocess(inst, cfg, counter, rng)
    out = FRAMEWORK_FUNCS[cfg.framework](inst, cfg, counter, start=mid, rng=rng, deadline=deadline)
    stats = dict(out.stats)
    stats.update(info)
    stats["collision_checks"] = counter.count
    stats["pp_actions"] = len(prefix)
    if not out.solved:
        stats["time_s"] = time.perf_counter() - t0
        stats["actions"] = None
        return SolveOutcome("timeout", None, stats)
    plan = label_plan(compress_plan(prefix + out.plan, inst.start), inst)
    report = validate_plan(plan, inst)
    if not report.ok:
        raise AssertionError(f"solver produced an invalid plan: {report}")
    stats["time_s"] = time.perf_counter() - t0
    stats["actions"] = len(plan)
    return SolveOutcome("solved", plan, stats)
