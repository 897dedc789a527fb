"""Primitive plans: placement orders over the dependency graph, ignoring buffer geometry.

A placement order fixes when each object reaches its goal. ``derive_plan``
turns an order into primitive moves, evicting an object to a buffer only
right before a goal placement that needs its start pose cleared.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .depgraph import DependencyGraph, components, is_monotone, placement_order, scc

S2G, S2B, B2G = "s->g", "s->b", "b->g"
MOVE_KIND = {S2G: "SG", S2B: "SB", B2G: "BG"}
DP_LIMIT = 20
BRUTE_LIMIT = 8


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class PrimitiveAction:
    object: int
    move: str


@dataclass
class PrimitivePlan:
    actions: list[PrimitiveAction]

    @property
    def total_buffers(self) -> int:
        return sum(1 for a in self.actions if a.move == S2B)

    @property
    def running_buffers(self) -> int:
        return running_buffers(self.actions)

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)


@dataclass
class PlacementOrder:
    order: list[int]
    objective: int = 0           # the minimised quantity (running or total buffers)
    fallback: bool = False       # True when some component was too large for the exact solver
    fvs: list[int] = field(default_factory=list)


def running_buffers(actions) -> int:
    """Peak number of objects sitting in buffers, sampled after every action."""
    cur = peak = 0
    for a in actions:
        if a.move == S2B:
            cur += 1
            peak = max(peak, cur)
        elif a.move == B2G:
            cur -= 1
    return peak


def derive_plan(order, g: DependencyGraph) -> PrimitivePlan:
    order = list(order)
    if sorted(order) != list(range(g.n)):
        raise ValueError("placement order must be a permutation of the object ids")
    placed = [False] * g.n
    evicted = [False] * g.n
    actions = []
    for j in order:
        for o in sorted(g.succ[j]):
            if not placed[o] and not evicted[o]:
                evicted[o] = True
                actions.append(PrimitiveAction(o, S2B))
        actions.append(PrimitiveAction(j, B2G if evicted[j] else S2G))
        placed[j] = True
    return PrimitivePlan(actions)


# ---------------------------------------------------------------------------
# running-buffer minimisation

def _local_masks(g: DependencyGraph, comp: list[int]):
    local = {v: k for k, v in enumerate(comp)}
    out = [0] * len(comp)
    for v in comp:
        for w in g.succ[v]:
            if w in local:
                out[local[v]] |= 1 << local[w]
    return out


def _popcounts(k: int) -> np.ndarray:
    pc = np.zeros(1 << k, dtype=np.int8)
    for b in range(k):
        pc[1 << b: 1 << (b + 1)] = pc[: 1 << b] + 1
    return pc


def _union_table(out: list[int]) -> np.ndarray:
    k = len(out)
    U = np.zeros(1 << k, dtype=np.int64)
    for b in range(k):
        U[1 << b: 1 << (b + 1)] = U[: 1 << b] | out[b]
    return U


def _rbm_exact(out: list[int], rng: np.random.Generator | None) -> tuple[list[int], int]:
    """Subset DP over placed sets; returns a local order and its running-buffer peak.

    rest[S] is the best achievable peak over all completions once S is placed.
    Placing j after S first evicts j's blockers, then |E(S+j)| objects sit in
    buffers plus j itself if it was evicted earlier.
    """
    k = len(out)
    full = (1 << k) - 1
    pc = _popcounts(k)
    U = _union_table(out)
    rest = np.full(1 << k, 127, dtype=np.int8)
    rest[full] = 0
    subsets = np.arange(1 << k, dtype=np.int64)
    by_size = np.argsort(pc, kind="stable")
    bounds = np.searchsorted(pc[by_size], np.arange(k + 2))
    for p in range(k - 1, -1, -1):
        layer = subsets[by_size[bounds[p]: bounds[p + 1]]]
        for j in range(k):
            bit = 1 << j
            sel = layer[(layer & bit) == 0]
            T = sel | bit
            peak = pc[U[T] & ~T] + ((U[sel] >> j) & 1).astype(np.int8)
            cand = np.maximum(peak, rest[T])
            rest[sel] = np.minimum(rest[sel], cand)
    best = int(rest[0])
    order = []
    S = 0
    for _ in range(k):
        cands = list(range(k)) if rng is None else [int(c) for c in rng.permutation(k)]
        for j in cands:
            bit = 1 << j
            if S & bit:
                continue
            T = S | bit
            u = int(U[S])
            peak = bin(int(U[T]) & ~T).count("1") + ((u >> j) & 1)
            if max(peak, int(rest[T])) <= best:
                order.append(j)
                S = T
                break
    return order, best


def _greedy_order(out: list[int], rng: np.random.Generator | None) -> tuple[list[int], int]:
    """Place next whichever object gives the lowest immediate buffer peak."""
    k = len(out)
    S = 0
    U = 0
    order = []
    worst = 0
    for _ in range(k):
        best = None
        cands = range(k) if rng is None else (int(c) for c in rng.permutation(k))
        for j in cands:
            bit = 1 << j
            if S & bit:
                continue
            T = S | bit
            UT = U | out[j]
            peak = bin(UT & ~T).count("1") + ((U >> j) & 1)
            key = (peak, bin(out[j] & ~S & ~U).count("1"))
            if best is None or key < best[0]:
                best = (key, j)
        j = best[1]
        worst = max(worst, best[0][0])
        order.append(j)
        S |= 1 << j
        U |= out[j]
    return order, worst


def _random_topological(g: DependencyGraph, comp: list[int], rng: np.random.Generator) -> list[int]:
    vs = set(comp)
    remaining = {v: len(g.succ[v] & vs) for v in comp}
    pred = g.pred()
    ready = [v for v in comp if remaining[v] == 0]
    order = []
    while ready:
        v = ready.pop(int(rng.integers(len(ready))))
        order.append(v)
        for u in pred[v]:
            if u in remaining:
                remaining[u] -= 1
                if remaining[u] == 0:
                    ready.append(u)
    return order


def _acyclic_order(g, comp, rng):
    if len(comp) == 1:
        return list(comp)
    sub, ids = g.subgraph(comp)
    if not is_monotone(sub):
        return None
    if rng is None:
        return [ids[v] for v in placement_order(sub)]
    return [ids[v] for v in _random_topological(sub, list(range(len(ids))), rng)]


def _scc_blocks(g: DependencyGraph, comp: list[int]) -> list[list[int]]:
    """Strongly connected pieces of ``comp`` in an order that respects dependencies.

    No edge leaves a later piece toward an earlier one's unplaced objects, so
    solving the pieces one after another loses nothing for either objective.
    """
    sub, ids = g.subgraph(comp)
    return [[ids[v] for v in block] for block in reversed(scc(sub))]


def rbm(g: DependencyGraph, rng: np.random.Generator | None = None) -> PlacementOrder:
    """Placement order minimising the peak number of concurrently buffered objects.

    Weakly connected components are handled independently and concatenated;
    inside a component the strongly connected pieces are placed in dependency
    order, each by the exact subset DP. Without ``rng`` ties go to the
    lexicographically smallest order of each piece; with it they are broken
    at random. Pieces above ``DP_LIMIT`` fall back to a greedy order and set
    ``fallback``.
    """
    order: list[int] = []
    value = 0
    fallback = False
    for comp in components(g):
        acyclic = _acyclic_order(g, comp, rng)
        if acyclic is not None:
            order += acyclic
            continue
        for block in _scc_blocks(g, comp):
            if len(block) == 1:
                order += block
                continue
            out = _local_masks(g, block)
            if len(block) <= DP_LIMIT:
                local, v = _rbm_exact(out, rng)
            else:
                local, v = _greedy_order(out, rng)
                fallback = True
            order += [block[j] for j in local]
            value = max(value, v)
    return PlacementOrder(order, value, fallback)


# ---------------------------------------------------------------------------
# total-buffer minimisation = minimum feedback vertex set

def _reduce(mask: int, out: list[int], inn: list[int]) -> int:
    """Strip vertices that cannot lie on a cycle inside ``mask``."""
    changed = True
    while changed:
        changed = False
        m = mask
        while m:
            b = m & -m
            v = b.bit_length() - 1
            m ^= b
            if not (out[v] & mask) or not (inn[v] & mask):
                mask &= ~b
                changed = True
    return mask


def _fvs_search(mask, forbidden, budget, out, inn, tie):
    mask = _reduce(mask, out, inn)
    if not mask:
        return []
    if budget == 0:
        return None
    if _reduce(mask & forbidden, out, inn):
        return None
    cands = mask & ~forbidden
    if not cands:
        return None
    best, pick = -1, -1
    for v in tie:
        if cands >> v & 1:
            score = bin(out[v] & mask).count("1") * bin(inn[v] & mask).count("1")
            if score > best:
                best, pick = score, v
    bit = 1 << pick
    r = _fvs_search(mask & ~bit, forbidden, budget - 1, out, inn, tie)
    if r is not None:
        return [pick] + r
    return _fvs_search(mask, forbidden | bit, budget, out, inn, tie)


def min_fvs_local(out: list[int], rng: np.random.Generator | None = None) -> list[int]:
    k = len(out)
    inn = [0] * k
    for v in range(k):
        m = out[v]
        while m:
            b = m & -m
            inn[b.bit_length() - 1] |= 1 << v
            m ^= b
    tie = list(range(k)) if rng is None else [int(c) for c in rng.permutation(k)]
    full = (1 << k) - 1
    for budget in range(k + 1):
        r = _fvs_search(full, 0, budget, out, inn, tie)
        if r is not None:
            return sorted(r)
    raise AssertionError("unreachable: removing every vertex leaves an acyclic graph")


def _greedy_fvs(out: list[int]) -> list[int]:
    k = len(out)
    inn = [0] * k
    for v in range(k):
        for w in range(k):
            if out[v] >> w & 1:
                inn[w] |= 1 << v
    mask = _reduce((1 << k) - 1, out, inn)
    chosen = []
    while mask:
        v = max((v for v in range(k) if mask >> v & 1),
                key=lambda v: bin(out[v] & mask).count("1") * bin(inn[v] & mask).count("1"))
        chosen.append(v)
        mask = _reduce(mask & ~(1 << v), out, inn)
    return sorted(chosen)


def tbm(g: DependencyGraph, rng: np.random.Generator | None = None) -> PlacementOrder:
    """Placement order whose evicted set is a minimum feedback vertex set.

    Per strongly connected piece: non-FVS objects first in dependency order,
    the FVS objects last.
    """
    order: list[int] = []
    fvs_all: list[int] = []
    fallback = False
    for comp in components(g):
        acyclic = _acyclic_order(g, comp, rng)
        if acyclic is not None:
            order += acyclic
            continue
        for block in _scc_blocks(g, comp):
            if len(block) == 1:
                order += block
                continue
            out = _local_masks(g, block)
            if len(block) <= DP_LIMIT:
                fvs = min_fvs_local(out, rng)
            else:
                fvs = _greedy_fvs(out)
                fallback = True
            fvs_ids = [block[v] for v in fvs]
            chosen = set(fvs_ids)
            rest = [v for v in block if v not in chosen]
            order += placement_order(g, rest) + (placement_order(g, fvs_ids) or fvs_ids)
            fvs_all += fvs_ids
    return PlacementOrder(order, len(fvs_all), fallback, sorted(fvs_all))


def random_order(n: int, seed=None) -> PlacementOrder:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return PlacementOrder([int(v) for v in rng.permutation(n)])


# ---------------------------------------------------------------------------
# exhaustive oracles for small graphs

def brute_force(g: DependencyGraph) -> tuple[int, int]:
    """(min running buffers, min total buffers) over every placement order."""
    if g.n > BRUTE_LIMIT:
        raise TooLarge(f"brute force is limited to {BRUTE_LIMIT} objects")
    best_run = best_tot = g.n + 1
    for order in itertools.permutations(range(g.n)):
        plan = derive_plan(order, g)
        best_run = min(best_run, plan.running_buffers)
        best_tot = min(best_tot, plan.total_buffers)
    return best_run, best_tot


def brute_force_mrb(g: DependencyGraph) -> int:
    return brute_force(g)[0]


def brute_force_tbm(g: DependencyGraph) -> int:
    return brute_force(g)[1]
