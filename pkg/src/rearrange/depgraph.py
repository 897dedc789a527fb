"""Dependency graph induced by a pair of arrangements.

Edge ``i -> j`` means object ``i``'s target footprint overlaps object ``j`` at
its current pose, so ``j`` has to leave before ``i`` can be placed.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .geometry import CheckCounter, bounding_radius, collides


@dataclass(frozen=True)
class DependencyGraph:
    n: int
    succ: tuple  # succ[i]: frozenset of j with edge i -> j

    @classmethod
    def from_edges(cls, n: int, edges) -> "DependencyGraph":
        succ = [set() for _ in range(n)]
        for i, j in edges:
            if i == j:
                raise ValueError("self-loops are not allowed")
            succ[i].add(j)
        return cls(n, tuple(frozenset(s) for s in succ))

    @property
    def edges(self) -> set[tuple[int, int]]:
        return {(i, j) for i in range(self.n) for j in self.succ[i]}

    def pred(self) -> list[set[int]]:
        p = [set() for _ in range(self.n)]
        for i in range(self.n):
            for j in self.succ[i]:
                p[j].add(i)
        return p

    def subgraph(self, vertices) -> tuple["DependencyGraph", list[int]]:
        """Induced subgraph relabelled 0..k-1, plus the local -> global id map."""
        ids = sorted(vertices)
        local = {v: k for k, v in enumerate(ids)}
        edges = [(local[i], local[j]) for i in ids for j in self.succ[i] if j in local]
        return DependencyGraph.from_edges(len(ids), edges), ids

    def to_dot(self, name: str = "G") -> str:
        lines = [f"digraph {name} {{"]
        lines += [f"  {i};" for i in range(self.n)]
        lines += [f"  {i} -> {j};" for i, j in sorted(self.edges)]
        lines.append("}")
        return "\n".join(lines) + "\n"


def build(frm, to, inst, counter: CheckCounter | None = None) -> DependencyGraph:
    """Edges i -> j where object i at ``to[i]`` collides with object j at ``frm[j]``."""
    n = inst.n
    shapes = inst.shapes
    if len(frm) != n or len(to) != n:
        raise ValueError("arrangements must cover every object")
    # bounding-circle broad phase; only surviving pairs reach the exact predicate
    tx = np.array([p.x for p in to])
    ty = np.array([p.y for p in to])
    fx = np.array([p.x for p in frm])
    fy = np.array([p.y for p in frm])
    br = np.array([bounding_radius(s) for s in shapes])
    near = np.hypot(tx[:, None] - fx[None, :], ty[:, None] - fy[None, :]) < br[:, None] + br[None, :]
    np.fill_diagonal(near, False)
    succ = [set() for _ in range(n)]
    for i, j in zip(*np.nonzero(near)):
        i, j = int(i), int(j)
        if collides(shapes[i], to[i], shapes[j], frm[j], counter):
            succ[i].add(j)
    return DependencyGraph(n, tuple(frozenset(s) for s in succ))


def is_monotone(g: DependencyGraph) -> bool:
    """True iff the graph has no directed cycle."""
    indeg = [0] * g.n
    for i in range(g.n):
        for j in g.succ[i]:
            indeg[j] += 1
    stack = [v for v in range(g.n) if indeg[v] == 0]
    seen = 0
    while stack:
        v = stack.pop()
        seen += 1
        for w in g.succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                stack.append(w)
    return seen == g.n


def components(g: DependencyGraph) -> list[list[int]]:
    """Weakly connected components, each sorted, ordered by smallest member."""
    parent = list(range(g.n))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for i in range(g.n):
        for j in g.succ[i]:
            a, b = find(i), find(j)
            if a != b:
                parent[max(a, b)] = min(a, b)
    groups: dict[int, list[int]] = {}
    for v in range(g.n):
        groups.setdefault(find(v), []).append(v)
    return sorted(groups.values(), key=lambda c: c[0])


def scc(g: DependencyGraph) -> list[list[int]]:
    """Strongly connected components in topological order of the condensation.

    For an edge u -> v across components, u's component comes first; among
    unordered components the one with the smallest member comes first.
    """
    index = [-1] * g.n
    low = [0] * g.n
    on_stack = [False] * g.n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    succ = [sorted(s) for s in g.succ]
    for root in range(g.n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, k = work[-1]
            if k < len(succ[v]):
                work[-1] = (v, k + 1)
                w = succ[v][k]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    # order the condensation: Kahn's algorithm keyed by smallest member
    cid = {}
    for k, c in enumerate(comps):
        for v in c:
            cid[v] = k
    indeg = [0] * len(comps)
    csucc = [set() for _ in comps]
    for i in range(g.n):
        for j in g.succ[i]:
            a, b = cid[i], cid[j]
            if a != b and b not in csucc[a]:
                csucc[a].add(b)
                indeg[b] += 1
    heap = [(comps[k][0], k) for k in range(len(comps)) if indeg[k] == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        _, k = heapq.heappop(heap)
        out.append(comps[k])
        for b in csucc[k]:
            indeg[b] -= 1
            if indeg[b] == 0:
                heapq.heappush(heap, (comps[b][0], b))
    return out


def placement_order(g: DependencyGraph, vertices=None) -> list[int] | None:
    """Smallest-first order placing every vertex after all vertices it depends on.

    Returns None when the (induced) graph is cyclic.
    """
    vs = set(range(g.n)) if vertices is None else set(vertices)
    remaining = {v: sum(1 for w in g.succ[v] if w in vs) for v in vs}
    pred = g.pred()
    heap = [v for v, k in remaining.items() if k == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for u in pred[v]:
            if u in remaining:
                remaining[u] -= 1
                if remaining[u] == 0:
                    heapq.heappush(heap, u)
    return order if len(order) == len(vs) else None


def is_simple_cycle(g: DependencyGraph, vertices) -> bool:
    """True iff the induced subgraph on ``vertices`` is exactly one directed cycle."""
    vs = set(vertices)
    if len(vs) < 2:
        return False
    pred = g.pred()
    for v in vs:
        if len(g.succ[v] & vs) != 1 or len(pred[v] & vs) != 1:
            return False
    # in/out degree one everywhere: a disjoint union of cycles; require a single one
    start = next(iter(vs))
    v, steps = start, 0
    while True:
        v = next(iter(g.succ[v] & vs))
        steps += 1
        if v == start:
            return steps == len(vs)
