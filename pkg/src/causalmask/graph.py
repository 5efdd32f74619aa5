"""Time-indexed causal DAGs.

Nodes are single coordinates of the vector-valued system variables: a state
coordinate ``S_t[i]``, an observation coordinate ``O_t[i]``, an action
coordinate ``A_t[i]``, or the initialization seed ``W_1``. Times and indices
are 1-based.

Besides the graph type this module provides d-separation (by the
reachability form of the blocking rules), graph surgery for interventions,
directed-path queries, unrolling of a time-invariant template, and JSON
(de)serialization.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import NamedTuple

KINDS = ("S", "O", "A", "W")
_DIM_SLOT = {"S": 0, "O": 1, "A": 2}


class NodeId(NamedTuple):
    kind: str
    time: int
    index: int

    def __str__(self):
        if self.kind == "W":
            return "W1"
        return f"{self.kind}{self.time}[{self.index}]"

    def to_list(self):
        return [self.kind, self.time, self.index]


def node(kind, time, index=1):
    """Validated :class:`NodeId` constructor."""
    if kind not in KINDS:
        raise ValueError(f"node kind must be one of {KINDS}, got {kind!r}")
    if int(time) < 1 or int(index) < 1:
        raise ValueError(f"time and index are 1-based, got {time}, {index}")
    if kind == "W" and (time != 1 or index != 1):
        raise ValueError("the seed node exists only as W1")
    return NodeId(kind, int(time), int(index))


SEED = NodeId("W", 1, 1)


class GraphError(ValueError):
    pass


def _grid(dims, horizon):
    out = [SEED]
    for t in range(1, horizon + 1):
        for kind in ("S", "O", "A"):
            for i in range(1, dims[_DIM_SLOT[kind]] + 1):
                out.append(NodeId(kind, t, i))
    return out


@dataclass(frozen=True)
class CausalGraph:
    """Immutable DAG over :class:`NodeId` nodes.

    When ``dims`` and ``horizon`` are given, every state, observation and
    action coordinate up to the horizon plus the seed ``W1`` is a node even
    if it has no edges. Extra ``nodes`` may be listed for free-form graphs.
    """

    edges: frozenset
    dims: tuple = None
    horizon: int = None
    nodes: frozenset = field(default=frozenset())
    _parents: dict = field(init=False, repr=False, compare=False)
    _children: dict = field(init=False, repr=False, compare=False)
    _order: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        edges = frozenset((NodeId(*u), NodeId(*v)) for u, v in self.edges)
        nodes = {NodeId(*n) for n in self.nodes}
        if self.dims is not None:
            object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
            if self.horizon is None:
                raise GraphError("dims given without horizon")
            nodes.update(_grid(self.dims, self.horizon))
        for u, v in edges:
            nodes.add(u)
            nodes.add(v)
        for n in nodes:
            node(*n)
            if self.dims is not None and n.kind != "W":
                if n.index > self.dims[_DIM_SLOT[n.kind]]:
                    raise GraphError(f"{n} exceeds dims {self.dims}")
                if n.time > self.horizon:
                    raise GraphError(f"{n} beyond horizon {self.horizon}")
        parents = {n: set() for n in nodes}
        children = {n: set() for n in nodes}
        for u, v in edges:
            if u == v:
                raise GraphError(f"self loop on {u}")
            if v.time < u.time:
                raise GraphError(f"edge {u} -> {v} goes back in time")
            parents[v].add(u)
            children[u].add(v)
        try:
            order = tuple(TopologicalSorter(
                {n: sorted(parents[n]) for n in sorted(nodes)}).static_order())
        except CycleError as exc:
            raise GraphError(f"graph has a cycle: {exc.args[1]}") from None
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "nodes", frozenset(nodes))
        object.__setattr__(self, "_parents",
                           {n: frozenset(p) for n, p in parents.items()})
        object.__setattr__(self, "_children",
                           {n: frozenset(c) for n, c in children.items()})
        object.__setattr__(self, "_order", order)

    def __contains__(self, n):
        return n in self._parents

    def parents(self, n):
        return self._parents[self._check(n)]

    def children(self, n):
        return self._children[self._check(n)]

    def topological_order(self):
        return self._order

    def _check(self, n):
        if n not in self._parents:
            raise KeyError(f"node {n} not in graph")
        return n

    def descendants(self, n):
        """Nodes reachable from ``n`` by a directed path of length >= 1."""
        return _reach(self._children, [self._check(n)])

    def ancestors(self, n):
        return _reach(self._parents, [self._check(n)])

    def restrict(self, max_time):
        """Subgraph on times ``<= max_time`` (the seed is kept)."""
        edges = {(u, v) for u, v in self.edges if v.time <= max_time}
        if self.dims is not None:
            return CausalGraph(frozenset(edges), dims=self.dims,
                               horizon=min(self.horizon, max_time))
        nodes = {n for n in self.nodes if n.time <= max_time}
        return CausalGraph(frozenset(edges), nodes=frozenset(nodes))

    def to_json(self):
        return json.dumps(graph_to_dict(self))


def _reach(adj, start):
    seen = set()
    queue = deque(start)
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def graph_to_dict(g):
    edges = sorted(g.edges)
    return {
        "dims": list(g.dims) if g.dims is not None else None,
        "horizon": g.horizon,
        "edges": [u.to_list() + v.to_list() for u, v in edges],
    }


def graph_from_dict(doc):
    edges = frozenset((NodeId(*e[:3]), NodeId(*e[3:])) for e in doc["edges"])
    dims = doc.get("dims")
    return CausalGraph(edges, dims=tuple(dims) if dims else None,
                       horizon=doc.get("horizon"))


def graph_from_json(text):
    return graph_from_dict(json.loads(text))


# ------------------------------------------------------------------ queries

def has_directed_path(g, x, y):
    """True iff a directed path of length >= 1 leads from ``x`` to ``y``."""
    g._check(y)
    return y in g.descendants(x)


def d_separated(g, x, y, z=()):
    """Whether ``z`` blocks every path between nodes ``x`` and ``y``.

    A path is blocked by a non-collider in ``z`` or by a collider that is
    not in ``z`` and has no descendant in ``z``. The search walks the graph
    keeping track of the direction each node is entered from, which visits
    every (node, direction) pair at most once.
    """
    z = frozenset(z)
    for n in (x, y, *z):
        g._check(n)
    if x == y:
        raise ValueError("x and y must be different nodes")
    if x in z or y in z:
        raise ValueError("x and y must not be in the conditioning set")

    # nodes that are in z or have a descendant in z
    opens_collider = set(z)
    for n in z:
        opens_collider |= g.ancestors(n)

    # direction: True = arrived from a child (moving up), False = from a parent
    seen = set()
    queue = deque([(x, True)])
    while queue:
        n, up = queue.popleft()
        if (n, up) in seen:
            continue
        seen.add((n, up))
        if n == y:
            return False
        if up:
            if n in z:
                continue
            for p in g.parents(n):
                queue.append((p, True))
            for c in g.children(n):
                queue.append((c, False))
        else:
            if n not in z:
                for c in g.children(n):
                    queue.append((c, False))
            if n in opens_collider:
                for p in g.parents(n):
                    queue.append((p, True))
    return True


def intervene_graph(g, targets):
    """Graph surgery: remove every edge into a node of ``targets``."""
    targets = frozenset(targets)
    for n in targets:
        g._check(n)
    if not targets:
        return g
    edges = frozenset((u, v) for u, v in g.edges if v not in targets)
    return CausalGraph(edges, dims=g.dims, horizon=g.horizon,
                       nodes=g.nodes if g.dims is None else frozenset())


# ---------------------------------------------------------------- templates

class TemplateEdge(NamedTuple):
    src_kind: str
    src_index: int
    dst_kind: str
    dst_index: int
    lag: int


@dataclass(frozen=True)
class GraphTemplate:
    """Time-invariant edge pattern.

    ``edges`` holds :class:`TemplateEdge` entries ``X[i] -> Y[j]`` with time
    lag ``lag >= 0``; ``seed_edges`` holds ``(kind, index)`` targets of
    ``W1 -> X_1[i]`` edges, which exist at time 1 only.
    """

    dims: tuple
    edges: tuple = ()
    seed_edges: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "edges",
                           tuple(TemplateEdge(*e) for e in self.edges))
        object.__setattr__(self, "seed_edges",
                           tuple((k, int(i)) for k, i in self.seed_edges))
        for e in self.edges:
            if e.lag < 0:
                raise GraphError(f"negative lag in template edge {e}")
            if "W" in (e.src_kind, e.dst_kind):
                raise GraphError("seed edges belong in seed_edges")
        # a cycle can only hide among same-step edges
        same = {(e.src_kind, e.src_index, e.dst_kind, e.dst_index)
                for e in self.edges if e.lag == 0}
        try:
            CausalGraph(frozenset((NodeId(a, 1, i), NodeId(b, 1, j))
                                  for a, i, b, j in same))
        except GraphError as exc:
            raise GraphError(f"template is cyclic: {exc}") from None


def unroll(template, horizon):
    """Instantiate ``template`` for time steps ``1..horizon``."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    edges = set()
    for e in template.edges:
        for t in range(1, horizon - e.lag + 1):
            edges.add((NodeId(e.src_kind, t, e.src_index),
                       NodeId(e.dst_kind, t + e.lag, e.dst_index)))
    for kind, i in template.seed_edges:
        edges.add((SEED, NodeId(kind, 1, i)))
    return CausalGraph(frozenset(edges), dims=tuple(template.dims),
                       horizon=horizon)
