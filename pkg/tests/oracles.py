"""Slow reference implementations used only by the tests."""

import itertools

from causalmask.graph import CausalGraph, NodeId


def undirected_paths(g, x, y):
    adj = {n: set(g.parents(n)) | set(g.children(n)) for n in g.nodes}

    def walk(path):
        last = path[-1]
        if last == y:
            yield list(path)
            return
        for nxt in adj[last]:
            if nxt not in path:
                path.append(nxt)
                yield from walk(path)
                path.pop()

    yield from walk([x])


def path_blocked(g, path, z):
    for a, m, b in zip(path, path[1:], path[2:]):
        collider = a in g.parents(m) and b in g.parents(m)
        if collider:
            if m not in z and not (g.descendants(m) & z):
                return True
        elif m in z:
            return True
    return False


def d_separated_brute(g, x, y, z):
    z = frozenset(z)
    return all(path_blocked(g, p, z) for p in undirected_paths(g, x, y))


def random_dag(g, n_nodes, p_edge):
    """DAG over ``S1[1..n]`` with edges only from lower to higher index."""
    nodes = [NodeId("S", 1, i + 1) for i in range(n_nodes)]
    perm = g.permutation(n_nodes)
    edges = set()
    for i, j in itertools.combinations(range(n_nodes), 2):
        if g.random() < p_edge:
            edges.add((nodes[perm[i]], nodes[perm[j]]))
    return CausalGraph(frozenset(edges), nodes=frozenset(nodes))


def all_queries(g):
    nodes = sorted(g.nodes)
    for x, y in itertools.combinations(nodes, 2):
        rest = [n for n in nodes if n not in (x, y)]
        for r in range(len(rest) + 1):
            for z in itertools.combinations(rest, r):
                yield x, y, frozenset(z)


def literal_mask(data, cfg):
    """Nested-loop transcription of the masking procedure with early exits."""
    from causalmask.independence import hoeffding_d
    d_s, d_o, d_a = data.dims
    s1 = data.at("s", 1)
    o1 = data.at("o", 1)

    def check(o, a, tp):
        at = data.at("a", tp)
        for s in range(d_s):
            if (hoeffding_d(s1[:, s], o1[:, o]) > cfg.gamma
                    and hoeffding_d(s1[:, s], at[:, a]) > cfg.gamma):
                return True
        return False

    bits = []
    for o in range(d_o):
        masked = True
        for a in range(d_a):
            for tp in range(1, cfg.horizon + 1):
                if check(o, a, tp):
                    masked = False
                    break
            if not masked:
                break
        bits.append(masked)
    return bits
