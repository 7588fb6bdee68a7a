"""Bus-branch graph analysis: cycle basis, shortest paths with separator sets,
and tree decompositions built from a minimum-degree elimination ordering."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import combinations

__all__ = [
    "Cycle",
    "PathTable",
    "Bag",
    "adjacency",
    "cycle_basis",
    "path_table",
    "tree_decomposition",
    "decomposition_width",
    "clique_tree",
    "verify_decomposition",
]


@dataclass(frozen=True)
class Cycle:
    """Closed walk given as directed edges ``(i, j)``; the last head is the first tail."""

    edges: tuple

    def __post_init__(self):
        edges = tuple(tuple(e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        if len(edges) < 3:
            raise ValueError("a cycle needs at least three edges")
        for (a, b), (c, d) in zip(edges, edges[1:] + edges[:1]):
            if b != c:
                raise ValueError(f"edges ({a},{b}) and ({c},{d}) do not chain")
        nodes = [e[0] for e in edges]
        if len(set(nodes)) != len(nodes):
            raise ValueError("cycle repeats a node")

    @property
    def nodes(self):
        return tuple(e[0] for e in self.edges)

    @classmethod
    def from_nodes(cls, nodes):
        nodes = list(nodes)
        return cls(tuple(zip(nodes, nodes[1:] + nodes[:1])))

    def __len__(self):
        return len(self.edges)


@dataclass(frozen=True)
class PathTable:
    source: int
    paths: dict  # node -> tuple of directed edges from source
    separators: dict  # node -> frozenset of interior path nodes
    union: frozenset  # {source} plus every separator

    def path_nodes(self, j):
        path = self.paths[j]
        if not path:
            return frozenset()
        return frozenset([path[0][0]] + [e[1] for e in path])


@dataclass(frozen=True)
class Bag:
    nodes: tuple
    fillins: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes)))
        object.__setattr__(self, "fillins", frozenset(tuple(sorted(p)) for p in self.fillins))
        if len(self.nodes) < 2:
            raise ValueError("a bag holds at least two buses")

    def pairs(self):
        return list(combinations(self.nodes, 2))


def adjacency(net_or_adj):
    """Accept a Network or a ready adjacency mapping; return sorted neighbor lists."""
    if hasattr(net_or_adj, "adjacency"):
        return net_or_adj.adjacency()
    return {k: sorted(v) for k, v in net_or_adj.items()}


def _edge_set(adj):
    return {frozenset((u, v)) for u in adj for v in adj[u]}


def _bfs_tree(adj, root):
    parent = {root: None}
    depth = {root: 0}
    order = [root]
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in parent:
                parent[v] = u
                depth[v] = depth[u] + 1
                order.append(v)
                queue.append(v)
    return parent, depth, order


def _canonical_cycle(nodes):
    k = nodes.index(min(nodes))
    nodes = nodes[k:] + nodes[:k]
    if nodes[1] > nodes[-1]:
        nodes = [nodes[0]] + nodes[:0:-1]
    return Cycle.from_nodes(nodes)


def cycle_basis(net):
    """Fundamental cycles of a breadth-first spanning tree rooted at the lowest bus id.

    Each cycle starts at its lowest node and proceeds towards the smaller of
    that node's two cycle neighbors.
    """
    adj = adjacency(net)
    if not adj:
        return []
    root = min(adj)
    parent, depth, _ = _bfs_tree(adj, root)
    if len(parent) != len(adj):
        raise ValueError("graph is disconnected")
    tree = {frozenset((v, p)) for v, p in parent.items() if p is not None}
    cycles = []
    for e in sorted(tuple(sorted(e)) for e in _edge_set(adj) - tree):
        u, v = e
        left, right = [u], [v]
        a, b = u, v
        while a != b:
            if depth[a] >= depth[b]:
                a = parent[a]
                left.append(a)
            else:
                b = parent[b]
                right.append(b)
        # left ends at the common ancestor, right too
        nodes = left + right[-2::-1]
        cycles.append(_canonical_cycle(nodes))
    return cycles


def path_table(net, cycle, r):
    """Shortest undirected paths from ``r`` to every cycle node, with separator sets.

    Paths run through the whole graph.  Ties go to the path found first by a
    breadth-first search that visits neighbors in ascending id order.
    """
    if r not in cycle.nodes:
        raise ValueError(f"bus {r} is not on the cycle")
    adj = adjacency(net)
    parent, _, _ = _bfs_tree(adj, r)
    paths, seps = {}, {}
    for j in cycle.nodes:
        walk = [j]
        while walk[-1] != r:
            walk.append(parent[walk[-1]])
        walk.reverse()
        paths[j] = tuple(zip(walk, walk[1:]))
        seps[j] = frozenset(walk[1:-1])
    union = frozenset({r}).union(*seps.values())
    return PathTable(r, paths, seps, union)


def _eliminate(adj):
    """Minimum-degree elimination; ties go to the lowest id.  Returns (order, bags, fill edges)."""
    work = {u: set(vs) for u, vs in adj.items()}
    order, bags, fill = [], [], set()
    while work:
        v = min(work, key=lambda u: (len(work[u]), u))
        nbrs = work.pop(v)
        bags.append(frozenset(nbrs | {v}))
        for a, b in combinations(sorted(nbrs), 2):
            if b not in work[a]:
                work[a].add(b)
                work[b].add(a)
                fill.add((a, b))
        for u in nbrs:
            work[u].discard(v)
        order.append(v)
    return order, bags, fill


def tree_decomposition(net):
    """Bags are the maximal cliques of the min-degree chordal completion.

    Returned in elimination order of their creating vertex; fill-in pairs are
    the bag pairs that are not network edges.
    """
    adj = adjacency(net)
    edges = _edge_set(adj)
    _, raw, _ = _eliminate(adj)
    maximal = []
    for k, bag in enumerate(raw):
        if len(bag) < 2:
            continue
        if any(bag < other or (bag == other and j < k) for j, other in enumerate(raw) if j != k):
            continue
        maximal.append(bag)
    out = []
    for bag in maximal:
        fill = {p for p in combinations(sorted(bag), 2) if frozenset(p) not in edges}
        out.append(Bag(tuple(bag), frozenset(fill)))
    return out


def decomposition_width(bags):
    return max((len(b.nodes) for b in bags), default=1) - 1


def clique_tree(bags):
    """Maximum-weight spanning tree of the bag intersection graph (Kruskal).

    For a family that admits a tree decomposition this tree has the
    running-intersection property.  Returns a list of index pairs.
    """
    cand = []
    for a, b in combinations(range(len(bags)), 2):
        w = len(set(bags[a].nodes) & set(bags[b].nodes))
        cand.append((-w, a, b))
    cand.sort()
    root = list(range(len(bags)))

    def find(u):
        while root[u] != u:
            root[u] = root[root[u]]
            u = root[u]
        return u

    tree = []
    for _, a, b in cand:
        ra, rb = find(a), find(b)
        if ra != rb:
            root[ra] = rb
            tree.append((a, b))
    return tree


def verify_decomposition(net, bags, tree=None):
    """True iff every node and edge is covered and the running intersection holds."""
    adj = adjacency(net)
    bag_sets = [set(b.nodes) for b in bags]
    nodes = set(adj)
    if not bag_sets:
        return len(nodes) <= 1
    if set().union(*bag_sets) != nodes:
        return False
    for e in _edge_set(adj):
        if not any(e <= s for s in bag_sets):
            return False
    if tree is None:
        tree = clique_tree(bags)
    if len(tree) != len(bags) - 1:
        return False
    nbr = {k: [] for k in range(len(bags))}
    for a, b in tree:
        nbr[a].append(b)
        nbr[b].append(a)
    # the tree itself must be connected
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in nbr[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    if len(seen) != len(bags):
        return False
    for node in nodes:
        holding = [k for k, s in enumerate(bag_sets) if node in s]
        reach = {holding[0]}
        stack = [holding[0]]
        while stack:
            u = stack.pop()
            for v in nbr[u]:
                if v not in reach and node in bag_sets[v]:
                    reach.add(v)
                    stack.append(v)
        if len(reach) != len(holding):
            return False
    return True
