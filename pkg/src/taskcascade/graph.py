"""Tree construction over tasks: MST, star, and uniform random trees.

Trees are rooted by orienting all edges away from a chosen seed task; the
default seed is the medoid of the distance matrix. Undirected edge sets are
lists of (u, v) index pairs with u < v, sorted, so construction is
deterministic across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GraphError
from .distances import DistanceMatrix

Edge = tuple[int, int]


@dataclass
class RootedTree:
    """Parent map plus root, encoding a cascade order over task indices.

    ``parent`` maps every non-root task to its parent; ``edge_length`` holds
    the distance from each non-root task to its parent.
    """

    root: int
    parent: dict[int, int]
    edge_length: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.root in self.parent:
            raise GraphError("root must not have a parent")
        if not self.edge_length:
            self.edge_length = {v: 0.0 for v in self.parent}
        if set(self.edge_length) != set(self.parent):
            raise GraphError("edge_length keys must match parent keys")
        # every parent chain must reach the root in < size steps
        size = len(self.parent) + 1
        for v in self.parent:
            node, hops = v, 0
            while node != self.root:
                if node not in self.parent or hops >= size:
                    raise GraphError(f"node {v} does not reach the root")
                node = self.parent[node]
                hops += 1

    @property
    def size(self) -> int:
        return len(self.parent) + 1

    def nodes(self) -> list[int]:
        return sorted([self.root, *self.parent])

    def children(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {v: [] for v in self.nodes()}
        for child, par in self.parent.items():
            out[par].append(child)
        for kids in out.values():
            kids.sort()
        return out


def _weights(dist: DistanceMatrix | np.ndarray) -> np.ndarray:
    w = dist.values if isinstance(dist, DistanceMatrix) else np.asarray(dist, float)
    if not np.isfinite(w).all():
        raise GraphError("distance matrix has non-finite weights")
    return w


def mst(dist: DistanceMatrix | np.ndarray) -> list[Edge]:
    """Minimum spanning tree of the complete task graph (dense Prim).

    Equal-weight candidates are broken toward the lexicographically smallest
    edge (min endpoint, then max endpoint), so the result is deterministic.
    """
    w = _weights(dist)
    T = w.shape[0]
    if T <= 1:
        return []
    in_tree = np.zeros(T, dtype=bool)
    in_tree[0] = True
    best_w = w[0].copy()
    best_from = np.zeros(T, dtype=int)
    edges: list[Edge] = []
    for _ in range(T - 1):
        pick = None
        pick_key = None
        for v in range(T):
            if in_tree[v]:
                continue
            u = int(best_from[v])
            key = (best_w[v], min(u, v), max(u, v))
            if pick_key is None or key < pick_key:
                pick, pick_key = v, key
        u = int(best_from[pick])
        edges.append((min(u, pick), max(u, pick)))
        in_tree[pick] = True
        for v in range(T):
            if in_tree[v]:
                continue
            key_new = (w[pick, v], min(pick, v), max(pick, v))
            u_old = int(best_from[v])
            key_old = (best_w[v], min(u_old, v), max(u_old, v))
            if key_new < key_old:
                best_w[v] = w[pick, v]
                best_from[v] = pick
    return sorted(edges)


def medoid(dist: DistanceMatrix | np.ndarray) -> int:
    """Task with the minimal sum of distances to all others (ties: lowest index)."""
    w = _weights(dist)
    return int(np.argmin(w.sum(axis=1)))


def root_tree(
    edges: list[Edge],
    root: int,
    dist: DistanceMatrix | np.ndarray | None = None,
) -> RootedTree:
    """Orient a spanning tree's edges away from ``root`` (BFS).

    Edge lengths are looked up in ``dist`` when given, else 0.
    """
    nodes: set[int] = {root}
    for u, v in edges:
        nodes.update((u, v))
    T = len(nodes)
    if len(edges) != T - 1:
        raise GraphError(f"{len(edges)} edges cannot span {T} nodes")
    adjacency: dict[int, list[int]] = {v: [] for v in nodes}
    for u, v in edges:
        if u == v:
            raise GraphError(f"self-loop at node {u}")
        adjacency[u].append(v)
        adjacency[v].append(u)

    w = _weights(dist) if dist is not None else None
    parent: dict[int, int] = {}
    edge_length: dict[int, float] = {}
    visited = {root}
    frontier = [root]
    while frontier:
        node = frontier.pop(0)
        for nxt in sorted(adjacency[node]):
            if nxt in visited:
                continue
            visited.add(nxt)
            parent[nxt] = node
            edge_length[nxt] = float(w[node, nxt]) if w is not None else 0.0
            frontier.append(nxt)
    if len(visited) != T:
        raise GraphError("edge set is disconnected or contains a cycle")
    return RootedTree(root=root, parent=parent, edge_length=edge_length)


def decode_pruefer(sequence: list[int] | np.ndarray, num_nodes: int) -> list[Edge]:
    """Decode a Pruefer sequence over labels {0..T-1} into a labeled tree."""
    T = num_nodes
    seq = [int(s) for s in sequence]
    if T < 1:
        raise GraphError("need at least one node")
    if len(seq) != max(T - 2, 0):
        raise GraphError(f"sequence length {len(seq)} invalid for {T} nodes")
    if any(not 0 <= s < T for s in seq):
        raise GraphError("sequence labels out of range")
    if T == 1:
        return []
    if T == 2:
        return [(0, 1)]
    degree = [1] * T
    for s in seq:
        degree[s] += 1
    edges: list[Edge] = []
    for s in seq:
        leaf = min(v for v in range(T) if degree[v] == 1)
        edges.append((min(leaf, s), max(leaf, s)))
        degree[leaf] -= 1
        degree[s] -= 1
    u, v = (v for v in range(T) if degree[v] == 1)
    edges.append((min(u, v), max(u, v)))
    return sorted(edges)


def random_spanning_tree(num_nodes: int, seed: int | np.random.Generator) -> list[Edge]:
    """Uniform random labeled tree via a uniformly sampled Pruefer sequence."""
    if num_nodes < 1:
        raise GraphError("need at least one node")
    if num_nodes <= 2:
        return decode_pruefer([], num_nodes)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    seq = rng.integers(0, num_nodes, size=num_nodes - 2)
    return decode_pruefer(seq, num_nodes)


def star_tree(
    num_nodes: int,
    root: int,
    dist: DistanceMatrix | np.ndarray | None = None,
) -> RootedTree:
    """Depth-1 tree: every non-root task is a direct child of the root."""
    if not 0 <= root < num_nodes:
        raise GraphError(f"root {root} out of range for {num_nodes} nodes")
    edges = [(min(root, v), max(root, v)) for v in range(num_nodes) if v != root]
    return root_tree(sorted(edges), root, dist)


def topological_order(tree: RootedTree) -> list[int]:
    """Root-first order with children visited in ascending index (BFS)."""
    children = tree.children()
    order = [tree.root]
    frontier = [tree.root]
    while frontier:
        node = frontier.pop(0)
        for child in children[node]:
            order.append(child)
            frontier.append(child)
    return order


def depths(tree: RootedTree) -> dict[int, int]:
    """Depth of every node; root is 0, each child one deeper than its parent."""
    out = {tree.root: 0}
    for node in topological_order(tree)[1:]:
        out[node] = out[tree.parent[node]] + 1
    return out


def save_tree(tree: RootedTree, path: str | Path, ids: list[str] | None = None) -> None:
    """Write an edge-list CSV ``parent,child,edge_length`` under a root header."""
    if ids is None:
        ids = [f"task{i}" for i in range(tree.size)]
    with open(path, "w") as fh:
        fh.write(f"# root={ids[tree.root]}\n")
        fh.write("parent,child,edge_length\n")
        for child in topological_order(tree)[1:]:
            par = tree.parent[child]
            fh.write(f"{ids[par]},{ids[child]},{tree.edge_length[child]!r}\n")


def load_tree(path: str | Path, ids: list[str] | None = None) -> RootedTree:
    """Read a tree CSV written by :func:`save_tree`; ids map back to indices."""
    lines = Path(path).read_text().splitlines()
    if len(lines) < 2 or not lines[0].startswith("# root="):
        raise GraphError(f"{path}: missing '# root=' header")
    root_id = lines[0][len("# root="):]
    rows = [line.split(",") for line in lines[2:] if line]
    if any(len(row) != 3 for row in rows):
        raise GraphError(f"{path}: expected parent,child,edge_length rows")
    if ids is None:
        seen = {root_id} | {cell for row in rows for cell in row[:2]}
        ids = sorted(seen)
    index = {task_id: i for i, task_id in enumerate(ids)}
    try:
        parent = {index[c]: index[p] for p, c, _ in rows}
        edge_length = {index[c]: float(w) for _, c, w in rows}
        return RootedTree(index[root_id], parent, edge_length)
    except (KeyError, ValueError) as exc:
        raise GraphError(f"{path}: bad row ({exc})") from None
