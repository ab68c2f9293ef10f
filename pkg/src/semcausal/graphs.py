"""Directed acyclic graphs over named nodes, with reachability and
d-separation oracles.

Graphs are small (a handful to a few dozen nodes), immutable, and cheap to
rebuild, so adjacency structures are computed on demand rather than cached
on the instance. D-separation answers go through a bounded LRU cache keyed
by a canonical form of the graph and query.
"""

from __future__ import annotations

import random
import string
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

NAME_ALPHABET = string.ascii_lowercase + string.ascii_uppercase + string.digits

# Undirected path enumeration is capped at this many edges; longer paths are
# invisible to the d-separation oracle, and generation rejects graphs where
# that matters (no path at all between the queried pair).
MAX_PATH_LENGTH = 10

# Per-graph retries when drawing node names before giving up.
MAX_NAME_ATTEMPTS = 10

# Out-degree cap in DAG generation.
MAX_TARGETS_PER_NODE = 5

DSEP_CACHE_SIZE = 1000


class GraphError(ValueError):
    """A graph violates a structural invariant (cycle, bad name, dup edge)."""


class InvalidQueryError(ValueError):
    """A query references unknown nodes or an ill-formed (x, y, z) triple."""


class NameCollisionError(RuntimeError):
    """Could not draw pairwise-distinct node names within the retry budget."""


def is_valid_name(name: str) -> bool:
    return len(name) >= 1 and all(c in NAME_ALPHABET for c in name)


@dataclass(frozen=True)
class Dag:
    """Immutable DAG: ordered node names plus directed edges.

    Edge order is preserved (it drives premise rendering); edge identity is
    still set-like, with duplicates rejected. Validation runs on construction.
    """

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise GraphError("node names must be pairwise distinct")
        for name in self.nodes:
            if not is_valid_name(name):
                raise GraphError(f"invalid node name: {name!r}")
        seen: set[tuple[str, str]] = set()
        for a, b in self.edges:
            if a == b:
                raise GraphError(f"self-edge on {a!r}")
            if a not in node_set or b not in node_set:
                raise GraphError(f"edge ({a!r}, {b!r}) has endpoint outside nodes")
            if (a, b) in seen:
                raise GraphError(f"duplicate edge ({a!r}, {b!r})")
            seen.add((a, b))
        if not _is_acyclic(self.nodes, self.edges):
            raise GraphError("graph contains a directed cycle")

    @property
    def edge_set(self) -> frozenset[tuple[str, str]]:
        return frozenset(self.edges)

    def children(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {n: [] for n in self.nodes}
        for a, b in self.edges:
            out[a].append(b)
        return out

    def parents(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {n: [] for n in self.nodes}
        for a, b in self.edges:
            out[b].append(a)
        return out

    def reversed(self) -> "Dag":
        return Dag(self.nodes, tuple((b, a) for a, b in self.edges))


def _is_acyclic(nodes: tuple[str, ...], edges: tuple[tuple[str, str], ...]) -> bool:
    # Kahn's algorithm; succeeds iff every node can be topologically ordered.
    indeg = {n: 0 for n in nodes}
    children: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in edges:
        indeg[b] += 1
        children[a].append(b)
    ready = deque(n for n in nodes if indeg[n] == 0)
    placed = 0
    while ready:
        n = ready.popleft()
        placed += 1
        for c in children[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    return placed == len(nodes)


def dag_from_edges(edges: Iterable[tuple[str, str]]) -> Dag:
    """Build a Dag whose node order is first appearance in the edge list."""
    nodes: list[str] = []
    seen: set[str] = set()
    edge_list = list(edges)
    for a, b in edge_list:
        for n in (a, b):
            if n not in seen:
                seen.add(n)
                nodes.append(n)
    return Dag(tuple(nodes), tuple(edge_list))


@dataclass(frozen=True)
class ChainConfig:
    length_range: tuple[int, int]
    name_len_range: tuple[int, int] = (1, 3)
    p_flip: float = 0.0

    def __post_init__(self) -> None:
        if self.length_range[0] < 2 or self.length_range[0] > self.length_range[1]:
            raise ValueError(f"bad chain length range {self.length_range}")
        if self.name_len_range[0] < 1 or self.name_len_range[0] > self.name_len_range[1]:
            raise ValueError(f"bad name length range {self.name_len_range}")
        if not 0.0 <= self.p_flip <= 1.0:
            raise ValueError(f"p_flip must be in [0, 1], got {self.p_flip}")


@dataclass(frozen=True)
class DagConfig:
    num_nodes_range: tuple[int, int]
    edge_density_range: tuple[float, float]
    name_len_range: tuple[int, int] = (1, 3)

    def __post_init__(self) -> None:
        if self.num_nodes_range[0] < 3 or self.num_nodes_range[0] > self.num_nodes_range[1]:
            raise ValueError(f"bad node count range {self.num_nodes_range}")
        if self.edge_density_range[0] <= 0 or self.edge_density_range[0] > self.edge_density_range[1]:
            raise ValueError(f"bad edge density range {self.edge_density_range}")
        if self.name_len_range[0] < 1 or self.name_len_range[0] > self.name_len_range[1]:
            raise ValueError(f"bad name length range {self.name_len_range}")


def draw_names(count: int, name_len_range: tuple[int, int], rng: random.Random) -> tuple[str, ...]:
    """Draw `count` pairwise-distinct random names, retrying whole draws.

    Raises NameCollisionError after MAX_NAME_ATTEMPTS failed draws.
    """
    lo, hi = name_len_range
    for _ in range(MAX_NAME_ATTEMPTS):
        names = tuple(
            "".join(rng.choice(NAME_ALPHABET) for _ in range(rng.randint(lo, hi)))
            for _ in range(count)
        )
        if len(set(names)) == count:
            return names
    raise NameCollisionError(f"no distinct name set of size {count} in {MAX_NAME_ATTEMPTS} draws")


def generate_chain(config: ChainConfig, rng: random.Random) -> Dag:
    """Sequential chain v1 -> ... -> vL with each edge independently reversed
    with probability p_flip. Flipping single chain edges cannot create cycles."""
    length = rng.randint(*config.length_range)
    names = draw_names(length, config.name_len_range, rng)
    edges = []
    for i in range(length - 1):
        a, b = names[i], names[i + 1]
        if rng.random() < config.p_flip:
            a, b = b, a
        edges.append((a, b))
    return Dag(names, tuple(edges))


def generate_dag(config: DagConfig, rng: random.Random) -> Dag:
    """Topologically ordered DAG: node i connects to up to
    min(floor(n * density), 5) later-indexed targets; if fewer than n-1 edges
    result, missing consecutive backbone edges are added."""
    n = rng.randint(*config.num_nodes_range)
    density = rng.uniform(*config.edge_density_range)
    names = draw_names(n, config.name_len_range, rng)
    k = min(int(n * density), MAX_TARGETS_PER_NODE)
    edges: list[tuple[str, str]] = []
    for i in range(n):
        later = list(names[i + 1 :])
        take = min(k, len(later))
        if take > 0:
            for target in rng.sample(later, take):
                edges.append((names[i], target))
    if len(edges) < n - 1:
        present = set(edges)
        for i in range(n - 1):
            backbone = (names[i], names[i + 1])
            if backbone not in present:
                edges.append(backbone)
    return Dag(names, tuple(edges))


def _require_nodes(g: Dag, *names: str) -> None:
    node_set = set(g.nodes)
    for name in names:
        if name not in node_set:
            raise InvalidQueryError(f"unknown node {name!r}")


def find_path(g: Dag, start: str, end: str) -> bool:
    """True iff a directed path start -> end exists (start == end counts)."""
    _require_nodes(g, start, end)
    if start == end:
        return True
    children = g.children()
    visited: set[str] = set()
    stack = [start]
    while stack:
        v = stack.pop()
        if v == end:
            return True
        if v in visited:
            continue
        visited.add(v)
        stack.extend(children[v])
    return False


def descendants(g: Dag, node: str) -> set[str]:
    """All nodes reachable from `node` via directed edges, excluding itself."""
    _require_nodes(g, node)
    children = g.children()
    out: set[str] = set()
    queue = deque(children[node])
    while queue:
        v = queue.popleft()
        if v in out:
            continue
        out.add(v)
        queue.extend(children[v])
    return out


def enumerate_undirected_paths(
    g: Dag, x: str, y: str, max_len: int = MAX_PATH_LENGTH
) -> list[tuple[str, ...]]:
    """All simple undirected paths from x to y with at most max_len edges,
    in lexicographic order of the node sequence."""
    _require_nodes(g, x, y)
    if x == y:
        raise InvalidQueryError("path query endpoints must differ")
    neighbors: dict[str, list[str]] = {n: [] for n in g.nodes}
    for a, b in g.edges:
        neighbors[a].append(b)
        neighbors[b].append(a)
    for n in neighbors:
        neighbors[n].sort()

    paths: list[tuple[str, ...]] = []
    path = [x]
    on_path = {x}

    def walk(current: str) -> None:
        if len(path) - 1 >= max_len:
            return
        for nxt in neighbors[current]:
            if nxt == y:
                paths.append(tuple(path) + (y,))
            elif nxt not in on_path:
                path.append(nxt)
                on_path.add(nxt)
                walk(nxt)
                on_path.discard(nxt)
                path.pop()

    walk(x)
    return paths


def is_blocked(
    g: Dag,
    path: tuple[str, ...],
    z: frozenset[str] | set[str],
    _descendant_memo: dict[str, set[str]] | None = None,
) -> bool:
    """Pearl's blocking rules for one undirected path.

    A collider (both path edges into the middle node) blocks unless the
    collider or one of its descendants is conditioned on; chains and forks
    block iff the middle node is conditioned on. Length-2 paths have no
    middle node and are never blocked.
    """
    edge_set = g.edge_set
    for i in range(len(path) - 1):
        a, b = path[i], path[i + 1]
        if (a, b) not in edge_set and (b, a) not in edge_set:
            raise GraphError(f"path step ({a!r}, {b!r}) is not an edge")
    memo = _descendant_memo if _descendant_memo is not None else {}
    for k in range(1, len(path) - 1):
        prev, mid, nxt = path[k - 1], path[k], path[k + 1]
        collider = (prev, mid) in edge_set and (nxt, mid) in edge_set
        if collider:
            if mid in z:
                continue
            if mid not in memo:
                memo[mid] = descendants(g, mid)
            if memo[mid] & set(z):
                continue
            return True
        elif mid in z:
            return True
    return False


def _d_separated_impl(g: Dag, x: str, y: str, z: frozenset[str]) -> bool:
    memo: dict[str, set[str]] = {}
    for path in enumerate_undirected_paths(g, x, y, MAX_PATH_LENGTH):
        if not is_blocked(g, path, z, _descendant_memo=memo):
            return False
    return True


@lru_cache(maxsize=DSEP_CACHE_SIZE)
def _d_separated_cached(
    nodes: tuple[str, ...],
    sorted_edges: tuple[tuple[str, str], ...],
    x: str,
    y: str,
    z_sorted: tuple[str, ...],
) -> bool:
    return _d_separated_impl(Dag(nodes, sorted_edges), x, y, frozenset(z_sorted))


def _check_dsep_query(g: Dag, x: str, y: str, z: frozenset[str] | set[str]) -> None:
    _require_nodes(g, x, y, *z)
    if x == y:
        raise InvalidQueryError("d-separation query endpoints must differ")
    if x in z or y in z:
        raise InvalidQueryError("query nodes cannot be in the conditioning set")
    if len(z) > 3:
        raise InvalidQueryError(f"conditioning set too large: {len(z)} > 3")


def d_separated(g: Dag, x: str, y: str, z: frozenset[str] | set[str] = frozenset()) -> bool:
    """True iff every undirected path (up to MAX_PATH_LENGTH edges) between
    x and y is blocked given z. Answers are served from a bounded LRU cache
    keyed by the canonical graph form plus the query."""
    _check_dsep_query(g, x, y, z)
    return _d_separated_cached(g.nodes, tuple(sorted(g.edges)), x, y, tuple(sorted(z)))


def d_separated_uncached(g: Dag, x: str, y: str, z: frozenset[str] | set[str] = frozenset()) -> bool:
    """Cache-bypassing twin of d_separated, for equivalence checks."""
    _check_dsep_query(g, x, y, z)
    return _d_separated_impl(g, x, y, frozenset(z))


def clear_dsep_cache() -> None:
    _d_separated_cached.cache_clear()
