"""Regular bipartite contact graphs and the uniform state shuffle.

The graph is built once per run and never mutated: rewiring is realized by
permuting node states under a uniform random permutation, which is
equivalent in law to conjugating the adjacency matrix and keeps the
matching decomposition static.  Construction is a circulant pairing of the
two halves plus a seeded relabeling, which is deterministic, trivially
d-regular bipartite, and already decomposed into d perfect matchings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolationError
from .rng import make_stream


@dataclass(frozen=True)
class RegularBipartiteGraph:
    """N-node d-regular bipartite graph stored as d perfect matchings.

    matchings[j] is an (N/2, 2) int array of node pairs; every node appears
    in exactly one pair per matching and the d matchings are edge-disjoint.
    """

    N: int
    d: int
    matchings: tuple[np.ndarray, ...]

    def __post_init__(self):
        for arr in self.matchings:
            arr.flags.writeable = False

    def edge_count(self) -> int:
        return self.N * self.d // 2


def generate_regular_bipartite(N: int, d: int, seed: int) -> RegularBipartiteGraph:
    """Deterministically build a d-regular bipartite graph on N nodes.

    Nodes 0..N/2-1 form part A and the rest part B before a seeded uniform
    relabeling of all node ids; matching j pairs A[i] with B[(i+j) mod N/2].
    """
    if N <= 0 or N % 2:
        raise ValueError(f"N must be even and positive, got {N}")
    if not 1 <= d <= N // 2:
        raise ValueError(f"d must satisfy 1 <= d <= N/2 = {N // 2}, got {d}")
    half = N // 2
    relabel = np.arange(N, dtype=np.int64)
    shuffle_states(relabel, make_stream(seed))
    matchings = []
    for j in range(d):
        pairs = np.empty((half, 2), dtype=np.int64)
        pairs[:, 0] = relabel[:half]
        pairs[:, 1] = relabel[half + (np.arange(half) + j) % half]
        matchings.append(pairs)
    return RegularBipartiteGraph(N=N, d=d, matchings=tuple(matchings))


def undirected_edges(graph: RegularBipartiteGraph) -> np.ndarray:
    """All edges as (E, 2) rows (min, max), sorted lexicographically."""
    pairs = np.vstack(graph.matchings)
    pairs = np.sort(pairs, axis=1)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return pairs[order]


def directed_edges(graph: RegularBipartiteGraph) -> tuple[np.ndarray, np.ndarray]:
    """Canonical directed-edge enumeration used for event selection.

    Undirected edges are sorted as (min, max) rows; edge e contributes the
    directed pair (min -> max) at index 2e and (max -> min) at 2e+1.  This
    fixed ordering is part of the reproducibility contract: event selection
    works through it identically in every simulator implementation.
    """
    edges = undirected_edges(graph)
    tails = np.empty(2 * len(edges), dtype=np.int64)
    heads = np.empty_like(tails)
    tails[0::2] = edges[:, 0]
    heads[0::2] = edges[:, 1]
    tails[1::2] = edges[:, 1]
    heads[1::2] = edges[:, 0]
    return tails, heads


def decompose_matchings(graph: RegularBipartiteGraph) -> list[np.ndarray]:
    """Return the stored perfect-matching decomposition, after verifying it.

    Each matching must cover every node exactly once, matchings must be
    pairwise edge-disjoint, and their union must be the edge set with every
    node of degree exactly d.
    """
    N, d = graph.N, graph.d
    if len(graph.matchings) != d:
        raise InvariantViolationError(
            f"graph stores {len(graph.matchings)} matchings, expected d={d}")
    seen_edges: set[tuple[int, int]] = set()
    degree = np.zeros(N, dtype=np.int64)
    for j, pairs in enumerate(graph.matchings):
        if pairs.shape != (N // 2, 2):
            raise InvariantViolationError(
                f"matching {j} has shape {pairs.shape}, expected ({N // 2}, 2)")
        touched = np.zeros(N, dtype=bool)
        for u, v in pairs:
            if u == v or not (0 <= u < N and 0 <= v < N):
                raise InvariantViolationError(
                    f"matching {j} contains invalid pair ({u}, {v})")
            if touched[u] or touched[v]:
                raise InvariantViolationError(
                    f"matching {j} touches a node twice (pair ({u}, {v}))")
            touched[u] = touched[v] = True
            key = (min(u, v), max(u, v))
            if key in seen_edges:
                raise InvariantViolationError(
                    f"edge {key} appears in more than one matching")
            seen_edges.add(key)
        if not touched.all():
            raise InvariantViolationError(f"matching {j} is not perfect")
        degree[pairs[:, 0]] += 1
        degree[pairs[:, 1]] += 1
    if len(seen_edges) != N * d // 2 or not (degree == d).all():
        raise InvariantViolationError("matching union is not d-regular")
    return [pairs.copy() for pairs in graph.matchings]


def shuffle_states(states: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """Permute the state vector in place by a uniform random permutation.

    Fisher-Yates driven by exactly N-1 uniform draws: step t swaps position
    i = N-1-t with position floor(u_t * (i+1)).  The multiset of states
    (hence every count) is unchanged.
    """
    n = len(states)
    if n < 2:
        return states
    u = gen.random(n - 1)
    sizes = np.arange(n, 1, -1)
    js = (u * sizes).astype(np.int64)
    np.minimum(js, sizes - 1, out=js)  # guard float rounding at u ~ 1.0
    s = states.tolist()
    i = n - 1
    for j in js.tolist():
        s[i], s[j] = s[j], s[i]
        i -= 1
    states[:] = s
    return states


def dump_edge_list(graph: RegularBipartiteGraph, path) -> None:
    """Debug dump: one '(u, v)' edge per line, 1-based, sorted."""
    edges = undirected_edges(graph)
    with open(path, "w", encoding="ascii") as fh:
        for u, v in edges:
            fh.write(f"{u + 1} {v + 1}\n")
