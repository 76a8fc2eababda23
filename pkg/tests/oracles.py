"""Slow, independent reference computations used only by the tests."""

from __future__ import annotations

import itertools
from collections import deque
from functools import lru_cache

import numpy as np


def python_bfs(adj: dict[int, list[int]] | list[list[int]], source: int, n: int) -> list[int]:
    dist = [-1] * n
    dist[source] = 0
    q = deque([source])
    while q:
        u = q.popleft()
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def triple_clustering(adj: list[set[int]]) -> float:
    """Closed over connected triplets by enumerating every centre and neighbor pair."""
    closed = connected = 0
    for k, nbrs in enumerate(adj):
        for i, j in itertools.combinations(sorted(nbrs), 2):
            connected += 1
            closed += j in adj[i]
    return closed / connected


def subset_reliability(n: int, arc_prob: dict[tuple[int, int], float], source: int) -> float:
    """P(every site reachable) for independent arcs, by recursion over reached sets.

    rel(S) = P(all of S reachable from the source using arcs inside S)
           = 1 - sum_{T strict subset of S containing the source} rel(T) * P(no arc T -> S\\T).
    """
    full = frozenset(range(n))

    def cut_closed(t: frozenset, s: frozenset) -> float:
        p = 1.0
        for i in t:
            for j in s - t:
                p *= 1.0 - arc_prob.get((i, j), 0.0)
        return p

    @lru_cache(maxsize=None)
    def rel(s: frozenset) -> float:
        if s == frozenset([source]):
            return 1.0
        others = sorted(s - {source})
        total = 0.0
        for r in range(len(others)):
            for extra in itertools.combinations(others, r):
                t = frozenset((source, *extra))
                total += rel(t) * cut_closed(t, s)
        return 1.0 - total

    return rel(full)


def arc_probs_for(adj: list[list[int]], source: int, kind: str, param: float) -> dict[tuple[int, int], float]:
    deg = [len(a) for a in adj]
    probs = {}
    for i, nbrs in enumerate(adj):
        for j in nbrs:
            if i == source:
                probs[(i, j)] = 1.0
            elif kind == "PE":
                probs[(i, j)] = param
            else:
                probs[(i, j)] = min(param / deg[j], 1.0)
    return probs


def random_connected_small_graph(rng: np.random.Generator, max_sites: int = 6, max_arcs: int = 22):
    """Edge list of a random connected graph with 3..max_sites sites and 2|E| <= max_arcs."""
    while True:
        n = int(rng.integers(3, max_sites + 1))
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        keep = rng.random(len(pairs)) < rng.uniform(0.3, 0.8)
        edges = [p for p, k in zip(pairs, keep) if k]
        if 2 * len(edges) > max_arcs:
            continue
        adj = [[] for _ in range(n)]
        for i, j in edges:
            adj[i].append(j)
            adj[j].append(i)
        if all(d >= 0 for d in python_bfs(adj, 0, n)):
            return n, edges
