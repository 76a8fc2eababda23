"""Forwarding policies and dissemination graphs.

Every site decides, once, which neighbors it would forward to; the
resulting directed graph is the dissemination graph and a site is infected
iff it is reachable from the source.  Randomness is drawn as one uniform per
directed arc plus one uniform per site, so the decision of site ``i`` only
looks at its own slice of the draws.  Sharing the draws across parameter
values couples the policies monotonically (larger parameter, superset of
arcs), which the experiment harness relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.sparse import csgraph

from .errors import ParameterError
from .topology import Graph, bfs_levels


class PolicyKind(str, Enum):
    FLOODING = "Flooding"
    FF = "FF"
    PE = "PE"
    PISB = "PISB"
    PINE = "PINE"

    @classmethod
    def parse(cls, value: "str | PolicyKind") -> "PolicyKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().removeprefix("gossip")
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise ParameterError(f"unknown policy {value!r}")


@dataclass(frozen=True)
class Policy:
    """A forwarding rule and its single parameter.

    ``param`` is the fanout for FF (fractional values allowed), the edge
    probability for PE, c_v for PISB and c_e for PINE.
    """

    kind: PolicyKind
    param: float = math.inf

    def __post_init__(self) -> None:
        kind = PolicyKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        p = float(self.param)
        object.__setattr__(self, "param", p)
        if kind is PolicyKind.PE and not (0.0 <= p <= 1.0):
            raise ParameterError(f"PE edge probability must lie in [0, 1], got {p}")
        if kind in (PolicyKind.FF, PolicyKind.PISB, PolicyKind.PINE) and not p >= 0:
            raise ParameterError(f"{kind.value} parameter must be non-negative, got {p}")

    @classmethod
    def flooding(cls) -> "Policy":
        return cls(PolicyKind.FLOODING)

    def __str__(self) -> str:
        if self.kind is PolicyKind.FLOODING:
            return "Flooding"
        return f"{self.kind.value}({self.param:g})"


def _fanout_counts(f: float, site_u: np.ndarray) -> np.ndarray:
    """floor(f) plus one more with probability frac(f)."""
    if math.isinf(f):
        return np.full(site_u.shape, np.iinfo(np.int64).max // 2, dtype=np.int64)
    base = math.floor(f)
    return base + (site_u < f - base).astype(np.int64)


def arc_mask(policy: Policy, g: Graph, arc_u: np.ndarray, site_u: np.ndarray) -> np.ndarray:
    """Boolean over CSR slots: does the tail site select this arc.

    ``arc_u`` holds one uniform per CSR slot and ``site_u`` one per site.
    Leading batch axes are allowed (shape ``(..., n_arcs)`` and
    ``(..., n_sites)``), which the small-graph Monte-Carlo estimator uses.
    """
    kind = policy.kind
    c = policy.param
    if kind is PolicyKind.FLOODING:
        return np.ones(arc_u.shape, dtype=bool)
    if kind is PolicyKind.PE:
        return arc_u < c
    if kind is PolicyKind.PINE:
        return arc_u < np.minimum(c / np.maximum(g.degrees[g.indices], 1), 1.0)
    src = g.arc_sources
    if kind is PolicyKind.PISB:
        deg = g.degrees
        p_site = np.where(deg > 0, np.minimum(c / np.maximum(deg, 1), 1.0), 0.0)
        return (site_u < p_site)[..., src]
    # FF: the k arcs of a site with the smallest uniforms, k = fanout draw
    order = np.argsort(src + arc_u, axis=-1, kind="stable")
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.arange(src.size) - g.indptr[np.take(src, order)], axis=-1)
    return rank < _fanout_counts(c, site_u)[..., src]


def forward_set(policy: Policy, site: int, g: Graph, rng: np.random.Generator) -> np.ndarray:
    """Neighbors ``site`` forwards to under ``policy``, as a sorted id array."""
    lo, hi = g.indptr[site], g.indptr[site + 1]
    nbrs = g.indices[lo:hi]
    arc_u = rng.random(hi - lo)
    site_u = rng.random()
    return nbrs[_site_mask(policy, g, site, arc_u, site_u)]


def _site_mask(policy: Policy, g: Graph, site: int, arc_u: np.ndarray, site_u: float) -> np.ndarray:
    nbrs = g.neighbors(site)
    deg = nbrs.size
    kind, c = policy.kind, policy.param
    if kind is PolicyKind.FLOODING:
        return np.ones(deg, dtype=bool)
    if kind is PolicyKind.PE:
        return arc_u < c
    if kind is PolicyKind.PINE:
        return arc_u < np.minimum(c / g.degrees[nbrs], 1.0)
    if kind is PolicyKind.PISB:
        fire = deg > 0 and site_u < min(c / deg, 1.0)
        return np.full(deg, fire, dtype=bool)
    k = int(_fanout_counts(c, np.array([site_u]))[0])
    if k >= deg:
        return np.ones(deg, dtype=bool)
    mask = np.zeros(deg, dtype=bool)
    mask[np.argsort(arc_u, kind="stable")[:k]] = True
    return mask


@dataclass(frozen=True, eq=False)
class DisseminationGraph:
    """Directed arcs chosen in the initial phase, CSR by tail site."""

    n_sites: int
    indptr: np.ndarray
    targets: np.ndarray
    source: int

    @classmethod
    def from_mask(cls, g: Graph, mask: np.ndarray, source: int) -> "DisseminationGraph":
        mask = mask.copy()
        mask[g.indptr[source]:g.indptr[source + 1]] = True
        indptr = np.zeros(g.n_sites + 1, dtype=np.int64)
        np.cumsum(np.bincount(g.arc_sources[mask], minlength=g.n_sites), out=indptr[1:])
        return cls(g.n_sites, indptr, g.indices[mask], source)

    @classmethod
    def from_arcs(cls, n: int, arcs, source: int) -> "DisseminationGraph":
        a = np.asarray(list(arcs), dtype=np.int64).reshape(-1, 2)
        order = np.lexsort((a[:, 1], a[:, 0]))
        a = a[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(a[:, 0], minlength=n), out=indptr[1:])
        return cls(n, indptr, a[:, 1], source)

    @property
    def out_degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def n_arcs(self) -> int:
        return int(self.targets.size)

    def out_arcs(self, i: int) -> np.ndarray:
        return self.targets[self.indptr[i]:self.indptr[i + 1]]

    def arcs(self) -> np.ndarray:
        tails = np.repeat(np.arange(self.n_sites), self.out_degrees)
        return np.column_stack([tails, self.targets])

    def in_degrees(self) -> np.ndarray:
        return np.bincount(self.targets, minlength=self.n_sites)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DisseminationGraph):
            return NotImplemented
        return (self.n_sites == other.n_sites and self.source == other.source
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.targets, other.targets))

    __hash__ = None  # type: ignore[assignment]


def draw_uniforms(g: Graph, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-arc and per-site uniforms for one dissemination, from ``seed``."""
    rng = np.random.default_rng(seed)
    return rng.random(g.indices.size), rng.random(g.n_sites)


def build_dissemination_graph(g: Graph, policy: Policy, source: int, seed: int) -> DisseminationGraph:
    if not 0 <= source < g.n_sites:
        raise ParameterError(f"source {source} out of range")
    arc_u, site_u = draw_uniforms(g, seed)
    return DisseminationGraph.from_mask(g, arc_mask(policy, g, arc_u, site_u), source)


@dataclass(frozen=True, eq=False)
class DisseminationResult:
    infected: np.ndarray
    hop_distance: np.ndarray  # -1 for sites never reached
    messages_sent: int
    atomic: bool
    source_messages: int = 0

    @property
    def n_infected(self) -> int:
        return int(self.infected.sum())


def disseminate(dg: DisseminationGraph) -> DisseminationResult:
    hops = bfs_levels(dg.indptr, dg.targets, dg.source)
    infected = hops >= 0
    sent = int(dg.out_degrees[infected].sum())
    return DisseminationResult(infected, hops, sent, bool(infected.all()),
                               int(dg.out_degrees[dg.source]))


@dataclass(frozen=True)
class FailureReport:
    uninfected_components: list[np.ndarray]
    single_isolated_count: int

    @property
    def component_sizes(self) -> list[int]:
        return [int(c.size) for c in self.uninfected_components]

    @property
    def all_singletons(self) -> bool:
        return all(c.size == 1 for c in self.uninfected_components)


def classify_failure(g: Graph, dg: DisseminationGraph, r: DisseminationResult) -> FailureReport:
    """Group uninfected sites into connected pieces of the underlying graph."""
    missing = np.flatnonzero(~r.infected)
    if missing.size == 0:
        return FailureReport([], 0)
    sub = g.to_sparse()[missing][:, missing]
    n_comp, labels = csgraph.connected_components(sub, directed=False)
    comps = [missing[labels == c] for c in range(n_comp)]
    comps.sort(key=lambda c: int(c[0]))
    indeg = dg.in_degrees()
    singles = sum(1 for c in comps if c.size == 1 and indeg[c[0]] == 0)
    return FailureReport(comps, singles)


def format_arc_list(dg: DisseminationGraph) -> str:
    lines = [f"source {dg.source}"]
    lines.extend(f"{i} {j}" for i, j in dg.arcs().tolist())
    return "\n".join(lines) + "\n"


def parse_arc_list(text: str, n_sites: int) -> DisseminationGraph:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows or rows[0][0] != "source":
        raise ParameterError("arc list must start with a 'source s' header")
    source = int(rows[0][1])
    arcs = [(int(i), int(j)) for i, j in rows[1:]]
    return DisseminationGraph.from_arcs(n_sites, arcs, source)


def write_arc_list(dg: DisseminationGraph, path: str | Path) -> None:
    Path(path).write_text(format_arc_list(dg), encoding="utf-8")


def read_arc_list(path: str | Path, n_sites: int) -> DisseminationGraph:
    return parse_arc_list(Path(path).read_text(encoding="utf-8"), n_sites)
