"""Random topologies: Bernoulli, random geometric and Barabasi-Albert graphs.

Graphs are stored in CSR form (``indptr``/``indices``) with sorted neighbor
lists, which keeps the dissemination code vectorised.  Besides the
generators this module carries the structural statistics used by the
reliability model: degree distributions (empirical and analytic) and
clustering coefficients.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, sparse, stats
from scipy.spatial import cKDTree

from .errors import NumericError, ParameterError, UndefinedValueError

# epsilon of the connectivity-regime checks (the experiments use 1)
REGIME_EPSILON = 1.0
GEOMETRIC_CLUSTERING = 0.5865
MAX_RESAMPLES = 100
# tolerated probability mass beyond N-1 for Poisson-shaped distributions
TRUNCATION_TOLERANCE = 1e-6
QUAD_EPSABS = 1e-8


class TopologyKind(str, Enum):
    BERNOULLI = "bernoulli"
    GEOMETRIC = "geometric"
    SCALEFREE = "scalefree"

    @classmethod
    def parse(cls, value: "str | TopologyKind") -> "TopologyKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ParameterError(f"unknown topology kind {value!r}") from None


@dataclass(frozen=True)
class TopologySpec:
    """Parameters of one random topology family."""

    kind: TopologyKind
    n_sites: int
    p_edge: float | None = None
    region_length: float | None = None
    region_width: float | None = None
    radius: float | None = None
    m_attach: int | None = None
    m0_clique: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", TopologyKind.parse(self.kind))

    @classmethod
    def bernoulli(cls, n: int, p: float) -> "TopologySpec":
        return cls(TopologyKind.BERNOULLI, n, p_edge=p)

    @classmethod
    def geometric(cls, n: int, a: float, b: float, rho: float) -> "TopologySpec":
        return cls(TopologyKind.GEOMETRIC, n, region_length=a, region_width=b, radius=rho)

    @classmethod
    def scalefree(cls, n: int, m: int, m0: int) -> "TopologySpec":
        return cls(TopologyKind.SCALEFREE, n, m_attach=m, m0_clique=m0)

    def validate(self, warn: bool = True) -> None:
        """Raise ParameterError on invalid fields; warn outside the connectivity regime."""
        n = self.n_sites
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ParameterError(f"n_sites must be a positive integer, got {n!r}")
        if self.kind is TopologyKind.BERNOULLI:
            p = self.p_edge
            if p is None or not (0.0 < p <= 1.0):
                raise ParameterError(f"p_edge must lie in (0, 1], got {p!r}")
            if warn and n > 1 and p <= (1 + REGIME_EPSILON) * math.log(n) / n:
                warnings.warn(
                    f"p_edge={p} is below the connectivity regime (1+eps)ln(N)/N "
                    f"= {(1 + REGIME_EPSILON) * math.log(n) / n:.4g}",
                    stacklevel=2,
                )
        elif self.kind is TopologyKind.GEOMETRIC:
            a, b, rho = self.region_length, self.region_width, self.radius
            for name, val in (("region_length", a), ("region_width", b), ("radius", rho)):
                if val is None or not val > 0:
                    raise ParameterError(f"{name} must be positive, got {val!r}")
            if warn and n > 1:
                rho_min = math.sqrt((1 + REGIME_EPSILON) * math.log(n) * a * b / (n * math.pi))
                if rho <= rho_min:
                    warnings.warn(
                        f"radius={rho} is below the connectivity threshold {rho_min:.4g}",
                        stacklevel=2,
                    )
        else:
            m, m0 = self.m_attach, self.m0_clique
            if m is None or m0 is None or m < 1 or m0 < 1:
                raise ParameterError("m_attach and m0_clique must be positive integers")
            if m > m0:
                raise ParameterError(f"m_attach={m} exceeds m0_clique={m0}")
            if m0 > n:
                raise ParameterError(f"m0_clique={m0} exceeds n_sites={n}")

    @property
    def vbar_no_border(self) -> float:
        """Geometric mean degree ignoring the border effect, N*pi*rho^2/(a*b)."""
        if self.kind is not TopologyKind.GEOMETRIC:
            raise ParameterError("vbar_no_border is only defined for geometric topologies")
        return self.n_sites * math.pi * self.radius**2 / (self.region_length * self.region_width)

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "n_sites": self.n_sites}
        for key in ("p_edge", "region_length", "region_width", "radius", "m_attach", "m0_clique"):
            val = getattr(self, key)
            if val is not None:
                d[key] = val
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TopologySpec":
        aliases = {"n": "n_sites", "p": "p_edge", "a": "region_length", "b": "region_width",
                   "rho": "radius", "m": "m_attach", "m0": "m0_clique", "topology": "kind"}
        kw = {aliases.get(k, k): v for k, v in d.items()}
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ParameterError(f"bad topology block: {exc}") from None


TABLE_I = {
    TopologyKind.BERNOULLI: TopologySpec.bernoulli(1000, 0.014),
    TopologyKind.GEOMETRIC: TopologySpec.geometric(1000, 7500.0, 3000.0, 330.0),
    TopologyKind.SCALEFREE: TopologySpec.scalefree(1000, 7, 9),
}


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph in CSR form, optionally with planar positions."""

    n_sites: int
    indptr: np.ndarray
    indices: np.ndarray
    positions: np.ndarray | None = None
    resamples: int = field(default=0, compare=False)

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[tuple[int, int]] | np.ndarray,
        positions: np.ndarray | None = None,
        resamples: int = 0,
    ) -> "Graph":
        e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        e = e.reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise ParameterError("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise ParameterError("self-loops are not allowed")
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        if src.size > 1 and np.any((src[1:] == src[:-1]) & (dst[1:] == dst[:-1])):
            raise ParameterError("duplicate edges are not allowed")
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return cls(n, indptr, dst, positions, resamples)

    @classmethod
    def from_adjacency(cls, adjacency: Sequence[Iterable[int]]) -> "Graph":
        edges = {(min(i, j), max(i, j)) for i, nbrs in enumerate(adjacency) for j in nbrs}
        return cls.from_edges(len(adjacency), sorted(edges))

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @cached_property
    def arc_sources(self) -> np.ndarray:
        """Site owning each CSR slot, i.e. the tail of each directed arc."""
        return np.repeat(np.arange(self.n_sites, dtype=np.int64), self.degrees)

    @property
    def n_edges(self) -> int:
        return int(self.indices.size // 2)

    @property
    def mean_degree(self) -> float:
        return 2.0 * self.n_edges / self.n_sites

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    @property
    def adjacency(self) -> list[np.ndarray]:
        return [self.neighbors(i) for i in range(self.n_sites)]

    def edges(self) -> np.ndarray:
        """(E, 2) array of edges with u < v, sorted."""
        mask = self.arc_sources < self.indices
        return np.column_stack([self.arc_sources[mask], self.indices[mask]])

    def to_sparse(self) -> sparse.csr_matrix:
        data = np.ones(self.indices.size, dtype=np.int64)
        return sparse.csr_matrix((data, self.indices, self.indptr), shape=(self.n_sites,) * 2)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        if self.n_sites != other.n_sites:
            return False
        if not (np.array_equal(self.indptr, other.indptr) and np.array_equal(self.indices, other.indices)):
            return False
        if (self.positions is None) != (other.positions is None):
            return False
        return self.positions is None or np.array_equal(self.positions, other.positions)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class DegreeDistribution:
    """Probability vector over degrees 0..N-1."""

    probs: np.ndarray
    n_sites: int

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size != self.n_sites:
            raise ParameterError(f"probs must have length N={self.n_sites}")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ParameterError("degree distribution must be non-negative and sum to 1")
        object.__setattr__(self, "probs", p)

    @property
    def degrees(self) -> np.ndarray:
        return np.arange(self.n_sites)

    @property
    def mean_degree(self) -> float:
        return float(np.dot(self.degrees, self.probs))

    @property
    def min_degree(self) -> int:
        return int(np.flatnonzero(self.probs > 0)[0])

    @property
    def max_degree(self) -> int:
        return int(np.flatnonzero(self.probs > 0)[-1])

    def __getitem__(self, k: int) -> float:
        return float(self.probs[k]) if 0 <= k < self.n_sites else 0.0

    def total_variation(self, other: "DegreeDistribution") -> float:
        n = max(self.n_sites, other.n_sites)
        a = np.zeros(n)
        b = np.zeros(n)
        a[: self.n_sites] = self.probs
        b[: other.n_sites] = other.probs
        return 0.5 * float(np.abs(a - b).sum())

    @classmethod
    def average(cls, dists: Sequence["DegreeDistribution"]) -> "DegreeDistribution":
        n = dists[0].n_sites
        return cls(np.mean([d.probs for d in dists], axis=0), n)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def _bernoulli_edges(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    return np.column_stack([iu[keep], ju[keep]])


def _geometric_edges(spec: TopologySpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    pos = rng.random((spec.n_sites, 2)) * np.array([spec.region_length, spec.region_width])
    pairs = cKDTree(pos).query_pairs(spec.radius, output_type="ndarray")
    return pairs.reshape(-1, 2), pos


def _scalefree_edges(n: int, m: int, m0: int, rng: np.random.Generator) -> np.ndarray:
    edges = [(i, j) for i in range(m0) for j in range(i + 1, m0)]
    # each site appears once per incident edge, so a uniform pick is degree-proportional
    pool = [i for i in range(m0) for _ in range(m0 - 1)]
    if m0 == 1:
        pool = [0]  # a lone seed site must still be selectable
    for new in range(m0, n):
        targets: list[int] = []
        chosen: set[int] = set()
        while len(targets) < m:
            t = pool[int(rng.integers(len(pool)))]
            if t not in chosen:
                chosen.add(t)
                targets.append(t)
        for t in targets:
            edges.append((t, new))
            pool.append(t)
        pool.extend([new] * m)
    return np.asarray(edges, dtype=np.int64).reshape(-1, 2)


def _generate_once(spec: TopologySpec, rng: np.random.Generator) -> Graph:
    n = spec.n_sites
    if spec.kind is TopologyKind.BERNOULLI:
        return Graph.from_edges(n, _bernoulli_edges(n, spec.p_edge, rng))
    if spec.kind is TopologyKind.GEOMETRIC:
        edges, pos = _geometric_edges(spec, rng)
        return Graph.from_edges(n, edges, positions=pos)
    return Graph.from_edges(n, _scalefree_edges(n, spec.m_attach, spec.m0_clique, rng))


def generate(spec: TopologySpec, seed: int, require_connected: bool = True) -> Graph:
    """Sample a graph of the given family; deterministic in (spec, seed).

    Disconnected samples are rejected and redrawn from the next stream of
    ``seed``; the number of rejections is kept in ``Graph.resamples``.
    """
    spec.validate()
    ss = np.random.SeedSequence(seed)
    for attempt, child in enumerate(ss.spawn(MAX_RESAMPLES)):
        g = _generate_once(spec, np.random.default_rng(child))
        if not require_connected or is_connected(g):
            if attempt:
                object.__setattr__(g, "resamples", attempt)
            return g
    raise ParameterError(f"no connected sample after {MAX_RESAMPLES} attempts for {spec}")


# ---------------------------------------------------------------------------
# Structural statistics
# ---------------------------------------------------------------------------

def bfs_levels(indptr: np.ndarray, indices: np.ndarray, source: int) -> np.ndarray:
    """Hop distance from ``source`` over CSR arcs; -1 where unreachable."""
    n = indptr.size - 1
    dist = np.full(n, -1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    level = 0
    while frontier.size:
        starts = indptr[frontier]
        counts = indptr[frontier + 1] - starts
        total = int(counts.sum())
        if total == 0:
            break
        offsets = np.cumsum(counts) - counts
        nbrs = indices[np.arange(total) + np.repeat(starts - offsets, counts)]
        nbrs = np.unique(nbrs[dist[nbrs] < 0])
        level += 1
        dist[nbrs] = level
        frontier = nbrs
    return dist


def is_connected(g: Graph) -> bool:
    if g.n_sites <= 1:
        return True
    return bool(np.all(bfs_levels(g.indptr, g.indices, 0) >= 0))


def empirical_degree_distribution(g: Graph) -> DegreeDistribution:
    counts = np.bincount(g.degrees, minlength=g.n_sites)[: g.n_sites]
    return DegreeDistribution(counts / g.n_sites, g.n_sites)


def empirical_clustering(g: Graph) -> float:
    """Fraction of connected triplets that are closed (global transitivity)."""
    deg = g.degrees.astype(float)
    triplets = float(np.sum(deg * (deg - 1) / 2))
    if triplets == 0:
        raise UndefinedValueError("graph has no path of length 2")
    a = g.to_sparse()
    closed = float((a @ a).multiply(a).sum())  # 6 * triangles = 2 * closed triplets
    return (closed / 2.0) / triplets


def boundary_fraction(x: np.ndarray | float) -> np.ndarray | float:
    """Share of a radius-rho disc inside a half-plane whose edge is x*rho from the centre."""
    x = np.asarray(x, dtype=float)
    out = (x * np.sqrt(1 - x**2) - np.arccos(x)) / np.pi + 1.0
    return out if out.ndim else float(out)


def _poisson(n: int, mean: float) -> np.ndarray:
    return stats.poisson.pmf(np.arange(n), mean)


def _border_mixture(n: int, vbar_s: float) -> np.ndarray:
    """P_s(k)*psi(k) for all k, integrating the Poisson law over the strip depth."""
    ks = np.arange(n)

    def integrand(x: float) -> np.ndarray:
        return stats.poisson.pmf(ks, vbar_s * boundary_fraction(x))

    value, err = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=QUAD_EPSABS, epsrel=0.0, norm="max")
    if not np.isfinite(err) or err > 10 * QUAD_EPSABS:
        raise NumericError(f"border quadrature did not converge (error estimate {err:.3g})")
    return value


def psi(k: int | np.ndarray, vbar_s: float) -> np.ndarray | float:
    """Border correction factor: integral of exp(-V(F-1)) F^k over x in [0, 1]."""
    k = np.atleast_1d(np.asarray(k, dtype=float))

    def integrand(x: float) -> np.ndarray:
        f = boundary_fraction(x)
        return np.exp(-vbar_s * (f - 1) + k * np.log(f))

    value, err = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=QUAD_EPSABS, epsrel=1e-10)
    return value if value.size > 1 else float(value[0])


def _finish(probs: np.ndarray, n: int, check_mass: bool) -> DegreeDistribution:
    mass = float(probs.sum())
    if check_mass and 1.0 - mass > TRUNCATION_TOLERANCE:
        raise NumericError(f"degree distribution truncated at N-1 loses mass {1 - mass:.3g}")
    return DegreeDistribution(probs / mass, n)


def analytic_degree_distribution(spec: TopologySpec, border: bool = True) -> DegreeDistribution:
    """Closed-form degree law of the family, truncated at N-1 and renormalised.

    For geometric graphs ``border=False`` returns the plain Poisson law with
    mean N*pi*rho^2/(a*b); the default adds the strip of width rho along the
    region boundary, where sites see only part of their disc.
    """
    spec.validate(warn=False)
    n = spec.n_sites
    if spec.kind is TopologyKind.BERNOULLI:
        return _finish(_poisson(n, spec.p_edge * n), n, True)
    if spec.kind is TopologyKind.GEOMETRIC:
        vbar_s = spec.vbar_no_border
        plain = _poisson(n, vbar_s)
        if not border:
            return _finish(plain, n, True)
        a, b, rho = spec.region_length, spec.region_width, spec.radius
        if 2 * rho >= min(a, b):
            raise ParameterError("border correction needs 2*radius below both region sides")
        interior = (a - 2 * rho) * (b - 2 * rho) / (a * b)
        strip = 2 * rho * (a + b - 2 * rho) / (a * b)
        return _finish(interior * plain + strip * _border_mixture(n, vbar_s), n, True)
    m = spec.m_attach
    k = np.arange(n, dtype=float)
    probs = np.zeros(n)
    tail = k >= m
    probs[tail] = 2.0 * m * (m + 1) / (k[tail] * (k[tail] + 1) * (k[tail] + 2))
    # the power-law tail beyond N-1 is intrinsic, not a numerical loss
    return _finish(probs, n, False)


def scalefree_clustering(n: int, m: int, log: str = "natural") -> float:
    """(m-1)/8 * (log N)^2 / N with natural or base-10 logarithm."""
    lg = math.log(n) if log == "natural" else math.log10(n)
    return (m - 1) / 8.0 * lg**2 / n


def analytic_clustering(spec: TopologySpec) -> float:
    spec.validate(warn=False)
    if spec.kind is TopologyKind.BERNOULLI:
        return float(spec.p_edge)
    if spec.kind is TopologyKind.GEOMETRIC:
        return GEOMETRIC_CLUSTERING
    return scalefree_clustering(spec.n_sites, spec.m_attach)


# ---------------------------------------------------------------------------
# Edge-list text format
# ---------------------------------------------------------------------------

def format_edge_list(g: Graph) -> str:
    edges = g.edges()
    lines = [f"{g.n_sites} {len(edges)}"]
    lines.extend(f"{u} {v}" for u, v in edges)
    if g.positions is not None:
        lines.extend(f"pos {i} {x!r} {y!r}" for i, (x, y) in enumerate(g.positions.tolist()))
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str) -> Graph:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines or len(lines[0]) != 2:
        raise ParameterError("edge list must start with an 'N E' header")
    n, e = int(lines[0][0]), int(lines[0][1])
    body = lines[1:]
    edge_rows = [ln for ln in body if ln[0] != "pos"]
    pos_rows = [ln for ln in body if ln[0] == "pos"]
    if len(edge_rows) != e:
        raise ParameterError(f"header announces {e} edges, found {len(edge_rows)}")
    edges = np.array([[int(u), int(v)] for u, v in edge_rows], dtype=np.int64).reshape(-1, 2)
    positions = None
    if pos_rows:
        positions = np.zeros((n, 2))
        for _, i, x, y in pos_rows:
            positions[int(i)] = float(x), float(y)
    return Graph.from_edges(n, edges, positions=positions)


def write_edge_list(g: Graph, path: str | Path) -> None:
    Path(path).write_text(format_edge_list(g), encoding="utf-8")


def read_edge_list(path: str | Path) -> Graph:
    return parse_edge_list(Path(path).read_text(encoding="utf-8"))
