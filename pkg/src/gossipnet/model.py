"""Isolated-site reliability model.

A forwarding profile gives, per degree k, the probability that a degree-k
site receives an arc from one given neighbor.  Reliability is approximated
by the chance that no site is left without incoming arcs, and message
complexity by the expected number of arcs per site.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .gossip import PolicyKind
from .topology import (
    DegreeDistribution,
    TopologyKind,
    TopologySpec,
    analytic_clustering,
    analytic_degree_distribution,
)

# degrees whose expected site count falls below this are skipped in the product
NEGLIGIBLE_SITES = 1e-9


@dataclass(frozen=True, eq=False)
class ForwardingProfile:
    """p_forw(k) for k = 0..N-1 (entry 0 is unused)."""

    probs: np.ndarray
    label: str

    def __post_init__(self) -> None:
        p = np.clip(np.asarray(self.probs, dtype=float), 0.0, 1.0)
        object.__setattr__(self, "probs", p)

    def __call__(self, k: int) -> float:
        return float(self.probs[k])

    @classmethod
    def constant(cls, value: float, n: int, label: str) -> "ForwardingProfile":
        return cls(np.full(n, float(value)), label)


def expected_fanout(c: float, k: np.ndarray) -> np.ndarray:
    """E[arcs sent] by a degree-k site under FF(c) or PISB(c): min{c, k}."""
    return np.minimum(c, k)


def profile_pe(p_e: float, n: int = 2) -> ForwardingProfile:
    if not 0.0 <= p_e <= 1.0:
        raise ParameterError(f"p_e must lie in [0, 1], got {p_e}")
    return ForwardingProfile.constant(p_e, n, "PE")


def profile_pine(c_e: float, n: int) -> ForwardingProfile:
    k = np.arange(n, dtype=float)
    with np.errstate(divide="ignore"):
        p = np.where(k > 0, np.minimum(c_e / np.maximum(k, 1), 1.0), 0.0)
    return ForwardingProfile(p, "PINE")


def duo_outgoing(c: float, dist: DegreeDistribution) -> float:
    """Mean arcs sent per site by FF/PISB: sum_k P(k) min{c, k}."""
    return float(np.dot(dist.probs, expected_fanout(c, dist.degrees)))


def profile_duo_bernoulli(c: float, dist: DegreeDistribution) -> ForwardingProfile:
    vbar = dist.mean_degree
    if vbar <= 0:
        raise ParameterError("mean degree must be positive")
    return ForwardingProfile.constant(duo_outgoing(c, dist) / vbar, dist.n_sites, "DuoBernoulli")


def neighbor_mean_degree_rgg(v_i: float, clustering: float, vbar_s: float) -> float:
    """Mean degree of a neighbor of a degree-v_i site in a geometric graph."""
    return 1.0 + (v_i - 1.0) * clustering + (vbar_s - 1.0) * (1.0 - clustering)


def profile_duo_geometric(
    c: float, dist: DegreeDistribution, clustering: float, vbar_s: float
) -> ForwardingProfile:
    k = dist.degrees.astype(float)
    denom = neighbor_mean_degree_rgg(k, clustering, vbar_s)
    p = np.minimum(duo_outgoing(c, dist) / denom, 1.0)
    return ForwardingProfile(p, "DuoGeometric")


def ba_age_factor(n: int, m: int, m0: int, first_site: int | None = None) -> float:
    """Average degree-growth factor of the neighbors of a degree-m site.

    The sum over arrival index s runs from ``first_site`` (default m0+1,
    the sites attached after the initial clique) to N.
    """
    if not (n > m0 >= m >= 1):
        raise ParameterError(f"need n > m0 >= m >= 1, got n={n}, m0={m0}, m={m}")
    lo = m0 + 1 if first_site is None else first_site
    s = np.arange(lo, n + 1, dtype=float)
    i = np.arange(1, n + 1, dtype=float)
    log_terms = m * np.log1p(-1.0 / (2.0 * i))
    # tail[s] = sum_{i=s+1}^{N} log(1 - 1/(2i))^m, tail[N] = 0
    tail = np.concatenate([np.cumsum(log_terms[::-1])[::-1][1:], [0.0]])
    logs = 0.5 * np.log(n / s) + tail[s.astype(np.int64) - 1]
    return float(np.exp(logs).sum() / (2.0 * n / (m + 2.0)))


def ba_neighbor_degree(n: int, m: int) -> float:
    """Mean degree among the neighbors of an arbitrary site (NeighD)."""
    k = np.arange(m, n, dtype=float)
    return float(np.sum(k * (m + 1) / ((k + 1) * (k + 2))))


def ba_neighbor_mean_degree_low(n: int, m: int, m0: int) -> float:
    """Mean degree of the neighbors of a degree-m site: (NeighD + 1) * Fac."""
    return (ba_neighbor_degree(n, m) + 1.0) * ba_age_factor(n, m, m0)


def profile_duo_scalefree(c: float, n: int, m: int, m0: int) -> float:
    """Probability that one neighbor of a degree-m site forwards to it under FF/PISB(c).

    A neighbor whose degree was k on arrival of the site ends up with degree
    k*Fac and forwards with probability min{c/(k*Fac), 1}; the arrival
    degree follows (m+1)/(k(k+1)) on k >= m+1.
    """
    if c < 0:
        raise ParameterError("c must be non-negative")
    fac = ba_age_factor(n, m, m0)
    k = np.arange(m + 1, n, dtype=float)
    init = (m + 1) / (k * (k + 1))
    return float(np.sum(init * np.minimum(c / (k * fac), 1.0)))


def predict_reliability(dist: DegreeDistribution, profile: ForwardingProfile, n: int | None = None) -> float:
    """Probability that no site of degree >= 1 is left without incoming arcs."""
    n = dist.n_sites if n is None else n
    probs = dist.probs
    if probs[0] * n >= 0.5:
        warnings.warn("degree distribution expects isolated sites; reliability is 0", stacklevel=2)
        return 0.0
    k = np.arange(1, dist.n_sites)
    counts = probs[1:] * n
    keep = counts >= NEGLIGIBLE_SITES
    k, counts = k[keep], counts[keep]
    pf = profile.probs[k] if profile.probs.size > 1 else np.full(k.size, profile.probs[0])
    miss = np.power(1.0 - pf, k)  # all k neighbors decline
    if np.any(miss >= 1.0):
        return 0.0
    log_r = float(np.sum(counts * np.log1p(-miss)))
    return float(min(max(math.exp(log_r), 0.0), 1.0))


def predict_reliability_scalefree_duo(p_forw_m: float, m: int, p_m: float, n: int) -> float:
    """Reliability restricted to the degree-m sites."""
    miss = (1.0 - p_forw_m) ** m
    if miss >= 1.0:
        return 0.0 if p_m > 0 else 1.0
    return float(min(math.exp(p_m * n * math.log1p(-miss)), 1.0))


def predict_message_complexity(dist: DegreeDistribution, profile: ForwardingProfile) -> float:
    k = dist.degrees
    pf = profile.probs if profile.probs.size == k.size else np.full(k.size, profile.probs[0])
    return float(np.sum(dist.probs * k * pf))


@dataclass(frozen=True)
class ModelCurvePoint:
    param: float
    predicted_M: float
    predicted_R: float


@dataclass(frozen=True, eq=False)
class TopologyModel:
    """Degree law plus the family constants the profiles need."""

    spec: TopologySpec
    dist: DegreeDistribution
    clustering: float

    @classmethod
    def analytic(cls, spec: TopologySpec) -> "TopologyModel":
        return cls(spec, analytic_degree_distribution(spec), analytic_clustering(spec))

    @classmethod
    def empirical(cls, spec: TopologySpec, dist: DegreeDistribution) -> "TopologyModel":
        return cls(spec, dist, analytic_clustering(spec))

    @property
    def n(self) -> int:
        return self.spec.n_sites


def message_profile(model: TopologyModel, kind: PolicyKind, param: float) -> ForwardingProfile:
    """Profile whose degree-weighted sum gives the expected arcs per site."""
    dist = model.dist
    if kind is PolicyKind.FLOODING:
        return ForwardingProfile.constant(1.0, dist.n_sites, "Flooding")
    if kind is PolicyKind.PE:
        return profile_pe(param, dist.n_sites)
    if kind is PolicyKind.PINE:
        return profile_pine(param, dist.n_sites)
    # FF / PISB: senders emit min{c, k} arcs on average whatever the topology
    return profile_duo_bernoulli(param, dist)


def predict_point(model: TopologyModel, kind: PolicyKind, param: float) -> ModelCurvePoint:
    kind = PolicyKind.parse(kind)
    dist = model.dist
    m_prof = message_profile(model, kind, param)
    predicted_m = predict_message_complexity(dist, m_prof)
    if kind in (PolicyKind.FF, PolicyKind.PISB):
        topo = model.spec.kind
        if topo is TopologyKind.GEOMETRIC:
            vbar_s = model.spec.vbar_no_border
            r = predict_reliability(dist, profile_duo_geometric(param, dist, model.clustering, vbar_s), model.n)
        elif topo is TopologyKind.SCALEFREE:
            m, m0 = model.spec.m_attach, model.spec.m0_clique
            p_m = profile_duo_scalefree(param, model.n, m, m0)
            r = predict_reliability_scalefree_duo(p_m, m, dist[m], model.n)
        else:
            r = predict_reliability(dist, m_prof, model.n)
    else:
        r = predict_reliability(dist, m_prof, model.n)
    return ModelCurvePoint(float(param), predicted_m, r)


def model_curve(
    topology: TopologySpec | TopologyModel, policy_kind: PolicyKind | str, param_grid: Sequence[float]
) -> list[ModelCurvePoint]:
    model = topology if isinstance(topology, TopologyModel) else TopologyModel.analytic(topology)
    kind = PolicyKind.parse(policy_kind)
    return [predict_point(model, kind, float(p)) for p in param_grid]
