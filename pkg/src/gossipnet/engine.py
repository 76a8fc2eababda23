"""Repeated disseminations, metric aggregation and small-instance oracles."""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .calibrate import CalibrationRequest, solve_parameter
from .errors import GossipNetError, ParameterError, SizeError
from .gossip import (
    DisseminationResult,
    Policy,
    PolicyKind,
    arc_mask,
    build_dissemination_graph,
    classify_failure,
    disseminate,
)
from .model import TopologyModel
from .topology import Graph, TopologySpec, empirical_degree_distribution, generate

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "topology", "algorithm", "param", "target_M", "empirical_M", "R", "R_stderr",
    "L_mean", "L_p95", "n_runs", "seed", "source",
)
MAX_EXHAUSTIVE_ARCS = 22

_TAG_GRAPH, _TAG_SOURCES, _TAG_RUN = 1, 2, 3


def derive_seed(master: int, *keys: int) -> int:
    """64-bit child seed of ``master`` for the given integer path."""
    ss = np.random.SeedSequence([int(master) & (2**64 - 1), *map(int, keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def message_complexity(r: DisseminationResult, n: int, count_source_messages: bool = True) -> float:
    if n < 2:
        raise ParameterError("message complexity needs at least two sites")
    sent = r.messages_sent if count_source_messages else r.messages_sent - r.source_messages
    return sent / (n - 1)


def latency(r: DisseminationResult) -> int:
    """Largest hop count among infected sites."""
    return int(r.hop_distance[r.infected].max())


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    topology: TopologySpec
    policy_kind: PolicyKind
    sweep: tuple[float, ...]
    sweep_kind: str = "target_M"  # or "param"
    n_graphs: int = 10
    n_sources_per_graph: int = 50
    master_seed: int = 1
    count_source_messages: bool = True
    latency_atomic_only: bool = True
    calibration: str = "analytic"  # or "empirical"
    threads: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "policy_kind", PolicyKind.parse(self.policy_kind))
        object.__setattr__(self, "sweep", tuple(float(x) for x in self.sweep))
        if self.n_graphs < 1 or self.n_sources_per_graph < 1:
            raise ParameterError("n_graphs and n_sources_per_graph must be at least 1")
        if not self.sweep and self.policy_kind is not PolicyKind.FLOODING:
            raise ParameterError("sweep must not be empty")
        if self.sweep_kind not in ("target_M", "param"):
            raise ParameterError(f"sweep_kind must be 'target_M' or 'param', got {self.sweep_kind!r}")
        if self.calibration not in ("analytic", "empirical"):
            raise ParameterError(f"calibration must be 'analytic' or 'empirical', got {self.calibration!r}")

    @property
    def points(self) -> tuple[float, ...]:
        return self.sweep if self.sweep else (math.nan,)


@dataclass
class SweepPoint:
    param_value: float
    target_M: float
    empirical_M: float = math.nan
    M_stderr: float = math.nan
    reliability: float = math.nan
    R_stderr: float = math.nan
    mean_latency: float = math.nan
    latency_p95: float = math.nan
    L_stderr: float = math.nan
    n_runs: int = 0
    n_latency_runs: int = 0
    failed_runs: int = 0
    singleton_failures: int = 0  # failed runs whose uninfected pieces are all single sites
    isolated_sites: int = 0
    failure_histogram: dict[int, int] = field(default_factory=dict)
    error: str | None = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    points: list[SweepPoint]
    resamples: int = 0

    def rows(self) -> list[dict]:
        cfg = self.config
        return [
            {
                "topology": cfg.topology.kind.value,
                "algorithm": cfg.policy_kind.value,
                "param": p.param_value,
                "target_M": p.target_M,
                "empirical_M": p.empirical_M,
                "R": p.reliability,
                "R_stderr": p.R_stderr,
                "L_mean": p.mean_latency,
                "L_p95": p.latency_p95,
                "n_runs": p.n_runs,
                "seed": cfg.master_seed,
                "source": "simulation",
            }
            for p in self.points
        ]


@dataclass
class _Run:
    atomic: bool
    messages: float
    latency: int
    component_sizes: tuple[int, ...] = ()
    isolated: int = 0


def _resolve_params(cfg: ExperimentConfig, graphs: Sequence[Graph] | None) -> list[list[float] | Exception]:
    """Per sweep point, the policy parameter for every graph (or the error)."""
    out: list[list[float] | Exception] = []
    n_graphs = cfg.n_graphs
    analytic = None
    for value in cfg.points:
        try:
            if cfg.policy_kind is PolicyKind.FLOODING:
                out.append([math.inf] * n_graphs)
            elif cfg.sweep_kind == "param":
                Policy(cfg.policy_kind, value)
                out.append([value] * n_graphs)
            elif cfg.calibration == "analytic":
                if analytic is None:
                    analytic = TopologyModel.analytic(cfg.topology)
                p = solve_parameter(CalibrationRequest(analytic, cfg.policy_kind, value))
                out.append([p] * n_graphs)
            else:
                ps = []
                for g in graphs:
                    m = TopologyModel.empirical(cfg.topology, empirical_degree_distribution(g))
                    ps.append(solve_parameter(CalibrationRequest(m, cfg.policy_kind, value)))
                out.append(ps)
        except GossipNetError as exc:
            log.warning("sweep point %s failed: %s", value, exc)
            out.append(exc)
    return out


def _sources(cfg: ExperimentConfig, g_idx: int) -> np.ndarray:
    n = cfg.topology.n_sites
    rng = np.random.default_rng(derive_seed(cfg.master_seed, _TAG_SOURCES, g_idx))
    k = cfg.n_sources_per_graph
    if k > n:
        warnings.warn(f"{k} sources requested on {n} sites; sampling with replacement", stacklevel=3)
        return rng.integers(n, size=k)
    return rng.choice(n, size=k, replace=False)


def graph_seed(cfg: ExperimentConfig, g_idx: int) -> int:
    return derive_seed(cfg.master_seed, _TAG_GRAPH, g_idx)


def _graph_runs(cfg: ExperimentConfig, g_idx: int, g: Graph, params: list) -> list[list[_Run] | None]:
    sources = _sources(cfg, g_idx)
    out: list[list[_Run] | None] = []
    for per_graph in params:
        if isinstance(per_graph, Exception):
            out.append(None)
            continue
        policy = Policy(cfg.policy_kind, per_graph[g_idx])
        runs = []
        for s_idx, src in enumerate(sources):
            seed = derive_seed(cfg.master_seed, _TAG_RUN, g_idx, s_idx)
            dg = build_dissemination_graph(g, policy, int(src), seed)
            r = disseminate(dg)
            run = _Run(r.atomic, message_complexity(r, g.n_sites, cfg.count_source_messages), latency(r))
            if not r.atomic:
                rep = classify_failure(g, dg, r)
                run.component_sizes = tuple(rep.component_sizes)
                run.isolated = rep.single_isolated_count
            runs.append(run)
        out.append(runs)
    return out


def _worker(args):
    cfg, g_idx, params = args
    g = generate(cfg.topology, graph_seed(cfg, g_idx))
    return g.resamples, _graph_runs(cfg, g_idx, g, params)


def _stderr(x: np.ndarray) -> float:
    return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan


def _aggregate(cfg: ExperimentConfig, value: float, param: float, runs: list[_Run]) -> SweepPoint:
    target = value if cfg.sweep_kind == "target_M" else math.nan
    pt = SweepPoint(param_value=param, target_M=target)
    atomic = np.array([r.atomic for r in runs])
    msgs = np.array([r.messages for r in runs], dtype=float)
    pt.n_runs = len(runs)
    pt.reliability = float(atomic.mean())
    pt.R_stderr = math.sqrt(pt.reliability * (1 - pt.reliability) / pt.n_runs)
    pt.empirical_M = float(msgs.mean())
    pt.M_stderr = _stderr(msgs)
    use = atomic if cfg.latency_atomic_only else np.ones_like(atomic)
    lat = np.array([r.latency for r in runs], dtype=float)[use]
    pt.n_latency_runs = int(lat.size)
    if lat.size:
        pt.mean_latency = float(lat.mean())
        pt.latency_p95 = float(np.percentile(lat, 95))
        pt.L_stderr = _stderr(lat)
    hist: Counter[int] = Counter()
    for r in runs:
        if not r.atomic:
            pt.failed_runs += 1
            hist.update(r.component_sizes)
            pt.isolated_sites += r.isolated
            if all(s == 1 for s in r.component_sizes):
                pt.singleton_failures += 1
    pt.failure_histogram = dict(sorted(hist.items()))
    return pt


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Simulate every sweep point over ``n_graphs`` x ``n_sources_per_graph`` runs.

    Graphs, sources and per-run seeds depend only on the master seed and
    their indices, so every sweep point sees the same graphs and the same
    random draws; results do not depend on ``threads``.
    """
    graphs = None
    if cfg.calibration == "empirical" and cfg.sweep_kind == "target_M":
        graphs = [generate(cfg.topology, graph_seed(cfg, i)) for i in range(cfg.n_graphs)]
    params = _resolve_params(cfg, graphs)

    jobs = [(cfg, i, params) for i in range(cfg.n_graphs)]
    if cfg.threads > 1 and cfg.n_graphs > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            per_graph = list(pool.map(_worker, jobs))
    else:
        per_graph = [_worker(job) for job in jobs]

    points = []
    for k, value in enumerate(cfg.points):
        if isinstance(params[k], Exception):
            target = value if cfg.sweep_kind == "target_M" else math.nan
            points.append(SweepPoint(param_value=math.nan, target_M=target, error=str(params[k])))
            continue
        runs = [r for _, graph_runs in per_graph for r in graph_runs[k]]
        param = float(np.mean(params[k]))
        points.append(_aggregate(cfg, value, param, runs))
    return ExperimentResult(cfg, points, resamples=sum(res for res, _ in per_graph))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.10g}"
    return str(v)


def write_csv(rows: Sequence[dict], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row.get(col, "")) for col in CSV_COLUMNS])


def csv_text(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


def read_csv(fh) -> list[dict]:
    return list(csv.DictReader(fh))


def point_summary(p: SweepPoint) -> dict:
    return asdict(p)


# ---------------------------------------------------------------------------
# Small-instance reliability: Monte-Carlo and exhaustive enumeration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    reliability: float
    stderr: float
    exact: bool
    n_samples: int

    def interval(self, z: float = 1.96) -> tuple[float, float]:
        return (max(0.0, self.reliability - z * self.stderr), min(1.0, self.reliability + z * self.stderr))


def arc_probabilities(g: Graph, policy: Policy) -> np.ndarray:
    """Inclusion probability of every CSR arc for independent-arc policies."""
    if policy.kind is PolicyKind.PE:
        return np.full(g.indices.size, policy.param)
    if policy.kind is PolicyKind.PINE:
        return np.minimum(policy.param / g.degrees[g.indices], 1.0)
    if policy.kind is PolicyKind.FLOODING:
        return np.ones(g.indices.size)
    raise ParameterError(f"{policy.kind.value} does not select arcs independently")


def _batch_all_reached(g: Graph, present: np.ndarray, source: int) -> np.ndarray:
    """For each row of an arc-presence batch, whether every site is reachable."""
    batch = present.shape[0]
    reach = np.zeros((batch, g.n_sites), dtype=bool)
    reach[:, source] = True
    tails, heads = g.arc_sources, g.indices
    heads_of = [np.flatnonzero(heads == j) for j in range(g.n_sites)]
    for _ in range(g.n_sites - 1):
        fired = reach[:, tails] & present
        new = reach.copy()
        for j, slots in enumerate(heads_of):
            if slots.size:
                new[:, j] |= fired[:, slots].any(axis=1)
        if np.array_equal(new, reach):
            break
        reach = new
    return reach.all(axis=1)


def monte_carlo_reliability(
    g: Graph, policy: Policy, source: int, n_runs: int, seed: int, batch: int = 200_000
) -> OracleResult:
    """Vectorised simulation of the forwarding rule on a small graph."""
    rng = np.random.default_rng(seed)
    src_slots = slice(g.indptr[source], g.indptr[source + 1])
    hits = 0
    done = 0
    while done < n_runs:
        b = min(batch, n_runs - done)
        arc_u = rng.random((b, g.indices.size))
        site_u = rng.random((b, g.n_sites))
        present = arc_mask(policy, g, arc_u, site_u)
        present[:, src_slots] = True
        hits += int(_batch_all_reached(g, present, source).sum())
        done += b
    r = hits / n_runs
    return OracleResult(r, math.sqrt(r * (1 - r) / n_runs), False, n_runs)


def _exhaustive(g: Graph, probs: np.ndarray, source: int, chunk: int = 1 << 16) -> float:
    n = g.n_sites
    tails, heads = g.arc_sources, g.indices
    forced = tails == source
    free = np.flatnonzero(~forced)
    n_free = free.size
    full = (1 << n) - 1
    total = 0.0
    for start in range(0, 1 << n_free, chunk):
        cfgs = np.arange(start, min(start + chunk, 1 << n_free), dtype=np.int64)
        bits = ((cfgs[:, None] >> np.arange(n_free)) & 1).astype(bool)
        p = probs[free]
        weight = np.prod(np.where(bits, p, 1.0 - p), axis=1)
        present = np.ones((cfgs.size, tails.size), dtype=np.int64)
        present[:, free] = bits
        reach = np.full(cfgs.size, 1 << source, dtype=np.int64)
        while True:
            before = reach
            for k in range(tails.size):
                reach = reach | ((((reach >> tails[k]) & 1) & present[:, k]) << heads[k])
            if np.array_equal(before, reach):
                break
        total += float(weight[reach == full].sum())
    return min(max(total, 0.0), 1.0)


def reliability_oracle(
    g: Graph,
    policy: Policy,
    source: int,
    mc_fallback: bool = False,
    mc_runs: int = 1_000_000,
    seed: int = 0,
) -> OracleResult:
    probs = arc_probabilities(g, policy)
    if 2 * g.n_edges <= MAX_EXHAUSTIVE_ARCS and g.n_sites <= 62:
        return OracleResult(_exhaustive(g, probs, source), 0.0, True, 1 << int((g.arc_sources != source).sum()))
    if not mc_fallback:
        raise SizeError(f"2|E| = {2 * g.n_edges} exceeds {MAX_EXHAUSTIVE_ARCS} for exhaustive enumeration")
    return monte_carlo_reliability(g, policy, source, mc_runs, seed)


def exact_reliability_oracle(g: Graph, policy: Policy, source: int, mc_fallback: bool = False) -> float:
    """Probability that every site is reached, by enumerating all arc subsets."""
    return reliability_oracle(g, policy, source, mc_fallback=mc_fallback).reliability
