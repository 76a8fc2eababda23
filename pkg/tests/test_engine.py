from __future__ import annotations

import math

import numpy as np
import pytest

from gossipnet.engine import (
    ExperimentConfig,
    csv_text,
    derive_seed,
    exact_reliability_oracle,
    latency,
    message_complexity,
    monte_carlo_reliability,
    reliability_oracle,
    run_experiment,
)
from gossipnet.errors import ParameterError, SizeError
from gossipnet.gossip import DisseminationGraph, Policy, build_dissemination_graph, disseminate
from gossipnet.topology import Graph, TopologyKind, TopologySpec

from oracles import arc_probs_for, random_connected_small_graph, subset_reliability

SMALL_B = TopologySpec.bernoulli(120, 0.12)


def complete(n):
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def cycle(n):
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


# --- metrics -------------------------------------------------------------

def test_message_complexity_complete_graph():
    g = complete(4)
    for s in range(4):
        r = disseminate(build_dissemination_graph(g, Policy.flooding(), s, 0))
        assert r.messages_sent == 12
        assert message_complexity(r, 4) == 4.0


def test_message_complexity_star_centre_source():
    r = disseminate(DisseminationGraph.from_arcs(4, [(0, 1), (0, 2), (0, 3)], 0))
    assert message_complexity(r, 4) == 1.0
    assert message_complexity(r, 4, count_source_messages=False) == 0.0


def test_message_complexity_needs_two_sites():
    r = disseminate(DisseminationGraph.from_arcs(1, [], 0))
    with pytest.raises(ParameterError):
        message_complexity(r, 1)


def test_latency_examples():
    assert latency(disseminate(DisseminationGraph.from_arcs(1, [], 0))) == 0
    path = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    assert latency(disseminate(build_dissemination_graph(path, Policy.flooding(), 0, 0))) == 3


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert len({derive_seed(1, 3, i) for i in range(100)}) == 100


# --- experiments ---------------------------------------------------------

@pytest.mark.filterwarnings("ignore::UserWarning")
def test_flooding_experiment_is_atomic():
    res = run_experiment(ExperimentConfig(SMALL_B, "Flooding", (), n_graphs=3, n_sources_per_graph=10))
    (p,) = res.points
    assert p.reliability == 1.0 and p.n_runs == 30
    assert p.failed_runs == 0


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_pe_reliability_monotone_in_parameter():
    cfg = ExperimentConfig(SMALL_B, "PE", (0.1, 0.2, 0.35, 0.6, 1.0), sweep_kind="param",
                           n_graphs=3, n_sources_per_graph=30)
    pts = run_experiment(cfg).points
    rs = [p.reliability for p in pts]
    for a, b in zip(pts, pts[1:]):
        assert b.reliability >= a.reliability - 2 * max(a.R_stderr, b.R_stderr, 1e-12)
    assert rs[-1] == 1.0
    assert all(p.n_runs == 90 for p in pts)


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_calibrated_sweep_and_reproducibility():
    cfg = ExperimentConfig(SMALL_B, "PINE", (4.0, 8.0), n_graphs=2, n_sources_per_graph=20, master_seed=9)
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert csv_text(a.rows()) == csv_text(b.rows())
    assert a.points[0].param_value == pytest.approx(4.0, rel=0.05)
    other = run_experiment(ExperimentConfig(SMALL_B, "PINE", (4.0, 8.0), n_graphs=2,
                                            n_sources_per_graph=20, master_seed=10))
    assert csv_text(a.rows()) != csv_text(other.rows())


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_threads_do_not_change_results():
    base = dict(topology=SMALL_B, policy_kind="FF", sweep=(5.0,), n_graphs=3, n_sources_per_graph=10)
    one = run_experiment(ExperimentConfig(**base, threads=1))
    two = run_experiment(ExperimentConfig(**base, threads=2))
    assert csv_text(one.rows()) == csv_text(two.rows())


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_unreachable_target_reported_per_point():
    res = run_experiment(ExperimentConfig(SMALL_B, "FF", (4.0, 500.0), n_graphs=1, n_sources_per_graph=5))
    assert res.points[0].error is None and res.points[0].n_runs == 5
    assert res.points[1].error and math.isnan(res.points[1].reliability)


def test_config_validation():
    with pytest.raises(ParameterError):
        ExperimentConfig(SMALL_B, "PE", (), n_graphs=1)
    with pytest.raises(ParameterError):
        ExperimentConfig(SMALL_B, "PE", (0.5,), n_graphs=0)
    with pytest.raises(ParameterError):
        ExperimentConfig(SMALL_B, "PE", (0.5,), sweep_kind="bogus")


def test_rows_use_csv_schema():
    cfg = ExperimentConfig(TopologySpec.bernoulli(30, 0.4), "PE", (0.5,), sweep_kind="param",
                           n_graphs=1, n_sources_per_graph=3)
    text = csv_text(run_experiment(cfg).rows())
    header, row = text.splitlines()
    assert header == "topology,algorithm,param,target_M,empirical_M,R,R_stderr,L_mean,L_p95,n_runs,seed,source"
    assert row.startswith("bernoulli,PE,0.5,nan,") and row.endswith(",3,1,simulation")


# --- oracles -------------------------------------------------------------

def test_oracle_trivial_cases():
    tri = complete(3)
    assert exact_reliability_oracle(tri, Policy("PE", 1.0), 0) == 1.0
    assert exact_reliability_oracle(Graph.from_edges(2, [(0, 1)]), Policy("PE", 0.0), 0) == 1.0
    # both other sites hear the source directly
    assert exact_reliability_oracle(tri, Policy("PE", 0.3), 0) == pytest.approx(1.0)


@pytest.mark.parametrize("q", [0.3, 0.7])
def test_five_cycle_polynomial_and_monte_carlo(q):
    g = cycle(5)
    exact = exact_reliability_oracle(g, Policy("PE", q), 0)
    assert exact == pytest.approx(3 * q**2 - 2 * q**3, abs=1e-12)
    mc = monte_carlo_reliability(g, Policy("PE", q), 0, 200_000, seed=5)
    assert abs(mc.reliability - exact) <= 3 * math.sqrt(exact * (1 - exact) / mc.n_samples)


def test_exhaustive_matches_subset_recursion():
    rng = np.random.default_rng(77)
    for _ in range(20):
        n, edges = random_connected_small_graph(rng)
        g = Graph.from_edges(n, edges)
        adj = [a.tolist() for a in g.adjacency]
        for kind, param in (("PE", 0.45), ("PINE", 1.5)):
            src = int(rng.integers(n))
            expected = subset_reliability(n, arc_probs_for(adj, src, kind, param), src)
            assert exact_reliability_oracle(g, Policy(kind, param), src) == pytest.approx(expected, abs=1e-12)


def test_oracle_size_and_kind_errors():
    big = cycle(12)  # 24 arcs
    with pytest.raises(SizeError):
        exact_reliability_oracle(big, Policy("PE", 0.5), 0)
    res = reliability_oracle(big, Policy("PE", 0.8), 0, mc_fallback=True, mc_runs=20_000, seed=1)
    assert not res.exact and res.stderr > 0
    lo, hi = res.interval()
    assert lo <= res.reliability <= hi
    with pytest.raises(ParameterError):
        exact_reliability_oracle(complete(3), Policy("FF", 1), 0)
