from __future__ import annotations

import math

import numpy as np
import pytest

from gossipnet.calibrate import calibrate
from gossipnet.engine import exact_reliability_oracle
from gossipnet.gossip import Policy, PolicyKind, arc_mask, build_dissemination_graph, draw_uniforms
from gossipnet.model import (
    ForwardingProfile,
    TopologyModel,
    ba_age_factor,
    ba_neighbor_degree,
    ba_neighbor_mean_degree_low,
    model_curve,
    neighbor_mean_degree_rgg,
    predict_message_complexity,
    predict_point,
    predict_reliability,
    predict_reliability_scalefree_duo,
    profile_duo_bernoulli,
    profile_duo_geometric,
    profile_duo_scalefree,
    profile_pe,
    profile_pine,
)
from gossipnet.topology import (
    TABLE_I,
    DegreeDistribution,
    Graph,
    TopologyKind,
    TopologySpec,
    analytic_degree_distribution,
    empirical_degree_distribution,
    generate,
)

from oracles import random_connected_small_graph

BERNOULLI = TABLE_I[TopologyKind.BERNOULLI]
GEOMETRIC = TABLE_I[TopologyKind.GEOMETRIC]
SCALEFREE = TABLE_I[TopologyKind.SCALEFREE]
KINDS = [PolicyKind.FF, PolicyKind.PE, PolicyKind.PISB, PolicyKind.PINE]


def point_mass(k, n):
    p = np.zeros(n)
    p[k] = 1.0
    return DegreeDistribution(p, n)


# --- profiles ------------------------------------------------------------

def test_pe_profile_is_constant():
    assert profile_pe(0.6, 200)(3) == profile_pe(0.6, 200)(100) == 0.6
    assert np.all(profile_pe(1.0, 5).probs == 1.0)
    assert np.all(profile_pe(0.0, 5).probs == 0.0)


def test_pine_profile():
    assert profile_pine(3, 10)(7) == pytest.approx(3 / 7)
    assert profile_pine(10, 10)(7) == 1.0
    assert np.all(profile_pine(0, 10).probs == 0.0)


def test_duo_bernoulli_profile_limits():
    dist = analytic_degree_distribution(BERNOULLI)
    assert profile_duo_bernoulli(999, dist)(3) == pytest.approx(1.0)
    assert profile_duo_bernoulli(0, dist)(3) == 0.0


@pytest.mark.slow
def test_duo_bernoulli_matches_ff_arc_frequency():
    dist = analytic_degree_distribution(BERNOULLI)
    expected = profile_duo_bernoulli(5, dist)(10)
    hits = total = 0
    for seed in range(3):
        g = generate(BERNOULLI, seed)
        for s in range(8):
            au, su = draw_uniforms(g, 1000 * seed + s)
            m = arc_mask(Policy("FF", 5), g, au, su)
            hits += int(m.sum())
            total += m.size
    freq = hits / total
    se = math.sqrt(freq * (1 - freq) / total)
    assert total >= 100_000
    # the analytic law differs slightly from each sample's own degree sequence
    assert abs(freq - expected) <= max(3 * se, 0.01)


def test_neighbor_mean_degree_limits():
    assert neighbor_mean_degree_rgg(5, 0.0, 15.2) == pytest.approx(15.2)
    assert neighbor_mean_degree_rgg(5, 1.0, 15.2) == pytest.approx(5.0)


@pytest.fixture(scope="module")
def geometric_graphs():
    return [generate(GEOMETRIC, s) for s in range(50)]


@pytest.mark.slow
def test_neighbor_mean_degree_rgg_vs_empirical(geometric_graphs):
    vals = []
    for g in geometric_graphs:
        for i in np.flatnonzero(g.degrees == 5):
            vals.append(g.degrees[g.neighbors(i)].mean())
    model = neighbor_mean_degree_rgg(5, 0.5865, GEOMETRIC.vbar_no_border)
    assert abs(model - np.mean(vals)) / np.mean(vals) <= 0.10


def test_duo_geometric_reductions():
    dist = analytic_degree_distribution(GEOMETRIC)
    vs = GEOMETRIC.vbar_no_border
    flat = profile_duo_geometric(5, dist, 0.0, vs)
    sender_side = float(np.dot(dist.probs, np.minimum(5, dist.degrees))) / vs
    assert flat(3) == pytest.approx(sender_side) and flat(40) == pytest.approx(sender_side)
    prof = profile_duo_geometric(5, dist, 0.5865, vs)
    assert prof(1) >= prof(50)
    assert np.all(np.diff(prof.probs[1:]) <= 1e-15)


@pytest.mark.slow
def test_duo_geometric_vs_ff_per_degree(geometric_graphs):
    dist = analytic_degree_distribution(GEOMETRIC)
    prof = profile_duo_geometric(5, dist, 0.5865, GEOMETRIC.vbar_no_border)
    inc = np.zeros(GEOMETRIC.n_sites)
    tot = np.zeros(GEOMETRIC.n_sites)
    for g in geometric_graphs[:5]:
        tdeg = g.degrees[g.indices]
        for s in range(200):
            au, su = draw_uniforms(g, s)
            np.add.at(inc, tdeg, arc_mask(Policy("FF", 5), g, au, su))
            np.add.at(tot, tdeg, 1)
    # degrees holding at least 1% of the sites; the sparse low-degree tail is noisier
    for k in np.flatnonzero(dist.probs >= 0.01):
        assert inc[k] / tot[k] == pytest.approx(prof(k), rel=0.15), k


# --- scale-free factors --------------------------------------------------

def test_low_degree_neighbor_anchor():
    neigh = ba_neighbor_degree(1000, 7)
    assert 36 <= neigh <= 38
    low = ba_neighbor_mean_degree_low(1000, 7, 9)
    assert 42 <= low <= 44
    assert low == pytest.approx((neigh + 1) * ba_age_factor(1000, 7, 9))
    assert ba_age_factor(1000, 7, 9) > 1 and low > neigh + 1


def test_age_factor_decreases_in_m():
    facs = [ba_age_factor(1000, m, 20) for m in range(1, 21)]
    assert np.all(np.diff(facs) < 0)


def test_age_factor_degenerate_single_term():
    val = ba_age_factor(10, 3, 9)
    assert math.isfinite(val)
    assert val == pytest.approx(1.0 / (2 * 10 / 5))


def test_duo_scalefree_limits():
    assert profile_duo_scalefree(0, 1000, 7, 9) == 0.0
    n, m = 1000, 7
    assert profile_duo_scalefree(1e9, n, m, 9) == pytest.approx(1 - (m + 1) / n)
    assert 1 - (m + 1) / n >= 0.99


def test_duo_scalefree_below_matched_pe():
    model = TopologyModel.analytic(SCALEFREE)
    m_ff = predict_point(model, PolicyKind.FF, 7).predicted_M
    p_e = calibrate(SCALEFREE, "PE", m_ff)
    assert profile_duo_scalefree(7, 1000, 7, 9) < p_e


# --- reliability and message complexity ---------------------------------

def test_reliability_trivial_profiles():
    dist = analytic_degree_distribution(BERNOULLI)
    assert predict_reliability(dist, profile_pe(1.0, 1000)) == 1.0
    assert predict_reliability(dist, profile_pe(0.0, 1000)) == 0.0


def test_reliability_point_mass_arithmetic():
    r = predict_reliability(point_mass(3, 10), profile_pe(0.5, 10), 10)
    assert r == pytest.approx(0.875**10, rel=1e-12)
    assert r == pytest.approx(0.2631, abs=1e-4)


def test_reliability_warns_on_isolated_sites():
    p = np.zeros(10)
    p[0], p[3] = 0.5, 0.5
    with pytest.warns(UserWarning):
        assert predict_reliability(DegreeDistribution(p, 10), profile_pe(1.0, 10)) == 0.0


def test_scalefree_duo_reliability():
    assert predict_reliability_scalefree_duo(1.0, 7, 2 / 9, 1000) == 1.0
    assert predict_reliability_scalefree_duo(0.0, 7, 2 / 9, 1000) == 0.0
    r = predict_reliability_scalefree_duo(0.5, 7, 2 / 9, 1000)
    assert r == pytest.approx((1 - 0.5**7) ** (2000 / 9), rel=1e-12)
    assert r == pytest.approx(0.175, abs=1e-3)


def test_message_complexity_identities():
    dist = analytic_degree_distribution(SCALEFREE)  # min degree 7
    assert predict_message_complexity(dist, profile_pe(1.0, 1000)) == pytest.approx(dist.mean_degree)
    assert predict_message_complexity(dist, profile_pe(0.0, 1000)) == 0.0
    for c in (1.0, 3.5, 7.0):
        assert predict_message_complexity(dist, profile_pine(c, 1000)) == pytest.approx(c, rel=1e-9)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("topo", list(TopologyKind))
def test_curves_monotone(topo, kind):
    hi = 1.0 if kind is PolicyKind.PE else 30.0
    pts = model_curve(TABLE_I[topo], kind, np.linspace(0, hi, 40))
    ms = np.array([p.predicted_M for p in pts])
    rs = np.array([p.predicted_R for p in pts])
    assert np.all(np.diff(ms) >= -1e-12) and np.all(np.diff(rs) >= -1e-12)
    assert np.all((rs >= 0) & (rs <= 1))


@pytest.mark.parametrize("topo", list(TopologyKind))
def test_ff_and_pisb_curves_coincide(topo):
    grid = [0.5, 2.0, 4.5, 9.0]
    ff = model_curve(TABLE_I[topo], "FF", grid)
    pisb = model_curve(TABLE_I[topo], "PISB", grid)
    assert ff == pisb


@pytest.mark.parametrize("topo", list(TopologyKind))
def test_pe_curve_endpoints(topo):
    lo, hi = model_curve(TABLE_I[topo], "PE", [0.0, 1.0])
    vbar = analytic_degree_distribution(TABLE_I[topo]).mean_degree
    assert lo.predicted_M == 0.0 and lo.predicted_R == 0.0
    assert hi.predicted_M == pytest.approx(vbar) and hi.predicted_R == 1.0


def _smallest_m_reaching(spec, kind, level=0.99):
    pts = model_curve(spec, kind, np.linspace(0, 1, 2001) if kind == "PE" else np.linspace(0, 14, 2001))
    return min(p.predicted_M for p in pts if p.predicted_R >= level)


def test_model_pine_reaches_target_with_fewer_messages():
    assert _smallest_m_reaching(BERNOULLI, "PINE") < _smallest_m_reaching(BERNOULLI, "FF")


@pytest.mark.xfail(strict=True, reason="the model gap at R=0.99 on Bernoulli is about 4.1 messages per site")
def test_model_pine_gap_within_one_to_three():
    gap = _smallest_m_reaching(BERNOULLI, "FF") - _smallest_m_reaching(BERNOULLI, "PINE")
    assert 1 <= gap <= 3


# --- against simulation and exact values --------------------------------

@pytest.mark.parametrize("policy", [Policy("PE", 0.4), Policy("PINE", 3.0)])
def test_message_complexity_vs_arc_counts(policy):
    g = generate(TopologySpec.bernoulli(400, 0.04), 5)
    dist = empirical_degree_distribution(g)
    prof = profile_pe(policy.param, g.n_sites) if policy.kind is PolicyKind.PE else profile_pine(policy.param, g.n_sites)
    predicted = predict_message_complexity(dist, prof)
    counts = [build_dissemination_graph(g, policy, s % g.n_sites, s).n_arcs for s in range(10_000)]
    # the source always broadcasts, adding at most mean-degree / N
    slack = 0.01 * predicted + g.mean_degree / g.n_sites
    assert abs(np.mean(counts) / (g.n_sites - 1) - predicted) <= slack


def test_isolation_model_on_tiny_graphs():
    """Isolation-only product vs exact reliability on small graphs.

    The model ignores borders wider than one site and correlations between
    sites, so only a loose bound is checked; the residual is reported.
    """
    rng = np.random.default_rng(2024)
    residuals = []
    for _ in range(10):
        n, edges = random_connected_small_graph(rng)
        g = Graph.from_edges(n, edges)
        dist = empirical_degree_distribution(g)
        for kind, param in (("PE", 0.6), ("PINE", 2.0)):
            prof = profile_pe(param, n) if kind == "PE" else profile_pine(param, n)
            model = predict_reliability(dist, prof, n)
            exact = np.mean([exact_reliability_oracle(g, Policy(kind, param), s) for s in range(n)])
            residuals.append(model - exact)
    residuals = np.array(residuals)
    print(f"isolation-model residual on tiny graphs: mean {residuals.mean():+.3f}, max |.| {np.abs(residuals).max():.3f}")
    assert np.all(np.abs(residuals) < 0.5)


def test_forwarding_profile_clips():
    prof = ForwardingProfile(np.array([-0.1, 0.5, 1.2]), "PE")
    assert prof.probs.tolist() == [0.0, 0.5, 1.0]
