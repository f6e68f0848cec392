import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tmperc import template as tpl
from tmperc.rngutil import substream
from tmperc.tmgraph import (
    SampledGraph,
    TMParams,
    ThresholdDistribution,
    assign_thresholds,
    dump_edges,
    load_edges,
    near_far_counts,
    sample_graph,
    select_seeds,
)


def test_params_derived_quantities():
    params = TMParams(tpl.make_ring(20, 1), 10000, 100 / (3 * 10000), 100 / (17 * 10000))
    assert params.k_p == 3
    assert params.k_q == 17
    assert params.eta == 500
    assert math.isclose(params.phi, 200 / 10000)
    assert math.isclose(params.expected_degree, 10.0)


def test_params_rejections():
    with pytest.raises(ValueError):
        TMParams(tpl.make_single(), 10, 0.2, 0.5)  # q > p
    with pytest.raises(ValueError):
        TMParams(tpl.make_planted(3), 10, 0.1)  # 10 not divisible by 3
    with pytest.raises(ValueError):
        TMParams(tpl.make_single(), 10, 1.5)
    # relaxed mode admits uneven clusters for analytic-only use
    relaxed = TMParams(tpl.make_planted(3), 10, 0.1, allow_fractional_clusters=True)
    assert relaxed.eta == pytest.approx(10 / 3)


def test_threshold_distribution_validation():
    with pytest.raises(ValueError):
        ThresholdDistribution((0.5, 0.4))
    with pytest.raises(ValueError):
        ThresholdDistribution((1.5, -0.5))
    dist = ThresholdDistribution.from_mapping({2: 0.5, 3: 0.5})
    assert dist.r_max == 3
    assert dist.zeta == (0.0, 0.5, 0.5)


def test_zeta1_condition_flag():
    assert ThresholdDistribution.from_mapping({2: 1.0}).zeta1_condition_ok
    assert ThresholdDistribution((0.1, 0.9)).zeta1_condition_ok
    assert not ThresholdDistribution((0.4, 0.6)).zeta1_condition_ok
    assert ThresholdDistribution.from_mapping({3: 1.0}).zeta1_condition_ok  # no mass at 1


def test_complete_graph_when_p_one():
    params = TMParams(tpl.make_single(), 4, 1.0)
    g = sample_graph(params, substream(0, 1))
    assert g.num_edges == 6
    assert np.array_equal(g.degrees(), np.full(4, 3))


def test_empty_graph_when_p_zero():
    params = TMParams(tpl.make_single(), 50, 0.0)
    g = sample_graph(params, substream(0, 1))
    assert g.num_edges == 0


def test_mean_degree_concentration():
    n = 10000
    params = TMParams(tpl.make_single(), n, 10 / n)
    g = sample_graph(params, substream(3, 1))
    mean_degree = 2 * g.num_edges / n
    # Var(mean degree) ~ 2 p (1-p) (n-1)/n; three sigma around 10
    sigma = math.sqrt(2 * (10 / n) * (1 - 10 / n) * (n - 1) / n)
    assert abs(mean_degree - 10.0) <= 3 * sigma + 1e-9


def test_sampling_determinism_and_variation():
    params = TMParams(tpl.make_ring(10, 1), 1000, 0.01, 0.001)
    g1 = sample_graph(params, substream(9, 4))
    g2 = sample_graph(params, substream(9, 4))
    g3 = sample_graph(params, substream(9, 5))
    assert np.array_equal(g1.edge_u, g2.edge_u) and np.array_equal(g1.edge_v, g2.edge_v)
    assert not (
        g1.num_edges == g3.num_edges
        and np.array_equal(g1.edge_u, g3.edge_u)
        and np.array_equal(g1.edge_v, g3.edge_v)
    )


def test_adjacency_symmetry_no_self_loops_no_duplicates():
    params = TMParams(tpl.make_cube3(), 8 * 30, 0.2, 0.05)
    g = sample_graph(params, substream(11, 0))
    assert np.all(g.edge_u < g.edge_v)
    pairs = set(zip(g.edge_u.tolist(), g.edge_v.tolist()))
    assert len(pairs) == g.num_edges
    for u in range(g.n):
        for v in g.neighbors(u):
            assert u in g.neighbors(v)


def test_cluster_sizes_exact():
    params = TMParams(tpl.make_planted(4), 40, 0.3, 0.1)
    g = sample_graph(params, substream(2, 2))
    assert np.array_equal(np.bincount(g.clusters), np.full(4, 10))


def test_near_edge_count_concentration():
    # aggregate near-pair edges over repeated sampling vs binomial expectation
    params = TMParams(tpl.make_planted(2), 60, 0.3, 0.1)
    near_pairs_per_graph = 2 * (30 * 29 // 2)
    samples = 40
    total = 0
    for i in range(samples):
        g = sample_graph(params, substream(17, i))
        total += int(np.count_nonzero(g.edge_is_near()))
    trials = samples * near_pairs_per_graph
    mean = trials * params.p
    sigma = math.sqrt(trials * params.p * (1 - params.p))
    assert abs(total - mean) <= 4 * sigma


def test_assign_thresholds_point_masses():
    dist = ThresholdDistribution.point_mass(2)
    out = assign_thresholds(dist, 100, substream(1, 1))
    assert np.all(out == 2)
    ones = assign_thresholds(ThresholdDistribution.point_mass(1), 50, substream(1, 2))
    assert np.all(ones == 1)


def test_assign_thresholds_concentration():
    dist = ThresholdDistribution.from_mapping({2: 0.5, 3: 0.5})
    out = assign_thresholds(dist, 10000, substream(5, 1))
    count3 = int(np.count_nonzero(out == 3))
    sigma = math.sqrt(10000 * 0.25)
    assert abs(count3 - 5000) <= 3 * sigma


def test_assign_thresholds_determinism():
    dist = ThresholdDistribution.from_mapping({1: 0.25, 2: 0.5, 4: 0.25})
    a = assign_thresholds(dist, 500, substream(8, 3))
    b = assign_thresholds(dist, 500, substream(8, 3))
    assert np.array_equal(a, b)


def test_select_seeds_edges_and_determinism():
    assert select_seeds(0, 10, substream(0, 0)).size == 0
    assert np.array_equal(select_seeds(10, 10, substream(0, 0)), np.arange(10))
    a = select_seeds(5, 100, substream(4, 4))
    b = select_seeds(5, 100, substream(4, 4))
    assert np.array_equal(a, b)
    assert np.unique(a).size == 5
    with pytest.raises(ValueError):
        select_seeds(11, 10, substream(0, 0))


def test_near_far_counts():
    params = TMParams(tpl.make_ring(10, 1), 100, 0.1, 0.01)
    g = sample_graph(params, substream(6, 1))
    assert near_far_counts(g, 0, []) == (0, 0)
    single = sample_graph(TMParams(tpl.make_single(), 20, 0.2), substream(6, 2))
    assert near_far_counts(single, 3, [0, 5, 11]) == (3, 0)
    one_per_cluster = [i * 10 for i in range(10)]
    assert near_far_counts(g, 5, one_per_cluster) == (3, 7)


def test_dump_load_roundtrip():
    params = TMParams(tpl.make_single(), 30, 0.2)
    g = sample_graph(params, substream(12, 0))
    buf = io.StringIO()
    dump_edges(g, buf, seed=12)
    buf.seek(0)
    back = load_edges(buf)
    assert back.n == g.n
    assert np.array_equal(back.edge_u, g.edge_u)
    assert np.array_equal(back.edge_v, g.edge_v)


@given(st.integers(2, 30), st.floats(0.0, 1.0))
def test_sampled_graph_symmetry_property(n, p):
    params = TMParams(tpl.make_single(), n, p)
    g = sample_graph(params, substream(99, n))
    counts = np.zeros(n, dtype=int)
    for u, v in zip(g.edge_u, g.edge_v):
        assert 0 <= u < v < n
        counts[u] += 1
        counts[v] += 1
    assert np.array_equal(counts, g.degrees())
