import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from treebvm.dataset import make_grid_design
from treebvm.errors import DimensionMismatch, EnumerationCapExceeded, InvalidPrior
from treebvm.partition import assign_cells, equivalent_blocks
from treebvm.priors import (
    GaltonWatsonPrior,
    GaussianLeafPrior,
    GaussianScaledLeafPrior,
    LaplaceLeafPrior,
    LaplaceScaledLeafPrior,
    UniformTopologyPrior,
    count_topologies,
    gaussian_change_of_measure_residual,
    gw_expected_leaves,
    gw_split_probability,
    laplace_change_of_measure_bound,
    log_leaf_prior,
    log_prior_topology_uniform,
    log_prior_tree_size,
    sample_gw_tree,
)


def brute_force_topologies(points, depth_left):
    """Every topology over sorted 1-d ``points`` as nested tuples (independent of the package)."""
    out = [("leaf",)]
    if depth_left == 0 or len(points) < 2:
        return out
    for c in sorted(set(points))[:-1]:
        left = [v for v in points if v <= c]
        right = [v for v in points if v > c]
        for a in brute_force_topologies(left, depth_left - 1):
            for b in brute_force_topologies(right, depth_left - 1):
                out.append((c, a, b))
    return out


def n_leaves(topo):
    return 1 if topo[0] == "leaf" else n_leaves(topo[1]) + n_leaves(topo[2])


# ---------------------------------------------------------------------------
# tree size


def test_tree_size_examples():
    assert log_prior_tree_size(1, 1.0) == pytest.approx(-0.54132, abs=1e-5)
    assert log_prior_tree_size(1, 1.0) == pytest.approx(math.log(1 / (math.e - 1)), abs=1e-14)
    assert log_prior_tree_size(2, 1.0) == pytest.approx(log_prior_tree_size(1, 1.0) - math.log(2), abs=1e-14)
    assert log_prior_tree_size(0, 1.0) == -math.inf


@pytest.mark.parametrize("lam", [0.1, 1.0, 2.5, 5.0])
def test_tree_size_normalises(lam):
    total = math.fsum(math.exp(log_prior_tree_size(K, lam)) for K in range(1, 101))
    assert abs(total - 1) < 1e-12


# ---------------------------------------------------------------------------
# uniform topology


def test_topology_count_example():
    x = make_grid_design(3)
    assert count_topologies(x, 2)[2] == 2
    part = assign_cells({"split": {"j": 1, "c": 1 / 3}, "left": {"leaf": 1}, "right": {"leaf": 1}}, x)
    assert log_prior_topology_uniform(part) == pytest.approx(-math.log(2))
    assert log_prior_topology_uniform(equivalent_blocks(x, 1)) == 0.0


@pytest.mark.parametrize("n,depth", [(4, None), (6, None), (7, 2), (8, 3)])
def test_topology_counts_match_brute_force(n, depth):
    x = make_grid_design(n)
    pts = list(x[:, 0])
    brute = brute_force_topologies(pts, n if depth is None else depth)
    expected = [0] * (n + 1)
    for t in brute:
        expected[n_leaves(t)] += 1
    assert count_topologies(x, n, depth) == expected


def test_topology_counts_two_dimensions():
    # 2x2 grid: root splits on either coordinate, each child splits once more
    x = make_grid_design(4, 2)
    counts = count_topologies(x, 4)
    assert counts[1] == 1 and counts[2] == 2
    # K=3: pick root coordinate (2 ways), then split exactly one child (2 ways)
    assert counts[3] == 4
    # K=4: pick root coordinate, then split both children
    assert counts[4] == 2


def test_uniform_prior_equal_within_K(rng):
    x = make_grid_design(6)
    prior = UniformTopologyPrior(1.3)
    seen = {}
    for _ in range(200):
        t = sample_gw_tree(GaltonWatsonPrior("geometric", 0.7), x, rng, 6)
        seen.setdefault(t.K, set()).add(prior.log_prior(t))
    for K, vals in seen.items():
        assert len(vals) == 1
        assert vals.pop() == pytest.approx(log_prior_tree_size(K, 1.3) - math.log(count_topologies(x, 6)[K]))


def test_uniform_prior_above_cap():
    x = make_grid_design(40)
    part = equivalent_blocks(x, 3)
    assert log_prior_topology_uniform(part, cap=10) == 0.0
    with pytest.raises(EnumerationCapExceeded):
        log_prior_topology_uniform(part, cap=10, require_normalized=True)
    prior = UniformTopologyPrior(1.0, cap=10)
    assert not prior.normalized(x)
    assert prior.log_prior(part) == pytest.approx(log_prior_tree_size(3, 1.0))


# ---------------------------------------------------------------------------
# Galton-Watson


def test_split_probability_examples():
    assert gw_split_probability(0, GaltonWatsonPrior("chipman", 0.95, 2)) == pytest.approx(0.95)
    assert gw_split_probability(1, GaltonWatsonPrior("chipman", 0.95, 2)) == pytest.approx(0.2375)
    assert gw_split_probability(2, GaltonWatsonPrior("geometric", 0.5)) == pytest.approx(0.25)
    assert gw_split_probability(0, GaltonWatsonPrior("geometric", 0.5)) == 1.0


def test_invalid_gw_parameters():
    with pytest.raises(InvalidPrior):
        GaltonWatsonPrior("chipman", 1.2)
    with pytest.raises(InvalidPrior):
        GaltonWatsonPrior("chipman", 0.5, -1)
    with pytest.raises(InvalidPrior):
        GaltonWatsonPrior("other", 0.5)


def test_tiny_alpha_never_splits(rng):
    prior = GaltonWatsonPrior("chipman", 1e-12)
    assert all(sample_gw_tree(prior, make_grid_design(16), rng, 5).K == 1 for _ in range(200))


def dp_mean_leaves(split_prob, max_depth):
    # expected leaves below a node at depth l, computed bottom-up
    mean = {max_depth: 1.0}
    for l in range(max_depth - 1, -1, -1):
        mean[l] = (1 - split_prob(l)) + 2 * split_prob(l) * mean[l + 1]
    return mean[0]


def test_gw_mean_leaf_count_against_dp():
    prior = GaltonWatsonPrior("geometric", 0.5)
    max_depth = 4
    expected = dp_mean_leaves(lambda l: 0.5**l, max_depth)
    assert gw_expected_leaves(prior, max_depth) == pytest.approx(expected)
    rng = np.random.default_rng(2024)
    x = make_grid_design(4096)
    ks = np.array([sample_gw_tree(prior, x, rng, max_depth).K for _ in range(100_000)])
    se = ks.std() / math.sqrt(ks.size)
    assert abs(ks.mean() - expected) < 3 * se


def test_gw_layer_split_frequency(rng):
    prior = GaltonWatsonPrior("chipman", 0.95, 1.0)
    x = make_grid_design(1024)
    tried = np.zeros(4)
    split = np.zeros(4)
    for _ in range(4000):
        tree = sample_gw_tree(prior, x, rng, 4)
        for node, _ in tree.internal_nodes():
            split[node.depth] += 1
        for node in tree.nodes():
            if node.depth < 4:
                tried[node.depth] += 1
    for l in range(3):
        p = prior.split_probability(l)
        se = math.sqrt(p * (1 - p) / tried[l])
        assert abs(split[l] / tried[l] - p) < 3 * se


def test_gw_log_prior_matches_hand_computation():
    x = make_grid_design(4)
    prior = GaltonWatsonPrior("chipman", 0.95, 2)
    part = assign_cells({"split": {"j": 1, "c": 0.5}, "left": {"leaf": 1}, "right": {"leaf": 1}}, x)
    # root splits (3 candidate values), both depth-1 children stay leaves
    want = math.log(0.95) - math.log(3) + 2 * math.log(1 - 0.2375)
    assert prior.log_prior(part) == pytest.approx(want)
    # with max_depth=1 the children are forced leaves
    assert prior.log_prior(part, max_depth=1) == pytest.approx(math.log(0.95) - math.log(3))


def test_gw_log_prior_sums_to_one_on_small_design():
    x = make_grid_design(4)
    for prior in (GaltonWatsonPrior("chipman", 0.95, 2), GaltonWatsonPrior("geometric", 0.6)):
        total = 0.0
        for topo in brute_force_topologies(list(x[:, 0]), 3):
            total += math.exp(prior.log_prior(assign_cells(_to_dict(topo), x), max_depth=3))
        assert total == pytest.approx(1.0, abs=1e-12)


def _to_dict(topo):
    if topo[0] == "leaf":
        return {"leaf": 1}
    return {"split": {"j": 1, "c": topo[0]}, "left": _to_dict(topo[1]), "right": _to_dict(topo[2])}


# ---------------------------------------------------------------------------
# leaf priors


def test_leaf_prior_examples():
    assert log_leaf_prior([0.0], GaussianLeafPrior()) == pytest.approx(-0.5 * math.log(2 * math.pi))
    assert log_leaf_prior([0.0], LaplaceLeafPrior(2.0)) == pytest.approx(0.0)
    S = np.array([[2.0, 1.0], [1.0, 2.0]])
    b = np.array([1.0, -1.0])
    oracle = -math.log(2 * math.pi) - 0.5 * math.log(np.linalg.det(S)) - 0.5 * b @ np.linalg.inv(S) @ b
    assert log_leaf_prior(b, GaussianLeafPrior(cov=S)) == pytest.approx(oracle, abs=1e-12)


def test_scaled_leaf_priors():
    b = np.array([0.3, -1.2, 0.5])
    oracle = sum(-0.5 * math.log(2 * math.pi * 3) - v * v / 6 for v in b)
    assert GaussianScaledLeafPrior().log_density(b) == pytest.approx(oracle)
    lam = 2.0 / math.sqrt(3)
    assert LaplaceScaledLeafPrior(2.0).log_density(b) == pytest.approx(3 * math.log(lam / 2) - lam * np.abs(b).sum())


def test_covariance_constraints():
    with pytest.raises(InvalidPrior):
        GaussianLeafPrior(cov=np.diag([1.0, 1e-12]))
    with pytest.raises(InvalidPrior):
        GaussianLeafPrior(cov=np.diag([1.0, 50.0]), c2=1.0, n=10)
    with pytest.raises(InvalidPrior):
        GaussianLeafPrior(cov=np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(InvalidPrior):
        LaplaceLeafPrior(0.0)
    with pytest.raises(DimensionMismatch):
        GaussianLeafPrior(cov=np.eye(2)).log_density([1.0, 2.0, 3.0])


# ---------------------------------------------------------------------------
# change of measure


def test_gaussian_change_of_measure_trivial():
    assert gaussian_change_of_measure_residual([0.4, -1.0], [1.0, 2.0], 0.0, np.eye(2), 10) == 0.0
    assert abs(gaussian_change_of_measure_residual([0.7], [1.3], 2.0, np.eye(1), 50)) < 1e-14


@given(st.integers(0, 10**6), st.floats(-5, 5))
def test_gaussian_change_of_measure_identity(seed, t):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(5, 5))
    S = A @ A.T + 0.5 * np.eye(5)
    r = gaussian_change_of_measure_residual(rng.normal(size=5), rng.normal(size=5), t, S, 100)
    assert abs(r) < 1e-10


def test_laplace_change_of_measure_examples():
    assert laplace_change_of_measure_bound([0.3], [1.0], 0.0, 1.0, 100) == (0.0, 0.0)
    ratio, bound = laplace_change_of_measure_bound([1.0], [1.0], 1.0, 1.0, 100)
    # beta_t = 0.9, so |beta_t| - |beta| = -0.1
    assert ratio == pytest.approx(-0.1) and bound == pytest.approx(0.1)


def test_laplace_change_of_measure_fuzz():
    rng = np.random.default_rng(7)
    trials, K = 1_000_000, 20
    chunk = 50_000
    for _ in range(trials // chunk):
        beta = rng.normal(size=(chunk, K)) * rng.exponential(size=(chunk, 1))
        a = rng.normal(size=(chunk, K))
        t = rng.normal(size=(chunk, 1)) * 3
        lam = rng.exponential(size=(chunk, 1))
        n = 100
        beta_t = beta - t * a / math.sqrt(n)
        ratio = lam[:, 0] * (np.abs(beta_t).sum(1) - np.abs(beta).sum(1))
        bound = np.abs(t[:, 0]) * lam[:, 0] * np.abs(a).sum(1) / math.sqrt(n)
        # equality cases are compared up to the rounding of the l1 sums
        slack = 4 * (K + 1) * np.finfo(float).eps * lam[:, 0] * (np.abs(beta).sum(1) + np.abs(beta_t).sum(1))
        assert np.all(np.abs(ratio) <= bound + slack)
    # the vectorised harness agrees with the scalar routine
    for _ in range(200):
        beta, a = rng.normal(size=K), rng.normal(size=K)
        t, lam = float(rng.normal() * 3), float(rng.exponential())
        r, b = laplace_change_of_measure_bound(beta, a, t, lam, 100)
        bt = beta - t * a / 10
        assert r == pytest.approx(lam * (np.abs(bt).sum() - np.abs(beta).sum()))
        assert -b - 1e-12 <= r <= b + 1e-12
