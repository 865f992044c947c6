import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deanonsim.generator import (PopularityState, PrefixSumTree,
                                 brute_force_generation_distribution,
                                 empirical_edge_set_distribution,
                                 generate_ground_truth, popularity_update,
                                 selection_probability, total_variation)
from deanonsim.model import GenerationParams, GrowthModel


def pa_params(n, m, mu, alpha=1.0):
    return GenerationParams(n=n, m=m, mu=mu, alpha=alpha, model=GrowthModel.ALPHA_PA)


class TestPrefixSumTree:
    @given(st.lists(st.floats(min_value=0.0, max_value=10.0), min_size=1, max_size=64),
           st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=80, deadline=None)
    def test_matches_linear_scan(self, weights, seed):
        tree = PrefixSumTree(weights)
        prefix = np.cumsum([0.0] + list(weights))
        for i in range(len(weights) + 1):
            assert tree.prefix_sum(i) == pytest.approx(prefix[i], rel=1e-9, abs=1e-12)
        total = prefix[-1]
        if total > 0:
            rng = np.random.default_rng(seed)
            for _ in range(5):
                target = rng.random() * total
                idx = tree.sample(target)
                assert prefix[idx] <= target < prefix[idx + 1] or idx == len(weights) - 1

    def test_point_updates(self):
        tree = PrefixSumTree([1.0, 2.0, 3.0])
        tree.add(1, 4.0)
        assert tree.get(1) == pytest.approx(6.0)
        assert tree.total() == pytest.approx(10.0)


class TestPopularityState:
    def test_uniform_selection(self):
        state = PopularityState.initial(pa_params(4, 4, 1))
        for j in range(4):
            assert selection_probability(state, j) == pytest.approx(0.25)

    def test_linear_pa_selection_probabilities(self):
        # alpha=1, unit initials, sizes (2, 0, 1) after 3 edges:
        # popularities (3, 1, 2), total 6 -> P = (1/2, 1/6, 1/3)
        state = PopularityState.initial(pa_params(3, 10, 1))
        state.set_popularity(0, popularity_update(state.tau[0], 1.0, 2, 1.0))
        state.set_popularity(2, popularity_update(state.tau[2], 1.0, 1, 1.0))
        assert selection_probability(state, 0) == pytest.approx(1 / 2)
        assert selection_probability(state, 1) == pytest.approx(1 / 6)
        assert selection_probability(state, 2) == pytest.approx(1 / 3)

    def test_block_model_probabilities_are_static(self):
        params = GenerationParams(n=2, m=2, mu=1, alpha=0.0, model=GrowthModel.SB,
                                  tau0=np.array([1.0, 2.0]))
        state = PopularityState.initial(params)
        assert selection_probability(state, 0) == pytest.approx(1 / 3)
        assert selection_probability(state, 1) == pytest.approx(2 / 3)
        state.set_popularity(0, popularity_update(state.tau[0], 1.0, 5, 0.0))
        assert selection_probability(state, 0) == pytest.approx(1 / 3)

    def test_total_tracks_sum(self):
        state = PopularityState.initial(pa_params(5, 5, 2))
        state.set_popularity(3, 7.0)
        assert state.total == pytest.approx(sum(state.tau), rel=1e-9)


class TestPopularityUpdate:
    def test_linear_case_increments(self):
        assert popularity_update(5.0, 1.0, 5, 1.0) == pytest.approx(6.0)

    def test_sublinear_case(self):
        assert popularity_update(3.0, 1.0, 4, 0.5) == pytest.approx(3.0)
        assert popularity_update(2.0, 1.0, 4, 0.5) == pytest.approx(3.0)

    def test_block_limit_keeps_value(self):
        assert popularity_update(2.0, 1.0, 17, 0.0) == 2.0

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            popularity_update(1.0, 1.0, -1, 1.0)
        with pytest.raises(ValueError):
            popularity_update(1.0, 1.0, 1, 1.5)
        with pytest.raises(ValueError):
            popularity_update(1.0, 1.0, 1, -0.2)

    @given(st.integers(min_value=1, max_value=50),
           st.floats(min_value=0.05, max_value=1.0))
    @settings(max_examples=60, deadline=None)
    def test_size_form_matches_iterated_form(self, size, alpha):
        # One application of f(x, y) = ((x - y)**(1/alpha) + 1)**alpha + y to
        # x = size**alpha + tau0 must land on (size + 1)**alpha + tau0.
        tau0 = 1.0
        x = size ** alpha + tau0
        iterated = ((x - tau0) ** (1.0 / alpha) + 1.0) ** alpha + tau0
        assert popularity_update(x, tau0, size + 1, alpha) == pytest.approx(iterated, rel=1e-9)


class TestGenerateGroundTruth:
    def test_forced_single_group(self):
        params = pa_params(1, 3, 2)
        rng = np.random.default_rng(0)
        pair_counts = {}
        for _ in range(3000):
            g = generate_ground_truth(params, rng).graph
            assert g.group_sizes.tolist() == [2]
            pair = tuple(g.group_members[0].tolist())
            pair_counts[pair] = pair_counts.get(pair, 0) + 1
        freqs = np.array(sorted(pair_counts.values())) / 3000
        assert len(pair_counts) == 3
        assert np.all(np.abs(freqs - 1 / 3) < 0.05)

    @given(st.integers(min_value=1, max_value=4), st.integers(min_value=1, max_value=4),
           st.integers(min_value=1, max_value=4), st.integers(0, 2 ** 31))
    @settings(max_examples=40, deadline=None)
    def test_edge_count_identity(self, n, m, mu, seed):
        params = pa_params(n, m, mu)
        result = generate_ground_truth(params, np.random.default_rng(seed))
        result.graph.validate()
        assert result.graph.total_edges + result.num_skips == params.delta

    def test_bookkeeping_at_scale(self):
        params = pa_params(100, 1000, 3)
        result = generate_ground_truth(params, np.random.default_rng(1))
        assert result.num_skips == 0
        assert result.graph.total_edges == 300
        assert result.graph.group_sizes.mean() == pytest.approx(3.0)

    def test_skip_path(self):
        # n=2, m=1: step 2 picks the already-full group with probability 2/3
        params = pa_params(2, 1, 1)
        rng = np.random.default_rng(4)
        one_edge = 0
        runs = 4000
        for _ in range(runs):
            result = generate_ground_truth(params, rng)
            assert result.graph.total_edges + result.num_skips == 2
            if result.num_skips:
                assert result.graph.total_edges == 1
                one_edge += 1
        assert abs(one_edge / runs - 2 / 3) < 0.05

    def test_sb_fast_path_keeps_popularities(self):
        params = GenerationParams(n=3, m=5, mu=2, alpha=0.0, model=GrowthModel.SB,
                                  tau0=np.array([1.0, 2.0, 3.0]))
        result = generate_ground_truth(params, np.random.default_rng(2))
        assert result.graph.total_edges + result.num_skips == 6

    def test_deterministic_given_stream(self):
        params = pa_params(20, 30, 2, alpha=0.5)
        a = generate_ground_truth(params, np.random.default_rng(8)).graph.edge_set()
        b = generate_ground_truth(params, np.random.default_rng(8)).graph.edge_set()
        assert a == b


class TestBruteForceOracle:
    def test_single_step_two_users(self):
        dist = brute_force_generation_distribution(pa_params(1, 2, 1))
        assert len(dist) == 2
        for prob in dist.values():
            assert prob == pytest.approx(0.5)

    def test_two_by_two_exact_distribution(self):
        # Hand enumeration: after the first edge the chosen group has
        # popularity 2 (of 3 total), so it keeps both users with prob 2/3.
        dist = brute_force_generation_distribution(pa_params(2, 2, 1))
        both_in_0 = frozenset({(0, 0), (1, 0)})
        both_in_1 = frozenset({(0, 1), (1, 1)})
        assert dist[both_in_0] == pytest.approx(1 / 3)
        assert dist[both_in_1] == pytest.approx(1 / 3)
        split = [k for k in dist if k not in (both_in_0, both_in_1)]
        assert len(split) == 4
        for k in split:
            assert dist[k] == pytest.approx(1 / 12)
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)

    def test_skip_rule_in_oracle(self):
        dist = brute_force_generation_distribution(pa_params(2, 1, 1))
        sizes = {frozenset({(0, 0)}): 1 / 3, frozenset({(0, 1)}): 1 / 3,
                 frozenset({(0, 0), (0, 1)}): 1 / 3}
        assert set(dist) == set(sizes)
        for k, want in sizes.items():
            assert dist[k] == pytest.approx(want)

    def test_budget_guard(self):
        with pytest.raises(ValueError):
            brute_force_generation_distribution(pa_params(4, 4, 4))

    def test_sb_oracle_probabilities(self):
        params = GenerationParams(n=2, m=2, mu=1, alpha=0.0, model=GrowthModel.SB,
                                  tau0=np.array([1.0, 2.0]))
        dist = brute_force_generation_distribution(params)
        # Group selection is static (1/3, 2/3); both edges in group 1 needs
        # picking it twice: (2/3)^2 = 4/9.
        both_in_1 = frozenset({(0, 1), (1, 1)})
        assert dist[both_in_1] == pytest.approx(4 / 9)

    def test_monte_carlo_agreement_small(self):
        params = pa_params(2, 2, 1)
        exact = brute_force_generation_distribution(params)
        empirical = empirical_edge_set_distribution(params, 20_000, np.random.default_rng(10))
        assert total_variation(empirical, exact) < 0.02
