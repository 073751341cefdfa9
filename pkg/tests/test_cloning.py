import math

import numpy as np
import pytest

from src.cloning.cloners import (CloneConfig, bernoulli_clone, bernoulli_clone_gof, bernoulli_gof_check,
                                 bernoulli_unclone, clone_pattern_probabilities, clone_round_trip_check,
                                 gaussian_clone, gaussian_moment_check, gaussian_unclone, householder_check,
                                 householder_matrix, pc_clone, pc_unclone, support_size_pmf)
from src.cloning.hypergraph_io import (clique_edges, colex_rank, hyperedges, planted_hypergraph,
                                       read_hypergraphs, write_hypergraphs)
from src.utils.errors import PreconditionError, SpecFormatError


class TestCloneConfig:
    @pytest.mark.parametrize("m,gamma", [(0, 0.3), (2, 0.0), (2, 1.0)])
    def test_invalid(self, m, gamma):
        with pytest.raises(PreconditionError):
            CloneConfig(m=m, gamma=gamma)

    def test_bernoulli_needs_gamma(self):
        with pytest.raises(PreconditionError):
            bernoulli_clone(np.array([0, 1]), CloneConfig(m=2))


class TestGaussianCloning:
    @pytest.mark.parametrize("m", range(1, 7))
    def test_householder(self, m):
        assert householder_check(m)
        H = householder_matrix(m)
        np.testing.assert_allclose(H, H.T)

    def test_shapes(self, rng):
        config = CloneConfig(m=3, seed=1)
        assert gaussian_clone(0.5, config, rng).shape == (3,)
        assert gaussian_clone(np.zeros(10), config, rng).shape == (10, 3)

    @pytest.mark.parametrize("m", [1, 2, 5])
    def test_round_trip(self, rng, m):
        x = rng.standard_normal(50)
        y = gaussian_clone(x, CloneConfig(m=m), rng)
        np.testing.assert_allclose(gaussian_unclone(y), x, atol=1e-12)

    @pytest.mark.parametrize("m", [2, 3])
    def test_moments(self, m):
        report = gaussian_moment_check(CloneConfig(m=m, seed=7), 20000, mu=0.7)
        assert report.passed, report.values


class TestBernoulliCloning:
    @pytest.mark.parametrize("m,gamma", [(1, 0.3), (3, 0.3), (6, 0.05), (40, 0.5)])
    def test_support_size_pmf(self, m, gamma):
        pmf = support_size_pmf(m, gamma)
        assert pmf.shape == (m,)
        assert pmf.sum() == pytest.approx(1.0)
        assert np.all(pmf >= 0)

    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_pattern_law_mixes_to_iid_bits(self, m):
        gamma = 0.3
        g = gamma ** (1 / m)
        clone_of_zero = clone_pattern_probabilities(m, gamma)
        ones = np.array([bin(p).count("1") for p in range(2 ** m)])
        mixture = (1 - gamma) * clone_of_zero + gamma * (ones == m)
        np.testing.assert_allclose(mixture, g ** ones * (1 - g) ** (m - ones), atol=1e-12)

    def test_one_maps_to_all_ones(self, rng):
        clones = bernoulli_clone(np.ones(20, dtype=int), CloneConfig(m=4, gamma=0.3), rng)
        assert np.all(clones == 1)

    def test_zero_never_maps_to_all_ones(self, rng):
        clones = bernoulli_clone(np.zeros(500, dtype=int), CloneConfig(m=3, gamma=0.3), rng)
        assert np.all(bernoulli_unclone(clones) == 0)

    def test_non_binary_input(self, rng):
        with pytest.raises(PreconditionError):
            bernoulli_clone(np.array([0, 2]), CloneConfig(m=2, gamma=0.3), rng)

    def test_gof_record(self):
        record = bernoulli_clone_gof(CloneConfig(m=2, gamma=0.3, seed=7), 5000)
        assert 0.0 <= record["p_value"] <= 1.0
        assert record["max_marginal_error"] < 0.05

    @pytest.mark.slow
    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_gof_at_full_size(self, m):
        report = bernoulli_gof_check(CloneConfig(m=m, gamma=0.3, seed=7), 100_000, alpha=0.001)
        assert report.passed, report.values


class TestPlantedCliqueCloning:
    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_round_trip(self, m):
        assert clone_round_trip_check(CloneConfig(m=m, gamma=0.3, seed=7))

    def test_planted_edges_survive(self, rng):
        graph, probs = planted_hypergraph(7, 2, 4, 0.5, rng)
        clones = pc_clone(graph, CloneConfig(m=3, gamma=0.5), probs, rng)
        assert clones.shape == (3, math.comb(7, 2))
        np.testing.assert_array_equal(pc_unclone(clones), graph)
        assert np.all(clones[:, probs == 1.0] == 1)

    def test_other_edge_probabilities(self, rng):
        graph = np.zeros(3, dtype=np.int8)
        with pytest.raises(PreconditionError):
            pc_clone(graph, CloneConfig(m=2, gamma=0.5), [0.5, 0.7, 1.0], rng)


class TestHypergraphFiles:
    def test_colex_rank(self):
        for index, edge in enumerate(hyperedges(6, 3)):
            assert colex_rank(edge) == index

    def test_clique_edges(self):
        edges = clique_edges(5, 2, [0, 1, 2])
        assert edges.sum() == 3
        assert edges[colex_rank([0, 2])]

    def test_write_then_read(self, tmp_path, rng):
        graphs = (rng.random((3, math.comb(6, 3))) < 0.5).astype(np.int8)
        path = str(tmp_path / "graphs" / "hpc.txt")
        write_hypergraphs(path, graphs, 6, 3)
        loaded, N, s = read_hypergraphs(path)
        assert (N, s) == (6, 3)
        np.testing.assert_array_equal(loaded, graphs)

    @pytest.mark.parametrize("content", ["", "six 3\n", "4 2\n0101\n", "4 2\n01010x\n"])
    def test_malformed(self, tmp_path, content):
        path = tmp_path / "bad.txt"
        path.write_text(content)
        with pytest.raises(SpecFormatError):
            read_hypergraphs(str(path))
