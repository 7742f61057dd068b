import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from privcon import eig
from privcon.errors import ConvergenceError, GraphError, PreconditionError
from privcon.graph import (
    build_digraph,
    demo_graph,
    directed_cycle,
    disagreement_radius,
    graph_from_dict,
    is_strongly_connected,
    is_weight_balanced,
    laplacian,
    load_graph,
    save_graph,
    spectrum,
    stepsize_bound,
    two_node,
    undirected,
)

from .conftest import balanced_digraphs
from .oracles import (
    bfs_strongly_connected,
    charpoly_roots,
    disagreement_radius_np,
    hand_laplacian,
    multiset_distance,
)

DEMO_EDGES = [(1, 2), (2, 3), (1, 5), (3, 5), (3, 4), (4, 5)]


class TestBuild:
    def test_two_node(self):
        g = build_digraph(2, [(1, 2, 1), (2, 1, 1)])
        assert g.n == 2
        assert g.is_undirected()

    def test_directed_cycle(self):
        g = build_digraph(3, [(1, 2, 1), (2, 3, 1), (3, 1, 1)])
        assert g.edges == ((1, 2), (2, 3), (3, 1))
        assert g.out_neighbors(1) == {2}
        assert g.in_neighbors(1) == {3}

    @pytest.mark.parametrize(
        "n, edges, msg",
        [
            (1, [(1, 1, 1)], "self-loop"),
            (2, [(1, 3, 1)], "out of range"),
            (2, [(0, 1, 1)], "out of range"),
            (2, [(1, 2, 0)], "positive"),
            (2, [(1, 2, -1)], "positive"),
            (2, [(1, 2, 1), (1, 2, 2)], "duplicate"),
        ],
    )
    def test_rejections(self, n, edges, msg):
        with pytest.raises(GraphError, match=msg):
            build_digraph(n, edges)

    def test_immutable(self):
        g = two_node()
        with pytest.raises(ValueError):
            g.weights[0, 1] = 5.0

    def test_file_roundtrip(self, tmp_path):
        g = demo_graph()
        path = tmp_path / "g.json"
        save_graph(g, path)
        g2 = load_graph(path)
        assert np.array_equal(g.weights, g2.weights)
        assert g.digest() == g2.digest()

    def test_file_errors(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"n": 2, "edges": [[1, 1, 1.0]]}')
        with pytest.raises(GraphError, match="self-loop"):
            load_graph(bad)
        bad.write_text('{"n": 2,\n "edges": [[1, 2, 1.0],]}')
        with pytest.raises(GraphError, match="line 2"):
            load_graph(bad)
        with pytest.raises(GraphError, match="missing field 'edges'"):
            graph_from_dict({"n": 2})


class TestStructure:
    def test_balance_examples(self):
        assert is_weight_balanced(directed_cycle(3))
        assert not is_weight_balanced(build_digraph(2, [(1, 2, 1)]))
        assert is_weight_balanced(undirected(4, [(1, 2, 0.3), (2, 3, 2.5), (1, 4, 7.0)]))

    def test_connectivity_examples(self):
        assert is_strongly_connected(directed_cycle(3))
        assert not is_strongly_connected(build_digraph(2, [(1, 2, 1)]))
        g = demo_graph()
        assert is_strongly_connected(g) == bfs_strongly_connected(g.weights) is True

    @given(st.integers(2, 6).flatmap(lambda n: st.tuples(st.just(n), st.lists(st.booleans(), min_size=n * n, max_size=n * n))))
    def test_connectivity_matches_bfs(self, data):
        n, bits = data
        w = np.array(bits, dtype=float).reshape(n, n)
        np.fill_diagonal(w, 0.0)
        g = build_digraph(n, [(i + 1, j + 1, 1.0) for i, j in zip(*np.nonzero(w))])
        assert is_strongly_connected(g) == bfs_strongly_connected(w)


class TestLaplacian:
    def test_two_node(self):
        assert np.array_equal(laplacian(two_node()), [[1, -1], [-1, 1]])

    def test_cycle(self):
        assert np.array_equal(laplacian(directed_cycle(3)), [[1, -1, 0], [0, 1, -1], [-1, 0, 1]])

    def test_demo_hand_built(self):
        edges = [(i, j, 1.0) for i, j in DEMO_EDGES] + [(j, i, 1.0) for i, j in DEMO_EDGES]
        assert np.array_equal(laplacian(demo_graph()), hand_laplacian(5, edges))

    @given(balanced_digraphs(max_n=6))
    def test_row_and_column_sums(self, g):
        lap = laplacian(g)
        assert np.abs(lap.sum(axis=1)).max() <= 1e-14 * max(1.0, g.out_degree.max())
        assert np.abs(lap.sum(axis=0)).max() <= 1e-12
        assert is_weight_balanced(g, 1e-12)

    def test_column_sums_nonzero_when_unbalanced(self):
        g = build_digraph(3, [(1, 2, 1.0), (2, 3, 1.0), (3, 1, 1.0), (1, 3, 0.5)])
        assert not is_weight_balanced(g, 1e-12)
        assert np.abs(laplacian(g).sum(axis=0)).max() > 1e-12


class TestSpectrum:
    def test_two_node(self):
        assert np.allclose(spectrum(laplacian(two_node())), [0, 2], atol=1e-12)

    def test_cycle(self):
        # eigenvalues of the circulant are 1 - omega^k
        expected = [1 - np.exp(2j * np.pi * k / 3) for k in range(3)]
        assert multiset_distance(spectrum(laplacian(directed_cycle(3))), expected) < 1e-12
        vals = spectrum(laplacian(directed_cycle(3)))
        assert abs(vals[1] - (1.5 - 0.8660254037844386j)) < 1e-12

    def test_demo_against_charpoly(self):
        lap = laplacian(demo_graph())
        assert multiset_distance(spectrum(lap), charpoly_roots(lap)) < 1e-6

    @given(balanced_digraphs(max_n=6))
    def test_charpoly_oracle(self, g):
        lap = laplacian(g)
        assert multiset_distance(spectrum(lap), charpoly_roots(lap)) < 1e-6

    @given(balanced_digraphs(max_n=6))
    def test_simple_zero_and_positive_real_parts(self, g):
        vals = spectrum(laplacian(g))
        assert np.sum(np.abs(vals) < 1e-8) == 1
        rest = vals[np.abs(vals) >= 1e-8]
        assert np.all(rest.real > 0)

    def test_sorted_by_real_part(self):
        vals = spectrum(laplacian(demo_graph()))
        assert np.all(np.diff(vals.real) >= 0)

    def test_size_limit(self):
        with pytest.raises(PreconditionError):
            spectrum(np.zeros((129, 129)))

    def test_non_convergence_reported(self):
        with pytest.raises(ConvergenceError):
            eig.eigvals(np.random.default_rng(0).normal(size=(6, 6)), max_iter=0)

    @pytest.mark.parametrize("n", [7, 20, 64, 128])
    def test_dense_random_matches_lapack(self, n):
        a = np.random.default_rng(n).normal(size=(n, n))
        mine = np.sort_complex(eig.eigvals(a))
        ref = np.linalg.eigvals(a)
        worst = max(np.min(np.abs(ref - v)) for v in mine)
        assert worst < 1e-8


class TestStepsize:
    def test_two_node(self):
        sb = stepsize_bound(two_node())
        assert sb.delta_bar == pytest.approx(1.0, abs=1e-12)
        assert sb.alg2_range == pytest.approx((0.0, 1.0))

    def test_cycle(self):
        # 2 * 1.5 / (2.25 + 0.75) = 1
        assert stepsize_bound(directed_cycle(3)).delta_bar == pytest.approx(1.0, abs=1e-12)

    @given(balanced_digraphs(), st.floats(0.1, 10.0))
    def test_scaling(self, g, c):
        # defective eigenvalues (Jordan blocks) are only resolved to ~sqrt(eps)
        assert stepsize_bound(g.scaled(c)).delta_bar == pytest.approx(stepsize_bound(g).delta_bar / c, rel=1e-7)

    @given(balanced_digraphs(max_n=6))
    def test_stability_flips_at_bound(self, g):
        db = stepsize_bound(g).delta_bar
        assert disagreement_radius_np(g.weights, 0.99 * db) < 1.0
        assert disagreement_radius_np(g.weights, 1.01 * db) >= 1.0
        assert disagreement_radius(g, 0.99 * db) < 1.0

    def test_preconditions(self):
        with pytest.raises(PreconditionError, match="strongly connected"):
            stepsize_bound(build_digraph(2, [(1, 2, 1)]))
        with pytest.raises(PreconditionError, match="weight-balanced"):
            stepsize_bound(build_digraph(3, [(1, 2, 1.0), (2, 3, 1.0), (3, 1, 1.0), (1, 3, 0.5)]))

    def test_alg2_range_capped_at_two(self):
        sb = stepsize_bound(two_node().scaled(0.25))
        assert sb.delta_bar == pytest.approx(4.0)
        assert sb.alg2_range[1] == 2.0


def test_demo_graph_privacy_pattern():
    g = demo_graph()
    n5 = g.out_neighbors(5)
    for i in (1, 3):
        assert g.out_neighbors(i) - n5 - {5}
    assert 2 not in n5
    assert g.out_neighbors(4) <= n5 | {5}
    assert json.loads(json.dumps(g.to_dict()))["n"] == 5
