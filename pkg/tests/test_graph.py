import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpconsensus.graph import (
    BUILTIN_EDGES,
    ConvergenceError,
    Topology,
    TopologyError,
    algebraic_connectivity,
    builtin_topology,
    format_edge_list,
    is_connected,
    laplacian,
    load_topology,
    parse_edge_list,
    read_edge_list,
    resolve_topology,
    symmetric_eigendecomposition,
)

from conftest import random_connected_topology

K6_EDGES = [(k, j) for k in range(1, 7) for j in range(k + 1, 7)]


class TestLoadTopology:
    def test_p2(self):
        t = load_topology(2, [(1, 2)])
        assert t.node_count == 2
        assert t.edges == ((1, 2),)

    def test_cycle6(self):
        t = load_topology(6, [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 1)])
        assert len(t.edges) == 6
        assert (1, 6) in t.edges

    def test_disconnected(self):
        with pytest.raises(TopologyError, match="disconnected"):
            load_topology(4, [(1, 2), (3, 4)])

    def test_dedup_and_normalize(self):
        t = load_topology(3, [(2, 1), (1, 2), (3, 2)])
        assert t.edges == ((1, 2), (2, 3))

    def test_self_loop(self):
        with pytest.raises(TopologyError, match="self-loop"):
            load_topology(3, [(1, 2), (2, 3), (2, 2)])

    @pytest.mark.parametrize("edge", [(0, 1), (1, 4)])
    def test_out_of_range(self, edge):
        with pytest.raises(TopologyError, match="outside"):
            load_topology(3, [(1, 2), (2, 3), edge])

    def test_component_named(self):
        with pytest.raises(TopologyError, match=r"\{3,4\}"):
            load_topology(4, [(1, 2), (3, 4)])


class TestIsConnected:
    def test_k6(self):
        assert is_connected(Topology(6, tuple(K6_EDGES)))

    def test_two_components(self):
        assert not is_connected(Topology(4, ((1, 2), (3, 4))))

    def test_path6(self):
        assert is_connected(Topology(6, tuple((k, k + 1) for k in range(1, 6))))


class TestEdgeListFormat:
    def test_parse(self):
        text = "# a comment\n3\n1 2\n\n# another\n2 3\n"
        t = parse_edge_list(text)
        assert t.node_count == 3 and t.edges == ((1, 2), (2, 3))

    def test_round_trip(self, tmp_path):
        for name in BUILTIN_EDGES:
            t = builtin_topology(name)
            path = tmp_path / f"{name}.txt"
            path.write_text(format_edge_list(t))
            back = read_edge_list(path)
            assert back == t
            assert resolve_topology(str(path)) == t

    @pytest.mark.parametrize(
        "text, match",
        [("", "empty"), ("x\n1 2\n", "node count"), ("2\n1 2 3\n", "expected"), ("2\n1 a\n", "non-integer")],
    )
    def test_bad(self, text, match):
        with pytest.raises(TopologyError, match=match):
            parse_edge_list(text)

    def test_unknown_source(self):
        with pytest.raises(TopologyError):
            resolve_topology("no-such-graph")


class TestLaplacian:
    def test_p2_unit(self):
        np.testing.assert_array_equal(laplacian(load_topology(2, [(1, 2)]), 1.0), [[1, -1], [-1, 1]])

    def test_p2_scaled(self):
        np.testing.assert_array_equal(laplacian(load_topology(2, [(1, 2)]), 3.0), [[3, -3], [-3, 3]])

    def test_triangle(self):
        lap = laplacian(load_topology(3, [(1, 2), (2, 3), (1, 3)]))
        np.testing.assert_array_equal(np.diag(lap), [2, 2, 2])
        assert np.all(lap[~np.eye(3, dtype=bool)] == -1)

    def test_non_edge_weights_ignored(self):
        t = builtin_topology("path6")
        w = np.arange(1.0, 16.0)
        lap = laplacian(t, w)
        pairs = t.all_pairs()
        for p, (k, j) in enumerate(pairs):
            expected = -w[p] if t.has_edge(k, j) else 0.0
            assert lap[k - 1, j - 1] == expected

    def test_weight_forms_agree(self):
        t = builtin_topology("star6")
        edge_w = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        mapping = {e: w for e, w in zip(t.edges, edge_w)}
        np.testing.assert_array_equal(laplacian(t, edge_w), laplacian(t, mapping))

    def test_negative_weight(self):
        with pytest.raises(ValueError, match="negative"):
            laplacian(load_topology(2, [(1, 2)]), -1.0)

    def test_random_invariants(self, rng):
        for _ in range(50):
            m = int(rng.integers(2, 13))
            t = random_connected_topology(rng, m)
            lap = laplacian(t, rng.uniform(0.1, 5.0, m * (m - 1) // 2))
            assert np.max(np.abs(lap.sum(axis=1))) < 1e-12
            assert np.max(np.abs(lap - lap.T)) == 0.0
            assert np.all(lap[~np.eye(m, dtype=bool)] <= 0)


class TestEigendecomposition:
    def test_identity(self):
        spec = symmetric_eigendecomposition(np.eye(3))
        np.testing.assert_allclose(spec.eigenvalues, [1, 1, 1])

    def test_2x2(self):
        # roots of lambda^2 - 4 lambda + 3
        spec = symmetric_eigendecomposition([[2.0, 1.0], [1.0, 2.0]])
        np.testing.assert_allclose(spec.eigenvalues, [1.0, 3.0], atol=1e-14)

    def test_p2_laplacian(self):
        spec = symmetric_eigendecomposition([[1.0, -1.0], [-1.0, 1.0]])
        np.testing.assert_allclose(spec.eigenvalues, [0.0, 2.0], atol=1e-14)
        v = spec.eigenvectors
        s = 1 / np.sqrt(2)
        np.testing.assert_allclose(np.abs(v[:, 0]), [s, s], atol=1e-14)
        np.testing.assert_allclose(np.abs(v[:, 1]), [s, s], atol=1e-14)
        assert v[0, 1] * v[1, 1] < 0

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            symmetric_eigendecomposition([[1.0, 2.0], [0.0, 1.0]])

    def test_sweep_cap(self, rng):
        a = rng.normal(size=(8, 8))
        with pytest.raises(ConvergenceError):
            symmetric_eigendecomposition(a + a.T, max_sweeps=1)

    @pytest.mark.parametrize("m", [1, 2, 5, 16, 32])
    def test_round_trip_random(self, rng, m):
        for _ in range(5):
            a = rng.normal(size=(m, m))
            a = a + a.T
            spec = symmetric_eigendecomposition(a)
            v, lam = spec.eigenvectors, spec.eigenvalues
            assert np.max(np.abs(v @ np.diag(lam) @ v.T - a)) < 1e-10
            assert np.max(np.abs(v.T @ v - np.eye(m))) < 1e-10
            assert np.all(np.diff(lam) >= 0)
            # independent oracle
            np.testing.assert_allclose(lam, np.linalg.eigvalsh(a), atol=1e-10)

    def test_m64(self, rng):
        a = rng.normal(size=(64, 64))
        a = a + a.T
        spec = symmetric_eigendecomposition(a)
        v = spec.eigenvectors
        assert np.max(np.abs(v @ np.diag(spec.eigenvalues) @ v.T - a)) < 1e-10

    def test_connected_laplacian_single_zero(self, rng):
        for _ in range(30):
            m = int(rng.integers(2, 13))
            t = random_connected_topology(rng, m)
            lam = symmetric_eigendecomposition(laplacian(t, rng.uniform(0.5, 3.0, m * (m - 1) // 2))).eigenvalues
            assert np.sum(np.abs(lam) < 1e-9) == 1
            assert np.all(lam[1:] > 0)


class TestAlgebraicConnectivity:
    def test_p2(self):
        assert algebraic_connectivity(load_topology(2, [(1, 2)])) == pytest.approx(2.0, abs=1e-12)

    def test_k6(self):
        # brute force: complete-graph spectrum {0, 6 x5}
        t = load_topology(6, K6_EDGES)
        np.testing.assert_allclose(np.linalg.eigvalsh(laplacian(t)), [0, 6, 6, 6, 6, 6], atol=1e-12)
        assert algebraic_connectivity(t) == pytest.approx(6.0, abs=1e-12)

    def test_c4(self):
        t = load_topology(4, [(1, 2), (2, 3), (3, 4), (4, 1)])
        circulant = sorted(2 - 2 * np.cos(2 * np.pi * k / 4) for k in range(4))
        assert algebraic_connectivity(t) == pytest.approx(circulant[1], abs=1e-12)
        assert circulant[1] == pytest.approx(2.0)

    def test_disconnected_error(self):
        with pytest.raises(TopologyError, match="connected"):
            algebraic_connectivity(Topology(4, ((1, 2), (3, 4))))

    def test_rayleigh_bound(self, rng):
        t = builtin_topology("paper6")
        w = rng.uniform(1.0, 4.0, 15)
        lap = laplacian(t, w)
        lam2 = algebraic_connectivity(t, w)
        for _ in range(100):
            v = rng.normal(size=6)
            v -= v.mean()
            assert v @ lap @ v / (v @ v) >= lam2 - 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_rayleigh_property(m, seed):
    rng = np.random.default_rng(seed)
    t = random_connected_topology(rng, m)
    w = rng.uniform(0.2, 5.0, m * (m - 1) // 2)
    lap = laplacian(t, w)
    lam2 = algebraic_connectivity(t, w)
    v = rng.normal(size=m)
    v -= v.mean()
    if v @ v > 1e-12:
        assert v @ lap @ v / (v @ v) >= lam2 - 1e-9
