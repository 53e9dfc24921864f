import numpy as np
import pytest
import scipy.linalg

from gpconsensus import kernels
from gpconsensus.dynamics import (
    IntegrationError,
    ProtocolConfig,
    SystemState,
    control_input,
    default_horizon,
    initial_state,
    rk4_step,
    simulate,
    weight_rate,
)
from gpconsensus.graph import builtin_topology, laplacian, load_topology, symmetric_eigendecomposition

from conftest import X0_6, random_connected_topology

SQRT3 = np.sqrt(3.0)


class TestProtocolConfig:
    def test_gain_flag(self):
        assert ProtocolConfig(2.0, 1.0).gain_condition
        assert not ProtocolConfig(1.0, 1.0).gain_condition

    @pytest.mark.parametrize("kw", [dict(alpha=0, zeta=1), dict(alpha=1, zeta=-1), dict(alpha=1, zeta=1, mode="x")])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ProtocolConfig(**kw)


class TestControlInput:
    def test_consensus_equilibrium(self, paper6):
        u = control_input(paper6, np.full(6, 3.3), np.ones(15), ProtocolConfig(2, 1))
        np.testing.assert_allclose(u, 0.0, atol=1e-12)

    def test_two_agents(self, p2):
        u = control_input(p2, [0.0, 2.0], [1.0], ProtocolConfig(2, 1))
        np.testing.assert_allclose(u, [4.0, -4.0])

    def test_matches_laplacian(self, rng):
        for _ in range(20):
            m = int(rng.integers(2, 10))
            t = random_connected_topology(rng, m)
            x = rng.normal(size=m)
            w = rng.uniform(1, 3, m * (m - 1) // 2)
            cfg = ProtocolConfig(1.7, 0.5)
            u = control_input(t, x, w, cfg)
            np.testing.assert_allclose(u, -1.7 * laplacian(t, w) @ x, atol=1e-12)
            assert abs(u.sum()) < 1e-12
            # vector field kernel agrees with the graph-module definition
            pi, pj, beta = t.pair_arrays()
            y = np.concatenate([x, w, [0.0, 0.0]])
            f = kernels.field_numpy(y, pi, pj, beta, m, 1.7, 0.5, True)
            np.testing.assert_allclose(f[:m], u, atol=1e-12)

    def test_standard_uses_initial_weights(self, paper6, rng):
        x = rng.normal(size=6)
        u = control_input(paper6, x, np.full(15, 7.0), ProtocolConfig(2, 1, "standard"))
        np.testing.assert_allclose(u, -2 * laplacian(paper6) @ x, atol=1e-12)

    def test_dimension_mismatch(self, paper6):
        with pytest.raises(ValueError):
            control_input(paper6, [1.0, 2.0], np.ones(15), ProtocolConfig(2, 1))


class TestWeightRate:
    def test_equal_states(self, p2):
        assert weight_rate(p2, [1.5, 1.5], ProtocolConfig(2, 1))[0] == 0.0

    def test_value(self, p2):
        assert weight_rate(p2, [1.0, 3.0], ProtocolConfig(2, 1))[0] == 8.0

    def test_symmetric(self, p2):
        cfg = ProtocolConfig(2, 1)
        assert weight_rate(p2, [1.0, 3.0], cfg)[0] == weight_rate(p2, [3.0, 1.0], cfg)[0]

    def test_standard_zero(self, paper6):
        np.testing.assert_array_equal(weight_rate(paper6, X0_6, ProtocolConfig(2, 1, "standard")), 0.0)

    def test_all_pairs(self, paper6):
        r = weight_rate(paper6, X0_6, ProtocolConfig(1, 1))
        pairs = paper6.all_pairs()
        for (k, j), v in zip(pairs, r):
            assert v == (X0_6[j - 1] - X0_6[k - 1]) ** 2
        assert np.all(r >= 0)


class TestRK4Step:
    def test_consensus_fixed_point(self, paper6):
        s = initial_state(paper6, np.full(6, 2.0))
        s1 = rk4_step(s, 0.01, paper6, ProtocolConfig(2, 1))
        np.testing.assert_array_equal(s1.x, s.x)
        np.testing.assert_array_equal(s1.w, s.w)
        assert s1.cost_acc == 0.0 and s1.disagreement_acc == 0.0
        assert s1.time == pytest.approx(0.01)

    def test_matches_simulate(self, paper6):
        cfg = ProtocolConfig(2, 1)
        s = initial_state(paper6, X0_6)
        for _ in range(50):
            s = rk4_step(s, 1e-3, paper6, cfg)
        traj = simulate(paper6, X0_6, cfg, horizon=0.05, h=1e-3, stride=50)
        np.testing.assert_allclose(traj.x[-1], s.x, rtol=1e-13, atol=1e-12)
        np.testing.assert_allclose(traj.w[-1], s.w, rtol=1e-13)
        assert traj.cost_acc[-1] == pytest.approx(s.cost_acc, rel=1e-12)

    def test_rejects_bad_step(self, p2):
        with pytest.raises(ValueError):
            rk4_step(initial_state(p2, [0.0, 1.0]), 0.0, p2, ProtocolConfig(1, 1))

    def test_divergence_guard(self, p2):
        with pytest.raises(IntegrationError):
            rk4_step(SystemState(0.0, np.array([0.0, 1e200]), np.array([1e200]), 0, 0), 1.0, p2, ProtocolConfig(1e100, 1))

    def test_order(self, p2):
        cfg = ProtocolConfig(2, 1)

        def final(h):
            tr = simulate(p2, [0.0, 2.0], cfg, horizon=1.0, h=h, stride=10**6)
            return np.concatenate([tr.x[-1], tr.w[-1]])

        ref = final(1e-5)
        ratio = np.max(np.abs(final(2e-3) - ref)) / np.max(np.abs(final(1e-3) - ref))
        assert 12 <= ratio <= 20


class TestSimulate:
    def test_two_agent_oracle(self, p2):
        tr = simulate(p2, [0.0, 2.0], ProtocolConfig(2, 1), horizon=20, h=1e-4, stride=100)
        assert abs(tr.w[-1, 0] - SQRT3) < 1e-5
        assert abs(tr.cost_acc[-1] - (SQRT3 - 1) / 2) < 1e-4
        d = tr.x[:, 1] - tr.x[:, 0]
        assert np.max(np.abs(d**2 + 2 * tr.w[:, 0] ** 2 - 6.0)) < 1e-6

    @pytest.mark.parametrize("mode", ["adaptive", "standard"])
    def test_mean_invariance(self, paper6, mode):
        tr = simulate(paper6, X0_6, ProtocolConfig(2, 1, mode))
        assert np.max(np.abs(tr.x.mean(axis=1) - X0_6.mean())) < 1e-9

    def test_weights_monotone(self, paper6):
        tr = simulate(paper6, X0_6, ProtocolConfig(2, 1))
        assert np.all(np.diff(tr.w, axis=0) >= 0)
        assert np.all(tr.w >= 1.0)
        assert np.all(np.diff(tr.cost_acc) >= 0)
        assert np.all(np.diff(tr.disagreement_acc) >= 0)

    def test_equal_state_weights_stationary(self, paper6):
        tr = simulate(paper6, np.full(6, 4.0), ProtocolConfig(2, 1), horizon=1.0)
        np.testing.assert_array_equal(tr.w, 1.0)
        np.testing.assert_array_equal(tr.x, 4.0)

    def test_standard_matches_matrix_exponential(self, paper6):
        alpha = 1.5
        tr = simulate(paper6, X0_6, ProtocolConfig(alpha, 1, "standard"), horizon=6.0)
        lap = laplacian(paper6)
        spec = symmetric_eigendecomposition(lap)
        v, lam = spec.eigenvectors, spec.eigenvalues
        for t, x in zip(tr.times[::25], tr.x[::25]):
            exact = v @ (np.exp(-alpha * lam * t) * (v.T @ X0_6))
            assert np.max(np.abs(x - exact)) < 1e-6
            # second, independent oracle
            np.testing.assert_allclose(scipy.linalg.expm(-alpha * lap * t) @ X0_6, exact, atol=1e-10)

    def test_sampling(self, p2):
        tr = simulate(p2, [0.0, 1.0], ProtocolConfig(1, 1), horizon=0.105, h=0.01, stride=4)
        np.testing.assert_array_equal(tr.steps, [0, 4, 8, 11])
        assert np.all(np.diff(tr.times) > 0)
        assert tr.horizon == pytest.approx(0.11)

    def test_consensus_under_gain_condition(self, rng):
        for _ in range(5):
            m = int(rng.integers(3, 9))
            t = random_connected_topology(rng, m, p=0.2)
            x0 = rng.uniform(-10, 10, m)
            tr = simulate(t, x0, ProtocolConfig(2, 1))
            assert tr.max_gap()[-1] < 1e-6

    def test_default_horizon_on_grid(self, paper6):
        hz = default_horizon(paper6, 2.0, 1e-3, 10)
        assert hz == pytest.approx(10.0)
        assert default_horizon(paper6, 3.0, 1e-3, 10) == pytest.approx(6.67)

    def test_deterministic(self, paper6):
        a = simulate(paper6, X0_6, ProtocolConfig(2, 1), horizon=1.0)
        b = simulate(paper6, X0_6, ProtocolConfig(2, 1), horizon=1.0)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.w, b.w)

    def test_divergence_aborts(self, p2):
        with pytest.raises(IntegrationError, match="non-finite"):
            simulate(p2, [0.0, 1e3], ProtocolConfig(1e3, 1), horizon=5.0, h=1.0, stride=1)


class TestKernelParity:
    @pytest.mark.parametrize("adaptive", [True, False])
    def test_numba_numpy_agree(self, paper6, adaptive):
        pi, pj, beta = paper6.pair_arrays()
        y0 = np.concatenate([X0_6, np.ones(15), [0.0, 0.0]])
        args = (y0, 1e-3, 2000, 10, pi, pj, beta, 6, 2.0, 1.0, adaptive)
        s1, st1, f1 = kernels.rk4_numba(*args)
        s2, st2, f2 = kernels.rk4_numpy(*args)
        assert f1 == f2 == -1
        np.testing.assert_array_equal(st1, st2)
        np.testing.assert_allclose(s1, s2, rtol=1e-12, atol=1e-12)

    def test_jacobi_agree(self, rng):
        a = rng.normal(size=(9, 9))
        a = a + a.T
        v1, q1, n1, ok1 = kernels.jacobi_numba(a, 1e-13, 100)
        v2, q2, n2, ok2 = kernels.jacobi_numpy(a, 1e-13, 100)
        assert ok1 and ok2 and n1 == n2
        np.testing.assert_allclose(v1, v2, atol=1e-12)
        np.testing.assert_allclose(q1, q2, atol=1e-10)
