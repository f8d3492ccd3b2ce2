import numpy as np
import pytest
from scipy.linalg import expm

from cldmd import systems as S
from cldmd.data import LinearGain
from cldmd.exceptions import DivergenceError, InvalidArgumentError

# Two-link oracles (sympy, exact rationals): M(0)^-1 (1, 0) and
# M(0)^-1 (-(5.3 + 8.45 tanh 1), 0).
QDD_UNIT_TORQUE = [0.33577282569964092865, -0.75034947783899350382]
QDD_FRICTION = [-3.9404521302626185616, 8.8057042502807496427]
# expm((A + BK) * 1) @ (1, 0) for the linear test system, K = (-1, -1).
LINEAR_X1 = [0.52692562757323151090, -0.47713855920536756792]


def duffing_energy(x):
    return x[..., 1] ** 2 / 2 - x[..., 0] ** 2 / 2 + x[..., 0] ** 4 / 4


class TestDuffing:
    def test_origin(self):
        np.testing.assert_array_equal(S.duffing_rhs(np.zeros(2), np.zeros(1)), [0, 0])

    def test_drift_equilibrium(self):
        np.testing.assert_array_equal(S.duffing_rhs(np.array([1.0, 0.0]), np.zeros(1)), [0, 0])

    def test_input(self):
        np.testing.assert_array_equal(S.duffing_rhs(np.array([0.0, 1.0]), np.ones(1)), [1, 2])

    def test_batched(self, rng):
        X, U = rng.standard_normal((5, 2)), rng.standard_normal((5, 1))
        out = S.duffing_rhs(X, U)
        for i in range(5):
            np.testing.assert_array_equal(out[i], S.duffing_rhs(X[i], U[i]))


class TestTwoLink:
    p = S.TwoLinkParams()

    def test_origin(self):
        np.testing.assert_array_equal(S.twolink_rhs(np.zeros(4), np.zeros(2)), np.zeros(4))

    def test_inertia_at_zero(self):
        np.testing.assert_allclose(self.p.inertia(0.0), [[3.957, 0.438], [0.438, 0.196]], rtol=1e-14)

    def test_unit_torque(self):
        out = S.twolink_rhs(np.zeros(4), np.array([1.0, 0.0]))
        np.testing.assert_allclose(out[:2], 0)
        np.testing.assert_allclose(out[2:], QDD_UNIT_TORQUE, rtol=1e-13)

    def test_friction_sign(self):
        out = S.twolink_rhs(np.array([0.0, 0.0, 1.0, 0.0]), np.zeros(2))
        np.testing.assert_allclose(out[:2], [1, 0])
        np.testing.assert_allclose(out[2:], QDD_FRICTION, rtol=1e-13)

    def test_inertia_positive_definite_sweep(self):
        q2 = np.linspace(-np.pi, np.pi, 1000)
        mins = [np.linalg.eigvalsh(self.p.inertia(q)).min() for q in q2]
        assert min(mins) > 0

    def test_singular_inertia(self):
        bad = S.TwoLinkParams(p1=0.0, p2=0.0, p3=0.0)
        with pytest.raises(Exception):
            S.twolink_rhs(np.zeros(4), np.zeros(2), bad)


class TestSignals:
    def test_zero(self):
        np.testing.assert_array_equal(S.eval_signal(S.ZeroSignal(2), 3.0), [0, 0])

    def test_quarter_period(self):
        sig = S.SumOfSinusoids([1.0], [2 * np.pi], [0.0])
        assert abs(S.eval_signal(sig, 0.25)[0] - 1.0) <= 1e-15

    def test_piecewise(self):
        sig = S.PiecewiseConstant([[1.0], [-1.0]], 0.5)
        np.testing.assert_array_equal(S.eval_signal(sig, 0.75), [-1])
        np.testing.assert_array_equal(S.eval_signal(sig, 10.0), [-1])

    def test_negative_time(self):
        with pytest.raises(InvalidArgumentError):
            S.eval_signal(S.ZeroSignal(1), -0.1)

    def test_random_reproducible(self):
        a, b = S.random_sinusoids(1, 0, 5), S.random_sinusoids(1, 0, 5)
        np.testing.assert_array_equal(a.amplitudes, b.amplitudes)
        c = S.random_sinusoids(1, 0, 6)
        assert not np.array_equal(a.amplitudes, c.amplitudes)

    def test_random_ranges(self):
        for i in range(50):
            s = S.random_sinusoids(2, 3, i)
            assert np.all(np.abs(s.amplitudes) <= 1)
            f = s.frequencies / (2 * np.pi)
            assert np.all((f >= 0.5) & (f <= 2.5))


class TestSimulation:
    def test_zero_equilibrium(self):
        tr = S.simulate_openloop(S.duffing_rhs, [0.0, 0.0], S.ZeroSignal(1), 1.0, 20, 1e-3)
        assert np.all(tr.states == 0) and tr.n_samples == 21

    def test_drift_equilibrium(self):
        tr = S.simulate_openloop(S.duffing_rhs, [1.0, 0.0], S.ZeroSignal(1), 1.0, 20, 1e-3)
        np.testing.assert_array_equal(tr.states, np.tile([1.0, 0.0], (21, 1)))

    def test_step_refinement(self):
        coarse = S.simulate_openloop(S.duffing_rhs, [0.1, 0.0], S.ZeroSignal(1), 1.0, 20, 1e-3)
        fine = S.simulate_openloop(S.duffing_rhs, [0.1, 0.0], S.ZeroSignal(1), 1.0, 20, 1e-4)
        assert np.abs(coarse.states - fine.states).max() <= 1e-8

    def test_step_must_divide(self):
        with pytest.raises(InvalidArgumentError):
            S.simulate_openloop(S.duffing_rhs, [0, 0], S.ZeroSignal(1), 1.0, 20, 0.003)

    def test_controls_recorded(self):
        sig = S.random_sinusoids(1, 0, 0)
        tr = S.simulate_openloop(S.duffing_rhs, [0.5, 0.0], sig, 1.0, 20, 1e-3)
        expected = np.array([sig(t) for t in tr.times])
        np.testing.assert_allclose(tr.controls, expected, rtol=0, atol=1e-15)

    def test_batch_matches_single(self):
        X0 = S.grid_initial_conditions(3, 1.0, 2)
        sigs = [S.random_sinusoids(1, 0, i) for i in range(len(X0))]
        batch = S.simulate_openloop_batch(S.duffing_rhs, X0, sigs, 1.0, 20, 1e-3)
        for x0, sig, tr in zip(X0, sigs, batch):
            single = S.simulate_openloop(S.duffing_rhs, x0, sig, 1.0, 20, 1e-3)
            np.testing.assert_allclose(tr.states, single.states, rtol=0, atol=1e-14)

    def test_batch_mixed_signals(self):
        sigs = [S.ZeroSignal(1), S.PiecewiseConstant([[1.0]], 1.0)]
        a, b = S.simulate_openloop_batch(S.duffing_rhs, [[1.0, 0.0], [0.0, 0.0]], sigs, 0.5, 20, 1e-3)
        assert np.all(a.states == [1.0, 0.0]) and np.all(b.controls == 1.0)

    def test_zero_law_matches_zero_signal(self):
        law = LinearGain(np.zeros((1, 2)))
        a = S.simulate_closedloop(S.duffing_rhs, [0.3, -0.2], law, 1.0, 20, 1e-3)
        b = S.simulate_openloop(S.duffing_rhs, [0.3, -0.2], S.ZeroSignal(1), 1.0, 20, 1e-3)
        np.testing.assert_array_equal(a.states, b.states)

    def test_linear_closed_loop_expm(self):
        sysm = S.linear_system()
        K = np.array([[-1.0, -1.0]])
        tr = S.simulate_closedloop(sysm.rhs, [1.0, 0.0], LinearGain(K), 1.0, 20, 1e-3)
        Acl = np.array(S.LINEAR_A) + np.array(S.LINEAR_B) @ K
        ref = np.array([expm(Acl * t) @ [1.0, 0.0] for t in tr.times])
        assert np.abs(tr.states - ref).max() <= 1e-8
        np.testing.assert_allclose(tr.states[-1], LINEAR_X1, atol=1e-8)

    def test_duffing_closed_loop_decays(self):
        law = LinearGain([[-2.0, -2.0]])
        tr = S.simulate_closedloop(S.duffing_rhs, [1.0, 1.0], law, 5.0, 20, 1e-3)
        norms = np.linalg.norm(tr.states, axis=1)
        assert np.all(np.isfinite(norms)) and norms[-1] < 0.1 * norms[0]

    def test_closed_loop_replay(self):
        law = LinearGain([[-2.0, -2.0]])
        # Record at twice the replay step so every RK4 stage time of the
        # replay falls on a recorded input sample.
        cl = S.simulate_closedloop(S.duffing_rhs, [1.0, 1.0], law, 1.0, 2000, 5e-4)
        t, u = cl.times, cl.controls[:, 0]

        def replay(tt):
            return np.atleast_1d(np.interp(tt, t, u))

        ol = S.simulate_openloop(S.duffing_rhs, [1.0, 1.0], replay, 1.0, 1000, 1e-3)
        assert np.abs(ol.states - cl.states[::2]).max() <= 1e-8

    def test_divergence(self):
        rhs = S.linear_rhs(np.array([[40.0]]), np.array([[0.0]]))
        with pytest.raises(DivergenceError) as info:
            S.simulate_openloop(rhs, [1.0], S.ZeroSignal(1), 1.0, 20, 1e-3)
        assert info.value.last_state is not None and np.all(np.isfinite(info.value.last_state))

    def test_batch_divergence_lists_failures(self):
        rhs = S.linear_rhs(np.array([[40.0]]), np.array([[0.0]]))
        with pytest.raises(DivergenceError) as info:
            S.simulate_openloop_batch(rhs, [[0.0], [1.0]], [S.ZeroSignal(1)] * 2, 1.0, 20, 1e-3)
        assert [f[0] for f in info.value.failures] == [1]

    @pytest.mark.parametrize("name,x0,h", [
        ("duffing", [1.0, 1.0], 1e-2),
        ("twolink", [0.4, -0.3, 0.2, -0.1], 2.5e-3),
    ])
    def test_rk4_order(self, name, x0, h):
        sysm = S.get_system(name)
        law = LinearGain(np.full((sysm.control_dim, sysm.state_dim), -0.5))

        def end(step):
            return S.simulate_closedloop(sysm.rhs, x0, law, 0.2, 5, step).states[-1]

        ref = end(h / 64)
        e1 = np.linalg.norm(end(h) - ref)
        e2 = np.linalg.norm(end(h / 2) - ref)
        assert 15.0 <= e1 / e2 <= 17.0

    def test_energy_conservation(self):
        tr = S.simulate_openloop(S.duffing_rhs, [1.2, 0.3], S.ZeroSignal(1), 1.0, 20, 1e-4)
        H = duffing_energy(tr.states)
        assert np.abs(H - H[0]).max() <= 1e-6


class TestInitialConditions:
    def test_grid_1d(self):
        np.testing.assert_array_equal(S.grid_initial_conditions(2, 1.0, 1).ravel(), [-1, 1])

    def test_grid_paper(self):
        g = S.grid_initial_conditions(15, 1.5, 2)
        assert g.shape == (225, 2)
        for corner in ([-1.5, -1.5], [-1.5, 1.5], [1.5, -1.5], [1.5, 1.5]):
            assert np.any(np.all(g == corner, axis=1))

    def test_grid_odd_contains_origin(self):
        g = S.grid_initial_conditions(3, 1.0, 2)
        assert len(g) == 9 and np.any(np.all(g == 0, axis=1))

    def test_grid_too_small(self):
        with pytest.raises(InvalidArgumentError):
            S.grid_initial_conditions(1, 1.0, 2)

    def test_halton_first(self):
        np.testing.assert_allclose(S.halton_points(1, 1, 0.5), [[0.0]], atol=1e-15)

    def test_halton_second(self):
        np.testing.assert_allclose(S.halton_points(2, 2, 0.5)[1], [-0.25, 1 / 6], atol=1e-15)

    def test_halton_paper(self):
        h = S.halton_points(100, 4, 0.5)
        assert h.shape == (100, 4) and np.all(np.abs(h) <= 0.5)

    def test_halton_radical_inverse(self):
        # Independent radical-inverse implementation.
        def radical(i, b):
            r, f = 0.0, 1.0 / b
            while i:
                r += f * (i % b)
                i //= b
                f /= b
            return r

        h = S.halton_points(30, 3, 0.5)
        ref = np.array([[radical(i, b) - 0.5 for b in (2, 3, 5)] for i in range(1, 31)])
        np.testing.assert_allclose(h, ref, atol=1e-15)

    def test_halton_dim_limit(self):
        with pytest.raises(InvalidArgumentError):
            S.halton_points(3, 7, 0.5)


def test_get_system_unknown():
    with pytest.raises(InvalidArgumentError):
        S.get_system("pendulum")


def test_closed_loop_field(rng):
    sysm = S.duffing_system()
    law = LinearGain([[-2.0, -2.0]])
    X = rng.standard_normal((4, 2))
    F = sysm.closed_loop_field(law, X)
    mu = -2 * X[:, 0] - 2 * X[:, 1]
    np.testing.assert_allclose(F[:, 1], X[:, 0] - X[:, 0] ** 3 + (2 + np.sin(X[:, 0])) * mu)
