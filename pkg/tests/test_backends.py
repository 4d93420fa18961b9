"""The jitted kernels and the interpreted fallback run the same source and
must produce identical streams; ensembles must not depend on thread count."""

import numpy as np

import laglearn as ll
import laglearn.simulate as sim
from laglearn import _kernels
from laglearn._backend import active_backend


def drive_traj(instance, backend, seed, horizon):
    pol = sim._resolve_policy(instance, ll.Myopic())
    lags = sim._lag_kernel_args(instance)
    logw = np.log(instance.hypothesis_prior())
    pre = np.array(instance.pre_history, dtype=np.int64)
    u = np.random.Generator(np.random.Philox(seed)).random(horizon)
    actions = np.empty(horizon, np.int64)
    outcomes = np.empty(horizon, np.int64)
    post = np.empty(horizon)
    llr = np.empty((horizon, instance.n_hypotheses()))
    status, _ = _kernels.kernel("traj", backend)(
        instance.hypothesis_tensor(), instance.true_state.probs,
        lags[0], lags[1], lags[2], lags[3], lags[4], lags[5],
        pol[0], pol[1], pol[2], pol[3], pol[4], pol[5], pol[6],
        logw, instance.true_hypothesis_mask(), pre, u,
        actions, outcomes, post, llr, 1, 0)
    assert status == _kernels.STATUS_OK
    return actions, outcomes, post, llr, logw


def test_active_backend_is_valid():
    assert active_backend() in ("numba", "numpy")


def test_trajectory_kernels_agree_bitwise(fig1_small_eps):
    for seed in (1, 2, 3):
        ref = drive_traj(fig1_small_eps, "numba", seed, 2000)
        alt = drive_traj(fig1_small_eps, "numpy", seed, 2000)
        for a, b in zip(ref, alt):
            np.testing.assert_array_equal(a, b)


def test_trajectory_kernels_agree_with_uncertain_lag(fig1):
    from laglearn.model import Instance, PointLag, UncertainLag
    inst = Instance(states=fig1.states, prior=fig1.prior, true_state_index=2,
                    payoff=fig1.payoff, discount=0.0, true_lag=PointLag(1),
                    agent_lag=UncertainLag((0, 2), np.array([0.5, 0.5])),
                    pre_history=(0, 0))
    ref = drive_traj(inst, "numba", 7, 1500)
    alt = drive_traj(inst, "numpy", 7, 1500)
    for a, b in zip(ref, alt):
        np.testing.assert_array_equal(a, b)


def test_game_kernels_agree_bitwise(symmetric):
    import laglearn.game as game_mod

    def drive(backend, strategy):
        kstar = symmetric.true_lag.k
        thresh = game_mod.acceptance_threshold(symmetric)
        s0 = game_mod._encode_strategy(strategy, kstar)
        logw = np.log(symmetric.prior)
        logw_p = logw.copy()
        pre = np.array(symmetric.pre_history, dtype=np.int64)
        horizon = 2500
        u = np.random.Generator(np.random.Philox(11)).random(horizon)
        acts = np.empty(horizon, np.int64)
        props = np.empty(horizon, np.int64)
        pref = np.empty(horizon, np.int64)
        outs = np.empty(horizon, np.int64)
        llr = np.empty(horizon)
        res = _kernels.kernel("game", backend)(
            symmetric.state_tensor(), symmetric.payoff, 0, kstar, thresh,
            0, 0.0, s0, s0, logw, logw_p, pre, u,
            acts, props, pref, outs, llr)
        return res, acts, props, pref, outs, llr, logw

    for strategy in (game_mod.Mirror(), game_mod.Block(4, 3),
                     game_mod.AlwaysPropose(1)):
        ref = drive("numba", strategy)
        alt = drive("numpy", strategy)
        assert ref[0] == alt[0]
        for a, b in zip(ref[1:], alt[1:]):
            np.testing.assert_array_equal(a, b)


def test_walk_kernels_agree_bitwise():
    rv = ll.FiniteRV([-1.0, 0.5, 2.0], [0.6, 0.3, 0.1])
    cum = np.cumsum(rv.probs)
    u = np.random.Generator(np.random.Philox(0)).random((50, 400))
    c1, f1 = _kernels.kernel("walk", "numba")(u, rv.values, cum, 3.0)
    c2, f2 = _kernels.kernel("walk", "numpy")(u, rv.values, cum, 3.0)
    np.testing.assert_array_equal(c1, c2)
    np.testing.assert_array_equal(f1, f2)


def test_monte_carlo_thread_invariance_end_to_end(fig1_small_eps):
    from laglearn.report import runs_csv_bytes
    cfg = {"probe": 1}
    runs = {}
    for threads in (1, 3):
        s = ll.monte_carlo(fig1_small_eps, ll.Myopic(), 1500, 10,
                           base_seed=21, threads=threads)
        runs[threads] = runs_csv_bytes(s.runs, cfg)
    assert runs[1] == runs[3]
