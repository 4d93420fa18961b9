"""Trajectory simulation and Monte Carlo ensembles.

Per-run randomness comes from a counter-based Philox stream keyed by the
run's seed, pre-drawn as one uniform per period, so ensembles reduce
deterministically by run index whatever the thread count.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import kernel
from .agent import (AgentPolicy, GridValueIteration, Myopic, ThresholdLLR,
                    current_action_scores, threshold_policy_for)
from .model import Instance, MixtureLag, PointLag


@dataclass(eq=False)
class Trajectory:
    """One simulated run: per-period records plus the end-of-run belief.

    ``posterior_true[t-1]`` and ``llr_track`` hold the belief *entering*
    period t (the one the agent acts on); ``final_posterior_true`` is the
    posterior after the last update.  ``llr_track[:, h]`` is the log ratio
    of hypothesis h against the reference hypothesis, sampled every
    ``llr_stride`` periods.
    """

    actions: np.ndarray
    outcomes: np.ndarray
    posterior_true: np.ndarray
    llr_track: np.ndarray
    llr_stride: int
    llr_reference: int
    final_log_weights: np.ndarray
    final_posterior_true: float
    seed: int

    @property
    def periods(self) -> int:
        return self.actions.size


@dataclass(eq=False)
class RunStats:
    """Aggregates of one trajectory (switches, return times, tail events)."""

    seed: int
    freq_optimal: float
    freq_optimal_tail: float
    n_switch_01: int
    n_switch_10: int
    tau0_samples: np.ndarray
    tau1_samples: np.ndarray
    censored_run_action: int
    censored_run_length: int
    s0: int
    s1: int
    event_eps_hit: bool
    min_posterior_true: float
    max_posterior_true: float
    final_posterior_true: float

    def mean_tau0(self) -> float:
        return float(self.tau0_samples.mean()) if self.tau0_samples.size else math.nan

    def mean_tau1(self) -> float:
        return float(self.tau1_samples.mean()) if self.tau1_samples.size else math.nan

    def var_tau0(self) -> float:
        return float(self.tau0_samples.var()) if self.tau0_samples.size else math.nan

    def var_tau1(self) -> float:
        return float(self.tau1_samples.var()) if self.tau1_samples.size else math.nan


def _resolve_policy(instance: Instance, policy: AgentPolicy):
    """Map a policy onto kernel arguments (mode + score matrix/threshold)."""
    n_hyp = instance.n_hypotheses()
    dummy_scores = np.zeros((n_hyp, instance.n_actions))
    if isinstance(policy, Myopic):
        return (_kernels.POLICY_MYOPIC, current_action_scores(instance),
                0, 0, 0.0, 0, 0)
    if isinstance(policy, GridValueIteration):
        if n_hyp != 2:
            raise ValueError("grid value iteration needs a two-hypothesis "
                             "instance")
        policy = threshold_policy_for(instance, 0, 1, policy)
    if isinstance(policy, ThresholdLLR):
        if instance.n_actions != 2:
            raise ValueError("threshold policies need two actions")
        if not (policy.hyp_i < n_hyp and policy.hyp_j < n_hyp):
            raise ValueError("threshold hypothesis index out of range")
        return (_kernels.POLICY_THRESHOLD, dummy_scores,
                policy.hyp_i, policy.hyp_j, policy.l_star,
                policy.prefer_low, 1 - policy.prefer_low)
    raise TypeError(f"unknown policy {policy!r}")


def _lag_kernel_args(instance: Instance):
    tl = instance.true_lag
    if isinstance(tl, PointLag):
        true_mode, true_k, true_beta = _kernels.LAG_POINT, tl.k, np.zeros(1)
    else:
        true_mode, true_k, true_beta = _kernels.LAG_MIXTURE, 0, tl.beta
    al = instance.agent_lag
    if isinstance(al, MixtureLag):
        agent_mode, agent_beta = _kernels.LAG_MIXTURE, al.beta
    else:
        agent_mode, agent_beta = _kernels.LAG_POINT, np.zeros(1)
    agent_lags = instance.hypothesis_lags()
    return true_mode, true_k, true_beta, agent_mode, agent_lags, agent_beta


def run_trajectory(instance: Instance, policy: AgentPolicy, horizon: int,
                   seed: int, llr_stride: int = 1,
                   llr_reference: int = 0) -> Trajectory:
    """Simulate ``horizon`` periods: act, draw the outcome under the true
    lag, update the belief under the agent's lag.  Deterministic in ``seed``.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if llr_stride < 0:
        raise ValueError("llr_stride must be >= 0 (0 disables the track)")
    if not 0 <= llr_reference < instance.n_hypotheses():
        raise ValueError("llr_reference must index a hypothesis")
    pol = _resolve_policy(instance, policy)
    lags = _lag_kernel_args(instance)
    hyp_probs = instance.hypothesis_tensor()
    true_probs = instance.true_state.probs
    n_hyp = instance.n_hypotheses()
    with np.errstate(divide="ignore"):
        logw = np.log(instance.hypothesis_prior())
    true_mask = instance.true_hypothesis_mask()
    pre = np.array(instance.pre_history, dtype=np.int64)
    u = np.random.Generator(np.random.Philox(seed)).random(horizon)
    actions = np.empty(horizon, dtype=np.int64)
    outcomes = np.empty(horizon, dtype=np.int64)
    post_true = np.empty(horizon, dtype=np.float64)
    n_rec = (horizon + llr_stride - 1) // llr_stride if llr_stride > 0 else 0
    llr_rec = np.empty((n_rec, n_hyp), dtype=np.float64)
    status, t_err = kernel("traj")(
        hyp_probs, true_probs,
        lags[0], lags[1], lags[2], lags[3], lags[4], lags[5],
        pol[0], pol[1], pol[2], pol[3], pol[4], pol[5], pol[6],
        logw, true_mask, pre, u,
        actions, outcomes, post_true, llr_rec, llr_stride, llr_reference,
    )
    if status == _kernels.STATUS_ALL_ZERO:
        raise ValueError(
            f"all hypotheses hit zero likelihood at period {t_err} "
            "(instance is not regular)")
    final_post = float(np.exp(logw[true_mask == 1]).sum())
    return Trajectory(
        actions=actions, outcomes=outcomes, posterior_true=post_true,
        llr_track=llr_rec, llr_stride=llr_stride,
        llr_reference=llr_reference, final_log_weights=logw,
        final_posterior_true=final_post, seed=seed,
    )


def run_lengths(actions: np.ndarray):
    """Lengths of maximal constant-action runs, as (action, length) arrays."""
    n = actions.size
    if n == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    change = np.nonzero(actions[1:] != actions[:-1])[0]
    starts = np.concatenate(([0], change + 1))
    ends = np.concatenate((change + 1, [n]))
    return actions[starts], (ends - starts).astype(np.int64)


def collect_stats(trajectory: Trajectory, instance: Instance, eps: float,
                  tail_fraction: float) -> RunStats:
    """Reduce a trajectory to its switch/return-time/event statistics.

    The final run has not been terminated by a switch, so it is censored
    from the return-time samples and reported separately.  The tail event
    requires posterior_true > 1 - eps on every period of the final
    ``tail_fraction`` of the horizon.
    """
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must lie in (0, 1]")
    a = trajectory.actions
    T = a.size
    a_star = instance.optimal_action()
    freq = float((a == a_star).mean())
    tail_start = T - max(1, int(math.floor(tail_fraction * T)))
    freq_tail = float((a[tail_start:] == a_star).mean())
    pairs0 = int(((a[1:] == 0) & (a[:-1] == 0)).sum())
    pairs1 = int(((a[1:] == 1) & (a[:-1] == 1)).sum())
    n01 = int(((a[:-1] == 0) & (a[1:] == 1)).sum())
    n10 = int(((a[:-1] == 1) & (a[1:] == 0)).sum())
    run_acts, run_lens = run_lengths(a)
    cens_action = int(run_acts[-1])
    cens_len = int(run_lens[-1])
    run_acts, run_lens = run_acts[:-1], run_lens[:-1]
    tau0 = run_lens[run_acts == 0]
    tau1 = run_lens[run_acts == 1]
    post = trajectory.posterior_true
    event = bool((post[tail_start:] > 1.0 - eps).all())
    return RunStats(
        seed=trajectory.seed,
        freq_optimal=freq,
        freq_optimal_tail=freq_tail,
        n_switch_01=n01,
        n_switch_10=n10,
        tau0_samples=tau0,
        tau1_samples=tau1,
        censored_run_action=cens_action,
        censored_run_length=cens_len,
        s0=pairs0,
        s1=pairs1,
        event_eps_hit=event,
        min_posterior_true=float(post.min()),
        max_posterior_true=float(post.max()),
        final_posterior_true=trajectory.final_posterior_true,
    )


@dataclass(eq=False)
class TauSummary:
    mean: float
    var: float
    n_samples: int
    n_censored: int
    histogram: list  # [[length, count], ...] sorted by length


def _tau_summary(samples_per_run, censored_count) -> TauSummary:
    if samples_per_run:
        pooled = np.concatenate(samples_per_run)
    else:
        pooled = np.empty(0, np.int64)
    if pooled.size:
        vals, counts = np.unique(pooled, return_counts=True)
        hist = [[int(v), int(c)] for v, c in zip(vals, counts)]
        return TauSummary(float(pooled.mean()), float(pooled.var()),
                          int(pooled.size), censored_count, hist)
    return TauSummary(math.nan, math.nan, 0, censored_count, [])


@dataclass(eq=False)
class MonteCarloSummary:
    runs: list
    n_runs: int
    horizon: int
    base_seed: int
    eps: float
    tail_fraction: float
    mean_freq_optimal: float
    stderr_freq_optimal: float
    mean_freq_optimal_tail: float
    stderr_freq_optimal_tail: float
    mean_switches: float
    tau0: TauSummary
    tau1: TauSummary
    event_eps_frac: float
    mean_min_posterior_true: float
    mean_max_posterior_true: float
    mean_final_posterior_true: float

    def to_dict(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "horizon": self.horizon,
            "base_seed": self.base_seed,
            "eps": self.eps,
            "tail_fraction": self.tail_fraction,
            "freq_optimal": {"mean": self.mean_freq_optimal,
                             "stderr": self.stderr_freq_optimal},
            "freq_optimal_tail": {"mean": self.mean_freq_optimal_tail,
                                  "stderr": self.stderr_freq_optimal_tail},
            "mean_switches": self.mean_switches,
            "tau0": {"mean": self.tau0.mean, "var": self.tau0.var,
                     "n_samples": self.tau0.n_samples,
                     "n_censored": self.tau0.n_censored,
                     "histogram": self.tau0.histogram},
            "tau1": {"mean": self.tau1.mean, "var": self.tau1.var,
                     "n_samples": self.tau1.n_samples,
                     "n_censored": self.tau1.n_censored,
                     "histogram": self.tau1.histogram},
            "event_eps_frac": self.event_eps_frac,
            "mean_min_posterior_true": self.mean_min_posterior_true,
            "mean_max_posterior_true": self.mean_max_posterior_true,
            "mean_final_posterior_true": self.mean_final_posterior_true,
        }


def _mean_stderr(x: np.ndarray):
    m = float(x.mean())
    if x.size < 2:
        return m, 0.0
    return m, float(x.std(ddof=1) / math.sqrt(x.size))


def monte_carlo(instance: Instance, policy: AgentPolicy, horizon: int,
                n_runs: int, base_seed: int, eps: float = 0.05,
                tail_fraction: float = 0.5, threads: int = 1,
                llr_stride: int = 0) -> MonteCarloSummary:
    """Run ``n_runs`` independent trajectories (seeds base_seed + i) and
    aggregate.  The reduction is ordered by run index, so the summary is
    identical for any ``threads`` setting."""
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")

    def one(i: int) -> RunStats:
        traj = run_trajectory(instance, policy, horizon, base_seed + i,
                              llr_stride=llr_stride)
        return collect_stats(traj, instance, eps, tail_fraction)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            runs = list(ex.map(one, range(n_runs)))
    else:
        runs = [one(i) for i in range(n_runs)]

    freq = np.array([r.freq_optimal for r in runs])
    freq_tail = np.array([r.freq_optimal_tail for r in runs])
    switches = np.array([r.n_switch_01 + r.n_switch_10 for r in runs],
                        dtype=np.float64)
    mf, sf = _mean_stderr(freq)
    mft, sft = _mean_stderr(freq_tail)
    tau0 = _tau_summary([r.tau0_samples for r in runs],
                        sum(1 for r in runs if r.censored_run_action == 0))
    tau1 = _tau_summary([r.tau1_samples for r in runs],
                        sum(1 for r in runs if r.censored_run_action == 1))
    return MonteCarloSummary(
        runs=runs,
        n_runs=n_runs,
        horizon=horizon,
        base_seed=base_seed,
        eps=eps,
        tail_fraction=tail_fraction,
        mean_freq_optimal=mf,
        stderr_freq_optimal=sf,
        mean_freq_optimal_tail=mft,
        stderr_freq_optimal_tail=sft,
        mean_switches=float(switches.mean()),
        tau0=tau0,
        tau1=tau1,
        event_eps_frac=float(np.mean([r.event_eps_hit for r in runs])),
        mean_min_posterior_true=float(np.mean([r.min_posterior_true
                                               for r in runs])),
        mean_max_posterior_true=float(np.mean([r.max_posterior_true
                                               for r in runs])),
        mean_final_posterior_true=float(np.mean([r.final_posterior_true
                                                 for r in runs])),
    )
