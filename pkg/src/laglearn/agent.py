"""Agent decision rules: exact myopic best replies and LLR-threshold
characterizations for two-hypothesis supports, including discounted agents
solved on a belief-MDP grid."""

import math
from dataclasses import dataclass

import numpy as np

from . import bounds
from .model import Belief, Instance, MixtureLag, PointLag


@dataclass(frozen=True)
class Myopic:
    """Maximize the expected current-period payoff under the agent's model."""


@dataclass(frozen=True)
class ThresholdLLR:
    """Two-hypothesis cutoff rule on l = log w[hyp_i] / w[hyp_j].

    Takes ``prefer_low`` when l < l_star and the other binary action when
    l >= l_star (ties resolve to the high branch, matching the myopic
    tie-break toward the lower action index when hyp_i prefers action 0).
    """

    l_star: float
    prefer_low: int = 1
    hyp_i: int = 0
    hyp_j: int = 1

    def __post_init__(self):
        if not math.isfinite(self.l_star):
            raise ValueError("l_star must be finite")
        if self.prefer_low not in (0, 1):
            raise ValueError("prefer_low must be a binary action index")


@dataclass(frozen=True)
class GridValueIteration:
    """Solve the discounted two-hypothesis problem on a uniform LLR grid."""

    grid_size: int
    discount: float
    convergence_tol: float = 1e-10

    def __post_init__(self):
        if self.grid_size < 100:
            raise ValueError("grid_size must be at least 100")
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        if self.convergence_tol <= 0.0:
            raise ValueError("convergence_tol must be positive")


AgentPolicy = Myopic | ThresholdLLR | GridValueIteration


def current_action_scores(instance: Instance) -> np.ndarray:
    """Per-hypothesis expected payoff of each action, weighted by how much
    the hypothesis lets the current action influence the current outcome.

    Hypotheses whose believed lag is k >= 1 contribute action-independent
    terms to the myopic objective, so they carry weight 0 here; mixture
    models contribute through beta[0].
    """
    base = np.stack([s.probs @ instance.payoff for s in instance.states])
    hyp = base[instance.hypothesis_states()]
    if isinstance(instance.agent_lag, PointLag):
        w0 = 1.0 if instance.agent_lag.k == 0 else 0.0
        return hyp * w0
    if isinstance(instance.agent_lag, MixtureLag):
        return hyp * float(instance.agent_lag.beta[0])
    lags = instance.hypothesis_lags()
    return hyp * (lags == 0)[:, None]


def myopic_best_response(belief: Belief, instance: Instance) -> int:
    """argmax_a of the believed expected current payoff; ties break toward
    the lowest action index."""
    scores = current_action_scores(instance)
    totals = belief.posterior() @ scores
    return int(np.argmax(totals))


def myopic_indifference_llr(instance: Instance, i: int, j: int) -> float:
    """The LLR l* = log pi(F_i)/pi(F_j) at which a myopic agent restricted to
    states {i, j} is indifferent between the two actions.

    Solving pi_i g_i + pi_j g_j = 0 with g = u(0) - u(1) gives
    l* = log(-g_j / g_i); the two states must rank the actions oppositely.
    """
    if instance.n_actions != 2:
        raise ValueError("indifference threshold needs exactly two actions")
    ui = instance.states[i].probs @ instance.payoff
    uj = instance.states[j].probs @ instance.payoff
    gi = float(ui[0] - ui[1])
    gj = float(uj[0] - uj[1])
    if gi == 0.0 or gj == 0.0 or (gi > 0.0) == (gj > 0.0):
        raise ValueError("states must rank the two actions oppositely")
    return math.log(-gj / gi)


def _escape_grid_bound(instance: Instance, i: int, j: int,
                       escape_prob: float = 1e-6) -> float:
    """Half-width L of the LLR grid: far enough out that the Wald bound on
    the LLR ever drifting back across the center is below escape_prob."""
    need = math.log(1.0 / escape_prob)
    fi, fj = instance.states[i], instance.states[j]
    worst = 0.0
    max_step = 0.0
    for a in range(instance.n_actions):
        inc = bounds.llr_increment_rv(fi, fi, fj, a, a)
        max_step = max(max_step, abs(inc.min()), abs(inc.max()))
        for rv in (inc.negated(),
                   bounds.llr_increment_rv(fj, fi, fj, a, a)):
            # both have negative mean: KL drifts push l away from the rival
            r = bounds.wald_exponent(rv)
            worst = max(worst, need / r)
    return worst + max_step + 1.0


def _value_iteration(instance: Instance, i: int, j: int,
                     policy: GridValueIteration):
    """Returns (grid, values, greedy_actions, sweep_deltas)."""
    fi, fj = instance.states[i], instance.states[j]
    v = instance.payoff
    half = _escape_grid_bound(instance, i, j)
    grid = np.linspace(-half, half, policy.grid_size)
    pi_i = 1.0 / (1.0 + np.exp(-grid))
    n_a = instance.n_actions
    n_y = instance.n_outcomes
    # predictive outcome probabilities and LLR jumps per (action, outcome)
    pred = np.empty((n_a, grid.size, n_y))
    jump = np.empty((n_a, n_y))
    for a in range(n_a):
        pred[a] = np.outer(pi_i, fi.probs[a]) + np.outer(1 - pi_i, fj.probs[a])
        jump[a] = np.log(fi.probs[a]) - np.log(fj.probs[a])
    values = np.zeros(grid.size)
    deltas = []
    q = np.empty((n_a, grid.size))
    for _ in range(100_000):
        for a in range(n_a):
            cont = np.interp(grid[:, None] + jump[a][None, :], grid, values)
            q[a] = pred[a] @ v + policy.discount * (pred[a] * cont).sum(axis=1)
        new = q.max(axis=0)
        delta = float(np.abs(new - values).max())
        deltas.append(delta)
        values = new
        if delta < policy.convergence_tol:
            break
    greedy = q.argmax(axis=0)
    return grid, values, greedy, deltas


def discounted_threshold(instance: Instance, i: int, j: int,
                         policy: GridValueIteration) -> float:
    """LLR at which the discounted agent's optimal action switches, from
    value iteration on the belief MDP induced by the agent's own model
    (current-action attribution, so the LLR jumps by the realized outcome's
    log-likelihood ratio)."""
    if instance.n_actions != 2:
        raise ValueError("discounted_threshold needs exactly two actions")
    grid, _, greedy, _ = _value_iteration(instance, i, j, policy)
    flips = np.nonzero(greedy[1:] != greedy[:-1])[0]
    if flips.size == 0:
        raise ValueError("no preference switch on the grid")
    m = int(flips[0])
    return float(0.5 * (grid[m] + grid[m + 1]))


def threshold_policy_for(instance: Instance, i: int = 0, j: int = 1,
                         policy: GridValueIteration | None = None) -> ThresholdLLR:
    """Package the myopic (or discounted) two-hypothesis rule as ThresholdLLR."""
    if policy is None:
        l_star = myopic_indifference_llr(instance, i, j)
    else:
        l_star = discounted_threshold(instance, i, j, policy)
    ui = instance.states[i].probs @ instance.payoff
    act_high = int(np.argmax(ui))
    return ThresholdLLR(l_star=l_star, prefer_low=1 - act_high,
                        hyp_i=i, hyp_j=j)
