"""Core model: outcome states, lag structures, instances, and Bayes updates.

History convention used throughout: ``history`` is the realized action
sequence ``(a_1, ..., a_t')`` for periods 1..t', and periods <= 0 are covered
by the instance's ``pre_history`` tuple, stored chronologically so that
``pre_history[-1]`` is the action of period 0.  Beliefs live in log space;
renormalisation divides the likelihood vector by its maximum before taking
logs, then applies a max-shift log-sum-exp, so scaling every likelihood by a
common power of two leaves the posterior bit-identical.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

ROW_ATOL = 1e-12


class PreHistoryError(ValueError):
    """A lag reached a period not covered by history or pre-history."""


@dataclass(frozen=True, eq=False)
class OutcomeModel:
    """One state: a row-stochastic matrix of outcome distributions per action."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("probs must be a (n_actions, n_outcomes) matrix")
        if (p < 0.0).any() or (p > 1.0).any():
            raise ValueError("probabilities must lie in [0, 1]")
        if np.abs(p.sum(axis=1) - 1.0).max() > ROW_ATOL:
            raise ValueError("each action row must sum to 1 within 1e-12")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n_actions(self) -> int:
        return self.probs.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.probs.shape[1]

    def row(self, action: int) -> np.ndarray:
        return self.probs[action]


@dataclass(frozen=True)
class PointLag:
    """The outcome in period t depends on the action of period t - k."""

    k: int

    def __post_init__(self):
        if self.k < 0 or int(self.k) != self.k:
            raise ValueError("lag must be a non-negative integer")
        object.__setattr__(self, "k", int(self.k))

    @property
    def max_lag(self) -> int:
        return self.k


@dataclass(frozen=True, eq=False)
class MixtureLag:
    """The outcome mixes the last k+1 actions with convex weights beta."""

    beta: np.ndarray

    def __post_init__(self):
        b = np.array(self.beta, dtype=np.float64)
        if b.ndim != 1 or b.size < 1:
            raise ValueError("beta must be a non-empty weight vector")
        if (b < 0.0).any():
            raise ValueError("mixture weights must be non-negative")
        if abs(b.sum() - 1.0) > ROW_ATOL:
            raise ValueError("mixture weights must sum to 1 within 1e-12")
        b.setflags(write=False)
        object.__setattr__(self, "beta", b)

    @property
    def max_lag(self) -> int:
        return self.beta.size - 1


@dataclass(frozen=True, eq=False)
class UncertainLag:
    """Agent is unsure of the lag: finite support with a prior over it.

    Hypotheses become state x lag pairs with the product prior, unless an
    explicit joint prior of shape (n_states, len(support)) is supplied.
    """

    support: tuple
    prior: np.ndarray
    joint_prior: np.ndarray | None = None

    def __post_init__(self):
        sup = tuple(int(k) for k in self.support)
        if len(sup) == 0:
            raise ValueError("lag support must be non-empty")
        if any(k < 0 for k in sup):
            raise ValueError("lags must be non-negative")
        if len(set(sup)) != len(sup):
            raise ValueError("lag support must not repeat values")
        p = np.array(self.prior, dtype=np.float64)
        if p.shape != (len(sup),) or (p < 0.0).any():
            raise ValueError("lag prior must be non-negative, one per lag")
        if abs(p.sum() - 1.0) > ROW_ATOL:
            raise ValueError("lag prior must sum to 1 within 1e-12")
        p.setflags(write=False)
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "prior", p)
        if self.joint_prior is not None:
            j = np.array(self.joint_prior, dtype=np.float64)
            j.setflags(write=False)
            object.__setattr__(self, "joint_prior", j)

    @property
    def max_lag(self) -> int:
        return max(self.support)


@dataclass(frozen=True)
class RegularityViolation:
    kind: str  # "true-state-support" | "zero-entry" | "identical-conditionals"
    message: str


def _current_action_weight(agent_lag) -> float:
    if isinstance(agent_lag, PointLag):
        return 1.0 if agent_lag.k == 0 else 0.0
    if isinstance(agent_lag, MixtureLag):
        return float(agent_lag.beta[0])
    return 1.0 if 0 in agent_lag.support else 0.0


@dataclass(frozen=True, eq=False)
class Instance:
    """A learning environment: states with a prior, payoffs, and lag models."""

    states: tuple
    prior: np.ndarray
    true_state_index: int
    payoff: np.ndarray
    discount: float
    true_lag: PointLag | MixtureLag
    agent_lag: PointLag | MixtureLag | UncertainLag
    pre_history: tuple = field(default_factory=tuple)

    def __post_init__(self):
        states = tuple(self.states)
        if len(states) < 1:
            raise ValueError("need at least one state")
        n_a = states[0].n_actions
        n_y = states[0].n_outcomes
        for s in states:
            if s.n_actions != n_a or s.n_outcomes != n_y:
                raise ValueError("all states must share the action/outcome sets")
        prior = np.array(self.prior, dtype=np.float64)
        if prior.shape != (len(states),) or (prior < 0.0).any():
            raise ValueError("prior must be non-negative, one entry per state")
        if abs(prior.sum() - 1.0) > ROW_ATOL:
            raise ValueError("prior must sum to 1 within 1e-12")
        if not 0 <= self.true_state_index < len(states):
            raise ValueError("true_state_index out of range")
        payoff = np.array(self.payoff, dtype=np.float64)
        if payoff.shape != (n_y,):
            raise ValueError("payoff must assign a util to every outcome")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        if not isinstance(self.true_lag, (PointLag, MixtureLag)):
            raise ValueError("true_lag must be PointLag or MixtureLag")
        if not isinstance(self.agent_lag, (PointLag, MixtureLag, UncertainLag)):
            raise ValueError("agent_lag has an unknown variant")
        if self.discount == 0.0 and _current_action_weight(self.agent_lag) <= 0.0:
            # a myopic agent whose model ignores the current action is
            # indifferent between all actions in every period
            raise ValueError(
                "discount 0 requires the agent model to weight the current "
                "action (PointLag(0), MixtureLag with beta[0] > 0, or "
                "UncertainLag with 0 in its support)"
            )
        pre = tuple(int(a) for a in self.pre_history)
        if any(a < 0 or a >= n_a for a in pre):
            raise ValueError("pre-history contains an invalid action index")
        need = max(self.true_lag.max_lag, self.agent_lag.max_lag)
        if len(pre) < need:
            raise ValueError(
                f"pre_history must cover at least {need} periods before 1"
            )
        prior.setflags(write=False)
        payoff.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "payoff", payoff)
        object.__setattr__(self, "pre_history", pre)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return self.states[0].n_actions

    @property
    def n_outcomes(self) -> int:
        return self.states[0].n_outcomes

    @property
    def true_state(self) -> OutcomeModel:
        return self.states[self.true_state_index]

    def state_tensor(self) -> np.ndarray:
        """(n_states, n_actions, n_outcomes) stack of the state matrices."""
        return np.stack([s.probs for s in self.states])

    def optimal_action(self) -> int:
        """Myopically optimal action under the true state."""
        u = self.true_state.probs @ self.payoff
        return int(np.argmax(u))

    # hypothesis space: plain states, or state x lag pairs under UncertainLag

    def hypothesis_states(self) -> np.ndarray:
        if isinstance(self.agent_lag, UncertainLag):
            n_k = len(self.agent_lag.support)
            return np.repeat(np.arange(self.n_states), n_k)
        return np.arange(self.n_states)

    def hypothesis_lags(self) -> np.ndarray:
        """Believed point lag per hypothesis (mixture agents have none)."""
        if isinstance(self.agent_lag, UncertainLag):
            sup = np.array(self.agent_lag.support, dtype=np.int64)
            return np.tile(sup, self.n_states)
        if isinstance(self.agent_lag, PointLag):
            k = self.agent_lag.k
            return np.full(self.n_states, k, dtype=np.int64)
        return np.zeros(self.n_states, dtype=np.int64)  # unused for mixtures

    def hypothesis_prior(self) -> np.ndarray:
        if isinstance(self.agent_lag, UncertainLag):
            if self.agent_lag.joint_prior is not None:
                j = self.agent_lag.joint_prior
                if j.shape != (self.n_states, len(self.agent_lag.support)):
                    raise ValueError("joint prior shape mismatch")
                if abs(j.sum() - 1.0) > 1e-9:
                    raise ValueError("joint prior must sum to 1")
                return j.ravel()
            return np.outer(self.prior, self.agent_lag.prior).ravel()
        return self.prior.copy()

    def hypothesis_tensor(self) -> np.ndarray:
        return self.state_tensor()[self.hypothesis_states()]

    def true_hypothesis_mask(self) -> np.ndarray:
        return (self.hypothesis_states() == self.true_state_index).astype(np.int64)

    def n_hypotheses(self) -> int:
        return self.hypothesis_states().size

    # serialization

    def to_dict(self) -> dict:
        return {
            "states": [s.probs.tolist() for s in self.states],
            "prior": self.prior.tolist(),
            "true_state_index": self.true_state_index,
            "payoff": self.payoff.tolist(),
            "discount": self.discount,
            "true_lag": _lag_to_dict(self.true_lag),
            "agent_lag": _lag_to_dict(self.agent_lag),
            "pre_history": list(self.pre_history),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Instance":
        return cls(
            states=tuple(OutcomeModel(np.array(m)) for m in d["states"]),
            prior=np.array(d["prior"]),
            true_state_index=int(d["true_state_index"]),
            payoff=np.array(d["payoff"]),
            discount=float(d["discount"]),
            true_lag=_lag_from_dict(d["true_lag"]),
            agent_lag=_lag_from_dict(d["agent_lag"]),
            pre_history=tuple(d.get("pre_history", ())),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        return cls.from_dict(json.loads(text))


def _lag_to_dict(lag) -> dict:
    if isinstance(lag, PointLag):
        return {"point": lag.k}
    if isinstance(lag, MixtureLag):
        return {"mixture": lag.beta.tolist()}
    d = {"support": list(lag.support), "prior": lag.prior.tolist()}
    if lag.joint_prior is not None:
        d["joint_prior"] = lag.joint_prior.tolist()
    return {"uncertain": d}


def _lag_from_dict(d: dict):
    if "point" in d:
        return PointLag(d["point"])
    if "mixture" in d:
        return MixtureLag(np.array(d["mixture"]))
    if "uncertain" in d:
        u = d["uncertain"]
        joint = u.get("joint_prior")
        return UncertainLag(
            support=tuple(u["support"]),
            prior=np.array(u["prior"]),
            joint_prior=None if joint is None else np.array(joint),
        )
    raise ValueError(f"unknown lag spec {d!r}")


@dataclass(eq=False)
class Belief:
    """Log-probabilities over the agent's hypothesis set, kept normalized."""

    log_weights: np.ndarray

    def __post_init__(self):
        lw = np.array(self.log_weights, dtype=np.float64)
        if lw.ndim != 1 or lw.size < 1:
            raise ValueError("log_weights must be a non-empty vector")
        m = lw.max()
        if m == -np.inf:
            raise ValueError("belief has no live hypothesis")
        lw -= m + math.log(np.exp(lw - m).sum())
        self.log_weights = lw

    @classmethod
    def from_prior(cls, instance: Instance) -> "Belief":
        p = instance.hypothesis_prior()
        with np.errstate(divide="ignore"):
            return cls(np.log(p))

    def posterior(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def llr(self, i: int, j: int) -> float:
        """log of the posterior ratio between hypotheses i and j."""
        return float(self.log_weights[i] - self.log_weights[j])

    def copy(self) -> "Belief":
        return Belief(self.log_weights.copy())


def check_regular(instance: Instance) -> list:
    """Diagnose the regularity conditions; an empty list means regular.

    Checks (i) the true state carries positive prior mass, (ii) every
    conditional of every supported state has full support, and (iii) no two
    supported states share a conditional for any action (1e-12 per entry).
    """
    out = []
    support = [i for i in range(instance.n_states) if instance.prior[i] > 0.0]
    if instance.prior[instance.true_state_index] <= 0.0:
        out.append(RegularityViolation(
            "true-state-support",
            f"true state {instance.true_state_index} has zero prior mass",
        ))
        support = sorted(set(support + [instance.true_state_index]))
    for i in support:
        p = instance.states[i].probs
        for a in range(instance.n_actions):
            for y in range(instance.n_outcomes):
                if p[a, y] <= 0.0:
                    out.append(RegularityViolation(
                        "zero-entry",
                        f"state {i}: F(y{y}|a{a}) = 0",
                    ))
    for ii, i in enumerate(support):
        for j in support[ii + 1:]:
            pi, pj = instance.states[i].probs, instance.states[j].probs
            for a in range(instance.n_actions):
                if np.abs(pi[a] - pj[a]).max() <= ROW_ATOL:
                    out.append(RegularityViolation(
                        "identical-conditionals",
                        f"states {i} and {j} agree on F(.|a{a})",
                    ))
    return out


def _lag_weight_vector(lag, length: int) -> np.ndarray:
    w = np.zeros(length)
    if isinstance(lag, PointLag):
        w[lag.k] = 1.0
    else:
        w[:lag.beta.size] = lag.beta
    return w


def is_lag_misspecified(instance: Instance) -> bool:
    """True when the agent's lag model cannot represent the true lag
    structure (point lags outside the believed support, or mismatched
    mixture weights).  Misspecification experiments require this; it is a
    diagnostic, not a construction-time constraint."""
    true_lag = instance.true_lag
    agent = instance.agent_lag
    if isinstance(agent, UncertainLag):
        if isinstance(true_lag, PointLag):
            return true_lag.k not in agent.support
        return True  # a strict mixture is outside any point-lag family
    n = max(true_lag.max_lag, agent.max_lag) + 1
    tw = _lag_weight_vector(true_lag, n)
    aw = _lag_weight_vector(agent, n)
    return bool(np.abs(tw - aw).max() > ROW_ATOL)


def _action_at(history, pre_history, s: int) -> int:
    """Action of period s (s >= 1 from history, s <= 0 from pre-history)."""
    if s >= 1:
        if s > len(history):
            raise PreHistoryError(f"history does not reach period {s}")
        return int(history[s - 1])
    idx = len(pre_history) + s - 1
    if idx < 0:
        raise PreHistoryError(
            f"period {s} predates the recorded pre-history"
        )
    return int(pre_history[idx])


def effective_mixture(lag, history, t: int, n_actions: int,
                      pre_history=()) -> np.ndarray:
    """Action weights alpha_t generating the period-t outcome under ``lag``.

    A point lag puts all mass on a_{t-k}; a mixture lag returns the
    beta-weighted histogram of the last k+1 actions.
    """
    alpha = np.zeros(n_actions, dtype=np.float64)
    if isinstance(lag, PointLag):
        alpha[_action_at(history, pre_history, t - lag.k)] = 1.0
    elif isinstance(lag, MixtureLag):
        for j, b in enumerate(lag.beta):
            alpha[_action_at(history, pre_history, t - j)] += b
    else:
        raise TypeError("effective_mixture needs a PointLag or MixtureLag")
    return alpha


def outcome_distribution(instance: Instance, history, t: int) -> np.ndarray:
    """Distribution of y_t given the history, under the true lag structure."""
    alpha = effective_mixture(instance.true_lag, history, t,
                              instance.n_actions, instance.pre_history)
    return alpha @ instance.true_state.probs


def sample_outcome(instance: Instance, history, t: int, rng) -> int:
    """Draw y_t by inverse CDF, consuming exactly one uniform from ``rng``."""
    p = outcome_distribution(instance, history, t)
    u = rng.random()
    c = 0.0
    for j in range(p.size):
        c += p[j]
        if u < c:
            return j
    return p.size - 1


def _hypothesis_likelihoods(instance: Instance, history, t: int,
                            observed: int) -> np.ndarray:
    n_a = instance.n_actions
    lags = instance.hypothesis_lags()
    lik = np.empty(instance.n_hypotheses(), dtype=np.float64)
    hyp_states = instance.hypothesis_states()
    if isinstance(instance.agent_lag, MixtureLag):
        alpha = effective_mixture(instance.agent_lag, history, t, n_a,
                                  instance.pre_history)
        for h, si in enumerate(hyp_states):
            lik[h] = float(alpha @ instance.states[si].probs[:, observed])
    else:
        for h, si in enumerate(hyp_states):
            a = _action_at(history, instance.pre_history, t - int(lags[h]))
            lik[h] = instance.states[si].probs[a, observed]
    return lik


def apply_likelihoods(belief: Belief, likelihoods) -> Belief:
    """Condition a belief on a per-hypothesis likelihood vector.

    The vector is divided by its maximum before entering log space, so
    posteriors depend only on likelihood ratios: rescaling all entries by a
    common power of two is bit-identical, any other positive constant is
    immaterial up to IEEE rounding.  Zero-likelihood hypotheses drop to the
    -inf sentinel; only when every hypothesis hits zero is an error raised.
    """
    lik = np.asarray(likelihoods, dtype=np.float64)
    if lik.shape != belief.log_weights.shape:
        raise ValueError("one likelihood per hypothesis required")
    m = lik.max()
    if m <= 0.0:
        raise ValueError("all hypotheses assign zero likelihood to the outcome")
    lw = belief.log_weights.copy()
    live = lik > 0.0
    lw[~live] = -np.inf
    lw[live] += np.log(lik[live] / m)
    return Belief(lw)


def bayes_update(belief: Belief, instance: Instance, history, t: int,
                 observed: int) -> Belief:
    """One Bayes step under the agent's (possibly misspecified) lag model.

    Adds log sum_a alpha_hat(a) F(observed|a) to each hypothesis, where
    alpha_hat attributes the outcome according to the agent's model, then
    renormalizes.
    """
    if not 0 <= observed < instance.n_outcomes:
        raise ValueError("observed outcome index out of range")
    return apply_likelihoods(
        belief, _hypothesis_likelihoods(instance, history, t, observed))
