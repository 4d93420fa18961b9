"""Dynamic policy-choice game: a patient principal proposes a reform each
period, a myopic agent with a lag-misspecified model accepts or vetoes.

Game instances carry two states ordered (F0, F1) where action a is optimal
for the agent in state F_a, agent lag 0 and true lag k* >= 1.  The module
fixes one LLR orientation throughout: l_t = log pi_t(F1) / pi_t(F0), so the
agent strictly prefers the reform when l_t exceeds the acceptance threshold.
Proposals never enter the agent's update (only implemented actions and
outcomes do), matching the no-signaling structure of the game.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import kernel
from .agent import myopic_indifference_llr
from .bounds import FiniteRV, llr_increment_rv, wald_exponent_sum
from .model import Instance, PointLag


@dataclass(frozen=True)
class AlwaysPropose:
    """Propose the same action every period (the reform by default)."""

    action: int = 1

    def __post_init__(self):
        if self.action not in (0, 1):
            raise ValueError("action must be 0 or 1")


@dataclass(frozen=True)
class Mirror:
    """Propose the opposite of the action implemented k* periods ago.

    ``k_star=None`` resolves to the instance's true lag at simulation time.
    """

    k_star: int | None = None


@dataclass(frozen=True)
class Block:
    """Periodic schedule over blocks of T1 + T2 periods: propose the status
    quo at the even positions 2, 4, ..., T1 and the reform elsewhere, for a
    reform-proposal frequency of (T1/2 + T2) / (T1 + T2) on full blocks."""

    t1: int
    t2: int

    def __post_init__(self):
        if self.t1 < 2 or self.t1 % 2 != 0:
            raise ValueError("T1 must be a positive even integer")
        if self.t2 < 1:
            raise ValueError("T2 must be a positive integer")

    @property
    def proposal_frequency(self) -> float:
        return (self.t1 / 2 + self.t2) / (self.t1 + self.t2)


@dataclass(frozen=True)
class ThresholdComposite:
    """Play ``pre`` until the agent's LLR first reaches ``trigger_llr``,
    then switch permanently to ``post``.

    ``l_eps_star`` records the (negative) cutoff the trigger was derived
    from; the stored trigger already includes any safety margin.
    """

    trigger_llr: float
    pre: "PrincipalStrategy"
    post: "PrincipalStrategy"
    l_eps_star: float | None = None

    def __post_init__(self):
        if isinstance(self.pre, (ThresholdComposite, LearningWrapper)) or \
           isinstance(self.post, (ThresholdComposite, LearningWrapper)):
            raise ValueError("composites nest only plain strategies")
        if self.l_eps_star is not None and self.l_eps_star >= 0.0:
            raise ValueError("l_eps_star must be negative")


@dataclass(frozen=True)
class LearningWrapper:
    """Play ``strat0`` for tau periods; if the principal's own (correctly
    attributed) posterior then puts at least 1 - eps on state F0, continue
    with strat0, otherwise switch to strat1."""

    tau: int
    eps: float
    strat0: "PrincipalStrategy"
    strat1: "PrincipalStrategy"

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be at least 1")
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        if isinstance(self.strat0, LearningWrapper) or \
           isinstance(self.strat1, LearningWrapper):
            raise ValueError("wrappers do not nest")


PrincipalStrategy = (AlwaysPropose | Mirror | Block | ThresholdComposite
                     | LearningWrapper)


def _check_game_instance(instance: Instance):
    if instance.n_states != 2 or instance.n_actions != 2:
        raise ValueError("the game needs exactly two states and two actions")
    if not isinstance(instance.agent_lag, PointLag) or instance.agent_lag.k != 0:
        raise ValueError("the game agent attributes outcomes to the current "
                         "action (agent lag 0)")
    if not isinstance(instance.true_lag, PointLag) or instance.true_lag.k < 1:
        raise ValueError("the game needs a point true lag k* >= 1")
    u0 = instance.states[0].probs @ instance.payoff
    u1 = instance.states[1].probs @ instance.payoff
    if not (u0[0] > u0[1] and u1[1] > u1[0]):
        raise ValueError("state F_a must make action a strictly optimal")


def acceptance_threshold(instance: Instance) -> float:
    """The agent accepts the reform iff log pi(F1)/pi(F0) exceeds this."""
    return -myopic_indifference_llr(instance, 0, 1)


def game_increment_rv(instance: Instance, a: int, a_att: int) -> FiniteRV:
    """Increment of l = log pi(F1)/pi(F0) when the lagged implemented action
    is ``a`` and the current (attributed) action is ``a_att``, with the
    outcome drawn from state F0."""
    f0, f1 = instance.states[0], instance.states[1]
    return llr_increment_rv(f0, f1, f0, a, a_att)


@dataclass(frozen=True)
class LambdaResult:
    lam: float
    lam_hat: float
    degenerate: bool
    m11: float
    msw: float


def lambda_opt(f0, f1) -> LambdaResult:
    """Maximal reform frequency (lambda + 1)/(lambda + 2) parametrization.

    Maximizes (lh + 1)/(lh + 2) over lh >= 0 subject to
    lh E[X_11] + E[X_10 + X_01] > 0, the requirement that the LLR toward the
    truth not rise in expectation per (lh stays + 2 switches) cycle.  With
    m11 < 0 < msw the supremum sits at lh = -msw/m11; if the constraint can
    hold for arbitrarily large lh the result is flagged degenerate with
    lambda 1; if it never holds, lambda is 0.
    """
    m11 = llr_increment_rv(f0, f1, f0, 1, 1).mean()
    msw = (llr_increment_rv(f0, f1, f0, 1, 0).mean()
           + llr_increment_rv(f0, f1, f0, 0, 1).mean())
    if m11 >= 0.0:
        if msw > 0.0 or m11 > 0.0:
            return LambdaResult(1.0, math.inf, True, m11, msw)
        return LambdaResult(0.0, math.nan, False, m11, msw)
    if msw <= 0.0:
        return LambdaResult(0.0, math.nan, False, m11, msw)
    lam_hat = -msw / m11
    return LambdaResult((lam_hat + 1.0) / (lam_hat + 2.0), lam_hat, False,
                        m11, msw)


def lambda_opt_instance(instance: Instance) -> LambdaResult:
    _check_game_instance(instance)
    return lambda_opt(instance.states[0], instance.states[1])


def lambda_opt_numeric(f0, f1, tol: float = 1e-12) -> float:
    """Independent route to lambda: bisect the constraint boundary instead
    of using the closed-form ratio."""
    m11 = llr_increment_rv(f0, f1, f0, 1, 1).mean()
    msw = (llr_increment_rv(f0, f1, f0, 1, 0).mean()
           + llr_increment_rv(f0, f1, f0, 0, 1).mean())

    def feasible(lh):
        return lh * m11 + msw > 0.0

    if not feasible(0.0):
        if m11 > 0.0:
            return 1.0
        return 0.0
    hi = 1.0
    for _ in range(300):
        if not feasible(hi):
            break
        hi *= 2.0
    else:
        return 1.0  # feasible for arbitrarily large lh
    lo = 0.0
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    lam_hat = 0.5 * (lo + hi)
    return (lam_hat + 1.0) / (lam_hat + 2.0)


def theorem2_payoff(pi0, q_hat: float, lam: float) -> float:
    """pi0(F1) + pi0(F0) * q_hat * lam, the principal's asymptotic payoff."""
    p = np.asarray(pi0, dtype=np.float64)
    if p.shape != (2,) or (p < 0.0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("pi0 must be a two-entry probability vector")
    if not 0.0 <= q_hat <= 1.0 or not 0.0 <= lam <= 1.0:
        raise ValueError("q_hat and lam must lie in [0, 1]")
    return float(p[1] + p[0] * q_hat * lam)


def block_increments(instance: Instance, block: Block):
    """Per-block LLR increment mixture in state F0 when every reform
    proposal is accepted: (T - T1) stay-periods and T1/2 switches each way.
    """
    t = block.t1 + block.t2
    return [
        (game_increment_rv(instance, 1, 1), t - block.t1),
        (game_increment_rv(instance, 1, 0), block.t1 // 2),
        (game_increment_rv(instance, 0, 1), block.t1 // 2),
    ]


def _cycle_increments(instance: Instance, strategy):
    """Steady-state per-cycle increment mixture of a strategy's absorbing
    phase in state F0, or None when the phase cannot sustain absorption."""
    if isinstance(strategy, ThresholdComposite):
        return _cycle_increments(instance, strategy.post)
    if isinstance(strategy, LearningWrapper):
        return _cycle_increments(instance, strategy.strat0)
    if isinstance(strategy, Mirror):
        return [(game_increment_rv(instance, 1, 0), 1),
                (game_increment_rv(instance, 0, 1), 1)]
    if isinstance(strategy, Block):
        return block_increments(instance, strategy)
    if isinstance(strategy, AlwaysPropose) and strategy.action == 1:
        return [(game_increment_rv(instance, 1, 1), 1)]
    return None


def escape_bound(instance: Instance, strategy, terminal_llr: float) -> float:
    """Wald bound on the agent's LLR ever falling back to the acceptance
    threshold from ``terminal_llr`` while the strategy's absorbing phase
    keeps running in state F0.  Returns 1.0 when no bound certifies."""
    parts = _cycle_increments(instance, strategy)
    if parts is None:
        return 1.0
    above = terminal_llr > acceptance_threshold(instance)
    if all(rv.min() >= 0.0 for rv, _ in parts):
        # the LLR cannot fall at all (e.g. uninformative stay increments)
        return 0.0 if above else 1.0
    mean = sum(c * rv.mean() for rv, c in parts)
    if mean <= 0.0 or not above:
        return 1.0
    dip = sum(c * max(0.0, -rv.min()) for rv, c in parts)
    margin = terminal_llr - acceptance_threshold(instance) - dip
    if margin <= 0.0:
        return 1.0
    neg = [(rv.negated(), c) for rv, c in parts]
    r_star = wald_exponent_sum(neg)
    return math.exp(-r_star * margin)


def build_sigma_eps(l_eps_star: float, lambda_target: float, m11: float,
                    msw: float, *, increments=None, eps: float = 0.01,
                    search_cap: int = 10_000) -> ThresholdComposite:
    """Construct the mirror-then-block strategy hitting a reform frequency
    just under ``lambda_target``.

    Picks the smallest block (by T1 + T2, then T1) with T1 even and
    proposal frequency inside (lambda_target - 0.01, lambda_target).  When
    the per-period increment distributions are supplied, the switch trigger
    adds the Wald margin eta (exp(-r* eta) < eps for the negated per-block
    increment) plus the maximal one-block rise H; otherwise the trigger is
    just |l_eps_star|.
    """
    if m11 >= 0.0 or msw <= 0.0:
        raise ValueError("needs m11 < 0 < msw (mislearning regime)")
    lam = (-msw / m11 + 1.0) / (-msw / m11 + 2.0)
    if not 0.5 < lambda_target < lam:
        raise ValueError(f"lambda_target must lie in (1/2, {lam:.6f})")
    lo = lambda_target - 0.01
    found = None
    for total in range(3, search_cap + 1):
        for t1 in range(2, total, 2):
            t2 = total - t1
            freq = (t1 / 2 + t2) / total
            if lo < freq < lambda_target:
                found = (t1, t2)
                break
        if found:
            break
    if not found:
        raise ValueError("no (T1, T2) within the search cap")
    block = Block(*found)
    trigger = abs(l_eps_star)
    if increments is not None:
        x11, x10, x01 = increments
        t1, t2 = found
        parts = [
            (x11, (t1 + t2) - t1),
            (x10, t1 // 2),
            (x01, t1 // 2),
        ]
        neg = [(rv.negated(), c) for rv, c in parts]
        r_star = wald_exponent_sum(neg)
        eta = math.log(2.0 / eps) / r_star
        h_bar = sum(c * rv.max() for rv, c in parts)
        trigger += eta + h_bar
    return ThresholdComposite(trigger_llr=trigger, pre=Mirror(), post=block,
                              l_eps_star=l_eps_star)


def _encode_primitive(strategy, kstar: int) -> tuple:
    if isinstance(strategy, AlwaysPropose):
        return (float(_kernels.STRAT_ALWAYS), float(strategy.action), 0.0)
    if isinstance(strategy, Mirror):
        k = strategy.k_star if strategy.k_star is not None else kstar
        return (float(_kernels.STRAT_MIRROR), float(k), 0.0)
    if isinstance(strategy, Block):
        return (float(_kernels.STRAT_BLOCK), float(strategy.t1),
                float(strategy.t2))
    raise TypeError(f"not a primitive strategy: {strategy!r}")


def _encode_strategy(strategy, kstar: int) -> np.ndarray:
    """[pre_code, pre_p1, pre_p2, post_code, post_p1, post_p2, trigger]."""
    if isinstance(strategy, ThresholdComposite):
        pre = _encode_primitive(strategy.pre, kstar)
        post = _encode_primitive(strategy.post, kstar)
        return np.array(pre + post + (strategy.trigger_llr,))
    prim = _encode_primitive(strategy, kstar)
    return np.array(prim + prim + (math.inf,))


@dataclass(eq=False)
class GameTrajectory:
    """Raw per-period record of one game run."""

    implemented: np.ndarray
    proposals: np.ndarray
    prefers1: np.ndarray
    outcomes: np.ndarray
    llr: np.ndarray  # log pi_t(F1)/pi_t(F0) entering each period
    terminal_llr: float
    switched_at: int
    branch_taken: int
    seed: int


@dataclass(eq=False)
class GameRunStats:
    """One game run: tail payoff, absorption event, and diagnostics."""

    seed: int
    payoff_freq: float
    prefers1_tail: bool
    n_crossings: int
    terminal_llr: float
    n_switch_01: int
    n_switch_10: int
    proposal_freq: float
    proposal_freq_post: float
    switched_at: int
    branch_taken: int
    escape_bound: float
    certified: bool


@dataclass(eq=False)
class GameEnsemble:
    runs: list
    conditioning: int
    horizon: int
    base_seed: int
    tail_fraction: float
    mean_payoff: float
    stderr_payoff: float
    frac_prefers1_tail: float
    frac_certified: float
    mean_crossings: float

    def to_dict(self) -> dict:
        return {
            "conditioning": self.conditioning,
            "horizon": self.horizon,
            "base_seed": self.base_seed,
            "tail_fraction": self.tail_fraction,
            "payoff": {"mean": self.mean_payoff,
                       "stderr": self.stderr_payoff},
            "frac_prefers1_tail": self.frac_prefers1_tail,
            "frac_certified": self.frac_certified,
            "mean_crossings": self.mean_crossings,
        }


def _agent_threshold(instance: Instance, agent_policy) -> float:
    """Acceptance threshold in the game convention l = log pi(F1)/pi(F0).

    None selects the myopic rule; an explicit ThresholdLLR on the (0, 1)
    hypothesis pair (accepting at low log pi(F0)/pi(F1)) is translated by
    negation, so discounted agents plug in through threshold_policy_for.
    """
    if agent_policy is None:
        return acceptance_threshold(instance)
    from .agent import ThresholdLLR

    if not isinstance(agent_policy, ThresholdLLR):
        raise TypeError("the game agent must be a ThresholdLLR policy")
    if (agent_policy.hyp_i, agent_policy.hyp_j) != (0, 1) \
            or agent_policy.prefer_low != 1:
        raise ValueError("agent policy must threshold log w0/w1 with the "
                         "reform preferred at low values")
    return -agent_policy.l_star


def run_game_trajectory(instance: Instance, strategy, horizon: int,
                        seed: int, conditioning: int,
                        agent_policy=None) -> GameTrajectory:
    """One game run with the full per-period record.  Deterministic in seed."""
    _check_game_instance(instance)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if conditioning not in (0, 1):
        raise ValueError("conditioning must index one of the two states")
    thresh = _agent_threshold(instance, agent_policy)
    kstar = instance.true_lag.k
    state_probs = instance.state_tensor()
    pre = np.array(instance.pre_history, dtype=np.int64)
    if isinstance(strategy, LearningWrapper):
        wrapper_tau, wrapper_eps = strategy.tau, strategy.eps
        s0 = _encode_strategy(strategy.strat0, kstar)
        s1 = _encode_strategy(strategy.strat1, kstar)
    else:
        wrapper_tau, wrapper_eps = 0, 0.0
        s0 = _encode_strategy(strategy, kstar)
        s1 = s0
    with np.errstate(divide="ignore"):
        logw = np.log(instance.prior)
    logw_p = logw.copy()
    u = np.random.Generator(np.random.Philox(seed)).random(horizon)
    acts = np.empty(horizon, dtype=np.int64)
    props = np.empty(horizon, dtype=np.int64)
    pref1 = np.empty(horizon, dtype=np.int64)
    outs = np.empty(horizon, dtype=np.int64)
    llr = np.empty(horizon, dtype=np.float64)
    status, t_err, sw0, sw1, branch = kernel("game")(
        state_probs, instance.payoff, conditioning, kstar, thresh,
        wrapper_tau, wrapper_eps, s0, s1,
        logw, logw_p, pre, u, acts, props, pref1, outs, llr,
    )
    if status == _kernels.STATUS_ALL_ZERO:
        raise ValueError(f"zero likelihood at period {t_err}")
    switched_at = sw1 if (wrapper_tau and branch == 1) else sw0
    return GameTrajectory(
        implemented=acts, proposals=props, prefers1=pref1, outcomes=outs,
        llr=llr, terminal_llr=float(logw[1] - logw[0]),
        switched_at=int(switched_at), branch_taken=int(branch), seed=seed,
    )


def simulate_game(instance: Instance, strategy, horizon: int, n_runs: int,
                  base_seed: int, conditioning: int,
                  tail_fraction: float = 0.5, absorb_margin: float = 1e-3,
                  threads: int = 1, agent_policy=None) -> GameEnsemble:
    """Simulate the proposal game conditional on the true state.

    Each period the principal proposes; a reform proposal is implemented
    only if the agent strictly prefers it (myopic by default, or an explicit
    ThresholdLLR policy).  The outcome is drawn from the conditioning state
    under the true lag, the agent updates with current-action attribution.
    Payoff is the tail frequency of the reform.
    """
    _check_game_instance(instance)
    tail_start = horizon - max(1, int(math.floor(tail_fraction * horizon)))

    def one(i: int) -> GameRunStats:
        tr = run_game_trajectory(instance, strategy, horizon, base_seed + i,
                                 conditioning, agent_policy=agent_policy)
        acts, props, pref1 = tr.implemented, tr.proposals, tr.prefers1
        payoff = float(acts[tail_start:].mean())
        prefers_tail = bool(pref1[tail_start:].all())
        if tr.switched_at > 0:
            freq_post = float(props[tr.switched_at - 1:].mean())
        else:
            freq_post = math.nan
        bound = escape_bound(instance, strategy, tr.terminal_llr)
        return GameRunStats(
            seed=tr.seed,
            payoff_freq=payoff,
            prefers1_tail=prefers_tail,
            n_crossings=int((pref1[1:] != pref1[:-1]).sum()),
            terminal_llr=tr.terminal_llr,
            n_switch_01=int(((acts[:-1] == 0) & (acts[1:] == 1)).sum()),
            n_switch_10=int(((acts[:-1] == 1) & (acts[1:] == 0)).sum()),
            proposal_freq=float(props.mean()),
            proposal_freq_post=freq_post,
            switched_at=tr.switched_at,
            branch_taken=tr.branch_taken,
            escape_bound=bound,
            certified=prefers_tail and bound < absorb_margin,
        )

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            runs = list(ex.map(one, range(n_runs)))
    else:
        runs = [one(i) for i in range(n_runs)]

    payoffs = np.array([r.payoff_freq for r in runs])
    m = float(payoffs.mean())
    s = float(payoffs.std(ddof=1) / math.sqrt(n_runs)) if n_runs > 1 else 0.0
    return GameEnsemble(
        runs=runs,
        conditioning=conditioning,
        horizon=horizon,
        base_seed=base_seed,
        tail_fraction=tail_fraction,
        mean_payoff=m,
        stderr_payoff=s,
        frac_prefers1_tail=float(np.mean([r.prefers1_tail for r in runs])),
        frac_certified=float(np.mean([r.certified for r in runs])),
        mean_crossings=float(np.mean([r.n_crossings for r in runs])),
    )


@dataclass(frozen=True)
class CandidateResult:
    strategy: object
    q_hat: float
    q_stderr: float
    payoff: float
    payoff_stderr: float


@dataclass(eq=False)
class QStarEstimate:
    q_hat: float
    q_stderr: float
    best: object
    per_candidate: list  # of CandidateResult
    reliable: bool


def default_candidates(instance: Instance) -> list:
    """Mirror, constant proposing, and block/composite strategies derived
    from the instance's lambda (when the mislearning regime applies)."""
    cands = [Mirror(), AlwaysPropose(1)]
    res = lambda_opt_instance(instance)
    if 0.5 < res.lam < 1.0:
        incs = (game_increment_rv(instance, 1, 1),
                game_increment_rv(instance, 1, 0),
                game_increment_rv(instance, 0, 1))
        for target_gap, les in ((0.02, -2.0), (0.05, -3.0)):
            target = res.lam - target_gap
            if target > 0.5:
                sig = build_sigma_eps(les, target, res.m11, res.msw,
                                      increments=incs)
                cands.append(sig.post)
                cands.append(sig)
    return cands


def estimate_qstar(instance: Instance, candidates=None, horizon: int = 100_000,
                   n_runs: int = 200, base_seed: int = 0,
                   absorb_margin: float = 1e-3, tail_fraction: float = 0.5,
                   threads: int = 1) -> QStarEstimate:
    """Lower estimate of the maximal absorption probability in state F0.

    For each candidate strategy, a run counts as absorbed when the agent
    strictly prefers the reform on the whole tail window and the Wald
    escape bound from the terminal LLR is below ``absorb_margin``; q_hat is
    the best certified fraction over the (finite) candidate set.
    """
    _check_game_instance(instance)
    if candidates is None:
        candidates = default_candidates(instance)
    if not candidates:
        raise ValueError("need at least one candidate strategy")
    reliable = horizon >= 10
    per = []
    for strat in candidates:
        ens = simulate_game(instance, strat, horizon, n_runs, base_seed,
                            conditioning=0, tail_fraction=tail_fraction,
                            absorb_margin=absorb_margin, threads=threads)
        q = ens.frac_certified
        se = math.sqrt(max(q * (1.0 - q), 1e-12) / n_runs)
        per.append(CandidateResult(strat, q, se, ens.mean_payoff,
                                   ens.stderr_payoff))
    best_idx = max(range(len(per)), key=lambda k: per[k].q_hat)
    best = per[best_idx]
    return QStarEstimate(q_hat=best.q_hat, q_stderr=best.q_stderr,
                         best=best.strategy, per_candidate=per,
                         reliable=reliable)
