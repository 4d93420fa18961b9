"""Named instance builders and the three-property recipe validator used to
certify that an instance sits in the action-cycling regime."""

from dataclasses import dataclass

import numpy as np

from .bounds import drift
from .model import Instance, OutcomeModel, PointLag


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.sum(p * (np.log(p) - np.log(q))))


def build_fig1(eps: float, p_star: float = 0.01, k_star: int = 1,
               k_prime: int = 0, discount: float = 0.0) -> Instance:
    """Three-state, three-outcome cycling example.

    Outcomes pay (0, 0, 1); the true state favors action 0 (payoff 2*eps vs
    eps) and the rival states disagree about the best action.  eps must stay
    below 1/6 to keep the geometry (ordering margins) intact.  States are
    ordered (F0, F1, F*) and the prior splits 1 - p_star evenly over the two
    rivals.
    """
    if not 0.0 < eps < 1.0 / 6.0:
        raise ValueError("eps must lie in (0, 1/6)")
    if not 0.0 < p_star < 1.0:
        raise ValueError("p_star must lie in (0, 1)")
    f_star = OutcomeModel([
        [eps, 1 - 3 * eps, 2 * eps],
        [1 - 2 * eps, eps, eps],
    ])
    f0 = OutcomeModel([
        [2 / 3 - eps, 1 / 3 - eps, 2 * eps],
        [2 / 3 - eps / 2, 1 / 3 - eps / 2, eps],
    ])
    f1 = OutcomeModel([
        [1 / 3 - eps / 2, 2 / 3 - eps / 2, eps],
        [1 / 3 - eps, 2 / 3 - eps, 2 * eps],
    ])
    need = max(k_star, k_prime)
    return Instance(
        states=(f0, f1, f_star),
        prior=np.array([(1 - p_star) / 2, (1 - p_star) / 2, p_star]),
        true_state_index=2,
        payoff=np.array([0.0, 0.0, 1.0]),
        discount=discount,
        true_lag=PointLag(k_star),
        agent_lag=PointLag(k_prime),
        pre_history=(0,) * need,
    )


def build_construction(zeta: float, zeta_prime: float, k_star: int = 1,
                       k_prime: int = 0, discount: float = 0.0) -> Instance:
    """Binary-outcome construction with tunable cycling asymmetry.

    The true state pays 1/2 under action 0 and zeta_prime under action 1;
    the rivals sit at 2*zeta/zeta and 3*zeta/4*zeta.  Small zeta makes the
    recovery drift toward action 0 slow (long action-1 runs); small
    zeta_prime makes the true state easy to mislearn.  Prior:
    ((1 - zeta')/2, (1 - zeta')/2, zeta') over (F0, F1, F*).
    """
    if not 0.0 < zeta < 0.25:
        raise ValueError("zeta must lie in (0, 1/4)")
    if not 0.0 < zeta_prime < 0.25:
        raise ValueError("zeta_prime must lie in (0, 1/4)")
    f_star = OutcomeModel([[0.5, 0.5], [1 - zeta_prime, zeta_prime]])
    f0 = OutcomeModel([[1 - 2 * zeta, 2 * zeta], [1 - zeta, zeta]])
    f1 = OutcomeModel([[1 - 3 * zeta, 3 * zeta], [1 - 4 * zeta, 4 * zeta]])
    need = max(k_star, k_prime)
    return Instance(
        states=(f0, f1, f_star),
        prior=np.array([(1 - zeta_prime) / 2, (1 - zeta_prime) / 2,
                        zeta_prime]),
        true_state_index=2,
        payoff=np.array([0.0, 1.0]),
        discount=discount,
        true_lag=PointLag(k_star),
        agent_lag=PointLag(k_prime),
        pre_history=(0,) * need,
    )


def build_symmetric_game(r: float, k_star: int = 1, prior=(0.5, 0.5),
                         true_state_index: int = 0) -> Instance:
    """Two-state instance for the policy game: action a is optimal in state
    F_a, and the two states are action-relabelings of each other.

    Outcomes are (y_bad, y_good) paying (0, 1); the good outcome has
    probability r under the state's preferred action.  The agent believes
    the current action drives the current outcome (lag 0) while the true
    lag is k_star >= 1.
    """
    if not 0.5 < r < 1.0:
        raise ValueError("r must lie in (1/2, 1)")
    if k_star < 1:
        raise ValueError("the game needs a true lag of at least 1")
    f0 = OutcomeModel([[1 - r, r], [r, 1 - r]])
    f1 = OutcomeModel([[r, 1 - r], [1 - r, r]])
    return Instance(
        states=(f0, f1),
        prior=np.array(prior, dtype=np.float64),
        true_state_index=true_state_index,
        payoff=np.array([0.0, 1.0]),
        discount=0.0,
        true_lag=PointLag(k_star),
        agent_lag=PointLag(0),
        pre_history=(0,) * k_star,
    )


@dataclass(frozen=True)
class RecipeReport:
    """Outcome of the three-property cycling-recipe check."""

    kl_value: float
    kl_pass: bool
    drift_hold0: float
    drift_hold1: float
    sign_pass: bool
    stay_drift_abs: float
    stay_pass: bool

    @property
    def all_pass(self) -> bool:
        return self.kl_pass and self.sign_pass and self.stay_pass


def validate_theorem1_recipe(instance: Instance, kl_min: float = 2.0,
                             drift_tol: float = 0.1) -> RecipeReport:
    """Check the three properties that drive near-permanent cycling:

    1. the true state's two conditionals are far apart (max directed KL
       at least kl_min), so switching mislearns the true state hard;
    2. while holding an action, the rival favoring the *other* action looks
       closer to the truth (drift of log F0/F1 negative when holding 0,
       positive when holding 1), so the rival race keeps flipping;
    3. the hold-1 drift is small (|E| <= drift_tol), so action-1 runs are
       long and the optimal action is rare.

    The instance must have three states ordered (F0, F1, F*) with the true
    state last, and two actions.
    """
    if instance.n_states != 3 or instance.n_actions != 2:
        raise ValueError("recipe check needs three states and two actions")
    if instance.true_state_index != 2:
        raise ValueError("expected the true state at index 2")
    f0, f1, f_star = instance.states
    kl01 = _kl(f_star.probs[0], f_star.probs[1])
    kl10 = _kl(f_star.probs[1], f_star.probs[0])
    kl_value = max(kl01, kl10)
    d0 = drift(f_star, f0, f1, 0, 0)
    d1 = drift(f_star, f0, f1, 1, 1)
    return RecipeReport(
        kl_value=kl_value,
        kl_pass=kl_value >= kl_min,
        drift_hold0=d0,
        drift_hold1=d1,
        sign_pass=(d0 < 0.0) and (d1 > 0.0),
        stay_drift_abs=abs(d1),
        stay_pass=abs(d1) <= drift_tol,
    )


BUILDERS = {
    "fig1": build_fig1,
    "construction": build_construction,
    "symmetric": build_symmetric_game,
}
