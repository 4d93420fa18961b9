"""Concentration-bound machinery: Wald exponents, Azuma and generalized
Chernoff rates, and the log-likelihood-ratio increment distributions they
are applied to.

Root finding and maximization use bracket expansion plus bisection or
golden-section: every objective here is smooth and convex/concave in one
dimension, so derivative-free search is robust and dependency-free.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._kernels import kernel

T_CAP = 1e6  # search cap for the Chernoff maximization (flagged when hit)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class FiniteRV:
    """A finitely supported random variable.

    Construction sorts the support, merges duplicate values (summing their
    probabilities) and drops zero-probability atoms, keeping the moment
    computations well conditioned.
    """

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        p = np.array(self.probs, dtype=np.float64)
        if v.ndim != 1 or v.shape != p.shape or v.size < 1:
            raise ValueError("values and probs must be equal-length vectors")
        if not np.isfinite(v).all():
            raise ValueError("values must be finite")
        if (p < 0.0).any():
            raise ValueError("probabilities must be non-negative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1 within 1e-12")
        order = np.argsort(v, kind="stable")
        v, p = v[order], p[order]
        uv, inv = np.unique(v, return_inverse=True)
        up = np.zeros_like(uv)
        np.add.at(up, inv, p)
        keep = up > 0.0
        uv, up = uv[keep], up[keep]
        uv.setflags(write=False)
        up.setflags(write=False)
        object.__setattr__(self, "values", uv)
        object.__setattr__(self, "probs", up)

    def mean(self) -> float:
        return float(self.values @ self.probs)

    def var(self) -> float:
        m = self.mean()
        return float(((self.values - m) ** 2) @ self.probs)

    def min(self) -> float:
        return float(self.values[0])

    def max(self) -> float:
        return float(self.values[-1])

    def log_mgf(self, t: float) -> float:
        """log E[exp(t X)], shift-stabilized for large |t|."""
        z = t * self.values
        m = z.max()
        return float(m + np.log(np.exp(z - m) @ self.probs))

    def negated(self) -> "FiniteRV":
        return FiniteRV(-self.values, self.probs)

    def scaled(self, c: float) -> "FiniteRV":
        return FiniteRV(c * self.values, self.probs)


def llr_increment_rv(true_state, f0, f1, a: int, a_att: int) -> FiniteRV:
    """Distribution of log f0(y|a_att)/f1(y|a_att) with y drawn from
    true_state(.|a): the one-step LLR increment when the lagged true action
    is ``a`` and the agent attributes the outcome to ``a_att``."""
    p0 = f0.probs[a_att]
    p1 = f1.probs[a_att]
    if (p0 <= 0.0).any() or (p1 <= 0.0).any():
        raise ValueError("attributed conditionals must have full support")
    vals = np.log(p0) - np.log(p1)
    return FiniteRV(vals, true_state.probs[a])


def drift(true_state, f0, f1, a: int, a_att: int) -> float:
    """Per-period expected LLR drift, the mean of llr_increment_rv."""
    return llr_increment_rv(true_state, f0, f1, a, a_att).mean()


def _bisect_root(f, lo: float, hi: float, iters: int = 200,
                 rtol: float = 1e-14) -> float:
    """Root of an increasing-through-zero f on [lo, hi] with f(lo) <= 0 < f(hi)."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def wald_exponent(rv: FiniteRV, rtol: float = 1e-12) -> float:
    """The unique r* > 0 with E[exp(r* X)] = 1.

    Requires a strictly negative mean and a positive value with positive
    probability; then log E[exp(r X)] is convex, zero at r = 0 with negative
    slope, so the positive root exists and is unique.
    """
    if rv.mean() >= 0.0:
        raise ValueError("wald_exponent requires a strictly negative mean")
    if rv.max() <= 0.0:
        raise ValueError("wald_exponent requires a positive value with "
                         "positive probability")
    psi = rv.log_mgf
    hi = 1.0
    for _ in range(200):
        if psi(hi) > 0.0:
            break
        hi *= 2.0
    else:
        raise RuntimeError("failed to bracket the Wald exponent")
    return _bisect_root(psi, 0.0, hi, rtol=rtol)


def wald_exponent_sum(parts, rtol: float = 1e-12) -> float:
    """Wald exponent for an independent sum: parts = [(FiniteRV, count), ...].

    Solves sum_i count_i log E[exp(r X_i)] = 0 without convolving supports.
    """
    parts = [(rv, int(c)) for rv, c in parts if c > 0]
    if not parts:
        raise ValueError("empty sum")
    mean = sum(c * rv.mean() for rv, c in parts)
    if mean >= 0.0:
        raise ValueError("wald_exponent_sum requires a negative total mean")
    if sum(c * rv.max() for rv, c in parts) <= 0.0:
        raise ValueError("sum cannot take a positive value")

    def psi(r):
        return sum(c * rv.log_mgf(r) for rv, c in parts)

    hi = 1.0
    for _ in range(200):
        if psi(hi) > 0.0:
            break
        hi *= 2.0
    else:
        raise RuntimeError("failed to bracket the Wald exponent")
    return _bisect_root(psi, 0.0, hi, rtol=rtol)


def wald_tail_bound(rv: FiniteRV, c: float) -> float:
    """exp(-r* c): bound on ever reaching level c > 0 for the running sum."""
    if c <= 0.0:
        raise ValueError("level c must be positive")
    return math.exp(-wald_exponent(rv) * c)


def azuma_bound(c_seq, eps1: float) -> float:
    """exp(-eps1^2 / (2 sum c_k^2)) for a martingale with |Z_k - Z_{k-1}| <= c_k."""
    c = np.asarray(c_seq, dtype=np.float64)
    if c.size == 0:
        raise ValueError("c_seq must be non-empty")
    if (c <= 0.0).any():
        raise ValueError("increment bounds must be positive")
    if eps1 <= 0.0:
        raise ValueError("eps1 must be positive")
    return math.exp(-eps1 ** 2 / (2.0 * float(c @ c)))


def _golden_max(g, lo: float, hi: float, iters: int = 200,
                tol: float = 1e-10) -> float:
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    g1, g2 = g(x1), g(x2)
    for _ in range(iters):
        if b - a <= tol * max(1.0, abs(b)):
            break
        if g1 < g2:
            a, x1, g1 = x1, x2, g2
            x2 = a + _GOLDEN * (b - a)
            g2 = g(x2)
        else:
            b, x2, g2 = x2, x1, g1
            x1 = b - _GOLDEN * (b - a)
            g1 = g(x1)
    xm = 0.5 * (a + b)
    return max(g(xm), g1, g2)


def generalized_chernoff_rate(rv: FiniteRV, lam: float,
                              side: str = "upper") -> float:
    """Large-deviation rate for sums of iid copies of rv with mean mu > 0.

    upper (lam > 1):  Pr[sum X_i >= lam mu n] <= exp(-c n) with
        c = max_{t>0} { lam mu t - log E[exp(t X)] };
    lower (lam in (0,1)): the mirrored rate with -lam mu t - log E[exp(-t X)].

    Returns math.inf when the threshold is outside the support (the event is
    impossible), and the exact boundary rate -log P(extreme value) when the
    threshold sits on the support edge.
    """
    mu = rv.mean()
    if mu <= 0.0:
        raise ValueError("generalized_chernoff_rate requires mean > 0")
    if side == "upper":
        if lam <= 1.0:
            raise ValueError("upper side requires lam > 1")
        target = lam * mu
        edge = rv.max()
        if target > edge:
            return math.inf
        if target == edge:
            return -math.log(float(rv.probs[-1]))
        work = rv

        def g(t):
            return target * t - work.log_mgf(t)
    else:
        if not 0.0 < lam < 1.0:
            raise ValueError("lower side requires lam in (0, 1)")
        target = lam * mu
        edge = rv.min()
        if target < edge:
            return math.inf
        if target == edge:
            return -math.log(float(rv.probs[0]))
        neg = rv.negated()

        def g(t):
            return -target * t - neg.log_mgf(t)

    hi = 1.0
    capped = False
    while g(hi) >= g(hi / 2.0):
        hi *= 2.0
        if hi > T_CAP:
            capped = True
            hi = T_CAP
            break
    if capped:
        warnings.warn(
            "Chernoff rate search hit the t cap of 1e6; the reported rate "
            "is a lower estimate", RuntimeWarning)
    return max(0.0, _golden_max(g, 0.0, hi))


def walk_supremum_mc(rv: FiniteRV, n_walks: int, n_steps: int, level: float,
                     base_seed: int, chunk: int = 128):
    """Simulate iid-increment walks; per walk i the stream comes from
    Philox(base_seed + i).  Returns (crossed, final): whether the running sum
    ever reached ``level``, and the terminal sum."""
    if n_walks < 1 or n_steps < 1:
        raise ValueError("need at least one walk and one step")
    values = np.ascontiguousarray(rv.values)
    cum = np.cumsum(rv.probs)
    walk = kernel("walk")
    crossed = np.empty(n_walks, dtype=bool)
    final = np.empty(n_walks, dtype=np.float64)
    for start in range(0, n_walks, chunk):
        stop = min(start + chunk, n_walks)
        u = np.empty((stop - start, n_steps), dtype=np.float64)
        for i in range(start, stop):
            gen = np.random.Generator(np.random.Philox(base_seed + i))
            u[i - start] = gen.random(n_steps)
        c, f = walk(u, values, cum, level)
        crossed[start:stop] = c
        final[start:stop] = f
    return crossed, final
