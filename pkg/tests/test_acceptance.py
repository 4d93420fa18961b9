"""Acceptance suite: one test per criterion, printing a PASS/FAIL line each.

Heavy experiments are cached per (name, thread-count) so the determinism
criterion can re-run the exact same pipelines with a different worker count
and compare canonical output bytes.  Run with ``pytest -v -s`` to see the
per-criterion lines inline.
"""

import json
import math
import time

import numpy as np

import laglearn as ll
from laglearn.game import (AlwaysPropose, LearningWrapper,
                           ThresholdComposite, build_sigma_eps,
                           estimate_qstar, game_increment_rv,
                           lambda_opt_instance, lambda_opt_numeric,
                           simulate_game, theorem2_payoff)
from laglearn.model import Belief, bayes_update, sample_outcome

from conftest import random_regular_instance

HORIZON = 100_000
RUNS = 200
THREADS_MAIN = 2
THREADS_ALT = 1

_CACHE = {}


def _canon(x):
    if isinstance(x, dict):
        return {k: _canon(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_canon(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def canonical_bytes(payload) -> bytes:
    return json.dumps(_canon(payload), sort_keys=True,
                      separators=(",", ":")).encode()


def run_experiment(name, threads):
    key = (name, threads)
    if key not in _CACHE:
        _CACHE[key] = EXPERIMENTS[name](threads)
    return _CACHE[key]


def report(name, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


# ---------------------------------------------------------------- criterion 1

def exp_berk_benchmark(threads):
    inst = ll.build_fig1(0.05, k_star=0, k_prime=0)
    s = ll.monte_carlo(inst, ll.Myopic(), HORIZON, RUNS, base_seed=1000,
                       eps=0.01, tail_fraction=0.5, threads=threads)
    frac_final = float(np.mean([r.final_posterior_true > 0.99
                                for r in s.runs]))
    payload = {"summary": s.to_dict(), "frac_final_gt_0.99": frac_final}
    return payload, s


def test_criterion1_berk_benchmark():
    t0 = time.perf_counter()
    payload, s = run_experiment("berk", THREADS_MAIN)
    elapsed = time.perf_counter() - t0
    ok = (s.mean_freq_optimal_tail >= 0.95
          and payload["frac_final_gt_0.99"] >= 0.95
          and elapsed < 120.0)
    report("criterion 1 (Berk benchmark)", ok,
           f"tail freq {s.mean_freq_optimal_tail:.4f} >= 0.95, "
           f"final>0.99 on {payload['frac_final_gt_0.99']:.3f} >= 0.95, "
           f"{elapsed:.1f}s < 120s")
    assert ok


# ---------------------------------------------------------------- criterion 2

def exp_cycling(threads):
    inst = ll.build_fig1(0.01, p_star=0.01, k_star=1, k_prime=0)
    s = ll.monte_carlo(inst, ll.Myopic(), HORIZON, RUNS, base_seed=2000,
                       eps=0.05, tail_fraction=0.5, threads=threads)
    return {"summary": s.to_dict()}, s


def test_criterion2_action_cycling():
    _, s = run_experiment("cycling", THREADS_MAIN)
    ok = (0.30 < s.mean_freq_optimal < 0.55
          and s.mean_switches > 0.05 * HORIZON)
    report("criterion 2 (action cycling)", ok,
           f"freq(a*) {s.mean_freq_optimal:.4f} in (0.30, 0.55), "
           f"switches {s.mean_switches:.0f} > {0.05 * HORIZON:.0f}")
    assert ok


# ---------------------------------------------------------------- criterion 3

def _sweep(zeta_prime, base_seed, threads):
    cells = []
    for i, zeta in enumerate((0.1, 0.05, 0.02)):
        inst = ll.build_construction(zeta, zeta_prime)
        s = ll.monte_carlo(inst, ll.Myopic(), HORIZON, RUNS,
                           base_seed=base_seed + 100 * i, eps=0.05,
                           tail_fraction=0.5, threads=threads)
        cells.append((zeta, s))
    payload = {str(z): s.to_dict() for z, s in cells}
    return payload, cells


def exp_sweep_spec(threads):
    return _sweep(0.01, 3000, threads)


def exp_sweep_paper_regime(threads):
    return _sweep(1e-4, 3500, threads)


def _check_sweep_trend(cells):
    freqs = [s.mean_freq_optimal for _, s in cells]
    tau1 = [s.tau1.mean for _, s in cells]
    tau0 = [s.tau0.mean for _, s in cells]
    problems = []
    if not (freqs[0] > freqs[1] > freqs[2]):
        problems.append(f"freq(a*=0) not strictly decreasing: {freqs}")
    if not freqs[2] < 0.25:
        problems.append(f"freq at zeta=0.02 is {freqs[2]:.4f}, not < 0.25")
    if not (tau1[0] < tau1[1] < tau1[2]):
        problems.append(f"mean tau1 not strictly increasing: {tau1}")
    if not max(tau0) < 2.0 * min(tau0):
        problems.append(f"mean tau0 varies by >= 2x: {tau0}")
    return freqs, tau1, tau0, problems


def test_criterion3_construction_sweep_as_specified():
    # The stated sweep keeps the true state's prior (and its action-1 success
    # rate) at 0.01.  At that level the per-cycle log-likelihood budget of
    # the true state against its rivals is positive (~ +0.3 nats at
    # zeta = 0.02: two ~0.94-nat identified-hold gains per cycle versus
    # -0.34 - 0.62 of switch misattribution), so the agent *learns* instead
    # of cycling and the frequency of action 0 rises toward 1.  The stated
    # thresholds are unreachable at these parameters; the companion test
    # below shows the predicted trend once the prior scale is small enough
    # for mislearning to dominate.
    _, cells = run_experiment("sweep_spec", THREADS_MAIN)
    freqs, tau1, tau0, problems = _check_sweep_trend(cells)
    ok = not problems
    report("criterion 3 (construction sweep, stated parameters)", ok,
           f"freq0={['%.3f' % f for f in freqs]} "
           f"tau1={['%.2f' % t for t in tau1]} "
           f"tau0={['%.2f' % t for t in tau0]}"
           + ("" if ok else " | " + "; ".join(problems)))
    assert ok, "; ".join(problems)


def test_criterion3_companion_mislearning_regime():
    # same protocol with the true-state scale at 1e-4: switch misattribution
    # now dominates the identified-hold gains and the predicted trend appears
    _, cells = run_experiment("sweep_paper", THREADS_MAIN)
    freqs, tau1, tau0, problems = _check_sweep_trend(cells)
    ok = not problems
    report("criterion 3 companion (mislearning regime)", ok,
           f"freq0={['%.3f' % f for f in freqs]} "
           f"tau1={['%.2f' % t for t in tau1]} "
           f"tau0={['%.2f' % t for t in tau0]}"
           + ("" if ok else " | " + "; ".join(problems)))
    assert ok, "; ".join(problems)


# ---------------------------------------------------------------- criterion 4

def exp_lambda(threads):
    rows = []
    for r in (0.6, 0.7, 0.8):
        inst = ll.build_symmetric_game(r)
        res = lambda_opt_instance(inst)
        num = lambda_opt_numeric(inst.states[0], inst.states[1])
        rows.append({"r": r, "lam": res.lam, "lam_hat": res.lam_hat,
                     "numeric": num})
    return {"rows": rows}, rows


def test_criterion4_lambda_closed_form():
    _, rows = run_experiment("lambda", THREADS_MAIN)
    worst_cf = max(abs(row["lam"] - 0.75) for row in rows)
    worst_num = max(abs(row["numeric"] - row["lam"]) for row in rows)
    ok = worst_cf < 1e-9 and worst_num < 1e-9
    ok = ok and all(abs(row["lam_hat"] - 2.0) < 1e-9 for row in rows)
    report("criterion 4 (lambda closed form)", ok,
           f"max |lam - 3/4| = {worst_cf:.2e}, "
           f"max closed-form vs numeric gap = {worst_num:.2e}")
    assert ok


# ---------------------------------------------------------------- criterion 5

def exp_wald_mc(threads):
    rv = ll.FiniteRV([-1.0, 1.0], [0.75, 0.25])
    r_star = ll.wald_exponent(rv)
    level = math.log(3.0)
    crossed, _ = ll.walk_supremum_mc(rv, 100_000, 10_000, level,
                                     base_seed=50_000)
    frac = float(crossed.mean())
    return {"r_star": r_star, "crossing_frac": frac}, (r_star, frac)


def test_criterion5_wald_dominance():
    _, (r_star, frac) = run_experiment("wald_mc", THREADS_MAIN)
    bound = math.exp(-math.log(3.0) ** 2)
    se = math.sqrt(max(frac * (1 - frac), 1e-12) / 100_000)
    ok = abs(r_star - math.log(3.0)) < 1e-10 and frac <= bound + 3 * se
    report("criterion 5 (Wald dominance)", ok,
           f"r* err {abs(r_star - math.log(3.0)):.2e} < 1e-10, "
           f"crossing {frac:.5f} <= bound {bound:.5f} + 3se")
    assert ok


# ---------------------------------------------------------------- criterion 6

def exp_azuma_mc(threads):
    rv = ll.FiniteRV([-1.0, 1.0], [0.5, 0.5])
    _, final = ll.walk_supremum_mc(rv, 100_000, 10_000, 300.0,
                                   base_seed=60_000)
    frac = float((final >= 300.0).mean())
    return {"exceed_frac": frac}, frac


def test_criterion6_azuma_dominance():
    _, frac = run_experiment("azuma_mc", THREADS_MAIN)
    bound = ll.azuma_bound([1.0] * 10_000, 300.0)
    se = math.sqrt(max(frac * (1 - frac), 1e-12) / 100_000)
    ok = frac <= bound + 3 * se
    report("criterion 6 (Azuma dominance)", ok,
           f"Pr[Z_N >= 300] = {frac:.5f} <= bound {bound:.5f} + 3se")
    assert ok


# ---------------------------------------------------------------- criterion 7

def exp_chernoff(threads):
    bern = ll.FiniteRV([0.0, 2.0], [0.5, 0.5])
    rate = ll.generalized_chernoff_rate(bern, 1.5, "upper")
    kl = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)
    # tau0 return times from the middle sweep cell of criterion 3
    _, cells = run_experiment("sweep_spec", threads)
    s = cells[1][1]
    pooled = np.concatenate([r.tau0_samples for r in s.runs])
    vals, counts = np.unique(pooled, return_counts=True)
    emp_rv = ll.FiniteRV(vals.astype(float), counts / counts.sum())
    mu = emp_rv.mean()
    c = ll.generalized_chernoff_rate(emp_rv, 1.5, "upper")
    tail = []
    for k in (1, 2, 3, 4, 5, 6, 8, 10):
        sums = []
        for r in s.runs:
            x = r.tau0_samples
            nb = x.size // k
            if nb:
                sums.append(x[:nb * k].reshape(nb, k).sum(axis=1))
        sums = np.concatenate(sums)
        frac = float((sums >= 1.5 * k * mu).mean())
        tail.append({"k": k, "frac": frac,
                     "bound": 2.0 * math.exp(-c * k),
                     "n_blocks": int(sums.size)})
    payload = {"bernoulli_rate": rate, "kl_oracle": kl,
               "tau0_rate": c, "tau0_mean": mu, "tail": tail}
    return payload, payload


def test_criterion7_generalized_chernoff():
    payload, _ = run_experiment("chernoff", THREADS_MAIN)
    ok = abs(payload["bernoulli_rate"] - payload["kl_oracle"]) < 1e-8
    violations = [row for row in payload["tail"]
                  if row["frac"] > row["bound"]]
    ok = ok and not violations
    report("criterion 7 (generalized Chernoff)", ok,
           f"rate err {abs(payload['bernoulli_rate'] - payload['kl_oracle']):.2e}, "
           f"tau0 rate {payload['tau0_rate']:.4f}, "
           f"tail checks {len(payload['tail']) - len(violations)}"
           f"/{len(payload['tail'])} under 2*exp(-ck)")
    assert ok, violations


# ---------------------------------------------------------------- criterion 8

def _d1_strategy(instance):
    # propose the status quo until the agent has learned the reform state,
    # then propose the reform forever; trigger carries a Wald margin making
    # the fallback probability below 1e-3
    f0, f1 = instance.states
    hold1 = ll.llr_increment_rv(f1, f1, f0, 1, 1)
    r_star = ll.wald_exponent(hold1.negated())
    step = hold1.max()
    trigger = step + math.log(1000.0) / r_star
    return ThresholdComposite(trigger_llr=trigger, pre=AlwaysPropose(0),
                              post=AlwaysPropose(1))


def exp_game(threads):
    inst = ll.build_symmetric_game(0.7)
    lam = lambda_opt_instance(inst)
    incs = (game_increment_rv(inst, 1, 1), game_increment_rv(inst, 1, 0),
            game_increment_rv(inst, 0, 1))
    sigma = build_sigma_eps(-2.0, 0.73, lam.m11, lam.msw, increments=incs)
    qs = estimate_qstar(inst, horizon=HORIZON, n_runs=RUNS, base_seed=8000,
                        threads=threads)
    ens_f1 = simulate_game(inst, _d1_strategy(inst), HORIZON, RUNS, 8100,
                           conditioning=1, threads=threads)
    ens_f0 = simulate_game(inst, sigma, HORIZON, RUNS, 8200,
                           conditioning=0, threads=threads)
    wrap = LearningWrapper(tau=200, eps=0.01, strat0=sigma,
                           strat1=AlwaysPropose(1))
    wrap_f0 = simulate_game(inst, wrap, HORIZON, RUNS, 8300,
                            conditioning=0, threads=threads)
    wrap_f1 = simulate_game(inst, wrap, HORIZON, RUNS, 8400,
                            conditioning=1, threads=threads)
    payload = {
        "lambda": lam.lam,
        "q_hat": qs.q_hat,
        "candidates": [[type(c.strategy).__name__, c.q_hat, c.payoff]
                       for c in qs.per_candidate],
        "payoff_f1_d1": ens_f1.to_dict(),
        "payoff_f0_sigma": ens_f0.to_dict(),
        "wrapper_f0": wrap_f0.to_dict(),
        "wrapper_f1": wrap_f1.to_dict(),
        "lambda_achieved": sigma.post.proposal_frequency,
    }
    extras = {"lam": lam, "qs": qs, "sigma": sigma, "ens_f1": ens_f1,
              "ens_f0": ens_f0, "wrap_f0": wrap_f0, "wrap_f1": wrap_f1}
    return payload, extras


def test_criterion8_payoff_formula_consistency():
    t0 = time.perf_counter()
    payload, ex = run_experiment("game", THREADS_MAIN)
    elapsed = time.perf_counter() - t0
    lam, qs = ex["lam"], ex["qs"]
    problems = []
    # reform-state leg: constant proposing absorbs the agent
    if not ex["ens_f1"].mean_payoff >= 0.95:
        problems.append(f"F1 payoff {ex['ens_f1'].mean_payoff:.4f} < 0.95")
    # sigma_eps achieves the q*lambda frontier in the status-quo state
    lo = qs.q_hat * 0.73 - 0.05
    hi = qs.q_hat * lam.lam + 0.05
    p0 = ex["ens_f0"].mean_payoff
    if not lo <= p0 <= hi:
        problems.append(f"F0 sigma payoff {p0:.4f} outside [{lo:.4f}, "
                        f"{hi:.4f}] (q_hat {qs.q_hat:.3f})")
    # learning wrapper reproduces the payoff formula at the symmetric prior
    overall = 0.5 * ex["wrap_f0"].mean_payoff + 0.5 * ex["wrap_f1"].mean_payoff
    want = theorem2_payoff([0.5, 0.5], qs.q_hat, payload["lambda_achieved"])
    if not abs(overall - want) <= 0.05:
        problems.append(f"wrapper payoff {overall:.4f} vs formula "
                        f"{want:.4f} differs by > 0.05")
    # auxiliary-game upper bound across every candidate strategy
    cap = qs.q_hat * lam.lam + 0.02
    for c in qs.per_candidate:
        if c.payoff > cap + 3 * c.payoff_stderr:
            problems.append(
                f"{type(c.strategy).__name__} payoff {c.payoff:.4f} exceeds "
                f"q_hat*lambda cap {cap:.4f}")
    # achievability with the constructed strategy
    floor = qs.q_hat * 0.73 - 3 * ex["ens_f0"].stderr_payoff - 0.02
    if not p0 >= floor:
        problems.append(f"sigma payoff {p0:.4f} below floor {floor:.4f}")
    if not elapsed < 600.0:
        problems.append(f"runtime {elapsed:.0f}s >= 600s")
    ok = not problems
    report("criterion 8 (payoff formula consistency)", ok,
           f"q_hat {qs.q_hat:.3f}, F1 {ex['ens_f1'].mean_payoff:.3f}, "
           f"F0 sigma {p0:.3f} in [{lo:.3f}, {hi:.3f}], wrapper "
           f"{overall:.3f} vs {want:.3f}, {elapsed:.0f}s"
           + ("" if ok else " | " + "; ".join(problems)))
    assert ok, "; ".join(problems)


# ---------------------------------------------------------------- criterion 9

def test_criterion9_posterior_martingale_exact():
    rng = np.random.default_rng(90_000)
    worst = 0.0
    for _ in range(100):
        k = int(rng.integers(0, 3))
        inst = random_regular_instance(
            rng, n_states=int(rng.integers(2, 5)),
            n_outcomes=int(rng.integers(2, 5)), k=k)
        for _ in range(20):
            depth = int(rng.integers(1, 7))
            hist = [int(a) for a in rng.integers(0, 2, size=depth)]
            b = Belief.from_prior(inst)
            for t in range(1, depth):
                y = sample_outcome(inst, hist[:t], t, rng)
                b = bayes_update(b, inst, hist[:t], t, y)
            t = depth
            # predictive mixture over the shared-lag conditional
            if t - k >= 1:
                a = hist[t - k - 1]
            else:
                a = inst.pre_history[len(inst.pre_history) + t - k - 1]
            probs = np.stack([s.probs[a] for s in inst.states])
            pred = b.posterior() @ probs
            exp_post = np.zeros(inst.n_states)
            for y in range(inst.n_outcomes):
                exp_post += pred[y] * bayes_update(b, inst, hist, t,
                                                   y).posterior()
            worst = max(worst, float(np.abs(exp_post
                                            - b.posterior()).max()))
    ok = worst <= 1e-10
    report("criterion 9 (posterior martingale)", ok,
           f"max one-step deviation {worst:.2e} <= 1e-10 over 100x20 checks")
    assert ok


# --------------------------------------------------------------- criterion 10

EXPERIMENTS = {
    "berk": exp_berk_benchmark,
    "cycling": exp_cycling,
    "sweep_spec": exp_sweep_spec,
    "sweep_paper": exp_sweep_paper_regime,
    "lambda": exp_lambda,
    "wald_mc": exp_wald_mc,
    "azuma_mc": exp_azuma_mc,
    "chernoff": exp_chernoff,
    "game": exp_game,
}

_DETERMINISM_SET = ["berk", "cycling", "sweep_spec", "lambda", "wald_mc",
                    "azuma_mc", "chernoff", "game"]


def test_criterion10_determinism_across_thread_counts():
    mismatches = []
    for name in _DETERMINISM_SET:
        a, _ = run_experiment(name, THREADS_MAIN)
        b, _ = run_experiment(name, THREADS_ALT)
        if canonical_bytes(a) != canonical_bytes(b):
            mismatches.append(name)
    ok = not mismatches
    report("criterion 10 (determinism)", ok,
           f"{len(_DETERMINISM_SET) - len(mismatches)}"
           f"/{len(_DETERMINISM_SET)} experiment payloads byte-identical "
           f"across thread counts {THREADS_MAIN} vs {THREADS_ALT}"
           + ("" if ok else f" | mismatched: {mismatches}"))
    assert ok, mismatches
