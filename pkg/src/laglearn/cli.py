"""Command-line front end.

Subcommands: simulate | sweep | bounds | game | validate.  Config files are
JSON with a versioned ``schema: 1`` field; flags override config entries.
Exit codes: 0 success, 1 runtime error, 2 invalid input.
"""

import argparse
import inspect
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bounds as bounds_mod
from . import game as game_mod
from . import report
from ._backend import active_backend
from .agent import (GridValueIteration, Myopic, ThresholdLLR,
                    myopic_indifference_llr)
from .instances import BUILDERS, validate_theorem1_recipe
from .model import Instance, check_regular, is_lag_misspecified
from .simulate import monte_carlo


class CliError(Exception):
    """Invalid input; maps to exit code 2."""


def _load_config(path) -> dict:
    if path is None:
        raise CliError("a --config file is required")
    p = Path(path)
    if not p.exists():
        raise CliError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise CliError(f"malformed config {p}: line {e.lineno}: {e.msg}")
    if cfg.get("schema") != 1:
        raise CliError("config must declare \"schema\": 1")
    return cfg


def build_instance(spec: dict) -> Instance:
    if "builder" in spec:
        name = spec["builder"]
        if name not in BUILDERS:
            raise CliError(f"unknown builder {name!r}; "
                           f"choose from {sorted(BUILDERS)}")
        fn = BUILDERS[name]
        params = {k: v for k, v in spec.items() if k != "builder"}
        allowed = set(inspect.signature(fn).parameters)
        for k in params:
            if k not in allowed:
                raise CliError(f"unknown parameter {k!r} for builder {name!r}")
        try:
            return fn(**params)
        except (ValueError, TypeError) as e:
            raise CliError(f"builder {name!r}: {e}")
    if "states" in spec:
        try:
            return Instance.from_dict(spec)
        except (KeyError, ValueError, TypeError) as e:
            raise CliError(f"bad inline instance: {e}")
    raise CliError("instance spec needs a \"builder\" or inline \"states\"")


def build_policy(spec) -> object:
    """Agent policy from a config section: myopic (default), an explicit
    LLR threshold, or grid value iteration for discounted two-state runs."""
    if spec is None:
        return Myopic()
    kind = spec.get("type", "myopic")
    try:
        if kind == "myopic":
            return Myopic()
        if kind == "threshold":
            return ThresholdLLR(
                l_star=float(spec["l_star"]),
                prefer_low=int(spec.get("prefer_low", 1)),
                hyp_i=int(spec.get("hyp_i", 0)),
                hyp_j=int(spec.get("hyp_j", 1)))
        if kind == "grid":
            return GridValueIteration(
                grid_size=int(spec.get("grid_size", 2001)),
                discount=float(spec["discount"]),
                convergence_tol=float(spec.get("convergence_tol", 1e-10)))
    except (KeyError, ValueError, TypeError) as e:
        raise CliError(f"bad policy spec: {e}")
    raise CliError(f"unknown policy type {kind!r}")


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("LAGLEARN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(f"bad LAGLEARN_THREADS value: {env!r}")
    return os.cpu_count() or 1


def _resolved_sim_config(cfg: dict, args) -> dict:
    out = dict(cfg)
    if args.runs is not None:
        out["runs"] = args.runs
    if args.horizon is not None:
        out["horizon"] = args.horizon
    if args.seed is not None:
        out["seed"] = args.seed
    if args.eps is not None:
        out["eps"] = args.eps
    if args.tail_fraction is not None:
        out["tail_fraction"] = args.tail_fraction
    out.setdefault("runs", 200)
    out.setdefault("horizon", 100_000)
    out.setdefault("seed", 0)
    out.setdefault("eps", 0.05)
    out.setdefault("tail_fraction", 0.5)
    return out


def cmd_simulate(args) -> int:
    cfg = _resolved_sim_config(_load_config(args.config), args)
    if "instance" not in cfg:
        raise CliError("config needs an \"instance\" section")
    instance = build_instance(cfg["instance"])
    policy = build_policy(cfg.get("policy"))
    summary = monte_carlo(
        instance, policy, cfg["horizon"], cfg["runs"], cfg["seed"],
        eps=cfg["eps"], tail_fraction=cfg["tail_fraction"],
        threads=_threads(args),
    )
    out = Path(args.out) if args.out else Path("runs.csv")
    out.write_bytes(report.runs_csv_bytes(summary.runs, cfg))
    jpath = out.with_suffix(".summary.json")
    jpath.write_bytes(report.summary_json_bytes(summary.to_dict(), cfg))
    print(f"wrote {out} and {jpath}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _resolved_sim_config(_load_config(args.config), args)
    if "instance" not in cfg or "builder" not in cfg.get("instance", {}):
        raise CliError("sweep needs an \"instance\" with a builder")
    grid = cfg.get("grid")
    if not grid or not isinstance(grid, dict):
        raise CliError("sweep needs a non-empty \"grid\" object")
    names = list(grid.keys())
    for name, vals in grid.items():
        if not isinstance(vals, list) or not vals:
            raise CliError(f"grid entry {name!r} must be a non-empty list")
    builder = cfg["instance"]["builder"]
    fn = BUILDERS.get(builder)
    if fn is None:
        raise CliError(f"unknown builder {builder!r}")
    allowed = set(inspect.signature(fn).parameters)
    for name in names:
        if name not in allowed:
            raise CliError(f"unknown parameter {name!r} for builder "
                           f"{builder!r}")
    policy = build_policy(cfg.get("policy"))
    # cross product in declared order (row order == grid order)
    cells = [{}]
    for name in names:
        cells = [dict(c, **{name: v}) for c in cells for v in grid[name]]
    rows = []
    for cell in cells:
        spec = dict(cfg["instance"])
        spec.update(cell)
        instance = build_instance(spec)
        s = monte_carlo(instance, policy, cfg["horizon"], cfg["runs"],
                        cfg["seed"], eps=cfg["eps"],
                        tail_fraction=cfg["tail_fraction"],
                        threads=_threads(args))
        rows.append((cell, s))
    out = Path(args.out) if args.out else Path("sweep.csv")
    out.write_bytes(report.sweep_csv_bytes(names, rows, cfg))
    print(f"wrote {out} ({len(rows)} rows)")
    return 0


def _parse_floats(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",") if x != ""])
    except ValueError:
        raise CliError(f"expected a comma-separated float list, got {text!r}")


def _emit_json(obj: dict, out, args=None) -> None:
    if args is not None:
        resolved = {k: v for k, v in vars(args).items()
                    if k not in ("fn", "out") and not callable(v)}
        obj = dict(obj)
        obj["config_hash"] = report.config_hash(resolved)
    data = (json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")
    if out:
        Path(out).write_text(data)
    else:
        sys.stdout.write(data)


def _require(cond, message):
    if not cond:
        raise CliError(message)


def cmd_bounds(args) -> int:
    if args.kind == "wald":
        _require(args.values and args.probs,
                 "wald needs --values and --probs")
        rv = bounds_mod.FiniteRV(_parse_floats(args.values),
                                 _parse_floats(args.probs))
        r_star = bounds_mod.wald_exponent(rv)
        res = {"kind": "wald", "values": rv.values.tolist(),
               "probs": rv.probs.tolist(), "mean": rv.mean(),
               "r_star": r_star}
        if args.c is not None:
            res["c"] = args.c
            res["bound"] = math.exp(-r_star * args.c)
        if args.mc_walks:
            _require(args.c is not None, "--mc-walks needs a --c level")
            crossed, _ = bounds_mod.walk_supremum_mc(
                rv, args.mc_walks, args.mc_steps, args.c, args.seed or 0)
            res["mc"] = {"walks": args.mc_walks, "steps": args.mc_steps,
                         "crossing_frac": float(crossed.mean())}
    elif args.kind == "azuma":
        _require(args.eps1 is not None, "azuma needs --eps1")
        if args.c_seq:
            c_seq = _parse_floats(args.c_seq)
        else:
            c_seq = np.full(args.n, args.c_const)
        res = {"kind": "azuma", "n": int(c_seq.size), "eps1": args.eps1,
               "bound": bounds_mod.azuma_bound(c_seq, args.eps1)}
    else:  # chernoff
        _require(args.values and args.probs and args.lam is not None,
                 "chernoff needs --values, --probs and --lam")
        rv = bounds_mod.FiniteRV(_parse_floats(args.values),
                                 _parse_floats(args.probs))
        rate = bounds_mod.generalized_chernoff_rate(rv, args.lam, args.side)
        res = {"kind": "chernoff", "lam": args.lam, "side": args.side,
               "mean": rv.mean(),
               "rate": rate if math.isfinite(rate) else "inf"}
    _emit_json(res, args.out, args)
    return 0


def _parse_strategy(args, instance):
    name = args.strategy
    if name == "mirror":
        return game_mod.Mirror()
    if name == "always":
        return game_mod.AlwaysPropose(args.propose_action)
    if name == "block":
        if args.t1 is None or args.t2 is None:
            raise CliError("block strategy needs --t1 and --t2")
        return game_mod.Block(args.t1, args.t2)
    if name == "sigma-eps":
        res = game_mod.lambda_opt_instance(instance)
        if not 0.5 < res.lam < 1.0:
            raise CliError("sigma-eps needs the mislearning regime "
                           "(lambda in (1/2, 1))")
        target = args.lambda_target or (res.lam - 0.02)
        incs = (game_mod.game_increment_rv(instance, 1, 1),
                game_mod.game_increment_rv(instance, 1, 0),
                game_mod.game_increment_rv(instance, 0, 1))
        return game_mod.build_sigma_eps(args.l_eps_star, target, res.m11,
                                        res.msw, increments=incs)
    if name == "wrapper":
        inner = game_mod.build_sigma_eps
        res = game_mod.lambda_opt_instance(instance)
        if not 0.5 < res.lam < 1.0:
            raise CliError("wrapper default needs lambda in (1/2, 1)")
        incs = (game_mod.game_increment_rv(instance, 1, 1),
                game_mod.game_increment_rv(instance, 1, 0),
                game_mod.game_increment_rv(instance, 0, 1))
        sig = inner(args.l_eps_star, args.lambda_target or (res.lam - 0.02),
                    res.m11, res.msw, increments=incs)
        return game_mod.LearningWrapper(args.tau, args.wrapper_eps, sig,
                                        game_mod.AlwaysPropose(1))
    raise CliError(f"unknown strategy {name!r}")


def cmd_game(args) -> int:
    try:
        instance = BUILDERS["symmetric"](r=args.r, k_star=args.k_star)
    except ValueError as e:
        raise CliError(str(e))
    strategy = _parse_strategy(args, instance)
    lam = game_mod.lambda_opt_instance(instance)
    horizon = args.horizon or 100_000
    runs = args.runs or 200
    seed = args.seed or 0
    threads = _threads(args)
    qs = game_mod.estimate_qstar(instance, horizon=horizon, n_runs=runs,
                                 base_seed=seed, threads=threads)
    res = {
        "builder": "symmetric", "r": args.r, "mode": args.mode,
        "lambda": lam.lam, "lambda_hat":
            lam.lam_hat if math.isfinite(lam.lam_hat) else "inf",
        "q_hat": qs.q_hat,
        "q_candidates": [[type(c.strategy).__name__, c.q_hat, c.q_stderr,
                          c.payoff] for c in qs.per_candidate],
        "theorem2_payoff": game_mod.theorem2_payoff(
            instance.prior, qs.q_hat, lam.lam),
    }
    if args.mode == "auxiliary":
        state = {"F0": 0, "F1": 1}.get(args.state)
        if state is None:
            raise CliError("auxiliary mode needs --state F0 or F1")
        ens = game_mod.simulate_game(instance, strategy, horizon, runs, seed,
                                     conditioning=state, threads=threads)
        res["simulated"] = ens.to_dict()
    elif args.mode == "symmetric":
        combined = {}
        total = 0.0
        for state in (0, 1):
            ens = game_mod.simulate_game(instance, strategy, horizon, runs,
                                         seed, conditioning=state,
                                         threads=threads)
            combined[f"F{state}"] = ens.to_dict()
            total += float(instance.prior[state]) * ens.mean_payoff
        res["simulated"] = combined
        res["overall_payoff"] = total
    else:
        raise CliError(f"unknown mode {args.mode!r}")
    _emit_json(res, args.out, args)
    return 0


def cmd_validate(args) -> int:
    cfg = _load_config(args.config)
    if "instance" not in cfg:
        raise CliError("config needs an \"instance\" section")
    instance = build_instance(cfg["instance"])
    violations = check_regular(instance)
    res = {
        "regular": not violations,
        "violations": [{"kind": v.kind, "message": v.message}
                       for v in violations],
        "lag_misspecified": is_lag_misspecified(instance),
        "optimal_action": instance.optimal_action(),
    }
    if instance.n_actions == 2 and instance.n_states >= 2:
        try:
            res["myopic_indifference_llr_01"] = myopic_indifference_llr(
                instance, 0, 1)
        except ValueError:
            pass  # the leading pair ranks the actions identically
    if instance.n_states == 3 and instance.n_actions == 2 \
            and instance.true_state_index == 2:
        rep = validate_theorem1_recipe(instance, kl_min=args.kl_min,
                                       drift_tol=args.drift_tol)
        res["recipe"] = {
            "kl_value": rep.kl_value, "kl_pass": rep.kl_pass,
            "drift_hold0": rep.drift_hold0, "drift_hold1": rep.drift_hold1,
            "sign_pass": rep.sign_pass,
            "stay_drift_abs": rep.stay_drift_abs, "stay_pass": rep.stay_pass,
            "all_pass": rep.all_pass,
        }
    _emit_json(res, args.out, args)
    return 0


def _add_common(p):
    p.add_argument("--out", help="output path (default: stdout or runs.csv)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (fallback: LAGLEARN_THREADS, then "
                        "available parallelism)")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="laglearn",
        description="Misspecified-lag Bayesian learning simulator "
                    f"(backend: {active_backend()})")
    sub = ap.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="Monte Carlo ensemble for a config")
    ps.add_argument("--config", required=True)
    ps.add_argument("--runs", type=int, default=None)
    ps.add_argument("--horizon", type=int, default=None)
    ps.add_argument("--eps", type=float, default=None)
    ps.add_argument("--tail-fraction", type=float, default=None,
                    dest="tail_fraction")
    _add_common(ps)
    ps.set_defaults(fn=cmd_simulate)

    pw = sub.add_parser("sweep", help="parameter-grid sweep of a builder")
    pw.add_argument("--config", required=True)
    pw.add_argument("--runs", type=int, default=None)
    pw.add_argument("--horizon", type=int, default=None)
    pw.add_argument("--eps", type=float, default=None)
    pw.add_argument("--tail-fraction", type=float, default=None,
                    dest="tail_fraction")
    _add_common(pw)
    pw.set_defaults(fn=cmd_sweep)

    pb = sub.add_parser("bounds", help="concentration-bound reports")
    pb.add_argument("kind", choices=["wald", "azuma", "chernoff"])
    pb.add_argument("--values", help="comma-separated support")
    pb.add_argument("--probs", help="comma-separated probabilities")
    pb.add_argument("--c", type=float, default=None, help="Wald level")
    pb.add_argument("--c-seq", dest="c_seq", help="Azuma increment bounds")
    pb.add_argument("--c-const", dest="c_const", type=float, default=1.0)
    pb.add_argument("--n", type=int, default=10_000)
    pb.add_argument("--eps1", type=float, default=None)
    pb.add_argument("--lam", type=float, default=None)
    pb.add_argument("--side", choices=["upper", "lower"], default="upper")
    pb.add_argument("--mc-walks", dest="mc_walks", type=int, default=0)
    pb.add_argument("--mc-steps", dest="mc_steps", type=int, default=10_000)
    _add_common(pb)
    pb.set_defaults(fn=cmd_bounds)

    pg = sub.add_parser("game", help="policy-choice game experiments")
    pg.add_argument("--builder", default="symmetric",
                    choices=["symmetric"])
    pg.add_argument("--r", type=float, required=True)
    pg.add_argument("--k-star", dest="k_star", type=int, default=1)
    pg.add_argument("--mode", choices=["auxiliary", "symmetric"],
                    default="auxiliary")
    pg.add_argument("--state", choices=["F0", "F1"], default=None)
    pg.add_argument("--strategy", default="mirror",
                    choices=["mirror", "always", "block", "sigma-eps",
                             "wrapper"])
    pg.add_argument("--propose-action", dest="propose_action", type=int,
                    default=1)
    pg.add_argument("--t1", type=int, default=None)
    pg.add_argument("--t2", type=int, default=None)
    pg.add_argument("--l-eps-star", dest="l_eps_star", type=float,
                    default=-2.0)
    pg.add_argument("--lambda-target", dest="lambda_target", type=float,
                    default=None)
    pg.add_argument("--tau", type=int, default=200)
    pg.add_argument("--wrapper-eps", dest="wrapper_eps", type=float,
                    default=0.01)
    pg.add_argument("--runs", type=int, default=None)
    pg.add_argument("--horizon", type=int, default=None)
    _add_common(pg)
    pg.set_defaults(fn=cmd_game)

    pv = sub.add_parser("validate", help="regularity and recipe checks")
    pv.add_argument("--config", required=True)
    pv.add_argument("--kl-min", dest="kl_min", type=float, default=2.0)
    pv.add_argument("--drift-tol", dest="drift_tol", type=float, default=0.1)
    _add_common(pv)
    pv.set_defaults(fn=cmd_validate)
    return ap


_LIST_FLAGS = {"--values", "--probs", "--c-seq"}


def _merge_negative_lists(argv):
    """Let ``--values -1,1`` parse: argparse reads a leading dash as an
    option, so glue obviously-numeric list arguments onto their flag."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _LIST_FLAGS:
            nxt = next(it, None)
            if nxt is None:
                out.append(tok)
            elif nxt.startswith("-") and set(nxt) <= set("0123456789.,-eE+"):
                out.append(f"{tok}={nxt}")
            else:
                out.extend([tok, nxt])
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    ap = make_parser()
    if argv is None:
        argv = sys.argv[1:]
    try:
        args = ap.parse_args(_merge_negative_lists(list(argv)))
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure
        print(f"runtime error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
