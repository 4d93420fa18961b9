"""Canonical CSV/JSON emission.

All output is byte-deterministic: floats use repr round-tripping, JSON keys
are sorted, and every artifact carries the hash of the resolved config in a
header comment (CSV) or field (JSON).
"""

import hashlib
import io
import json

CSV_COLUMNS = [
    "seed", "freq_optimal", "n_switch_01", "n_switch_10",
    "mean_tau0", "mean_tau1", "var_tau0", "var_tau1", "event_eps_hit",
    "min_post_true", "max_post_true", "final_post_true",
    # appended columns (schema only ever grows on the right)
    "freq_optimal_tail", "censored_run_action", "censored_run_length",
]


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _cell(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def runs_csv_bytes(runs, config: dict) -> bytes:
    """Per-run CSV for a Monte Carlo ensemble (one row per seed)."""
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash(config)} schema=1\n")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in runs:
        row = [r.seed, r.freq_optimal, r.n_switch_01, r.n_switch_10,
               r.mean_tau0(), r.mean_tau1(), r.var_tau0(), r.var_tau1(),
               r.event_eps_hit, r.min_posterior_true, r.max_posterior_true,
               r.final_posterior_true, r.freq_optimal_tail,
               r.censored_run_action, r.censored_run_length]
        buf.write(",".join(_cell(x) for x in row) + "\n")
    return buf.getvalue().encode("utf-8")


def summary_json_bytes(summary_dict: dict, config: dict) -> bytes:
    payload = {"schema": 1, "config_hash": config_hash(config)}
    payload.update(summary_dict)
    return (json.dumps(payload, sort_keys=True, separators=(",", ":"))
            + "\n").encode("utf-8")


def sweep_csv_bytes(param_names, rows, config: dict) -> bytes:
    """Long-format sweep CSV: one row per grid cell, parameters first."""
    stat_cols = [
        "mean_freq_optimal", "stderr_freq_optimal", "mean_freq_optimal_tail",
        "mean_switches", "mean_tau0", "var_tau0", "n_tau0",
        "mean_tau1", "var_tau1", "n_tau1", "event_eps_frac",
        "mean_min_post_true", "mean_max_post_true", "mean_final_post_true",
    ]
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash(config)} schema=1\n")
    buf.write(",".join(list(param_names) + stat_cols) + "\n")
    for params, s in rows:
        vals = [params[k] for k in param_names]
        vals += [s.mean_freq_optimal, s.stderr_freq_optimal,
                 s.mean_freq_optimal_tail, s.mean_switches,
                 s.tau0.mean, s.tau0.var, s.tau0.n_samples,
                 s.tau1.mean, s.tau1.var, s.tau1.n_samples,
                 s.event_eps_frac, s.mean_min_posterior_true,
                 s.mean_max_posterior_true, s.mean_final_posterior_true]
        buf.write(",".join(_cell(x) for x in vals) + "\n")
    return buf.getvalue().encode("utf-8")
