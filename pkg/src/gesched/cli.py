"""Command line front end: solve, verify, simulate, compare, sweep.

Every command reads an optional flat `key = value` config file, applies flag
overrides (flags win), writes its outputs into --out-dir, and records a
manifest.json describing the run: command, resolved configuration, seed,
package version, output paths, wall-clock duration. Re-running the same
command line reproduces every data file byte for byte (the manifest differs
in its duration field).

Exit codes:
  0  success
  1  usage or config error
  2  model assumption violated
  3  value iteration did not converge
  4  a verification check failed
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, sim, verify
from .model import (AssumptionViolation, ConfigError, ModelParams,
                    ParameterError, SolverConfig, build_from_mapping,
                    config_mapping, parse_config_text)
from .solver import (NEVER, NonConvergence, StructureViolation,
                     export_q_csv, export_solution_json, export_table_csv,
                     export_thresholds_csv, extract_thresholds, solve, unfold)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ASSUMPTION = 2
EXIT_NO_CONVERGENCE = 3
EXIT_VERIFY_FAILED = 4

_SWEEPABLE = ("lambda", "beta", "a", "p01", "p11")


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; we reserve 2 for assumptions."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_common(sp):
    sp.add_argument("config", nargs="?", default=None,
                    help="flat key = value config file (all keys optional)")
    sp.add_argument("--out-dir", default=".", help="output directory")
    m = sp.add_argument_group("model overrides")
    m.add_argument("--a", type=float, default=None)
    m.add_argument("--p01", type=float, default=None)
    m.add_argument("--p11", type=float, default=None)
    m.add_argument("--lambda", type=float, default=None, dest="lam")
    m.add_argument("--beta", type=float, default=None)
    m.add_argument("--allow-unordered-channel", action="store_true",
                   default=None)
    s = sp.add_argument_group("solver overrides")
    s.add_argument("--e-max", type=float, default=None)
    s.add_argument("--n-error", type=int, default=None)
    s.add_argument("--n-belief", type=int, default=None)
    s.add_argument("--vi-tolerance", type=float, default=None)
    s.add_argument("--max-iterations", type=int, default=None)
    s.add_argument("--pad-sigmas", type=float, default=None)


_FLAG_TO_KEY = {
    "a": "a", "p01": "p01", "p11": "p11", "lam": "lambda", "beta": "beta",
    "allow_unordered_channel": "allow_unordered_channel",
    "e_max": "e_max", "n_error": "n_error", "n_belief": "n_belief",
    "vi_tolerance": "vi_tolerance", "max_iterations": "max_iterations",
    "pad_sigmas": "pad_sigmas",
}


def _resolve(args) -> tuple[ModelParams, SolverConfig]:
    raw: dict = {}
    if args.config is not None:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                raw = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}")
    for attr, key in _FLAG_TO_KEY.items():
        value = getattr(args, attr, None)
        if value is not None:
            raw[key] = value
    return build_from_mapping(raw)


def _write_manifest(out_dir: Path, command: str, params, config, seed,
                    outputs, t0: float, extra: dict | None = None) -> Path:
    manifest = {
        "command": command,
        "version": __version__,
        "configuration": config_mapping(params, config),
        "seed": seed,
        "outputs": sorted([str(p.name) for p in outputs] + ["manifest.json"]),
        "duration_seconds": round(time.time() - t0, 3),
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _make_policy(name, args, params, config):
    """Policy instance by name; 'threshold' solves the model first."""
    if name == "threshold":
        sol = solve(params, config, "folded")
        return sim.ThresholdPolicy(extract_thresholds(sol.q))
    if name == "always":
        return sim.AlwaysTransmit()
    if name == "never":
        return sim.NeverTransmit()
    if name == "periodic":
        return sim.Periodic(args.period)
    if name == "error-threshold":
        return sim.ErrorThreshold(args.theta)
    raise ConfigError(f"unknown policy {name!r} (expected threshold, always, "
                      "never, periodic, error-threshold)")


def cmd_solve(args) -> int:
    t0 = time.time()
    params, config = _resolve(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sol = solve(params, config, "folded")
    profile = extract_thresholds(sol.q)

    outputs = []
    p = out_dir / "value_table.csv"; export_table_csv(sol.value, p); outputs.append(p)
    p = out_dir / "q_tables.csv"; export_q_csv(sol.q, p); outputs.append(p)
    p = out_dir / "thresholds.csv"; export_thresholds_csv(profile, p); outputs.append(p)
    if args.mode == "original":
        sol_orig = solve(params, config, "original")
        p = out_dir / "value_table_original.csv"
        export_table_csv(sol_orig.value, p)
        outputs.append(p)
    if args.json:
        p = out_dir / "solution.json"; export_solution_json(sol, p); outputs.append(p)

    extra = {"iterations": sol.value.iteration,
             "residual": sol.value.residual,
             "sup_norm_error_bound": sol.error_bound}
    outputs.append(_write_manifest(out_dir, "solve", params, config, None,
                                   outputs, t0, extra))
    core_b = profile.b_star[profile.error_grid.core]
    finite = core_b[np.isfinite(core_b)]
    print(f"converged in {sol.value.iteration} iterations, "
          f"residual {sol.value.residual:.3e} "
          f"(value error bound {sol.error_bound:.3e})")
    if finite.size:
        print(f"threshold profile: {finite.size}/{core_b.size} rows "
              f"transmit for some belief, b* range "
              f"[{finite.min():.4f}, {finite.max():.4f}]")
    else:
        print("threshold profile: transmission never optimal on the grid")
    for path in outputs:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    t0 = time.time()
    params, config = _resolve(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = verify.run_all(params, config, n_random_triples=args.n_random,
                            seed=args.seed)
    outputs = []
    p = out_dir / "report.txt"; verify.export_report_text(report, p); outputs.append(p)
    p = out_dir / "report.json"; verify.export_report_json(report, p); outputs.append(p)
    outputs.append(_write_manifest(out_dir, "verify", params, config,
                                   args.seed, outputs, t0,
                                   {"overall": report.overall}))
    print(report.to_text())
    for path in outputs:
        print(f"wrote {path}")
    return EXIT_OK if report.overall else EXIT_VERIFY_FAILED


def cmd_simulate(args) -> int:
    t0 = time.time()
    params, config = _resolve(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    policy = _make_policy(args.policy, args, params, config)
    stats = sim.estimate_cost(policy, params, horizon=args.horizon,
                              n_episodes=args.episodes, base_seed=args.seed,
                              init_error=args.init_error)
    outputs = []
    p = out_dir / "stats.csv"; sim.export_stats_csv(stats, p); outputs.append(p)
    p = out_dir / "mse.csv"; sim.export_mse_csv(stats, p); outputs.append(p)
    if args.trace:
        trace = sim.run_episode(policy, params, args.horizon, args.seed,
                                episode=0, init_error=args.init_error)
        p = out_dir / "trace.csv"; sim.export_trace_csv(trace, p); outputs.append(p)
    outputs.append(_write_manifest(out_dir, "simulate", params, config,
                                   args.seed, outputs, t0,
                                   {"policy": stats.policy,
                                    "episodes": args.episodes,
                                    "horizon": args.horizon,
                                    "init_error": args.init_error}))
    print(f"{stats.policy}: mean discounted cost {stats.mean_cost:.6g} "
          f"+- {stats.se_cost:.3g} over {stats.n_episodes} episodes "
          f"(tail bias <= {stats.tail_bias_bound:.2e})")
    for path in outputs:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    t0 = time.time()
    params, config = _resolve(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = [n.strip() for n in args.policies.split(",") if n.strip()]
    if not names:
        raise ConfigError("--policies needs at least one policy name")
    policies = [_make_policy(n, args, params, config) for n in names]
    result = sim.compare_policies(policies, params, horizon=args.horizon,
                                  n_episodes=args.episodes,
                                  base_seed=args.seed,
                                  init_error=args.init_error)
    outputs = []
    p = out_dir / "comparison.csv"; result.to_csv(p); outputs.append(p)
    outputs.append(_write_manifest(out_dir, "compare", params, config,
                                   args.seed, outputs, t0,
                                   {"policies": [r.stats.policy
                                                 for r in result.rows],
                                    "episodes": args.episodes,
                                    "horizon": args.horizon}))
    width = max(len(r.stats.policy) for r in result.rows)
    for r in result.rows:
        print(f"{r.stats.policy:<{width}}  mean {r.stats.mean_cost:10.4f}  "
              f"diff vs first {r.diff_mean:+10.4f} +- {r.diff_se:.4f}")
    for path in outputs:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    t0 = time.time()
    params, config = _resolve(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.param not in _SWEEPABLE:
        raise ConfigError(f"--param must be one of {', '.join(_SWEEPABLE)}")
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --values list: {exc}")
    if not values:
        raise ConfigError("--values needs at least one number")

    base = config_mapping(params, config)
    outputs = []
    summary_rows = []
    profiles = []
    for value in values:
        raw = dict(base)
        raw[args.param] = value
        p_i, c_i = build_from_mapping(raw)
        sol = solve(p_i, c_i, "folded")
        profile = extract_thresholds(sol.q)
        profiles.append(profile)
        tag = ("%g" % value).replace(".", "p").replace("-", "m")
        path = out_dir / f"thresholds_{args.param}_{tag}.csv"
        export_thresholds_csv(profile, path)
        outputs.append(path)
        core_b = profile.b_star[profile.error_grid.core]
        finite = core_b[np.isfinite(core_b)]
        summary_rows.append((
            value, sol.value.iteration, sol.value.residual,
            float(finite.min()) if finite.size else "",
            float(finite.max()) if finite.size else "",
            int(finite.size), path.name))

    spath = out_dir / "sweep_summary.csv"
    with open(spath, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("value,iterations,residual,b_star_min,b_star_max,"
                 "rows_transmitting,thresholds_file\n")
        for row in summary_rows:
            fh.write(",".join("" if v == "" else
                              (v if isinstance(v, str) else "%.12g" % v
                               if isinstance(v, float) else str(v))
                              for v in row) + "\n")
    outputs.append(spath)
    outputs.append(_write_manifest(out_dir, "sweep", params, config, None,
                                   outputs, t0,
                                   {"param": args.param, "values": values}))
    n_core = profiles[0].error_grid.n_core
    for row in summary_rows:
        print(f"{args.param}={row[0]:g}: {row[1]} iterations, "
              f"{row[5]}/{n_core} rows transmitting")
    # pointwise ordering across consecutive profiles, reported as observation
    if len(profiles) > 1 and values == sorted(values):
        order = _profile_ordering(profiles)
        if order:
            print(f"observation: thresholds are pointwise {order} in "
                  f"{args.param} over this sweep")
    for path in outputs:
        print(f"wrote {path}")
    return EXIT_OK


def _profile_ordering(profiles):
    """'non-decreasing'/'non-increasing' if every consecutive pair orders.

    Compares the common [0, e_max] block; padding length can differ across
    the sweep when the swept parameter moves the kernel support.
    """
    cores = [p.b_star[p.error_grid.core] for p in profiles]
    up = all(np.all(q >= p - 1e-12) for p, q in zip(cores, cores[1:]))
    down = all(np.all(q <= p + 1e-12) for p, q in zip(cores, cores[1:]))
    if up and not down:
        return "non-decreasing"
    if down and not up:
        return "non-increasing"
    return ""


def build_parser() -> _Parser:
    parser = _Parser(prog="gesched",
                     description="Threshold scheduling for remote estimation "
                                 "over a two-state Markov channel.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="cmd", required=True,
                                parser_class=_Parser)

    sp = sub.add_parser("solve", help="value-iterate and export tables")
    _add_common(sp)
    sp.add_argument("--mode", choices=("folded", "original"),
                    default="folded",
                    help="original additionally writes the symmetric-grid "
                         "value table")
    sp.add_argument("--json", action="store_true",
                    help="also write solution.json")
    sp.set_defaults(fn=cmd_solve)

    sp = sub.add_parser("verify", help="run all structural checks")
    _add_common(sp)
    sp.add_argument("--n-random", type=int, default=10000,
                    help="random triples for the mixing check")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("simulate", help="Monte Carlo cost of one policy")
    _add_common(sp)
    sp.add_argument("--policy", default="threshold",
                    help="threshold | always | never | periodic | "
                         "error-threshold")
    sp.add_argument("--period", type=int, default=2,
                    help="period for --policy periodic")
    sp.add_argument("--theta", type=float, default=1.0,
                    help="|e| cutoff for --policy error-threshold")
    sp.add_argument("--episodes", type=int, default=1000)
    sp.add_argument("--horizon", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--init-error", type=float, default=0.0)
    sp.add_argument("--trace", action="store_true",
                    help="also write the first episode's full trace")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("compare", help="paired comparison of policies")
    _add_common(sp)
    sp.add_argument("--policies", default="threshold,always,never",
                    help="comma-separated policy names (first is baseline)")
    sp.add_argument("--period", type=int, default=2)
    sp.add_argument("--theta", type=float, default=1.0)
    sp.add_argument("--episodes", type=int, default=1000)
    sp.add_argument("--horizon", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--init-error", type=float, default=0.0)
    sp.set_defaults(fn=cmd_compare)

    sp = sub.add_parser("sweep", help="re-solve across one parameter")
    _add_common(sp)
    sp.add_argument("--param", required=True,
                    help=f"one of {', '.join(_SWEEPABLE)}")
    sp.add_argument("--values", required=True,
                    help="comma-separated numbers")
    sp.set_defaults(fn=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AssumptionViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except StructureViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY_FAILED


if __name__ == "__main__":
    sys.exit(main())
