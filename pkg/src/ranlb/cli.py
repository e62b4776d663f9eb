"""Command-line entry points: run one experiment, sweep seeds and schemes,
replay the embedded worked example, and run the lemma-verification suites.

Exit codes: 0 success, 1 runtime failure (or failed checks), 2 configuration
or usage problems.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .baselines import SCHEMES
from .harness import MetricsBundle, ScenarioConfig, load_scenario, run_experiment, write_run_csvs


def _load_and_validate(path) -> ScenarioConfig:
    config = load_scenario(path)
    problems = config.validate()
    if config.channel.mode == "trace":
        manifest = config.channel.trace_manifest
        if manifest and not os.path.exists(manifest):
            problems.append(f"MissingTraceManifest: {manifest} not found")
    if problems:
        raise _ConfigError("\n".join(problems))
    return config


class _ConfigError(Exception):
    pass


def cmd_run(args) -> int:
    try:
        config = _load_and_validate(args.config)
    except _ConfigError as exc:
        print(f"configuration invalid:\n{exc}", file=sys.stderr)
        return 2
    try:
        bundle = run_experiment(config)
        write_run_csvs(bundle, args.out)
    except Exception as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out} (scheme={config.scheme}, seed={config.seed}, "
          f"invocations={bundle.invocations})")
    return 0


def _sweep_one(payload):
    cfg_dict, seed, scheme, out_dir = payload
    config = ScenarioConfig.from_dict(cfg_dict)
    config.seed = seed
    config.scheme = scheme
    bundle = run_experiment(config)
    write_run_csvs(bundle, out_dir)
    rows = []
    for sid in sorted(bundle.slice_epsilon):
        rows.append(
            {
                "scheme": scheme,
                "seed": seed,
                "slice_id": sid,
                "epsilon": bundle.slice_epsilon[sid],
                "weighted_pf_metric": bundle.slice_weighted_pf(sid),
                "p10_throughput_bps": bundle.slice_p10_throughput(sid),
                "handovers_per_user": bundle.handovers_per_user(),
                "median_fct_ms": bundle.median_fct_ms(),
            }
        )
    return rows


def _improvement(value: float, reference: float) -> float:
    return (value - reference) / max(abs(reference), 1e-9)


def cmd_sweep(args) -> int:
    try:
        config = _load_and_validate(args.config)
    except _ConfigError as exc:
        print(f"configuration invalid:\n{exc}", file=sys.stderr)
        return 2
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    unknown = [s for s in schemes if s not in SCHEMES]
    if unknown or args.seeds < 1:
        print(f"unknown schemes {unknown} or bad --seeds", file=sys.stderr)
        return 2
    if "nolb" not in schemes:  # reference baseline for the improvement columns
        schemes = ["nolb"] + schemes
    seeds = [config.seed + i for i in range(args.seeds)]
    jobs = [
        (config.to_dict(), seed, scheme, os.path.join(args.out, f"run_{scheme}_{seed}"))
        for seed in seeds
        for scheme in schemes
    ]
    workers = int(os.environ.get("RANLB_WORKERS", "0")) or min(len(jobs), os.cpu_count() or 1)
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                all_rows = [r for rows in pool.map(_sweep_one, jobs) for r in rows]
        else:
            all_rows = [r for job in jobs for r in _sweep_one(job)]
    except Exception as exc:
        print(f"sweep failed: {exc}", file=sys.stderr)
        return 1

    ref = {
        (r["seed"], r["slice_id"]): r
        for r in all_rows
        if r["scheme"] == "nolb"
    }
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "comparison.csv")
    with open(out_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([
            "scheme", "seed", "slice_id", "epsilon",
            "weighted_pf_metric", "p10_throughput_bps",
            "wpf_improvement_vs_nolb", "p10_improvement_vs_nolb",
            "handovers_per_user", "median_fct_ms",
        ])
        for r in sorted(all_rows, key=lambda r: (r["scheme"], r["seed"], r["slice_id"])):
            base = ref[(r["seed"], r["slice_id"])]
            fct = r["median_fct_ms"]
            wr.writerow([
                r["scheme"], r["seed"], r["slice_id"], repr(float(r["epsilon"])),
                repr(float(r["weighted_pf_metric"])), repr(float(r["p10_throughput_bps"])),
                repr(float(_improvement(r["weighted_pf_metric"], base["weighted_pf_metric"]))),
                repr(float(_improvement(r["p10_throughput_bps"], base["p10_throughput_bps"]))),
                repr(float(r["handovers_per_user"])),
                "" if math.isnan(fct) else repr(float(fct)),
            ])
    print(f"wrote {out_path} ({len(jobs)} runs, {workers} workers)")
    return 0


def cmd_golden_example(_args) -> int:
    from .golden import check_all

    rows = check_all()
    width = max(len(r.name) for r in rows)
    current = None
    failures = 0
    for r in rows:
        if r.scheme != current:
            current = r.scheme
            print(f"-- {current}")
        mark = "ok" if r.ok else "MISMATCH"
        print(f"  {r.name:<{width}}  expected {r.expected:>12.6g}  got {r.actual:>12.6g}  {mark}")
        failures += not r.ok
    print(f"{len(rows) - failures}/{len(rows)} checks passed")
    return 0 if failures == 0 else 1


def cmd_verify_lemmas(args) -> int:
    from .verify import run_all

    if args.trials < 1:
        print("--trials must be >= 1", file=sys.stderr)
        return 2
    results = run_all(args.trials, args.seed)
    exit_code = 0
    for res in results:
        status = "pass" if res.ok else f"FAIL ({len(res.failures)} counterexamples)"
        print(f"{res.name}: {res.trials} trials, {status}")
        if not res.ok:
            exit_code = 1
            print(json.dumps(res.failures[0], indent=2))
    return exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ranlb",
        description="Load-balanced handover simulator for sliced multi-cell RANs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment from a scenario config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a (seed x scheme) sweep and emit a comparison CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", type=int, required=True, help="number of consecutive seeds")
    p.add_argument("--schemes", required=True, help="comma-separated scheme names")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("golden-example", help="replay the embedded worked example")
    p.set_defaults(func=cmd_golden_example)

    p = sub.add_parser("verify-lemmas", help="run the randomized property suites")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify_lemmas)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
