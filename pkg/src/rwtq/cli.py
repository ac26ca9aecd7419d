"""Command-line entry point: ``rwtq <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 runtime abort,
4 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .config import PRESETS, ConfigError, ExperimentConfig, load_config, parse_pairs, preset, serialize_config
from .harness import build_environment, collect_source_pool, manifest, run_experiment, run_seed
from .io import load_tasks, mdp_hash, read_json, save_buffers, save_tasks, write_json, write_records_csv
from .records import DivergenceError
from .verify import SUITES, run_suite

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VERIFY = 0, 2, 3, 4


def _error(message: str, **extra) -> None:
    print(json.dumps({"error": message, **extra}), file=sys.stderr)


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")


def _resolve_config(args, **overrides) -> ExperimentConfig:
    cfg = preset(args.preset) if args.preset else ExperimentConfig()
    if args.config:
        cfg = load_config(args.config, base=cfg)
    cfg = cfg.with_updates(**parse_pairs(args.set))
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return cfg.with_updates(**overrides) if overrides else cfg


def cmd_gen_env(args) -> int:
    cfg = _resolve_config(args)
    target, sources = build_environment(cfg)
    save_tasks(args.out, target, sources)
    print(json.dumps({"path": args.out, "env_hash": mdp_hash([target, *sources]), "num_states": target.num_states}))
    return EXIT_OK


def cmd_collect_source(args) -> int:
    target, sources = load_tasks(args.env)
    pools = collect_source_pool(sources, args.episodes, np.random.default_rng(args.seed))
    save_buffers(args.out, pools)
    print(json.dumps({"path": args.out, "samples": [len(p) for p in pools]}))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _resolve_config(args, episodes=args.episodes, num_seeds=args.seeds, seed=args.seed, variant=args.variant)
    os.makedirs(args.out, exist_ok=True)
    result = run_experiment(cfg, jobs=args.jobs)
    for run in result.runs:
        write_records_csv(os.path.join(args.out, f"{cfg.variant}_seed{run.seed}.csv"), run.records)
    write_json(os.path.join(args.out, f"{cfg.variant}_summary.json"), result.summary())
    write_json(os.path.join(args.out, "manifest.json"), manifest(cfg, result.env_hash))
    with open(os.path.join(args.out, "config.txt"), "w", encoding="utf-8") as fh:
        fh.write(serialize_config(cfg))
    s = result.summary()
    print(f"{cfg.variant}: final-{cfg.final_window} return {s['final_return_mean']:.3f} +- {s['final_return_stderr']:.3f} "
          f"over {len(result.runs)} seeds")
    return EXIT_OK


def cmd_compare(args) -> int:
    summaries = []
    for path in args.summaries:
        try:
            summaries.append(read_json(path))
        except OSError as exc:
            raise ConfigError(f"cannot read summary {path}: {exc.strerror}", ["summaries"]) from None
    hashes = {s["env_hash"] for s in summaries}
    if len(hashes) > 1:
        _error("summaries come from different environments", env_hashes=sorted(hashes))
        return EXIT_CONFIG
    lengths = {len(s["episodes"]) for s in summaries}
    if len(lengths) > 1:
        _error("summaries have different episode counts", lengths=sorted(lengths))
        return EXIT_CONFIG
    cols = ["episode"]
    for s in summaries:
        v = s["variant"]
        cols += [f"{v}_return_mean", f"{v}_return_stderr", f"{v}_cum_regret_mean", f"{v}_cum_regret_stderr"]
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for i, ep in enumerate(summaries[0]["episodes"]):
            row = [ep]
            for s in summaries:
                row += [s["return_mean"][i], s["return_stderr"][i], s["cum_regret_mean"][i], s["cum_regret_stderr"][i]]
            w.writerow(row)
    print(f"{'variant':<16}{'final return':>14}{'stderr':>10}{'seeds':>7}")
    for s in summaries:
        print(f"{s['variant']:<16}{s['final_return_mean']:>14.3f}{s['final_return_stderr']:>10.3f}{len(s['seeds']):>7}")
    return EXIT_OK


def cmd_diagnostics(args) -> int:
    cfg = _resolve_config(args, episodes=args.episodes)
    if cfg.variant != "rwt_kernel_ofu":
        raise ConfigError("diagnostics need variant = rwt_kernel_ofu", ["variant"])
    cfg = cfg.with_updates(record_diagnostics=True)
    records = run_seed(cfg, args.seed).diagnostics
    write_json(args.out, records)
    print(json.dumps({"path": args.out, "records": len(records)}))
    return EXIT_OK


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    if args.suite != "all" and args.suite not in SUITES:
        _error(f"unknown suite {args.suite!r}", valid_suites=list(SUITES) + ["all"])
        return EXIT_CONFIG
    ok = True
    for name in names:
        for res in run_suite(name):
            print(f"[{'PASS' if res.passed else 'FAIL'}] {name}/{res.name}: {res.detail}")
            if not res.passed:
                ok = False
                print(json.dumps({"suite": name, "check": res.name, "instance": res.failure}), file=sys.stderr)
    return EXIT_OK if ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rwtq", description="Re-weighted targeting transfer Q-learning.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-env", help="generate and save the grid environment")
    _add_config_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_env)

    p = sub.add_parser("collect-source", help="collect uniform-random source episodes")
    p.add_argument("--env", required=True, help="environment file from gen-env")
    p.add_argument("--episodes", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_collect_source)

    p = sub.add_parser("train", help="run a multi-seed experiment")
    _add_config_args(p)
    p.add_argument("--variant")
    p.add_argument("--episodes", type=int)
    p.add_argument("--seeds", type=int, help="number of seeds")
    p.add_argument("--seed", type=int, help="first seed")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="merge summaries from one environment")
    p.add_argument("summaries", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("diagnostics", help="per-stage complexity records of the kernel learner")
    _add_config_args(p)
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diagnostics)

    p = sub.add_parser("verify", help="run a property suite")
    p.add_argument("suite", help=f"one of {', '.join(SUITES)} or all")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _error(str(exc), keys=exc.keys)
        return EXIT_CONFIG
    except DivergenceError as exc:
        _error(f"runtime abort: {exc}", episode=exc.episode, stage=exc.stage)
        return EXIT_RUNTIME
    except (OSError, ValueError) as exc:
        _error(f"{type(exc).__name__}: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
