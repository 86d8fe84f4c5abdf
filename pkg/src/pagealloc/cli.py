"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 I/O error,
4 workload generation or verification error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from . import seeding
from ._validation import ConfigError
from .agents import baseline_policies
from .artifact import ArtifactError, load_policy, save_policy
from .config import RunConfig, dumps_config, load_config, loads_config
from .env import EnvConfig
from .evaluation import (
    SUMMARY_COLUMNS,
    compare,
    write_episodes_csv,
    write_summary_csv,
)
from .workloads import (
    GenerationError,
    ScriptError,
    WorkloadConfig,
    make_bf_good,
    make_wf_good,
    read_script,
    verify_adversarial,
    write_script,
)

log = logging.getLogger("pagealloc")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_GENERATION = 0, 2, 3, 4
MANIFEST = "run-manifest.cfg"


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load_run_config(path: Optional[str], seed: Optional[int]) -> RunConfig:
    default = seeding.default_seed() if seed is None else seed
    if path is None:
        cfg = loads_config("", default_seed=default)
    else:
        try:
            cfg = load_config(path, default_seed=default)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read config {path}: {exc}") from exc
    if seed is not None:
        cfg.seed = seed
    return cfg


def _outdir(cfg: RunConfig, override: Optional[str]) -> Path:
    out = Path(override or cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot create output directory {out}: {exc}") from exc
    return out


def _write_manifest(out: Path, cfg: RunConfig, seeds: dict) -> None:
    lines = [dumps_config(cfg)]
    lines.append("# derived seeds (informational; everything derives from run.seed)\n")
    for name, value in seeds.items():
        lines.append(f"# {name} = {value}\n")
    (out / MANIFEST).write_text("".join(lines), encoding="utf-8")


def _write_train_log(rows, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("episode", "steps", "return"))
        for episode, steps, ret in rows:
            writer.writerow((episode, steps, repr(float(ret))))


# -- commands ------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = _load_run_config(args.config, args.seed)
    out = _outdir(cfg, args.output_dir)
    agent_seed = cfg.agent_seed()
    agent = cfg.train.build(agent_seed)
    log.info("training %s for %d steps", cfg.train.agent, agent.total_timesteps)
    agent.fit(cfg.env)
    _write_manifest(out, cfg, {"agent_seed": agent_seed})
    save_policy(agent, out / "policy.json")
    _write_train_log(agent.training_log_, out / "train_log.csv")
    print(f"wrote {out / 'policy.json'} and {out / 'train_log.csv'}")
    return EXIT_OK


def _env_from_flags(args, base: EnvConfig, action_mode: str) -> EnvConfig:
    page_size = args.page_size if args.page_size is not None else base.page_size
    history = args.history_len if args.history_len is not None else base.history_len
    wl = base.workload
    same_page = page_size == wl.page_size
    workload = WorkloadConfig(
        page_size=page_size,
        p_free=wl.p_free,
        p_alloc=wl.p_alloc,
        size_range=wl.size_range if same_page and args.size_range is None else args.size_range,
        mode=args.mode or wl.mode,
        segment_random_len=wl.segment_random_len,
    )
    return EnvConfig(
        page_size=page_size,
        action_mode=action_mode,
        history_len=history,
        workload=workload,
        step_reward=base.step_reward,
        invalid_penalty=base.invalid_penalty,
        max_consecutive_invalid=base.max_consecutive_invalid,
        max_episode_steps=base.max_episode_steps,
    )


def _write_comparison(out: Path, comparison, extra=None) -> None:
    write_summary_csv(comparison.sessions, out / "summary.csv", extra)
    write_summary_csv(comparison.aggregate, out / "aggregate.csv", extra)
    write_episodes_csv(comparison.sessions, out / "episodes.csv")


def _print_table(reports) -> None:
    print("  ".join(f"{c:>12}" for c in ("policy", "session", "n", "mean", "ci_low", "ci_high")))
    for r in reports:
        print("  ".join(f"{v:>12}" if not isinstance(v, float) else f"{v:>12.4f}"
                        for v in (r.policy, str(r.session), r.n_rollouts, r.mean, r.ci_low, r.ci_high)))


def cmd_eval(args) -> int:
    cfg = _load_run_config(args.config, args.seed)
    policies, names = [], []
    for i, path in enumerate(args.checkpoints):
        try:
            policy = load_policy(path)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read checkpoint {path}: {exc}") from exc
        except (ArtifactError, KeyError, TypeError, ValueError) as exc:
            raise CliError(EXIT_IO, f"corrupt checkpoint {path}: {exc}") from exc
        policies.append(policy)
        names.append(f"{policy.kind}" if len(args.checkpoints) == 1 else f"{policy.kind}#{i}")
    if args.baselines_only:
        policies, names = [], []
    action_mode = policies[0].action_mode_ if policies else (args.action_mode or cfg.env.action_mode)
    base = cfg.env
    if policies and args.page_size is None and args.config is None:
        # no env description given: take the shape from the checkpoint
        args.page_size = policies[0].page_size_
        if args.history_len is None:
            args.history_len = policies[0].history_len_
    env = _env_from_flags(args, base, action_mode)
    for name, p in zip(names, policies):
        if p.page_size_ != env.page_size or p.history_len_ != env.history_len:
            raise ConfigError(
                ("env.page_size", "env.history_len"),
                f"checkpoint {name} expects page_size={p.page_size_} history_len={p.history_len_}, "
                f"environment has page_size={env.page_size} history_len={env.history_len}",
            )
        if p.action_mode_ != env.action_mode:
            raise ConfigError("env.action_mode", f"checkpoint {name} is {p.action_mode_}")
    if args.baselines_only or not args.no_baselines:
        policies = policies + baseline_policies(env.action_mode)
        names = names + [b.kind for b in baseline_policies(env.action_mode)]
    sessions = args.sessions if args.sessions is not None else 1
    rollouts = args.rollouts if args.rollouts is not None else cfg.eval.rollouts
    comparison = compare(policies, env, sessions, rollouts, cfg.seed, names)
    cfg.env = env
    out = _outdir(cfg, args.output_dir)
    _write_comparison(out, comparison)
    _write_manifest(out, cfg, {"eval_seed": cfg.seed, "sessions": sessions, "rollouts": rollouts,
                               "checkpoints": ",".join(args.checkpoints)})
    _print_table(comparison.sessions)
    return EXIT_OK


def _bench_policies(cfg: RunConfig):
    agent = cfg.train.build(0)
    policies, names = [agent], [agent.kind]
    if cfg.eval.baselines:
        policies += baseline_policies(cfg.env.action_mode)
        names += [b.kind for b in baseline_policies(cfg.env.action_mode)]
    return policies, names


def cmd_bench(args) -> int:
    cfg = _load_run_config(args.config, args.seed)
    out = _outdir(cfg, args.output_dir)
    policies, names = _bench_policies(cfg)
    comparison = compare(policies, cfg.env, cfg.eval.sessions, cfg.eval.rollouts, cfg.seed, names)
    _write_comparison(out, comparison)
    _write_manifest(out, cfg, {"session_seeds": ",".join(
        str(seeding.derive_seed(cfg.seed, seeding.SESSION, s)) for s in range(cfg.eval.sessions))})
    _print_table(comparison.aggregate)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_run_config(args.config, args.seed)
    out = _outdir(cfg, args.output_dir)
    lens = cfg.eval.history_lens
    if args.history_lens:
        lens = tuple(int(h) for h in args.history_lens.split(","))
        cfg.eval.history_lens = lens
    policies, names = _bench_policies(cfg)
    rows_sessions, rows_aggregate = [], []
    for h in lens:
        env = EnvConfig(
            page_size=cfg.env.page_size, action_mode=cfg.env.action_mode, history_len=h,
            workload=cfg.env.workload, step_reward=cfg.env.step_reward,
            invalid_penalty=cfg.env.invalid_penalty,
            max_consecutive_invalid=cfg.env.max_consecutive_invalid,
            max_episode_steps=cfg.env.max_episode_steps,
        )
        log.info("history_len=%d", h)
        comparison = compare(policies, env, cfg.eval.sessions, cfg.eval.rollouts, cfg.seed, names)
        rows_sessions.extend((h, r) for r in comparison.sessions)
        rows_aggregate.extend((h, r) for r in comparison.aggregate)
    for fname, rows in (("sweep.csv", rows_sessions), ("sweep_aggregate.csv", rows_aggregate)):
        with open(out / fname, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("history_len",) + SUMMARY_COLUMNS)
            for h, r in rows:
                row = r.row()
                writer.writerow([h] + [repr(v) if isinstance(v, float) else v
                                       for v in (row[c] for c in SUMMARY_COLUMNS)])
    _write_manifest(out, cfg, {"history_lens": ",".join(map(str, lens))})
    print(f"wrote {out / 'sweep.csv'} ({len(rows_sessions)} rows)")
    return EXIT_OK


def cmd_gen_workload(args) -> int:
    seed = seeding.default_seed() if args.seed is None else args.seed
    make = make_bf_good if args.mode == "bf_good" else make_wf_good
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot create {out}: {exc}") from exc
    for i in range(args.count):
        script_seed = seeding.derive_seed(seed, i)
        script = make(args.page_size, seeding.make_rng(script_seed))
        script.seed = script_seed
        report = verify_adversarial(script)
        if not report.matches(script.label):
            raise GenerationError(f"script {i} failed verification: {report.summary()}")
        write_script(script, out / f"{args.mode}_{i:04d}.txt")
    print(f"wrote {args.count} {args.mode} scripts to {out}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    try:
        script = read_script(args.script)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read script {args.script}: {exc}") from exc
    report = verify_adversarial(script)
    print(f"script: {args.script}")
    print(f"page_size={script.page_size} label={script.label} events={len(script.events)} "
          f"allocs={len(script.allocs)}")
    print(report.summary())
    for kind in ("best", "first", "worst"):
        outcome = report.outcomes[kind]
        state = "final page" if outcome.ok else f"page at failure (alloc #{outcome.failed_at})"
        print(f"\n[{kind}] {state}:")
        print(outcome.page.dump().rstrip("\n"))
    if script.label in ("bf_good", "wf_good"):
        print(f"\npattern matches label: {'yes' if report.matches(script.label) else 'no'}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------------


def _add_env_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--page-size", type=int)
    p.add_argument("--history-len", type=int)
    p.add_argument("--mode", choices=("random", "bf_good", "wf_good", "mixed"))
    p.add_argument("--action-mode", choices=("high_level", "low_level"))
    p.add_argument("--size-range", type=lambda s: tuple(int(v) for v in s.split(",")),
                   help="inclusive request size range, e.g. 1,4")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pagealloc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one agent and write a checkpoint")
    p.add_argument("--config")
    p.add_argument("--output-dir")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate checkpoints against the fit baselines")
    p.add_argument("checkpoints", nargs="*")
    p.add_argument("--config")
    _add_env_flags(p)
    p.add_argument("--rollouts", type=int)
    p.add_argument("--sessions", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--baselines-only", action="store_true")
    p.add_argument("--no-baselines", action="store_true")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="train per session and compare with baselines")
    p.add_argument("--config")
    p.add_argument("--output-dir")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="history-length ablation: bench at several history lengths")
    p.add_argument("--config")
    p.add_argument("--history-lens", help="comma separated, default from eval.history_lens")
    p.add_argument("--output-dir")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-workload", help="write verified adversarial scripts")
    p.add_argument("mode", choices=("bf_good", "wf_good"))
    p.add_argument("--page-size", type=int, default=256)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="scripts")
    p.set_defaults(func=cmd_gen_workload)

    p = sub.add_parser("inspect", help="replay a script under first/best/worst fit")
    p.add_argument("script")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GenerationError, ScriptError) as exc:
        print(f"workload error: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
