"""Command-line entry point: ``aster {train,eval,sweep,seed-check,export}``.

Every command is deterministic given ``--seed`` and the config. Worker
threads are capped by the ``ASTER_NUM_WORKERS`` environment variable.
"""

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from .config import AsterConfig, fingerprint, read_config, write_config
from .dynamics import PhysicalParams
from .env import EnvConfig, ResetMode
from .errors import AsterError, ConfigError
from .evaluation import (
    DEFAULT_VARIATIONS,
    SWEEP_PARAMS,
    CheckpointPolicy,
    HoverPolicy,
    OraclePolicy,
    PolicyFactory,
    RandomPolicy,
    evaluate,
    evaluation_tracks,
    run_episode,
    sweep,
    write_eval_report,
    write_sweep_csv,
    write_trajectory_csv,
)
from .hdss import CHAIN_COLUMNS, chain_rows, seed_diagnostics
from .seeding import SeedManager
from .tracks import (
    Track,
    Waypoint,
    WaypointKind,
    make_waypoint,
    parse_track_spec,
)
from .training import load_checkpoint, train

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
RESET_MODES = {
    "composite": ResetMode.AUTO,
    "hover-only": ResetMode.HOVER,
}
POLICIES = ("checkpoint", "hover", "random", "oracle")


def _common(parser: argparse.ArgumentParser, out: str) -> None:
    parser.add_argument("--config", type=Path, help="TOML config file")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument(
        "--out", type=Path, default=Path(out), help="output directory"
    )
    parser.add_argument("--verbose", action="store_true", help="debug logs")


def _policy_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--policy", choices=POLICIES, default="checkpoint")
    parser.add_argument("--checkpoint", type=Path, help="checkpoint file")
    parser.add_argument(
        "--run",
        type=Path,
        help="training run directory (uses its final checkpoint)",
    )


def _track_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--track",
        help="name:<Ribbon|Croissant|MultiHeading>, random:<n>:<seed> "
        "or a track JSON file; default: random tracks",
    )
    parser.add_argument(
        "--episodes", type=int, default=200, help="number of random tracks"
    )
    parser.add_argument(
        "--waypoints", type=int, default=10, help="waypoints per random track"
    )


def _variations(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError as error:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated fractions, got {text!r}"
        ) from error


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aster",
        description="Cable-suspended payload waypoint traversal workbench",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    train_parser = commands.add_parser("train", help="train a PPO policy")
    _common(train_parser, "runs/train")
    train_parser.add_argument(
        "--reset-mode", choices=sorted(RESET_MODES), default="composite"
    )
    train_parser.add_argument(
        "--iterations", type=int, help="override ppo.iterations"
    )

    eval_parser = commands.add_parser("eval", help="evaluate on tracks")
    _common(eval_parser, "runs/eval")
    _policy_args(eval_parser)
    _track_args(eval_parser)
    eval_parser.add_argument(
        "--m-l-variation",
        type=float,
        default=0.0,
        help="relative payload mass change, e.g. 0.2",
    )
    eval_parser.add_argument(
        "--l-variation",
        type=float,
        default=0.0,
        help="relative cable length change, e.g. -0.2",
    )
    eval_parser.add_argument(
        "--trajectories",
        action="store_true",
        help="write one trajectory CSV per track",
    )

    sweep_parser = commands.add_parser(
        "sweep", help="evaluate under parameter variations"
    )
    _common(sweep_parser, "runs/sweep")
    _policy_args(sweep_parser)
    _track_args(sweep_parser)
    sweep_parser.add_argument(
        "--param", choices=SWEEP_PARAMS, action="append", dest="params"
    )
    sweep_parser.add_argument(
        "--variations", type=_variations, default=DEFAULT_VARIATIONS
    )

    seed_parser = commands.add_parser(
        "seed-check", help="seeding validity diagnostics"
    )
    _common(seed_parser, "runs/seed-check")
    seed_parser.add_argument(
        "--waypoint",
        default="0,0,4",
        help="x,y,z[,upright|inverted[,yaw]]",
    )
    seed_parser.add_argument("--count", type=int, default=1000)
    seed_parser.add_argument("--forward-verify", action="store_true")
    seed_parser.add_argument(
        "--chains", action="store_true", help="write one CSV per seed"
    )

    export_parser = commands.add_parser(
        "export", help="fly one track and write its trajectory CSV"
    )
    _common(export_parser, "runs/export")
    _policy_args(export_parser)
    export_parser.add_argument("--track", default="name:Ribbon")
    return parser


def _checkpoint_path(args: argparse.Namespace) -> Optional[Path]:
    if args.checkpoint is not None:
        return args.checkpoint
    if args.run is not None:
        return args.run / "checkpoint_final.pt"
    return None


def _resolve(
    args: argparse.Namespace, seeds: SeedManager
) -> Tuple[AsterConfig, PolicyFactory]:
    """Config and policy factory for the eval-like commands.

    A checkpoint run without ``--config`` uses the config stored in the
    checkpoint; with ``--config`` the two fingerprints must match.
    """
    config = read_config(args.config) if args.config else None
    if args.policy != "checkpoint":
        factories = {
            "hover": lambda i: HoverPolicy(),
            "random": lambda i: RandomPolicy(seeds.generator("policy", i)),
            "oracle": lambda i: OraclePolicy(),
        }
        return config or AsterConfig(), factories[args.policy]
    path = _checkpoint_path(args)
    if path is None:
        raise ConfigError("--policy checkpoint needs --checkpoint or --run")
    checkpoint = load_checkpoint(
        path, fingerprint(config) if config is not None else None
    )
    policy = CheckpointPolicy(checkpoint.model)
    return checkpoint.config, lambda i: policy


def _tracks(
    args: argparse.Namespace, cfg: EnvConfig, seeds: SeedManager
) -> List[Track]:
    if args.track:
        return [parse_track_spec(args.track, cfg)]
    return evaluation_tracks(args.episodes, args.waypoints, cfg, seeds)


def cmd_train(args: argparse.Namespace) -> int:
    config = read_config(args.config) if args.config else AsterConfig()
    result = train(
        config,
        SeedManager(args.seed),
        RESET_MODES[args.reset_mode],
        args.out,
        args.iterations,
    )
    logger.info(
        "training finished after %d iterations in %s",
        len(result.metrics),
        args.out,
    )
    return 0


def _scaled(params: PhysicalParams, m_l: float, l: float) -> PhysicalParams:
    return replace(
        params, m_l=params.m_l * (1.0 + m_l), l=params.l * (1.0 + l)
    )


def cmd_eval(args: argparse.Namespace) -> int:
    seeds = SeedManager(args.seed)
    config, factory = _resolve(args, seeds)
    tracks = _tracks(args, config.env, seeds)
    params = _scaled(config.physics, args.m_l_variation, args.l_variation)
    report = evaluate(
        factory,
        tracks,
        config.env,
        params,
        seeds,
        keep_trajectory=args.trajectories,
    )
    write_eval_report(report, args.out)
    write_config(config, args.out / "config.toml")
    sys.stdout.write(report.summary())
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    seeds = SeedManager(args.seed)
    config, factory = _resolve(args, seeds)
    tracks = _tracks(args, config.env, seeds)
    rows = []
    for param in args.params or list(SWEEP_PARAMS):
        rows.extend(
            sweep(
                factory,
                tracks,
                config.env,
                config.physics,
                seeds,
                param,
                args.variations,
            )
        )
    args.out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, args.out / "sweep.csv")
    for row in rows:
        sys.stdout.write(
            f"{row.param:>4} {row.variation:+.0%}: "
            f"SR {row.success_rate:.3f}, T {row.avg_completion_time:.2f} s\n"
        )
    return 0


def _parse_waypoint(text: str, cfg: EnvConfig) -> Waypoint:
    parts = text.split(",")
    try:
        position = tuple(float(part) for part in parts[:3])
        kind = WaypointKind(parts[3]) if len(parts) > 3 else None
        yaw = float(parts[4]) if len(parts) > 4 else 0.0
    except ValueError as error:
        raise ConfigError(f"bad waypoint {text!r}: {error}") from error
    if len(position) != 3:
        raise ConfigError(f"bad waypoint {text!r}: need x,y,z")
    return make_waypoint(
        position, kind or WaypointKind.UPRIGHT, yaw, cfg.workspace
    )


def cmd_seed_check(args: argparse.Namespace) -> int:
    config = read_config(args.config) if args.config else AsterConfig()
    waypoint = _parse_waypoint(args.waypoint, config.env)
    report = seed_diagnostics(
        waypoint,
        args.count,
        config.seed,
        config.physics,
        SeedManager(args.seed).generator("seed-check"),
        config.env.workspace,
        forward=args.forward_verify,
    )
    p50, p95, p100 = report.drift_percentiles()
    lines = [
        f"seeds: {len(report.seeds)}/{report.requested} "
        f"({report.failures} failed)",
        f"gate pass rate: {report.pass_rate:.4f}",
        f"max drift / l: p50 {p50 / config.physics.l:.4g}, "
        f"p95 {p95 / config.physics.l:.4g}, "
        f"max {p100 / config.physics.l:.4g}",
        "phase switches: "
        + ", ".join(
            f"{switches}: {count}"
            for switches, count in report.switch_histogram().items()
        ),
        "gate rejections: "
        + (
            ", ".join(
                f"{kind.value} {rate:.4f}"
                for kind, rate in report.rejection_rates().items()
            )
            or "none"
        ),
    ]
    if args.forward_verify and report.forward_gaps:
        lines.append(
            f"forward divergence: max {max(report.forward_gaps):.4g} m"
        )
    args.out.mkdir(parents=True, exist_ok=True)
    text = "\n".join(lines) + "\n"
    (args.out / "seed_check.txt").write_text(text, encoding="utf-8")
    if args.chains:
        for index, seed in enumerate(report.seeds):
            path = args.out / f"chain_{index:04d}.csv"
            with path.open("w", newline="", encoding="utf-8") as stream:
                writer = csv.writer(stream)
                writer.writerow(CHAIN_COLUMNS)
                writer.writerows(chain_rows(seed, config.seed.dt))
    sys.stdout.write(text)
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    seeds = SeedManager(args.seed)
    config, factory = _resolve(args, seeds)
    track = parse_track_spec(args.track, config.env)
    record = run_episode(
        0,
        track,
        factory(0),
        config.env,
        config.physics,
        seeds.generator("eval", 0),
        keep_trajectory=True,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(record.trajectory, args.out / "trajectory.csv")
    summary = (
        f"track: {track.name}\n"
        f"success: {record.success}\n"
        f"traversals: {record.traversals}/{record.waypoints}\n"
        f"completion time: {record.completion_time:.3f} s\n"
        f"average velocity: {record.avg_velocity:.3f} m/s\n"
        f"max velocity: {record.max_velocity:.3f} m/s\n"
    )
    (args.out / "summary.txt").write_text(summary, encoding="utf-8")
    sys.stdout.write(summary)
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "seed-check": cmd_seed_check,
    "export": cmd_export,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command; returns 2 on any `AsterError`."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format=LOG_FORMAT,
    )
    try:
        return COMMANDS[args.command](args)
    except AsterError as error:
        sys.stderr.write(f"aster {args.command}: error: {error}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
