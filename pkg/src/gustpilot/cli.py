"""Command-line entry points: ``train``, ``eval`` and ``windgen``.

Exit codes: 0 on success, 1 on a runtime failure, 2 on a configuration error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from .checkpoint import CheckpointError
from .errors import NumericError
from .harness import CHECKPOINT_NAME, ConfigError, RunConfig, evaluate, train
from .wind import GustSpec, WindFormatError, generate_procedural, save_field

log = logging.getLogger("gustpilot")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _load_config(args):
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for name in ("scheme", "seed"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "steps", None) is not None:
        cfg.total_steps = args.steps
    if getattr(args, "episodes", None) is not None:
        cfg.eval_episodes = args.episodes
    if getattr(args, "out", None) is not None:
        cfg.out_dir = args.out
    return cfg


def cmd_train(args):
    cfg = _load_config(args).validate(training=True)
    trainer = train(cfg, cfg.out_dir, resume=args.resume, steps=args.steps)
    print(f"trained {cfg.scheme} for {trainer.global_step} steps, "
          f"{trainer.episode_index} episodes -> {Path(cfg.out_dir) / CHECKPOINT_NAME}")
    return EXIT_OK


def cmd_eval(args):
    cfg = _load_config(args).validate()
    out = args.out or cfg.out_dir
    checkpoint = args.checkpoint
    if checkpoint is None and cfg.scheme != "fixed":
        candidate = Path(out) / CHECKPOINT_NAME
        checkpoint = candidate if candidate.exists() else None
    metrics, _ = evaluate(cfg, checkpoint, out_dir=out)
    print(json.dumps({"scheme": cfg.scheme, **metrics.as_dict()}, indent=2))
    return EXIT_OK


def cmd_windgen(args):
    try:
        data = json.loads(Path(args.spec).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read gust spec {args.spec}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {args.spec}: {exc}") from exc
    extent = data.pop("extent", ((-60.0, 60.0), (-60.0, 60.0), (0.0, 25.0)))
    spacing = data.pop("spacing", (5.0, 5.0, 5.0))
    try:
        spec = GustSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    field = generate_procedural(spec, extent, spacing)
    save_field(field, args.out)
    print(f"wrote {field.dims[0]}x{field.dims[1]}x{field.dims[2]} field to {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="gustpilot", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an MF or LB policy")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--scheme", choices=("mf", "lb", "fixed"))
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint or the fixed-pole baseline")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--checkpoint")
    p.add_argument("--scheme", choices=("mf", "lb", "fixed"))
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="directory for the per-episode CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("windgen", help="write a procedural gust field as a WINDGRID file")
    p.add_argument("--spec", required=True, help="JSON gust spec")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_windgen)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CheckpointError, WindFormatError, NumericError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
