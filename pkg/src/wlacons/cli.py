"""Command-line entry point: ``wlacons run|preset|sweep``."""

from __future__ import annotations

import argparse
import json
import sys
import warnings

from .config import load_config, preset_names, preset_path
from .errors import ConfigError
from .harness import run_experiment


def _steps(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--out", help="output directory (default: $WLACONS_OUT/<name> or ./wlacons-out/<name>)")
    p.add_argument("--format", choices=("csv", "json"), help="table format")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for replicas")
    p.add_argument("--snapshot-steps", type=_steps, help="comma-separated steps at which to export weights")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wlacons", description="Resilient consensus and clock sync simulator.")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a config file")
    p.add_argument("config")
    _common(p)
    p = sub.add_parser("preset", help="run a shipped preset")
    p.add_argument("name", nargs="?")
    p.add_argument("--list", action="store_true", help="list preset names and exit")
    _common(p)
    p = sub.add_parser("sweep", help="run a fault-probability sweep config")
    p.add_argument("config")
    _common(p)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    warnings.simplefilter("default")
    try:
        if args.command == "preset":
            if args.list or not args.name:
                print("\n".join(preset_names()))
                return 0
            path = preset_path(args.name)
        else:
            path = args.config
        cfg = load_config(path)
        if args.command == "sweep" and cfg.kind != "sweep":
            raise ConfigError("kind", f"'sweep' needs a sweep config, got kind {cfg.kind!r}")
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.snapshot_steps is not None:
            cfg = cfg.with_snapshot_steps(args.snapshot_steps)
        manifest = run_experiment(cfg, args.out, jobs=max(1, args.jobs), fmt=args.format)
    except (ConfigError, KeyError, FileNotFoundError, PermissionError) as exc:
        print(f"wlacons: error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({"name": manifest.name, "outputs_digest": manifest.outputs_digest,
                      "duration_s": manifest.duration_s, "summary": manifest.summary}, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
