"""``trigkernel <subcommand> --config PATH [--seed N] [--out DIR]``.

Exit codes: 0 on success, 2 for a malformed or missing configuration
(or bad arguments), 3 for a numerical failure.
"""

from __future__ import annotations

import argparse
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ConfigError, load_config
from .errors import InputError, NumericalError
from .experiments import EXPERIMENTS, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trigkernel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in EXPERIMENTS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or "").strip().splitlines()[0])
        p.add_argument("--config", required=True, type=Path, help="key = value experiment file")
        p.add_argument("--seed", type=int, default=None, help="overrides the config 'seed' key")
        p.add_argument("--out", type=Path, default=None, help="output directory (default: config 'out' or ./results)")
    return parser


def write_manifest(path: Path, command: str, seed: int, cfg, outputs) -> Path:
    lines = [
        f"command = {command}",
        f"seed = {seed}",
        f"timestamp = {datetime.now(timezone.utc).isoformat(timespec='seconds')}",
        f"trigkernel = {__version__}",
        f"python = {platform.python_version()}",
        f"numpy = {np.__version__}",
        f"scipy = {scipy.__version__}",
    ]
    lines += [f"config.{k} = {v}" for k, v in cfg.items()]
    lines += [f"output = {p.name}" for p in outputs]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = cfg.get_int("seed", 0)
        configured_out = cfg.get_path("out", Path("results"))
        out = args.out if args.out is not None else configured_out
        if args.seed is not None:
            seed = args.seed
        outputs = run_experiment(args.command, cfg, seed, out)
        write_manifest(Path(out) / "manifest.txt", args.command, seed, cfg, outputs)
    except (ConfigError, InputError) as err:
        print(f"trigkernel: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as err:
        print(f"trigkernel: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    for p in outputs:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
