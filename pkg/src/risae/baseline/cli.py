"""Command-line entry point.

Exit status is 0 on success, 1 when the config or arguments are invalid
(nothing has been computed) and 2 when a run fails part-way.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .curves import BerCurve, GridMismatchError, compare_curves, format_summary, write_report
from .runner import RunError, evaluate_checkpoint, run_experiment

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2

log = logging.getLogger("risae")


def _u64(text):
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _common(p):
    p.add_argument("--config", type=Path, help="flat key = value config file")
    p.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--desk-scale", action="store_true", help="apply the scaled-down preset")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="risae", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain-ris", help="pre-train the RIS phase network")
    _common(p)

    p = sub.add_parser("train", help="train the autoencoder and evaluate it")
    _common(p)
    p.add_argument("--estimated", action="store_true", help="also evaluate with LS-estimated CSI")

    p = sub.add_parser("eval", help="evaluate a saved autoencoder checkpoint")
    _common(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint stem (path without .json/.bin)")
    p.add_argument("--csi-mode", choices=("perfect", "estimated"))

    p = sub.add_parser("baseline", help="Monte-Carlo BER of a classical modulation")
    _common(p)
    p.add_argument("--scheme", choices=("bpsk", "qpsk", "qam16"))

    p = sub.add_parser("compare", help="compare BER curves against the first one")
    _common(p)
    p.add_argument("curves", nargs="+", type=Path, help="curve CSV files; the first is the reference")
    return parser


def _config(args, **extra):
    return load_config(args.config, desk_scale=args.desk_scale, seed=args.seed, out=args.out, **extra)


def _compare(args):
    if len(args.curves) < 2:
        raise ConfigError("compare needs at least two curve files")
    for path in args.curves:
        if not path.exists():
            raise ConfigError(f"no such curve file: {path}")
    curves = [BerCurve.from_csv(p) for p in args.curves]
    names = [p.stem for p in args.curves]
    try:
        report = compare_curves(curves, names)
    except GridMismatchError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_report(report, out / "compare.csv", out / "compare.txt")
    sys.stdout.write(format_summary(report))


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "compare":
            _compare(args)
            return EXIT_OK
        if args.command == "pretrain-ris":
            cfg = _config(args, kind="ris_pretrain")
            manifest = run_experiment(cfg)
        elif args.command == "train":
            kind = "ae_estimated" if args.estimated else None
            cfg = _config(args, kind=kind)
            if cfg.kind not in ("ae_perfect", "ae_estimated"):
                raise ConfigError(f"train needs kind ae_perfect or ae_estimated, config has {cfg.kind!r}")
            manifest = run_experiment(cfg)
        elif args.command == "baseline":
            cfg = _config(args, kind="baseline_mc", scheme=args.scheme)
            manifest = run_experiment(cfg)
        else:
            cfg = _config(args, csi_mode=args.csi_mode)
            manifest = evaluate_checkpoint(cfg, args.checkpoint)
    except ConfigError as exc:
        print(f"risae: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RunError, OSError) as exc:
        print(f"risae: run failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    for name in manifest["artifacts"]:
        print(Path(cfg.out) / name)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
