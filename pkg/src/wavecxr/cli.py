"""Command-line entry point: ``wavecxr <command> [options]``.

Commands: dwt, split, train, eval, compare, synth, demo. Global flags
(``--config``, ``--seed``, ``--out``, ``--quiet``) may appear before or after
the command name.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, pipeline
from .config import RunConfig, load_config
from .errors import WaveCXRError
from .imaging import MODES
from .wavelet import FILTERS


def _ratios(text):
    try:
        values = tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}") from None
    if len(values) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    return values


def _global_flags(parser, suppress):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", metavar="PATH", default=default(None), help="key = value run configuration")
    parser.add_argument("--seed", type=int, metavar="N", default=default(None), help="override the configured seed")
    parser.add_argument("--out", metavar="DIR", default=default(None), help="output directory")
    parser.add_argument("--quiet", action="store_true", default=default(False), help="print only errors")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavecxr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("dwt", parents=[common], help="write vertical/horizontal detail images of one image")
    p.add_argument("input", help="8/16-bit grayscale PNG or binary PGM")
    p.add_argument("--wavelet", choices=sorted(FILTERS), help="filter (default: config value)")
    p.add_argument("--depth", type=int, help="decomposition depth (default: config value)")
    p.add_argument("--all-subbands", action="store_true", help="also write every subband of every level")

    p = sub.add_parser("split", parents=[common], help="seeded train/validation/test split of a manifest")
    p.add_argument("manifest", help="labels CSV with 'Image Index' and 'Finding Labels'")
    p.add_argument("--ratios", type=_ratios, help="train,validation,test fractions (default 0.70,0.15,0.15)")
    p.add_argument("--group-by-patient", action="store_true", help="keep each patient in a single split")
    p.add_argument("--image-root", help="directory holding the images (default: next to the manifest)")

    p = sub.add_parser("train", parents=[common], help="train one arm from a split directory")
    p.add_argument("--mode", choices=MODES, help="input representation (default: config value)")
    p.add_argument("--splits", metavar="DIR", help="split directory (default: config split_dir)")

    p = sub.add_parser("eval", parents=[common], help="per-class ROC curves of a checkpoint on a test split")
    p.add_argument("checkpoint")
    p.add_argument("--test", metavar="CSV", help="test split CSV (default: <split_dir>/test.csv)")
    p.add_argument("--mode", choices=MODES, help="input representation (default: config value)")

    p = sub.add_parser("compare", parents=[common], help="AUC report and ROC overlays for two eval directories")
    p.add_argument("raw_dir")
    p.add_argument("wavelet_dir")
    p.add_argument("--classes", nargs="+", help="classes to plot (default: Atelectasis Effusion Infiltration)")

    p = sub.add_parser("synth", parents=[common], help="generate the synthetic 14-class corpus")
    p.add_argument("--n", type=int, help="number of images (default: config synth_n)")

    sub.add_parser("demo", parents=[common], help="synthetic corpus, both arms, comparison report")
    return parser


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _run(args, cfg: RunConfig, say) -> None:
    cmd = args.command
    if cmd == "dwt":
        written = pipeline.run_dwt(
            args.input, args.wavelet or cfg.wavelet, args.depth or cfg.depth, args.out or "dwt_out", args.all_subbands
        )
        for path in written:
            say(str(path))
    elif cmd == "split":
        seed = cfg.split_seed if args.seed is None else args.seed
        written = pipeline.run_split(
            args.manifest,
            args.ratios or cfg.split_ratios,
            seed,
            args.out or cfg.split_dir,
            args.group_by_patient or cfg.group_by_patient,
            args.image_root or cfg.image_dir or None,
        )
        for path in written.values():
            say(str(path))
    elif cmd == "train":
        if args.mode:
            cfg = cfg.replace(mode=args.mode)
        out = Path(args.out or Path(cfg.out_dir) / cfg.mode)
        callback = lambda r: say(f"epoch {r.epoch:3d}  train_loss {r.train_loss:.6f}  val_loss {r.val_loss:.6f}")
        pipeline.run_train(cfg, args.splits or cfg.split_dir, out, callback=callback)
        say(str(out / pipeline.CHECKPOINT_FILE))
    elif cmd == "eval":
        if args.mode:
            cfg = cfg.replace(mode=args.mode)
        out = Path(args.out or Path(args.checkpoint).parent / "eval")
        ev = pipeline.run_eval(cfg, args.checkpoint, args.test, out)
        for name, curve in ev.curves.items():
            say(f"{name:20s} " + ("undefined" if curve is None else f"{curve.auc:.4f}"))
    elif cmd == "compare":
        report = pipeline.run_compare(
            args.raw_dir, args.wavelet_dir, args.out or "compare", tuple(args.classes or pipeline.OVERLAY_CLASSES)
        )
        for r in report.rows:
            cells = [("undefined" if v is None else f"{v:.4f}") for v in (r.auc_raw, r.auc_wavelet, r.delta)]
            say(f"{r.name:20s} raw {cells[0]:>9s}  wavelet {cells[1]:>9s}  delta {cells[2]:>9s}")
    elif cmd == "synth":
        seed = cfg.synth_seed if args.seed is None else args.seed
        say(str(pipeline.run_synth(args.out or "synth", args.n or cfg.synth_n, seed)))
    elif cmd == "demo":
        callback = lambda r: say(f"epoch {r.epoch:3d}  train_loss {r.train_loss:.6f}  val_loss {r.val_loss:.6f}")
        result = pipeline.run_demo(cfg, args.out or cfg.out_dir, callback=callback, log=say)
        for r in result.report.rows:
            if r.delta is not None:
                say(f"{r.name:20s} raw {r.auc_raw:.4f}  wavelet {r.auc_wavelet:.4f}  delta {r.delta:+.4f}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(message)s")
    say = (lambda msg: None) if args.quiet else print
    try:
        _run(args, _config(args), say)
    except WaveCXRError as exc:
        kind = type(exc).__name__.removesuffix("Error")
        print(f"wavecxr {args.command}: error: {kind}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"wavecxr {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
