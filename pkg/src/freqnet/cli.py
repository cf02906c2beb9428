"""Command-line entry point: ``freqnet <subcommand> ...``.

Exit codes: 0 success, 1 compute or data failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from freqnet import imaging, transforms
from freqnet.bench import DEFAULT_SIZES, KERNELS, bench_csv, run_bench
from freqnet.config import apply_overrides, load_config, parse_config
from freqnet.experiment import run_experiment
from freqnet.gradcheck import CHECKS, SEEDS, TOLERANCE, run_all
from freqnet.tensor import pad_to_pow2

log = logging.getLogger("freqnet")


class UsageError(Exception):
    """Malformed arguments that argparse itself cannot catch (exit code 2)."""


def _gray(path) -> np.ndarray:
    img = imaging.read_image(path)
    return imaging.to_grayscale(img) if img.ndim == 3 else img


def cmd_transform(args) -> int:
    gray = _gray(args.input).astype(np.float64)
    x = gray[None, :, :, None]
    if args.kind in ("fft", "wht"):
        x, _ = pad_to_pow2(x)
    coeffs = transforms.apply(args.kind, x)[0, :, :, 0]
    imaging.write_image(imaging.to_uint8(imaging.log_view(coeffs)), args.output)
    return 0


def cmd_filter(args) -> int:
    out = imaging.bandpass_filter(_gray(args.input), args.kind, args.cutoff)
    offset = args.offset if args.offset is not None else (128.0 if args.kind == "high" else 0.0)
    imaging.write_image(imaging.to_uint8(out + offset), args.output)
    return 0


def cmd_spectrum(args) -> int:
    gray = _gray(args.input)
    full, cropped = imaging.dct_spectrum_view(gray, args.crop)
    prefix = Path(args.prefix)
    imaging.write_image(gray, f"{prefix}_gray.pgm")
    imaging.write_image(imaging.to_uint8(full), f"{prefix}_dct_log.pgm")
    imaging.write_image(imaging.to_uint8(cropped), f"{prefix}_dct_crop{args.crop}.pgm")
    return 0


def cmd_parseval(args) -> int:
    dtype = np.float32 if args.single else np.float64
    spatial, freq, rel = imaging.parseval_check(_gray(args.input), dtype)
    print(f"spatial_energy={spatial:.6f} frequency_energy={freq:.6f} relative_difference={rel:.3e}")
    return 0


def cmd_gradcheck(args) -> int:
    failed = 0
    for r in run_all(seeds=args.seeds, names=args.only or None):
        status = "PASS" if r.passed else "FAIL"
        failed += not r.passed
        print(f"{status} {r.name} seed={r.seed} max_rel_error={r.max_rel_error:.3e} (tol {TOLERANCE:g})")
    print(f"{failed} failure(s)")
    return 1 if failed else 0


def cmd_train(args) -> int:
    if args.config:
        config = load_config(args.config, validate=False)
    else:
        config = parse_config("", validate=False)
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    apply_overrides(config, overrides)
    result = run_experiment(config)
    print(f"test_accuracy={result.test_accuracy:.4f} test_loss={result.test_loss:.4f}")
    for path in result.files:
        print(f"wrote {path}")
    return 0


def cmd_bench(args) -> int:
    text = bench_csv(run_bench(args.sizes, args.repeats, args.kernels))
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="freqnet", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("transform", help="forward 2-D transform of an image, written as a log-scaled view")
    s.add_argument("--kind", choices=["fft", "dct", "wht"], required=True)
    s.add_argument("input")
    s.add_argument("output")
    s.set_defaults(func=cmd_transform)

    s = sub.add_parser("filter", help="FFT low/high-pass filter")
    s.add_argument("--kind", choices=["low", "high"], required=True)
    s.add_argument("--cutoff", type=float, required=True, help="radius as a fraction of the maximum, 0..1")
    s.add_argument("--offset", type=float, default=None,
                   help="added before clamping to 0..255 (default 128 for high-pass so negatives stay visible, 0 for low-pass)")
    s.add_argument("input")
    s.add_argument("output")
    s.set_defaults(func=cmd_filter)

    s = sub.add_parser("spectrum", help="gray image, log DCT view and cropped low-frequency view")
    s.add_argument("--crop", type=int, default=64)
    s.add_argument("input")
    s.add_argument("prefix", help="output path prefix; three .pgm files are written")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("parseval", help="spatial vs DCT-domain energy of an image")
    s.add_argument("--single", action="store_true", help="compute the DCT in single precision")
    s.add_argument("input")
    s.set_defaults(func=cmd_parseval)

    s = sub.add_parser("gradcheck", help="finite-difference checks of every layer")
    s.add_argument("--seeds", type=int, nargs="+", default=list(SEEDS))
    s.add_argument("--only", nargs="+", choices=CHECKS)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("train", help="run one experiment from a key = value config file")
    s.add_argument("config", nargs="?")
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("bench", help="time transform kernels over a size sweep (CSV)")
    s.add_argument("--sizes", type=int, nargs="+", default=list(DEFAULT_SIZES))
    s.add_argument("--repeats", type=int, default=5)
    s.add_argument("--kernels", nargs="+", choices=KERNELS, default=list(KERNELS))
    s.add_argument("--output")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"freqnet {args.command}: usage error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # reported, not re-raised: exit code 1 for any compute failure
        print(f"freqnet {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
