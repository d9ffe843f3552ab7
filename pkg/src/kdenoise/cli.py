"""Command-line interface: ``kdenoise {denoise,synth,add-noise,experiment,bandwidth}``.

Exit codes: 0 success, 1 numerical failure, 2 usage or IO error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
import time

import numpy as np

from . import bandwidth as bw
from .imaging import (
    RNG_ALGORITHM,
    GrayscaleImage,
    ImageFormatError,
    NoiseModel,
    add_noise,
    l2_error,
    read_image,
    sup_error,
    synth_cosine,
    synth_zero,
    write_image,
)
from .patches import denoise_image
from .pipeline import ConfigError, DenoiseConfig
from .solver import SolverPolicy

CSV_FIELDS = ["experiment", "N", "M", "theta", "eta3", "sigma", "alpha", "l2_error", "sup_error", "seconds"]


class UsageError(Exception):
    pass


def _pair(text: str, kind=int, sep="x"):
    try:
        a, b = text.lower().split(sep)
        return kind(a), kind(b)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected A{sep}B, got {text!r}") from exc


def _pixels(text):
    return _pair(text, int)


def _size(text):
    return _pair(text, float)


def _list(kind):
    def parse(text):
        try:
            vals = [kind(t) for t in text.split(",") if t.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from exc
        return vals

    return parse


# ---------------------------------------------------------------------------
# image IO with an unclipped .npy escape hatch


def load_image(path, size=(1.0, 1.0)) -> GrayscaleImage:
    if not os.path.exists(path):
        raise FileNotFoundError(f"input file not found: {path}")
    if str(path).endswith(".npy"):
        return GrayscaleImage(np.load(path), *size)
    return read_image(path, *size)


def save_image(img: GrayscaleImage, path):
    """``.npy`` keeps raw float values; anything else is written as 16-bit PGM."""
    if str(path).endswith(".npy"):
        np.save(path, img.values)
    else:
        write_image(img, path)


# ---------------------------------------------------------------------------
# config assembly: flags > JSON file > defaults

_FLAG_TO_FIELD = {
    "eta2": "eta2",
    "eta3": "eta3",
    "eta_g": "eta_g",
    "stride": "stride",
    "theta_factor": "theta_factor",
    "eps_zero": "eps_zero",
    "tile": "tile",
    "overlap": "overlap",
    "delta1": "delta1",
    "kernel": "rkhs_kernel",
    "workers": "workers",
}


def _add_config_flags(p: argparse.ArgumentParser, sweep_eta3=False):
    p.add_argument("--config", help="JSON file with DenoiseConfig fields")
    p.add_argument("--eta2", type=int)
    if not sweep_eta3:
        p.add_argument("--eta3", type=int)
    p.add_argument("--eta-g", type=int, dest="eta_g")
    p.add_argument("--stride", type=int)
    p.add_argument("--theta-factor", type=float, dest="theta_factor")
    p.add_argument("--eps-zero", type=float, dest="eps_zero")
    p.add_argument("--tile", type=int)
    p.add_argument("--overlap", type=int)
    p.add_argument("--delta1", type=float)
    p.add_argument("--kernel", choices=["diffusion", "gaussian"])
    p.add_argument("--solver", choices=["dense_direct", "randomized_svd"])
    p.add_argument("--svd-rank", type=int, dest="svd_rank")
    p.add_argument("--workers", type=int)


def config_from_args(args, **overrides) -> DenoiseConfig:
    d: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                d.update(json.load(fh))
        except FileNotFoundError as exc:
            raise FileNotFoundError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: invalid JSON ({exc})") from exc
    for flag, fld in _FLAG_TO_FIELD.items():
        val = getattr(args, flag, None)
        if val is not None:
            d[fld] = val
    solver = dict(d.get("solver") or {})
    if getattr(args, "solver", None):
        solver["mode"] = args.solver
    if getattr(args, "svd_rank", None) is not None:
        solver["rank"] = args.svd_rank
    d["solver"] = SolverPolicy(**solver)
    d.update(overrides)
    return DenoiseConfig.from_dict(d)


# ---------------------------------------------------------------------------
# subcommands


def cmd_denoise(args) -> int:
    cfg = config_from_args(args)
    img = load_image(args.input, args.size)
    t0 = time.perf_counter()
    out, diag = denoise_image(img, cfg)
    seconds = time.perf_counter() - t0
    save_image(out, args.out)
    sidecar = {
        "input": str(args.input),
        "output": str(args.out),
        "pixels": list(img.shape),
        "size": [img.length, img.width],
        "config": cfg.to_dict(),
        "seconds": seconds,
        **diag,
    }
    with open(str(args.out) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
    print(f"wrote {args.out} ({img.rows}x{img.cols}, {diag['patches']} patches, {seconds:.2f}s)")
    return 0


def cmd_synth(args) -> int:
    m, n = args.pixels
    if args.kind == "zero":
        img = synth_zero(m, n, *args.size)
    else:
        img = synth_cosine(m, n, *args.size, alpha=args.alpha)
    save_image(img, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_add_noise(args) -> int:
    img = load_image(args.input, args.size)
    noisy = add_noise(img, NoiseModel(args.noise, args.sigma, args.seed))
    save_image(noisy, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_bandwidth(args) -> int:
    m, n = args.pixels
    h = bw.grid_spacing(m, n, *args.size)
    sel = bw.BandwidthSelection.from_eta(args.eta, h, args.eps_zero)
    print(f"eta={sel.eta}")
    print(f"R_lattice={sel.lattice_radius:.17g}")
    print(f"R={sel.radius:.17g}")
    print(f"delta={sel.delta:.17g}")
    return 0


def run_experiment(kind, pixels, eta3s, sigmas, alphas, seeds, noise, cfg, size=(1.0, 1.0), input_path=None, out_dir=None, timing=True):
    """Sweep the grid and return CSV row dicts (denoised row then noisy baseline row per point)."""
    for name, vals in (("pixels", pixels), ("eta3", eta3s), ("sigma", sigmas), ("alpha", alphas), ("seed", seeds)):
        if not vals:
            raise UsageError(f"empty sweep list: {name}")
    rows = []
    for m, n in pixels:
        for alpha in alphas:
            if kind == "zero_signal":
                clean = synth_zero(m, n, *size)
            elif kind == "cosine":
                clean = synth_cosine(m, n, *size, alpha=alpha)
            else:
                clean = load_image(input_path, size)
            for sigma in sigmas:
                for seed in seeds:
                    noisy = add_noise(clean, NoiseModel(noise, sigma, seed))
                    for eta3 in eta3s:
                        c = dataclasses.replace(cfg, eta3=eta3)
                        t0 = time.perf_counter()
                        den, diag = denoise_image(noisy, c)
                        secs = time.perf_counter() - t0 if timing else 0.0
                        op = next(iter(diag["operators"].values()))
                        base = {
                            "N": clean.rows * clean.cols,
                            "M": op["M"],
                            "theta": op["theta"],
                            "eta3": eta3,
                            "sigma": sigma,
                            "alpha": alpha if kind == "cosine" else "",
                        }
                        rows.append({"experiment": kind, **base, "l2_error": l2_error(den, clean), "sup_error": sup_error(den, clean), "seconds": secs})
                        rows.append({"experiment": f"{kind}:noisy", **base, "l2_error": l2_error(noisy, clean), "sup_error": sup_error(noisy, clean), "seconds": 0.0})
                        if out_dir:
                            os.makedirs(out_dir, exist_ok=True)
                            stem = f"{kind}_{clean.rows}x{clean.cols}_a{alpha}_s{sigma}_seed{seed}_eta{eta3}"
                            save_image(den, os.path.join(out_dir, stem + "_denoised.pgm"))
                            save_image(noisy, os.path.join(out_dir, stem + "_noisy.npy"))
    return rows


def format_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def cmd_experiment(args) -> int:
    kind = {"zero": "zero_signal", "zero_signal": "zero_signal", "cosine": "cosine", "file": "file"}[args.kind]
    if kind == "file" and not args.input:
        raise UsageError("--kind file needs --input")
    cfg = config_from_args(args)
    eta3s = args.eta3_sweep if args.eta3_sweep is not None else [cfg.eta3]
    rows = run_experiment(
        kind,
        args.pixels,
        eta3s,
        args.sigma,
        args.alpha,
        args.seed,
        args.noise,
        cfg,
        size=args.size,
        input_path=args.input,
        out_dir=args.out,
        timing=not args.no_timing,
    )
    text = format_csv(rows)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(text)
        meta = {
            "rng": RNG_ALGORITHM,
            "kind": kind,
            "noise": args.noise,
            "seeds": args.seed,
            "pixels": [list(p) for p in args.pixels],
            "size": list(args.size),
            "config": cfg.to_dict(),
        }
        with open(args.csv + ".json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kdenoise", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("denoise", help="denoise an image file")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=_size, default=(1.0, 1.0), help="physical LxW")
    _add_config_flags(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("synth", help="write a synthetic clean image")
    p.add_argument("--kind", choices=["cosine", "zero"], default="cosine")
    p.add_argument("--pixels", type=_pixels, default=(250, 250))
    p.add_argument("--size", type=_size, default=(1.0, 1.0))
    p.add_argument("--alpha", type=float, default=20.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("add-noise", help="add zero-mean noise (write .npy to keep values unclipped)")
    p.add_argument("input")
    p.add_argument("--noise", choices=["uniform", "gaussian"], default="gaussian")
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=_size, default=(1.0, 1.0))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_add_noise)

    p = sub.add_parser("experiment", help="synthetic denoising sweep, CSV metrics")
    p.add_argument("--kind", choices=["zero", "zero_signal", "cosine", "file"], default="cosine")
    p.add_argument("--input", help="clean image for --kind file")
    p.add_argument("--pixels", type=_list(_pixels), default=[(100, 100)], help="comma-separated MxN list")
    p.add_argument("--size", type=_size, default=(1.0, 1.0))
    p.add_argument("--eta3", type=_list(int), dest="eta3_sweep", help="comma-separated list")
    p.add_argument("--alpha", type=_list(float), default=[20.0])
    p.add_argument("--sigma", type=_list(float), default=[0.1])
    p.add_argument("--seed", type=_list(int), default=[0])
    p.add_argument("--noise", choices=["uniform", "gaussian"], default="gaussian")
    p.add_argument("--csv", help="write rows here (default: stdout)")
    p.add_argument("--out", help="directory for denoised/noisy images")
    p.add_argument("--no-timing", action="store_true", help="write 0 in the seconds column")
    _add_config_flags(p, sweep_eta3=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("bandwidth", help="print the lattice radius and bandwidth for eta")
    p.add_argument("--eta", type=int, required=True)
    p.add_argument("--pixels", type=_pixels, required=True)
    p.add_argument("--size", type=_size, default=(1.0, 1.0))
    p.add_argument("--eps-zero", type=float, default=bw.DEFAULT_EPS_ZERO, dest="eps_zero")
    p.set_defaults(func=cmd_bandwidth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError, ImageFormatError) as exc:
        print(f"kdenoise: error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ConfigError, ValueError) as exc:
        print(f"kdenoise: error: {exc}", file=sys.stderr)
        return 2
    except np.linalg.LinAlgError as exc:
        print(f"kdenoise: numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
