"""Cosine image with Gaussian noise: L2 error over an (alpha, eta3) grid.

    python scripts/experiment2_cosine.py --csv exp2.csv --out exp2_images
"""

import argparse
import sys

from kdenoise.cli import format_csv, run_experiment
from kdenoise.pipeline import DenoiseConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pixels", type=int, default=250)
    ap.add_argument("--sigma", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--alpha", type=float, nargs="+", default=[1, 5, 10, 20, 40])
    ap.add_argument("--eta3", type=int, nargs="+", default=[2, 3, 4, 6, 8])
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv")
    ap.add_argument("--out", help="directory for denoised images")
    args = ap.parse_args(argv)

    rows = run_experiment(
        "cosine",
        [(args.pixels, args.pixels)],
        args.eta3,
        [args.sigma],
        args.alpha,
        [args.seed],
        "gaussian",
        DenoiseConfig(workers=args.workers),
        out_dir=args.out,
    )
    text = format_csv(rows)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)

    table = {(r["alpha"], r["eta3"]): r["l2_error"] for r in rows if r["experiment"] == "cosine"}
    print("alpha \\ eta3 " + " ".join(f"{e:>9d}" for e in args.eta3), file=sys.stderr)
    for a in args.alpha:
        print(f"{a:11g}  " + " ".join(f"{table[(a, e)]:9.5f}" for e in args.eta3), file=sys.stderr)


if __name__ == "__main__":
    main()
