"""Zero signal plus uniform noise: L2 error against eta3, one row per seed.

    python scripts/experiment1_zero_signal.py --csv exp1.csv
"""

import argparse
import sys

from kdenoise.cli import format_csv, run_experiment
from kdenoise.pipeline import DenoiseConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pixels", type=int, default=100)
    ap.add_argument("--sigma", type=float, default=0.5)
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    ap.add_argument("--eta3", type=int, nargs="+", default=[2, 3, 4, 6, 8])
    ap.add_argument("--csv")
    args = ap.parse_args(argv)

    rows = run_experiment(
        "zero_signal", [(args.pixels, args.pixels)], args.eta3, [args.sigma], [0.0], args.seeds, "uniform", DenoiseConfig()
    )
    text = format_csv(rows)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)

    # rows alternate: denoised, then the noisy baseline for the same point
    pairs = list(zip(rows[0::2], rows[1::2]))
    print("eta3  mean L2 (denoised)  mean L2 ratio vs noisy", file=sys.stderr)
    for eta3 in args.eta3:
        sel = [(d, n) for d, n in pairs if d["eta3"] == eta3]
        mean = sum(d["l2_error"] for d, _ in sel) / len(sel)
        ratio = sum(d["l2_error"] / n["l2_error"] for d, n in sel) / len(sel)
        print(f"{eta3:4d}  {mean:.6f}            {ratio:.4f}", file=sys.stderr)

if __name__ == "__main__":
    main()
