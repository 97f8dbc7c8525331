"""Run every CLI stage in order: synth, preprocess, train, embed, eval-cluster, eval-probe.

    python scripts/run_pipeline.py --config configs/desk_bt.json --root runs/bt
"""

import argparse
import sys
import time

from wellssl import cli

STAGES = ["synth", "preprocess", "train", "embed", "eval-cluster", "eval-probe"]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-c", "--config")
    ap.add_argument("--root", default="runs/pipeline")
    ap.add_argument("--method", choices=["barlow-twins", "byol"], default="barlow-twins")
    ap.add_argument("--set", action="append", default=[])
    ap.add_argument("--skip-probes", action="store_true")
    args = ap.parse_args()
    for stage in STAGES:
        if stage == "eval-probe" and args.skip_probes:
            continue
        argv = [stage, "--root", args.root, "-v"]
        if args.config:
            argv += ["-c", args.config]
        for item in args.set:
            argv += ["--set", item]
        if stage == "train":
            argv += ["--method", args.method]
        t0 = time.perf_counter()
        code = cli.main(argv)
        print(f"{stage:<13} exit {code}  {time.perf_counter() - t0:7.1f}s", flush=True)
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
