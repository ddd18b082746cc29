#!/usr/bin/env python3
"""End-to-end desk-scale experiment: synthesize a multimodal scene, train the
full model, evaluate, render the prediction map, and sweep the four
single-module ablations. All outputs land in --out."""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from s2fin.cli import main as cli_main  # noqa: E402


def run(argv):
    code = cli_main(argv)
    if code != 0:
        raise SystemExit(code)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/synthetic")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--epochs", type=int, default=60)
    parser.add_argument("--window", type=int, default=7)
    args = parser.parse_args()

    out = Path(args.out)
    scene = out / "scene"
    run(["synth", "--out", str(scene), "--seed", str(args.seed)])
    run(
        [
            "train",
            "--scene",
            str(scene),
            "--window",
            str(args.window),
            "--epochs",
            str(args.epochs),
            "--seed",
            str(args.seed),
            "--out",
            str(out / "full"),
        ]
    )
    run(
        [
            "predict-map",
            "--scene",
            str(scene),
            "--model",
            str(out / "full"),
            "--out",
            str(out / "prediction.ppm"),
        ]
    )
    for module in ("afcm", "hfrm", "hfset", "ssaf"):
        run(
            [
                "ablate",
                "--scene",
                str(scene),
                "--window",
                str(args.window),
                "--epochs",
                str(args.epochs),
                "--seed",
                str(args.seed),
                "--disable",
                module,
                "--out",
                str(out / f"ablate_{module}"),
            ]
        )
    print(f"all artifacts under {out}")


if __name__ == "__main__":
    main()
