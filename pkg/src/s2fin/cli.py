"""Command-line entry points.

Subcommands: synth, analyze-spectrum, analyze-spatial, train, eval, ablate,
predict-map, grad-check. Every command honors --seed for full determinism.

Exit codes: 0 success, 2 usage (argparse), 3 missing file, 4 bad
dimensions/format, 1 anything else. Failures print a single machine-parseable
line ``error: <category>: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from .analysis import analyze_spatial_frequency, analyze_spectrum, write_magnitude_pgms, write_spectrum_csv
from .data import (
    SceneContainer,
    SceneFormatError,
    SyntheticSceneSpec,
    all_pixel_coords,
    patch_batch,
    read_scene,
    split_labeled,
    synth_scene,
    write_scene,
)
from .gradcheck import cross_entropy_loss_fn, grad_check
from .imageio import class_map_to_rgb, write_ppm
from .metrics import metrics_report
from .model import ABLATABLE_MODULES, ModelConfig, build_model
from .params_io import load_params, save_params
from .train import TrainConfig, predict_batches, run_experiment

EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_BAD_FORMAT = 4
EXIT_OTHER = 1


def _add_common_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scene", required=True, help="scene directory")
    p.add_argument("--window", type=int, default=11, choices=(7, 9, 11, 13))
    p.add_argument("--samples-per-class", type=int, default=10)
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--epochs", type=int, default=320)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--embed-dim", type=int, default=64)
    p.add_argument("--lr", type=float, default=5e-4)
    p.add_argument("--batch-size", type=int, default=64)


def _model_config_from_args(scene: SceneContainer, args) -> ModelConfig:
    return ModelConfig(
        bands=scene.bands,
        active_channels=scene.active_channels,
        num_classes=scene.class_count,
        window=args.window,
        embed_dim=args.embed_dim,
        alpha=args.alpha,
    )


def _train_config_from_args(args) -> TrainConfig:
    milestones = tuple(m for m in (160, 240) if m < args.epochs)
    return TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        samples_per_class=args.samples_per_class,
        lr_milestones=milestones,
    )


def _save_run(out_dir: Path, model, model_config: ModelConfig, train_config: TrainConfig) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    save_params(model, out_dir / "params.bin")
    cfg = {
        "model": {**asdict(model_config), "disable": sorted(model_config.disable)},
        "train": asdict(train_config),
    }
    (out_dir / "config.json").write_text(json.dumps(cfg, indent=2) + "\n")


def _load_run(model_dir: Path):
    cfg_path = model_dir / "config.json"
    if not cfg_path.is_file():
        raise FileNotFoundError(f"missing config {cfg_path}")
    cfg = json.loads(cfg_path.read_text())
    model_cfg = dict(cfg["model"])
    model_cfg["disable"] = frozenset(model_cfg.get("disable", []))
    config = ModelConfig(**model_cfg)
    model = build_model(config, seed=0)
    load_params(model, model_dir / "params.bin")
    train_cfg = cfg.get("train", {})
    if "lr_milestones" in train_cfg:
        train_cfg["lr_milestones"] = tuple(train_cfg["lr_milestones"])
    return model, config, train_cfg


def cmd_synth(args) -> int:
    spec = SyntheticSceneSpec(
        height=args.height,
        width=args.width,
        bands=args.bands,
        active_channels=args.active_channels,
        classes=args.classes,
        noise_std=args.noise_std,
    )
    scene = synth_scene(spec, seed=args.seed)
    write_scene(scene, args.out)
    print(f"wrote scene {args.out} ({scene.height}x{scene.width}, K={scene.class_count})")
    return 0


def cmd_analyze_spectrum(args) -> int:
    scene = read_scene(args.scene)
    rows = analyze_spectrum(scene, cutoff_bin=args.cutoff_bin)
    write_spectrum_csv(rows, args.out)
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def cmd_analyze_spatial(args) -> int:
    scene = read_scene(args.scene)
    results = analyze_spatial_frequency(
        scene, samples_per_class=args.samples_per_class, window=args.window, seed=args.seed
    )
    written = write_magnitude_pgms(results, args.out)
    print(f"wrote {len(written)} magnitude images to {args.out}")
    return 0


def cmd_train(args) -> int:
    scene = read_scene(args.scene)
    model_config = _model_config_from_args(scene, args)
    train_config = _train_config_from_args(args)
    result = run_experiment(scene, model_config, train_config)
    out_dir = Path(args.out)
    _save_run(out_dir, result.model, model_config, train_config)
    report = metrics_report(result.confusion)
    (out_dir / "metrics.txt").write_text(report)
    with open(out_dir / "history.csv", "w") as fh:
        fh.write("epoch,loss,accuracy,learning_rate\n")
        for i, (loss, acc, lr) in enumerate(
            zip(result.history.loss, result.history.accuracy, result.history.learning_rate)
        ):
            fh.write(f"{i},{loss!r},{acc!r},{lr!r}\n")
    print(report, end="")
    print(f"params {result.model.parameter_count()}")
    return 0


def cmd_eval(args) -> int:
    scene = read_scene(args.scene)
    model, config, train_cfg = _load_run(Path(args.model))
    samples = args.samples_per_class or train_cfg.get("samples_per_class", 10)
    seed = args.seed if args.seed is not None else train_cfg.get("seed", 0)
    _, eval_coords = split_labeled(scene, samples, seed)
    eval_set = patch_batch(scene, config.window, eval_coords)
    from .train import evaluate

    report = metrics_report(evaluate(model, eval_set))
    if args.out:
        Path(args.out).write_text(report)
    print(report, end="")
    return 0


def cmd_ablate(args) -> int:
    scene = read_scene(args.scene)
    model_config = _model_config_from_args(scene, args)
    train_config = _train_config_from_args(args)
    disable = [] if args.disable == "none" else args.disable.split(",")
    result = run_experiment(scene, model_config.with_disabled(disable), train_config)
    oa = result.confusion.overall_accuracy()
    line = (
        f"disable={','.join(sorted(model_config.with_disabled(disable).disable)) or 'none'} "
        f"oa {oa:.12f} params {result.model.parameter_count()}"
    )
    if args.out:
        out_dir = Path(args.out)
        _save_run(out_dir, result.model, model_config.with_disabled(disable), train_config)
        (out_dir / "metrics.txt").write_text(metrics_report(result.confusion))
        (out_dir / "ablation.txt").write_text(line + "\n")
    print(line)
    return 0


def cmd_predict_map(args) -> int:
    scene = read_scene(args.scene)
    model, config, _ = _load_run(Path(args.model))
    coords = all_pixel_coords(scene)
    batch = patch_batch(scene, config.window, coords)
    preds = predict_batches(model, batch).numpy().astype(np.uint16) + 1
    class_map = preds.reshape(scene.height, scene.width)
    write_ppm(args.out, class_map_to_rgb(class_map))
    print(f"wrote {args.out} ({scene.height}x{scene.width})")
    return 0


def cmd_grad_check(args) -> int:
    torch.manual_seed(args.seed)
    config = ModelConfig(
        bands=args.bands,
        active_channels=args.active_channels,
        num_classes=args.classes,
        window=args.window,
        embed_dim=args.embed_dim,
    )
    model = build_model(config, seed=args.seed)
    x_spec = torch.randn(1, args.bands, args.window, args.window, dtype=torch.float64)
    x_act = torch.randn(1, args.active_channels, args.window, args.window, dtype=torch.float64)
    labels = torch.tensor([args.seed % args.classes])
    report = grad_check(
        model,
        cross_entropy_loss_fn(x_spec, x_act, labels),
        tolerance=args.tolerance,
        seed=args.seed,
    )
    print(report.summary())
    return 0 if report.passed else EXIT_OTHER


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="s2fin")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic multimodal scene")
    p.add_argument("--out", required=True)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--bands", type=int, default=8)
    p.add_argument("--active-channels", type=int, default=2)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--noise-std", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze-spectrum", help="per-class low/high spectral curves (CSV)")
    p.add_argument("--scene", required=True)
    p.add_argument("--cutoff-bin", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze_spectrum)

    p = sub.add_parser("analyze-spatial", help="class-averaged 2D DFT magnitudes (PGM)")
    p.add_argument("--scene", required=True)
    p.add_argument("--samples-per-class", type=int, default=10)
    p.add_argument("--window", type=int, default=11)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze_spatial)

    p = sub.add_parser("train", help="train on a scene, write params and metrics")
    _add_common_train_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate saved parameters on the held-out pixels")
    p.add_argument("--scene", required=True)
    p.add_argument("--model", required=True, help="directory written by train")
    p.add_argument("--samples-per-class", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train/evaluate with modules disabled")
    _add_common_train_flags(p)
    p.add_argument(
        "--disable",
        default="none",
        help=f"comma-joined subset of {{{','.join(ABLATABLE_MODULES)}}} or 'none'",
    )
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("predict-map", help="classify every pixel, write a PPM map")
    p.add_argument("--scene", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict_map)

    p = sub.add_parser("grad-check", help="finite-difference check on a synthetic patch")
    p.add_argument("--bands", type=int, default=8)
    p.add_argument("--active-channels", type=int, default=2)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--window", type=int, default=7, choices=(1, 3, 5, 7, 9, 11, 13))
    p.add_argument("--embed-dim", type=int, default=16)
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_grad_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    torch.set_num_threads(1)  # bit-exact reproducibility across runs
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: missing-file: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except (SceneFormatError,) as exc:
        print(f"error: bad-format: {exc}", file=sys.stderr)
        return EXIT_BAD_FORMAT
    except ValueError as exc:
        print(f"error: invalid-argument: {exc}", file=sys.stderr)
        return EXIT_BAD_FORMAT
    except Exception as exc:  # noqa: BLE001 - single CLI failure funnel
        print(f"error: failure: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
