"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they complete. Training-based criteria use a single CPU core.
"""

import time

import numpy as np
import pytest
import torch

from s2fin.analysis import analyze_spectrum, class_mean_spectra, pca_components
from s2fin.data import (
    SyntheticSceneSpec,
    all_pixel_coords,
    patch_batch,
    read_scene,
    synth_scene,
    write_scene,
)
from s2fin.gradcheck import cross_entropy_loss_fn, grad_check
from s2fin.hfset import HfsetBlock
from s2fin.imageio import class_map_to_rgb, read_pnm_header, write_ppm
from s2fin.metrics import ConfusionMatrix, metrics_report
from s2fin.model import ModelConfig, build_model
from s2fin.spatial_frequency import Afcm, phase_resonance_amplitude
from s2fin.spatial_spectral import CrossFeatureGate, SsafBlock
from s2fin.sparse_attention import sparsemax_threshold
from s2fin.train import TrainConfig, predict_batches, run_experiment
from s2fin.transforms import dct2_2d, dft_1d, dft_2d, idct2_2d, idft_1d, idft_2d

torch.set_num_threads(1)

SIZES = (4, 8, 11, 13, 16)


def _report(num: int, desc: str, passed: bool, detail: str = "") -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {num}: {desc}"
    if detail:
        line += f" ({detail})"
    print(line, flush=True)
    assert passed, line


def test_criterion_1_transform_correctness():
    start = time.time()
    rng = np.random.default_rng(10)
    worst_rt = 0.0
    for n in SIZES:
        x1 = torch.from_numpy(rng.standard_normal(n))
        x2 = torch.from_numpy(rng.standard_normal((n, n)))
        worst_rt = max(worst_rt, float((idft_1d(dft_1d(x1)) - x1).abs().max()))
        worst_rt = max(worst_rt, float((idft_2d(dft_2d(x2)) - x2).abs().max()))
        worst_rt = max(worst_rt, float((idct2_2d(dct2_2d(x2)) - x2).abs().max()))
    ortho_ok = True
    for n in (2, 3, 5, 8):
        size = n * n
        mat = np.zeros((size, size))
        for idx in range(size):
            basis = torch.zeros(size, dtype=torch.float64)
            basis[idx] = 1.0
            mat[:, idx] = dct2_2d(basis.reshape(n, n)).flatten().numpy()
        ortho_ok &= np.abs(mat.T @ mat - np.eye(size)).max() <= 1e-9
    parseval_ok = True
    for _ in range(100):
        n = int(rng.integers(2, 33))
        x = rng.standard_normal(n)
        spec = dft_1d(torch.from_numpy(x))
        lhs, rhs = float((x**2).sum()), float((spec.amplitude**2).sum() / n)
        parseval_ok &= abs(lhs - rhs) / abs(lhs) <= 1e-9
        y = torch.from_numpy(rng.standard_normal((8, 8)))
        energy = float((y**2).sum())
        parseval_ok &= abs(energy - float((dct2_2d(y) ** 2).sum())) / energy <= 1e-9
    elapsed = time.time() - start
    _report(
        1,
        "transform round-trips <= 1e-9, DCT orthonormality, Parseval/energy",
        worst_rt <= 1e-9 and ortho_ok and parseval_ok and elapsed < 10,
        f"max round-trip {worst_rt:.2e}, {elapsed:.1f}s",
    )


def _simplex_projection_bruteforce(z: np.ndarray) -> np.ndarray:
    m = z.shape[0]
    for mask_bits in range(1, 2**m):
        mask = np.array([(mask_bits >> i) & 1 for i in range(m)], dtype=bool)
        tau = (z[mask].sum() - 1.0) / mask.sum()
        if (z[mask] - tau <= 0).any():
            continue
        if mask.sum() < m and (z[~mask] - tau > 1e-15).any():
            continue
        return np.where(mask, z - tau, 0.0)
    raise AssertionError("no valid KKT support")


def test_criterion_2_sparsemax_oracle():
    start = time.time()
    rng = np.random.default_rng(20)
    worst = 0.0
    sums_ok = True
    for _ in range(1000):
        m = int(rng.integers(1, 13))
        z = rng.standard_normal(m) * rng.uniform(0.1, 4)
        sw = sparsemax_threshold(torch.from_numpy(z))
        worst = max(worst, float(np.abs(sw.w.numpy() - _simplex_projection_bruteforce(z)).max()))
        sums_ok &= abs(sw.w.sum().item() - 1.0) <= 1e-9
    elapsed = time.time() - start
    _report(
        2,
        "sparsemax equals brute-force simplex projection on 1000 vectors",
        worst <= 1e-9 and sums_ok and elapsed < 30,
        f"max deviation {worst:.2e}, {elapsed:.1f}s",
    )


def test_criterion_3_gradient_fidelity():
    start = time.time()
    torch.manual_seed(0)
    config = ModelConfig(bands=8, active_channels=2, num_classes=4, window=7)
    model = build_model(config, seed=0)
    x_spec = torch.randn(1, 8, 7, 7, dtype=torch.float64)
    x_act = torch.randn(1, 2, 7, 7, dtype=torch.float64)
    report = grad_check(
        model,
        cross_entropy_loss_fn(x_spec, x_act, torch.tensor([1])),
        tolerance=1e-3,
        h=1e-4,
        seed=0,
    )
    elapsed = time.time() - start
    filter_leaves = {leaf.path for leaf in report.leaves}
    has_filter = {"hfset.filter.f_cutoff", "hfset.filter.g_amp"} <= filter_leaves
    _report(
        3,
        "full-model finite-difference gradients, every leaf <= 1e-3",
        report.passed and has_filter and elapsed < 300,
        f"{len(report.leaves)} leaves, max rel {report.max_rel_error:.2e}, {elapsed:.0f}s",
    )


def test_criterion_4_trivial_case_equalities():
    rng = np.random.default_rng(4)
    # HFSET zero-FC residual identity (exact)
    block = HfsetBlock(channels=6)
    with torch.no_grad():
        block.merge_fc.weight.zero_()
        block.merge_fc.bias.zero_()
    x = torch.from_numpy(rng.standard_normal((1, 6, 7, 7)))
    hfset_ok = torch.equal(block(x), x)
    # AFCM zero-parameter x2 scaling (exact)
    afcm = Afcm(channels=4, height=7, width=7)
    with torch.no_grad():
        for p in afcm.parameters():
            p.zero_()
    x_p = torch.from_numpy(rng.standard_normal((4, 7, 7)))
    x_a = torch.from_numpy(rng.standard_normal((4, 7, 7)))
    out_p, out_a = afcm(x_p, x_a)
    afcm_ok = torch.equal(out_p, 2 * x_p) and torch.equal(out_a, 2 * x_a)
    # HFRM alpha=0 amplitude-mean equivalence (<= 1e-9)
    amps = [torch.from_numpy(rng.uniform(0.5, 2, (3, 5, 5))) for _ in range(2)]
    phases = [torch.from_numpy(rng.uniform(-np.pi, np.pi, (3, 5, 5))) for _ in range(2)]
    fused = phase_resonance_amplitude(amps[0], phases[0], amps[1], phases[1], 0.0, 0.1)
    hfrm_ok = float((fused - (amps[0] + amps[1]) / 2).abs().max()) <= 1e-9
    # identical-input fusion identity (<= 1e-10)
    ssaf = SsafBlock(channels=3)
    xs = torch.from_numpy(rng.standard_normal((1, 3, 7, 7)))
    ssaf_ok = (
        float((ssaf(xs, xs) - torch.sigmoid(ssaf.conv_out(3 * xs))).abs().max()) <= 1e-10
    )
    # cross-gate zero-FC half gain (exact)
    gate = CrossFeatureGate(channels=3)
    with torch.no_grad():
        gate.fc.weight.zero_()
        gate.fc.bias.zero_()
    f1 = torch.from_numpy(rng.standard_normal((1, 3, 7, 7)))
    f2 = torch.from_numpy(rng.standard_normal((1, 3, 7, 7)))
    g1, g2 = gate(f1, f2)
    gate_ok = torch.equal(g1, 0.5 * f1) and torch.equal(g2, 0.5 * f2)
    _report(
        4,
        "trivial-case equalities (residual, x2, amplitude mean, fusion, half gain)",
        hfset_ok and afcm_ok and hfrm_ok and ssaf_ok and gate_ok,
    )


DESK_SCENE = SyntheticSceneSpec(
    height=64, width=64, bands=8, active_channels=2, classes=4, noise_std=0.1
)


def test_criterion_5_desk_scale_learning():
    start = time.time()
    scene = synth_scene(DESK_SCENE, seed=7)
    model_config = ModelConfig(bands=8, active_channels=2, num_classes=4, window=7)
    train_config = TrainConfig(epochs=60, seed=7, samples_per_class=10, lr_milestones=(40,))
    result = run_experiment(scene, model_config, train_config)
    oa = result.confusion.overall_accuracy()
    kappa = result.confusion.kappa()
    elapsed = time.time() - start
    _report(
        5,
        "synthetic-scene training reaches OA >= 0.95, kappa >= 0.9",
        oa >= 0.95 and kappa >= 0.9 and elapsed < 300,
        f"OA {oa:.4f}, kappa {kappa:.4f}, {elapsed:.0f}s, 60 epochs",
    )


def test_criterion_6_ablation_harness():
    start = time.time()
    scene = synth_scene(
        SyntheticSceneSpec(height=40, width=40, bands=8, active_channels=2, classes=4),
        seed=101,
    )
    model_config = ModelConfig(
        bands=8, active_channels=2, num_classes=4, window=7, embed_dim=32
    )
    variants = [frozenset(), *(frozenset({m}) for m in ("afcm", "hfrm", "hfset", "ssaf"))]
    wins = 0
    all_finite = True
    per_seed = []
    for seed in range(5):
        train_config = TrainConfig(
            epochs=20, seed=seed, samples_per_class=10, lr_milestones=()
        )
        oa = {}
        for disable in variants:
            result = run_experiment(scene, model_config.with_disabled(disable), train_config)
            key = ",".join(sorted(disable)) or "full"
            oa[key] = result.oa
            all_finite &= np.isfinite(result.oa)
        wins += all(oa["full"] >= v for k, v in oa.items() if k != "full")
        per_seed.append(oa)
    elapsed = time.time() - start
    detail = "; ".join(
        f"seed {i}: full {oa['full']:.3f} vs best ablation "
        f"{max(v for k, v in oa.items() if k != 'full'):.3f}"
        for i, oa in enumerate(per_seed)
    )
    _report(
        6,
        "all single-module ablations run; full model best on >= 3 of 5 seeds",
        all_finite and wins >= 3,
        f"wins {wins}/5, {elapsed:.0f}s; {detail}",
    )


def test_criterion_7_parameter_budget():
    config = ModelConfig(bands=144, active_channels=1, num_classes=15)
    model = build_model(config, seed=0)
    count = model.parameter_count()
    _report(
        7,
        "default config parameter count within [0.3M, 1.1M]",
        300_000 <= count <= 1_100_000,
        f"{count} trainable parameters",
    )


def test_criterion_8_metrics_exactness():
    diag = ConfusionMatrix.from_counts(np.diag([5, 3, 9]))
    balanced = ConfusionMatrix.from_counts([[25, 25], [25, 25]])
    skew = ConfusionMatrix.from_counts([[8, 2], [1, 9]])
    exact = (
        abs(diag.overall_accuracy() - 1) <= 1e-12
        and abs(diag.average_accuracy() - 1) <= 1e-12
        and abs(diag.kappa() - 1) <= 1e-12
        and abs(balanced.overall_accuracy() - 0.5) <= 1e-12
        and abs(balanced.kappa() - 0.0) <= 1e-12
        and abs(skew.overall_accuracy() - 0.85) <= 1e-12
        and abs(skew.average_accuracy() - 0.85) <= 1e-12
        and abs(skew.kappa() - 0.7) <= 1e-12
    )
    rng = np.random.default_rng(8)
    invariant = True
    for _ in range(100):
        k = int(rng.integers(2, 7))
        counts = rng.integers(0, 40, (k, k))
        counts[0, 0] += 1
        perm = rng.permutation(k)
        kappa_a = ConfusionMatrix.from_counts(counts).kappa()
        kappa_b = ConfusionMatrix.from_counts(counts[np.ix_(perm, perm)]).kappa()
        invariant &= abs(kappa_a - kappa_b) <= 1e-12
    _report(8, "OA/AA/Kappa exact to 1e-12; kappa permutation-invariant", exact and invariant)


def test_criterion_9_determinism_and_io(tmp_path):
    scene = synth_scene(
        SyntheticSceneSpec(height=16, width=16, bands=4, active_channels=1, classes=3),
        seed=9,
    )
    # same-seed training metrics are bit-identical
    model_config = ModelConfig(
        bands=4, active_channels=1, num_classes=3, window=5, embed_dim=8
    )
    train_config = TrainConfig(epochs=3, seed=9, samples_per_class=3, lr_milestones=())
    report_a = metrics_report(run_experiment(scene, model_config, train_config).confusion)
    report_b = metrics_report(run_experiment(scene, model_config, train_config).confusion)
    deterministic = report_a == report_b
    # scene container round-trip is bit-exact
    write_scene(scene, tmp_path / "scene")
    back = read_scene(tmp_path / "scene")
    round_trip = (
        back.spectral.tobytes() == scene.spectral.tobytes()
        and back.active.tobytes() == scene.active.tobytes()
        and back.labels.tobytes() == scene.labels.tobytes()
    )
    # predict-map emits a well-formed PPM of scene dimensions
    model = run_experiment(scene, model_config, train_config).model
    batch = patch_batch(scene, 5, all_pixel_coords(scene))
    preds = predict_batches(model, batch).numpy().astype(np.uint16) + 1
    write_ppm(tmp_path / "map.ppm", class_map_to_rgb(preds.reshape(16, 16)))
    raw = (tmp_path / "map.ppm").read_bytes()
    magic, w, h, maxval, offset = read_pnm_header(raw)
    ppm_ok = (magic, w, h, maxval) == ("P6", 16, 16, 255) and len(raw) - offset == 16 * 16 * 3
    _report(
        9,
        "same-seed training bit-identical; container round-trip; well-formed PPM",
        deterministic and round_trip and ppm_ok,
    )


def test_criterion_10_analysis_commands():
    scene = synth_scene(
        SyntheticSceneSpec(height=32, width=32, bands=8, active_channels=2, classes=4),
        seed=10,
    )
    rows = analyze_spectrum(scene, cutoff_bin=2)
    means = class_mean_spectra(scene)
    recon_ok = True
    for cls, spectrum in means.items():
        rebuilt = np.array([lo + hi for c, b, lo, hi in rows if c == cls])
        recon_ok &= np.abs(rebuilt - spectrum).max() <= 1e-9
    rng = np.random.default_rng(11)
    direction = rng.standard_normal(8)
    direction /= np.linalg.norm(direction)
    pixels = np.outer(direction, rng.standard_normal(400))
    pixels += 1e-4 * rng.standard_normal(pixels.shape)
    comps, _ = pca_components(pixels, n_components=3)
    ortho_ok = np.abs(comps @ comps.T - np.eye(3)).max() <= 1e-9
    cosine = abs(float(comps[0] @ direction))
    _report(
        10,
        "spectrum split exact; PCA orthonormal and recovers dominant direction",
        recon_ok and ortho_ok and cosine >= 0.999,
        f"cosine {cosine:.5f}",
    )
