"""Scene container round-trips and synthetic scene generation."""

import numpy as np
import pytest

from s2fin.data import (
    ACTIVE_NAME,
    LABELS_NAME,
    MANIFEST_NAME,
    SPECTRAL_NAME,
    SceneContainer,
    SceneFormatError,
    SyntheticSceneSpec,
    read_scene,
    synth_scene,
    write_scene,
)


def small_scene(rng, h=6, w=5, b=3, ca=2, k=2) -> SceneContainer:
    labels = rng.integers(0, k + 1, (h, w)).astype(np.uint16)
    return SceneContainer(
        spectral=rng.standard_normal((b, h, w)).astype(np.float32),
        active=rng.standard_normal((ca, h, w)).astype(np.float32),
        labels=labels,
        class_names=[f"c{i}" for i in range(k)],
    )


class TestContainerIo:
    def test_payload_size_arithmetic(self, rng, tmp_path):
        scene = SceneContainer(
            spectral=np.zeros((1, 2, 2), dtype=np.float32),
            active=np.zeros((1, 2, 2), dtype=np.float32),
            labels=np.zeros((2, 2), dtype=np.uint16),
            class_names=["only"],
        )
        write_scene(scene, tmp_path / "s")
        assert (tmp_path / "s" / SPECTRAL_NAME).stat().st_size == 16
        assert (tmp_path / "s" / LABELS_NAME).stat().st_size == 8

    def test_round_trip_bit_exact(self, rng, tmp_path):
        scene = small_scene(rng)
        write_scene(scene, tmp_path / "s")
        back = read_scene(tmp_path / "s")
        assert back.spectral.tobytes() == scene.spectral.tobytes()
        assert back.active.tobytes() == scene.active.tobytes()
        assert back.labels.tobytes() == scene.labels.tobytes()
        assert back.class_names == scene.class_names
        # writing the read-back scene reproduces identical files
        write_scene(back, tmp_path / "s2")
        for name in (MANIFEST_NAME, SPECTRAL_NAME, ACTIVE_NAME, LABELS_NAME):
            assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "s2" / name).read_bytes()

    def test_truncated_payload_fails_without_partial_object(self, rng, tmp_path):
        scene = small_scene(rng)
        write_scene(scene, tmp_path / "s")
        payload = tmp_path / "s" / SPECTRAL_NAME
        payload.write_bytes(payload.read_bytes()[:-4])
        with pytest.raises(SceneFormatError, match="expected"):
            read_scene(tmp_path / "s")

    def test_unknown_manifest_key_warns_and_is_ignored(self, rng, tmp_path):
        scene = small_scene(rng)
        write_scene(scene, tmp_path / "s")
        manifest = tmp_path / "s" / MANIFEST_NAME
        manifest.write_text(manifest.read_text() + "favorite_color: teal\n")
        with pytest.warns(UserWarning, match="favorite_color"):
            back = read_scene(tmp_path / "s")
        assert back.labels.shape == scene.labels.shape

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_scene(tmp_path / "nope")

    def test_label_beyond_class_count_rejected(self, rng):
        with pytest.raises(SceneFormatError):
            SceneContainer(
                spectral=np.zeros((1, 2, 2), dtype=np.float32),
                active=np.zeros((1, 2, 2), dtype=np.float32),
                labels=np.full((2, 2), 7, dtype=np.uint16),
                class_names=["a", "b"],
            )


class TestSynthScene:
    def test_zero_noise_pixels_equal_prototypes(self):
        protos_s = np.array([[1.0, -1.0, 0.5], [0.0, 2.0, -0.25]])
        protos_a = np.array([[0.75], [-0.125]])
        spec = SyntheticSceneSpec(
            height=16,
            width=16,
            bands=3,
            active_channels=1,
            classes=2,
            noise_std=0.0,
            spectral_prototypes=protos_s,
            active_prototypes=protos_a,
        )
        scene = synth_scene(spec, seed=3)
        for cls in (1, 2):
            mask = scene.labels == cls
            assert mask.any()
            for band in range(3):
                vals = scene.spectral[band][mask]
                assert (vals == np.float32(protos_s[cls - 1, band])).all()
            assert (scene.active[0][mask] == np.float32(protos_a[cls - 1, 0])).all()

    def test_same_seed_identical(self):
        spec = SyntheticSceneSpec(height=20, width=20)
        one = synth_scene(spec, seed=11)
        two = synth_scene(spec, seed=11)
        assert one.spectral.tobytes() == two.spectral.tobytes()
        assert one.labels.tobytes() == two.labels.tobytes()

    def test_different_seed_differs(self):
        spec = SyntheticSceneSpec(height=20, width=20)
        assert synth_scene(spec, 1).labels.tobytes() != synth_scene(spec, 2).labels.tobytes()

    def test_class_share_floor_many_seeds(self):
        spec = SyntheticSceneSpec(height=32, width=32, classes=4)
        floor = 0.01 * 32 * 32
        for seed in range(100):
            scene = synth_scene(spec, seed=seed)
            counts = np.bincount(scene.labels.ravel(), minlength=5)[1:]
            assert (counts >= floor).all()

    def test_too_few_classes_rejected(self):
        with pytest.raises(ValueError):
            synth_scene(SyntheticSceneSpec(classes=1), seed=0)
