import numpy as np
import pytest

from bimatch import (
    ConfigError,
    DistractorSpec,
    ObjectSpec,
    PipelineConfig,
    SceneConfig,
    generate_scene,
    run_sequence,
    validate_bundle,
    write_bundle,
)
from bimatch.scenes import (
    distractor_position,
    object_position,
    scene_config_from_text,
)


def _cfg(**overrides):
    base = dict(
        frames=4,
        height=8,
        width=8,
        channels=8,
        objects=(ObjectSpec(start=(1, 1), size=(2, 2), velocity=(1, 0)),),
        noise_sigma=0.1,
        seed=5,
    )
    base.update(overrides)
    return SceneConfig(**base)


class TestGenerateScene:
    def test_same_seed_bit_identical(self):
        a = generate_scene(_cfg())
        b = generate_scene(_cfg())
        for fa, fb in zip(a.features, b.features):
            assert np.array_equal(fa, fb)
        assert a.gt_masks.keys() == b.gt_masks.keys()
        for key in a.gt_masks:
            assert np.array_equal(a.gt_masks[key], b.gt_masks[key])

    def test_different_seed_differs(self):
        a = generate_scene(_cfg(seed=0))
        b = generate_scene(_cfg(seed=1))
        assert not np.array_equal(a.features[0], b.features[0])

    def test_noise_free_same_appearance_distractor_identical(self):
        cfg = _cfg(
            noise_sigma=0.0,
            objects=(ObjectSpec(start=(0, 0), size=(2, 2)),),
            distractors=(DistractorSpec(offset=(5, 5), size=(2, 2), same_appearance=True),),
        )
        bundle = generate_scene(cfg)
        feat = bundle.features[0]
        target_pixel = feat[:, 0, 0]
        dy, dx = distractor_position(cfg, 0)
        assert np.array_equal(feat[:, dy, dx], target_pixel)

    def test_own_appearance_distractor_differs(self):
        cfg = _cfg(
            noise_sigma=0.0,
            objects=(ObjectSpec(start=(0, 0), size=(2, 2)),),
            distractors=(DistractorSpec(offset=(5, 5), size=(2, 2), same_appearance=False),),
        )
        bundle = generate_scene(cfg)
        feat = bundle.features[0]
        dy, dx = distractor_position(cfg, 0)
        assert not np.array_equal(feat[:, dy, dx], feat[:, 0, 0])

    def test_single_frame_bundle_runs(self):
        bundle = generate_scene(_cfg(frames=1))
        preds = run_sequence(bundle, PipelineConfig())
        assert len(preds) == 1
        assert np.array_equal(preds[0].label_mask.labels, bundle.gt_labels(0))

    def test_bundle_validates_clean(self, tmp_path):
        bundle = generate_scene(_cfg())
        out = write_bundle(bundle, tmp_path / "scene")
        assert validate_bundle(out).ok

    def test_masks_match_declared_trajectory(self):
        cfg = _cfg()
        bundle = generate_scene(cfg)
        spec = cfg.objects[0]
        for t in range(cfg.frames):
            # recompute the clamped position independently
            oy = min(max(spec.start[0] + t * spec.velocity[0], 0), cfg.height - spec.size[0])
            ox = min(max(spec.start[1] + t * spec.velocity[1], 0), cfg.width - spec.size[1])
            assert (oy, ox) == object_position(cfg, 0, t)
            expected = np.zeros((cfg.height, cfg.width), dtype=bool)
            expected[oy : oy + 2, ox : ox + 2] = True
            got = bundle.gt_masks[(t, 1)][::16, ::16]
            assert np.array_equal(got, expected)

    def test_motion_clamped_in_bounds(self):
        cfg = _cfg(frames=20, objects=(ObjectSpec(start=(1, 1), size=(3, 3), velocity=(2, 2)),))
        bundle = generate_scene(cfg)
        last = bundle.gt_masks[(19, 1)][::16, ::16]
        assert last[5:8, 5:8].all()

    def test_blinking_distractor_visibility(self):
        spec = DistractorSpec(offset=(0, 0), appear_frame=1, blink_period=1)
        assert [spec.visible(t) for t in range(6)] == [False, True, False, True, False, True]
        steady = DistractorSpec(offset=(0, 0), appear_frame=2)
        assert [steady.visible(t) for t in range(4)] == [False, False, True, True]

    def test_background_leans_away_from_objects(self):
        cfg = _cfg(noise_sigma=0.0)
        bundle = generate_scene(cfg)
        feat = bundle.features[0]
        target = feat[:, 1, 1] / np.linalg.norm(feat[:, 1, 1])
        bg_cells = [(0, 0), (0, 7), (7, 0), (5, 6)]
        for (y, x) in bg_cells:
            vec = feat[:, y, x]
            assert float(target @ vec) <= 1e-9

    def test_oversized_object_rejected(self):
        with pytest.raises(ConfigError):
            generate_scene(_cfg(objects=(ObjectSpec(start=(0, 0), size=(9, 2)),)))

    def test_too_many_regions_for_channels(self):
        objs = tuple(ObjectSpec(start=(i, i), size=(1, 1)) for i in range(8))
        distractors = (DistractorSpec(offset=(7, 7), size=(1, 1), same_appearance=False),)
        with pytest.raises(ConfigError):
            generate_scene(_cfg(channels=8, objects=objs, distractors=distractors))

    def test_disk_shape(self):
        cfg = _cfg(objects=(ObjectSpec(start=(1, 1), size=(5, 5), shape="disk"),))
        bundle = generate_scene(cfg)
        mask = bundle.gt_masks[(0, 1)][::16, ::16]
        assert mask[3, 3] and not mask[1, 1]  # center in, bbox corner out


class TestSceneConfigText:
    def test_round_trip_parse(self):
        text = """
frames: 5
height: 8
width: 8
channels: 12
noise_sigma: 0.05
seed: 42
objects:
  shape=rect size=2x2 start=1,1 velocity=1,0
  shape=disk size=3x3 start=4,4
distractors:
  offset=2,5 size=2x2 same_appearance=true appear_frame=1 blink_period=1
"""
        cfg = scene_config_from_text(text)
        assert cfg.frames == 5 and cfg.channels == 12
        assert cfg.seed == 42 and cfg.noise_sigma == 0.05
        assert cfg.objects[0].velocity == (1, 0)
        assert cfg.objects[1].shape == "disk"
        assert cfg.distractors[0].appear_frame == 1
        assert cfg.distractors[0].blink_period == 1

    def test_seed_override(self):
        cfg = scene_config_from_text(
            "frames: 1\nheight: 4\nwidth: 4\nchannels: 4\nseed: 3\n"
            "objects:\n  start=0,0\n",
            seed=99,
        )
        assert cfg.seed == 99

    def test_missing_key_raises(self):
        from bimatch import ValidationError

        with pytest.raises(ValidationError):
            scene_config_from_text("height: 4\nwidth: 4\nchannels: 4\n")
