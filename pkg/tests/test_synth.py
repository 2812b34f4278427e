import numpy as np
import pytest

from swimtrack import masks as mk
from swimtrack import synth
from helpers import cached_generate, fp_scene, tbf_swimmer


def small_swimmer(**overrides):
    base = dict(
        body_length_px=60.0,
        amplitude_px=5.0,
        frequency_hz=0.5,
        wavenumber=2.0,
        fps=30.0,
        duration_s=2.0,
        image_width=128,
        image_height=96,
        start_x=100.0,
        start_y=48.0,
    )
    base.update(overrides)
    return synth.SwimmerSpec(**base)


class TestGenerate:
    def test_deterministic(self):
        scene = fp_scene(seed=11, n_blobs=3)
        a = synth.generate(scene)
        b = synth.generate(scene)
        assert len(a.candidates) == len(b.candidates)
        for ca, cb in zip(a.candidates, b.candidates):
            assert ca == cb
        for fa, fb in zip(a.truth, b.truth):
            assert fa.mask == fb.mask
            assert fa.arc_length_px == fb.arc_length_px

    def test_zero_frequency_static(self):
        data = cached_generate(
            synth.SceneSpec(swimmers=(small_swimmer(frequency_hz=0.0),), seed=0)
        )
        first = data.swimmer_masks[0][0]
        assert all(m == first for m in data.swimmer_masks[0])

    def test_zero_amplitude_arc_equals_body_length(self):
        data = cached_generate(
            synth.SceneSpec(swimmers=(small_swimmer(amplitude_px=0.0),), seed=0)
        )
        for ft in data.truth[:10]:
            assert ft.arc_length_px == pytest.approx(60.0, rel=1e-3)

    def test_ground_truth_frequency_is_exact(self):
        swimmer = tbf_swimmer(0.5)
        assert swimmer.frequency_hz == 0.5
        scene = synth.SceneSpec(swimmers=(swimmer,), seed=0)
        assert scene.swimmers[0].frequency_hz == 0.5

    def test_arc_length_stable_over_cycle(self):
        # amplitude 0.1 * body length: arc varies by < 3 percent
        data = cached_generate(synth.SceneSpec(swimmers=(tbf_swimmer(0.5),), seed=2))
        arcs = np.array([ft.arc_length_px for ft in data.truth[:60]])
        assert (arcs.max() - arcs.min()) / arcs.min() < 0.03

    def test_swimmer_exits_frame_rejected(self):
        with pytest.raises(synth.SynthError, match="exits"):
            synth.generate(
                synth.SceneSpec(
                    swimmers=(small_swimmer(speed_px_per_s=100.0, heading_deg=0.0),),
                    seed=0,
                )
            )

    def test_blob_outside_rejected(self):
        swimmer = small_swimmer()
        blob = synth.BlobSpec(frame_start=0, frame_end=5, x=2.0, y=2.0, radius_px=5.0)
        with pytest.raises(synth.SynthError, match="blob"):
            synth.generate(synth.SceneSpec(swimmers=(swimmer,), blobs=(blob,), seed=0))

    def test_candidates_only_at_sampled_frames(self):
        data = cached_generate(fp_scene(seed=13, n_blobs=4))
        sampled = set(data.spec.sampled_frames())
        for c in data.candidates:
            assert c.frame_index in sampled
            assert c.frame_index == c.interval_index * 30

    def test_blob_candidates_present_and_scored(self):
        data = cached_generate(fp_scene(seed=13, n_blobs=4))
        kinds = {data.candidate_objects[(c.interval_index, c.candidate_index)][0]
                 for c in data.candidates}
        assert kinds == {"swimmer", "blob"}
        for c in data.candidates:
            assert set(c.prompt_scores) == {"shark", "water", "rock"}


class TestOracleTracks:
    def test_unperturbed_cross_interval_identity(self):
        data = cached_generate(fp_scene(seed=17, n_blobs=0))
        tracks = synth.oracle_tracks(data)
        swimmer_tracks = [t for t in tracks if t.origin_candidate == 0]
        assert len(swimmer_tracks) >= 3
        a, b = swimmer_tracks[0], swimmer_tracks[1]
        for f in range(0, data.n_frames, 10):
            assert mk.iou(a.masks[f], b.masks[f]) == 1.0

    def test_perturbed_wide_swimmer_above_threshold(self):
        # full width >= 20 px: one-pixel erosion vs dilation stays above 0.7
        data = cached_generate(fp_scene(seed=19, n_blobs=0, wide=True))
        tracks = synth.oracle_tracks(data, perturb_px=1)
        for i in range(len(tracks)):
            for j in range(i + 1, len(tracks)):
                shared = tracks[i].present & tracks[j].present
                f = min(shared)
                assert mk.iou(tracks[i].masks[f], tracks[j].masks[f]) > 0.7

    def test_blob_track_ends_with_blob(self):
        scene = fp_scene(seed=23, n_blobs=1)
        data = cached_generate(scene)
        tracks = synth.oracle_tracks(data)
        blob = scene.blobs[0]
        blob_tracks = [
            t
            for t in tracks
            if data.candidate_objects[t.origin][0] == "blob"
        ]
        assert blob_tracks
        for t in blob_tracks:
            assert max(t.present) == min(blob.frame_end, data.n_frames) - 1
            assert min(t.present) == blob.frame_start

    def test_propagator_matches_candidates(self):
        data = cached_generate(fp_scene(seed=29, n_blobs=2))
        propagator = synth.SyntheticPropagator(data)
        for c in data.candidates:
            track = propagator.propagate(c)
            assert track.origin == (c.interval_index, c.candidate_index)
            assert c.frame_index in track.present


class TestSceneSerialization:
    def test_dict_roundtrip(self):
        scene = fp_scene(seed=31, n_blobs=2)
        rebuilt = synth.scene_from_dict(synth.scene_to_dict(scene))
        assert rebuilt == scene

    def test_unknown_keys_rejected(self):
        with pytest.raises(synth.SynthError, match="unknown"):
            synth.scene_from_dict({"swimmers": [], "bogus": 1})
