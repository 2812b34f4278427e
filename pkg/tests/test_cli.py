import csv
import json

import pytest

from swimtrack import cli
from swimtrack import io as sio
from swimtrack import masks as mk
from swimtrack import synth
from helpers import fp_scene

CAMERA = {
    "sensor_width_mm": 13.2,
    "image_width_px": 1920,
    "altitude_m": 37,
    "depth_m": 1.5,
    "focal_length_mm": 28,
    "fps": 30,
}


def run(argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def scene_files(tmp_path):
    scene = fp_scene(seed=101, n_blobs=2)
    scene_path = tmp_path / "scene.json"
    scene_path.write_text(json.dumps(synth.scene_to_dict(scene)))
    paths = {
        "scene": scene_path,
        "candidates": tmp_path / "c.ndjson",
        "tracks": tmp_path / "t.ndjson",
        "truth": tmp_path / "gt.ndjson",
        "individuals": tmp_path / "ind.ndjson",
    }
    rc = run(
        ["synth", "--scene", paths["scene"], "--candidates-out", paths["candidates"],
         "--tracks-out", paths["tracks"], "--truth-out", paths["truth"]]
    )
    assert rc == 0
    return paths


class TestAlign:
    def test_end_to_end_one_individual(self, scene_files, capsys):
        rc = run(
            ["align", "--candidates", scene_files["candidates"],
             "--tracks", scene_files["tracks"], "--out", scene_files["individuals"]]
        )
        assert rc == 0
        individuals = sio.read_individuals(scene_files["individuals"])
        assert set(individuals) == {0}

    def test_malformed_line_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.ndjson"
        good_row = json.dumps(
            {"frame": 0, "interval": 0,
             "mask": mk.mask_to_text(mk.BinaryMask.full(4, 4)),
             "bbox": [0, 0, 3, 3], "scores": {"shark": 0.99}}
        )
        bad.write_text(good_row + "\n{not json\n")
        out = tmp_path / "o.ndjson"
        rc = run(["align", "--candidates", bad, "--tracks", bad, "--out", out])
        assert rc == 2
        assert ":2:" in capsys.readouterr().err

    def test_unknown_key_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.ndjson"
        row = {"frame": 0, "interval": 0,
               "mask": mk.mask_to_text(mk.BinaryMask.full(4, 4)),
               "bbox": [0, 0, 3, 3], "scores": {"shark": 0.99}, "extra": 1}
        bad.write_text(json.dumps(row) + "\n")
        tracks = tmp_path / "t.ndjson"
        tracks.write_text("")
        rc = run(["align", "--candidates", bad, "--tracks", tracks, "--out", tmp_path / "o"])
        assert rc == 2
        assert "unknown keys" in capsys.readouterr().err

    def test_empty_candidates_exit_0(self, tmp_path):
        empty = tmp_path / "empty.ndjson"
        empty.write_text("")
        out = tmp_path / "out.ndjson"
        rc = run(["align", "--candidates", empty, "--tracks", empty, "--out", out])
        assert rc == 0
        assert out.read_text() == ""

    def test_single_interval_exit_3(self, tmp_path, capsys):
        scene = fp_scene(seed=3, n_blobs=0)
        single = synth.SceneSpec(
            swimmers=(scene.swimmers[0],), seed=3, interval_stride=200
        )
        data = synth.generate(single)
        c = tmp_path / "c.ndjson"
        t = tmp_path / "t.ndjson"
        sio.write_candidates(c, data.candidates)
        sio.write_tracks(t, synth.oracle_tracks(data))
        rc = run(["align", "--candidates", c, "--tracks", t, "--out", tmp_path / "o"])
        assert rc == 3
        assert "single-interval-video" in capsys.readouterr().err

    def test_deterministic_outputs_and_inputs_untouched(self, scene_files, tmp_path):
        before = (
            scene_files["candidates"].read_bytes(),
            scene_files["tracks"].read_bytes(),
        )
        out_a = tmp_path / "a.ndjson"
        out_b = tmp_path / "b.ndjson"
        for out in (out_a, out_b):
            assert run(
                ["align", "--candidates", scene_files["candidates"],
                 "--tracks", scene_files["tracks"], "--out", out]
            ) == 0
        assert out_a.read_bytes() == out_b.read_bytes()
        after = (
            scene_files["candidates"].read_bytes(),
            scene_files["tracks"].read_bytes(),
        )
        assert before == after

    def test_flag_overrides_gate(self, scene_files, tmp_path):
        out = tmp_path / "none.ndjson"
        rc = run(
            ["align", "--candidates", scene_files["candidates"],
             "--tracks", scene_files["tracks"], "--out", out,
             "--score-threshold", "0.999"]
        )
        assert rc == 0
        assert out.read_text() == ""


class TestBiometrics:
    def test_missing_camera_exit_2(self, scene_files, tmp_path, capsys):
        rc = run(
            ["biometrics", "--individuals", scene_files["candidates"],
             "--camera", tmp_path / "missing.json",
             "--lengths-out", tmp_path / "l.csv", "--tbf-out", tmp_path / "t.csv",
             "--displacement-out", tmp_path / "d.csv"]
        )
        assert rc == 2

    def test_length_row_from_reference_constants(self, tmp_path):
        cam_path = tmp_path / "camera.json"
        cam_path.write_text(json.dumps(CAMERA))
        line = mk.BinaryMask.from_pixels(200, 9, [(x, 4) for x in range(160)])
        ind = tmp_path / "ind.ndjson"
        with open(ind, "w") as fh:
            for f in range(20):
                fh.write(json.dumps({"id": 0, "frame": f, "mask": mk.mask_to_text(line)}) + "\n")
        lengths = tmp_path / "lengths.csv"
        rc = run(
            ["biometrics", "--individuals", ind, "--camera", cam_path,
             "--lengths-out", lengths, "--tbf-out", tmp_path / "tbf.csv",
             "--displacement-out", tmp_path / "disp.csv"]
        )
        assert rc == 0
        rows = list(csv.DictReader(open(lengths)))
        assert len(rows) == 20
        assert float(rows[0]["length_m"]) == pytest.approx(1.5125, abs=0.02)
        assert float(rows[0]["length_px"]) == pytest.approx(160.0, abs=2.0)

    def test_full_pipeline_tbf(self, tmp_path):
        swimmer = synth.SwimmerSpec(
            body_length_px=120.0, amplitude_px=12.0, frequency_hz=0.5,
            wavenumber=4.0, fps=30.0, duration_s=20.0,
            image_width=220, image_height=160, start_x=180.0, start_y=80.0,
        )
        data = synth.generate(synth.SceneSpec(swimmers=(swimmer,), seed=9))
        c = tmp_path / "c.ndjson"
        t = tmp_path / "t.ndjson"
        ind = tmp_path / "ind.ndjson"
        sio.write_candidates(c, data.candidates)
        sio.write_tracks(t, synth.oracle_tracks(data))
        assert run(["align", "--candidates", c, "--tracks", t, "--out", ind]) == 0
        cam_path = tmp_path / "camera.json"
        cam_path.write_text(json.dumps(CAMERA))
        tbf_csv = tmp_path / "tbf.csv"
        rc = run(
            ["biometrics", "--individuals", ind, "--camera", cam_path,
             "--lengths-out", tmp_path / "l.csv", "--tbf-out", tbf_csv,
             "--displacement-out", tmp_path / "d.csv"]
        )
        assert rc == 0
        rows = list(csv.DictReader(open(tbf_csv)))
        assert rows
        for row in rows:
            assert abs(float(row["tbf_hz"]) - 0.5) / 0.5 < 0.07
        # rerunning biometrics reproduces the CSVs byte for byte
        second = tmp_path / "tbf2.csv"
        rc = run(
            ["biometrics", "--individuals", ind, "--camera", cam_path,
             "--lengths-out", tmp_path / "l2.csv", "--tbf-out", second,
             "--displacement-out", tmp_path / "d2.csv"]
        )
        assert rc == 0
        assert second.read_bytes() == tbf_csv.read_bytes()

    def test_camera_flag_overrides_file(self, tmp_path):
        cam_path = tmp_path / "camera.json"
        cam_path.write_text(json.dumps(CAMERA))
        line = mk.BinaryMask.from_pixels(200, 9, [(x, 4) for x in range(160)])
        ind = tmp_path / "ind.ndjson"
        with open(ind, "w") as fh:
            for f in range(20):
                fh.write(json.dumps({"id": 0, "frame": f, "mask": mk.mask_to_text(line)}) + "\n")
        out_base = tmp_path / "base.csv"
        out_double = tmp_path / "double.csv"
        for out, extra in ((out_base, []), (out_double, ["--altitude-m", "77", "--depth-m", "0"])):
            rc = run(
                ["biometrics", "--individuals", ind, "--camera", cam_path,
                 "--lengths-out", out, "--tbf-out", tmp_path / "t.csv",
                 "--displacement-out", tmp_path / "d.csv", *extra]
            )
            assert rc == 0
        base = float(list(csv.DictReader(open(out_base)))[0]["length_m"])
        doubled = float(list(csv.DictReader(open(out_double)))[0]["length_m"])
        # (77 + 0) / (37 + 1.5) doubles the scale exactly
        assert doubled == pytest.approx(2 * base, rel=1e-9)


class TestSynthCommand:
    def test_rerun_identical(self, tmp_path):
        scene = fp_scene(seed=77, n_blobs=1)
        scene_path = tmp_path / "scene.json"
        scene_path.write_text(json.dumps(synth.scene_to_dict(scene)))
        blobs = []
        for tag in ("x", "y"):
            out = {k: tmp_path / f"{k}_{tag}" for k in ("c", "t", "g")}
            assert run(
                ["synth", "--scene", scene_path, "--candidates-out", out["c"],
                 "--tracks-out", out["t"], "--truth-out", out["g"]]
            ) == 0
            blobs.append(tuple(out[k].read_bytes() for k in ("c", "t", "g")))
        assert blobs[0] == blobs[1]

    def test_truth_file_has_scene_header(self, scene_files):
        first = json.loads(scene_files["truth"].read_text().splitlines()[0])
        assert "frequency_hz" in first
        assert first["frequency_hz"] == pytest.approx(0.4)
        second = json.loads(scene_files["truth"].read_text().splitlines()[1])
        assert set(second) >= {"frame", "true_mask", "arc_length_px", "head_xy"}

    def test_invalid_scene_exit_2(self, tmp_path):
        scene_path = tmp_path / "scene.json"
        scene_path.write_text(json.dumps({"swimmers": [], "seed": 0}))
        rc = run(
            ["synth", "--scene", scene_path, "--candidates-out", tmp_path / "c",
             "--tracks-out", tmp_path / "t", "--truth-out", tmp_path / "g"]
        )
        assert rc == 2


class TestEvalCommand:
    def test_perfect_predictions(self, scene_files, tmp_path, capsys):
        rc = run(
            ["align", "--candidates", scene_files["candidates"],
             "--tracks", scene_files["tracks"], "--out", scene_files["individuals"]]
        )
        assert rc == 0
        report = tmp_path / "report.txt"
        metrics_csv = tmp_path / "metrics.csv"
        rc = run(
            ["eval", "--pred", scene_files["individuals"],
             "--truth", scene_files["truth"], "--report", report,
             "--csv", metrics_csv]
        )
        assert rc == 0
        content = dict(
            line.split("=", 1) for line in report.read_text().splitlines()
        )
        assert float(content["dice"]) == 1.0
        assert float(content["precision@0.35"]) == 1.0
        csv_rows = {r["metric"]: r["value"] for r in csv.DictReader(open(metrics_csv))}
        assert csv_rows["dice"] == content["dice"]

    def test_camera_config_unknown_key_rejected(self, tmp_path, capsys):
        bad = dict(CAMERA)
        bad["iso"] = 100
        cam_path = tmp_path / "camera.json"
        cam_path.write_text(json.dumps(bad))
        ind = tmp_path / "ind.ndjson"
        ind.write_text("")
        rc = run(
            ["biometrics", "--individuals", ind, "--camera", cam_path,
             "--lengths-out", tmp_path / "l.csv", "--tbf-out", tmp_path / "t.csv",
             "--displacement-out", tmp_path / "d.csv"]
        )
        assert rc == 2
        assert "unknown camera keys" in capsys.readouterr().err


class TestSplitCommand:
    def test_three_blocks(self, tmp_path):
        frames = tmp_path / "frames.csv"
        with open(frames, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["video", "frame"])
            for f in range(100):
                writer.writerow(["v0", f])
        out = tmp_path / "split.csv"
        rc = run(["--seed", "4", "split", "--frames", frames, "--out", out])
        assert rc == 0
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 100
        assert len({r["block"] for r in rows}) == 3

    def test_config_unknown_key_exit_2(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"split": {"blocksize": 45}}))
        frames = tmp_path / "frames.csv"
        frames.write_text("video,frame\nv0,0\n")
        rc = run(
            ["--config", config, "split", "--frames", frames, "--out", tmp_path / "o"]
        )
        assert rc == 2
        assert "unknown keys" in capsys.readouterr().err
