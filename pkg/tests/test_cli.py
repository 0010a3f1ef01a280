import json

import numpy as np
import pytest

from animkp import bitstream as bs
from animkp.cli import main
from animkp.pnm import read_pnm, write_pnm
from animkp.trace import dump_trace
from animkp.transforms import MotionParams, TransformMode
from animkp.warpfield import neutral_grid, to_uint8

from conftest import bilinear_oracle, random_image, random_motion


def write_trace(path, frames):
    path.write_text(dump_trace(frames))
    return str(path)


@pytest.fixture
def rot_scale_trace(rng, tmp_path):
    frames = [random_motion(rng, TransformMode.ROT_SCALE) for _ in range(90)]
    return write_trace(tmp_path / "t.jsonl", frames), frames


class TestEncodeDecode:
    def test_encode_reports(self, rot_scale_trace, tmp_path, capsys):
        trace, _ = rot_scale_trace
        out = tmp_path / "s.akp"
        assert main(["encode", trace, "--mode", "rot-scale", "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "frames: 90" in text and "bits/frame: 124" in text and "kbps: 3.100" in text
        assert len(out.read_bytes()) == bs.HEADER_SIZE + 1395

    def test_decode_reencode_identical(self, rot_scale_trace, tmp_path):
        trace, _ = rot_scale_trace
        s1, t2, s2 = tmp_path / "a.akp", tmp_path / "b.jsonl", tmp_path / "b.akp"
        assert main(["encode", trace, "--mode", "rot-scale", "--out", str(s1)]) == 0
        assert main(["decode", str(s1), "--out", str(t2)]) == 0
        assert main(["encode", str(t2), "--mode", "rot-scale", "--out", str(s2)]) == 0
        assert s1.read_bytes() == s2.read_bytes()

    def test_decode_stdout_no_jacobian(self, rng, tmp_path, capsys):
        trace = write_trace(tmp_path / "t.jsonl", [random_motion(rng, TransformMode.NO_JACOBIAN) for _ in range(3)])
        s = tmp_path / "s.akp"
        main(["encode", trace, "--mode", "none", "--out", str(s)])
        capsys.readouterr()
        assert main(["decode", str(s)]) == 0
        recs = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
        assert len(recs) == 3 and all(set(r) == {"frame", "kps"} for r in recs)

    def test_empty_trace(self, tmp_path, capsys):
        (tmp_path / "e.jsonl").write_text("")
        assert main(["encode", str(tmp_path / "e.jsonl"), "--mode", "none", "--out", str(tmp_path / "o")]) == 1

    def test_missing_trace(self, tmp_path):
        assert main(["encode", str(tmp_path / "nope"), "--mode", "none", "--out", str(tmp_path / "o")]) == 1

    def test_mode_mismatch(self, rng, tmp_path, capsys):
        trace = write_trace(tmp_path / "t.jsonl", [random_motion(rng, TransformMode.FULL_JACOBIAN)])
        assert main(["encode", trace, "--mode", "rot-scale", "--out", str(tmp_path / "o")]) == 2
        assert "jacobians" in capsys.readouterr().err

    def test_truncated(self, rot_scale_trace, tmp_path, capsys):
        trace, _ = rot_scale_trace
        s = tmp_path / "s.akp"
        main(["encode", trace, "--mode", "rot-scale", "--out", str(s)])
        data = s.read_bytes()
        # 40 frames * 124 bits = 620 bytes, so cutting at 630 leaves frame 40 incomplete
        s.write_bytes(data[: bs.HEADER_SIZE + 630])
        capsys.readouterr()
        assert main(["decode", str(s)]) == 1
        assert "frame 40" in capsys.readouterr().err

    def test_bad_magic(self, tmp_path, capsys):
        (tmp_path / "x").write_bytes(b"JUNK" + bytes(12))
        assert main(["decode", str(tmp_path / "x")]) == 1
        assert "BadMagic" in capsys.readouterr().err


def _grid_values(codes, quant=bs.DEFAULT_QUANT):
    return bs._dequantize_array(codes, *quant.kp_range, quant.kp_bits)


class TestAnimate:
    def _setup(self, tmp_path, frames, mode, img):
        write_pnm(tmp_path / "i.ppm", img)
        trace = write_trace(tmp_path / "t.jsonl", frames)
        assert main(["encode", trace, "--mode", mode, "--out", str(tmp_path / "s.akp")]) == 0
        return str(tmp_path / "i.ppm"), str(tmp_path / "s.akp")

    def test_identical_frames_reproduce_iframe(self, rng, tmp_path, capsys):
        img = random_image(rng, 24, 20)
        m = random_motion(rng, TransformMode.ROT_SCALE_SHEAR)
        ipath, spath = self._setup(tmp_path, [m] * 4, "rot-scale-shear", img)
        assert main(["animate", ipath, spath, "--all", "--out", str(tmp_path / "o")]) == 0
        for k in range(4):
            np.testing.assert_array_equal(read_pnm(tmp_path / "o" / f"frame_{k:04d}.ppm"), img)

    def test_translation_matches_oracle(self, rng, tmp_path):
        n = 16
        img = random_image(rng, n, n)
        # keypoints on reconstruction levels so the decoded shift is exactly 3 steps
        codes = rng.integers(10, 50, size=(10, 2))
        kp_i, kp_p = _grid_values(codes), _grid_values(codes + 3)
        frames = [MotionParams(TransformMode.NO_JACOBIAN, kp_i), MotionParams(TransformMode.NO_JACOBIAN, kp_p)]
        ipath, spath = self._setup(tmp_path, frames, "none", img)
        assert main(["animate", ipath, spath, "--frame", "1", "--sigma", "10", "--out", str(tmp_path / "o")]) == 0
        out = read_pnm(tmp_path / "o" / "frame_0001.ppm")
        t = kp_p - kp_i
        expected = to_uint8(bilinear_oracle(img / 255.0, neutral_grid(n, n) - t.mean(axis=0)))
        np.testing.assert_array_equal(out, expected)

    def test_singular_jacobian_exit_3(self, rng, tmp_path, capsys):
        img = random_image(rng, 8, 8)
        m0 = random_motion(rng, TransformMode.FULL_JACOBIAN)
        jac = m0.jacobians.copy()
        jac[2] = [[1.0, 1.0], [1.0, 1.0]]
        m1 = MotionParams(TransformMode.FULL_JACOBIAN, m0.kp_frame, jacobians=jac)
        ipath, spath = self._setup(tmp_path, [m0, m1], "full-jac", img)
        assert main(["animate", ipath, spath, "--frame", "1", "--out", str(tmp_path / "o")]) == 3
        err = capsys.readouterr().err
        assert "keypoint 2" in err and "frame 1" in err

    def test_frame_out_of_range(self, rng, tmp_path):
        img = random_image(rng, 8, 8)
        ipath, spath = self._setup(tmp_path, [random_motion(rng, TransformMode.NO_JACOBIAN)], "none", img)
        assert main(["animate", ipath, spath, "--frame", "5", "--out", str(tmp_path / "o")]) == 1

    def test_grayscale_output(self, rng, tmp_path):
        img = random_image(rng, 12, 12, 1)
        ipath, spath = self._setup(tmp_path, [random_motion(rng, TransformMode.NO_JACOBIAN)], "none", img)
        assert main(["animate", ipath, spath, "--out", str(tmp_path / "o")]) == 0
        assert (tmp_path / "o" / "frame_0000.pgm").exists()


class TestBitrate:
    def test_table(self, capsys):
        assert main(["bitrate"]) == 0
        rows = {line.split()[0]: line.split() for line in capsys.readouterr().out.splitlines()[1:]}
        assert [rows[m][2] for m in ("none", "rot-scale", "rot-scale-shear", "full-jac")] == [
            "3.000", "3.100", "5.100", "8.000"]
        assert rows["rot-scale"][3] == "61.25%"

    def test_fps_scales(self, capsys):
        main(["bitrate", "--mode", "rot-scale", "--fps", "30"])
        assert capsys.readouterr().out.splitlines()[1].split()[2] == f"{3.1 * 1.2:.3f}"

    def test_bad_bits(self, capsys):
        assert main(["bitrate", "--kp-bits", "0"]) == 1


class TestCompare:
    def test_self(self, rng, tmp_path, capsys):
        img = random_image(rng, 16, 16)
        write_pnm(tmp_path / "a.ppm", img)
        assert main(["compare", str(tmp_path / "a.ppm"), str(tmp_path / "a.ppm")]) == 0
        out = capsys.readouterr().out
        assert "PSNR: 99.0000 dB" in out and "SSIM: 1.000000" in out

    def test_shape_mismatch(self, rng, tmp_path):
        write_pnm(tmp_path / "a.ppm", random_image(rng, 16, 16))
        write_pnm(tmp_path / "b.ppm", random_image(rng, 16, 17))
        assert main(["compare", str(tmp_path / "a.ppm"), str(tmp_path / "b.ppm")]) == 1


class TestGnCheck:
    def test_raw_only(self, capsys):
        assert main(["gn-check", "--pairs", "500", "--no-normalize"]) == 0
        assert "raw Lipschitz estimate" in capsys.readouterr().out

    def test_affine_net_passes(self, capsys):
        assert main(["gn-check", "--pairs", "2000", "--layers", "0"]) == 0

    def test_violation_reported(self, capsys):
        # deep saturating nets exceed the bound; the command must say so
        assert main(["gn-check", "--pairs", "10000", "--seed", "0"]) == 4
        assert "exceeds" in capsys.readouterr().err
