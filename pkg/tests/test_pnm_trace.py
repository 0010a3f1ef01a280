import json

import numpy as np
import pytest

from animkp.pnm import PNMError, decode_pnm, encode_pnm, read_pnm, write_pnm
from animkp.trace import TraceError, TraceModeMismatch, dump_trace, load_trace, parse_records
from animkp.transforms import TransformMode

from conftest import ALL_MODES, random_image, random_motion


class TestPNM:
    @pytest.mark.parametrize("c", [1, 3])
    def test_roundtrip(self, rng, tmp_path, c):
        img = random_image(rng, 7, 9, c)
        write_pnm(tmp_path / "x.pnm", img)
        np.testing.assert_array_equal(read_pnm(tmp_path / "x.pnm"), img)

    def test_header_bytes(self):
        data = encode_pnm(np.zeros((2, 3, 3), dtype=np.uint8))
        assert data.startswith(b"P6\n3 2\n255\n") and len(data) == 11 + 18

    def test_comments_in_header(self):
        data = b"P5\n# made by hand\n2 1\n# max\n255\n\x05\x06"
        np.testing.assert_array_equal(decode_pnm(data)[..., 0], [[5, 6]])

    def test_2d_is_grayscale(self):
        assert encode_pnm(np.zeros((2, 2), dtype=np.uint8)).startswith(b"P5")

    @pytest.mark.parametrize(
        "data",
        [b"P3\n1 1\n255\n0 0 0", b"P6\n1 1\n65535\n" + bytes(6), b"P6\n2 2\n255\n" + bytes(5), b"P6\n1", b"P6\nx 1\n255\n"],
    )
    def test_rejects(self, data):
        with pytest.raises(PNMError):
            decode_pnm(data)

    def test_rejects_float(self):
        with pytest.raises(PNMError):
            encode_pnm(np.zeros((2, 2, 3)))


class TestTrace:
    @pytest.mark.parametrize("mode", ALL_MODES)
    def test_roundtrip(self, rng, mode):
        frames = [random_motion(rng, mode, K=4) for _ in range(3)]
        back = load_trace(dump_trace(frames), mode)
        for a, b in zip(frames, back):
            np.testing.assert_array_equal(a.kps, b.kps)
            assert a.phi == b.phi
            for name in ("shear", "jacobians"):
                if getattr(a, name) is not None:
                    np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    def test_blank_lines_ignored(self):
        text = '\n{"frame": 0, "kps": [[0, 0], [0.5, 0.5]]}\n\n'
        assert len(load_trace(text, TransformMode.NO_JACOBIAN)) == 1

    def test_empty(self):
        with pytest.raises(TraceError):
            parse_records("\n  \n")

    def test_bad_json(self):
        with pytest.raises(TraceError, match="line 1"):
            parse_records("{nope")

    def test_frame_order(self):
        rec = {"frame": 1, "kps": [[0, 0], [0, 0]]}
        with pytest.raises(TraceError, match="expected frame 0"):
            parse_records(json.dumps(rec))

    def test_inconsistent_K(self):
        lines = [json.dumps({"frame": 0, "kps": [[0, 0], [0, 0]]}), json.dumps({"frame": 1, "kps": [[0, 0]] * 3})]
        with pytest.raises(TraceError):
            parse_records("\n".join(lines))

    def test_inconsistent_fields(self):
        lines = [json.dumps({"frame": 0, "kps": [[0, 0]] * 2, "phi": 0.1}), json.dumps({"frame": 1, "kps": [[0, 0]] * 2})]
        with pytest.raises(TraceError):
            parse_records("\n".join(lines))

    def test_unknown_field(self):
        with pytest.raises(TraceError, match="unknown"):
            parse_records(json.dumps({"frame": 0, "kps": [[0, 0]] * 2, "depth": 1}))

    def test_mode_mismatch(self, rng):
        text = dump_trace([random_motion(rng, TransformMode.FULL_JACOBIAN)])
        with pytest.raises(TraceModeMismatch):
            load_trace(text, TransformMode.ROT_SCALE)

    def test_out_of_range_kp(self):
        with pytest.raises(TraceError, match="frame 0"):
            load_trace(json.dumps({"frame": 0, "kps": [[0, 0], [1.5, 0]]}), TransformMode.NO_JACOBIAN)
