import struct

import numpy as np
import pytest

from segfire.exceptions import FormatError
from segfire.model import SegNetConfig, build_segnet
from segfire.weights import MAGIC, decode_weights, encode_weights, load_weights, save_weights


def _same_model(a, b):
    assert a.input_shape == b.input_shape
    assert [l.name for l in a.layers] == [l.name for l in b.layers]
    for p, q in zip(a.parameters(), b.parameters()):
        assert p.tobytes() == q.tobytes()


@pytest.mark.parametrize("mode", ["downsample", "preserve"])
def test_round_trip_bit_exact(tmp_path, small_config, mode):
    from dataclasses import replace

    model = build_segnet(replace(small_config, pool_mode=mode))
    model.parameters()[0][0, 0, 0, 0] = np.nextafter(1.0, 2.0)
    path = save_weights(model, tmp_path / "m.segw")
    loaded = load_weights(path)
    _same_model(model, loaded)
    assert loaded.layers[1].mode == mode


def test_header_layout(small_model):
    data = encode_weights(small_model)
    assert data[:4] == MAGIC
    assert struct.unpack("<I", data[4:8])[0] == 1
    assert struct.unpack("<3I", data[8:20]) == small_model.input_shape


def test_truncated_file(small_model):
    data = encode_weights(small_model)
    for cut in (3, 30, len(data) - 9, len(data) - 1):
        with pytest.raises(FormatError):
            decode_weights(data[:cut])


def test_flipped_payload_byte(small_model):
    data = bytearray(encode_weights(small_model))
    data[-20] ^= 0x01
    with pytest.raises(FormatError, match="checksum"):
        decode_weights(bytes(data))


def test_bad_magic(small_model):
    with pytest.raises(FormatError, match="magic"):
        decode_weights(b"XXXX" + encode_weights(small_model)[4:])


def test_version_mismatch(small_model):
    data = encode_weights(small_model)
    with pytest.raises(FormatError, match="version"):
        decode_weights(data[:4] + struct.pack("<I", 9) + data[8:])


def test_length_disagreement(small_model):
    data = encode_weights(small_model)
    payload_len = 8 * sum(p.size for p in small_model.parameters())
    pos = len(data) - 8 - payload_len - 8
    bad = data[:pos] + struct.pack("<Q", payload_len - 8) + data[pos + 8:]
    with pytest.raises(FormatError, match="disagrees"):
        decode_weights(bad)


def test_trailing_bytes(small_model):
    with pytest.raises(FormatError, match="trailing"):
        decode_weights(encode_weights(small_model) + b"\0")


def test_full_size_model_round_trip(tmp_path):
    model = build_segnet(SegNetConfig())
    _same_model(model, load_weights(save_weights(model, tmp_path / "full.segw")))
