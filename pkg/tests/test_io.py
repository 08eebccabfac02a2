import struct

import numpy as np
import pytest

from frostrom import io
from frostrom.rom import compute_pod
from frostrom.solver import ParameterSample, Snapshot

H = bytes(range(32))
P = ParameterSample(0.21, -20.5, 19.0, 0.9)


def _snaps(rng, n=5, count=3):
    return [Snapshot(10.0 * k, P, rng.normal(size=n)) for k in range(count)]


def test_frost_roundtrip(tmp_path, rng):
    snaps = _snaps(rng)
    io.write_frost(tmp_path / "a.frost", snaps, H)
    h, back = io.read_frost(tmp_path / "a.frost", H)
    assert h == H
    for a, b in zip(snaps, back):
        assert a.time == b.time and a.params == b.params and np.array_equal(a.temperature, b.temperature)


def test_frost_layout(tmp_path, rng):
    snaps = _snaps(rng, n=4, count=2)
    io.write_frost(tmp_path / "a.frost", snaps, H)
    raw = (tmp_path / "a.frost").read_bytes()
    magic, version, N, count, gh = struct.unpack_from("<5sHQQ32s", raw)
    assert (magic, version, N, count, gh) == (b"FRST1", 1, 4, 2, H)
    body = np.frombuffer(raw, "<f8", offset=5 + 2 + 8 + 8 + 32)
    assert body.size == 2 * 9
    assert body[0] == 0.0 and np.array_equal(body[1:5], P.as_array())
    assert np.array_equal(body[5:9], snaps[0].temperature)


def test_frost_rejects(tmp_path, rng):
    io.write_frost(tmp_path / "a.frost", _snaps(rng), H)
    with pytest.raises(io.HashMismatch):
        io.read_frost(tmp_path / "a.frost", bytes(32))
    raw = (tmp_path / "a.frost").read_bytes()
    (tmp_path / "b.frost").write_bytes(b"XXXXX" + raw[5:])
    with pytest.raises(io.FormatError):
        io.read_frost(tmp_path / "b.frost")
    (tmp_path / "c.frost").write_bytes(raw[:-8])
    with pytest.raises(io.FormatError):
        io.read_frost(tmp_path / "c.frost")


def test_pod_roundtrip(tmp_path, rng):
    from frostrom.rom import PODBasis

    b = compute_pod(rng.normal(size=(20, 8)), 5)
    b = PODBasis(b.phi, b.sigma, H, rng.normal(size=20))
    io.write_pod(tmp_path / "r.pod", b)
    back = io.read_pod(tmp_path / "r.pod", H)
    assert np.array_equal(back.phi, b.phi) and np.array_equal(back.sigma, b.sigma)
    assert np.array_equal(back.mean, b.mean) and back.grid_hash == H
    raw = (tmp_path / "r.pod").read_bytes()
    assert raw[:5] == b"FROM1"
    # phi stored column-major right after the singular values
    off = struct.calcsize("<5sQQQ32sB") + 8 * len(b.sigma)
    assert np.array_equal(np.frombuffer(raw, "<f8", count=20, offset=off), b.phi[:, 0])


def test_json_hashes(tmp_path):
    io.write_json(tmp_path / "m.json", {"a": 1}, H, "cfg")
    d = io.read_json(tmp_path / "m.json", H)
    assert d["grid_hash"] == H.hex() and d["config_hash"] == "cfg"
    with pytest.raises(io.HashMismatch):
        io.read_json(tmp_path / "m.json", bytes(32))


def test_config_hash_stable():
    assert io.config_hash({"b": 1, "a": [1, 2]}) == io.config_hash({"a": [1, 2], "b": 1})
