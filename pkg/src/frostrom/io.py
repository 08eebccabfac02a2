"""Binary snapshot/basis containers, JSON sidecars and CSV series."""
from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .rom import PODBasis
from .solver import ParameterSample, Snapshot

FROST_MAGIC = b"FRST1"
FROST_VERSION = 1
_FROST_HEADER = struct.Struct("<5sHQQ32s")

POD_MAGIC = b"FROM1"
# magic, N, n_max, number of stored singular values, grid hash, mean flag
_POD_HEADER = struct.Struct("<5sQQQ32sB")


class FormatError(ValueError):
    pass


class HashMismatch(ValueError):
    pass


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config)).hexdigest()


def _check_hash(grid_hash: bytes):
    if len(grid_hash) != 32:
        raise FormatError("grid hash must be 32 bytes")


def write_frost(path, snapshots: Sequence[Snapshot], grid_hash: bytes) -> None:
    """FRST1 container: header then [time, 4 params, N values] per snapshot, little-endian f64."""
    _check_hash(grid_hash)
    if not snapshots:
        raise FormatError("no snapshots to write")
    N = len(snapshots[0].temperature)
    with open(path, "wb") as fh:
        fh.write(_FROST_HEADER.pack(FROST_MAGIC, FROST_VERSION, N, len(snapshots), grid_hash))
        for s in snapshots:
            T = np.asarray(s.temperature, dtype="<f8")
            if T.shape != (N,):
                raise FormatError("snapshot lengths differ")
            if not np.all(np.isfinite(T)):
                raise FormatError("non-finite snapshot entry")
            head = np.concatenate([[s.time], s.params.as_array()]).astype("<f8")
            fh.write(head.tobytes())
            fh.write(T.tobytes())


def read_frost(path, expect_hash: bytes | None = None) -> tuple[bytes, list[Snapshot]]:
    data = Path(path).read_bytes()
    if len(data) < _FROST_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, N, count, grid_hash = _FROST_HEADER.unpack_from(data)
    if magic != FROST_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != FROST_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if expect_hash is not None and grid_hash != expect_hash:
        raise HashMismatch(f"{path}: grid hash mismatch")
    rec = 5 + N
    body = np.frombuffer(data, dtype="<f8", offset=_FROST_HEADER.size)
    if body.size != rec * count:
        raise FormatError(f"{path}: expected {count} records of {rec} values, found {body.size} values")
    body = body.reshape(count, rec)
    snaps = [Snapshot(float(r[0]), ParameterSample(*map(float, r[1:5])), r[5:].copy()) for r in body]
    return grid_hash, snaps


def write_pod(path, basis: PODBasis) -> None:
    """FROM1 container: header, all singular values, phi column-major, optional mean field."""
    _check_hash(basis.grid_hash)
    N, n_max = basis.phi.shape
    with open(path, "wb") as fh:
        fh.write(_POD_HEADER.pack(POD_MAGIC, N, n_max, len(basis.sigma), basis.grid_hash, int(basis.mean is not None)))
        fh.write(np.asarray(basis.sigma, dtype="<f8").tobytes())
        fh.write(np.asarray(basis.phi, dtype="<f8").tobytes(order="F"))
        if basis.mean is not None:
            fh.write(np.asarray(basis.mean, dtype="<f8").tobytes())


def read_pod(path, expect_hash: bytes | None = None) -> PODBasis:
    data = Path(path).read_bytes()
    if len(data) < _POD_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, N, n_max, n_sigma, grid_hash, has_mean = _POD_HEADER.unpack_from(data)
    if magic != POD_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if expect_hash is not None and grid_hash != expect_hash:
        raise HashMismatch(f"{path}: grid hash mismatch")
    body = np.frombuffer(data, dtype="<f8", offset=_POD_HEADER.size)
    expected = n_sigma + N * n_max + (N if has_mean else 0)
    if body.size != expected:
        raise FormatError(f"{path}: expected {expected} values, found {body.size}")
    sigma = body[:n_sigma].copy()
    phi = body[n_sigma : n_sigma + N * n_max].reshape((N, n_max), order="F").copy()
    mean = body[n_sigma + N * n_max :].copy() if has_mean else None
    return PODBasis(phi, sigma, grid_hash, mean)


def write_json(path, payload: dict, grid_hash: bytes | str | None = None, cfg_hash: str | None = None) -> None:
    out = dict(payload)
    if grid_hash is not None:
        out["grid_hash"] = grid_hash.hex() if isinstance(grid_hash, bytes) else grid_hash
    if cfg_hash is not None:
        out["config_hash"] = cfg_hash
    Path(path).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")


def read_json(path, expect_hash: bytes | str | None = None) -> dict:
    payload = json.loads(Path(path).read_text())
    if expect_hash is not None:
        want = expect_hash.hex() if isinstance(expect_hash, bytes) else expect_hash
        if payload.get("grid_hash") != want:
            raise HashMismatch(f"{path}: grid hash mismatch")
    return payload


def sensor_layout(sensors, mode: str, grid_hash: bytes, extra: dict | None = None) -> dict:
    layout = {
        "mode": mode,
        "rects": [list(s.rect) for s in sensors],
        "lattice": [list(s.lattice) for s in sensors],
    }
    layout.update(extra or {})
    return layout


def write_measurements(path, times: np.ndarray, ell: np.ndarray, grid_hash: bytes, params: ParameterSample | None = None):
    """Measurement vectors in the FRST1 container (one record per time, m values each)."""
    params = params if params is not None else ParameterSample(0.0, 0.0, 0.0, 0.0)
    ell = np.atleast_2d(np.asarray(ell, dtype=float))
    snaps = [Snapshot(float(t), params, ell[:, k]) for k, t in enumerate(times)]
    write_frost(path, snaps, grid_hash)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
