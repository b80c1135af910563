"""Single-file checkpoint container.

Layout: magic "SKCP", little-endian u32 format version, then a sequence of
length-prefixed entries (u32 name length, utf-8 name, u64 blob length,
blob), a zero name-length sentinel and a trailing sha256 digest over
everything before it.  Array blobs are .npy bytes (dtype and shape travel
with the data, round trips are bit-exact); metadata entries are JSON under
reserved "__meta__/" names.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrityError, VersionError

MAGIC = b"SKCP"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    epoch: int
    config: dict
    rng_state: dict
    arrays: dict
    tau: float
    version: int = FORMAT_VERSION
    meta: dict = field(default_factory=dict)


def _encode_array(arr):
    buf = io.BytesIO()
    np.save(buf, arr, allow_pickle=False)
    return buf.getvalue()


def _decode_array(blob):
    return np.load(io.BytesIO(blob), allow_pickle=False)


def save_checkpoint(ckpt: Checkpoint, path):
    """Atomic write (temp file + rename) of the container."""
    meta = {
        "epoch": int(ckpt.epoch),
        "config": ckpt.config,
        "rng_state": ckpt.rng_state,
        "tau": float(ckpt.tau),
        "meta": ckpt.meta,
    }
    body = io.BytesIO()
    body.write(MAGIC)
    body.write(struct.pack("<I", ckpt.version))

    def entry(name, blob):
        encoded = name.encode("utf-8")
        body.write(struct.pack("<I", len(encoded)))
        body.write(encoded)
        body.write(struct.pack("<Q", len(blob)))
        body.write(blob)

    entry("__meta__/state", json.dumps(meta, sort_keys=True).encode("utf-8"))
    for name in sorted(ckpt.arrays):
        entry(name, _encode_array(ckpt.arrays[name]))
    body.write(struct.pack("<I", 0))
    payload = body.getvalue()
    digest = hashlib.sha256(payload).digest()

    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ckpt-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.write(digest)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + 4 + 32:
        raise IntegrityError(f"{path}: truncated checkpoint")
    payload, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise IntegrityError(f"{path}: checksum mismatch")
    if payload[:4] != MAGIC:
        raise IntegrityError(f"{path}: not a checkpoint file")
    (version,) = struct.unpack_from("<I", payload, 4)
    if version != FORMAT_VERSION:
        raise VersionError(
            f"{path}: format version {version}, this build reads {FORMAT_VERSION}")

    offset = 8
    entries = {}
    while True:
        if offset + 4 > len(payload):
            raise IntegrityError(f"{path}: missing end sentinel")
        (name_len,) = struct.unpack_from("<I", payload, offset)
        offset += 4
        if name_len == 0:
            break
        name = payload[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (blob_len,) = struct.unpack_from("<Q", payload, offset)
        offset += 8
        blob = payload[offset:offset + blob_len]
        if len(blob) != blob_len:
            raise IntegrityError(f"{path}: truncated entry {name!r}")
        offset += blob_len
        entries[name] = blob

    if "__meta__/state" not in entries:
        raise IntegrityError(f"{path}: missing metadata entry")
    meta = json.loads(entries.pop("__meta__/state").decode("utf-8"))
    arrays = {name: _decode_array(blob) for name, blob in entries.items()}
    return Checkpoint(epoch=meta["epoch"], config=meta["config"],
                      rng_state=meta["rng_state"], arrays=arrays,
                      tau=meta["tau"], version=version, meta=meta.get("meta", {}))
