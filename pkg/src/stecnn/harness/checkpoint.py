"""Binary checkpoint files: named tensors plus a provenance record.

Layout (little-endian)::

    b"STEC" | u32 version | u32 len | provenance JSON | u32 count |
    count x (u16 len | name | u8 dtype | u8 rank | rank x u64 dim | payload)
"""
import hashlib
import json
import struct
from collections import OrderedDict

import numpy as np

MAGIC = b"STEC"
VERSION = 1
DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8"), 3: np.dtype("<i8")}
CODES = {v: k for k, v in DTYPES.items()}


class CheckpointError(ValueError):
    pass


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def save_checkpoint(path, tensors, provenance):
    """Write ``tensors`` (name -> array) with a JSON-serializable provenance dict."""
    prov = json.dumps(provenance, sort_keys=True).encode()
    parts = [MAGIC, struct.pack("<II", VERSION, len(prov)), prov, struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        dt = arr.dtype.newbyteorder("<")
        if dt not in CODES:
            raise CheckpointError(f"unsupported dtype {arr.dtype} for {name!r}")
        raw = name.encode()
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<BB", CODES[dt], arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype=dt).tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


class _Reader:
    def __init__(self, blob):
        self.blob = blob
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.blob):
            raise CheckpointError("truncated checkpoint")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path):
    """Return ``(tensors, provenance)``."""
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob)
    if len(blob) < 4 or r.take(4) != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint")
    version, plen = r.unpack("<II")
    if version != VERSION:
        raise CheckpointError(f"{path}: checkpoint version {version}, expected {VERSION}")
    try:
        provenance = json.loads(r.take(plen).decode())
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CheckpointError(f"{path}: corrupt provenance record") from None
    (count,) = r.unpack("<I")
    tensors = OrderedDict()
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode()
        code, rank = r.unpack("<BB")
        if code not in DTYPES:
            raise CheckpointError(f"{path}: unknown dtype code {code} for {name!r}")
        dims = r.unpack(f"<{rank}Q")
        dt = DTYPES[code]
        size = int(np.prod(dims, dtype=np.int64)) * dt.itemsize
        tensors[name] = np.frombuffer(r.take(size), dtype=dt).reshape(dims).astype(dt.newbyteorder("="))
    if r.pos != len(blob):
        raise CheckpointError(f"{path}: trailing bytes after last tensor")
    return tensors, provenance


def load_into_model(path, model):
    """Load a checkpoint's tensors into ``model`` by name; returns the provenance."""
    tensors, provenance = load_checkpoint(path)
    model.load_state_dict(tensors, strict=True)
    return provenance
