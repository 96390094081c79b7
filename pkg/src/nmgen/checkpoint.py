"""Binary checkpoint format.

Layout (little-endian throughout)::

    b"NMGEN1"
    u64 metadata length, UTF-8 JSON metadata
    u32 tensor count
    per tensor: u16 name length, name, u8 ndim, u32 * ndim shape, float32 data
"""
from __future__ import annotations

import json
import struct

import numpy as np

from . import numerics as nx
from .policy import LSTMPolicy, PolicyConfig
from .vocab import Vocab

MAGIC = b"NMGEN1"


class CheckpointError(ValueError):
    pass


def save(path, policy, vocab, extra=None):
    meta = {
        "model": policy.config.to_dict(),
        "aux_end": policy.config.aux_end,
        "tree_enc": policy.config.tree_enc,
        "vocab_hash": vocab.content_hash,
        "vocab": vocab.tokens,
        "tensors": list(policy.params),
    }
    meta.update(extra or {})
    blob = json.dumps(meta, sort_keys=True, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(policy.params)))
        for name, t in policy.params.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", t.data.ndim))
            fh.write(struct.pack(f"<{t.data.ndim}I", *t.data.shape))
            fh.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())


def _read(fh, n):
    buf = fh.read(n)
    if len(buf) != n:
        raise CheckpointError("truncated checkpoint")
    return buf


def load(path):
    """Returns ``(policy, vocab, metadata)``; refuses mismatched vocabularies."""
    with open(path, "rb") as fh:
        if _read(fh, len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
        (n_meta,) = struct.unpack("<Q", _read(fh, 8))
        meta = json.loads(_read(fh, n_meta).decode("utf-8"))
        (count,) = struct.unpack("<I", _read(fh, 4))
        tensors = {}
        for _ in range(count):
            (n_name,) = struct.unpack("<H", _read(fh, 2))
            name = _read(fh, n_name).decode("utf-8")
            (ndim,) = struct.unpack("<B", _read(fh, 1))
            shape = struct.unpack(f"<{ndim}I", _read(fh, 4 * ndim))
            size = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(_read(fh, 4 * size), dtype="<f4").reshape(shape)
            if name in tensors:
                raise CheckpointError(f"tensor {name!r} stored twice")
            tensors[name] = data.astype(np.float32)
        if fh.read(1):
            raise CheckpointError("trailing bytes after tensor table")
    vocab = Vocab(meta["vocab"])
    if vocab.content_hash != meta["vocab_hash"]:
        raise CheckpointError("vocabulary hash mismatch")
    if sorted(tensors) != sorted(meta["tensors"]):
        raise CheckpointError("tensor table does not match metadata")
    config = PolicyConfig(**meta["model"])
    params = {name: nx.Tensor(tensors[name]) for name in meta["tensors"]}
    return LSTMPolicy(config, params=params), vocab, meta


def check_vocab(meta, vocab):
    if meta["vocab_hash"] != vocab.content_hash:
        raise CheckpointError("checkpoint was trained with a different vocabulary")
