"""Single-file binary container for :class:`~mach.core.MachModel`.

Layout (all integers and floats little-endian)::

    magic        8s   b"MACHMDL\\x00"
    version      u32  (currently 1)
    header       u64 K, u64 B, u64 R, u64 d, u64 seed, u8 hash_kind, 7x pad
    trainer      u64 epochs, u64 batch_size, f64 learning_rate, f64 lr_decay,
                 u64 shuffle_seed, u8 optimizer, 7x pad
    label map    K x i64 original labels
    hash specs   R x (u8 kind, 7x pad, u64 a, u64 b, u64 p, u64 buckets, u64 universe)
    offsets      R x u64 absolute byte offset of each sub-model block
    blocks       R x (B*d f64 weights, row-major by bucket, then B f64 bias)
    checksum     32 bytes SHA-256 of everything above

The offset table lets :func:`load_model` read only some sub-models.
See ``docs/model_format.md`` for a byte-level walk-through.
"""
from __future__ import annotations

import hashlib
import os
import struct
import tempfile
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import MachConfig, MachModel
from .hashing import HashKind, HashSpec
from .softmax import Optimizer, SoftmaxModel, TrainConfig

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "ModelFormatError",
    "dump_model",
    "save_model",
    "load_model",
    "write_report",
    "read_report",
    "parse_kv",
]

MAGIC = b"MACHMDL\x00"
FORMAT_VERSION = 1

_PREAMBLE = struct.Struct("<8sI")
_HEADER = struct.Struct("<QQQQQB7x")
_TRAINER = struct.Struct("<QQddQB7x")
_SPEC = struct.Struct("<B7xQQQQQ")
_DIGEST = 32


class ModelFormatError(ValueError):
    pass


def dump_model(mm: MachModel) -> bytes:
    cfg, tc = mm.config, mm.config.train
    B, d = cfg.B, mm.d
    parts = [
        _PREAMBLE.pack(MAGIC, FORMAT_VERSION),
        _HEADER.pack(cfg.K, B, cfg.R, d, cfg.seed, int(cfg.hash_kind)),
        _TRAINER.pack(
            tc.epochs, tc.batch_size, tc.learning_rate, tc.lr_decay,
            tc.shuffle_seed, int(tc.optimizer),
        ),
        mm.label_map.astype("<i8").tobytes(),
    ]
    parts += [_SPEC.pack(int(s.kind), s.a, s.b, s.p, s.buckets, s.universe) for s in mm.specs]
    start = sum(map(len, parts)) + 8 * cfg.R
    block = 8 * (B * d + B)
    parts.append((start + block * np.arange(cfg.R, dtype=np.uint64)).astype("<u8").tobytes())
    for m in mm.models:
        parts.append(np.ascontiguousarray(m.weights, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(m.bias, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


def save_model(mm: MachModel, path) -> None:
    """Write atomically: a temp file in the target directory is renamed into place."""
    data = dump_model(mm)
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(prefix=".mach-", dir=os.path.dirname(os.path.abspath(path)))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, fh, size: int):
        self.fh = fh
        self.size = size

    def read(self, n: int, section: str) -> bytes:
        buf = self.fh.read(n)
        if len(buf) != n:
            raise ModelFormatError(f"truncated model file: missing {section}")
        return buf

    def unpack(self, st: struct.Struct, section: str):
        return st.unpack(self.read(st.size, section))


def _verify_checksum(fh, size: int):
    if size < _DIGEST:
        raise ModelFormatError("truncated model file: missing checksum")
    fh.seek(0)
    h = hashlib.sha256()
    remaining = size - _DIGEST
    while remaining:
        chunk = fh.read(min(remaining, 1 << 20))
        h.update(chunk)
        remaining -= len(chunk)
    if fh.read(_DIGEST) != h.digest():
        raise ModelFormatError("checksum mismatch: model file is corrupted")


def load_model(path, subset: Optional[Sequence[int]] = None, verify: bool = True) -> MachModel:
    """Decode a model file and revalidate every invariant.

    ``subset`` loads only the listed sub-models (in the given order); the
    returned model then has ``R == len(subset)``.
    """
    with open(path, "rb") as fh:
        size = os.fstat(fh.fileno()).st_size
        if size == 0:
            raise ModelFormatError("empty model file")
        rd = _Reader(fh, size)
        magic, version = rd.unpack(_PREAMBLE, "preamble")
        if magic != MAGIC:
            raise ModelFormatError("not a MACH model file (bad magic)")
        if version != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model format version {version}")
        K, B, R, d, seed, kind = rd.unpack(_HEADER, "header")
        epochs, batch, lr, decay, shuffle, opt = rd.unpack(_TRAINER, "trainer config")
        if K < 2 or B < 2 or R < 1 or d < 1:
            raise ModelFormatError(f"invalid dimensions K={K} B={B} R={R} d={d}")
        body = size - _DIGEST
        block = 8 * (B * d + B)
        expected = (
            _PREAMBLE.size + _HEADER.size + _TRAINER.size + 8 * K + R * (_SPEC.size + 8) + R * block
        )
        label_map = np.frombuffer(rd.read(8 * K, "label map"), dtype="<i8").astype(np.int64)
        specs = []
        for j in range(R):
            fields = rd.unpack(_SPEC, f"hash spec {j}")
            try:
                specs.append(HashSpec(HashKind(fields[0]), *fields[1:]))
            except ValueError as e:
                raise ModelFormatError(f"hash spec {j}: {e}") from None
        offsets = np.frombuffer(rd.read(8 * R, "offset table"), dtype="<u8")
        start = expected - R * block
        if not np.array_equal(offsets, start + block * np.arange(R, dtype=np.uint64)):
            raise ModelFormatError("offset table does not match the header dimensions")
        if body > expected:
            raise ModelFormatError(f"unexpected {body - expected} trailing bytes")
        if body < expected:
            for j in range(R):
                if int(offsets[j]) + block > size:
                    raise ModelFormatError(f"truncated model file: missing weights block {j}")
            raise ModelFormatError("truncated model file: missing checksum")

        chosen = list(range(R)) if subset is None else [int(j) for j in subset]
        if not chosen or any(not 0 <= j < R for j in chosen):
            raise ModelFormatError(f"subset {subset!r} out of range for R={R}")
        models = []
        for j in chosen:
            fh.seek(int(offsets[j]))
            raw = rd.read(block, f"weights block {j}")
            arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
            W, b = arr[: B * d].reshape(B, d), arr[B * d :]
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ModelFormatError(f"non-finite parameters in block {j}")
            models.append(SoftmaxModel(W, b))
        if verify:
            _verify_checksum(fh, size)

    try:
        train = TrainConfig(epochs, batch, lr, decay, shuffle, Optimizer(opt))
        cfg = MachConfig(K, B, len(chosen), seed, HashKind(kind), train)
        return MachModel(cfg, [specs[j] for j in chosen], models, label_map)
    except ValueError as e:
        raise ModelFormatError(f"inconsistent model file: {e}") from None


def write_report(path, items: Mapping[str, object]) -> None:
    """Write ``key=value`` lines atomically."""
    text = "".join(f"{k}={v}\n" for k, v in items.items())
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_report(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            key, sep, value = line.rstrip("\n").partition("=")
            if sep:
                out[key] = value
    return out


def parse_kv(lines: Iterable[str]) -> dict:
    out = {}
    for line in lines:
        for tok in line.split():
            key, sep, value = tok.partition("=")
            if sep:
                out[key] = value
    return out
