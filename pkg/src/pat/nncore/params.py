"""Ordered parameter sets, flattening, and the binary snapshot format.

Snapshot layout (little-endian): magic ``PATP``, u32 format version, u32 entry
count, then per entry: u32 name length, UTF-8 name, u32 rank, u32 dims, raw
float64 values. Round-trips are bit-exact, including entry order.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path
from typing import Iterator

import numpy as np

from ..errors import DimensionError, NumericError, SnapshotError, SnapshotVersionError
from .autodiff import Array, Var, as_array

MAGIC = b"PATP"
FORMAT_VERSION = 1


class Param(Var):
    """A named leaf with a persistent, accumulating gradient slot."""

    def __init__(self, name: str, value):
        super().__init__(as_array(value, name), name=name)
        self.grad = np.zeros_like(self.value)
        self.track = True


class ParamSet:
    """Insertion-ordered mapping name -> Param.

    Iteration order is stable and is the contract for flattening and
    serialization, so two sets built in the same order flatten identically.
    """

    def __init__(self):
        self._entries: dict[str, Param] = {}

    def add(self, name: str, value) -> Param:
        if name in self._entries:
            raise ValueError(f"duplicate parameter name: {name}")
        p = Param(name, value)
        self._entries[name] = p
        return p

    def __getitem__(self, name: str) -> Param:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def values(self):
        return self._entries.values()

    def zero_grads(self) -> None:
        for p in self._entries.values():
            p.grad.fill(0.0)

    def copy(self) -> "ParamSet":
        out = ParamSet()
        for name, p in self._entries.items():
            out.add(name, p.value.copy())
        return out

    def load_values(self, other: "ParamSet") -> None:
        """Overwrite values in place from a set with identical structure."""
        if other.names() != self.names():
            raise DimensionError("parameter sets have different entries")
        for name, p in self._entries.items():
            src = other[name].value
            if src.shape != p.value.shape:
                raise DimensionError(f"shape mismatch for {name}: {src.shape} vs {p.value.shape}")
            p.value[...] = src

    def merged(self, prefix: str, sub: "ParamSet") -> None:
        """Add every entry of `sub` under `prefix`, sharing the arrays."""
        for name, p in sub.items():
            if f"{prefix}{name}" in self._entries:
                raise ValueError(f"duplicate parameter name: {prefix}{name}")
            self._entries[f"{prefix}{name}"] = p

    def total_size(self) -> int:
        return sum(p.value.size for p in self._entries.values())


def flatten_params(params: ParamSet) -> Array:
    """Concatenate all values in iteration order into one row-major vector."""
    if len(params) == 0:
        return np.zeros(0)
    return np.concatenate([p.value.reshape(-1) for p in params.values()])


def unflatten_params(template: ParamSet, flat) -> ParamSet:
    """Rebuild a ParamSet shaped like `template` from a flat vector."""
    flat = np.asarray(flat, dtype=np.float64).reshape(-1)
    total = template.total_size()
    if flat.size != total:
        raise DimensionError(f"flat vector has {flat.size} values, template needs {total}")
    out = ParamSet()
    offset = 0
    for name, p in template.items():
        n = p.value.size
        out.add(name, flat[offset:offset + n].reshape(p.value.shape).copy())
        offset += n
    return out


def param_spans(template: ParamSet) -> dict[str, tuple[int, int]]:
    """Half-open [start, stop) span of each entry inside the flat vector."""
    spans = {}
    offset = 0
    for name, p in template.items():
        spans[name] = (offset, offset + p.value.size)
        offset += p.value.size
    return spans


def content_hash(params: ParamSet) -> str:
    """SHA-256 over names, shapes, and raw values; detects any mutation."""
    h = hashlib.sha256()
    for name, p in params.items():
        h.update(name.encode())
        h.update(np.asarray(p.value.shape, dtype="<u4").tobytes())
        h.update(np.ascontiguousarray(p.value, dtype="<f8").tobytes())
    return h.hexdigest()


def save_params(params: ParamSet, path) -> None:
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<II", FORMAT_VERSION, len(params))
    for name, p in params.items():
        raw = name.encode("utf-8")
        buf += struct.pack("<I", len(raw))
        buf += raw
        buf += struct.pack("<I", p.value.ndim)
        buf += np.asarray(p.value.shape, dtype="<u4").tobytes()
        buf += np.ascontiguousarray(p.value, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(buf))


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise SnapshotError(f"{self.path}: truncated snapshot ({len(self.data)} bytes)")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_params(path) -> ParamSet:
    data = Path(path).read_bytes()
    r = _Reader(data, path)
    if r.take(4) != MAGIC:
        raise SnapshotError(f"{path}: not a parameter snapshot (bad magic)")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise SnapshotVersionError(f"{path}: unsupported snapshot version {version} (expected {FORMAT_VERSION})")
    count = r.u32()
    out = ParamSet()
    for _ in range(count):
        name_len = r.u32()
        name = r.take(name_len).decode("utf-8")
        rank = r.u32()
        dims = np.frombuffer(r.take(4 * rank), dtype="<u4").astype(int)
        n = int(np.prod(dims)) if rank > 0 else 1
        values = np.frombuffer(r.take(8 * n), dtype="<f8").reshape(tuple(dims)).copy()
        if not np.all(np.isfinite(values)):
            raise NumericError(f"{path}: entry {name} holds non-finite values")
        out.add(name, values)
    if r.pos != len(data):
        raise SnapshotError(f"{path}: {len(data) - r.pos} trailing bytes after last entry")
    return out
