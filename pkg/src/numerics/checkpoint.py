"""
Binary checkpoint format.

Layout (little-endian): magic b"PCAT", version byte 1, u32 parameter count,
then per parameter u16 name length, UTF-8 name, u8 rank, rank x u32 dims and
prod(dims) x f64 values. Parameters are written in registry order.
"""

import struct
from pathlib import Path
from typing import Dict, Iterable, Mapping, Union

import numpy as np

from ..errors import CheckpointError
from .tensor import Parameter

MAGIC = b"PCAT"
VERSION = 1
MAX_NAME_BYTES = 0xFFFF
MAX_RANK = 0xFF
MAX_DIM = 0xFFFFFFFF


def encode_checkpoint(params: Union[Iterable[Parameter], Mapping[str, np.ndarray]]) -> bytes:
    items = params.items() if isinstance(params, Mapping) else ((p.name, p.data) for p in params)
    items = list(items)
    chunks = [struct.pack("<4sBI", MAGIC, VERSION, len(items))]
    for name, values in items:
        raw_name = name.encode("utf-8")
        arr = np.asarray(values, dtype=np.float64)
        if len(raw_name) > MAX_NAME_BYTES:
            raise CheckpointError(f"parameter name is {len(raw_name)} UTF-8 bytes, the limit is {MAX_NAME_BYTES}")
        if arr.ndim > MAX_RANK:
            raise CheckpointError(f"parameter {name!r} has rank {arr.ndim}, the limit is {MAX_RANK}")
        if any(dim > MAX_DIM for dim in arr.shape):
            raise CheckpointError(f"parameter {name!r} has a dimension over {MAX_DIM} in {arr.shape}")
        chunks.append(struct.pack("<H", len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr).astype("<f8").tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, size: int, what: str) -> bytes:
        end = self.pos + size
        if end > len(self.blob):
            raise CheckpointError(f"truncated checkpoint: {what} at byte {self.pos}")
        chunk = self.blob[self.pos:end]
        self.pos = end
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_checkpoint(blob: bytes) -> Dict[str, np.ndarray]:
    reader = _Reader(blob)
    if reader.take(4, "magic") != MAGIC:
        raise CheckpointError("bad magic")
    (version,) = reader.unpack("<B", "version")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (count,) = reader.unpack("<I", "parameter count")

    state: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H", "name length")
        try:
            name = reader.take(name_len, "name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointError(f"parameter name at byte {reader.pos} is not UTF-8") from exc
        (rank,) = reader.unpack("<B", f"rank of {name}")
        dims = reader.unpack(f"<{rank}I", f"dims of {name}")
        n_values = int(np.prod(dims, dtype=np.int64)) if rank else 1
        raw = reader.take(8 * n_values, f"values of {name}")
        if name in state:
            raise CheckpointError(f"duplicate parameter {name} in checkpoint")
        state[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(dims)
    if reader.pos != len(blob):
        raise CheckpointError(f"{len(blob) - reader.pos} trailing bytes after checkpoint")
    return state


def save_checkpoint(path, params) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(params))
    return path


def load_checkpoint(path) -> Dict[str, np.ndarray]:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return decode_checkpoint(blob)


def restore_parameters(params: Iterable[Parameter], state: Mapping[str, np.ndarray]):
    """Copy checkpoint values into `params`; the first mismatch aborts before any write."""
    params = list(params)
    for param in params:
        if param.name not in state:
            raise CheckpointError(f"parameter {param.name} missing from checkpoint")
        if tuple(state[param.name].shape) != param.shape:
            raise CheckpointError(
                f"parameter {param.name}: checkpoint shape {tuple(state[param.name].shape)} "
                f"!= model shape {param.shape}"
            )
    extra = [name for name in state if name not in {p.name for p in params}]
    if extra:
        raise CheckpointError(f"checkpoint parameter {extra[0]} not present in model")
    for param in params:
        param.assign(state[param.name])
