"""
Binary checkpoint container.

Layout (little-endian):

    magic           8 bytes   b"MMCANCKP"
    version         u16
    config length   u32, then that many bytes of UTF-8 JSON (config echo)
    tensor count    u32
    per tensor:
        name length u16, then the UTF-8 name
        rank        u8
        extents     rank x u32
        values      product(extents) x f8, row-major
"""

import io
import json
import struct
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple

import numpy as np

MAGIC = b"MMCANCKP"
VERSION = 1


class CheckpointError(ValueError):
    """Unreadable checkpoint: bad magic, unsupported version or truncation."""


def save_checkpoint(
    path: str | Path,
    state: Mapping[str, np.ndarray],
    config: Mapping[str, Any] | None = None,
) -> Path:
    """Write named tensors and a JSON config echo to ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<H", VERSION))
    echo = json.dumps(dict(config or {}), sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<I", len(echo)))
    buf.write(echo)
    buf.write(struct.pack("<I", len(state)))
    for name, values in state.items():
        encoded = name.encode("utf-8")
        values = np.asarray(values, dtype=np.float64)
        buf.write(struct.pack("<H", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<B", values.ndim))
        buf.write(struct.pack(f"<{values.ndim}I", *values.shape))
        buf.write(np.ascontiguousarray(values, dtype="<f8").tobytes())
    path.write_bytes(buf.getvalue())
    return path


def _read(buf: io.BytesIO, size: int, what: str) -> bytes:
    chunk = buf.read(size)
    if len(chunk) != size:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return chunk


def load_checkpoint(path: str | Path) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """
    Read a checkpoint written by ``save_checkpoint``.

    Returns:
        The named tensors (in file order) and the config echo.

    Raises:
        CheckpointError: not a checkpoint, newer version, or truncated
    """
    try:
        buf = io.BytesIO(Path(path).read_bytes())
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint '{path}' not found")
    if buf.read(len(MAGIC)) != MAGIC:
        raise CheckpointError(f"'{path}' is not a checkpoint (bad magic)")
    (version,) = struct.unpack("<H", _read(buf, 2, "version"))
    if version > VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (max {VERSION})")

    (length,) = struct.unpack("<I", _read(buf, 4, "config length"))
    try:
        config = json.loads(_read(buf, length, "config").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt config echo: {e}")

    (count,) = struct.unpack("<I", _read(buf, 4, "tensor count"))
    state: Dict[str, np.ndarray] = {}
    for index in range(count):
        (name_length,) = struct.unpack("<H", _read(buf, 2, f"tensor {index} name length"))
        name = _read(buf, name_length, f"tensor {index} name").decode("utf-8")
        (rank,) = struct.unpack("<B", _read(buf, 1, f"'{name}' rank"))
        shape = struct.unpack(f"<{rank}I", _read(buf, 4 * rank, f"'{name}' extents"))
        size = int(np.prod(shape, dtype=np.int64))
        raw = _read(buf, 8 * size, f"'{name}' values")
        state[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
    return state, config
