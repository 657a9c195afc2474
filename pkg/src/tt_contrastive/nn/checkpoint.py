"""
Checkpoint container.

Layout (all integers little-endian)::

    bytes 0-3    magic b"TTCK"
    bytes 4-7    u32 format version
    bytes 8-15   u64 manifest length M
    next M bytes UTF-8 JSON manifest
    remainder    float32 buffers, little-endian, row-major

The manifest's ``tensors`` list gives each buffer's name, shape and byte
offset relative to the start of the buffer section. Everything else in the
manifest is free-form model description.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Iterable, Tuple

import numpy as np

from ..errors import CheckpointFormatError, UnwritablePathError

logger = logging.getLogger(__name__)

MAGIC = b"TTCK"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQ")


def write_container(path: Path, manifest: Dict[str, Any],
                    tensors: Iterable[Tuple[str, np.ndarray]]) -> Path:
    """
    Write ``tensors`` and ``manifest`` into a checkpoint file.

    Output is byte-identical for identical inputs (sorted JSON keys, fixed
    buffer order).
    """
    path = Path(path)
    entries = []
    buffers = []
    offset = 0
    for name, array in tensors:
        raw = np.ascontiguousarray(array, dtype="<f4").tobytes()
        entries.append({"name": name, "shape": list(np.shape(array)), "offset": offset,
                        "nbytes": len(raw)})
        buffers.append(raw)
        offset += len(raw)
    body = dict(manifest)
    body["tensors"] = entries
    encoded = json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, len(encoded)))
            f.write(encoded)
            for raw in buffers:
                f.write(raw)
    except OSError as e:
        raise UnwritablePathError(str(path), str(e))
    logger.info(f"Checkpoint written: {path} ({len(entries)} tensors, {offset} bytes of weights)")
    return path


def read_container(path: Path) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """Read a checkpoint; returns the manifest and float32 arrays by name."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise CheckpointFormatError(f"cannot read checkpoint '{path}': {e}")
    if len(blob) < _HEADER.size:
        raise CheckpointFormatError(f"checkpoint '{path}' is truncated at {len(blob)} bytes")
    magic, version, manifest_len = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise CheckpointFormatError(f"'{path}' is not a checkpoint (bad magic {magic!r})")
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    start = _HEADER.size
    data_start = start + manifest_len
    if data_start > len(blob):
        raise CheckpointFormatError(f"checkpoint '{path}' manifest is truncated")
    try:
        manifest = json.loads(blob[start:data_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"checkpoint '{path}' has a corrupt manifest: {e}")
    if not isinstance(manifest, dict):
        raise CheckpointFormatError(f"checkpoint '{path}' manifest is not a JSON object")

    arrays: Dict[str, np.ndarray] = {}
    for entry in manifest.get("tensors", []):
        try:
            begin = data_start + entry["offset"]
            end = begin + entry["nbytes"]
            name, shape = entry["name"], entry["shape"]
        except (KeyError, TypeError) as e:
            raise CheckpointFormatError(f"checkpoint '{path}' has a malformed tensor entry: {e}")
        if end > len(blob):
            raise CheckpointFormatError(f"buffer '{name}' runs past end of file")
        try:
            arrays[name] = np.frombuffer(blob[begin:end], dtype="<f4").astype(np.float32).reshape(shape)
        except (TypeError, ValueError) as e:
            raise CheckpointFormatError(f"buffer '{name}' does not match its shape {shape}: {e}")
    return manifest, arrays
