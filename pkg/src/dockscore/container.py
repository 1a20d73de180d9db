"""Self-describing binary container: magic bytes, version, index table, arrays.

Layout: 8-byte magic, u32 format version, u64 header length, JSON header
(kind, metadata, array index with dtype/shape/offset, payload checksum),
then the raw array payload. Writes are atomic (temp file + rename) and
byte-for-byte deterministic for identical inputs.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib
from contextlib import contextmanager

import numpy as np

from .errors import DataError

MAGIC = b"DSCNTR01"
FORMAT_VERSION = 1


@contextmanager
def atomic_write(path, mode: str = "wb"):
    """Write to a temp file in the target directory, then rename into place."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, mode) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_container(path, kind: str, meta: dict, arrays: dict[str, np.ndarray]):
    """Serialize metadata and named arrays; array order is sorted by name."""
    index = []
    chunks = []
    offset = 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        raw = arr.tobytes()
        index.append({"name": name, "dtype": arr.dtype.str,
                      "shape": list(arr.shape), "offset": offset,
                      "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    header = {"kind": kind, "meta": meta, "arrays": index,
              "payload_crc32": zlib.crc32(payload)}
    header_bytes = json.dumps(header, sort_keys=True,
                              separators=(",", ":")).encode("utf-8")
    with atomic_write(path) as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", FORMAT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)


def read_container(path, expect_kind: str | None = None):
    """Read back (kind, meta, arrays). Any corruption raises DataError."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as e:
        raise DataError(f"cannot read container {path}: {e}") from None
    if len(blob) < len(MAGIC) + 12:
        raise DataError(f"{path}: truncated container")
    if blob[:8] != MAGIC:
        raise DataError(f"{path}: bad magic bytes; not a container file")
    version, header_len = struct.unpack_from("<IQ", blob, 8)
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: container version {version}, expected {FORMAT_VERSION}")
    header_end = 20 + header_len
    if len(blob) < header_end:
        raise DataError(f"{path}: truncated header")
    try:
        header = json.loads(blob[20:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataError(f"{path}: corrupt header: {e}") from None
    kind = header.get("kind")
    if expect_kind is not None and kind != expect_kind:
        raise DataError(f"{path}: container kind '{kind}', expected '{expect_kind}'")
    payload = blob[header_end:]
    if zlib.crc32(payload) != header.get("payload_crc32"):
        raise DataError(f"{path}: payload checksum mismatch")
    arrays = {}
    for entry in header["arrays"]:
        start, nbytes = entry["offset"], entry["nbytes"]
        if start + nbytes > len(payload):
            raise DataError(f"{path}: array '{entry['name']}' exceeds payload")
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        expected = int(np.prod(shape)) * dtype.itemsize if shape else dtype.itemsize
        if expected != nbytes:
            raise DataError(f"{path}: shape header inconsistent for '{entry['name']}'")
        arrays[entry["name"]] = np.frombuffer(
            payload[start:start + nbytes], dtype=dtype).reshape(shape).copy()
    return kind, header["meta"], arrays
