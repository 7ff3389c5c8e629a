"""Binary snapshots and CSV tables.

Snapshot layout, all little-endian::

    b"LOSSSNAP"                       magic
    u32 version (1), u32 ndim
    u64 n per axis
    f64 min, f64 max per axis
    f64 time
    u16 name length, UTF-8 name
    f64 payload, row-major (last axis fastest)

The unit tag travels inside the name as ``name|unit``.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionError, LossError

MAGIC = b"LOSSSNAP"
VERSION = 1


class SnapshotFormatError(LossError, ValueError):
    """A snapshot file is truncated or has a foreign header."""


@dataclass
class Snapshot:
    data: NDArray[np.float64]
    extents: tuple[tuple[float, float], ...]
    time: float
    name: str
    unit: str = ""

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        self.extents = tuple((float(a), float(b)) for a, b in self.extents)
        if len(self.extents) != self.data.ndim:
            raise DimensionError(f"{len(self.extents)} extents for a {self.data.ndim}-D payload")
        if "|" in self.name:
            raise ValueError("field names may not contain '|'")

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    def axis_points(self, axis: int) -> NDArray[np.float64]:
        lo, hi = self.extents[axis]
        n = self.data.shape[axis]
        return np.linspace(lo, hi, n) if n > 1 else np.array([lo])

    def to_bytes(self) -> bytes:
        tag = self.name + (f"|{self.unit}" if self.unit else "")
        name = tag.encode("utf-8")
        head = [MAGIC, struct.pack("<II", VERSION, self.data.ndim)]
        head.append(struct.pack(f"<{self.data.ndim}Q", *self.data.shape))
        for lo, hi in self.extents:
            head.append(struct.pack("<dd", lo, hi))
        head.append(struct.pack("<dH", self.time, len(name)))
        head.append(name)
        return b"".join(head) + self.data.astype("<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Snapshot":
        view = memoryview(blob)
        if bytes(view[:8]) != MAGIC:
            raise SnapshotFormatError("not a snapshot: bad magic")
        pos = 8
        try:
            version, ndim = struct.unpack_from("<II", view, pos)
            pos += 8
            if version != VERSION:
                raise SnapshotFormatError(f"unsupported snapshot version {version}")
            dims = struct.unpack_from(f"<{ndim}Q", view, pos)
            pos += 8 * ndim
            ext = []
            for _ in range(ndim):
                ext.append(struct.unpack_from("<dd", view, pos))
                pos += 16
            time, nlen = struct.unpack_from("<dH", view, pos)
            pos += 10
            tag = bytes(view[pos : pos + nlen]).decode("utf-8")
            pos += nlen
        except struct.error as exc:
            raise SnapshotFormatError(f"truncated snapshot header: {exc}") from None
        count = int(np.prod(dims)) if ndim else 1
        if len(view) - pos != 8 * count:
            raise SnapshotFormatError(f"payload holds {len(view) - pos} bytes, expected {8 * count}")
        data = np.frombuffer(view[pos:], dtype="<f8").reshape(dims).astype(np.float64)
        name, _, unit = tag.partition("|")
        return cls(data, tuple(ext), time, name, unit)


def write_snapshot(path: str | Path, snap: Snapshot) -> Path:
    path = Path(path)
    path.write_bytes(snap.to_bytes())
    return path


def read_snapshot(path: str | Path) -> Snapshot:
    return Snapshot.from_bytes(Path(path).read_bytes())


def snapshot_filename(name: str, time: float) -> str:
    return f"{name}_t{time:.6f}.snap"


def write_table(rows: Iterable[Sequence], header: Sequence[str], path: str | Path | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([f"{v:.6e}" if isinstance(v, float) else v for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_table(text: str) -> tuple[list[str], list[list[str]]]:
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]
