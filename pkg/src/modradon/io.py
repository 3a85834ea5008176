"""Sinogram, image and table files.

MRTS layout (little-endian): magic ``b"MRTS"``, u16 version, u32 M, u32 N+1,
u32 K, f64 T, f64 Omega, f64 lambda (0 for unfolded data), then the samples
as row-major f64.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import ScanGeometry

MAGIC = b"MRTS"
VERSION = 1
_HEADER = struct.Struct("<4sHIIIddd")


class FormatError(OSError):
    """Raised for files that do not follow the expected layout."""


@dataclass
class SinogramFile:
    data: np.ndarray
    geometry: ScanGeometry
    lam: float = 0.0

    @property
    def folded(self) -> bool:
        return self.lam > 0


def write_mrts(path, data: np.ndarray, g: ScanGeometry, lam: float = 0.0) -> None:
    data = np.ascontiguousarray(data, dtype="<f8")
    if data.shape != (g.M, g.N + 1):
        raise ValueError("data does not match geometry")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, g.M, g.N + 1, g.K, g.T, g.Omega, lam))
        fh.write(data.tobytes())


def read_mrts(path) -> SinogramFile:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, M, n1, K, T, Omega, lam = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: not an MRTS file")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    body = raw[_HEADER.size:]
    if len(body) != 8 * M * n1:
        raise FormatError(f"{path}: expected {M * n1} samples, found {len(body) // 8}")
    if n1 - 1 - K < 1:
        raise FormatError(f"{path}: inconsistent K={K} for {n1} samples per row")
    g = ScanGeometry(K, n1 - 1 - K, M, T, Omega)
    data = np.frombuffer(body, dtype="<f8").reshape(M, n1).astype(float)
    return SinogramFile(data, g, lam)


def write_csv(path, data: np.ndarray) -> None:
    """One row per line at round-trip precision."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in data:
            w.writerow([repr(float(v)) for v in row])


def read_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    if not rows or len({len(r) for r in rows}) != 1:
        raise FormatError(f"{path}: rows must be nonempty and of equal length")
    return np.array(rows)


def read_sinogram(path, g: ScanGeometry | None = None, lam: float = 0.0) -> SinogramFile:
    """Load an MRTS file, or a CSV file together with its geometry."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if g is None:
            raise ValueError("a CSV sinogram needs an explicit geometry")
        data = read_csv(path)
        if data.shape != (g.M, g.N + 1):
            raise FormatError(f"{path}: shape {data.shape} does not match geometry")
        return SinogramFile(data, g, lam)
    return read_mrts(path)


def write_pgm(path, img: np.ndarray, lo: float | None = None, hi: float | None = None) -> None:
    """16-bit binary PGM; values are mapped linearly from ``[lo, hi]`` and clipped."""
    img = np.asarray(img, dtype=float)
    lo = float(img.min()) if lo is None else lo
    hi = float(img.max()) if hi is None else hi
    scale = 65535.0 / (hi - lo) if hi > lo else 0.0
    q = np.clip(np.round((img - lo) * scale), 0, 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n65535\n".encode("ascii"))
        fh.write(q.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM written by :func:`write_pgm`; returns raw integer levels."""
    raw = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        fields.append(raw[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    w, h, maxval = (int(f) for f in fields[1:])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(raw[pos + 1:], dtype=dtype, count=w * h).reshape(h, w)


def write_spikes_csv(path, spikes) -> None:
    """Columns: angle index, spike position, real and imaginary coefficient."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["angle", "position", "coeff_re", "coeff_im"])
        for m, sp in enumerate(spikes):
            for pos, c in zip(sp.indices, sp.coeffs):
                w.writerow([m, int(pos), repr(float(c.real)), repr(float(c.imag))])


def write_table(path, rows: list[dict], append: bool = False) -> None:
    """CSV with a header taken from the first row's keys.

    With ``append`` the rows are added to an existing file without repeating
    the header.
    """
    if not rows:
        raise ValueError("no rows to write")
    fresh = not (append and Path(path).exists())
    with open(path, "w" if fresh else "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        if fresh:
            w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
