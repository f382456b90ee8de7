"""Space-time lattice functions and their on-disk formats.

Binary layout (all little-endian)::

    magic    4 bytes  b"BHGF"
    version  uint32   (1)
    ndim     uint32
    nt       uint32   number of stored time slices
    shape    ndim x uint64
    h, dt, T, lateral          4 x float64
    origin   ndim x float64
    times    nt x float64
    mask     prod(shape) x uint8   (1 = unknown, 0 = pinned to the lateral datum)
    payload  nt x prod(shape) x float64, row-major (C order), time slowest

The CSV form has a ``# bhlab-field v1`` comment line followed by the header
``t,x0[,x1[,x2]],u`` and one row per interior lattice point and slice.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

__all__ = ["GridField", "FORMAT_VERSION"]

MAGIC = b"BHGF"
FORMAT_VERSION = 1


@dataclass
class GridField:
    h: float
    dt: float
    T: float
    origin: np.ndarray
    mask: np.ndarray
    times: np.ndarray
    values: np.ndarray  # (nt, *shape)
    lateral: float = 0.0
    meta: dict = field(default_factory=dict)
    lattice: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.origin = np.asarray(self.origin, float)
        self.times = np.asarray(self.times, float)
        self.values = np.asarray(self.values, float)
        if self.values.shape[0] != len(self.times) or self.values.shape[1:] != self.mask.shape:
            raise ValueError("values must have shape (len(times), *mask.shape)")

    @property
    def shape(self):
        return self.mask.shape

    @property
    def dim(self) -> int:
        return self.mask.ndim

    @property
    def nt(self) -> int:
        return len(self.times)

    def interior(self, j: int) -> np.ndarray:
        return self.values[j][self.mask]

    def coords(self) -> np.ndarray:
        g = np.meshgrid(*[self.origin[k] + np.arange(self.shape[k]) * self.h for k in range(self.dim)],
                        indexing="ij")
        return np.stack(g, axis=-1)

    def interior_coords(self) -> np.ndarray:
        return self.coords()[self.mask]

    def slice_index(self, t: float, tol: float = 1e-9) -> int:
        j = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[j] - t) > tol * max(1.0, abs(t)):
            raise KeyError(f"no stored slice at t={t}")
        return j

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def same_grid(self, other: "GridField") -> bool:
        return (self.h == other.h and self.dt == other.dt and self.shape == other.shape
                and np.array_equal(self.origin, other.origin) and np.array_equal(self.mask, other.mask)
                and np.array_equal(self.times, other.times))

    def _space(self, j, X):
        c = (np.asarray(X, float) - self.origin) / self.h
        return ndimage.map_coordinates(self.values[j], c.T, order=1, mode="constant", cval=self.lateral)

    def at(self, X, t) -> np.ndarray:
        """Multilinear interpolation in space, linear between stored slices.

        Points outside the lattice box take the lateral datum.  Times outside
        the stored range raise.
        """
        X = np.asarray(X, float).reshape(-1, self.dim)
        t = np.broadcast_to(np.asarray(t, float), (len(X),))
        if np.any(t < self.times[0] - 1e-12) or np.any(t > self.times[-1] + 1e-12):
            raise ValueError("time outside the stored range")
        out = np.empty(len(X))
        j = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.nt - 2 if self.nt > 1 else 0)
        for jj in np.unique(j):
            sel = j == jj
            v0 = self._space(jj, X[sel])
            if self.nt == 1:
                out[sel] = v0
                continue
            t0, t1 = self.times[jj], self.times[jj + 1]
            wgt = np.clip((t[sel] - t0) / (t1 - t0), 0.0, 1.0)
            v1 = self._space(jj + 1, X[sel])
            out[sel] = np.where(wgt == 0.0, v0, (1 - wgt) * v0 + wgt * v1)
        return out

    def scaled(self, c: float) -> "GridField":
        return GridField(self.h, self.dt, self.T, self.origin.copy(), self.mask.copy(), self.times.copy(),
                         c * self.values, c * self.lateral, dict(self.meta), self.lattice)

    # serialization

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(struct.pack("<III", FORMAT_VERSION, self.dim, self.nt))
        buf.write(struct.pack(f"<{self.dim}Q", *self.shape))
        buf.write(struct.pack("<4d", self.h, self.dt, self.T, self.lateral))
        buf.write(self.origin.astype("<f8").tobytes())
        buf.write(self.times.astype("<f8").tobytes())
        buf.write(self.mask.astype(np.uint8).tobytes(order="C"))
        buf.write(np.ascontiguousarray(self.values).astype("<f8").tobytes(order="C"))
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "GridField":
        if data[:4] != MAGIC:
            raise ValueError("not a bhlab field file")
        off = 4
        version, ndim, nt = struct.unpack_from("<III", data, off)
        off += 12
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported field format version {version}")
        shape = struct.unpack_from(f"<{ndim}Q", data, off)
        off += 8 * ndim
        h, dt, T, lateral = struct.unpack_from("<4d", data, off)
        off += 32

        def take(count, dtype):
            nonlocal off
            arr = np.frombuffer(data, dtype=dtype, count=count, offset=off)
            off += arr.nbytes
            return arr

        origin = take(ndim, "<f8").copy()
        times = take(nt, "<f8").copy()
        size = int(np.prod(shape))
        mask = take(size, np.uint8).reshape(shape).astype(bool)
        values = take(nt * size, "<f8").reshape((nt, *shape)).astype(float)
        if off != len(data):
            raise ValueError("trailing bytes in field file")
        return cls(h, dt, T, origin, mask, times, values, lateral)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "GridField":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def to_csv(self, max_rows: int = 200_000) -> str:
        X = self.interior_coords()
        if len(X) * self.nt > max_rows:
            raise ValueError(f"field too large for CSV ({len(X) * self.nt} rows > {max_rows})")
        cols = ",".join(f"x{k}" for k in range(self.dim))
        lines = [f"# bhlab-field v{FORMAT_VERSION}", f"t,{cols},u"]
        for j, t in enumerate(self.times):
            u = self.interior(j)
            for x, v in zip(X, u):
                lines.append(",".join([repr(float(t))] + [repr(float(c)) for c in x] + [repr(float(v))]))
        return "\n".join(lines) + "\n"
