"""Grid-sampled fields on the nilmanifold, with twisted-periodic access.

A uniform N^3 grid on [0,1)^3 with spacing h = 1/N. Index (i, j, k) holds the
value at (i*h, j*h, k*h). Wrapping in x and z is plain mod N; wrapping j past
the y-boundary shears z by an integer number of cells:

    f[i, j + N, k] = f[i, j, (k - i) mod N]
    f[i, j - N, k] = f[i, j, (k + i) mod N]

because f(x, y+1, w) = f(x, y, w - x) on the quotient and x = i/N is an exact
multiple of the z cell size. Any raw N^3 array together with this access rule
is a valid function on the quotient; the same N must be used on all axes so
the shear is integral.

Snapshot format: 16-byte header (magic b"SBRH", version, N, K, little
endian) followed by the raw component data as C-order little-endian float64,
plus a JSON sidecar <path>.json with {time, scenario, seed, grid_n, k}.
"""

import json
import os
import struct

import numpy as np

_MAGIC = b"SBRH"
_VERSION = 1
_HEADER = struct.Struct("<4sHII2x")


class SnapshotError(Exception):
    """Base class for snapshot I/O problems."""


class SnapshotIOError(SnapshotError):
    """Underlying file could not be read or written."""


class SnapshotHeaderError(SnapshotError):
    """Magic, version, or shape fields do not match expectations."""


class SnapshotTruncatedError(SnapshotError):
    """Payload shorter than the header promises."""


class Grid:
    """Uniform N^3 grid; caches coordinates and the twist index tables."""

    def __init__(self, n):
        n = int(n)
        if n < 8:
            raise ValueError("grid size must be at least 8")
        self.n = n
        self.h = 1.0 / n
        axis = np.arange(n) * self.h
        self.x = axis.reshape(-1, 1, 1)
        self.y = axis.reshape(1, -1, 1)
        self.z = axis.reshape(1, 1, -1)
        i = np.arange(n).reshape(-1, 1)
        k = np.arange(n).reshape(1, -1)
        # gather tables for the sheared z-axis when crossing the y-boundary
        self._row = np.broadcast_to(i, (n, n))
        self._twist_up = (k - i) % n
        self._twist_dn = (k + i) % n

    def __eq__(self, other):
        return isinstance(other, Grid) and other.n == self.n

    def __repr__(self):
        return f"Grid(n={self.n})"


class ScalarField:
    """One real value per grid cell."""

    def __init__(self, grid, data):
        data = np.asarray(data, dtype=float)
        if data.shape != (grid.n, grid.n, grid.n):
            raise ValueError(f"expected shape {(grid.n,) * 3}, got {data.shape}")
        self.grid = grid
        self.data = data

    def copy(self):
        return ScalarField(self.grid, self.data.copy())


class MapField:
    """K-component map into a target; components share one grid.

    Stored as a single (K, N, N, N) array; `components` exposes the
    per-component ScalarField views.
    """

    def __init__(self, grid, data):
        data = np.asarray(data, dtype=float)
        if data.ndim != 4 or data.shape[1:] != (grid.n, grid.n, grid.n):
            raise ValueError(f"expected shape (K, {grid.n}, {grid.n}, {grid.n}), got {data.shape}")
        self.grid = grid
        self.data = data
        self.meta = {}

    @property
    def k(self):
        return self.data.shape[0]

    @property
    def components(self):
        return [ScalarField(self.grid, self.data[a]) for a in range(self.k)]

    @classmethod
    def from_components(cls, fields_):
        grid = fields_[0].grid
        return cls(grid, np.stack([f.data for f in fields_]))

    def copy(self):
        out = MapField(self.grid, self.data.copy())
        out.meta = dict(self.meta)
        return out


def get_wrapped(f, i, j, k):
    """Value at arbitrary integer indices under the twisted-periodic rule.

    Works for ScalarField and MapField (leading component axis passes
    through) and for array-valued indices.
    """
    n = f.grid.n
    i = np.asarray(i)
    j = np.asarray(j)
    k = np.asarray(k)
    jq, jr = np.divmod(j, n)
    return f.data[..., i % n, jr, (k - jq * i) % n]


def write_snapshot(u, path, time=0.0, scenario="", seed=0):
    """Write a MapField and its JSON sidecar; round-trip is bit exact."""
    if not np.all(np.isfinite(u.data)):
        raise ValueError("refusing to write non-finite field data")
    header = _HEADER.pack(_MAGIC, _VERSION, u.grid.n, u.k)
    payload = np.ascontiguousarray(u.data, dtype="<f8").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
        with open(str(path) + ".json", "w") as fh:
            json.dump(
                {
                    "time": float(time),
                    "scenario": scenario,
                    "seed": int(seed),
                    "grid_n": u.grid.n,
                    "k": u.k,
                },
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")
    except OSError as exc:
        raise SnapshotIOError(f"cannot write snapshot {path}: {exc}") from exc


def read_snapshot(path):
    """Read a MapField written by write_snapshot; sidecar lands in .meta."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise SnapshotIOError(f"cannot read snapshot {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise SnapshotHeaderError(f"{path}: file shorter than the header")
    magic, version, n, k = _HEADER.unpack(raw[: _HEADER.size])
    if magic != _MAGIC:
        raise SnapshotHeaderError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise SnapshotHeaderError(f"{path}: unsupported version {version}")
    if n < 8 or k < 1:
        raise SnapshotHeaderError(f"{path}: implausible shape N={n}, K={k}")
    expected = k * n * n * n * 8
    body = raw[_HEADER.size :]
    if len(body) < expected:
        raise SnapshotTruncatedError(
            f"{path}: payload holds {len(body)} bytes, header promises {expected}"
        )
    data = np.frombuffer(body[:expected], dtype="<f8").reshape(k, n, n, n).astype(float)
    out = MapField(Grid(n), data)
    sidecar = str(path) + ".json"
    if os.path.exists(sidecar):
        try:
            with open(sidecar) as fh:
                out.meta = json.load(fh)
        except (OSError, ValueError):
            out.meta = {}
    return out
