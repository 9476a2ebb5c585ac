"""Static 3D wind fields on a regular grid.

Fields are stored as an ``(nx*ny*nz, 3)`` table in x-fastest order and read
or written in the line-oriented WINDGRID text format::

    WINDGRID 1
    origin ox oy oz
    spacing sx sy sz
    dims nx ny nz
    envelope vmin vmax
    vx vy vz          # nx*ny*nz lines, x fastest, then y, then z
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels

MAGIC = "WINDGRID"
VERSION = 1
DEFAULT_CLIP = (-5.0, 10.0)


class WindFormatError(ValueError):
    """Raised for malformed WINDGRID files; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class WindField:
    origin: tuple
    spacing: tuple
    dims: tuple
    velocities: np.ndarray
    envelope: tuple = DEFAULT_CLIP
    _rows: list = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        origin = tuple(float(v) for v in self.origin)
        spacing = tuple(float(v) for v in self.spacing)
        dims = tuple(int(v) for v in self.dims)
        if len(origin) != 3 or len(spacing) != 3 or len(dims) != 3:
            raise ValueError("origin, spacing and dims need three entries each")
        if any(not s > 0 for s in spacing):
            raise ValueError("non-positive spacing")
        if any(n < 2 for n in dims):
            raise ValueError("every grid dimension must be at least 2")
        vel = np.ascontiguousarray(self.velocities, dtype=np.float64).reshape(-1, 3)
        if vel.shape[0] != dims[0] * dims[1] * dims[2]:
            raise ValueError(
                f"expected {dims[0] * dims[1] * dims[2]} velocity vectors, got {vel.shape[0]}")
        if not np.all(np.isfinite(vel)):
            raise ValueError("non-finite wind velocity")
        lo, hi = (float(v) for v in self.envelope)
        if lo > hi:
            raise ValueError("envelope bounds out of order")
        if vel.size and (vel.min() < lo or vel.max() > hi):
            raise ValueError("wind velocity outside declared envelope")
        vel.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "envelope", (lo, hi))
        object.__setattr__(self, "_rows", [tuple(r) for r in vel.tolist()])

    def __eq__(self, other):
        if not isinstance(other, WindField):
            return NotImplemented
        return (self.origin == other.origin and self.spacing == other.spacing
                and self.dims == other.dims and self.envelope == other.envelope
                and np.array_equal(self.velocities, other.velocities))

    @property
    def upper_corner(self):
        return tuple(o + s * (n - 1) for o, s, n in zip(self.origin, self.spacing, self.dims))

    def table(self, backend=None):
        """Velocity table in the representation the given kernel module expects."""
        name = kernels.BACKEND if backend is None else backend
        return self._rows if name == "python" else self.velocities

    def kernel_args(self, backend=None):
        """Flat argument tail shared by ``trilinear`` and ``integrate``."""
        return (self.table(backend), *self.origin, *self.spacing, *self.dims)

    def vertex(self, i, j, k):
        nx, ny, _ = self.dims
        return self.velocities[i + nx * (j + ny * k)]


def uniform_field(velocity, extent=((-60.0, 60.0), (-60.0, 60.0), (0.0, 25.0)),
                  spacing=(5.0, 5.0, 5.0), envelope=DEFAULT_CLIP):
    """Grid over ``extent`` holding the same vector everywhere."""
    origin, dims = _grid_for(extent, spacing)
    vel = np.tile(np.asarray(velocity, dtype=np.float64), (dims[0] * dims[1] * dims[2], 1))
    lo = min(envelope[0], float(np.min(velocity)))
    hi = max(envelope[1], float(np.max(velocity)))
    return WindField(origin, spacing, dims, vel, (lo, hi))


def sample_velocity(wind, p):
    """Wind vector at point ``p`` (clamped trilinear interpolation)."""
    return np.array(kernels.trilinear(*wind.kernel_args(), float(p[0]), float(p[1]), float(p[2])))


def grid_points(wind):
    """World coordinates of every vertex, in storage order, as an (n, 3) array."""
    return _vertex_coords(wind.origin, wind.spacing, wind.dims)


def _vertex_coords(origin, spacing, dims):
    nx, ny, nz = dims
    ox, oy, oz = origin
    sx, sy, sz = spacing
    k, j, i = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    return np.stack([ox + sx * i.ravel(), oy + sy * j.ravel(), oz + sz * k.ravel()], axis=1)


def _grid_for(extent, spacing):
    origin = tuple(float(lo) for lo, _ in extent)
    dims = []
    for (lo, hi), s in zip(extent, spacing):
        if not hi > lo:
            raise ValueError("extent must have positive volume")
        dims.append(max(2, int(np.ceil((hi - lo) / s - 1e-9)) + 1))
    return origin, tuple(dims)


@dataclass
class GustSpec:
    """Parameters for a procedural gust field: a base flow plus random plane waves."""

    base: tuple = (3.0, 0.0, 0.0)
    mode_count: int = 6
    amplitude_range: tuple = (1.0, 4.0)
    wavelength_range: tuple = (20.0, 80.0)
    clip: tuple = DEFAULT_CLIP
    seed: int = 0
    vertical_scale: float = 0.0

    def __post_init__(self):
        if self.clip[0] > self.clip[1]:
            raise ValueError("clip bounds out of order")
        if self.mode_count < 0:
            raise ValueError("mode_count must be >= 0")


def generate_procedural(spec, extent=((-60.0, 60.0), (-60.0, 60.0), (0.0, 25.0)),
                        spacing=(5.0, 5.0, 5.0)):
    """Sum of seeded sinusoidal modes on top of ``spec.base``, clipped per component.

    Each mode has a random unit propagation direction, amplitude vector,
    wavelength and phase.  Vertical amplitude is scaled by
    ``spec.vertical_scale``; the default of zero keeps gusts horizontal.
    """
    origin, dims = _grid_for(extent, spacing)
    pts = _vertex_coords(origin, spacing, dims)
    rng = np.random.default_rng(spec.seed)
    vel = np.tile(np.asarray(spec.base, dtype=np.float64), (len(pts), 1))
    lo_a, hi_a = spec.amplitude_range
    lo_w, hi_w = spec.wavelength_range
    for _ in range(spec.mode_count):
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        amp_dir = rng.normal(size=3)
        amp_dir[2] *= spec.vertical_scale
        amp_dir /= max(np.linalg.norm(amp_dir), 1e-12)
        amplitude = rng.uniform(lo_a, hi_a)
        wavelength = rng.uniform(lo_w, hi_w)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        wave = np.sin(2.0 * np.pi * (pts @ direction) / wavelength + phase)
        vel += amplitude * np.outer(wave, amp_dir)
    vel = np.clip(vel, spec.clip[0], spec.clip[1])
    return WindField(origin, spacing, dims, vel, tuple(spec.clip))


def save_field(wind, path):
    lines = [
        f"{MAGIC} {VERSION}",
        "origin " + " ".join(_fmt(v) for v in wind.origin),
        "spacing " + " ".join(_fmt(v) for v in wind.spacing),
        "dims " + " ".join(str(n) for n in wind.dims),
        "envelope " + " ".join(_fmt(v) for v in wind.envelope),
    ]
    lines.extend(" ".join(_fmt(v) for v in row) for row in wind.velocities.tolist())
    Path(path).write_text("\n".join(lines) + "\n")


def _fmt(v):
    return format(float(v), ".17g")


def _floats(tokens, count, line_no, what):
    if len(tokens) != count:
        raise WindFormatError(f"{what}: expected {count} numbers, got {len(tokens)}", line_no)
    try:
        vals = [float(t) for t in tokens]
    except ValueError:
        raise WindFormatError(f"{what}: not a number", line_no) from None
    if not all(np.isfinite(vals)):
        raise WindFormatError(f"{what}: non-finite value", line_no)
    return vals


def load_field(path):
    text = Path(path).read_text().splitlines()
    header = ["", "origin", "spacing", "dims", "envelope"]
    if len(text) < 5:
        raise WindFormatError(f"truncated header ({len(text)} lines)", len(text) + 1)
    magic = text[0].split()
    if len(magic) != 2 or magic[0] != MAGIC:
        raise WindFormatError("missing WINDGRID magic", 1)
    if magic[1] != str(VERSION):
        raise WindFormatError(f"unsupported version {magic[1]}", 1)
    values = {}
    for idx in range(1, 5):
        tokens = text[idx].split()
        if not tokens or tokens[0] != header[idx]:
            raise WindFormatError(f"expected '{header[idx]}' record", idx + 1)
        count = 2 if header[idx] == "envelope" else 3
        values[header[idx]] = _floats(tokens[1:], count, idx + 1, header[idx])
    if any(not s > 0 for s in values["spacing"]):
        raise WindFormatError("non-positive spacing", 3)
    dims = values["dims"]
    if any(d != int(d) or d < 2 for d in dims):
        raise WindFormatError("dims must be integers >= 2", 4)
    dims = tuple(int(d) for d in dims)
    lo, hi = values["envelope"]
    if lo > hi:
        raise WindFormatError("envelope bounds out of order", 5)

    expected = dims[0] * dims[1] * dims[2]
    body = [(i + 6, ln) for i, ln in enumerate(text[5:]) if ln.strip()]
    if len(body) != expected:
        kind = "shortfall" if len(body) < expected else "excess"
        raise WindFormatError(
            f"vector count {kind}: dims {dims[0]}x{dims[1]}x{dims[2]} need {expected} vectors, "
            f"found {len(body)}", body[-1][0] if body else 6)
    vel = np.empty((expected, 3))
    for row, (line_no, ln) in enumerate(body):
        vec = _floats(ln.split(), 3, line_no, "velocity")
        if min(vec) < lo or max(vec) > hi:
            raise WindFormatError("velocity outside envelope", line_no)
        vel[row] = vec
    return WindField(tuple(values["origin"]), tuple(values["spacing"]), dims, vel, (lo, hi))
