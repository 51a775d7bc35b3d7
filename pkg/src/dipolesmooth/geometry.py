"""Source-space geometry and the linear dipole-to-sensor forward map.

The conductor is a homogeneous sphere centered at the origin.  Candidate
source locations live on a fixed cubic lattice inside the sphere;
magnetometers sit outside it and record the projection of the magnetic
field onto their orientation axes.  The field of a current dipole inside
a spherical conductor has the Sarvas closed form, which is linear in the
dipole moment, so the whole forward map reduces to one precomputed
(num_sensors x 3) gain block per grid point.
"""

from __future__ import annotations

import math

import numpy as np

MU0_OVER_4PI = 1e-7  # T*m/A

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


class GeometryError(ValueError):
    """Invalid or singular source/sensor geometry."""


class LeadfieldFileError(ValueError):
    """Malformed or inconsistent leadfield file."""


def _readonly(a):
    a = np.ascontiguousarray(np.asarray(a, dtype=float))
    a.setflags(write=False)
    return a


class SourceGrid:
    """Ordered set of candidate source locations inside the conductor.

    The point order is fixed at construction time; a grid index is the
    identity of a location everywhere else in the library.
    """

    __slots__ = ("points", "spacing", "conductor_radius")

    def __init__(self, points, spacing, conductor_radius):
        points = _readonly(points)
        if points.ndim != 2 or points.shape[1] != 3 or len(points) == 0:
            raise GeometryError("empty grid: no source points")
        norms = np.linalg.norm(points, axis=1)
        if np.any(norms >= conductor_radius):
            raise GeometryError("grid point on or outside the conductor sphere")
        self.points = points
        self.spacing = float(spacing)
        self.conductor_radius = float(conductor_radius)

    def __len__(self):
        return len(self.points)


class SensorArray:
    """Magnetometer positions and unit orientation axes."""

    __slots__ = ("positions", "orientations")

    def __init__(self, positions, orientations):
        positions = _readonly(positions)
        orientations = np.asarray(orientations, dtype=float)
        if positions.shape != orientations.shape or positions.ndim != 2 or positions.shape[1] != 3:
            raise GeometryError("positions and orientations must both be (num_sensors, 3)")
        norms = np.linalg.norm(orientations, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise GeometryError("sensor orientations must have unit norm (rel. tol 1e-12)")
        self.positions = positions
        self.orientations = _readonly(orientations)

    def __len__(self):
        return len(self.positions)


class Leadfield:
    """Per-grid-point (num_sensors x 3) gain blocks, field per unit moment."""

    __slots__ = ("blocks",)

    def __init__(self, blocks):
        blocks = _readonly(blocks)
        if blocks.ndim != 3 or blocks.shape[2] != 3:
            raise GeometryError("leadfield blocks must be (num_points, num_sensors, 3)")
        if not np.all(np.isfinite(blocks)):
            p, s, c = np.argwhere(~np.isfinite(blocks))[0]
            raise LeadfieldFileError(
                f"non-finite leadfield entry at point {p}, sensor {s}, moment column {c}"
            )
        self.blocks = blocks

    @property
    def num_points(self):
        return self.blocks.shape[0]

    @property
    def num_sensors(self):
        return self.blocks.shape[1]


class Dipole:
    """A current dipole: a grid location index plus a 3-vector moment (A*m)."""

    __slots__ = ("grid_index", "moment", "_key")

    def __init__(self, grid_index, moment):
        mx, my, mz = (float(v) for v in moment)
        if not (math.isfinite(mx) and math.isfinite(my) and math.isfinite(mz)):
            raise ValueError("dipole moment must be finite")
        self.grid_index = int(grid_index)
        self.moment = np.array((mx, my, mz))
        self.moment.setflags(write=False)
        self._key = (self.grid_index, mx, my, mz)

    @property
    def strength(self):
        return float(np.linalg.norm(self.moment))

    def __eq__(self, other):
        return isinstance(other, Dipole) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"Dipole({self.grid_index}, {tuple(self.moment)})"


class DipoleState:
    """An unordered multiset of dipoles; the trans-dimensional state.

    Dipoles are stored in a canonical sort order so that states differing
    only by a permutation of the dipole labels compare (and hash) equal.
    """

    __slots__ = ("dipoles", "_locs", "_moments")

    def __init__(self, dipoles=()):
        self.dipoles = tuple(sorted(dipoles, key=lambda d: d._key))
        self._locs = None
        self._moments = None

    @property
    def n(self):
        return len(self.dipoles)

    def locations(self):
        """Grid indices of the dipoles as an int array (cached)."""
        if self._locs is None:
            self._locs = np.array([d.grid_index for d in self.dipoles], dtype=np.intp)
        return self._locs

    def moments(self):
        """Dipole moments as an (n, 3) array (cached)."""
        if self._moments is None:
            self._moments = np.array([d.moment for d in self.dipoles]).reshape(self.n, 3)
        return self._moments

    def __eq__(self, other):
        return isinstance(other, DipoleState) and self.dipoles == other.dipoles

    def __hash__(self):
        return hash(self.dipoles)

    def __repr__(self):
        return f"DipoleState({list(self.dipoles)!r})"


EMPTY_STATE = DipoleState()


def build_grid(sphere_radius, spacing, inner_margin=0.0):
    """Cubic-lattice source grid inside a sphere of the given radius.

    Keeps lattice points whose norm is at most ``sphere_radius - inner_margin``
    (and strictly inside the conductor), ordered lexicographically by lattice
    index so the ordering is reproducible for a given configuration.
    """
    if sphere_radius <= 0:
        raise GeometryError("sphere_radius must be positive")
    if spacing <= 0:
        raise GeometryError("spacing must be positive")
    if inner_margin < 0:
        raise GeometryError("inner_margin must be nonnegative")
    r_keep = sphere_radius - inner_margin
    kmax = int(math.floor(r_keep / spacing)) if r_keep > 0 else -1
    points = []
    for ix in range(-kmax, kmax + 1):
        for iy in range(-kmax, kmax + 1):
            for iz in range(-kmax, kmax + 1):
                p = (ix * spacing, iy * spacing, iz * spacing)
                r = math.sqrt(p[0] ** 2 + p[1] ** 2 + p[2] ** 2)
                if r <= r_keep and r < sphere_radius:
                    points.append(p)
    if not points:
        raise GeometryError("empty grid: margin/spacing leave no lattice point inside")
    return SourceGrid(np.array(points), spacing, sphere_radius)


def build_sensor_cap(num_sensors=60, radius=0.12, cap_half_angle=math.pi / 2):
    """Radial magnetometers on a spherical cap above the conductor.

    Sensors are laid out on a Fibonacci spiral over polar angles
    [0, cap_half_angle], so the arrangement is deterministic for a given
    sensor count.
    """
    if num_sensors < 1:
        raise GeometryError("need at least one sensor")
    i = np.arange(num_sensors)
    # uniform in cap area: cos(theta) from 1 down to cos(cap_half_angle)
    cos_t = 1.0 - (1.0 - math.cos(cap_half_angle)) * (i + 0.5) / num_sensors
    sin_t = np.sqrt(1.0 - cos_t**2)
    phi = i * GOLDEN_ANGLE
    directions = np.stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t], axis=1)
    return SensorArray(radius * directions, directions)


def _sarvas_gain(r0, sensors):
    """Gain block of a dipole at r0: field projections for unit moments.

    Returns a (num_sensors, 3) block; column c is the sensor response to a
    unit dipole along coordinate axis c.  Uses the closed-form field of a
    current dipole in a homogeneous conducting sphere centered at origin.
    """
    pos = sensors.positions
    a_vec = pos - r0[None, :]
    a = np.linalg.norm(a_vec, axis=1)
    r = np.linalg.norm(pos, axis=1)
    if np.any(a < 1e-12) or np.any(r < 1e-12):
        raise GeometryError("singular geometry: sensor at a dipole location or at the origin")
    r_dot_r0 = pos @ r0
    f = a * (a * r + r**2 - r_dot_r0)
    if np.any(f == 0.0):
        raise GeometryError("singular geometry: Sarvas denominator vanished")
    # gradient of f with respect to the sensor position
    coef_pos = a**2 / r + (r**2 - r_dot_r0) / a + 2.0 * a + 2.0 * r
    coef_r0 = a + 2.0 * r + (r**2 - r_dot_r0) / a
    grad_f = coef_pos[:, None] * pos - coef_r0[:, None] * r0[None, :]

    block = np.empty((len(pos), 3))
    eye = np.eye(3)
    for c in range(3):
        v = np.cross(eye[c], r0)  # unit moment along axis c crossed with location
        field = MU0_OVER_4PI * (f[:, None] * v[None, :] - (pos @ v)[:, None] * grad_f) / (f**2)[:, None]
        block[:, c] = np.einsum("sj,sj->s", field, sensors.orientations)
    return block


def sarvas_leadfield(grid, sensors):
    """Precompute the gain block for every grid point.

    Construction is embarrassingly parallel per grid point and produces the
    same output regardless of evaluation order.
    """
    pos_norms = np.linalg.norm(sensors.positions, axis=1)
    if np.any(pos_norms <= grid.conductor_radius):
        raise GeometryError("sensor inside or on the conductor sphere")
    blocks = np.empty((len(grid), len(sensors), 3))
    for p, r0 in enumerate(grid.points):
        blocks[p] = _sarvas_gain(r0, sensors)
    return Leadfield(blocks)


def predict_data(state, leadfield):
    """Noise-free sensor vector of a dipole configuration (sum of blocks)."""
    out = np.zeros(leadfield.num_sensors)
    blocks = leadfield.blocks
    n_points = leadfield.num_points
    for d in state.dipoles:
        if not 0 <= d.grid_index < n_points:
            raise IndexError(f"dipole grid index {d.grid_index} out of range [0, {n_points})")
        out += blocks[d.grid_index] @ d.moment
    return out


def predict_data_batch(states, leadfield):
    """Noise-free sensor vectors for a sequence of states, as (len, S)."""
    out = np.zeros((len(states), leadfield.num_sensors))
    blocks = leadfield.blocks
    for i, st in enumerate(states):
        if st.n:
            out[i] = np.einsum("nsc,nc->s", blocks[st.locations()], st.moments())
    return out


def save_leadfield(path, leadfield):
    """Write a leadfield in the plain-text interchange format.

    Header line ``num_points num_sensors``; then ``num_points * 3`` lines of
    ``num_sensors`` decimal floats, the three moment columns of each block in
    x, y, z order.  Floats are written with round-trip precision.
    """
    blocks = leadfield.blocks
    with open(path, "w") as fh:
        fh.write(f"{blocks.shape[0]} {blocks.shape[1]}\n")
        for p in range(blocks.shape[0]):
            for c in range(3):
                fh.write(" ".join(repr(float(v)) for v in blocks[p, :, c]) + "\n")


def load_leadfield(path, grid, num_sensors):
    """Read a leadfield written by :func:`save_leadfield` and validate it."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise LeadfieldFileError(f"{path}: header must be 'num_points num_sensors'")
        try:
            n_points, n_sensors = int(header[0]), int(header[1])
        except ValueError as exc:
            raise LeadfieldFileError(f"{path}: non-integer header") from exc
        if n_points != len(grid):
            raise LeadfieldFileError(
                f"{path}: file has {n_points} points, grid has {len(grid)}"
            )
        if n_sensors != num_sensors:
            raise LeadfieldFileError(
                f"{path}: file has {n_sensors} sensors, expected {num_sensors}"
            )
        blocks = np.empty((n_points, n_sensors, 3))
        for p in range(n_points):
            for c in range(3):
                line = fh.readline()
                if not line:
                    raise LeadfieldFileError(f"{path}: truncated at point {p}, column {c}")
                try:
                    row = np.array([float(v) for v in line.split()])
                except ValueError as exc:
                    raise LeadfieldFileError(
                        f"{path}: unparseable value at point {p}, column {c}"
                    ) from exc
                if len(row) != n_sensors:
                    raise LeadfieldFileError(
                        f"{path}: point {p}, column {c} has {len(row)} values, "
                        f"expected {n_sensors}"
                    )
                if not np.all(np.isfinite(row)):
                    s = int(np.argwhere(~np.isfinite(row))[0][0])
                    raise LeadfieldFileError(
                        f"{path}: non-finite entry at point {p}, moment column {c}, sensor {s}"
                    )
                blocks[p, :, c] = row
    return Leadfield(blocks)


def save_sensors(path, sensors):
    """One line per sensor: position x y z, orientation x y z."""
    with open(path, "w") as fh:
        for p, o in zip(sensors.positions, sensors.orientations):
            fh.write(" ".join(repr(float(v)) for v in (*p, *o)) + "\n")


def load_sensors(path):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            vals = line.split()
            if len(vals) != 6:
                raise GeometryError(f"{path}:{lineno}: expected six floats per sensor line")
            rows.append([float(v) for v in vals])
    arr = np.array(rows)
    return SensorArray(arr[:, :3], arr[:, 3:])
