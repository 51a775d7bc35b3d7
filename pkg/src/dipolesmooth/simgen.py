"""Ground-truth dipole trajectories and noisy synthetic sensor data.

Eight simulation groups cover the cross product of three switches:

=====  =======  ========  ===============
group  sources  location  moment strength
=====  =======  ========  ===============
1      1        fixed     constant
2      1        walking   constant
3      2        fixed     constant
4      2        walking   constant
5      1        fixed     bell-shaped
6      1        walking   bell-shaped
7      2        fixed     bell-shaped
8      2        walking   bell-shaped
=====  =======  ========  ===============

Moment orientations are drawn once per source and held fixed; bell-shaped
strengths follow exp(-(t - t0)^2 / (2 a^2)).  Walking sources move on the
grid: each step stays within the walk radius and must increase the
distance from the location two steps back, so a walk cannot oscillate
around one position.  White Gaussian sensor noise of fixed standard
deviation is added to the noise-free data; the signal-to-noise ratio then
varies from run to run with the drawn source configuration.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.random import SeedSequence, default_rng

from .geometry import Dipole, DipoleState, predict_data_batch

# Calibrated so that group 1 with the default desk geometry (0.09 m sphere,
# 60 radial sensors at 0.12 m, 0.015 m grid) and the default 1e-8 A*m
# strength lands near SNR 5 (median over random source draws).
DEFAULT_NOISE_STD = 3.6e-15
DEFAULT_STRENGTH = 1e-8

MOVING_GROUPS = frozenset({2, 4, 6, 8})
TWO_SOURCE_GROUPS = frozenset({3, 4, 7, 8})
BELL_GROUPS = frozenset({5, 6, 7, 8})


class SimulationError(RuntimeError):
    """Simulation could not be generated with the given grid and spec."""


@dataclass
class SimulationSpec:
    group: int
    horizon: int = 30
    noise_std: float = DEFAULT_NOISE_STD
    walk_radius: float = 0.01
    bell_center: int = 15
    bell_width: float = 4.0
    strength: float = DEFAULT_STRENGTH
    seed: int = 0

    def __post_init__(self):
        if self.group not in range(1, 9):
            raise ValueError("group must be in 1..8")
        if self.horizon < 3:
            raise ValueError("horizon must be at least 3")
        for name in ("noise_std", "walk_radius", "bell_width", "strength"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def num_sources(self):
        return 2 if self.group in TWO_SOURCE_GROUPS else 1

    @property
    def moving(self):
        return self.group in MOVING_GROUPS

    @property
    def bell(self):
        return self.group in BELL_GROUPS


@dataclass
class SimulationTruth:
    spec: SimulationSpec
    states: list            # DipoleState per time
    clean_data: np.ndarray  # (T, S)
    noisy_data: np.ndarray  # (T, S)


def _strength_profile(spec):
    t = np.arange(1, spec.horizon + 1, dtype=float)
    if not spec.bell:
        return np.full(spec.horizon, spec.strength)
    return spec.strength * np.exp(
        -((t - spec.bell_center) ** 2) / (2.0 * spec.bell_width**2)
    )


def _walk(rng, grid, start, horizon, walk_radius, max_attempts=100):
    """Grid random walk: short steps that never shrink back toward the
    point visited two steps earlier."""
    pts = grid.points
    for _ in range(max_attempts):
        path = [start]
        trapped = False
        for t in range(1, horizon):
            cur = path[-1]
            d_cur = np.linalg.norm(pts - pts[cur], axis=1)
            admissible = (d_cur <= walk_radius) & (d_cur > 0.0)
            if t >= 2:
                prev2 = path[-2]
                d_prev2 = np.linalg.norm(pts - pts[prev2], axis=1)
                admissible &= d_prev2 > np.linalg.norm(pts[cur] - pts[prev2])
            candidates = np.flatnonzero(admissible)
            if len(candidates) == 0:
                trapped = True
                break
            path.append(int(rng.choice(candidates)))
        if not trapped:
            return path
    raise SimulationError(
        f"walk trapped after {max_attempts} attempts; grid too sparse for "
        f"walk radius {walk_radius}"
    )


def generate(spec, grid, leadfield, rng=None):
    """Draw one ground-truth trajectory and its noisy sensor data."""
    if rng is None:
        rng = default_rng(SeedSequence(spec.seed))
    ns = spec.num_sources
    if len(grid) < ns:
        raise SimulationError("grid smaller than the number of sources")
    starts = [int(i) for i in rng.choice(len(grid), size=ns, replace=False)]
    directions = []
    for _ in range(ns):
        v = rng.standard_normal(3)
        directions.append(v / np.linalg.norm(v))
    if spec.moving:
        paths = [
            _walk(rng, grid, s, spec.horizon, spec.walk_radius) for s in starts
        ]
    else:
        paths = [[s] * spec.horizon for s in starts]
    strengths = _strength_profile(spec)
    states = [
        DipoleState(
            Dipole(paths[k][t], strengths[t] * directions[k]) for k in range(ns)
        )
        for t in range(spec.horizon)
    ]
    clean = predict_data_batch(states, leadfield)
    noisy = clean + spec.noise_std * rng.standard_normal(clean.shape)
    return SimulationTruth(spec, states, clean, noisy)


def snr(truth):
    """Root-mean-square clean amplitude over the noise standard deviation."""
    rms = math.sqrt(float(np.mean(truth.clean_data**2)))
    return rms / truth.spec.noise_std


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------


def write_data_csv(path, data):
    data = np.asarray(data)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"s{j}" for j in range(data.shape[1])])
        for t, row in enumerate(data, start=1):
            writer.writerow([t] + [repr(float(v)) for v in row])


def read_data_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row[1:]] for row in reader]
    return np.array(rows)


def write_truth_csv(path, truth):
    """One row per time point: t, dipole count, then per-dipole slots
    (grid index and moment components), padded to the file's maximum."""
    max_n = max(st.n for st in truth.states)
    header = ["t", "n"]
    for i in range(max_n):
        header += [f"d{i}_grid", f"d{i}_qx", f"d{i}_qy", f"d{i}_qz"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, st in enumerate(truth.states, start=1):
            row = [t, st.n]
            for d in st.dipoles:
                row += [d.grid_index] + [repr(float(v)) for v in d.moment]
            row += [""] * (4 * (max_n - st.n))
            writer.writerow(row)


def read_truth_states(path):
    """Read back the per-time dipole states written by write_truth_csv."""
    states = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            n = int(row[1])
            dipoles = []
            for i in range(n):
                base = 2 + 4 * i
                dipoles.append(
                    Dipole(int(row[base]), [float(v) for v in row[base + 1:base + 4]])
                )
            states.append(DipoleState(dipoles))
    return states
