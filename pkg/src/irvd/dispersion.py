"""Sneeze droplet sampling and ballistic flight with quadratic air drag.

Frame: emitter at the origin, +x toward the wall, +z up. The horizontal
angle rotates the launch direction in the x-y plane, the vertical angle
elevates it out of that plane.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numba
import numpy as np

from irvd.errors import ConfigError, check

# Integer outcome codes shared with the compiled kernel.
_IMPACT, _MOVING_AWAY, _TIMEOUT, _FLOOR = 0, 1, 2, 3
DEFAULT_LANES = 8


@dataclass(frozen=True)
class EmissionParams:
    """Normal distributions for one sneeze. Masses in kg, angles in degrees."""

    mass_mean: float = 1e-7
    mass_std: float = 1e-7
    speed_mean: float = 11.2
    speed_std: float = 3.0
    h_angle_mean: float = 0.0
    h_angle_std: float = 18.0
    v_angle_mean: float = -6.0
    v_angle_std: float = 12.0
    count: int = 50_000
    seed: int = 0

    def __post_init__(self):
        for name in ("mass_std", "speed_std", "h_angle_std", "v_angle_std"):
            check(getattr(self, name) >= 0, f"emission.{name}", "must be >= 0", getattr(self, name))
        check(self.mass_mean > 0, "emission.mass_mean", "must be > 0", self.mass_mean)
        check(self.speed_mean > 0, "emission.speed_mean", "must be > 0", self.speed_mean)
        check(int(self.count) == self.count and self.count >= 0, "emission.count",
              "must be a non-negative integer", self.count)
        check(0 <= self.seed < 2**64, "emission.seed", "must fit in 64 unsigned bits", self.seed)


@dataclass(frozen=True)
class AirModel:
    air_density: float = 1.225
    drag_coefficient: float = 0.47
    gravity: float = 9.81
    droplet_density: float = 1000.0
    dt: float = 1e-4
    drag_enabled: bool = True
    emitter_height: float = 1.5
    timeout: float = 10.0

    def __post_init__(self):
        check(self.dt > 0, "air.dt", "must be > 0", self.dt)
        check(self.air_density >= 0, "air.air_density", "must be >= 0", self.air_density)
        check(self.drag_coefficient >= 0, "air.drag_coefficient", "must be >= 0", self.drag_coefficient)
        check(self.droplet_density > 0, "air.droplet_density", "must be > 0", self.droplet_density)
        check(self.emitter_height > 0, "air.emitter_height", "must be > 0", self.emitter_height)
        check(self.timeout > 0, "air.timeout", "must be > 0", self.timeout)


@dataclass(frozen=True)
class Droplet:
    mass: float
    radius: float
    position: tuple[float, float, float]
    velocity: tuple[float, float, float]


class MissReason(str, enum.Enum):
    FLOOR_HIT = "floor-hit"
    MOVING_AWAY = "moving-away"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class Impact:
    y: float
    z: float
    t: float


@dataclass(frozen=True)
class Miss:
    reason: MissReason


FlightOutcome = Union[Impact, Miss]

_MISS_BY_CODE = {
    _MOVING_AWAY: Miss(MissReason.MOVING_AWAY),
    _TIMEOUT: Miss(MissReason.TIMEOUT),
    _FLOOR: Miss(MissReason.FLOOR_HIT),
}


def droplet_radius(mass, droplet_density: float):
    return np.cbrt(3.0 * np.asarray(mass) / (4.0 * math.pi * droplet_density))


def _droplet_stream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def sample_droplets(params: EmissionParams, droplet_density: float = 1000.0) -> list[Droplet]:
    """Draw ``params.count`` droplets, each from its own (seed, index) substream.

    Non-positive masses are redrawn from the same substream until positive.
    """
    droplets = []
    for i in range(params.count):
        rng = _droplet_stream(params.seed, i)
        mass = rng.normal(params.mass_mean, params.mass_std)
        while mass <= 0.0:
            mass = rng.normal(params.mass_mean, params.mass_std)
        speed = rng.normal(params.speed_mean, params.speed_std)
        h = math.radians(rng.normal(params.h_angle_mean, params.h_angle_std))
        v = math.radians(rng.normal(params.v_angle_mean, params.v_angle_std))
        velocity = (
            speed * math.cos(v) * math.cos(h),
            speed * math.cos(v) * math.sin(h),
            speed * math.sin(v),
        )
        radius = float(droplet_radius(mass, droplet_density))
        droplets.append(Droplet(float(mass), radius, (0.0, 0.0, 0.0), velocity))
    return droplets


@numba.njit(cache=True)
def _accel(k, g, vx, vy, vz):
    s = math.sqrt(vx * vx + vy * vy + vz * vz)
    return -k * s * vx, -k * s * vy, -g - k * s * vz


@numba.njit(cache=True)
def _hermite(p0, p1, v0, v1, h, f):
    f2 = f * f
    f3 = f2 * f
    return ((2 * f3 - 3 * f2 + 1) * p0 + (f3 - 2 * f2 + f) * h * v0
            + (-2 * f3 + 3 * f2) * p1 + (f3 - f2) * h * v1)


@numba.njit(cache=True)
def _crossing_fraction(x0, x1, vx0, vx1, h, wall):
    # Root of the cubic Hermite x(f) = wall on [0, 1], seeded by the chord.
    f = (wall - x0) / (x1 - x0)
    for _ in range(6):
        f2 = f * f
        r = _hermite(x0, x1, vx0, vx1, h, f) - wall
        d = ((6 * f2 - 6 * f) * x0 + (3 * f2 - 4 * f + 1) * h * vx0
             + (-6 * f2 + 6 * f) * x1 + (3 * f2 - 2 * f) * h * vx1)
        if d == 0.0:
            break
        step = r / d
        f -= step
        if abs(step) < 1e-15:
            break
    return min(max(f, 0.0), 1.0)


@numba.njit(cache=True)
def _fly(pos, vel, kdrag, walls, g, dt, floor_z, tmax, lanes):
    """Integrate droplets in interleaved lanes; each lane refills on termination.

    Lanes only change scheduling: every droplet runs the identical sequence
    of floating-point operations, so results do not depend on ``lanes``.
    """
    n = pos.shape[0]
    nw = walls.shape[0]
    hits = np.full((n, nw, 3), np.nan)
    codes = np.zeros(n, np.int64)
    st = np.zeros((lanes, 7))
    kd = np.zeros(lanes)
    owner = -np.ones(lanes, np.int64)
    next_wall = np.zeros(lanes, np.int64)
    nxt = 0
    active = 0
    for lane in range(lanes):
        if nxt < n:
            owner[lane] = nxt
            st[lane, 0:3] = pos[nxt]
            st[lane, 3:6] = vel[nxt]
            st[lane, 6] = 0.0
            kd[lane] = kdrag[nxt]
            nxt += 1
            active += 1
    while active > 0:
        for lane in range(lanes):
            i = owner[lane]
            if i < 0:
                continue
            x, y, z = st[lane, 0], st[lane, 1], st[lane, 2]
            vx, vy, vz = st[lane, 3], st[lane, 4], st[lane, 5]
            t = st[lane, 6]
            k = kd[lane]
            done = -1
            if vx <= 0.0:
                done = _MOVING_AWAY
            elif t > tmax:
                done = _TIMEOUT
            else:
                a1x, a1y, a1z = _accel(k, g, vx, vy, vz)
                b2x, b2y, b2z = vx + 0.5 * dt * a1x, vy + 0.5 * dt * a1y, vz + 0.5 * dt * a1z
                a2x, a2y, a2z = _accel(k, g, b2x, b2y, b2z)
                b3x, b3y, b3z = vx + 0.5 * dt * a2x, vy + 0.5 * dt * a2y, vz + 0.5 * dt * a2z
                a3x, a3y, a3z = _accel(k, g, b3x, b3y, b3z)
                b4x, b4y, b4z = vx + dt * a3x, vy + dt * a3y, vz + dt * a3z
                a4x, a4y, a4z = _accel(k, g, b4x, b4y, b4z)
                nx = x + dt / 6.0 * (vx + 2.0 * b2x + 2.0 * b3x + b4x)
                ny = y + dt / 6.0 * (vy + 2.0 * b2y + 2.0 * b3y + b4y)
                nz = z + dt / 6.0 * (vz + 2.0 * b2z + 2.0 * b3z + b4z)
                nvx = vx + dt / 6.0 * (a1x + 2.0 * a2x + 2.0 * a3x + a4x)
                nvy = vy + dt / 6.0 * (a1y + 2.0 * a2y + 2.0 * a3y + a4y)
                nvz = vz + dt / 6.0 * (a1z + 2.0 * a2z + 2.0 * a3z + a4z)
                while next_wall[lane] < nw and nx >= walls[next_wall[lane]]:
                    j = next_wall[lane]
                    f = _crossing_fraction(x, nx, vx, nvx, dt, walls[j])
                    hits[i, j, 0] = _hermite(y, ny, vy, nvy, dt, f)
                    hits[i, j, 1] = _hermite(z, nz, vz, nvz, dt, f)
                    hits[i, j, 2] = t + f * dt
                    next_wall[lane] = j + 1
                if next_wall[lane] == nw:
                    done = _IMPACT
                else:
                    st[lane, 0], st[lane, 1], st[lane, 2] = nx, ny, nz
                    st[lane, 3], st[lane, 4], st[lane, 5] = nvx, nvy, nvz
                    st[lane, 6] = t + dt
                    if nz < floor_z:
                        done = _FLOOR
            # Non-finite states never satisfy the comparisons above and end as timeouts.
            if done >= 0:
                codes[i] = done
                if nxt < n:
                    owner[lane] = nxt
                    st[lane, 0:3] = pos[nxt]
                    st[lane, 3:6] = vel[nxt]
                    st[lane, 6] = 0.0
                    kd[lane] = kdrag[nxt]
                    next_wall[lane] = 0
                    nxt += 1
                else:
                    owner[lane] = -1
                    active -= 1
    return hits, codes


def _drag_constants(mass, radius, air: AirModel):
    if not air.drag_enabled:
        return np.zeros_like(mass)
    return air.air_density * air.drag_coefficient * math.pi * radius**2 / (2.0 * mass)


def _check_droplet(d: Droplet):
    values = (d.mass, d.radius, *d.position, *d.velocity)
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"non-finite droplet state: {d}")
    if d.mass <= 0 or d.radius <= 0:
        raise ValueError(f"droplet mass and radius must be positive: {d}")


def fly_to_walls(droplets: Sequence[Droplet], distances: Sequence[float], air: AirModel,
                 lanes: int = DEFAULT_LANES) -> list[list[FlightOutcome]]:
    """Fly every droplet once and report its outcome for each wall distance.

    The wall plane never influences a trajectory before it is crossed, so one
    integration serves all distances; outcome ``[j][i]`` equals
    ``simulate_flight(droplets[i], distances[j], air)``.
    """
    dist = np.asarray(distances, dtype=float)
    if dist.ndim != 1 or dist.size == 0 or not np.all(dist > 0):
        raise ConfigError("wall_distance: must be > 0")
    order = np.argsort(dist, kind="stable")
    n = len(droplets)
    if n == 0:
        return [[] for _ in dist]
    for d in droplets:
        _check_droplet(d)
    mass = np.array([d.mass for d in droplets])
    radius = np.array([d.radius for d in droplets])
    pos = np.array([d.position for d in droplets], dtype=float)
    vel = np.array([d.velocity for d in droplets], dtype=float)
    hits, codes = _fly(pos, vel, _drag_constants(mass, radius, air), dist[order], air.gravity,
                       air.dt, -air.emitter_height, air.timeout, max(1, int(lanes)))
    out: list[list[FlightOutcome]] = [None] * len(dist)  # type: ignore[list-item]
    for j_sorted, j in enumerate(order):
        col = hits[:, j_sorted, :]
        crossed = ~np.isnan(col[:, 0])
        out[j] = [Impact(float(col[i, 0]), float(col[i, 1]), float(col[i, 2])) if crossed[i]
                  else _MISS_BY_CODE[int(codes[i])] for i in range(n)]
    return out


def simulate_flight(droplet: Droplet, wall_distance: float, air: AirModel) -> FlightOutcome:
    return fly_to_walls([droplet], [wall_distance], air, lanes=1)[0][0]


def run_emission(params: EmissionParams, wall_distance: float, air: AirModel,
                 lanes: int = DEFAULT_LANES) -> list[FlightOutcome]:
    droplets = sample_droplets(params, air.droplet_density)
    return fly_to_walls(droplets, [wall_distance], air, lanes)[0]
