"""Tractive energy demand, fuel energy, CO2 mass and driving-mode statistics.

The instantaneous power demand on the car is  m*a*v + f0*v + f2*v^3.
Braking demands nothing (the engine does not power the wheels) and neither
does idling (the engine is assumed off while stopped). Fuel energy is the
tractive energy divided by the drivetrain efficiency, and CO2 follows from
fuel energy via the fixed carbon-content / oxidation constants.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .dynamics import Trajectory, TrajectorySample, VehicleSpec, advance

# grams of carbon per kJ of fuel energy, fraction oxidized, CO2/C mass ratio
CARBON_CONTENT_G_PER_KJ = 0.0196
OXIDATION_FRACTION = 0.99
CO2_TO_CARBON_MASS_RATIO = 44.0 / 12.0
CO2_G_PER_FUEL_KJ = CARBON_CONTENT_G_PER_KJ * OXIDATION_FRACTION * CO2_TO_CARBON_MASS_RATIO

TRAJECTORY_HEADER = ("time_s", "speed_mps", "accel_mps2")

UNIFORM_STEP_TOL = 1e-9


class SchemaError(ValueError):
    """Trajectory CSV stream does not match the documented schema."""


class MonotonicityError(ValueError):
    """Trajectory CSV rows are not strictly increasing in time."""


class NonUniformStep(ValueError):
    """Trajectory sample spacing varies by more than the tolerance."""


@dataclass(frozen=True)
class ModeThresholds:
    """Classification thresholds: |a| <= accel_epsilon counts as cruising,
    v <= idle_speed counts as idling."""

    accel_epsilon: float = 0.05
    idle_speed: float = 0.1

    def __post_init__(self):
        if self.accel_epsilon <= 0.0 or self.idle_speed <= 0.0:
            raise ValueError("thresholds must be > 0")


DEFAULT_THRESHOLDS = ModeThresholds()


@dataclass(frozen=True)
class ModeDurations:
    accelerating: float
    decelerating: float
    cruising: float
    idling: float

    @property
    def total(self) -> float:
        return self.accelerating + self.decelerating + self.cruising + self.idling


@dataclass(frozen=True)
class EnergyReport:
    """Energy, emission and driving-mode summary of one trajectory."""

    e_inst_j: float
    e_fuel_j: float
    co2_g: float
    mode_durations: ModeDurations
    mean_speed_mps: float
    speed_stddev_mps: float
    trip_time_s: float

    @property
    def e_fuel_kj(self) -> float:
        return self.e_fuel_j / 1000.0


def co2_from_fuel(e_fuel_j: float) -> float:
    """CO2 mass in grams emitted by expending e_fuel_j joules of fuel."""
    return (e_fuel_j / 1000.0) * CO2_G_PER_FUEL_KJ


def instantaneous_power(
    spec: VehicleSpec,
    v: float,
    a: float,
    thresholds: ModeThresholds = DEFAULT_THRESHOLDS,
) -> float:
    """Instantaneous tractive power demand in watts.

    Zero while braking (a below the cruise band) or idling (v at or below
    the idle speed); otherwise m*a*v + f0*v + f2*v^3.
    """
    if v < 0.0:
        raise ValueError(f"speed must be >= 0, got {v}")
    if a < -thresholds.accel_epsilon or v <= thresholds.idle_speed:
        return 0.0
    return spec.mass * a * v + spec.f0 * v + spec.f2 * v**3


def _check_uniform(t: np.ndarray) -> float:
    steps = np.diff(t)
    dt = steps[0]
    if np.any(np.abs(steps - dt) > UNIFORM_STEP_TOL):
        raise NonUniformStep("sample spacing varies by more than 1e-9 s")
    return float(dt)


def energy_of(
    trajectory: Trajectory,
    spec: VehicleSpec,
    thresholds: ModeThresholds = DEFAULT_THRESHOLDS,
) -> EnergyReport:
    """Score a trajectory: left-endpoint energy sum plus mode statistics.

    Each of the N-1 steps is charged at the power demand of its starting
    sample and classified into exactly one driving mode, so the mode
    durations add up to the trip time.
    """
    samples = trajectory.samples
    if len(samples) < 2:
        raise ValueError("trajectory must hold at least two samples")
    t = np.array([s.t for s in samples])
    v = np.array([s.speed for s in samples])
    a = np.array([s.accel for s in samples])
    dt = _check_uniform(t)

    vs, accs = v[:-1], a[:-1]
    eps, idle = thresholds.accel_epsilon, thresholds.idle_speed
    powered = ~((accs < -eps) | (vs <= idle))
    power = np.where(powered, spec.mass * accs * vs + spec.f0 * vs + spec.f2 * vs**3, 0.0)
    e_inst = float(power.sum()) * dt
    e_fuel = e_inst / spec.eta

    accel_mask = accs > eps
    decel_mask = accs < -eps
    idle_mask = (vs <= idle) & ~accel_mask & ~decel_mask
    cruise_mask = ~(accel_mask | decel_mask | idle_mask)
    durations = ModeDurations(
        accelerating=float(accel_mask.sum()) * dt,
        decelerating=float(decel_mask.sum()) * dt,
        cruising=float(cruise_mask.sum()) * dt,
        idling=float(idle_mask.sum()) * dt,
    )

    return EnergyReport(
        e_inst_j=e_inst,
        e_fuel_j=e_fuel,
        co2_g=co2_from_fuel(e_fuel),
        mode_durations=durations,
        mean_speed_mps=float(v.mean()),
        speed_stddev_mps=float(v.std()),
        trip_time_s=float(t[-1] - t[0]),
    )


def write_trajectory_csv(trajectory: Trajectory, stream: IO[str]) -> None:
    """Write the trajectory in the documented CSV schema (header bit-exact)."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(TRAJECTORY_HEADER)
    for s in trajectory.samples:
        writer.writerow((repr(s.t), repr(s.speed), repr(s.accel)))


def ingest_trajectory(stream: IO[str] | Iterable[str]) -> Trajectory:
    """Parse a trajectory CSV stream into a Trajectory.

    The header must be exactly time_s,speed_mps with an optional trailing
    accel_mps2 column. When the acceleration column is absent it is
    back-filled from consecutive speeds. Positions are reconstructed by
    integrating from zero with the same stepping rule the simulator uses.
    """
    if isinstance(stream, (str, bytes)):
        raise TypeError("pass an open text stream, not a path or string")
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("empty stream: missing header row") from None
    header = tuple(h.strip() for h in header)
    if header == TRAJECTORY_HEADER[:2]:
        has_accel = False
    elif header == TRAJECTORY_HEADER:
        has_accel = True
    else:
        raise SchemaError(
            f"header must be {','.join(TRAJECTORY_HEADER[:2])}[,{TRAJECTORY_HEADER[2]}], "
            f"got {','.join(header)}"
        )

    times: list[float] = []
    speeds: list[float] = []
    accels: list[float] = []
    for rownum, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise SchemaError(f"row {rownum}: expected {len(header)} columns, got {len(row)}")
        try:
            t = float(row[0])
            v = float(row[1])
            a = float(row[2]) if has_accel else 0.0
        except ValueError as exc:
            raise SchemaError(f"row {rownum}: {exc}") from None
        if v < 0.0:
            raise ValueError(f"row {rownum}: negative speed {v}")
        if times and t <= times[-1]:
            raise MonotonicityError(f"row {rownum}: time {t} does not increase past {times[-1]}")
        times.append(t)
        speeds.append(v)
        accels.append(a)

    if len(times) < 2:
        raise SchemaError("trajectory needs at least two data rows")

    if not has_accel:
        for k in range(len(times) - 1):
            accels[k] = (speeds[k + 1] - speeds[k]) / (times[k + 1] - times[k])
        accels[-1] = 0.0

    samples = [TrajectorySample(times[0], 0.0, speeds[0], accels[0])]
    for k in range(1, len(times)):
        dt = times[k] - times[k - 1]
        stepped = advance(samples[-1], accels[k - 1], dt)
        samples.append(TrajectorySample(times[k], stepped.position, speeds[k], accels[k]))
    return Trajectory(tuple(samples), street_length=samples[-1].position)


def dumps_trajectory(trajectory: Trajectory) -> str:
    buf = io.StringIO()
    write_trajectory_csv(trajectory, buf)
    return buf.getvalue()
