"""Kinematic primitives for trajectories on a one-dimensional street.

Positions are meters from the street entry, speeds m/s, accelerations m/s^2,
times seconds. Trajectories are synthesized with piecewise-constant
acceleration per step; if a braking step would take the speed below zero,
the speed is clamped at zero and the position advances only for the moving
fraction of the step (a stopping car does not reverse).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

MPH_TO_MPS = 0.44704

# Tolerance for the pairwise kinematic-consistency check between samples.
CONSISTENCY_TOL = 1e-9


class SpecError(ValueError):
    """A vehicle or limits record violates one of its invariants."""


@dataclass(frozen=True)
class VehicleSpec:
    """Road-load coefficients of one car.

    mass in kg, f0 the rolling-resistance term in N, f2 the aerodynamic
    drag term in N*s^2/m^2, eta the drivetrain efficiency (fraction of
    fuel energy that reaches the wheel, in (0, 1]).
    """

    mass: float
    f0: float
    f2: float
    eta: float
    label: str = ""

    def __post_init__(self):
        if self.mass <= 0.0:
            raise SpecError(f"mass must be > 0, got {self.mass}")
        if self.f0 < 0.0 or self.f2 < 0.0:
            raise SpecError(f"f0/f2 must be >= 0, got f0={self.f0}, f2={self.f2}")
        if not (0.0 < self.eta <= 1.0):
            raise SpecError(f"eta must be in (0, 1], got {self.eta}")


# 2023 EPA-style road-load coefficients for the two evaluation cars.
CAMRY = VehicleSpec(mass=1644.0, f0=113.82, f2=0.36, eta=0.21, label="camry")
HIGHLANDER = VehicleSpec(mass=2040.8, f0=139.7, f2=0.56, eta=0.21, label="highlander")

VEHICLES = {v.label: v for v in (CAMRY, HIGHLANDER)}


@dataclass(frozen=True)
class KinematicLimits:
    """Street speed limit plus the acceleration envelope of the car.

    a_accel and a_decel are comfort rates, a_emergency is the hard-braking
    rate for the uninformed stop; all three are positive magnitudes.
    """

    v_max: float = 13.4
    a_accel: float = 2.6
    a_decel: float = 4.5
    a_emergency: float = 9.0
    dt: float = 0.5

    def __post_init__(self):
        if self.v_max <= 0.0:
            raise SpecError(f"v_max must be > 0, got {self.v_max}")
        if self.a_accel <= 0.0:
            raise SpecError(f"a_accel must be > 0, got {self.a_accel}")
        if not (0.0 < self.a_decel <= self.a_emergency):
            raise SpecError(
                f"need 0 < a_decel <= a_emergency, got {self.a_decel}, {self.a_emergency}"
            )
        if self.dt <= 0.0:
            raise SpecError(f"dt must be > 0, got {self.dt}")


DEFAULT_LIMITS = KinematicLimits()


@dataclass(frozen=True)
class TrajectorySample:
    """One state sample: the accel field is the acceleration applied over
    the step that starts at this sample."""

    t: float
    position: float
    speed: float
    accel: float = 0.0


def advance(state: TrajectorySample, accel: float, dt: float) -> TrajectorySample:
    """Step the kinematic state forward by dt under constant acceleration.

    If the speed would cross zero inside the step it is clamped at zero and
    the position advances only while the car is still moving (v^2 / 2|a|).
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    v0 = state.speed
    v1 = v0 + accel * dt
    if v1 < 0.0:
        # zero crossing at t* = v0/|a|; beyond it the car sits still
        dpos = v0 * v0 / (2.0 * -accel)
        return TrajectorySample(state.t + dt, state.position + dpos, 0.0, accel)
    dpos = v0 * dt + 0.5 * accel * dt * dt
    return TrajectorySample(state.t + dt, state.position + dpos, v1, accel)


def braking_distance(v: float, a_brake: float) -> float:
    """Distance covered while braking from speed v to rest at rate a_brake."""
    if v < 0.0:
        raise ValueError(f"v must be >= 0, got {v}")
    if a_brake <= 0.0:
        raise ValueError(f"a_brake must be > 0, got {a_brake}")
    return v * v / (2.0 * a_brake)


def time_to_reach(samples: Sequence[TrajectorySample], target_position: float) -> float:
    """Earliest time at which the sampled profile reaches target_position.

    Linearly interpolates within a step; returns +inf if the profile never
    gets there. A target at or behind the first sample returns its time.
    """
    if not samples:
        return math.inf
    if samples[0].position >= target_position:
        return samples[0].t
    for prev, cur in zip(samples, samples[1:]):
        if cur.position >= target_position:
            gained = cur.position - prev.position
            if gained <= 0.0:
                return cur.t
            frac = (target_position - prev.position) / gained
            return prev.t + frac * (cur.t - prev.t)
    return math.inf


def position_at(samples: Sequence[TrajectorySample], t: float) -> float:
    """Position at time t, linearly interpolated; clamped to the ends."""
    if not samples:
        raise ValueError("empty sample list")
    if t <= samples[0].t:
        return samples[0].position
    for prev, cur in zip(samples, samples[1:]):
        if cur.t >= t:
            span = cur.t - prev.t
            if span <= 0.0:
                return cur.position
            frac = (t - prev.t) / span
            return prev.position + frac * (cur.position - prev.position)
    return samples[-1].position


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled trajectory covering a full street traversal."""

    samples: tuple[TrajectorySample, ...]
    street_length: float

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))

    @property
    def dt(self) -> float:
        if len(self.samples) < 2:
            raise ValueError("trajectory needs at least two samples to have a dt")
        return self.samples[1].t - self.samples[0].t

    @property
    def duration(self) -> float:
        return self.samples[-1].t - self.samples[0].t

    def validate(self) -> None:
        """Check the structural invariants; raises ValueError on violation."""
        if len(self.samples) < 2:
            raise ValueError("trajectory must hold at least two samples")
        if abs(self.samples[0].t) > CONSISTENCY_TOL:
            raise ValueError(f"first sample must be at t=0, got {self.samples[0].t}")
        if self.samples[-1].position < self.street_length - CONSISTENCY_TOL:
            raise ValueError("trajectory ends before the street does")
        dt = self.dt
        for prev, cur in zip(self.samples, self.samples[1:]):
            if abs((cur.t - prev.t) - dt) > CONSISTENCY_TOL:
                raise ValueError("non-uniform time step")
            if cur.speed < 0.0 or prev.speed < 0.0:
                raise ValueError("negative speed")
            if cur.position < prev.position - CONSISTENCY_TOL:
                raise ValueError("position decreased")
            expected = advance(prev, prev.accel, dt)
            if (
                abs(expected.position - cur.position) > 1e-6
                or abs(expected.speed - cur.speed) > 1e-6
            ):
                raise ValueError(
                    f"kinematic inconsistency at t={prev.t}: "
                    f"expected ({expected.position}, {expected.speed}), "
                    f"got ({cur.position}, {cur.speed})"
                )

    def with_final_accel_zeroed(self) -> "Trajectory":
        last = replace(self.samples[-1], accel=0.0)
        return Trajectory(self.samples[:-1] + (last,), self.street_length)
