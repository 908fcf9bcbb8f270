"""Alert-driven speed controllers and the collision-freedom check.

A crossing alert i carries a location L_i and an end time e_i. From a car
position C and clock time t the maximum safe speed for that crossing is
(L_i - C)/(e_i - t): hold it and the car reaches L_i exactly when the
crossing clears. The informed controllers re-evaluate this quantity every
simulation step, so the commanded speed ceiling is always the minimum over
the speed limit and the still-relevant crossings ahead. Braking toward a
ceiling uses the comfort rate; the final partial step lands exactly on the
arrival invariant, which keeps cruise acceleration identically zero and
arrival times tight against the crossing-end times.

Policies:
  option1      adopt every speed-reducing alert the moment it arrives
  option2      defer farther alerts until the nearest pending crossing is
               cleared, then decelerate for them
  sudden_stop  ignore alerts; emergency-brake to a 1 m standoff when an
               active crossing comes within braking range, idle until it
               clears, then resume
  no_peds      cruise at the speed limit (baseline, alerts ignored)
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

from .dynamics import (
    KinematicLimits,
    Trajectory,
    TrajectorySample,
    advance,
    braking_distance,
    position_at,
    time_to_reach,
)

# Extra remaining-crossing-time allowed past street_width/pedestrian_speed;
# absorbs rounded crossing durations in published parameter sets.
CROSSING_TIME_SLACK = 1.0

# Slack on arrival-versus-crossing-end comparisons (float noise only).
ARRIVAL_TOL = 1e-6

# Standoff of the sudden-stop resting point upstream of the crossing.
STANDOFF_M = 1.0

_EPS = 1e-9


class MalformedScenario(ValueError):
    """Alert set violates its invariants (ordering, timing, geometry)."""


class InfeasibleConstraint(RuntimeError):
    """An adopted alert cannot be satisfied even with emergency braking."""


class PolicyId(Enum):
    OPTION1 = "option1"
    OPTION2 = "option2"
    NO_PEDS = "no_peds"
    SUDDEN_STOP = "sudden_stop"


class Arbitration(Enum):
    ADOPT_DIRECTLY = "adopt_directly"
    MUST_DECELERATE_NOW = "must_decelerate_now"
    MAY_DEFER = "may_defer"


@dataclass(frozen=True)
class AlertEvent:
    """One crossing alert.

    receipt_time is when the message reaches the car, crossing_end when the
    pedestrians are clear. crossing_start defaults to the receipt time (the
    message goes out as the crossing begins).
    """

    ordinal: int
    receipt_time: float
    location: float
    crossing_end: float
    pedestrian_speed: float
    street_width: float
    crossing_start: Optional[float] = None

    def __post_init__(self):
        if self.crossing_start is None:
            object.__setattr__(self, "crossing_start", self.receipt_time)
        if self.ordinal < 1:
            raise MalformedScenario(f"ordinal must be >= 1, got {self.ordinal}")
        if self.crossing_end <= self.receipt_time:
            raise MalformedScenario(
                f"alert {self.ordinal}: crossing_end {self.crossing_end} "
                f"not after receipt {self.receipt_time}"
            )
        if self.pedestrian_speed <= 0.0 or self.street_width <= 0.0:
            raise MalformedScenario("pedestrian_speed and street_width must be > 0")
        full_crossing = self.street_width / self.pedestrian_speed
        if self.crossing_end - self.receipt_time > full_crossing + CROSSING_TIME_SLACK:
            raise MalformedScenario(
                f"alert {self.ordinal}: remaining time "
                f"{self.crossing_end - self.receipt_time:.3f}s exceeds the full "
                f"crossing time {full_crossing:.3f}s"
            )
        if self.crossing_start > self.receipt_time:
            raise MalformedScenario(
                f"alert {self.ordinal}: receipt precedes crossing start"
            )


class ConstraintStatus(Enum):
    PENDING = "pending"
    GOVERNING = "governing"
    PASSED = "passed"


@dataclass
class ActiveConstraint:
    alert: AlertEvent
    v_safe: float
    status: ConstraintStatus = ConstraintStatus.PENDING
    deferred: bool = False

    def pending_at(self, t: float, pos: float) -> bool:
        """Still ahead of the car and its crossing not yet over."""
        return pos < self.alert.location - _EPS and t < self.alert.crossing_end - _EPS


@dataclass(frozen=True)
class PolicyEvent:
    t: float
    alert_ordinal: int
    kind: str


@dataclass(frozen=True)
class PolicyRun:
    policy: PolicyId
    trajectory: Trajectory
    alerts: tuple[AlertEvent, ...]
    constraints: tuple[ActiveConstraint, ...]
    decisions: tuple[PolicyEvent, ...]


def safe_speed(prev_v_safe: float, car_position: float, alert: AlertEvent, now: float) -> float:
    """Maximum safe speed given a previous ceiling and one alert.

    Evaluated at the car's current position and clock time; for the first
    alert the previous ceiling is the street speed limit. A crossing that
    is already over, or already behind the car, leaves the ceiling alone.
    """
    if prev_v_safe <= 0.0:
        raise ValueError(f"prev_v_safe must be > 0, got {prev_v_safe}")
    if now >= alert.crossing_end:
        return prev_v_safe
    if car_position >= alert.location:
        return prev_v_safe
    ratio = (alert.location - car_position) / (alert.crossing_end - now)
    return min(prev_v_safe, ratio)


def arbitration(
    current: Optional[ActiveConstraint], incoming: AlertEvent, car_position: float
) -> Arbitration:
    """Decide how a speed-reducing alert may be handled.

    With no governing constraint the alert is simply adopted. A crossing at
    or nearer than the governing one forces immediate deceleration; a
    farther one leaves the choice of deferring open.
    """
    if car_position >= incoming.location:
        raise ValueError("incoming alert already passed")
    if current is None:
        return Arbitration.ADOPT_DIRECTLY
    if incoming.location <= current.alert.location:
        return Arbitration.MUST_DECELERATE_NOW
    return Arbitration.MAY_DEFER


def collision_free(run: PolicyRun) -> bool:
    """True iff the car never occupies a crossing while it is in use.

    For each alert the car must reach the crossing location no earlier than
    the crossing end, unless it had already passed that location before the
    alert went out.
    """
    samples = run.trajectory.samples
    for alert in run.alerts:
        if position_at(samples, alert.receipt_time) >= alert.location:
            continue
        reached = time_to_reach(samples, alert.location)
        if reached < alert.crossing_end - ARRIVAL_TOL:
            return False
    return True


def validate_alerts(alerts: Sequence[AlertEvent], street_length: float) -> None:
    for prev, cur in zip(alerts, alerts[1:]):
        if cur.receipt_time < prev.receipt_time:
            raise MalformedScenario("alerts must be sorted by receipt time")
    for alert in alerts:
        if not (0.0 <= alert.location <= street_length):
            raise MalformedScenario(
                f"alert {alert.ordinal}: location {alert.location} outside the street"
            )


def run_policy(
    policy: PolicyId,
    alerts: Sequence[AlertEvent],
    limits: KinematicLimits,
    street_length: float,
) -> PolicyRun:
    """Simulate one full street traversal under the given policy.

    The car enters at position 0 at the speed limit at t=0. Alerts whose
    receipt time falls between grid points are processed at the next step.
    """
    if street_length <= 0.0:
        raise MalformedScenario(f"street_length must be > 0, got {street_length}")
    alerts = tuple(alerts)
    validate_alerts(alerts, street_length)
    if policy is PolicyId.NO_PEDS:
        return _cruise_run(policy, alerts, limits, street_length)
    if policy is PolicyId.SUDDEN_STOP:
        return _sudden_stop_run(alerts, limits, street_length)
    return _informed_run(policy, alerts, limits, street_length)


# ---------------------------------------------------------------------------
# shared pieces


def _clamp(a: float, lo: float, hi: float) -> float:
    return lo if a < lo else hi if a > hi else a


def _step_cap(street_length: float, alerts: Sequence[AlertEvent], limits: KinematicLimits) -> int:
    last_end = max((a.crossing_end for a in alerts), default=0.0)
    horizon = last_end + street_length / limits.v_max + 300.0
    return int(horizon / limits.dt) + 10


def _constraint_accel(
    pos: float, v: float, t: float, location: float, end: float, dt: float
) -> float:
    """Acceleration that puts the car exactly on the arrival invariant of
    one crossing at the end of the step; +inf when the crossing no longer
    restricts this step."""
    if pos >= location - _EPS:
        return math.inf
    remaining_next = end - (t + dt)
    if remaining_next <= 0.0:
        return math.inf
    dist_next = location - pos - v * dt
    return (dist_next - v * remaining_next) / (dt * (remaining_next + 0.5 * dt))


def _finish(
    policy: PolicyId,
    samples: list[TrajectorySample],
    street_length: float,
    alerts: tuple[AlertEvent, ...],
    constraints: Sequence[ActiveConstraint] = (),
    decisions: Sequence[PolicyEvent] = (),
) -> PolicyRun:
    samples[-1] = replace(samples[-1], accel=0.0)
    traj = Trajectory(tuple(samples), street_length)
    traj.validate()
    return PolicyRun(policy, traj, alerts, tuple(constraints), tuple(decisions))


def _cruise_run(
    policy: PolicyId,
    alerts: tuple[AlertEvent, ...],
    limits: KinematicLimits,
    street_length: float,
) -> PolicyRun:
    dt = limits.dt
    cur = TrajectorySample(0.0, 0.0, limits.v_max, 0.0)
    samples = [cur]
    for _ in range(_step_cap(street_length, alerts, limits)):
        if cur.position >= street_length:
            break
        a = _clamp((limits.v_max - cur.speed) / dt, -limits.a_decel, limits.a_accel)
        samples[-1] = replace(cur, accel=a)
        cur = advance(samples[-1], a, dt)
        samples.append(cur)
    else:
        raise RuntimeError("cruise run exceeded its step budget")
    return _finish(policy, samples, street_length, alerts)


# ---------------------------------------------------------------------------
# informed controllers (option 1 / option 2)


class _InformedController:
    def __init__(
        self,
        policy: PolicyId,
        alerts: tuple[AlertEvent, ...],
        limits: KinematicLimits,
        street_length: float,
    ):
        self.policy = policy
        self.limits = limits
        self.street_length = street_length
        self.inbox = deque(alerts)
        self.tracked: list[ActiveConstraint] = []
        self.decisions: list[PolicyEvent] = []

    # -- constraint bookkeeping

    def _mark_passed(self, pos: float) -> None:
        for c in self.tracked:
            if c.status is not ConstraintStatus.PASSED and pos >= c.alert.location - _EPS:
                c.status = ConstraintStatus.PASSED

    def _ceiling(self, t: float, pos: float) -> float:
        """Current commanded speed entitlement: the speed limit capped by
        every non-deferred crossing still ahead and in use."""
        ceiling = self.limits.v_max
        for c in self.tracked:
            if c.deferred or c.status is ConstraintStatus.PASSED:
                continue
            if not c.pending_at(t, pos):
                continue
            ratio = (c.alert.location - pos) / (c.alert.crossing_end - t)
            ceiling = min(ceiling, ratio)
        return ceiling

    def _arbitration_reference(self, t: float, pos: float) -> Optional[ActiveConstraint]:
        """Most recently received alert that is still relevant."""
        for c in reversed(self.tracked):
            if c.pending_at(t, pos):
                return c
        return None

    def _check_feasible(self, alert: AlertEvent, t: float, pos: float, v: float) -> None:
        dist = alert.location - pos
        if dist <= 0.0:
            return
        a_em = self.limits.a_emergency
        if braking_distance(v, a_em) < dist:
            return  # can come to rest short of the crossing
        reach = (v - math.sqrt(max(v * v - 2.0 * a_em * dist, 0.0))) / a_em
        if t + reach < alert.crossing_end - ARRIVAL_TOL:
            raise InfeasibleConstraint(
                f"alert {alert.ordinal} at {alert.location} m cannot be honored: "
                f"emergency braking reaches it at t={t + reach:.2f}s, "
                f"crossing clears at t={alert.crossing_end:.2f}s"
            )

    def _defer_is_safe(self, alert: AlertEvent, t: float, pos: float, v: float) -> bool:
        """Worst-case check that deceleration can wait for the promotion.

        Assume the car holds its current entitlement until the farthest
        crossing still gating this one, then comfort-brakes.
        """
        gate = None
        for c in self.tracked:
            if c.status is ConstraintStatus.PASSED or not c.pending_at(t, pos):
                continue
            if c.alert.location < alert.location:
                if gate is None or c.alert.location > gate:
                    gate = c.alert.location
        if gate is None:
            return False
        v_hold = max(v, self._ceiling(t, pos))
        if v_hold <= 0.0:
            return True
        d_after = alert.location - gate
        a = self.limits.a_decel
        if braking_distance(v_hold, a) <= d_after - 0.5:
            return True
        t_gate = t + (gate - pos) / v_hold
        reach = (v_hold - math.sqrt(max(v_hold * v_hold - 2.0 * a * d_after, 0.0))) / a
        return t_gate + reach >= alert.crossing_end - ARRIVAL_TOL

    # -- alert delivery and promotion

    def deliver(self, alert: AlertEvent, t: float, pos: float, v: float) -> None:
        if pos >= alert.location - _EPS:
            self.tracked.append(
                ActiveConstraint(alert, self._ceiling(t, pos), ConstraintStatus.PASSED)
            )
            self.decisions.append(PolicyEvent(t, alert.ordinal, "vacuous_passed"))
            return
        if t >= alert.crossing_end - _EPS:
            self.tracked.append(ActiveConstraint(alert, self._ceiling(t, pos)))
            self.decisions.append(PolicyEvent(t, alert.ordinal, "vacuous_expired"))
            return

        ceiling = self._ceiling(t, pos)
        v_safe = safe_speed(ceiling, pos, alert, t)
        record = ActiveConstraint(alert, v_safe)
        ratio = (alert.location - pos) / (alert.crossing_end - t)
        if ratio >= ceiling - _EPS:
            # no deceleration demanded; the crossing joins the watch list
            self.tracked.append(record)
            self.decisions.append(PolicyEvent(t, alert.ordinal, "adopt_nonbinding"))
            return

        reference = self._arbitration_reference(t, pos)
        outcome = arbitration(reference, alert, pos)
        self.decisions.append(PolicyEvent(t, alert.ordinal, outcome.value))
        if (
            outcome is Arbitration.MAY_DEFER
            and self.policy is PolicyId.OPTION2
            and self._defer_is_safe(alert, t, pos, v)
        ):
            record.deferred = True
            self.decisions.append(PolicyEvent(t, alert.ordinal, "deferred"))
        else:
            self._check_feasible(alert, t, pos, v)
        self.tracked.append(record)

    def promote_deferred(self, t: float, pos: float, v: float) -> None:
        for c in self.tracked:
            if not c.deferred or not c.pending_at(t, pos):
                continue
            gated = any(
                other is not c
                and other.pending_at(t, pos)
                and other.alert.location < c.alert.location
                for other in self.tracked
            )
            if not gated:
                c.deferred = False
                c.v_safe = safe_speed(self._ceiling(t, pos), pos, c.alert, t)
                self._check_feasible(c.alert, t, pos, v)
                self.decisions.append(PolicyEvent(t, c.alert.ordinal, "promoted"))

    # -- per-step command

    def command(self, t: float, pos: float, v: float) -> float:
        dt = self.limits.dt
        best = (self.limits.v_max - v) / dt
        governing = None
        governing_ratio = self.limits.v_max
        for c in self.tracked:
            if c.deferred or c.status is ConstraintStatus.PASSED:
                continue
            if not c.pending_at(t, pos):
                continue
            best = min(best, _constraint_accel(pos, v, t, c.alert.location, c.alert.crossing_end, dt))
            ratio = (c.alert.location - pos) / (c.alert.crossing_end - t)
            if ratio < governing_ratio:
                governing_ratio = ratio
                governing = c
        for c in self.tracked:
            if c.status is ConstraintStatus.PASSED:
                continue
            c.status = ConstraintStatus.GOVERNING if c is governing else ConstraintStatus.PENDING
        return _clamp(best, -self.limits.a_decel, self.limits.a_accel)


def _informed_run(
    policy: PolicyId,
    alerts: tuple[AlertEvent, ...],
    limits: KinematicLimits,
    street_length: float,
) -> PolicyRun:
    dt = limits.dt
    ctl = _InformedController(policy, alerts, limits, street_length)
    cur = TrajectorySample(0.0, 0.0, limits.v_max, 0.0)
    samples = [cur]
    for _ in range(_step_cap(street_length, alerts, limits)):
        if cur.position >= street_length:
            break
        t, pos, v = cur.t, cur.position, cur.speed
        ctl._mark_passed(pos)
        while ctl.inbox and ctl.inbox[0].receipt_time <= t + _EPS:
            ctl.deliver(ctl.inbox.popleft(), t, pos, v)
        if policy is PolicyId.OPTION2:
            ctl.promote_deferred(t, pos, v)
        a = ctl.command(t, pos, v)
        samples[-1] = replace(cur, accel=a)
        cur = advance(samples[-1], a, dt)
        samples.append(cur)
    else:
        raise RuntimeError(f"{policy.value} run exceeded its step budget")
    ctl._mark_passed(cur.position)
    return _finish(policy, samples, street_length, alerts, ctl.tracked, ctl.decisions)


# ---------------------------------------------------------------------------
# sudden stop


def _sudden_stop_run(
    alerts: tuple[AlertEvent, ...],
    limits: KinematicLimits,
    street_length: float,
) -> PolicyRun:
    """Uninformed driver: reacts only on seeing pedestrians at close range.

    When the gap to the stop point (1 m short of the nearest in-use
    crossing) shrinks to the emergency braking distance, the driver commits
    to a stop, waits out the crossing, and accelerates back to the limit.
    """
    dt = limits.dt
    cur = TrajectorySample(0.0, 0.0, limits.v_max, 0.0)
    samples = [cur]
    target: Optional[AlertEvent] = None
    brake_rate = 0.0

    def active_crossings(t: float, pos: float) -> list[AlertEvent]:
        return [
            a
            for a in alerts
            if a.crossing_start <= t < a.crossing_end and pos < a.location - _EPS
        ]

    def aim_at(alert: AlertEvent, pos: float, v: float) -> float:
        gap = alert.location - STANDOFF_M - pos
        if gap > _EPS:
            return min(limits.a_emergency, v * v / (2.0 * gap))
        return limits.a_emergency

    for _ in range(_step_cap(street_length, alerts, limits)):
        if cur.position >= street_length:
            break
        t, pos, v = cur.t, cur.position, cur.speed

        if target is not None and v <= 0.0 and t >= target.crossing_end - _EPS:
            target = None  # waited out the crossing; resume
        if target is not None:
            if v <= 0.0:
                a = 0.0  # idling at the standoff point
            else:
                # a nearer crossing appearing mid-brake retargets the stop
                for al in active_crossings(t, pos):
                    if al.location < target.location:
                        target = al
                        brake_rate = aim_at(al, pos, v)
                a = -brake_rate
        else:
            candidates = active_crossings(t, pos)
            if candidates:
                nearest = min(candidates, key=lambda al: al.location)
                gap = nearest.location - STANDOFF_M - pos
                if gap <= braking_distance(v, limits.a_emergency) + v * dt:
                    target = nearest
                    brake_rate = aim_at(nearest, pos, v)
            if target is not None:
                a = -brake_rate
            else:
                a = _clamp((limits.v_max - v) / dt, -limits.a_decel, limits.a_accel)

        samples[-1] = replace(cur, accel=a)
        cur = advance(samples[-1], a, dt)
        samples.append(cur)
    else:
        raise RuntimeError("sudden-stop run exceeded its step budget")
    return _finish(PolicyId.SUDDEN_STOP, samples, street_length, alerts)
