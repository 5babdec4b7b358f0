"""Mission supervision: flight modes, waypoint sanitation, dispatch.

The mode machine is a pure transition table; the MissionNode wraps it
with bus plumbing, a waypoint queue, and the safety failsafes (low
battery forces RETURN_HOME, a dead battery is terminal FAILSAFE, a
sustained comms outage parks an autonomous vehicle in HOLD).

Time is always injected by the caller; nothing here reads a wall clock.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from . import planner
from .bus import MessageBus
from .errors import (
    ConfigError,
    DuplicateWaypoint,
    NotNavigable,
    OutsideGeofence,
    PlanningError,
    WaypointError,
)
from .frames import EnuPoint, GeoPoint, geo_to_enu
from .rasters import OccupancyGrid


class FlightMode(enum.Enum):
    IDLE = "IDLE"
    MANUAL = "MANUAL"
    AUTO = "AUTO"
    HOLD = "HOLD"
    RETURN_HOME = "RETURN_HOME"
    FAILSAFE = "FAILSAFE"


class Event:
    """Marker base for mode-machine inputs."""


@dataclass(frozen=True)
class OperatorMode(Event):
    mode: FlightMode


@dataclass(frozen=True)
class GoalReceived(Event):
    pass


@dataclass(frozen=True)
class RouteDone(Event):
    pass


@dataclass(frozen=True)
class LowBattery(Event):
    pass


@dataclass(frozen=True)
class CommsLost(Event):
    pass


@dataclass(frozen=True)
class CommsRestored(Event):
    pass


@dataclass(frozen=True)
class BatteryDead(Event):
    pass


def all_events() -> tuple[Event, ...]:
    """One instance of every event kind, OperatorMode once per mode."""
    return tuple(OperatorMode(m) for m in FlightMode) + (
        GoalReceived(),
        RouteDone(),
        LowBattery(),
        CommsLost(),
        CommsRestored(),
        BatteryDead(),
    )


@dataclass(frozen=True)
class TransitionResult:
    mode: FlightMode
    accepted: bool
    flag: str | None = None


def mode_transition(current: FlightMode, event: Event) -> TransitionResult:
    """Pure transition table; a rejection keeps the mode and names a flag.

    FAILSAFE is terminal: only BatteryDead may (re)enter it and nothing
    leaves it.  Safety events outrank operator intent.
    """
    F = FlightMode
    if isinstance(event, BatteryDead):
        return TransitionResult(F.FAILSAFE, True)
    if isinstance(event, LowBattery):
        if current is F.FAILSAFE:
            return TransitionResult(F.FAILSAFE, True)
        return TransitionResult(F.RETURN_HOME, True)
    if isinstance(event, CommsLost):
        if current is F.AUTO:
            return TransitionResult(F.HOLD, True)
        return TransitionResult(current, True)
    if isinstance(event, CommsRestored):
        return TransitionResult(current, True)
    if isinstance(event, GoalReceived):
        if current in (F.IDLE, F.HOLD, F.AUTO):
            return TransitionResult(F.AUTO, True)
        if current is F.MANUAL:
            return TransitionResult(F.MANUAL, True)
        return TransitionResult(current, False, "goal_rejected")
    if isinstance(event, RouteDone):
        if current is F.AUTO:
            return TransitionResult(F.HOLD, True)
        return TransitionResult(current, True)
    if isinstance(event, OperatorMode):
        if current is F.FAILSAFE:
            return TransitionResult(F.FAILSAFE, False, "mode_rejected_failsafe")
        return TransitionResult(event.mode, True)
    raise TypeError(f"unknown event: {event!r}")


def _point_segment_dist2(p: EnuPoint, a: EnuPoint, b: EnuPoint) -> float:
    abx, aby = b.east - a.east, b.north - a.north
    apx, apy = p.east - a.east, p.north - a.north
    denom = abx * abx + aby * aby
    t = 0.0 if denom == 0.0 else max(0.0, min(1.0, (apx * abx + apy * aby) / denom))
    dx = apx - t * abx
    dy = apy - t * aby
    return dx * dx + dy * dy


def point_in_polygon(p: EnuPoint, polygon: tuple[EnuPoint, ...]) -> bool:
    """Ray casting with points on an edge counted as inside."""
    n = len(polygon)
    if n < 3:
        raise ValueError("polygon needs at least 3 vertices")
    inside = False
    for i in range(n):
        a = polygon[i]
        b = polygon[(i + 1) % n]
        if _point_segment_dist2(p, a, b) < 1e-18:
            return True
        if (a.north > p.north) != (b.north > p.north):
            t = (p.north - a.north) / (b.north - a.north)
            x_int = a.east + t * (b.east - a.east)
            if p.east < x_int:
                inside = not inside
    return inside


def sanitize_wp(
    wp: GeoPoint,
    grid: OccupancyGrid,
    geofence: tuple[EnuPoint, ...],
    origin: GeoPoint,
    previous: EnuPoint | None = None,
    min_separation: float = 1.0,
) -> EnuPoint:
    """Validate an operator waypoint and return its ENU projection.

    Accepts only points inside the geofence, on navigable water, and at
    least min_separation from the previously accepted waypoint.
    """
    p = geo_to_enu(origin, wp)
    if not point_in_polygon(p, geofence):
        raise OutsideGeofence(f"waypoint {wp} is outside the geofence")
    if not grid.is_navigable(p):
        raise NotNavigable(f"waypoint {wp} is not on navigable water")
    if previous is not None and p.distance_to(previous) < min_separation:
        raise DuplicateWaypoint(
            f"waypoint {wp} is within {min_separation} m of the previous one"
        )
    return p


@dataclass
class MissionPlan:
    waypoints: list[EnuPoint]
    home: EnuPoint
    current_index: int = 0

    def __post_init__(self):
        if not 0 <= self.current_index <= len(self.waypoints):
            raise ValueError("current_index out of range")

    @property
    def done(self) -> bool:
        return self.current_index >= len(self.waypoints)


@dataclass(frozen=True)
class MissionConfig:
    low_battery_pct: float = 15.0
    comms_timeout_s: float = 30.0
    min_wp_separation: float = 1.0
    wp_accept_radius: float = 2.0
    route_lookahead_m: float = 10.0
    detection_conf_min: float = 0.5

    @classmethod
    def from_dict(cls, d: dict) -> "MissionConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        try:
            return cls(**known)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"mission: {exc}") from exc


def fence_from_grid(grid: OccupancyGrid) -> tuple[EnuPoint, ...]:
    """Rectangular geofence hugging the grid bounds."""
    w = grid.width * grid.cell_size
    h = grid.height * grid.cell_size
    o = grid.origin
    return (
        EnuPoint(o.east, o.north),
        EnuPoint(o.east + w, o.north),
        EnuPoint(o.east + w, o.north + h),
        EnuPoint(o.east, o.north + h),
    )


class PlannerNode:
    """Answers route requests published on plan/<id>/route."""

    def __init__(self, bus: MessageBus, vehicle_id: str, grid: OccupancyGrid):
        self.bus = bus
        self.topic = f"plan/{vehicle_id}/route"
        self.grid = grid
        self._sub = bus.subscribe(self.topic)

    def pump(self) -> None:
        for env in self._sub.drain():
            msg = env.payload
            if not isinstance(msg, dict) or msg.get("kind") != "request":
                continue
            req_id = msg.get("req_id")
            try:
                route = planner.plan(
                    self.grid,
                    EnuPoint(*msg["from"]),
                    EnuPoint(*msg["to"]),
                )
            except PlanningError as exc:
                self.bus.publish(
                    self.topic,
                    {
                        "kind": "error",
                        "req_id": req_id,
                        "error": type(exc).__name__,
                    },
                )
                continue
            self.bus.publish(
                self.topic,
                {
                    "kind": "result",
                    "req_id": req_id,
                    "cells": [[c.east, c.north] for c in route.cells],
                    "cost": route.cost,
                },
            )


class MissionNode:
    """Flight-mode supervisor and waypoint dispatcher for one vehicle.

    Call pump(now) once per control cycle; it drains every subscription,
    applies safety events last so they win the cycle, then advances the
    active route and publishes the autopilot setpoint.
    """

    def __init__(
        self,
        bus: MessageBus,
        vehicle_id: str,
        grid: OccupancyGrid,
        origin: GeoPoint,
        home: EnuPoint,
        config: MissionConfig | None = None,
        geofence: tuple[EnuPoint, ...] | None = None,
    ):
        self.bus = bus
        self.vehicle_id = vehicle_id
        self.grid = grid
        self.origin = origin
        self.config = config or MissionConfig()
        self.geofence = geofence or fence_from_grid(grid)
        self.mode = FlightMode.IDLE
        self.plan = MissionPlan(waypoints=[], home=home)

        self._sub_goal = bus.subscribe(f"cmd/{vehicle_id}/goal")
        self._sub_mode = bus.subscribe(f"cmd/{vehicle_id}/mode")
        self._sub_battery = bus.subscribe(f"asv/{vehicle_id}/battery")
        self._sub_detections = bus.subscribe(f"asv/{vehicle_id}/detections")
        self._sub_pose = bus.subscribe(f"asv/{vehicle_id}/pose")
        self._sub_link = bus.subscribe(f"link/{vehicle_id}/status")
        self._sub_plan = bus.subscribe(f"plan/{vehicle_id}/route")
        self._plan_topic = f"plan/{vehicle_id}/route"
        self._safety_topic = f"asv/{vehicle_id}/safety"
        self._setpoint_topic = f"asv/{vehicle_id}/setpoint"

        self._pose: EnuPoint | None = None
        self._battery_pct: float | None = None
        self._last_accepted_goal: EnuPoint | None = None
        self._route: list[EnuPoint] | None = None
        self._route_cursor = 0
        self._route_target: str | None = None  # "waypoint" or "home"
        self._req_id = 0
        self._pending_req: int | None = None
        self._comms_down_since: float | None = None
        self._comms_lost_latched = False
        self._persistent_flags: set[str] = set()
        self._transient_flags: list[str] = []
        self._last_published_state: tuple | None = None
        self._setpoint: EnuPoint | None = None
        self._setpoint_published: EnuPoint | bool | None = False

    # -- event application ------------------------------------------------

    def _apply(self, event: Event) -> TransitionResult:
        res = mode_transition(self.mode, event)
        if res.flag:
            self._transient_flags.append(res.flag)
        if res.mode is not self.mode:
            self._enter(res.mode)
        return res

    def _enter(self, mode: FlightMode) -> None:
        self.mode = mode
        self._route = None
        self._route_cursor = 0
        self._route_target = None
        self._pending_req = None
        if mode is FlightMode.FAILSAFE:
            self._persistent_flags.add("failsafe")

    # -- pump stages ------------------------------------------------------

    def _drain_commands(self) -> None:
        for env in self._sub_mode.drain():
            msg = env.payload
            try:
                mode = FlightMode(str(msg["mode"]).upper())
            except (KeyError, TypeError, ValueError):
                self._transient_flags.append("bad_mode_command")
                continue
            self._apply(OperatorMode(mode))
        inserted = 0
        for env in self._sub_goal.drain():
            msg = env.payload
            try:
                wp = GeoPoint(lat=float(msg["lat"]), lon=float(msg["lon"]))
            except (KeyError, TypeError, ValueError):
                self._transient_flags.append("bad_goal_command")
                continue
            if self._accept_goal(wp, self.plan.current_index + inserted):
                inserted += 1
        if inserted:
            # the first new goal is now the current target; drop any route
            # to the old one so navigation replans from the present position
            self._abandon_route()

    def _accept_goal(self, wp: GeoPoint, at: int) -> bool:
        """Sanitize one commanded goal and splice it in as the next target.

        Goals from the same cycle keep their order (the j-th lands at slot
        current_index + j), so a multi-leg plan sent as a batch is flown in
        the order given, while a single goal sent mid-route jumps the queue
        and the remaining legs resume after it.
        """
        res = mode_transition(self.mode, GoalReceived())
        if not res.accepted:
            if res.flag:
                self._transient_flags.append(res.flag)
            return False
        try:
            p = sanitize_wp(
                wp,
                self.grid,
                self.geofence,
                self.origin,
                previous=self._last_accepted_goal,
                min_separation=self.config.min_wp_separation,
            )
        except WaypointError as exc:
            self._transient_flags.append(f"waypoint_rejected_{type(exc).__name__}")
            return False
        self.plan.waypoints.insert(at, p)
        self._last_accepted_goal = p
        self._apply(GoalReceived())
        return True

    def _abandon_route(self) -> None:
        self._pending_req = None
        self._route = None
        self._route_cursor = 0
        self._route_target = None
        self._setpoint = None

    def register_interest_point(self, wp: GeoPoint, source: str = "perception") -> bool:
        """Queue a point of interest behind the current waypoint list.

        Returns True when appended; sanitation failures and near
        duplicates of any queued point are dropped with a flag.
        """
        try:
            p = sanitize_wp(
                wp, self.grid, self.geofence, self.origin,
                previous=None, min_separation=self.config.min_wp_separation,
            )
        except WaypointError as exc:
            self._transient_flags.append(f"interest_rejected_{type(exc).__name__}")
            return False
        # checked against visited waypoints too, else a re-detected item
        # would be queued again after every visit
        for q in self.plan.waypoints:
            if p.distance_to(q) < self.config.min_wp_separation:
                return False
        self.plan.waypoints.append(p)
        return True

    def _drain_telemetry(self, now: float) -> None:
        for env in self._sub_pose.drain():
            msg = env.payload
            try:
                self._pose = geo_to_enu(
                    self.origin, GeoPoint(lat=msg["lat"], lon=msg["lon"])
                )
            except (KeyError, TypeError, ValueError):
                continue
        for env in self._sub_detections.drain():
            msg = env.payload
            try:
                conf = float(msg.get("conf", 1.0))
                wp = GeoPoint(lat=float(msg["lat"]), lon=float(msg["lon"]))
            except (KeyError, TypeError, ValueError):
                continue
            if conf < self.config.detection_conf_min:
                continue
            self.register_interest_point(wp)
        for env in self._sub_link.drain():
            msg = env.payload
            connected = bool(msg.get("connected", True))
            if connected:
                self._comms_down_since = None
                if self._comms_lost_latched:
                    self._comms_lost_latched = False
                    self._persistent_flags.discard("comms_lost")
                    self._apply(CommsRestored())
            elif self._comms_down_since is None:
                self._comms_down_since = float(msg.get("t", now))

    def _drain_safety(self, now: float) -> None:
        for env in self._sub_battery.drain():
            msg = env.payload
            try:
                self._battery_pct = float(msg["pct"])
            except (KeyError, TypeError, ValueError):
                continue
        if self._battery_pct is not None:
            if self._battery_pct <= 0.0:
                self._persistent_flags.add("battery_dead")
                self._apply(BatteryDead())
            elif self._battery_pct < self.config.low_battery_pct:
                self._persistent_flags.add("low_battery")
                if self.mode not in (FlightMode.RETURN_HOME, FlightMode.FAILSAFE):
                    self._apply(LowBattery())
            else:
                self._persistent_flags.discard("low_battery")
        if (
            self._comms_down_since is not None
            and not self._comms_lost_latched
            and now - self._comms_down_since > self.config.comms_timeout_s
        ):
            self._comms_lost_latched = True
            self._persistent_flags.add("comms_lost")
            self._apply(CommsLost())

    def _drain_plan_results(self) -> None:
        for env in self._sub_plan.drain():
            msg = env.payload
            if not isinstance(msg, dict) or msg.get("kind") not in ("result", "error"):
                continue
            if msg.get("req_id") != self._pending_req:
                continue
            self._pending_req = None
            if msg["kind"] == "error":
                self._transient_flags.append(f"route_{msg.get('error', 'error')}")
                if self._route_target == "waypoint":
                    # unreachable waypoint: skip it, keep going
                    self._transient_flags.append("waypoint_skipped")
                    self.plan.current_index += 1
                self._route_target = None
                continue
            self._route = [EnuPoint(e, n) for e, n in msg["cells"]]
            self._route_cursor = 0

    def _request_route(self, goal: EnuPoint, target: str) -> None:
        if self._pose is None:
            return
        self._req_id += 1
        self._pending_req = self._req_id
        self._route_target = target
        self.bus.publish(
            self._plan_topic,
            {
                "kind": "request",
                "req_id": self._req_id,
                "from": [self._pose.east, self._pose.north],
                "to": [goal.east, goal.north],
            },
        )

    def _navigate(self) -> None:
        mode = self.mode
        if mode is FlightMode.AUTO:
            goal_pending = not self.plan.done
            if self._route is None and self._pending_req is None:
                if goal_pending:
                    self._request_route(
                        self.plan.waypoints[self.plan.current_index], "waypoint"
                    )
                else:
                    self._apply(RouteDone())
                    return
        elif mode is FlightMode.RETURN_HOME:
            if (
                self._route is None
                and self._pending_req is None
                and self._route_target != "home_done"
            ):
                self._request_route(self.plan.home, "home")
        else:
            self._setpoint = None
            return

        if self._route is None:
            self._setpoint = None
            return

        assert self._pose is not None
        # chase a carrot well ahead of the hull so small cross-track errors
        # never stall the cursor on a narrowly missed cell center; only the
        # final cell demands a tight arrival
        last = len(self._route) - 1
        while (
            self._route_cursor < last
            and self._pose.distance_to(self._route[self._route_cursor])
            <= self.config.route_lookahead_m
        ):
            self._route_cursor += 1
        if (
            self._route_cursor == last
            and self._pose.distance_to(self._route[last])
            <= self.config.wp_accept_radius
        ):
            self._route_cursor += 1
        if self._route_cursor >= len(self._route):
            finished = self._route_target
            self._route = None
            self._route_cursor = 0
            self._setpoint = None
            if finished == "waypoint":
                self.plan.current_index += 1
                if self.plan.done:
                    self._apply(RouteDone())
            elif finished == "home":
                self._route_target = "home_done"
            return
        self._setpoint = self._route[self._route_cursor]

    def _publish_outputs(self, now: float) -> None:
        if self._setpoint != self._setpoint_published:
            if self._setpoint is None:
                self.bus.publish(self._setpoint_topic, {"t": now, "active": False})
            else:
                self.bus.publish(
                    self._setpoint_topic,
                    {
                        "t": now,
                        "active": True,
                        "east": self._setpoint.east,
                        "north": self._setpoint.north,
                    },
                )
            self._setpoint_published = self._setpoint
        flags = tuple(sorted(self._persistent_flags)) + tuple(self._transient_flags)
        state = (tuple(sorted(self._persistent_flags)), self.mode)
        if self._transient_flags or state != self._last_published_state:
            self.bus.publish(
                self._safety_topic,
                {"t": now, "flags": list(flags), "mode": self.mode.value},
            )
            self._last_published_state = state
        self._transient_flags = []

    def pump(self, now: float) -> None:
        """One dispatch cycle at simulated time now."""
        self._drain_commands()
        self._drain_telemetry(now)
        self._drain_safety(now)
        self._drain_plan_results()
        self._navigate()
        self._publish_outputs(now)
