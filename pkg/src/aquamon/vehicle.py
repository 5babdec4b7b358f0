"""Planar 3-DOF catamaran simulator with differential thrusters.

The model is deliberately minimal: point mass with linear surge drag and
linear yaw drag, driven by two stern thrusters.  Mass, drag and the
power constants are calibrated once so that the default configuration
reproduces two operating figures: roughly 1 m/s cruise and about two
hours of endurance from the 296 Wh battery bank.

Battery draw is P_base + k_thrust * (|Tl|^1.5 + |Tr|^1.5); propeller
power grows superlinearly with thrust.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigError
from .frames import EnuPoint, Pose, wrap_angle


@dataclass(frozen=True)
class AutopilotConfig:
    """Vehicle, controller and power configuration."""

    cruise_speed: float = 1.0  # m/s
    wp_accept_radius: float = 2.0  # m
    heading_gain: float = 0.9  # 1/s, heading error -> desired yaw rate
    speed_gain: float = 60.0  # N*s/m
    speed_feedforward: float = 0.85  # fraction of drag force fed forward
    dt: float = 0.1  # s
    T_max: float = 50.0  # N per thruster
    drag_u: float = 40.0  # N*s/m
    drag_r: float = 15.0  # N*m*s
    beam: float = 0.9  # m, thruster separation
    mass: float = 45.0  # kg
    inertia_z: float = 8.0  # kg*m^2
    P_base: float = 20.0  # W, hotel load
    k_thrust: float = 0.682  # W/N^1.5
    capacity_wh: float = 296.0  # two 14.8 V 10 Ah packs in parallel

    def __post_init__(self):
        for name in (
            "cruise_speed", "wp_accept_radius", "heading_gain", "speed_gain",
            "dt", "T_max", "drag_u", "drag_r", "beam", "mass", "inertia_z",
            "P_base", "capacity_wh",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"AutopilotConfig.{name} must be positive")
        if self.k_thrust < 0:
            raise ValueError("AutopilotConfig.k_thrust must be >= 0")
        if self.dt > 0.5:
            raise ValueError("AutopilotConfig.dt must be <= 0.5 s")

    @classmethod
    def from_dict(cls, d: dict) -> "AutopilotConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        try:
            return cls(**known)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"vehicle: {exc}") from exc


@dataclass(frozen=True)
class VehicleState:
    pose: Pose
    battery_wh: float
    time: float = 0.0
    thrust_left: float = 0.0
    thrust_right: float = 0.0
    battery_dead: bool = False


def initial_state(position: EnuPoint, cfg: AutopilotConfig, heading: float = 0.0) -> VehicleState:
    return VehicleState(
        pose=Pose(position=position, heading=heading),
        battery_wh=cfg.capacity_wh,
    )


def electrical_power(cfg: AutopilotConfig, thrust_left: float, thrust_right: float) -> float:
    """Instantaneous draw in watts for a commanded thrust pair."""
    return cfg.P_base + cfg.k_thrust * (
        abs(thrust_left) ** 1.5 + abs(thrust_right) ** 1.5
    )


def cruise_power(cfg: AutopilotConfig) -> float:
    """Steady-state draw when holding cruise_speed on a straight run."""
    total = cfg.drag_u * cfg.cruise_speed
    return electrical_power(cfg, total / 2.0, total / 2.0)


def calibrate_endurance(cfg: AutopilotConfig) -> float:
    """Endurance in seconds at cruise, from the steady-state power draw."""
    return cfg.capacity_wh * 3600.0 / cruise_power(cfg)


def step(state: VehicleState, cfg: AutopilotConfig, dt: float | None = None) -> VehicleState:
    """Semi-implicit Euler update of the 3-DOF model.

    An exhausted battery freezes the vehicle in place; only time advances.
    """
    if dt is None:
        dt = cfg.dt
    if state.battery_dead or state.battery_wh <= 0.0:
        return replace(
            state, time=state.time + dt, battery_wh=0.0, battery_dead=True,
            thrust_left=0.0, thrust_right=0.0,
        )

    tl = min(max(state.thrust_left, -cfg.T_max), cfg.T_max)
    tr = min(max(state.thrust_right, -cfg.T_max), cfg.T_max)

    drawn_wh = electrical_power(cfg, tl, tr) * dt / 3600.0
    battery = state.battery_wh - drawn_wh
    if battery <= 0.0:
        return replace(
            state, time=state.time + dt, battery_wh=0.0, battery_dead=True,
            thrust_left=0.0, thrust_right=0.0,
        )

    pose = state.pose
    u = pose.surge_speed + dt * (tl + tr - cfg.drag_u * pose.surge_speed) / cfg.mass
    r = pose.yaw_rate + dt * (
        (tr - tl) * cfg.beam / 2.0 - cfg.drag_r * pose.yaw_rate
    ) / cfg.inertia_z
    heading = wrap_angle(pose.heading + dt * r)
    position = EnuPoint(
        east=pose.position.east + dt * u * math.cos(heading),
        north=pose.position.north + dt * u * math.sin(heading),
    )
    return VehicleState(
        pose=Pose(
            position=position,
            heading=heading,
            pitch=pose.pitch,
            roll=pose.roll,
            surge_speed=u,
            yaw_rate=r,
        ),
        battery_wh=battery,
        time=state.time + dt,
        thrust_left=tl,
        thrust_right=tr,
        battery_dead=False,
    )


def autopilot_step(
    state: VehicleState, goal: EnuPoint, cfg: AutopilotConfig
) -> tuple[float, float]:
    """Proportional waypoint controller returning a (left, right) thrust pair.

    Heading error maps to a desired yaw rate and from there to thrust
    asymmetry; common-mode thrust drives surge toward cruise speed,
    backing off while the bow points away from the goal.
    """
    if not (math.isfinite(goal.east) and math.isfinite(goal.north)):
        raise ValueError("goal must be finite")
    pose = state.pose
    bearing = math.atan2(
        goal.north - pose.position.north, goal.east - pose.position.east
    )
    err = wrap_angle(bearing - pose.heading)

    # steady-state differential for the desired yaw rate heading_gain*err
    delta = 2.0 * cfg.drag_r * cfg.heading_gain * err / cfg.beam
    delta = min(max(delta, -2.0 * cfg.T_max), 2.0 * cfg.T_max)

    target_u = cfg.cruise_speed * max(0.0, math.cos(err))
    common = cfg.speed_feedforward * cfg.drag_u * target_u + cfg.speed_gain * (
        target_u - pose.surge_speed
    )
    base = common / 2.0
    # keep turn authority under saturation: shrink common mode first
    half = abs(delta) / 2.0
    base = min(max(base, -cfg.T_max + half), cfg.T_max - half)

    tl = min(max(base - delta / 2.0, -cfg.T_max), cfg.T_max)
    tr = min(max(base + delta / 2.0, -cfg.T_max), cfg.T_max)
    return tl, tr
