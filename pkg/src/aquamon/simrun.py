"""Headless mission runner: one process wiring every subsystem together.

A single loop advances the vehicle model at a fixed step, publishes
sensor documents on their configured cadences, pumps the mission and
planner nodes, and feeds every bus message through the station for
logging and mapping.  All randomness comes from two seeded generators
(world and sensors), so a run is reproducible tick for tick.
"""

from __future__ import annotations

import math
import time as wallclock
from dataclasses import dataclass, field, replace

import numpy as np

from . import vehicle as veh
from .bus import MessageBus
from .config import world_origin, world_spec
from .errors import OutOfWater
from .frames import EnuPoint, enu_to_geo
from .link import Bridge, Broker
from .mission import FlightMode, MissionConfig, MissionNode, PlannerNode
from .perception import (
    CameraExtrinsics,
    CameraIntrinsics,
    georeference,
    synthetic_detector,
)
from .planner import inflate
from .station import MissionLog, Station
from .world import World, generate_world, read_sonar, read_wqp


@dataclass
class SimHandles:
    """Live references handed to an observer before the loop starts."""

    bus: MessageBus
    station: Station
    mission: MissionNode
    world: World
    vehicle_id: str


@dataclass
class SimResult:
    seed: int
    ticks: int
    sim_time_s: float
    lap_waypoints: int
    lap_time_s: float | None
    mission_time_s: float | None
    battery_pct_at_lap: float | None
    battery_pct_end: float
    distance_m: float
    sample_count: int
    detection_count: int
    refit_count: int
    quarantined: int
    final_mode: str
    log_path: str | None
    notes: list[str] = field(default_factory=list)


def _period_steps(period_s: float, dt: float) -> int:
    return max(1, int(round(period_s / dt)))


def run_sim(
    cfg: dict,
    seed: int = 0,
    duration_s: float = 6000.0,
    log_path: str | None = None,
    use_broker: bool = False,
    rate: float = 0.0,
    on_ready=None,
    stop_when_done: bool = True,
) -> SimResult:
    """Run one full mission and return its summary.

    rate > 0 paces the loop against the wall clock (1.0 = real time);
    rate == 0 runs as fast as possible.  stop_when_done ends the loop
    shortly after the mission parks in HOLD instead of burning out the
    whole duration.
    """
    origin = world_origin(cfg)
    spec = world_spec(cfg)
    world = generate_world(seed, spec)

    mcfg_d = cfg.get("mission", {})
    vid = str(mcfg_d.get("vehicle_id", "asv1"))
    mission_cfg = MissionConfig.from_dict(mcfg_d)
    inflate_radius = float(mcfg_d.get("inflate_radius_m", 1.0))
    nav_grid = inflate(world.grid, inflate_radius)

    acfg = veh.AutopilotConfig.from_dict(cfg.get("vehicle", {}))
    dt = acfg.dt

    vcfg_d = cfg.get("vehicle", {})
    pose_every = _period_steps(float(vcfg_d.get("pose_period_s", 1.0)), dt)
    battery_every = _period_steps(float(vcfg_d.get("battery_period_s", 5.0)), dt)
    wqp_every = _period_steps(float(vcfg_d.get("wqp_period_s", 20.0)), dt)
    sonar_every = _period_steps(float(vcfg_d.get("sonar_period_s", 20.0)), dt)
    det_every = _period_steps(float(vcfg_d.get("detector_period_s", 2.0)), dt)

    cam = cfg.get("camera", {})
    intr = CameraIntrinsics.from_dict(cam.get("intrinsics", {}))
    extr = CameraExtrinsics.from_dict(cam.get("extrinsics", {}))

    bus = MessageBus()
    tap = bus.subscribe("#")
    sub_setpoint = bus.subscribe(f"asv/{vid}/setpoint")

    log = MissionLog(log_path) if log_path else None
    gp_cfg = cfg.get("gp", {})
    station = Station(
        grid=world.grid,
        origin=origin,
        gp_config=gp_cfg,
        thresholds=cfg.get("thresholds", {}),
        vehicle_config=acfg,
        log=log,
        refit_every=int(gp_cfg.get("refit_every", 25)),
        inflate_radius=inflate_radius,
    )

    home_e, home_n = mcfg_d.get("home", [180.0, 180.0])
    home = EnuPoint(float(home_e), float(home_n))
    fence = None
    fence_d = mcfg_d.get("geofence")
    if fence_d:
        fence = tuple(EnuPoint(float(e), float(n)) for e, n in fence_d)
    mission = MissionNode(
        bus, vid, nav_grid, origin, home, config=mission_cfg, geofence=fence
    )
    planner_node = PlannerNode(bus, vid, nav_grid)

    broker = None
    bridge = None
    if use_broker:
        link_d = cfg.get("link", {})
        broker = Broker(
            host=str(link_d.get("host", "127.0.0.1")),
            port=int(link_d.get("port", 0)),
            ping_interval=float(link_d.get("ping_interval_s", 10.0)),
            max_missed_pongs=int(link_d.get("max_missed_pongs", 3)),
        )
        broker.start()
        bridge = Bridge(
            bus,
            vid,
            host=broker.host,
            port=broker.port,
            initial_backoff=float(link_d.get("initial_backoff_s", 1.0)),
            max_backoff=float(link_d.get("max_backoff_s", 60.0)),
        )

    state = veh.initial_state(home, acfg, heading=0.0)
    sensor_rng = np.random.default_rng([seed, 1])

    waypoints_d = mcfg_d.get("waypoints", [])
    goal_docs = []
    for e, n in waypoints_d:
        g = enu_to_geo(origin, EnuPoint(float(e), float(n)))
        goal_docs.append({"t": 0.0, "lat": g.lat, "lon": g.lon})

    if on_ready is not None:
        on_ready(SimHandles(bus, station, mission, world, vid))

    result_notes: list[str] = []
    station.note(
        "run start", 0.0, wall=wallclock.time(), seed=seed, vehicle=vid
    )

    n_lap = 0
    lap_time = None
    lap_batt = None
    mission_time = None
    dead_since = None
    detection_count = 0
    distance = 0.0
    setpoint: EnuPoint | None = None
    grace_s = 60.0
    start_wall = wallclock.monotonic()
    n_steps = int(round(duration_s / dt))
    k = 0

    try:
        for k in range(n_steps + 1):
            t = k * dt
            bus.set_time(t)
            pose = state.pose
            geo = enu_to_geo(origin, pose.position)

            if k == 0:
                for doc in goal_docs:
                    bus.publish(f"cmd/{vid}/goal", doc)

            if k % pose_every == 0:
                bus.publish(
                    f"asv/{vid}/pose",
                    {
                        "t": t,
                        "lat": geo.lat,
                        "lon": geo.lon,
                        "heading_rad": pose.heading,
                        "speed_mps": pose.surge_speed,
                    },
                )
            if k % battery_every == 0:
                bus.publish(
                    f"asv/{vid}/battery",
                    {
                        "t": t,
                        "wh": state.battery_wh,
                        "pct": 100.0 * state.battery_wh / acfg.capacity_wh,
                    },
                )
            if k % wqp_every == 0:
                try:
                    for s in read_wqp(pose, t, world, sensor_rng):
                        bus.publish(
                            f"asv/{vid}/samples",
                            {
                                "t": t,
                                "lat": geo.lat,
                                "lon": geo.lon,
                                "param": s.parameter,
                                "value": s.value,
                            },
                        )
                except OutOfWater:
                    pass
            if k % sonar_every == 0:
                try:
                    s = read_sonar(pose, t, world, sensor_rng)
                    bus.publish(
                        f"asv/{vid}/sonar",
                        {
                            "t": t,
                            "lat": geo.lat,
                            "lon": geo.lon,
                            "param": s.parameter,
                            "value": s.value,
                        },
                    )
                except OutOfWater:
                    pass
            if k % det_every == 0:
                dets = synthetic_detector(
                    world.debris,
                    pose,
                    intr,
                    extr,
                    sensor_rng,
                    grid=world.grid,
                    max_range=float(cam.get("max_range_m", 25.0)),
                    pixel_noise_sd=float(cam.get("pixel_noise_sd", 2.0)),
                    depth_noise_frac=float(cam.get("depth_noise_frac", 0.01)),
                    conf_mean=float(cam.get("conf_mean", 0.85)),
                    conf_sd=float(cam.get("conf_sd", 0.08)),
                )
                for det in dets:
                    try:
                        dg = georeference(det, intr, extr, pose, origin)
                    except ValueError:
                        continue
                    detection_count += 1
                    bus.publish(
                        f"asv/{vid}/detections",
                        {
                            "t": t,
                            "lat": dg.lat,
                            "lon": dg.lon,
                            "conf": det.confidence,
                            "class": det.cls,
                        },
                    )

            planner_node.pump()
            mission.pump(t)
            if bridge is not None:
                bridge.pump(t)

            for env in sub_setpoint.drain():
                doc = env.payload
                if doc.get("active"):
                    setpoint = EnuPoint(float(doc["east"]), float(doc["north"]))
                else:
                    setpoint = None

            if setpoint is not None and not state.battery_dead:
                tl, tr = veh.autopilot_step(state, setpoint, acfg)
            else:
                tl, tr = 0.0, 0.0
            state = replace(state, thrust_left=tl, thrust_right=tr)
            prev = state.pose.position
            state = veh.step(state, acfg)
            distance += math.hypot(
                state.pose.position.east - prev.east,
                state.pose.position.north - prev.north,
            )

            for env in tap.drain():
                station.ingest(env.topic, env.payload, t)

            if k == 0:
                n_lap = len(mission.plan.waypoints)
            if n_lap and lap_time is None and mission.plan.current_index >= n_lap:
                lap_time = t
                lap_batt = 100.0 * state.battery_wh / acfg.capacity_wh
            if (
                n_lap
                and mission_time is None
                and mission.plan.done
                and mission.mode is FlightMode.HOLD
            ):
                mission_time = t
            if state.battery_dead and dead_since is None:
                dead_since = t

            if stop_when_done and mission_time is not None and t >= mission_time + grace_s:
                break
            if dead_since is not None and t >= dead_since + grace_s:
                result_notes.append("battery exhausted before mission end")
                break

            if rate > 0:
                target = start_wall + t / rate
                lag = target - wallclock.monotonic()
                if lag > 0:
                    wallclock.sleep(lag)
    finally:
        station.note(
            "run end", k * dt, wall=wallclock.time(), mode=mission.mode.value
        )
        if bridge is not None:
            bridge.close()
        if broker is not None:
            broker.stop()
        if log is not None:
            log.close()

    return SimResult(
        seed=seed,
        ticks=k,
        sim_time_s=k * dt,
        lap_waypoints=n_lap,
        lap_time_s=lap_time,
        mission_time_s=mission_time,
        battery_pct_at_lap=lap_batt,
        battery_pct_end=100.0 * state.battery_wh / acfg.capacity_wh,
        distance_m=distance,
        sample_count=station.sample_count,
        detection_count=detection_count,
        refit_count=station.refit_count,
        quarantined=station.quarantined,
        final_mode=mission.mode.value,
        log_path=log_path,
        notes=result_notes,
    )
