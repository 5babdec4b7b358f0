"""Shore-station core: persistence, state tracking, model maintenance.

Every telemetry document lands in an append-only newline-delimited JSON
log with a dense sequence number, then updates an in-memory snapshot.
Malformed documents go to a quarantine side file instead of the log, so
the log itself always replays cleanly.  Field models refit on a fixed
sample cadence; the model set swaps atomically, so readers always see a
complete, mutually consistent set.

Replaying a log through a fresh station reproduces the original state
and rasters exactly: ingestion is the only writer and is deterministic
in the log's event order.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import gp, planner, vehicle
from .errors import NoCandidate
from .frames import EnuPoint, GeoPoint, enu_to_geo, geo_to_enu
from .rasters import OccupancyGrid, PARAMETER_UNITS, ScalarField, write_ascii_grid

LOG_KINDS = (
    "sample", "pose", "mode", "safety", "detection", "goal", "battery",
    "link", "note",
)
DEFAULT_REFIT_EVERY = 25


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _valid_latlon(doc: dict) -> bool:
    return (
        _finite(doc.get("lat"))
        and _finite(doc.get("lon"))
        and -90.0 <= doc["lat"] <= 90.0
        and -180.0 <= doc["lon"] <= 180.0
    )


def classify_topic(topic: str) -> tuple[str, str] | None:
    """Map a bus topic to (vehicle_id, log kind); None for internal chatter."""
    parts = topic.split("/")
    if len(parts) != 3:
        return None
    head, vid, leaf = parts
    if head == "asv":
        kind = {
            "pose": "pose",
            "samples": "sample",
            "sonar": "sample",
            "battery": "battery",
            "safety": "safety",
            "detections": "detection",
        }.get(leaf)
        return (vid, kind) if kind else None
    if head == "cmd":
        kind = {"goal": "goal", "mode": "mode"}.get(leaf)
        return (vid, kind) if kind else None
    if head == "link" and leaf == "status":
        return (vid, "link")
    return None


def validate_document(kind: str, doc) -> str | None:
    """Return a rejection reason for a malformed document, else None."""
    if not isinstance(doc, dict):
        return "not an object"
    if kind == "pose":
        if not _valid_latlon(doc):
            return "bad lat/lon"
        if not (_finite(doc.get("t")) and _finite(doc.get("heading_rad")) and _finite(doc.get("speed_mps"))):
            return "missing pose fields"
    elif kind == "sample":
        if not _valid_latlon(doc):
            return "bad lat/lon"
        if not (_finite(doc.get("t")) and _finite(doc.get("value"))):
            return "missing sample fields"
        if not isinstance(doc.get("param"), str) or not doc["param"]:
            return "missing param"
    elif kind == "battery":
        if not (_finite(doc.get("t")) and _finite(doc.get("wh")) and _finite(doc.get("pct"))):
            return "missing battery fields"
    elif kind == "safety":
        if not _finite(doc.get("t")):
            return "missing t"
        flags = doc.get("flags")
        if not isinstance(flags, list) or not all(isinstance(f, str) for f in flags):
            return "bad flags"
    elif kind == "detection":
        if not _valid_latlon(doc):
            return "bad lat/lon"
        if not (_finite(doc.get("t")) and _finite(doc.get("conf"))):
            return "missing detection fields"
        if not isinstance(doc.get("class"), str):
            return "missing class"
    elif kind == "goal":
        if not _valid_latlon(doc):
            return "bad lat/lon"
    elif kind == "mode":
        if not isinstance(doc.get("mode"), str) or not doc["mode"]:
            return "missing mode"
    elif kind == "link":
        if "connected" not in doc:
            return "missing connected"
    elif kind == "note":
        pass
    else:
        return f"unknown kind {kind!r}"
    return None


class MissionLog:
    """Append-only NDJSON event log with a quarantine side file."""

    def __init__(self, path: str):
        self.path = path
        self.quarantine_path = path + ".quarantine"
        self.seq = 0
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        self.seq = int(json.loads(line)["seq"])
                    except (ValueError, KeyError, TypeError):
                        pass
        self._fh = open(path, "a", encoding="utf-8")
        self._qfh = None

    def append(self, kind: str, t: float, topic: str, body: dict) -> int:
        if kind not in LOG_KINDS:
            raise ValueError(f"unknown log kind {kind!r}")
        self.seq += 1
        record = {"seq": self.seq, "t": t, "kind": kind, "topic": topic, "body": body}
        self._fh.write(json.dumps(record, separators=(",", ":"), sort_keys=True))
        self._fh.write("\n")
        self._fh.flush()
        return self.seq

    def quarantine(self, reason: str, topic: str, raw) -> None:
        if self._qfh is None:
            self._qfh = open(self.quarantine_path, "a", encoding="utf-8")
        entry = {"reason": reason, "topic": topic, "raw": raw}
        try:
            self._qfh.write(json.dumps(entry, separators=(",", ":"), sort_keys=True))
        except (TypeError, ValueError):
            self._qfh.write(json.dumps({"reason": reason, "topic": topic, "raw": repr(raw)}))
        self._qfh.write("\n")
        self._qfh.flush()

    def close(self) -> None:
        self._fh.close()
        if self._qfh is not None:
            self._qfh.close()


def read_mission_log(path: str):
    """Yield (record, None) for parseable lines, (None, raw_line) otherwise."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict) or "kind" not in rec or "body" not in rec:
                    yield None, line
                    continue
            except ValueError:
                yield None, line
                continue
            yield rec, None


@dataclass
class VehicleView:
    pose: dict | None = None
    battery: dict | None = None
    safety: dict | None = None
    link: dict | None = None
    mode: str | None = None
    track: list = field(default_factory=list)


@dataclass(frozen=True)
class ModelInfo:
    parameter: str
    n: int
    lengthscale: float
    variance: float
    noise_var: float


class Station:
    """Single-writer mission state built from ingested documents."""

    def __init__(
        self,
        grid: OccupancyGrid,
        origin: GeoPoint,
        gp_config: dict | None = None,
        thresholds: dict | None = None,
        vehicle_config: vehicle.AutopilotConfig | None = None,
        log: MissionLog | None = None,
        refit_every: int = DEFAULT_REFIT_EVERY,
        inflate_radius: float = 1.0,
    ):
        gp_config = gp_config or {}
        self.grid = grid
        self.nav_grid = planner.inflate(grid, inflate_radius)
        self.origin = origin
        self.thresholds = thresholds or {}
        self.vehicle_config = vehicle_config or vehicle.AutopilotConfig()
        self.log = log
        self.refit_every = int(refit_every)
        self.bounds = tuple(gp_config.get("lengthscale_bounds", gp.DEFAULT_LENGTHSCALE_BOUNDS))
        self.init_lengthscale = float(
            gp_config.get("init_lengthscale", gp.DEFAULT_INIT_LENGTHSCALE)
        )
        self.noise_sd = dict(gp_config.get("noise_sd", {}))

        self.samples: dict[str, list[tuple[float, float, float]]] = {}
        self.sample_count = 0
        self._samples_since_refit = 0
        self.models: dict[str, gp.GpFieldEstimator] = {}
        self.model_counts: dict[str, int] = {}
        self.refit_count = 0
        self.vehicles: dict[str, VehicleView] = {}
        self.last_seq = 0
        self.last_t: float | None = None
        self.quarantined = 0

    # -- ingestion --------------------------------------------------------

    def ingest(self, topic: str, doc, t: float | None = None) -> bool:
        """Validate, persist and apply one document; False if quarantined."""
        info = classify_topic(topic)
        if info is None:
            return False
        vid, kind = info
        reason = validate_document(kind, doc)
        if reason is not None:
            self.quarantined += 1
            if self.log is not None:
                self.log.quarantine(reason, topic, doc)
            return False
        stamp = doc.get("t", t)
        stamp = float(stamp) if _finite(stamp) else 0.0
        if self.log is not None:
            self.last_seq = self.log.append(kind, stamp, topic, doc)
        else:
            self.last_seq += 1
        self._apply(vid, kind, stamp, doc)
        return True

    def note(self, text: str, t: float = 0.0, **extra) -> None:
        """Annotation event; the one kind allowed to carry wall-clock data."""
        if self.log is not None:
            body = {"msg": text, **extra}
            self.last_seq = self.log.append("note", t, "", body)

    def _view(self, vid: str) -> VehicleView:
        if vid not in self.vehicles:
            self.vehicles[vid] = VehicleView()
        return self.vehicles[vid]

    def _apply(self, vid: str, kind: str, t: float, doc: dict) -> None:
        self.last_t = t if self.last_t is None else max(self.last_t, t)
        view = self._view(vid)
        if kind == "pose":
            view.pose = doc
            view.track.append((doc["t"], doc["lat"], doc["lon"]))
        elif kind == "sample":
            p = geo_to_enu(self.origin, GeoPoint(doc["lat"], doc["lon"]))
            self.samples.setdefault(doc["param"], []).append(
                (p.east, p.north, float(doc["value"]))
            )
            self.sample_count += 1
            self._samples_since_refit += 1
            if self._samples_since_refit >= self.refit_every:
                self.refit_models()
        elif kind == "battery":
            view.battery = doc
        elif kind == "safety":
            view.safety = doc
            if isinstance(doc.get("mode"), str):
                view.mode = doc["mode"]
        elif kind == "link":
            view.link = doc
        # goal/mode/detection/note events persist but carry no state here

    def replay_event(self, record: dict) -> None:
        """Apply one previously logged event without re-persisting it."""
        kind = record["kind"]
        if kind == "note":
            return
        topic = record.get("topic", "")
        info = classify_topic(topic)
        if info is None:
            return
        vid, topic_kind = info
        if topic_kind != kind:
            return
        self.last_seq = max(self.last_seq, int(record.get("seq", 0)))
        self._apply(vid, kind, float(record.get("t", 0.0)), record["body"])

    # -- models -----------------------------------------------------------

    def refit_models(self) -> None:
        """Refit every parameter with enough data; swap the set atomically."""
        new_models: dict[str, gp.GpFieldEstimator] = {}
        new_counts: dict[str, int] = {}
        for param, rows in sorted(self.samples.items()):
            if len(rows) < 2:
                continue
            arr = np.asarray(rows, dtype=float)
            est = gp.GpFieldEstimator(
                lengthscale_bounds=self.bounds,
                init_lengthscale=self.init_lengthscale,
                noise_sd=float(self.noise_sd.get(param, 0.0)),
            )
            try:
                est.fit(arr[:, :2], arr[:, 2])
            except Exception:  # noqa: BLE001 - a bad batch must not kill ingestion
                continue
            new_models[param] = est
            new_counts[param] = len(rows)
        self.models = new_models
        self.model_counts = new_counts
        self.refit_count += 1
        self._samples_since_refit = 0

    def grid_estimates(self, parameter: str) -> tuple[ScalarField, ScalarField]:
        est = self.models[parameter]
        return est.predict_grid(
            self.grid, parameter=parameter, units=PARAMETER_UNITS.get(parameter, "")
        )

    def compliance_report(self) -> gp.ComplianceReport:
        estimates = {}
        for param in self.models:
            mean_map, _ = self.grid_estimates(param)
            estimates[param] = mean_map
        return gp.compliance(estimates, self.thresholds)

    def export_rasters(self, parameter: str, out_path: str) -> tuple[str, str]:
        """Write mean and sd maps; returns the two paths."""
        mean_map, sd_map = self.grid_estimates(parameter)
        root, ext = os.path.splitext(out_path)
        sd_path = f"{root}_sd{ext or '.asc'}"
        if not ext:
            out_path = root + ".asc"
        write_ascii_grid(mean_map, out_path)
        write_ascii_grid(sd_map, sd_path)
        return out_path, sd_path

    # -- suggestions ------------------------------------------------------

    def suggest_goal(self, vehicle_id: str) -> GeoPoint:
        """Most informative reachable point given the remaining battery."""
        if not self.models:
            raise NoCandidate("no trained models yet")
        view = self.vehicles.get(vehicle_id)
        if view is None or view.pose is None:
            raise NoCandidate(f"no pose telemetry for {vehicle_id!r}")
        current = geo_to_enu(
            self.origin, GeoPoint(view.pose["lat"], view.pose["lon"])
        )
        cfg = self.vehicle_config
        wh = view.battery["wh"] if view.battery else cfg.capacity_wh
        endurance_s = wh * 3600.0 / vehicle.cruise_power(cfg)
        budget = 0.8 * endurance_s * cfg.cruise_speed
        best = planner.select_next_informative(
            self.models, self.nav_grid, current, budget
        )
        return enu_to_geo(self.origin, best)

    # -- snapshot ---------------------------------------------------------

    def snapshot(self) -> dict:
        vehicles = {}
        for vid, view in sorted(self.vehicles.items()):
            vehicles[vid] = {
                "pose": view.pose,
                "battery": view.battery,
                "safety": view.safety,
                "link": view.link,
                "mode": view.mode,
                "track_len": len(view.track),
            }
        models = {
            param: {
                "n": self.model_counts.get(param, 0),
                "lengthscale": est.model_.kernel.lengthscale,
                "variance": est.model_.kernel.variance,
                "noise_var": est.model_.noise_var,
            }
            for param, est in sorted(self.models.items())
        }
        return {
            "t": self.last_t,
            "seq": self.last_seq,
            "vehicles": vehicles,
            "sample_count": self.sample_count,
            "sample_counts": {k: len(v) for k, v in sorted(self.samples.items())},
            "models": models,
            "refit_count": self.refit_count,
            "quarantined": self.quarantined,
            "origin": {"lat": self.origin.lat, "lon": self.origin.lon},
        }

    def track(self, vehicle_id: str, limit: int = 2000) -> list[list[float]]:
        """Pose history decimated evenly to at most limit points."""
        view = self.vehicles.get(vehicle_id)
        if view is None:
            return []
        pts = view.track
        if len(pts) <= limit:
            return [list(p) for p in pts]
        idx = np.unique(np.linspace(0, len(pts) - 1, limit).astype(int))
        return [list(pts[i]) for i in idx]


def replay(
    log_path: str,
    grid: OccupancyGrid,
    origin: GeoPoint,
    gp_config: dict | None = None,
    thresholds: dict | None = None,
    vehicle_config: vehicle.AutopilotConfig | None = None,
    refit_every: int = DEFAULT_REFIT_EVERY,
    inflate_radius: float = 1.0,
) -> Station:
    """Rebuild station state from a persisted log, writing nothing."""
    st = Station(
        grid=grid,
        origin=origin,
        gp_config=gp_config,
        thresholds=thresholds,
        vehicle_config=vehicle_config,
        log=None,
        refit_every=refit_every,
        inflate_radius=inflate_radius,
    )
    bad = 0
    for rec, raw in read_mission_log(log_path):
        if rec is None:
            bad += 1
            continue
        st.replay_event(rec)
    st.quarantined += bad
    return st
