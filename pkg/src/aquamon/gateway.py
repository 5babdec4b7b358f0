"""Operator HTTP gateway in front of a running station.

Read endpoints serve JSON snapshots of station state; command endpoints
validate operator input synchronously (sanitation and the mode table)
before publishing onto the bus, so the caller gets the verdict in the
response instead of waiting a control cycle.  A newline-delimited JSON
push stream carries live telemetry with periodic heartbeat comments.

Built on the stdlib threading HTTP server: one thread per request, the
push stream simply holds its response open.
"""

from __future__ import annotations

import json
import math
import mimetypes
import os
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .bus import MessageBus
from .errors import NoCandidate, WaypointError
from .frames import GeoPoint, enu_to_geo
from .mission import FlightMode, MissionNode, OperatorMode, mode_transition, sanitize_wp

STREAM_HEARTBEAT_S = 10.0


def _nan_to_none(arr: np.ndarray) -> list:
    out = []
    for row in arr:
        out.append([None if math.isnan(v) else float(v) for v in row])
    return out


class Gateway:
    def __init__(
        self,
        station,
        bus: MessageBus,
        vehicle_id: str = "asv1",
        mission: MissionNode | None = None,
        host: str = "127.0.0.1",
        port: int = 0,
        static_dir: str | None = None,
    ):
        self.station = station
        self.bus = bus
        self.vehicle_id = vehicle_id
        self.mission = mission
        self.host = host
        self.static_dir = static_dir
        self._stopping = threading.Event()
        handler = _make_handler(self)
        self._server = ThreadingHTTPServer((host, port), handler)
        self._server.daemon_threads = True
        self.port = self._server.server_address[1]
        self._thread: threading.Thread | None = None

    def start(self) -> "Gateway":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stopping.set()
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=3.0)

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    # -- command handling, shared with tests ------------------------------

    def handle_goal(self, doc: dict) -> tuple[int, dict]:
        if self.mission is None:
            return 409, {"error": "NoMission"}
        try:
            lat = float(doc["lat"])
            lon = float(doc["lon"])
            wp = GeoPoint(lat=lat, lon=lon)
        except (KeyError, TypeError, ValueError):
            return 400, {"error": "BadRequest"}
        m = self.mission
        previous = m.plan.waypoints[-1] if m.plan.waypoints else None
        try:
            p = sanitize_wp(
                wp,
                m.grid,
                m.geofence,
                m.origin,
                previous=previous,
                min_separation=m.config.min_wp_separation,
            )
        except WaypointError as exc:
            return 409, {"error": type(exc).__name__}
        self.bus.publish(f"cmd/{self.vehicle_id}/goal", {"lat": lat, "lon": lon})
        return 200, {"accepted": True, "east": p.east, "north": p.north}

    def handle_mode(self, doc: dict) -> tuple[int, dict]:
        if self.mission is None:
            return 409, {"error": "NoMission"}
        raw = doc.get("mode")
        if not isinstance(raw, str):
            return 400, {"error": "BadRequest"}
        try:
            mode = FlightMode(raw.upper())
        except ValueError:
            return 400, {"error": "BadRequest"}
        res = mode_transition(self.mission.mode, OperatorMode(mode))
        if not res.accepted:
            return 409, {"error": res.flag or "Rejected"}
        self.bus.publish(f"cmd/{self.vehicle_id}/mode", {"mode": mode.value})
        return 200, {"accepted": True, "mode": mode.value}

    def grid_payload(self, param: str) -> tuple[int, dict]:
        st = self.station
        if param not in st.models:
            return 404, {"error": "InsufficientData"}
        mean_map, sd_map = st.grid_estimates(param)
        origin_geo = enu_to_geo(st.origin, st.grid.origin)
        return 200, {
            "param": param,
            "units": mean_map.units,
            "ncols": st.grid.width,
            "nrows": st.grid.height,
            "cell_size": st.grid.cell_size,
            "origin_enu": [st.grid.origin.east, st.grid.origin.north],
            "origin_geo": {"lat": origin_geo.lat, "lon": origin_geo.lon},
            "row_order": "south_to_north",
            "mean": _nan_to_none(mean_map.values),
            "sd": _nan_to_none(sd_map.values),
        }

    def world_payload(self) -> dict:
        st = self.station
        origin_geo = enu_to_geo(st.origin, st.grid.origin)
        return {
            "ncols": st.grid.width,
            "nrows": st.grid.height,
            "cell_size": st.grid.cell_size,
            "origin_enu": [st.grid.origin.east, st.grid.origin.north],
            "origin_geo": {"lat": origin_geo.lat, "lon": origin_geo.lon},
            "row_order": "south_to_north",
            "navigable": [[bool(v) for v in row] for row in st.grid.cells],
        }


def _make_handler(gw: Gateway):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet test output
            pass

        def _json(self, status: int, doc: dict) -> None:
            data = json.dumps(doc).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(data)

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self):
            path = self.path.split("?", 1)[0]
            if path == "/api/state":
                self._json(200, gw.station.snapshot())
            elif path == "/api/grid":
                self._json(200, {"layers": sorted(gw.station.models)})
            elif path.startswith("/api/grid/"):
                status, doc = gw.grid_payload(path.removeprefix("/api/grid/"))
                self._json(status, doc)
            elif path == "/api/world":
                self._json(200, gw.world_payload())
            elif path.startswith("/api/track/"):
                vid = path.removeprefix("/api/track/")
                self._json(200, {"id": vid, "points": gw.station.track(vid)})
            elif path == "/api/suggest":
                try:
                    g = gw.station.suggest_goal(gw.vehicle_id)
                except NoCandidate as exc:
                    self._json(409, {"error": type(exc).__name__})
                    return
                self._json(200, {"lat": g.lat, "lon": g.lon})
            elif path == "/api/compliance":
                rep = gw.station.compliance_report()
                self._json(
                    200,
                    {
                        "suitable": rep.suitable,
                        "notices": list(rep.notices),
                        "verdicts": [
                            {
                                "parameter": v.parameter,
                                "median": v.median,
                                "min": v.low,
                                "max": v.high,
                                "passed": v.passed,
                            }
                            for v in rep.verdicts
                        ],
                    },
                )
            elif path == "/api/stream":
                self._stream()
            else:
                self._static(path)

        def do_POST(self):
            path = self.path.split("?", 1)[0]
            try:
                length = int(self.headers.get("Content-Length", "0"))
                body = self.rfile.read(length) if length else b""
                doc = json.loads(body.decode("utf-8"))
                if not isinstance(doc, dict):
                    raise ValueError
            except (ValueError, UnicodeDecodeError):
                self._json(400, {"error": "BadRequest"})
                return
            if path == "/api/goal":
                status, out = gw.handle_goal(doc)
            elif path == "/api/mode":
                status, out = gw.handle_mode(doc)
            else:
                status, out = 404, {"error": "NotFound"}
            self._json(status, out)

        def _stream(self):
            sub = gw.bus.subscribe("asv/#")
            try:
                self.send_response(200)
                self.send_header("Content-Type", "application/x-ndjson")
                self.send_header("Cache-Control", "no-cache")
                self.send_header("Access-Control-Allow-Origin", "*")
                self.send_header("Connection", "close")
                self.end_headers()
                last_write = time.monotonic()
                while not gw._stopping.is_set():
                    wrote = False
                    for env in sub.drain():
                        line = json.dumps(
                            {
                                "topic": env.topic,
                                "seq": env.seq,
                                "time": env.time,
                                "body": env.payload,
                            },
                            separators=(",", ":"),
                        )
                        self.wfile.write(line.encode("utf-8") + b"\n")
                        wrote = True
                    if wrote:
                        self.wfile.flush()
                        last_write = time.monotonic()
                    elif time.monotonic() - last_write >= STREAM_HEARTBEAT_S:
                        self.wfile.write(
                            f"# heartbeat {time.time():.3f}\n".encode("ascii")
                        )
                        self.wfile.flush()
                        last_write = time.monotonic()
                    else:
                        time.sleep(0.05)
            except (BrokenPipeError, ConnectionResetError, OSError):
                pass
            finally:
                gw.bus.unsubscribe(sub)

        def _static(self, path: str):
            if gw.static_dir is None:
                self._json(404, {"error": "NotFound"})
                return
            rel = path.lstrip("/") or "index.html"
            base = os.path.abspath(gw.static_dir)
            full = os.path.abspath(os.path.join(base, rel))
            if full != base and not full.startswith(base + os.sep):
                self._json(404, {"error": "NotFound"})
                return
            if not os.path.isfile(full):
                self._json(404, {"error": "NotFound"})
                return
            ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
            with open(full, "rb") as fh:
                data = fh.read()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

    return Handler
