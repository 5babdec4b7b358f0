// Console view model. Holds everything the screen shows and enforces the
// console's ground rules: mission truth is only ever reconstructed from
// gateway endpoints, the only mutating calls are goal and mode commands,
// the selected heatmap layer must be one the gateway advertises, and a
// pending goal marker never outlives the server's verdict on it.

import type { GatewayApi, GridLayer, WorldGrid } from "./api.js";
import { GatewayError } from "./api.js";
import { enuToGeo, geoToEnu, type EnuPoint, type GeoPoint } from "./geo.js";
import type { StreamEvent } from "./stream.js";

export interface Toast {
  kind: "info" | "error";
  text: string;
  at: number;
}

export interface VehicleMarker {
  east: number;
  north: number;
  headingRad: number;
  speedMps: number;
  t: number;
}

export type LinkHealth = "live" | "stale" | "down";

/** Stream silence longer than this flips the link indicator to "stale". */
export const STALE_AFTER_MS = 5000;

const TRACK_CAP = 6000;
const TOAST_CAP = 6;
export const TOAST_TTL_MS = 6000;

export interface ViewModel {
  origin: GeoPoint | null;
  world: WorldGrid | null;
  mode: string;
  safetyFlags: string[];
  batteryPct: number | null;
  sampleCount: number;
  marker: VehicleMarker | null;
  track: EnuPoint[];
  layers: string[];
  selectedLayer: string | null;
  layerData: GridLayer | null;
  pendingGoal: EnuPoint | null;
  acceptedGoal: EnuPoint | null;
  toasts: Toast[];
  connected: boolean;
  lastEventAt: number | null;
  loaded: boolean;
}

export class AppModel {
  readonly view: ViewModel = {
    origin: null,
    world: null,
    mode: "",
    safetyFlags: [],
    batteryPct: null,
    sampleCount: 0,
    marker: null,
    track: [],
    layers: [],
    selectedLayer: null,
    layerData: null,
    pendingGoal: null,
    acceptedGoal: null,
    toasts: [],
    connected: false,
    lastEventAt: null,
    loaded: false,
  };

  private listeners: (() => void)[] = [];

  constructor(
    private readonly gw: GatewayApi,
    private readonly vehicleId = "asv1",
    private readonly preferredLayer: string | null = null,
    private readonly now: () => number = () => Date.now(),
  ) {}

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) {
      listener();
    }
  }

  /**
   * Rebuild the entire view from gateway endpoints. Called at startup and
   * after a page reload; nothing shown as mission truth survives outside
   * the gateway, so this alone restores the full picture.
   */
  async load(): Promise<void> {
    const snapshot = await this.gw.state();
    const v = this.view;
    v.origin = snapshot.origin;
    v.sampleCount = snapshot.sample_count;
    const vehicle = snapshot.vehicles[this.vehicleId];
    if (vehicle !== undefined) {
      v.mode = vehicle.mode;
      v.safetyFlags = vehicle.safety?.flags ?? [];
      v.batteryPct = vehicle.battery?.pct ?? null;
      if (vehicle.pose !== null) {
        v.marker = this.markerFromPose(vehicle.pose);
      }
    }
    v.world = await this.gw.world();
    await this.refreshTrack();
    v.layers = await this.gw.layers();
    if (v.selectedLayer === null || !v.layers.includes(v.selectedLayer)) {
      if (this.preferredLayer !== null && v.layers.includes(this.preferredLayer)) {
        v.selectedLayer = this.preferredLayer;
      } else {
        v.selectedLayer = v.layers[0] ?? null;
      }
    }
    await this.refreshLayer();
    v.loaded = true;
    this.notify();
  }

  /** Re-fetch the advertised layer list, keeping the selection if it survives. */
  async refreshLayers(): Promise<void> {
    const v = this.view;
    v.layers = await this.gw.layers();
    if (v.selectedLayer !== null && !v.layers.includes(v.selectedLayer)) {
      v.selectedLayer = v.layers[0] ?? null;
      await this.refreshLayer();
    } else if (v.selectedLayer === null && v.layers.length > 0) {
      v.selectedLayer = v.layers[0] ?? null;
      await this.refreshLayer();
    }
    this.notify();
  }

  async refreshLayer(): Promise<void> {
    const v = this.view;
    if (v.selectedLayer === null) {
      v.layerData = null;
      this.notify();
      return;
    }
    try {
      v.layerData = await this.gw.layer(v.selectedLayer);
    } catch {
      v.layerData = null;
    }
    this.notify();
  }

  async refreshTrack(): Promise<void> {
    const v = this.view;
    if (v.origin === null) {
      return;
    }
    const origin = v.origin;
    const points = await this.gw.track(this.vehicleId);
    v.track = points.map(([, lat, lon]) => geoToEnu(origin, { lat, lon }));
    this.notify();
  }

  selectLayer(param: string | null): void {
    const v = this.view;
    if (param !== null && !v.layers.includes(param)) {
      return; // selection is only ever one of the advertised layers
    }
    v.selectedLayer = param;
    void this.refreshLayer();
  }

  /** Map click or pending-goal send: post the goal and surface the verdict. */
  async submitGoal(p: EnuPoint): Promise<void> {
    const v = this.view;
    if (v.origin === null) {
      return;
    }
    v.pendingGoal = { ...p };
    this.notify();
    const geo = enuToGeo(v.origin, p);
    try {
      const verdict = await this.gw.sendGoal(geo.lat, geo.lon);
      v.acceptedGoal = { east: verdict.east, north: verdict.north };
      this.toast("info", `goal accepted at ${verdict.east.toFixed(0)}E ${verdict.north.toFixed(0)}N`);
    } catch (err) {
      if (err instanceof GatewayError) {
        this.toast("error", `goal rejected: ${err.kind}`);
      } else {
        this.toast("error", "goal failed: gateway unreachable");
      }
    } finally {
      v.pendingGoal = null; // verdict delivered either way; marker must not linger
      this.notify();
    }
  }

  /** Fill the pending marker with the server's suggested next target. */
  async suggestGoal(): Promise<void> {
    const v = this.view;
    if (v.origin === null) {
      return;
    }
    try {
      const geo = await this.gw.suggest();
      v.pendingGoal = geoToEnu(v.origin, geo);
      this.toast("info", "suggested target staged; send to commit");
    } catch (err) {
      if (err instanceof GatewayError) {
        this.toast("error", `suggest: ${err.kind}`);
      } else {
        this.toast("error", "suggest failed: gateway unreachable");
      }
    }
    this.notify();
  }

  async sendPendingGoal(): Promise<void> {
    const pending = this.view.pendingGoal;
    if (pending !== null) {
      await this.submitGoal(pending);
    }
  }

  async requestMode(mode: string): Promise<void> {
    try {
      const result = await this.gw.setMode(mode);
      this.view.mode = result.mode;
    } catch (err) {
      if (err instanceof GatewayError) {
        this.toast("error", `mode change rejected: ${err.kind}`);
      } else {
        this.toast("error", "mode change failed: gateway unreachable");
      }
    }
    this.notify();
  }

  /** Fold one stream event into the view. */
  applyEvent(ev: StreamEvent): void {
    const parts = ev.topic.split("/");
    if (parts.length < 3 || parts[1] !== this.vehicleId) {
      return;
    }
    const kind = parts[2];
    const v = this.view;
    if (kind === "pose") {
      const body = ev.body as {
        t?: number;
        lat?: number;
        lon?: number;
        heading_rad?: number;
        speed_mps?: number;
      };
      if (v.origin === null || typeof body.lat !== "number" || typeof body.lon !== "number") {
        return;
      }
      const enu = geoToEnu(v.origin, { lat: body.lat, lon: body.lon });
      v.marker = {
        east: enu.east,
        north: enu.north,
        headingRad: body.heading_rad ?? 0,
        speedMps: body.speed_mps ?? 0,
        t: body.t ?? 0,
      };
      v.track.push(enu);
      if (v.track.length > TRACK_CAP) {
        v.track.splice(0, v.track.length - TRACK_CAP);
      }
    } else if (kind === "safety") {
      const body = ev.body as { flags?: string[]; mode?: string };
      if (Array.isArray(body.flags)) {
        v.safetyFlags = body.flags;
      }
      if (typeof body.mode === "string") {
        v.mode = body.mode;
      }
    } else if (kind === "battery") {
      const body = ev.body as { pct?: number };
      if (typeof body.pct === "number") {
        v.batteryPct = body.pct;
      }
    } else if (kind === "samples") {
      v.sampleCount += 1;
    } else {
      return;
    }
    this.notify();
  }

  markAlive(): void {
    this.view.lastEventAt = this.now();
  }

  setConnected(connected: boolean): void {
    if (this.view.connected !== connected) {
      this.view.connected = connected;
      this.notify();
    }
  }

  health(nowMs?: number): LinkHealth {
    const v = this.view;
    if (!v.connected) {
      return "down";
    }
    const t = nowMs ?? this.now();
    if (v.lastEventAt !== null && t - v.lastEventAt > STALE_AFTER_MS) {
      return "stale";
    }
    return "live";
  }

  private toast(kind: Toast["kind"], text: string): void {
    const v = this.view;
    v.toasts.push({ kind, text, at: this.now() });
    if (v.toasts.length > TOAST_CAP) {
      v.toasts.splice(0, v.toasts.length - TOAST_CAP);
    }
  }

  expireToasts(): void {
    const v = this.view;
    const cutoff = this.now() - TOAST_TTL_MS;
    const kept = v.toasts.filter((t) => t.at > cutoff);
    if (kept.length !== v.toasts.length) {
      v.toasts = kept;
      this.notify();
    }
  }

  private markerFromPose(pose: {
    t: number;
    lat: number;
    lon: number;
    heading_rad: number;
    speed_mps: number;
  }): VehicleMarker | null {
    if (this.view.origin === null) {
      return null;
    }
    const enu = geoToEnu(this.view.origin, { lat: pose.lat, lon: pose.lon });
    return {
      east: enu.east,
      north: enu.north,
      headingRad: pose.heading_rad,
      speedMps: pose.speed_mps,
      t: pose.t,
    };
  }
}
