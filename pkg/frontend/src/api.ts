// Typed client for the station gateway's HTTP API. Every mission fact the
// console shows comes through this surface; rejections carry the server's
// error name so the UI can report the exact verdict.

import type { GeoPoint } from "./geo.js";

export interface PoseDoc {
  t: number;
  lat: number;
  lon: number;
  heading_rad: number;
  speed_mps: number;
}

export interface BatteryDoc {
  t: number;
  wh: number;
  pct: number;
}

export interface SafetyDoc {
  t: number;
  flags: string[];
  mode: string;
}

export interface VehicleView {
  pose: PoseDoc | null;
  battery: BatteryDoc | null;
  safety: SafetyDoc | null;
  link: Record<string, unknown> | null;
  mode: string;
  track_len: number;
}

export interface Snapshot {
  t: number | null;
  seq: number;
  vehicles: Record<string, VehicleView>;
  sample_count: number;
  sample_counts: Record<string, number>;
  models: Record<string, { n: number; lengthscale: number; variance: number; noise_var: number }>;
  refit_count: number;
  quarantined: number;
  origin: GeoPoint;
}

export interface WorldGrid {
  ncols: number;
  nrows: number;
  cell_size: number;
  origin_enu: [number, number];
  origin_geo: GeoPoint;
  row_order: string;
  navigable: boolean[][];
}

export interface GridLayer {
  param: string;
  units: string;
  ncols: number;
  nrows: number;
  cell_size: number;
  origin_enu: [number, number];
  origin_geo: GeoPoint;
  row_order: string;
  mean: (number | null)[][];
  sd: (number | null)[][];
}

export interface GoalVerdict {
  accepted: boolean;
  east: number;
  north: number;
}

export type TrackPoint = [number, number, number]; // [t, lat, lon]

/** A gateway rejection; `kind` is the server's error name (e.g. NotNavigable). */
export class GatewayError extends Error {
  constructor(
    readonly kind: string,
    readonly status: number,
  ) {
    super(`${kind} (HTTP ${status})`);
    this.name = "GatewayError";
  }
}

/** What the app model needs from the gateway; the tests substitute a fake. */
export interface GatewayApi {
  state(): Promise<Snapshot>;
  world(): Promise<WorldGrid>;
  layers(): Promise<string[]>;
  layer(param: string): Promise<GridLayer>;
  track(vehicleId: string): Promise<TrackPoint[]>;
  sendGoal(lat: number, lon: number): Promise<GoalVerdict>;
  setMode(mode: string): Promise<{ mode: string }>;
  suggest(): Promise<GeoPoint>;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class GatewayClient implements GatewayApi {
  constructor(
    private readonly base = "",
    private readonly fetchFn: FetchLike = (u, init) => fetch(u, init),
  ) {}

  streamUrl(): string {
    return `${this.base}/api/stream`;
  }

  async state(): Promise<Snapshot> {
    return (await this.getJson("/api/state")) as Snapshot;
  }

  async world(): Promise<WorldGrid> {
    return (await this.getJson("/api/world")) as WorldGrid;
  }

  async layers(): Promise<string[]> {
    const doc = (await this.getJson("/api/grid")) as { layers: string[] };
    return doc.layers;
  }

  async layer(param: string): Promise<GridLayer> {
    return (await this.getJson(`/api/grid/${encodeURIComponent(param)}`)) as GridLayer;
  }

  async track(vehicleId: string): Promise<TrackPoint[]> {
    const doc = (await this.getJson(`/api/track/${encodeURIComponent(vehicleId)}`)) as {
      points: TrackPoint[];
    };
    return doc.points;
  }

  async sendGoal(lat: number, lon: number): Promise<GoalVerdict> {
    return (await this.postJson("/api/goal", { lat, lon })) as GoalVerdict;
  }

  async setMode(mode: string): Promise<{ mode: string }> {
    return (await this.postJson("/api/mode", { mode })) as { mode: string };
  }

  async suggest(): Promise<GeoPoint> {
    return (await this.getJson("/api/suggest")) as GeoPoint;
  }

  private async getJson(path: string): Promise<unknown> {
    const response = await this.fetchFn(this.base + path);
    return this.decode(response);
  }

  private async postJson(path: string, body: unknown): Promise<unknown> {
    const response = await this.fetchFn(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return this.decode(response);
  }

  private async decode(response: Response): Promise<unknown> {
    let doc: unknown = null;
    try {
      doc = await response.json();
    } catch {
      doc = null;
    }
    if (!response.ok) {
      const kind =
        typeof doc === "object" && doc !== null && typeof (doc as { error?: unknown }).error === "string"
          ? (doc as { error: string }).error
          : `HTTP ${response.status}`;
      throw new GatewayError(kind, response.status);
    }
    return doc;
  }
}
