// Canvas painting for the live map: lake outline from the occupancy grid,
// heatmap overlay with transparent gaps, track polyline, goal markers and
// the vehicle itself. Pure drawing; all state comes in as arguments.

import { cellColor, finiteRange } from "./colors.js";
import type { GridLayer, WorldGrid } from "./api.js";
import type { ViewModel } from "./state.js";
import { enuToPixel, type Viewport } from "./view.js";

const WATER = "#12263a";
const LAND = "#27231c";
const SHORE = "#5b4f36";
const TRACK = "#8fd3ff";
const VEHICLE = "#ffd166";
const GOAL_ACCEPTED = "#35d07f";
const GOAL_PENDING = "#f9f871";

export function drawScene(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  vm: ViewModel,
  vp: Viewport,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#0b1220";
  ctx.fillRect(0, 0, width, height);
  if (vm.world !== null) {
    drawWorld(ctx, width, height, vm.world, vp);
  }
  if (vm.layerData !== null) {
    drawHeatmap(ctx, width, height, vm.layerData, vp);
  }
  drawTrack(ctx, width, height, vm, vp);
  drawGoals(ctx, width, height, vm, vp);
  drawVehicle(ctx, width, height, vm, vp);
}

function cellRect(
  vp: Viewport,
  width: number,
  height: number,
  originEast: number,
  originNorth: number,
  cellSize: number,
  row: number,
  col: number,
): { x: number; y: number; w: number; h: number } {
  // Rows run south to north, so row r spans [north0 + r*cs, north0 + (r+1)*cs].
  const topLeft = enuToPixel(vp, width, height, {
    east: originEast + col * cellSize,
    north: originNorth + (row + 1) * cellSize,
  });
  const span = cellSize / vp.metersPerPixel;
  return { x: topLeft.x, y: topLeft.y, w: span + 0.5, h: span + 0.5 };
}

function drawWorld(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  world: WorldGrid,
  vp: Viewport,
): void {
  const [east0, north0] = world.origin_enu;
  for (let r = 0; r < world.nrows; r += 1) {
    const row = world.navigable[r];
    if (row === undefined) continue;
    for (let c = 0; c < world.ncols; c += 1) {
      const rect = cellRect(vp, width, height, east0, north0, world.cell_size, r, c);
      ctx.fillStyle = row[c] ? WATER : LAND;
      ctx.fillRect(rect.x, rect.y, rect.w, rect.h);
    }
  }
  // Shoreline: outline water cells that touch land so the lake reads clearly.
  ctx.strokeStyle = SHORE;
  ctx.lineWidth = 1;
  for (let r = 0; r < world.nrows; r += 1) {
    for (let c = 0; c < world.ncols; c += 1) {
      if (!world.navigable[r]?.[c]) continue;
      const nearLand =
        !(world.navigable[r - 1]?.[c] ?? false) ||
        !(world.navigable[r + 1]?.[c] ?? false) ||
        !(world.navigable[r]?.[c - 1] ?? false) ||
        !(world.navigable[r]?.[c + 1] ?? false);
      if (nearLand) {
        const rect = cellRect(vp, width, height, east0, north0, world.cell_size, r, c);
        ctx.strokeRect(rect.x, rect.y, rect.w, rect.h);
      }
    }
  }
}

function drawHeatmap(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  layer: GridLayer,
  vp: Viewport,
): void {
  const range = finiteRange(layer.mean);
  if (range === null) {
    return;
  }
  const [east0, north0] = layer.origin_enu;
  for (let r = 0; r < layer.nrows; r += 1) {
    const row = layer.mean[r];
    if (row === undefined) continue;
    for (let c = 0; c < layer.ncols; c += 1) {
      const value = row[c] ?? null;
      if (value === null) {
        continue; // no estimate here; leave the lake visible underneath
      }
      const rect = cellRect(vp, width, height, east0, north0, layer.cell_size, r, c);
      ctx.fillStyle = cellColor(layer.param, value, range.lo, range.hi);
      ctx.fillRect(rect.x, rect.y, rect.w, rect.h);
    }
  }
}

function drawTrack(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  vm: ViewModel,
  vp: Viewport,
): void {
  if (vm.track.length < 2) {
    return;
  }
  ctx.strokeStyle = TRACK;
  ctx.lineWidth = 2;
  ctx.beginPath();
  for (let i = 0; i < vm.track.length; i += 1) {
    const p = enuToPixel(vp, width, height, vm.track[i]!);
    if (i === 0) {
      ctx.moveTo(p.x, p.y);
    } else {
      ctx.lineTo(p.x, p.y);
    }
  }
  ctx.stroke();
}

function drawGoals(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  vm: ViewModel,
  vp: Viewport,
): void {
  if (vm.acceptedGoal !== null) {
    const p = enuToPixel(vp, width, height, vm.acceptedGoal);
    ctx.fillStyle = GOAL_ACCEPTED;
    ctx.beginPath();
    ctx.arc(p.x, p.y, 7, 0, 2 * Math.PI);
    ctx.fill();
    ctx.strokeStyle = "#ffffff";
    ctx.lineWidth = 1.5;
    ctx.stroke();
  }
  if (vm.pendingGoal !== null) {
    const p = enuToPixel(vp, width, height, vm.pendingGoal);
    ctx.strokeStyle = GOAL_PENDING;
    ctx.lineWidth = 2;
    ctx.setLineDash([4, 3]);
    ctx.beginPath();
    ctx.arc(p.x, p.y, 9, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.setLineDash([]);
  }
}

function drawVehicle(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  vm: ViewModel,
  vp: Viewport,
): void {
  if (vm.marker === null) {
    return;
  }
  const p = enuToPixel(vp, width, height, vm.marker);
  // Heading is math-convention ENU (0 = east, counter-clockwise); the
  // marker shape points up, so convert to a screen rotation.
  const screenAngle = Math.PI / 2 - vm.marker.headingRad;
  ctx.save();
  ctx.translate(p.x, p.y);
  ctx.rotate(screenAngle);
  ctx.fillStyle = VEHICLE;
  ctx.beginPath();
  ctx.moveTo(0, -10);
  ctx.lineTo(6, 8);
  ctx.lineTo(0, 4);
  ctx.lineTo(-6, 8);
  ctx.closePath();
  ctx.fill();
  ctx.strokeStyle = "#1c1c1c";
  ctx.lineWidth = 1;
  ctx.stroke();
  ctx.restore();
}
