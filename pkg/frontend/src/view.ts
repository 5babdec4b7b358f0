// Viewport math for the plain east/north canvas: world metres to screen
// pixels and back, north up, plus a fit that frames the whole lake.

import type { EnuPoint } from "./geo.js";

export interface Viewport {
  centerEast: number;
  centerNorth: number;
  metersPerPixel: number;
}

export interface PixelPoint {
  x: number;
  y: number;
}

export function enuToPixel(
  vp: Viewport,
  width: number,
  height: number,
  p: EnuPoint,
): PixelPoint {
  return {
    x: width / 2 + (p.east - vp.centerEast) / vp.metersPerPixel,
    y: height / 2 - (p.north - vp.centerNorth) / vp.metersPerPixel,
  };
}

export function pixelToEnu(
  vp: Viewport,
  width: number,
  height: number,
  px: PixelPoint,
): EnuPoint {
  return {
    east: vp.centerEast + (px.x - width / 2) * vp.metersPerPixel,
    north: vp.centerNorth - (px.y - height / 2) * vp.metersPerPixel,
  };
}

/** Frame a world of the given extent with a margin on every side. */
export function fitViewport(
  originEast: number,
  originNorth: number,
  widthMeters: number,
  heightMeters: number,
  canvasWidth: number,
  canvasHeight: number,
  marginPx = 20,
): Viewport {
  const usableW = Math.max(1, canvasWidth - 2 * marginPx);
  const usableH = Math.max(1, canvasHeight - 2 * marginPx);
  const metersPerPixel = Math.max(widthMeters / usableW, heightMeters / usableH);
  return {
    centerEast: originEast + widthMeters / 2,
    centerNorth: originNorth + heightMeters / 2,
    metersPerPixel: metersPerPixel > 0 ? metersPerPixel : 1,
  };
}

export function zoomed(vp: Viewport, factor: number, anchor: EnuPoint): Viewport {
  const mpp = Math.min(50, Math.max(0.05, vp.metersPerPixel * factor));
  const scale = mpp / vp.metersPerPixel;
  return {
    centerEast: anchor.east + (vp.centerEast - anchor.east) * scale,
    centerNorth: anchor.north + (vp.centerNorth - anchor.north) * scale,
    metersPerPixel: mpp,
  };
}

export function panned(vp: Viewport, dxPx: number, dyPx: number): Viewport {
  return {
    centerEast: vp.centerEast - dxPx * vp.metersPerPixel,
    centerNorth: vp.centerNorth + dyPx * vp.metersPerPixel,
    metersPerPixel: vp.metersPerPixel,
  };
}
