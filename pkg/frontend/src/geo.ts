// Local tangent-plane conversions between geodetic coordinates and
// east/north metres around the station origin. Matches the flat-earth
// approximation the station itself uses, so positions round-trip with it.

export interface GeoPoint {
  lat: number;
  lon: number;
}

export interface EnuPoint {
  east: number;
  north: number;
}

export const METERS_PER_DEGREE = 111320.0;

function degToRad(deg: number): number {
  return (deg * Math.PI) / 180;
}

export function geoToEnu(origin: GeoPoint, p: GeoPoint): EnuPoint {
  const scale = Math.cos(degToRad(origin.lat));
  return {
    east: (p.lon - origin.lon) * METERS_PER_DEGREE * scale,
    north: (p.lat - origin.lat) * METERS_PER_DEGREE,
  };
}

export function enuToGeo(origin: GeoPoint, p: EnuPoint): GeoPoint {
  const scale = Math.cos(degToRad(origin.lat));
  return {
    lat: origin.lat + p.north / METERS_PER_DEGREE,
    lon: origin.lon + p.east / (METERS_PER_DEGREE * scale),
  };
}

export function enuDistance(a: EnuPoint, b: EnuPoint): number {
  return Math.hypot(a.east - b.east, a.north - b.north);
}
